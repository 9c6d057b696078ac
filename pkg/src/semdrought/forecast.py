"""Drought-vulnerability forecasting.

Builds per-property monthly climatology baselines from observation history,
standardizes the current month against them, folds in the indigenous-
knowledge signal, and classifies the resulting vulnerability index.
"""

import statistics
from bisect import bisect_right, insort
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import IntEnum

from .cep.engine import Firing
from .errors import SemDroughtError
from .ik import IkSignal
from .model import CanonicalObservation, Iri, Namespaces, format_utc_instant

MIN_BASELINE_COUNT = 5
DEFAULT_IK_WINDOW_SECONDS = 90 * 86400


class ForecastError(SemDroughtError):
    code = "ForecastError"


class BadWeightsError(ForecastError):
    code = "BadWeights"


class InsufficientBaselineError(ForecastError):
    code = "InsufficientBaseline"


class NoDataError(ForecastError):
    code = "NoData"


@dataclass(frozen=True)
class DviWeights:
    precipitation: float = 0.4
    soil_moisture: float = 0.3
    temperature: float = 0.1
    ik: float = 0.2

    def __post_init__(self):
        parts = (self.precipitation, self.soil_moisture, self.temperature, self.ik)
        if any(w < 0 for w in parts):
            raise BadWeightsError("weights must be non-negative")
        if abs(sum(parts) - 1.0) > 1e-9:
            raise BadWeightsError(f"weights must sum to 1, got {sum(parts)}")


class Severity(IntEnum):
    NONE = 0
    WATCH = 1
    WARNING = 2
    SEVERE = 3

    @property
    def label(self) -> str:
        return self.name.capitalize() if self is not Severity.NONE else "None"


DEFAULT_SEVERITY_THRESHOLDS = (0.25, 0.5, 0.75)


@dataclass
class ClimatologyEntry:
    mean: float = 0.0
    std: float = 0.0
    count: int = 0
    samples: list[float] = field(default_factory=list)   # kept sorted
    usable: bool = False


class BaselineClimatology:
    """Per (canonical property, calendar month) sample statistics."""

    def __init__(self, min_count: int = MIN_BASELINE_COUNT):
        self.min_count = min_count
        self._entries: dict[tuple[str, int], ClimatologyEntry] = {}

    def entry(self, prop: Iri, month: int) -> ClimatologyEntry | None:
        return self._entries.get((prop.value, month))

    def add_sample(self, prop: Iri, month: int, value: float) -> None:
        entry = self._entries.setdefault((prop.value, month), ClimatologyEntry())
        insort(entry.samples, value)

    def finalize(self) -> None:
        for entry in self._entries.values():
            entry.count = len(entry.samples)
            entry.mean = statistics.fmean(entry.samples) if entry.samples else 0.0
            entry.std = (statistics.stdev(entry.samples)
                         if entry.count >= 2 else 0.0)
            entry.usable = entry.count >= self.min_count and entry.std > 0.0


def month_of(timestamp: int) -> int:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).month


def build_climatology(
    history: list[CanonicalObservation],
    min_count: int = MIN_BASELINE_COUNT,
) -> BaselineClimatology:
    """Group observation values by (property, calendar month); sample mean
    and n-1 standard deviation; short or flat entries are marked unusable."""
    climatology = BaselineClimatology(min_count)
    for obs in history:
        climatology.add_sample(obs.property, month_of(obs.timestamp), obs.value)
    climatology.finalize()
    return climatology


def standardized_anomaly(x: float, mean: float, std: float) -> float:
    if std <= 0:
        raise InsufficientBaselineError("standard deviation must be positive")
    return (x - mean) / std


def empirical_percentile(x: float, sorted_samples: list[float]) -> float:
    """Weibull plotting position r/(n+1), r = samples <= x, no interpolation."""
    if not sorted_samples:
        raise InsufficientBaselineError("no baseline samples for percentile")
    rank = bisect_right(sorted_samples, x)
    return rank / (len(sorted_samples) + 1)


def _clamp01(u: float) -> float:
    return max(0.0, min(1.0, u))


def _anomaly_term(u: float) -> float:
    # a two-sigma anomaly saturates its term
    return _clamp01(u / 2.0)


def compute_dvi(
    z_precip: float,
    sm_percentile: float,
    z_temp: float,
    ik_value: float,
    weights: DviWeights = DviWeights(),
) -> float:
    if not 0.0 <= sm_percentile <= 1.0:
        raise ValueError(f"soil-moisture percentile out of [0, 1]: {sm_percentile}")
    if not -1.0 <= ik_value <= 1.0:
        raise ValueError(f"ik signal out of [-1, 1]: {ik_value}")
    return _clamp01(
        weights.precipitation * _anomaly_term(-z_precip)
        + weights.soil_moisture * (1.0 - sm_percentile)
        + weights.temperature * _anomaly_term(z_temp)
        + weights.ik * (ik_value + 1.0) / 2.0
    )


def classify_severity(
    dvi: float,
    thresholds: tuple[float, float, float] = DEFAULT_SEVERITY_THRESHOLDS,
) -> Severity:
    if not 0.0 <= dvi <= 1.0:
        raise ValueError(f"vulnerability index out of [0, 1]: {dvi}")
    watch, warning, severe = thresholds
    if dvi >= severe:
        return Severity.SEVERE
    if dvi >= warning:
        return Severity.WARNING
    if dvi >= watch:
        return Severity.WATCH
    return Severity.NONE


@dataclass(frozen=True)
class DroughtIndexReport:
    region: str
    period: str                 # YYYY-MM
    z_precip: float
    sm_percentile: float
    z_temp: float
    ik_value: float
    dvi: float
    severity: Severity


@dataclass(frozen=True)
class ForecastBulletin:
    region: str
    issued_at: int
    period: str
    report: DroughtIndexReport
    ik: IkSignal
    evidence: tuple[Firing, ...]
    summary: str

    def to_json_dict(self) -> dict:
        return {
            "region": self.region,
            "issued_at": format_utc_instant(self.issued_at),
            "period": self.period,
            "dvi": round(self.report.dvi, 6),
            "severity": self.report.severity.label,
            "z_precip": round(self.report.z_precip, 6),
            "sm_percentile": round(self.report.sm_percentile, 6),
            "z_temp": round(self.report.z_temp, 6),
            "ik": {"value": round(self.ik.value, 6), "support": self.ik.support},
            "evidence": [
                {"rule": f.rule, "at": format_utc_instant(f.window_end)}
                for f in self.evidence
            ],
            "summary": self.summary,
        }


def period_bounds(period: str) -> tuple[int, int]:
    """[start, end) epoch seconds of a YYYY-MM period."""
    try:
        year, month = (int(part) for part in period.split("-"))
        start = datetime(year, month, 1, tzinfo=timezone.utc)
    except (ValueError, TypeError):
        raise ValueError(f"not a YYYY-MM period: {period!r}")
    if month == 12:
        end = datetime(year + 1, 1, 1, tzinfo=timezone.utc)
    else:
        end = datetime(year, month + 1, 1, tzinfo=timezone.utc)
    return int(start.timestamp()), int(end.timestamp())


def make_bulletin(
    region: str,
    period: str,
    observations: list[CanonicalObservation],
    climatology: BaselineClimatology,
    ik_signal_fn,
    firings: list[Firing],
    ns: Namespaces | None = None,
    weights: DviWeights = DviWeights(),
    thresholds: tuple[float, float, float] = DEFAULT_SEVERITY_THRESHOLDS,
    ik_window_seconds: int = DEFAULT_IK_WINDOW_SECONDS,
) -> ForecastBulletin:
    """Assemble the dissemination bulletin for one region and month.

    ``observations`` must already be the region's observations;
    ``ik_signal_fn(region, window)`` supplies the indigenous-knowledge
    signal. The issue instant is pinned to the period end so output is a
    pure function of its inputs.
    """
    ns = ns or Namespaces()
    start, end = period_bounds(period)
    month = month_of(start)
    in_period = [o for o in observations if start <= o.timestamp < end]
    if not in_period:
        raise NoDataError(f"no observations for {region} in {period}")

    precip = ns.iri("ex:precipitation")
    soil = ns.iri("ex:soilMoisture")
    temp = ns.iri("ex:airTemperature")

    def values_of(prop: Iri) -> list[float]:
        series = [o.value for o in in_period if o.property == prop]
        if not series:
            raise NoDataError(
                f"no {prop.local_name()} observations for {region} in {period}"
            )
        return series

    precip_total = sum(values_of(precip))
    soil_mean = statistics.fmean(values_of(soil))
    temp_mean = statistics.fmean(values_of(temp))

    def usable_entry(prop: Iri):
        entry = climatology.entry(prop, month)
        if entry is None or not entry.usable:
            raise InsufficientBaselineError(
                f"baseline unusable for {prop.local_name()} in month {month}"
            )
        return entry

    precip_entry = usable_entry(precip)
    temp_entry = usable_entry(temp)
    soil_entry = climatology.entry(soil, month)
    if soil_entry is None or not soil_entry.samples:
        raise InsufficientBaselineError(f"no soil-moisture baseline for month {month}")

    z_precip = standardized_anomaly(precip_total, precip_entry.mean, precip_entry.std)
    z_temp = standardized_anomaly(temp_mean, temp_entry.mean, temp_entry.std)
    sm_percentile = empirical_percentile(soil_mean, soil_entry.samples)

    if weights.ik == 0.0:
        signal = IkSignal(value=0.0, support=0)   # ablation: ik fully inert
    else:
        signal = ik_signal_fn(region, (end - ik_window_seconds, end))

    dvi = compute_dvi(z_precip, sm_percentile, z_temp, signal.value, weights)
    severity = classify_severity(dvi, thresholds)
    report = DroughtIndexReport(
        region=region, period=period, z_precip=z_precip,
        sm_percentile=sm_percentile, z_temp=z_temp, ik_value=signal.value,
        dvi=dvi, severity=severity,
    )
    evidence = tuple(f for f in firings if start <= f.window_end < end)
    summary = (
        f"{region} {period}: DVI {dvi:.3f} ({severity.label}); "
        f"precip z {z_precip:+.2f}, soil pct {sm_percentile:.2f}, "
        f"temp z {z_temp:+.2f}, ik {signal.value:+.2f} over {signal.support} reports"
    )
    return ForecastBulletin(
        region=region, issued_at=end, period=period, report=report,
        ik=signal, evidence=evidence, summary=summary,
    )
