"""Indigenous-knowledge drought indicators.

Indicator definitions (species behavior, flowering, presence/absence signs)
are configuration; observations against them aggregate into a bounded,
signed dryness signal and compile into count-based detection rules.
"""

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .errors import SemDroughtError
from .cep.engine import Event
from .cep.rules import CepRule, parse_rule
from .model import Namespaces

DRIER_EVENT_KIND = "IkDrierObservation"
WETTER_EVENT_KIND = "IkWetterObservation"


class IkError(SemDroughtError):
    code = "IkError"


class DuplicateIdError(IkError):
    code = "DuplicateId"


class InvalidWeightError(IkError):
    code = "InvalidWeight"


class UnknownIndicatorError(IkError):
    code = "UnknownIndicator"


class OutOfSeasonError(IkError):
    code = "OutOfSeason"


class BadConfidenceError(IkError):
    code = "BadConfidence"


class IndicatorKind(Enum):
    PRESENCE = "presence"
    ABSENCE = "absence"
    BEHAVIOR = "behavior"
    FLOWERING = "flowering"


class Valence(Enum):
    DRIER = 1
    WETTER = -1


@dataclass(frozen=True)
class IkIndicator:
    id: str
    phenomenon: str
    kind: IndicatorKind
    valence: Valence
    weight: float
    season: frozenset[int]     # calendar months, 1..12
    region: str

    def __post_init__(self):
        if not self.season or not all(1 <= m <= 12 for m in self.season):
            raise ValueError("season must be a non-empty set of months 1..12")
        object.__setattr__(self, "season", frozenset(self.season))


@dataclass(frozen=True)
class IkObservation:
    indicator_id: str
    timestamp: int
    region: str
    confidence: float


@dataclass(frozen=True)
class IkSignal:
    value: float     # [-1, +1], +1 strongly drier
    support: int

    def __post_init__(self):
        if self.support == 0 and self.value != 0.0:
            raise ValueError("a signal without support must be zero")


def _month_of(timestamp: int) -> int:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).month


class IkRegistry:
    """Indicator definitions plus the append-only observation log."""

    def __init__(self):
        self._indicators: dict[str, IkIndicator] = {}
        self._log: list[IkObservation] = []

    def register_indicator(self, indicator: IkIndicator) -> None:
        if not 0.0 < indicator.weight <= 1.0:
            raise InvalidWeightError(
                f"indicator {indicator.id}: weight must lie in (0, 1]"
            )
        if indicator.id in self._indicators:
            raise DuplicateIdError(f"indicator id already registered: {indicator.id}")
        self._indicators[indicator.id] = indicator

    def indicator(self, indicator_id: str) -> IkIndicator | None:
        return self._indicators.get(indicator_id)

    @property
    def indicators(self) -> tuple[IkIndicator, ...]:
        return tuple(self._indicators.values())

    @property
    def observations(self) -> tuple[IkObservation, ...]:
        return tuple(self._log)

    def record_observation(self, obs: IkObservation) -> Event:
        """Log the observation and return its stream event for the engine."""
        indicator = self._indicators.get(obs.indicator_id)
        if indicator is None:
            raise UnknownIndicatorError(f"unknown indicator: {obs.indicator_id}")
        if not 0.0 <= obs.confidence <= 1.0:
            raise BadConfidenceError(f"confidence out of [0, 1]: {obs.confidence}")
        month = _month_of(obs.timestamp)
        if month not in indicator.season:
            raise OutOfSeasonError(
                f"indicator {indicator.id} is out of season in month {month}"
            )
        self._log.append(obs)
        kind = (DRIER_EVENT_KIND if indicator.valence is Valence.DRIER
                else WETTER_EVENT_KIND)
        return Event(
            kind=kind,
            timestamp=obs.timestamp,
            value=indicator.weight * obs.confidence,
            attributes=(("indicator", indicator.id), ("region", obs.region)),
        )

    def signal(self, region: str, window: tuple[int, int]) -> IkSignal:
        """Weighted dryness ratio over in-window (start, end] observations."""
        start, end = window
        numerator = 0.0
        denominator = 0.0
        support = 0
        for obs in self._log:
            if obs.region != region or not start < obs.timestamp <= end:
                continue
            indicator = self._indicators[obs.indicator_id]
            mass = indicator.weight * obs.confidence
            numerator += indicator.valence.value * mass
            denominator += mass
            support += 1
        if support == 0 or denominator == 0.0:
            return IkSignal(value=0.0, support=support)
        value = numerator / denominator
        return IkSignal(value=max(-1.0, min(1.0, value)), support=support)

    @classmethod
    def from_json(cls, document: str) -> "IkRegistry":
        """Load indicator definitions from a JSON array."""
        try:
            payload = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad indicator JSON: {exc.msg}")
        if not isinstance(payload, list):
            raise ValueError("indicator file must hold a JSON array")
        registry = cls()
        for item in payload:
            registry.register_indicator(IkIndicator(
                id=item["id"],
                phenomenon=item.get("phenomenon", ""),
                kind=IndicatorKind(item["kind"]),
                valence=Valence[item["valence"].upper()],
                weight=float(item["weight"]),
                season=frozenset(item["season"]),
                region=item.get("region", ""),
            ))
        return registry


def compile_indicator_rules(
    indicators: tuple[IkIndicator, ...],
    k: int,
    window_seconds: int,
    ns: Namespaces | None = None,
    severity: float = 0.4,
) -> list[CepRule]:
    """Count-threshold rules over the drier and wetter observation streams.

    The texts are fed back through the rule parser so the compiled form is
    guaranteed to round-trip."""
    if k < 1:
        raise ValueError("observation count threshold must be at least 1")
    if window_seconds <= 0 or window_seconds % 60:
        raise ValueError("window must be a positive whole number of minutes")
    del indicators  # reserved for per-indicator rule variants
    window = _window_text(window_seconds)
    texts = [
        f"RULE ik_drier WHEN COUNT({DRIER_EVENT_KIND}) >= {k} "
        f"WITHIN {window} EMIT IkDrierSignal SEVERITY {severity}",
        f"RULE ik_wetter WHEN COUNT({WETTER_EVENT_KIND}) >= {k} "
        f"WITHIN {window} EMIT IkWetterSignal SEVERITY {severity}",
    ]
    return [parse_rule(text, ns) for text in texts]


def _window_text(seconds: int) -> str:
    for unit, size in (("d", 86400), ("h", 3600), ("m", 60)):
        if seconds % size == 0:
            return f"{seconds // size}{unit}"
    raise ValueError("window must be expressible in whole minutes")
