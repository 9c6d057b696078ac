"""End-to-end wiring: one ingestion path feeding store, engines and forecasts.

Observations replayed from file and observations posted over HTTP travel
the identical route, so replay tests cover the live path. Each region owns
one event engine, preserving the in-order input contract per region while
regions proceed independently.
"""

import json
import os
import threading
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

from ..cep.engine import Engine, Event, Firing
from ..cep.rules import CepRule, parse_ruleset
from ..errors import SemDroughtError
from ..forecast import (
    BaselineClimatology,
    ForecastBulletin,
    NoDataError,
    build_climatology,
    make_bulletin,
    period_bounds,
)
from ..ik import IkObservation, IkRegistry, compile_indicator_rules
from ..ingest import (
    AlignmentTable,
    IngestError,
    RawObservation,
    canonicalize,
    parse_payload,
)
from ..model import (
    RDF_NS,
    CanonicalObservation,
    Iri,
    Namespaces,
    Vocabulary,
    format_utc_instant,
    observation_to_triples,
    parse_utc_instant,
    triples_to_observation,
)
from ..store import TripleStore, builtin_rules
from .config import Config, InvalidConfigError

STORE_FILE = "store.nt"
IK_LOG_FILE = "ik_log.jsonl"
FIRING_LOG_FILE = "firings.jsonl"


class UnknownRegionError(SemDroughtError):
    code = "UnknownRegion"


class DuplicateObservationError(SemDroughtError):
    code = "Duplicate"


@dataclass
class ReplaySummary:
    parsed: int = 0
    rejected: dict[str, int] = dataclass_field(default_factory=dict)
    firings: int = 0

    def reject(self, code: str) -> None:
        self.rejected[code] = self.rejected.get(code, 0) + 1

    def to_json_dict(self) -> dict:
        return {
            "parsed": self.parsed,
            "rejected": dict(sorted(self.rejected.items())),
            "firings": self.firings,
        }


class Pipeline:
    """Mutable middleware state behind a single writer lock."""

    def __init__(self, config: Config):
        self.config = config
        self.ns = Namespaces(config.base_iri)
        self.vocabulary = Vocabulary(self.ns)
        self.table = AlignmentTable.from_json(
            config.alignment_table_path.read_text(encoding="utf-8"), self.vocabulary
        )
        self.ik = IkRegistry.from_json(
            config.indicators_path.read_text(encoding="utf-8")
        )
        self.rules = self._load_rules()
        self.store = TripleStore()
        for triple in self.vocabulary.as_triples():
            self.store.insert(triple)

        self._engines = {region: Engine(self.rules) for region in config.regions}
        self._region_of_sensor: dict[str, str] = {}
        for region, sensors in config.regions.items():
            for raw_id in sensors:
                self._region_of_sensor[self.table.sensor(raw_id).iri.value] = region
        self._observations: dict[str, list[CanonicalObservation]] = {
            region: [] for region in config.regions
        }
        self._firings: list[tuple[str, Firing]] = []
        self._event_count = 0
        self.lock = threading.RLock()

    def _load_rules(self) -> list[CepRule]:
        try:
            rules = parse_ruleset(
                self.config.rules_path.read_text(encoding="utf-8"), self.ns
            )
        except SemDroughtError as exc:
            raise InvalidConfigError("rules", str(exc))
        if self.config.compile_ik_rules:
            compiled = compile_indicator_rules(
                self.ik.indicators,
                k=self.config.ik_rule_count,
                window_seconds=self.config.ik_rule_window_days * 86400,
                ns=self.ns,
            )
            existing = {r.name for r in rules}
            rules.extend(r for r in compiled if r.name not in existing)
        return rules

    # -- ingestion ------------------------------------------------------------

    @property
    def regions(self) -> tuple[str, ...]:
        return tuple(self.config.regions)

    @property
    def event_count(self) -> int:
        return self._event_count

    @property
    def firings(self) -> tuple[tuple[str, Firing], ...]:
        return tuple(self._firings)

    def region_of(self, sensor: Iri) -> str:
        region = self._region_of_sensor.get(sensor.value)
        if region is None:
            raise UnknownRegionError(f"sensor {sensor.value} belongs to no region")
        return region

    def ingest_raw(self, raw: RawObservation) -> tuple[CanonicalObservation, list[Firing]]:
        """Canonicalize, store as triples and stream into the region engine."""
        obs = canonicalize(raw, self.table)
        with self.lock:
            region = self.region_of(obs.sensor_id)
            triples = observation_to_triples(self.ns, obs)
            if triples[0] in self.store:
                raise DuplicateObservationError(
                    f"observation already ingested: {obs.id.value}"
                )
            event = Event(
                kind=obs.property.value,
                timestamp=obs.timestamp,
                value=obs.value,
                attributes=(("region", region), ("sensor", obs.sensor_id.value)),
            )
            firings = self._engines[region].push_event(event)  # may reject; store untouched
            for triple in triples:
                self.store.insert(triple)
            self._observations[region].append(obs)
            self._event_count += 1
            self._log_firings(region, firings)
        return obs, firings

    def ingest_payload(self, source_format: str, payload: str):
        return self.ingest_raw(parse_payload(source_format, payload))

    def ingest_ik(self, obs: IkObservation) -> list[Firing]:
        with self.lock:
            if obs.region not in self.config.regions:
                raise UnknownRegionError(f"unknown region: {obs.region}")
            event = self.ik.record_observation(obs)
            firings = self._engines[obs.region].push_event(event)
            self._event_count += 1
            self._log_firings(obs.region, firings)
        return firings

    def ingest_ik_json(self, document: str) -> list[Firing]:
        try:
            payload = json.loads(document)
            obs = IkObservation(
                indicator_id=str(payload["indicator_id"]),
                timestamp=parse_utc_instant(payload["timestamp"]),
                region=str(payload["region"]),
                confidence=float(payload["confidence"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"bad indigenous-knowledge payload: {exc}")
        return self.ingest_ik(obs)

    def _log_firings(self, region: str, firings: list[Firing]) -> None:
        self._firings.extend((region, f) for f in firings)

    def flush_engines(self) -> int:
        """Drain pending windows in every region; returns new firing count."""
        with self.lock:
            count = 0
            for region in sorted(self._engines):
                firings = self._engines[region].flush()
                self._log_firings(region, firings)
                count += len(firings)
            return count

    # -- replay ---------------------------------------------------------------

    def replay(self, dataset_path: str | Path, speed: float = 0.0) -> ReplaySummary:
        """Feed a ``format|payload`` line file through the ingestion path.

        Per-line failures are tallied, never fatal. At end of input the
        engines drain, the store saturates under the built-in rule set,
        and state persists if a persistence directory is configured.
        """
        summary = ReplaySummary()
        previous_ts: int | None = None
        with open(dataset_path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                tag, _, payload = line.partition("|")
                if not payload:
                    summary.reject("Malformed")
                    continue
                try:
                    if tag == "ik":
                        firings = self.ingest_ik_json(payload)
                        event_ts = self._last_ik_timestamp()
                    else:
                        obs, firings = self.ingest_payload(tag, payload)
                        event_ts = obs.timestamp
                except SemDroughtError as exc:
                    summary.reject(exc.code)
                    continue
                summary.parsed += 1
                summary.firings += len(firings)
                if speed > 0 and previous_ts is not None and event_ts > previous_ts:
                    time.sleep((event_ts - previous_ts) / speed)
                previous_ts = event_ts
        summary.firings += self.flush_engines()
        with self.lock:
            self.store.saturate(builtin_rules(self.ns))
        if self.config.persistence_dir is not None:
            self.persist(self.config.persistence_dir)
        return summary

    def _last_ik_timestamp(self) -> int | None:
        log = self.ik.observations
        return log[-1].timestamp if log else None

    # -- forecasting ----------------------------------------------------------

    def _climatology(self, region: str, period_start: int) -> BaselineClimatology:
        window = self.config.baseline_window
        if window is None:
            window = (0, period_start)
        history = [o for o in self._observations[region]
                   if window[0] <= o.timestamp < window[1]]
        return build_climatology(history, self.config.min_baseline_count)

    def bulletin(self, region: str, period: str | None = None) -> ForecastBulletin:
        """Forecast for a region period; drains engines so evidence is current."""
        self.flush_engines()
        with self.lock:
            if region not in self.config.regions:
                raise UnknownRegionError(f"unknown region: {region}")
            if period is None:
                period = self._latest_period(region)
            start, _ = period_bounds(period)
            return make_bulletin(
                region=region,
                period=period,
                observations=list(self._observations[region]),
                climatology=self._climatology(region, start),
                ik_signal_fn=self.ik.signal,
                firings=[f for r, f in self._firings if r == region],
                ns=self.ns,
                weights=self.config.weights,
                thresholds=self.config.severity_thresholds,
                ik_window_seconds=self.config.ik_window_days * 86400,
            )

    def _latest_period(self, region: str) -> str:
        observations = self._observations[region]
        if not observations:
            raise NoDataError(f"no observations for region {region}")
        from datetime import datetime, timezone
        latest = max(o.timestamp for o in observations)
        stamp = datetime.fromtimestamp(latest, tz=timezone.utc)
        return f"{stamp.year:04d}-{stamp.month:02d}"

    # -- persistence ----------------------------------------------------------

    def persist(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        _atomic_write(directory / STORE_FILE, self.store.serialize())
        ik_lines = [
            json.dumps({
                "indicator_id": o.indicator_id,
                "timestamp": format_utc_instant(o.timestamp),
                "region": o.region,
                "confidence": o.confidence,
            }, sort_keys=True)
            for o in self.ik.observations
        ]
        _atomic_write(directory / IK_LOG_FILE, "".join(l + "\n" for l in ik_lines))
        firing_lines = [
            json.dumps({
                "region": region,
                "rule": firing.rule,
                "at": format_utc_instant(firing.window_end),
                "kind": firing.event.kind,
            }, sort_keys=True)
            for region, firing in self._firings
        ]
        _atomic_write(directory / FIRING_LOG_FILE, "".join(l + "\n" for l in firing_lines))

    def restore(self, directory: str | Path) -> None:
        """Rebuild forecastable state from persisted artifacts.

        Observations come back out of the triple store through the inverse
        mapping; engines stay empty (persisted firings stand in for them).
        """
        directory = Path(directory)
        store_path = directory / STORE_FILE
        if not store_path.is_file():
            raise SemDroughtError(f"no persisted store at {store_path}")
        with self.lock:
            self.store = TripleStore.load(store_path.read_text(encoding="utf-8"))
            for region in self._observations:
                self._observations[region] = []
            for obs in extract_observations(self.store, self.ns):
                region = self._region_of_sensor.get(obs.sensor_id.value)
                if region is not None:
                    self._observations[region].append(obs)
                    self._event_count += 1
            ik_path = directory / IK_LOG_FILE
            if ik_path.is_file():
                for line in ik_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    payload = json.loads(line)
                    self.ik.record_observation(IkObservation(
                        indicator_id=payload["indicator_id"],
                        timestamp=parse_utc_instant(payload["timestamp"]),
                        region=payload["region"],
                        confidence=float(payload["confidence"]),
                    ))
                    self._event_count += 1
            firing_path = directory / FIRING_LOG_FILE
            self._firings = []
            if firing_path.is_file():
                for line in firing_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    payload = json.loads(line)
                    at = parse_utc_instant(payload["at"])
                    self._firings.append((payload["region"], Firing(
                        rule=payload["rule"], window_end=at,
                        event=Event(kind=payload["kind"], timestamp=at),
                    )))


def extract_observations(store: TripleStore, ns: Namespaces) -> list[CanonicalObservation]:
    """All observations recoverable from a store, in timestamp order."""
    rdf_type = Iri(RDF_NS + "type")
    obs_class = ns.iri("ex:ObservationEvent")
    subjects = {t.subject for t in store
                if t.predicate == rdf_type and t.object == obs_class
                and not store.is_inferred(t)}
    grouped: dict[Iri, list] = {s: [] for s in subjects}
    for triple in store:
        if triple.subject in grouped:
            grouped[triple.subject].append(triple)
    observations = [triples_to_observation(ns, group) for group in grouped.values()]
    observations.sort(key=lambda o: (o.timestamp, o.id.value))
    return observations


def _atomic_write(path: Path, content: str) -> None:
    temp = path.with_suffix(path.suffix + ".tmp")
    temp.write_text(content, encoding="utf-8")
    os.replace(temp, path)
