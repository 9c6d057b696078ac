"""Unified vocabulary and canonical observation model.

Defines RDF-style terms and triples, the four-category class annotations
(Object / State / Process / Event), the canonical property and unit
vocabulary with influence relations, and the lossless mapping between
canonical observations and their 8-triple representation.
"""

import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .errors import SemDroughtError

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD_NS = "http://www.w3.org/2001/XMLSchema#"
DEFAULT_BASE_IRI = "http://example.org/semdrought#"

# prefixes accepted in compact IRIs; "ex" expands against the configured base
REGISTERED_PREFIXES = ("rdf", "ex", "xsd")

_PREFIXED_IRI = re.compile(r"^(%s):\S+$" % "|".join(REGISTERED_PREFIXES))


class ModelError(SemDroughtError):
    code = "ModelError"


class MissingFieldError(ModelError):
    code = "MissingField"


class AmbiguousError(ModelError):
    code = "Ambiguous"


class BadLiteralError(ModelError):
    code = "BadLiteral"


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Iri:
    value: str

    def __post_init__(self):
        v = self.value
        if not v or any(c.isspace() for c in v):
            raise ValueError(f"invalid IRI: {v!r}")
        if "://" not in v and not _PREFIXED_IRI.match(v):
            raise ValueError(f"IRI needs a scheme or registered prefix: {v!r}")

    def local_name(self) -> str:
        """Segment after the last '/', '#' or ':'."""
        return re.split(r"[/#:]", self.value)[-1]


class Datatype(Enum):
    DOUBLE = "double"
    DATETIME = "dateTime"
    STRING = "string"
    INTEGER = "integer"

    @property
    def iri(self) -> str:
        return XSD_NS + self.value


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Datatype

    def __post_init__(self):
        if self.datatype is Datatype.DOUBLE:
            try:
                v = float(self.lexical)
            except ValueError:
                raise ValueError(f"not a double literal: {self.lexical!r}")
            if v != v or v in (float("inf"), float("-inf")):
                raise ValueError(f"double literal must be finite: {self.lexical!r}")
        elif self.datatype is Datatype.DATETIME:
            parse_utc_instant(self.lexical)
        elif self.datatype is Datatype.INTEGER:
            try:
                int(self.lexical)
            except ValueError:
                raise ValueError(f"not an integer literal: {self.lexical!r}")

    def as_float(self) -> float:
        return float(self.lexical)


@dataclass(frozen=True)
class BlankNode:
    label: str

    def __post_init__(self):
        if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", self.label):
            raise ValueError(f"invalid blank node label: {self.label!r}")


Term = Iri | Literal | BlankNode


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __post_init__(self):
        if not isinstance(self.subject, (Iri, BlankNode)):
            raise ValueError("triple subject must be an IRI or blank node")
        if not isinstance(self.predicate, Iri):
            raise ValueError("triple predicate must be an IRI")


# ---------------------------------------------------------------------------
# Canonical lexical forms
# ---------------------------------------------------------------------------

def canonical_double(value: float) -> str:
    """Shortest round-tripping form; "0" for zero, no exponent in [1e-3, 1e7)."""
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("double literal must be finite")
    if value == 0.0:
        return "0"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    # repr is shortest-round-trip and stays positional on [1e-4, 1e16),
    # which covers the mandated no-exponent window [1e-3, 1e7)
    return repr(value)


def format_utc_instant(timestamp: int) -> str:
    """Epoch seconds to ISO-8601 UTC with mandatory Z suffix."""
    dt = datetime.fromtimestamp(int(timestamp), tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_utc_instant(text: str) -> int:
    """ISO-8601 UTC instant to epoch seconds; whole seconds and Z required."""
    if not re.fullmatch(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z", text):
        raise ValueError(f"not an ISO-8601 UTC instant: {text!r}")
    try:
        dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ")
    except ValueError:
        raise ValueError(f"not an ISO-8601 UTC instant: {text!r}")
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


# ---------------------------------------------------------------------------
# Namespaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Namespaces:
    """Prefix table: rdf: is fixed, ex: follows the configured base IRI."""

    base_iri: str = DEFAULT_BASE_IRI

    def expand(self, compact: str) -> str:
        if compact.startswith("ex:"):
            return self.base_iri + compact[3:]
        if compact.startswith("rdf:"):
            return RDF_NS + compact[4:]
        if compact.startswith("xsd:"):
            return XSD_NS + compact[4:]
        return compact

    def iri(self, compact: str) -> Iri:
        return Iri(self.expand(compact))

    def join(self, relative: str) -> Iri:
        base = self.base_iri
        if not base.endswith(("#", "/")):
            base += "/"
        return Iri(base + relative)


# ---------------------------------------------------------------------------
# Ontology vocabulary
# ---------------------------------------------------------------------------

class OntologyCategory(Enum):
    OBJECT = "Object"
    STATE = "State"
    PROCESS = "Process"
    EVENT = "Event"


# canonical property -> canonical unit, as local names under the base IRI
_CANONICAL_PAIRS = (
    ("soilMoisture", "percentVolumetric"),
    ("precipitation", "millimetre"),
    ("airTemperature", "degreeCelsius"),
    ("relativeHumidity", "percent"),
    ("windSpeed", "metrePerSecond"),
)

_SHIPPED_CLASSES = (
    ("Sensor", OntologyCategory.OBJECT),
    ("ObservationEvent", OntologyCategory.EVENT),
    ("DroughtProcess", OntologyCategory.PROCESS),
    ("DryCondition", OntologyCategory.STATE),
)


class Vocabulary:
    """Canonical properties, units, class categories and influence facts."""

    def __init__(self, namespaces: Namespaces | None = None):
        self.ns = namespaces or Namespaces()
        self.property_units: dict[Iri, Iri] = {}
        self._categories: dict[Iri, OntologyCategory] = {}
        self.influences: list[tuple[Iri, Iri]] = []
        for prop, unit in _CANONICAL_PAIRS:
            self.register_property(self.ns.iri("ex:" + prop), self.ns.iri("ex:" + unit))
        for cls, cat in _SHIPPED_CLASSES:
            self.register_class(self.ns.iri("ex:" + cls), cat)
        self.add_influence(self.ns.iri("ex:soilMoisture"), self.ns.iri("ex:airTemperature"))

    def register_property(self, prop: Iri, unit: Iri) -> None:
        if prop in self.property_units:
            raise ValueError(f"property already registered: {prop.value}")
        self.property_units[prop] = unit

    def register_class(self, cls: Iri, category: OntologyCategory) -> None:
        if cls in self._categories:
            raise ValueError(f"class already annotated: {cls.value}")
        self._categories[cls] = category

    def add_influence(self, prop: Iri, influenced_by: Iri) -> None:
        self.influences.append((prop, influenced_by))

    def category_of(self, cls: Iri) -> OntologyCategory | None:
        return self._categories.get(cls)

    @property
    def properties(self) -> tuple[Iri, ...]:
        return tuple(self.property_units)

    @property
    def units(self) -> tuple[Iri, ...]:
        return tuple(self.property_units.values())

    def canonical_unit(self, prop: Iri) -> Iri | None:
        return self.property_units.get(prop)

    def as_triples(self) -> list[Triple]:
        """Static ontology facts seeded into the triple store."""
        ns = self.ns
        out: list[Triple] = []
        for cls, cat in self._categories.items():
            cat_iri = ns.iri("ex:" + cat.value)
            out.append(Triple(cls, ns.iri("ex:ontologyCategory"), cat_iri))
            out.append(Triple(cls, ns.iri("ex:subClassOf"), cat_iri))
        for prop, unit in self.property_units.items():
            out.append(Triple(prop, ns.iri("ex:canonicalUnit"), unit))
        for prop, by in self.influences:
            out.append(Triple(prop, ns.iri("ex:influencedBy"), by))
        return out


# ---------------------------------------------------------------------------
# Canonical observation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CanonicalObservation:
    id: Iri
    sensor_id: Iri
    property: Iri
    value: float
    unit: Iri
    timestamp: int       # UTC seconds since epoch
    lat: float
    lon: float

    def __post_init__(self):
        if self.value != self.value or self.value in (float("inf"), float("-inf")):
            raise ValueError("observation value must be finite")
        if self.timestamp < 0 or self.timestamp != int(self.timestamp):
            raise ValueError("timestamp must be non-negative integer seconds")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        object.__setattr__(self, "timestamp", int(self.timestamp))


def mint_observation_iri(ns: Namespaces, sensor_id: Iri, timestamp: int) -> Iri:
    return ns.join(f"obs/{sensor_id.local_name()}/{int(timestamp)}")


# predicate local names in serialization order
_OBS_PREDICATES = ("bySensor", "observedProperty", "hasValue", "hasUnit", "atTime", "lat", "lon")


def observation_to_triples(ns: Namespaces, obs: CanonicalObservation) -> list[Triple]:
    """Exactly eight triples, in a fixed order, with distinct predicates."""
    return [
        Triple(obs.id, Iri(RDF_NS + "type"), ns.iri("ex:ObservationEvent")),
        Triple(obs.id, ns.iri("ex:bySensor"), obs.sensor_id),
        Triple(obs.id, ns.iri("ex:observedProperty"), obs.property),
        Triple(obs.id, ns.iri("ex:hasValue"), Literal(canonical_double(obs.value), Datatype.DOUBLE)),
        Triple(obs.id, ns.iri("ex:hasUnit"), obs.unit),
        Triple(obs.id, ns.iri("ex:atTime"), Literal(format_utc_instant(obs.timestamp), Datatype.DATETIME)),
        Triple(obs.id, ns.iri("ex:lat"), Literal(canonical_double(obs.lat), Datatype.DOUBLE)),
        Triple(obs.id, ns.iri("ex:lon"), Literal(canonical_double(obs.lon), Datatype.DOUBLE)),
    ]


def triples_to_observation(ns: Namespaces, triples: set[Triple] | list[Triple]) -> CanonicalObservation:
    """Inverse of observation_to_triples; round-trips every field exactly."""
    rdf_type = Iri(RDF_NS + "type")
    obs_class = ns.iri("ex:ObservationEvent")
    subjects = {t.subject for t in triples if t.predicate == rdf_type and t.object == obs_class}
    if not subjects:
        raise MissingFieldError("no subject typed as an observation event")
    if len(subjects) > 1:
        raise AmbiguousError(f"{len(subjects)} subjects typed as observation events")
    subject = subjects.pop()
    if not isinstance(subject, Iri):
        raise BadLiteralError("observation subject must be an IRI")

    by_pred: dict[str, Term] = {}
    for t in triples:
        if t.subject == subject and isinstance(t.predicate, Iri):
            by_pred[t.predicate.value] = t.object

    def fetch(local: str) -> Term:
        key = ns.expand("ex:" + local)
        if key not in by_pred:
            raise MissingFieldError(f"missing predicate ex:{local}")
        return by_pred[key]

    def as_literal(term: Term, datatype: Datatype, local: str) -> Literal:
        if not isinstance(term, Literal) or term.datatype is not datatype:
            raise BadLiteralError(f"ex:{local} must be a {datatype.value} literal")
        return term

    def as_iri(term: Term, local: str) -> Iri:
        if not isinstance(term, Iri):
            raise BadLiteralError(f"ex:{local} must be an IRI")
        return term

    try:
        value = as_literal(fetch("hasValue"), Datatype.DOUBLE, "hasValue").as_float()
        lat = as_literal(fetch("lat"), Datatype.DOUBLE, "lat").as_float()
        lon = as_literal(fetch("lon"), Datatype.DOUBLE, "lon").as_float()
        timestamp = parse_utc_instant(as_literal(fetch("atTime"), Datatype.DATETIME, "atTime").lexical)
    except ValueError as exc:
        raise BadLiteralError(str(exc))

    return CanonicalObservation(
        id=subject,
        sensor_id=as_iri(fetch("bySensor"), "bySensor"),
        property=as_iri(fetch("observedProperty"), "observedProperty"),
        value=value,
        unit=as_iri(fetch("hasUnit"), "hasUnit"),
        timestamp=timestamp,
        lat=lat,
        lon=lon,
    )
