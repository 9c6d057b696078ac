"""Heterogeneous observation ingestion.

Parses CSV, JSON and a minimal XML observation subset into a raw record,
then aligns divergent property names, units and sensor ids to the
canonical vocabulary through a lookup table with affine unit conversion.
"""

import json
import math
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .errors import SemDroughtError
from .model import (
    CanonicalObservation,
    Iri,
    Vocabulary,
    canonical_double,
    mint_observation_iri,
    parse_utc_instant,
)

DEFAULT_CSV_SCHEMA = ("sensor_id", "property", "value", "unit", "timestamp", "lat", "lon")


class IngestError(SemDroughtError):
    code = "IngestError"


class ColumnCountError(IngestError):
    code = "ColumnCount"


class EmptyFieldError(IngestError):
    code = "EmptyField"


class MalformedError(IngestError):
    code = "Malformed"


class MissingKeyError(IngestError):
    code = "MissingKey"


class WrongTypeError(IngestError):
    code = "WrongType"


class MissingElementError(IngestError):
    code = "MissingElement"


class UnknownTermError(IngestError):
    code = "UnknownTerm"

    def __init__(self, message: str = "", term: str = ""):
        super().__init__(message)
        self.term = term


class UnknownUnitError(IngestError):
    code = "UnknownUnit"

    def __init__(self, message: str = "", term: str = ""):
        super().__init__(message)
        self.term = term


class UnitMismatchError(IngestError):
    code = "UnitMismatch"


class BadTimestampError(IngestError):
    code = "BadTimestamp"


class BadNumberError(IngestError):
    code = "BadNumber"


class OutOfRangeError(IngestError):
    code = "OutOfRange"


class MissingLocationError(IngestError):
    code = "MissingLocation"


class NonFiniteError(IngestError):
    code = "NonFinite"


@dataclass(frozen=True)
class RawObservation:
    source_format: str        # csv | json | xml
    sensor_id_raw: str
    property_raw: str
    value_raw: str
    unit_raw: str
    timestamp_raw: str
    lat_raw: str = ""         # lat/lon may be blank; station metadata fills them
    lon_raw: str = ""

    def __post_init__(self):
        for name in ("sensor_id_raw", "property_raw", "value_raw", "unit_raw", "timestamp_raw"):
            if not getattr(self, name):
                raise EmptyFieldError(f"{name} is blank")


# ---------------------------------------------------------------------------
# Format parsers
# ---------------------------------------------------------------------------

def parse_csv_line(line: str, schema: tuple[str, ...] = DEFAULT_CSV_SCHEMA) -> RawObservation:
    """Comma-split with whitespace trimming; no quoting support."""
    if sorted(schema) != sorted(DEFAULT_CSV_SCHEMA):
        raise ValueError(f"schema must permute {DEFAULT_CSV_SCHEMA}")
    fields = [f.strip() for f in line.split(",")]
    if len(fields) != len(schema):
        raise ColumnCountError(f"expected {len(schema)} columns, got {len(fields)}")
    record = dict(zip(schema, fields))
    for column in ("sensor_id", "property", "value", "unit", "timestamp"):
        if not record[column]:
            raise EmptyFieldError(f"column {column} is blank")
    return RawObservation(
        source_format="csv",
        sensor_id_raw=record["sensor_id"],
        property_raw=record["property"],
        value_raw=record["value"],
        unit_raw=record["unit"],
        timestamp_raw=record["timestamp"],
        lat_raw=record["lat"],
        lon_raw=record["lon"],
    )


def _json_scalar(value, key: str, allow_number: bool) -> str:
    if isinstance(value, str):
        return value
    if allow_number and isinstance(value, (int, float)) and not isinstance(value, bool):
        if isinstance(value, int):
            return str(value)
        if not math.isfinite(value):
            raise WrongTypeError(f"key {key} is not finite")
        return canonical_double(value)
    raise WrongTypeError(f"key {key} has type {type(value).__name__}")


def parse_json_observation(document: str) -> RawObservation:
    """One observation object; numeric values rendered in canonical form."""
    try:
        payload = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedError(f"bad JSON: {exc.msg} at position {exc.pos}")
    if not isinstance(payload, dict):
        raise MalformedError("document must be a single object")
    for key in ("sensor_id", "property", "value", "unit", "timestamp"):
        if key not in payload:
            raise MissingKeyError(f"missing key {key}")
    return RawObservation(
        source_format="json",
        sensor_id_raw=_json_scalar(payload["sensor_id"], "sensor_id", allow_number=False),
        property_raw=_json_scalar(payload["property"], "property", allow_number=False),
        value_raw=_json_scalar(payload["value"], "value", allow_number=True),
        unit_raw=_json_scalar(payload["unit"], "unit", allow_number=False),
        timestamp_raw=_json_scalar(payload["timestamp"], "timestamp", allow_number=False),
        lat_raw=_json_scalar(payload["lat"], "lat", allow_number=True) if "lat" in payload else "",
        lon_raw=_json_scalar(payload["lon"], "lon", allow_number=True) if "lon" in payload else "",
    )


def parse_xml_observation(document: str) -> RawObservation:
    """Minimal <Observation> element set; unknown child elements are ignored."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise MalformedError(f"bad XML: {exc}")
    if root.tag != "Observation":
        raise MalformedError(f"root element must be Observation, got {root.tag}")

    def text_of(tag: str, required: bool) -> str:
        node = root.find(tag)
        text = "" if node is None else (node.text or "").strip()
        if required and not text:
            raise MissingElementError(f"missing element {tag}")
        return text

    result = root.find("result")
    if result is None or not (result.text or "").strip():
        raise MissingElementError("missing element result")
    unit = result.get("uom", "").strip()
    if not unit:
        raise MissingElementError("result element lacks a uom attribute")

    return RawObservation(
        source_format="xml",
        sensor_id_raw=text_of("procedure", required=True),
        property_raw=text_of("observedProperty", required=True),
        value_raw=(result.text or "").strip(),
        unit_raw=unit,
        timestamp_raw=text_of("time", required=True),
        lat_raw=text_of("lat", required=False),
        lon_raw=text_of("lon", required=False),
    )


# ---------------------------------------------------------------------------
# Alignment table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitEntry:
    iri: Iri
    scale: float
    offset: float

    def __post_init__(self):
        if self.scale == 0 or not math.isfinite(self.scale) or not math.isfinite(self.offset):
            raise ValueError("unit entry needs finite scale != 0 and finite offset")


@dataclass(frozen=True)
class SensorEntry:
    iri: Iri
    lat: float | None = None
    lon: float | None = None


def _norm(key: str) -> str:
    return key.strip().lower()


class AlignmentTable:
    """Raw vocabulary to canonical IRIs; lookups are trimmed, case-insensitive."""

    def __init__(self, vocabulary: Vocabulary):
        self.vocabulary = vocabulary
        self.ns = vocabulary.ns
        self._terms: dict[str, Iri] = {}
        self._units: dict[str, UnitEntry] = {}
        self._sensors: dict[str, SensorEntry] = {}

    def add_term(self, raw: str, property_iri: Iri) -> None:
        key = _norm(raw)
        if key in self._terms:
            raise ValueError(f"duplicate term entry under normalization: {raw!r}")
        if property_iri not in self.vocabulary.property_units:
            raise ValueError(f"not a canonical property: {property_iri.value}")
        self._terms[key] = property_iri

    def add_unit(self, raw: str, entry: UnitEntry) -> None:
        key = _norm(raw)
        if key in self._units:
            raise ValueError(f"duplicate unit entry under normalization: {raw!r}")
        if entry.iri not in self.vocabulary.property_units.values():
            raise ValueError(f"unit {entry.iri.value} is canonical for no property")
        self._units[key] = entry

    def add_sensor(self, raw: str, entry: SensorEntry) -> None:
        key = _norm(raw)
        if key in self._sensors:
            raise ValueError(f"duplicate sensor entry under normalization: {raw!r}")
        self._sensors[key] = entry

    def term(self, raw: str) -> Iri | None:
        return self._terms.get(_norm(raw))

    def unit(self, raw: str) -> UnitEntry | None:
        return self._units.get(_norm(raw))

    def sensor(self, raw: str) -> SensorEntry:
        """Table entry, or a sensor IRI minted from the raw id."""
        entry = self._sensors.get(_norm(raw))
        if entry is not None:
            return entry
        local = urllib.parse.quote(raw.strip(), safe="")
        return SensorEntry(iri=self.ns.join(f"sensor/{local}"))

    @classmethod
    def from_json(cls, document: str, vocabulary: Vocabulary) -> "AlignmentTable":
        try:
            payload = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad alignment table JSON: {exc.msg}")
        table = cls(vocabulary)
        ns = vocabulary.ns
        for raw, compact in payload.get("terms", {}).items():
            table.add_term(raw, ns.iri(compact))
        for raw, spec in payload.get("units", {}).items():
            table.add_unit(raw, UnitEntry(
                iri=ns.iri(spec["iri"]),
                scale=float(spec.get("scale", 1.0)),
                offset=float(spec.get("offset", 0.0)),
            ))
        for raw, spec in payload.get("sensors", {}).items():
            table.add_sensor(raw, SensorEntry(
                iri=ns.iri(spec["iri"]),
                lat=float(spec["lat"]) if "lat" in spec else None,
                lon=float(spec["lon"]) if "lon" in spec else None,
            ))
        return table


def convert_unit(value: float, entry: UnitEntry) -> float:
    result = value * entry.scale + entry.offset
    if not math.isfinite(result):
        raise NonFiniteError(f"conversion of {value} is not finite")
    return result


# ---------------------------------------------------------------------------
# Canonicalization
# ---------------------------------------------------------------------------

def _parse_number(text: str, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise BadNumberError(f"bad {what}: {text!r}")
    if not math.isfinite(value):
        raise BadNumberError(f"{what} must be finite: {text!r}")
    return value


def canonicalize(raw: RawObservation, table: AlignmentTable) -> CanonicalObservation:
    """Resolve vocabulary, convert units, and mint the observation IRI."""
    prop = table.term(raw.property_raw)
    if prop is None:
        raise UnknownTermError(
            f"no alignment entry for property {raw.property_raw!r}",
            term=raw.property_raw,
        )
    unit_entry = table.unit(raw.unit_raw)
    if unit_entry is None:
        raise UnknownUnitError(
            f"no alignment entry for unit {raw.unit_raw!r}", term=raw.unit_raw
        )
    canonical_unit = table.vocabulary.canonical_unit(prop)
    if unit_entry.iri != canonical_unit:
        raise UnitMismatchError(
            f"unit {raw.unit_raw!r} resolves to {unit_entry.iri.value}, "
            f"but {prop.value} is measured in {canonical_unit.value}"
        )

    value = convert_unit(_parse_number(raw.value_raw, "value"), unit_entry)
    try:
        timestamp = parse_utc_instant(raw.timestamp_raw)
    except ValueError as exc:
        raise BadTimestampError(str(exc))
    if timestamp < 0:
        raise BadTimestampError(f"timestamp before epoch: {raw.timestamp_raw!r}")

    sensor = table.sensor(raw.sensor_id_raw)
    if raw.lat_raw and raw.lon_raw:
        lat = _parse_number(raw.lat_raw, "lat")
        lon = _parse_number(raw.lon_raw, "lon")
    elif sensor.lat is not None and sensor.lon is not None:
        lat, lon = sensor.lat, sensor.lon
    else:
        raise MissingLocationError(
            f"no coordinates in payload or station metadata for {raw.sensor_id_raw!r}"
        )
    if not -90.0 <= lat <= 90.0:
        raise OutOfRangeError(f"latitude out of range: {lat}")
    if not -180.0 <= lon <= 180.0:
        raise OutOfRangeError(f"longitude out of range: {lon}")

    return CanonicalObservation(
        id=mint_observation_iri(table.ns, sensor.iri, timestamp),
        sensor_id=sensor.iri,
        property=prop,
        value=value,
        unit=canonical_unit,
        timestamp=timestamp,
        lat=lat,
        lon=lon,
    )


_FORMAT_PARSERS = {
    "csv": parse_csv_line,
    "json": parse_json_observation,
    "xml": parse_xml_observation,
}


def parse_payload(source_format: str, payload: str) -> RawObservation:
    parser = _FORMAT_PARSERS.get(source_format)
    if parser is None:
        raise MalformedError(f"unknown observation format {source_format!r}")
    return parser(payload)
