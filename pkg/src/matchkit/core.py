"""Domain types, dataset/schema ingestion, and attribute value profiling.

Everything here is immutable after construction and safe to share across
threads. Profiling is deterministic: the same value list always produces the
same profile.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .errors import (
    DuplicateAttribute,
    EmptySchema,
    MalformedTable,
    SchemaParseError,
)

_NON_ALNUM = re.compile(r"[^a-z0-9]+")
_NULL_TOKENS = frozenset({"", "na", "n/a", "null", "none"})

# Fraction of data rows allowed to have a different field count than the
# header before the table is considered malformed.
RAGGED_TOLERANCE = 0.05

DEFAULT_HIERARCHY = "(uncategorized)"


def normalize_name(name: str) -> str:
    """Canonical form used everywhere names are compared.

    Lowercase, runs of non-alphanumeric characters collapsed to a single
    underscore, leading/trailing underscores trimmed.
    """
    return _NON_ALNUM.sub("_", name.lower()).strip("_")


def is_null(value: str | None) -> bool:
    if value is None:
        return True
    return value.strip().lower() in _NULL_TOKENS


class ValueType(str, Enum):
    ENUMERATION = "enumeration"
    NUMBER = "number"
    INTEGER = "integer"
    TEXT = "text"
    BOOLEAN = "boolean"
    UNKNOWN = "unknown"


_BOOLEAN_TOKENS = frozenset({"true", "false", "yes", "no", "t", "f", "y", "n"})


@dataclass(frozen=True)
class NumericStats:
    min: float
    max: float
    mean: float
    stddev: float

    def to_dict(self) -> dict[str, float]:
        return {"min": self.min, "max": self.max, "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class ValueProfile:
    """Per-attribute summary: unique values, counts, inferred type, histogram."""

    unique_values: tuple[str, ...]
    value_counts: dict[str, int]
    total_count: int
    null_count: int
    inferred_type: ValueType
    numeric_stats: NumericStats | None
    histogram: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        if sum(self.value_counts.values()) + self.null_count != self.total_count:
            raise ValueError("value counts plus nulls must equal total count")
        if len(self.unique_values) != len(self.value_counts):
            raise ValueError("unique values and value counts disagree")
        numeric = self.inferred_type in (ValueType.NUMBER, ValueType.INTEGER)
        if numeric != (self.numeric_stats is not None):
            raise ValueError("numeric stats present iff the type is numeric")

    def to_dict(self) -> dict[str, Any]:
        return {
            "unique_values": list(self.unique_values),
            "value_counts": dict(self.value_counts),
            "total_count": self.total_count,
            "null_count": self.null_count,
            "inferred_type": self.inferred_type.value,
            "numeric_stats": self.numeric_stats.to_dict() if self.numeric_stats else None,
            "histogram": [[label, count] for label, count in self.histogram],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ValueProfile":
        stats = d.get("numeric_stats")
        return cls(
            unique_values=tuple(d["unique_values"]),
            value_counts={k: int(v) for k, v in d["value_counts"].items()},
            total_count=int(d["total_count"]),
            null_count=int(d["null_count"]),
            inferred_type=ValueType(d["inferred_type"]),
            numeric_stats=NumericStats(**stats) if stats else None,
            histogram=tuple((label, int(count)) for label, count in d["histogram"]),
        )


@dataclass(frozen=True)
class SourceAttribute:
    name: str
    profile: ValueProfile

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("attribute name must be non-empty")


@dataclass(frozen=True)
class SourceDataset:
    name: str
    attributes: tuple[SourceAttribute, ...]

    def __post_init__(self) -> None:
        if not self.attributes:
            raise ValueError("a dataset needs at least one attribute")
        seen: set[str] = set()
        for attr in self.attributes:
            key = normalize_name(attr.name)
            if key in seen:
                raise DuplicateAttribute(f"duplicate attribute after normalization: {attr.name!r}")
            seen.add(key)

    def attribute(self, name: str) -> SourceAttribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        key = normalize_name(name)
        for attr in self.attributes:
            if normalize_name(attr.name) == key:
                return attr
        return None


@dataclass(frozen=True)
class TargetAttribute:
    name: str
    supercategory: str = DEFAULT_HIERARCHY
    category: str = DEFAULT_HIERARCHY
    description: str = ""
    value_type: ValueType = ValueType.UNKNOWN
    enum_values: tuple[str, ...] | None = None
    # Populated when the target side is a profiled dataset rather than a
    # schema document.
    profile: ValueProfile | None = field(default=None, compare=True)

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("attribute name must be non-empty")
        if not self.supercategory or not self.category:
            raise ValueError("hierarchy fields must be non-empty")
        if self.value_type is ValueType.ENUMERATION and not self.enum_values:
            raise ValueError("enumeration attributes need enum_values")

    def known_values(self) -> tuple[str, ...]:
        """Unique values usable for value-level comparison, if any."""
        if self.profile is not None:
            return self.profile.unique_values
        if self.enum_values:
            return self.enum_values
        return ()


@dataclass(frozen=True)
class TargetSchema:
    name: str
    attributes: tuple[TargetAttribute, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for attr in self.attributes:
            key = normalize_name(attr.name)
            if key in seen:
                raise DuplicateAttribute(f"duplicate target attribute: {attr.name!r}")
            seen.add(key)

    def attribute(self, name: str) -> TargetAttribute | None:
        for attr in self.attributes:
            if attr.name == name:
                return attr
        key = normalize_name(name)
        for attr in self.attributes:
            if normalize_name(attr.name) == key:
                return attr
        return None

    def hierarchy(self) -> dict[str, dict[str, list[str]]]:
        """supercategory -> category -> attribute names, in schema order."""
        tree: dict[str, dict[str, list[str]]] = {}
        for attr in self.attributes:
            tree.setdefault(attr.supercategory, {}).setdefault(attr.category, []).append(attr.name)
        return tree


def _try_float(text: str) -> float | None:
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _format_number(x: float) -> str:
    return f"{x:g}"


def profile_attribute(
    values: Sequence[str | None],
    numeric_bins: int = 10,
    categorical_bins: int = 20,
    numeric_parse_threshold: float = 0.9,
) -> ValueProfile:
    """Summarize a column of raw text values.

    Total function: empty input yields an empty profile with type unknown.
    Nulls (None, empty string, na/n/a/null/none) are counted separately and
    excluded from unique values and the histogram.
    """
    counts: dict[str, int] = {}
    unique: list[str] = []
    null_count = 0
    for raw in values:
        if is_null(raw):
            null_count += 1
            continue
        text = str(raw)
        if text not in counts:
            counts[text] = 0
            unique.append(text)
        counts[text] += 1

    total = len(values)
    non_null = total - null_count

    inferred = ValueType.UNKNOWN
    stats: NumericStats | None = None
    numeric_values: list[float] = []
    if non_null > 0:
        parsed = [(v, _try_float(v)) for v in counts]
        parse_hits = sum(counts[v] for v, f in parsed if f is not None)
        if parse_hits / non_null >= numeric_parse_threshold and parse_hits > 0:
            numeric_values = [f for v, f in parsed for _ in range(counts[v]) if f is not None]
            integral = all(f == int(f) for f in numeric_values)
            inferred = ValueType.INTEGER if integral else ValueType.NUMBER
            mean = sum(numeric_values) / len(numeric_values)
            var = sum((x - mean) ** 2 for x in numeric_values) / len(numeric_values)
            stats = NumericStats(
                min=min(numeric_values), max=max(numeric_values), mean=mean, stddev=math.sqrt(var)
            )
        elif all(v.strip().lower() in _BOOLEAN_TOKENS for v in counts):
            inferred = ValueType.BOOLEAN
        elif len(unique) <= max(20, 0.1 * total):
            inferred = ValueType.ENUMERATION
        else:
            inferred = ValueType.TEXT

    if inferred in (ValueType.NUMBER, ValueType.INTEGER):
        histogram = _numeric_histogram(numeric_values, numeric_bins)
    else:
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:categorical_bins]
        histogram = tuple(top)

    return ValueProfile(
        unique_values=tuple(unique),
        value_counts=counts,
        total_count=total,
        null_count=null_count,
        inferred_type=inferred,
        numeric_stats=stats,
        histogram=histogram,
    )


def _numeric_histogram(values: list[float], bins: int) -> tuple[tuple[str, int], ...]:
    if not values:
        return ()
    lo, hi = min(values), max(values)
    if lo == hi:
        return ((f"[{_format_number(lo)}, {_format_number(hi)}]", len(values)),)
    width = (hi - lo) / bins
    counts = [0] * bins
    for x in values:
        idx = min(int((x - lo) / width), bins - 1)
        counts[idx] += 1
    out = []
    for i, count in enumerate(counts):
        left = lo + i * width
        right = lo + (i + 1) * width
        closer = "]" if i == bins - 1 else ")"
        out.append((f"[{_format_number(left)}, {_format_number(right)}{closer}", count))
    return tuple(out)


def _sniff_delimiter(first_line: str) -> str:
    best = ","
    best_count = -1
    for cand in (",", "\t", ";"):
        n = first_line.count(cand)
        if n > best_count:
            best, best_count = cand, n
    return best


def ingest_source(data: bytes, name: str, **profile_kwargs: Any) -> SourceDataset:
    """Parse a delimiter-separated table into a profiled dataset.

    The delimiter is auto-detected among comma/tab/semicolon by first-row
    majority. The header row is required; headers that collide after
    normalization are an error. Rows whose field count disagrees with the
    header are padded/truncated, but only up to RAGGED_TOLERANCE of rows.
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedTable(f"input is not valid UTF-8: {exc}") from exc
    stripped = text.strip("\r\n \t")
    if not stripped:
        raise MalformedTable("empty input: no header row")

    first_line = text.splitlines()[0]
    delimiter = _sniff_delimiter(first_line)
    rows = list(csv.reader(io.StringIO(text), delimiter=delimiter))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise MalformedTable("empty input: no header row")

    header = [cell.strip() for cell in rows[0]]
    if any(not h for h in header):
        raise MalformedTable("header row contains an empty column name")

    seen: set[str] = set()
    for h in header:
        key = normalize_name(h)
        if key in seen:
            raise DuplicateAttribute(f"duplicate column {h!r} after normalization")
        seen.add(key)

    body = rows[1:]
    width = len(header)
    ragged = sum(1 for r in body if len(r) != width)
    if body and ragged / len(body) > RAGGED_TOLERANCE:
        raise MalformedTable(f"{ragged} of {len(body)} rows have a different field count than the header")

    columns: list[list[str | None]] = [[] for _ in header]
    for row in body:
        for i in range(width):
            columns[i].append(row[i] if i < len(row) else None)

    attributes = tuple(
        SourceAttribute(name=h, profile=profile_attribute(col, **profile_kwargs))
        for h, col in zip(header, columns)
    )
    return SourceDataset(name=name, attributes=attributes)


_SCHEMA_KEYS = {"name", "supercategory", "category", "description", "value_type", "enum_values"}


def _target_from_obj(obj: Any, index: int) -> TargetAttribute:
    if not isinstance(obj, dict):
        raise SchemaParseError(f"attribute #{index}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - _SCHEMA_KEYS
    if unknown:
        raise SchemaParseError(f"attribute #{index}: unknown keys {sorted(unknown)}")
    name = obj.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaParseError(f"attribute #{index}: missing or empty 'name'")
    raw_type = obj.get("value_type", "unknown")
    try:
        value_type = ValueType(raw_type)
    except ValueError:
        raise SchemaParseError(f"attribute #{index} ({name}): invalid value_type {raw_type!r}") from None
    enum_values = obj.get("enum_values")
    if enum_values is not None:
        if not isinstance(enum_values, list) or not all(isinstance(v, str) for v in enum_values):
            raise SchemaParseError(f"attribute #{index} ({name}): enum_values must be a list of strings")
        enum_values = tuple(enum_values)
    try:
        return TargetAttribute(
            name=name,
            supercategory=str(obj.get("supercategory") or DEFAULT_HIERARCHY),
            category=str(obj.get("category") or DEFAULT_HIERARCHY),
            description=str(obj.get("description") or ""),
            value_type=value_type,
            enum_values=enum_values,
        )
    except ValueError as exc:
        raise SchemaParseError(f"attribute #{index} ({name}): {exc}") from exc


def parse_target_schema(data: bytes, name: str = "target") -> TargetSchema:
    """Parse the target side: a JSON attribute list, or a plain table.

    A tabular file is profiled like a source and wrapped with the default
    hierarchy so dataset-to-dataset matching works unchanged.
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise SchemaParseError(f"input is not valid UTF-8: {exc}") from exc
    head = text.lstrip()
    if head.startswith("[") or head.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaParseError(f"line {exc.lineno}: {exc.msg}") from exc
        if isinstance(doc, dict):
            name = str(doc.get("name") or name)
            doc = doc.get("attributes")
        if not isinstance(doc, list):
            raise SchemaParseError("expected a top-level list of attribute objects")
        if not doc:
            raise EmptySchema("schema contains no attributes")
        attrs = [_target_from_obj(obj, i) for i, obj in enumerate(doc)]
        attrs.sort(key=lambda a: (a.supercategory, a.category, a.name))
        return TargetSchema(name=name, attributes=tuple(attrs))

    if not head:
        raise EmptySchema("schema document is empty")
    dataset = ingest_source(data, name)
    attrs = tuple(
        TargetAttribute(
            name=a.name,
            value_type=a.profile.inferred_type,
            enum_values=(
                tuple(sorted(a.profile.unique_values))
                if a.profile.inferred_type is ValueType.ENUMERATION
                else None
            ),
            profile=a.profile,
        )
        for a in dataset.attributes
    )
    return TargetSchema(name=name, attributes=attrs)


def dataset_to_dict(ds: SourceDataset) -> dict[str, Any]:
    return {
        "name": ds.name,
        "attributes": [{"name": a.name, "profile": a.profile.to_dict()} for a in ds.attributes],
    }


def dataset_from_dict(d: dict[str, Any]) -> SourceDataset:
    return SourceDataset(
        name=d["name"],
        attributes=tuple(
            SourceAttribute(name=a["name"], profile=ValueProfile.from_dict(a["profile"]))
            for a in d["attributes"]
        ),
    )


def schema_to_dict(schema: TargetSchema) -> dict[str, Any]:
    return {
        "name": schema.name,
        "attributes": [
            {
                "name": a.name,
                "supercategory": a.supercategory,
                "category": a.category,
                "description": a.description,
                "value_type": a.value_type.value,
                "enum_values": list(a.enum_values) if a.enum_values is not None else None,
                "profile": a.profile.to_dict() if a.profile is not None else None,
            }
            for a in schema.attributes
        ],
    }


def schema_from_dict(d: dict[str, Any]) -> TargetSchema:
    attrs = []
    for a in d["attributes"]:
        attrs.append(
            TargetAttribute(
                name=a["name"],
                supercategory=a["supercategory"],
                category=a["category"],
                description=a["description"],
                value_type=ValueType(a["value_type"]),
                enum_values=tuple(a["enum_values"]) if a["enum_values"] is not None else None,
                profile=ValueProfile.from_dict(a["profile"]) if a.get("profile") else None,
            )
        )
    return TargetSchema(name=d["name"], attributes=tuple(attrs))


def values_of(obj: ValueProfile | TargetAttribute | SourceAttribute | Iterable[str]) -> tuple[str, ...]:
    """Unique values of either side, whatever shape it arrives in."""
    if isinstance(obj, ValueProfile):
        return obj.unique_values
    if isinstance(obj, SourceAttribute):
        return obj.profile.unique_values
    if isinstance(obj, TargetAttribute):
        return obj.known_values()
    return tuple(obj)
