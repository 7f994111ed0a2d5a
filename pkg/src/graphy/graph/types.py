"""Node, edge, and schema types of the property graph."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field

from graphy.errors import EmptyTitle, SchemaViolation

# Supported property value types.  A value type never changes once it is
# declared for a (label, key) pair.
TEXT = "text"
INTEGER = "integer"
REAL = "real"
BOOLEAN = "boolean"
TEXT_LIST = "text_list"

VALUE_TYPES = (TEXT, INTEGER, REAL, BOOLEAN, TEXT_LIST)

HAS_DIMENSION = "HAS_DIMENSION"
NAVIGATES_TO = "NAVIGATES_TO"
EDGE_KINDS = (HAS_DIMENSION, NAVIGATES_TO)

PropertyValue = str | int | float | bool | list


def node_hash(*parts: str) -> str:
    """16-byte stable hash of the given parts, rendered as 32 hex chars."""
    h = hashlib.blake2b(digest_size=16)
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


def canonical_json(value) -> str:
    """Deterministic JSON text used for hashing and golden files."""
    return json.dumps(value, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def normalize_title(title: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    cleaned = re.sub(r"[^\w\s]", " ", title.lower())
    return re.sub(r"\s+", " ", cleaned).strip()


def canonical_id(title: str) -> str:
    """Stable fact id derived from the normalized title.

    Titles that normalize to the same string get the same id, which is what
    makes re-scraping and reference resolution idempotent.
    """
    normalized = normalize_title(title)
    if not normalized:
        raise EmptyTitle(f"title {title!r} normalizes to nothing")
    return node_hash("fact", normalized)


def coerce_value(value, value_type: str):
    """Validate ``value`` against ``value_type``, returning the stored form.

    The only coercion performed here is int -> float for REAL fields;
    everything else must already have the declared type.
    """
    if value_type == TEXT:
        if isinstance(value, str):
            return value
    elif value_type == INTEGER:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif value_type == REAL:
        if isinstance(value, float):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return float(value)
    elif value_type == BOOLEAN:
        if isinstance(value, bool):
            return value
    elif value_type == TEXT_LIST:
        if isinstance(value, list) and all(isinstance(x, str) and x for x in value):
            return list(value)
    else:
        raise SchemaViolation(f"unknown value type {value_type!r}")
    raise SchemaViolation(f"value {value!r} is not of type {value_type}")


@dataclass(frozen=True)
class PropertySpec:
    value_type: str
    required: bool = False


@dataclass
class GraphSchema:
    """Label -> property schema map plus the allowed edge kinds."""

    nodes: dict[str, dict[str, PropertySpec]] = field(default_factory=dict)
    edge_kinds: set[str] = field(default_factory=lambda: set(EDGE_KINDS))

    def declare(self, label: str, properties: dict[str, PropertySpec]) -> None:
        """Add or extend a label's schema; type conflicts are rejected."""
        if not label:
            raise SchemaViolation("empty label")
        existing = self.nodes.setdefault(label, {})
        for key, spec in properties.items():
            if spec.value_type not in VALUE_TYPES:
                raise SchemaViolation(f"unknown value type {spec.value_type!r} for {label}.{key}")
            prior = existing.get(key)
            if prior is not None and prior.value_type != spec.value_type:
                raise SchemaViolation(
                    f"type of {label}.{key} is {prior.value_type}, cannot redeclare as {spec.value_type}"
                )
            existing[key] = spec

    def has_label(self, label: str) -> bool:
        return label in self.nodes

    def attributes(self, label: str) -> dict[str, PropertySpec]:
        return self.nodes.get(label, {})

    def validate_properties(self, label: str, properties: dict) -> dict:
        """Check ``properties`` against the label's schema.

        Returns the validated (possibly coerced) property map.  Raises
        SchemaViolation for unknown labels, unknown keys, wrong value types,
        and missing required keys.
        """
        if label not in self.nodes:
            raise SchemaViolation(f"unknown label {label!r}")
        spec = self.nodes[label]
        out = {}
        for key, value in properties.items():
            if key not in spec:
                raise SchemaViolation(f"unknown property {label}.{key}")
            out[key] = coerce_value(value, spec[key].value_type)
        for key, pspec in spec.items():
            if pspec.required and key not in out:
                raise SchemaViolation(f"missing required property {label}.{key}")
        return out

    def to_json(self) -> dict:
        return {
            "nodes": {
                label: {
                    key: {"type": ps.value_type, "required": ps.required}
                    for key, ps in sorted(props.items())
                }
                for label, props in sorted(self.nodes.items())
            },
            "edge_kinds": sorted(self.edge_kinds),
        }

    @classmethod
    def from_json(cls, data: dict) -> GraphSchema:
        schema = cls(edge_kinds=set(data.get("edge_kinds", EDGE_KINDS)))
        for label, props in data.get("nodes", {}).items():
            schema.declare(
                label,
                {
                    key: PropertySpec(ps["type"], ps.get("required", False))
                    for key, ps in props.items()
                },
            )
        return schema


@dataclass(frozen=True)
class FactNode:
    id: str
    label: str
    properties: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DimensionNode:
    id: str
    label: str
    owner: str
    properties: dict = field(default_factory=dict)
    # position within the extraction batch; keeps document order (think
    # reference lists) recoverable after storage
    ordinal: int = 0


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: str
    properties: dict = field(default_factory=dict)


def dimension_id(owner: str, label: str, ordinal: int, properties: dict) -> str:
    """Deterministic id for a dimension node.

    Identical (owner, label, ordinal, properties) always map to the same id,
    which makes re-running an extraction idempotent.
    """
    return node_hash("dim", owner, label, str(ordinal), canonical_json(properties))
