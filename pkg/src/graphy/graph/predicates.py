"""Attribute filters applied to node property maps.

These back both the store's ``scan`` operation and the exploration
query IR, so each predicate knows how to test a property map and how
to describe itself for Cypher rendering.
"""

from __future__ import annotations

from dataclasses import dataclass

from graphy.errors import InvalidParams


@dataclass(frozen=True)
class TruePredicate:
    def matches(self, properties: dict) -> bool:
        return True


@dataclass(frozen=True)
class HasAttr:
    attr: str

    def matches(self, properties: dict) -> bool:
        return self.attr in properties


@dataclass(frozen=True)
class AttrEq:
    attr: str
    value: object

    def matches(self, properties: dict) -> bool:
        return self.attr in properties and properties[self.attr] == self.value


@dataclass(frozen=True)
class AttrContains:
    attr: str
    needle: str

    def matches(self, properties: dict) -> bool:
        value = properties.get(self.attr)
        return isinstance(value, str) and self.needle.lower() in value.lower()


@dataclass(frozen=True)
class AttrInRange:
    """Half-open range [lo, hi), closed on hi for the last histogram bin."""

    attr: str
    lo: float
    hi: float
    closed: bool = False

    def matches(self, properties: dict) -> bool:
        value = properties.get(self.attr)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False
        if self.closed:
            return self.lo <= value <= self.hi
        return self.lo <= value < self.hi


@dataclass(frozen=True)
class AttrMissing:
    attr: str

    def matches(self, properties: dict) -> bool:
        return self.attr not in properties


Predicate = (
    TruePredicate | HasAttr | AttrEq | AttrContains | AttrInRange | AttrMissing
)


def predicate_from_json(data: dict | None) -> Predicate:
    """Parse the wire form of a predicate, e.g. ``{"op":"contains",...}``."""
    if not data:
        return TruePredicate()
    op = data.get("op")
    if op in (None, "true", "all"):
        return TruePredicate()
    attr = data.get("attr")
    if not isinstance(attr, str) or not attr:
        raise InvalidParams("predicate needs an 'attr' field")
    if op == "has":
        return HasAttr(attr)
    if op == "eq":
        return AttrEq(attr, data.get("value"))
    if op == "contains":
        needle = data.get("value")
        if not isinstance(needle, str):
            raise InvalidParams("contains predicate needs a string 'value'")
        return AttrContains(attr, needle)
    if op == "missing":
        return AttrMissing(attr)
    raise InvalidParams(f"unknown predicate op {op!r}")


def predicate_to_json(pred: Predicate) -> dict:
    if isinstance(pred, TruePredicate):
        return {"op": "true"}
    if isinstance(pred, HasAttr):
        return {"op": "has", "attr": pred.attr}
    if isinstance(pred, AttrEq):
        return {"op": "eq", "attr": pred.attr, "value": pred.value}
    if isinstance(pred, AttrContains):
        return {"op": "contains", "attr": pred.attr, "value": pred.needle}
    if isinstance(pred, AttrInRange):
        return {
            "op": "range",
            "attr": pred.attr,
            "lo": pred.lo,
            "hi": pred.hi,
            "closed": pred.closed,
        }
    if isinstance(pred, AttrMissing):
        return {"op": "missing", "attr": pred.attr}
    raise InvalidParams(f"unsupported predicate {pred!r}")
