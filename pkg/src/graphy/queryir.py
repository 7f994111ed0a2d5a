"""Structured query representation shared by the executor and renderers.

Every exploration step builds one of these instead of a query string:
the native executor runs it, and the Cypher renderer projects it for
logging and interop with external graph databases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from graphy.errors import InvalidIR

SELECT = "select"
HISTOGRAM = "histogram"
NEIGHBORS = "neighbors"

OP_HAS = "has"
OP_EQ = "eq"
OP_CONTAINS = "contains"
OP_MISSING = "missing"
OP_RANGE = "range"

_FILTER_OPS = (OP_HAS, OP_EQ, OP_CONTAINS, OP_MISSING, OP_RANGE)


@dataclass(frozen=True)
class Filter:
    op: str
    attribute: str
    value: object | None = None
    lo: float | None = None
    hi: float | None = None
    closed: bool = False

    def __post_init__(self):
        if self.op not in _FILTER_OPS:
            raise InvalidIR(f"unknown filter op {self.op!r}")
        if self.op in (OP_EQ, OP_CONTAINS) and self.value is None:
            raise InvalidIR(f"filter {self.op!r} needs a value")
        if self.op == OP_RANGE and (self.lo is None or self.hi is None):
            raise InvalidIR("range filter needs lo and hi")


@dataclass(frozen=True)
class QueryIR:
    kind: str
    label: str
    filters: tuple[Filter, ...] = ()
    attribute: str | None = None
    anchors: tuple[str, ...] = ()
    limit: int | None = None
    order_by: str | None = None
    descending: bool = False

    def __post_init__(self):
        if self.kind not in (SELECT, HISTOGRAM, NEIGHBORS):
            raise InvalidIR(f"unknown query kind {self.kind!r}")
        if self.kind == HISTOGRAM and not self.attribute:
            raise InvalidIR("histogram queries need an attribute")
        if self.kind == NEIGHBORS and not self.anchors:
            raise InvalidIR("neighbor queries need anchors")
        if self.limit is not None and self.limit < 1:
            raise InvalidIR(f"limit must be positive, got {self.limit}")
        if self.kind == HISTOGRAM and self.limit is not None:
            raise InvalidIR("aggregation and limit cannot be combined")
        if self.kind == HISTOGRAM and self.order_by is not None:
            raise InvalidIR("aggregation and sorting cannot be combined")


def filter_to_json(f: Filter) -> dict:
    out = {"op": f.op, "attribute": f.attribute}
    if f.value is not None:
        out["value"] = f.value
    if f.op == OP_RANGE:
        out.update({"lo": f.lo, "hi": f.hi, "closed": f.closed})
    return out


def filter_from_json(data: dict) -> Filter:
    return Filter(
        op=data["op"],
        attribute=data["attribute"],
        value=data.get("value"),
        lo=data.get("lo"),
        hi=data.get("hi"),
        closed=bool(data.get("closed", False)),
    )


def ir_to_json(ir: QueryIR) -> dict:
    out = {"kind": ir.kind, "label": ir.label}
    if ir.filters:
        out["filters"] = [filter_to_json(f) for f in ir.filters]
    if ir.attribute is not None:
        out["attribute"] = ir.attribute
    if ir.anchors:
        out["anchors"] = list(ir.anchors)
    if ir.limit is not None:
        out["limit"] = ir.limit
    if ir.order_by is not None:
        out["order_by"] = ir.order_by
        out["descending"] = ir.descending
    return out


def ir_from_json(data: dict) -> QueryIR:
    return QueryIR(
        kind=data["kind"],
        label=data["label"],
        filters=tuple(filter_from_json(f) for f in data.get("filters", [])),
        attribute=data.get("attribute"),
        anchors=tuple(data.get("anchors", [])),
        limit=data.get("limit"),
        order_by=data.get("order_by"),
        descending=bool(data.get("descending", False)),
    )
