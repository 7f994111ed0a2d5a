"""Render a QueryIR as a Cypher statement.

This is a projection, not an engine: the native executor is the source
of truth for results, and these strings exist for logging and for
feeding the same query to an external graph database.  The exact output
shape is pinned by golden files.
"""

from __future__ import annotations

import json

from graphy.errors import InvalidIR
from graphy.graph.types import NAVIGATES_TO
from graphy.queryir import (
    HISTOGRAM,
    NEIGHBORS,
    OP_CONTAINS,
    OP_EQ,
    OP_HAS,
    OP_MISSING,
    OP_RANGE,
    SELECT,
    Filter,
    QueryIR,
)


def _literal(value) -> str:
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return json.dumps(value)
    raise InvalidIR(f"cannot render literal {value!r}")


def _filter_clause(f: Filter) -> str:
    attr = f"n.{f.attribute}"
    if f.op == OP_HAS:
        return f"{attr} IS NOT NULL"
    if f.op == OP_MISSING:
        return f"{attr} IS NULL"
    if f.op == OP_EQ:
        return f"{attr} = {_literal(f.value)}"
    if f.op == OP_CONTAINS:
        return f"toLower({attr}) CONTAINS {_literal(str(f.value).lower())}"
    if f.op == OP_RANGE:
        upper = "<=" if f.closed else "<"
        return f"{attr} >= {_literal(f.lo)} AND {attr} {upper} {_literal(f.hi)}"
    raise InvalidIR(f"cannot render filter op {f.op!r}")


def render_cypher(ir: QueryIR) -> str:
    clauses = [_filter_clause(f) for f in ir.filters]

    if ir.kind == NEIGHBORS:
        anchor_list = ", ".join(_literal(a) for a in sorted(ir.anchors))
        where = [f"id(n) IN [{anchor_list}]"] + clauses
        return (
            f"MATCH (n:{ir.label})-[:{NAVIGATES_TO}]->(m) "
            f"WHERE {' AND '.join(where)} RETURN DISTINCT m"
        )

    if ir.kind == HISTOGRAM:
        if ir.anchors:
            anchor_list = ", ".join(_literal(a) for a in sorted(ir.anchors))
            clauses = [f"id(n) IN [{anchor_list}]"] + clauses
        # grouping drops rows without the attribute, so the projection says so
        clauses.append(f"n.{ir.attribute} IS NOT NULL")
        return (
            f"MATCH (n:{ir.label}) WHERE {' AND '.join(clauses)} "
            f"RETURN n.{ir.attribute} AS key, count(n) AS cnt ORDER BY key"
        )

    if ir.kind == SELECT:
        if ir.anchors:
            anchor_list = ", ".join(_literal(a) for a in sorted(ir.anchors))
            clauses = [f"id(n) IN [{anchor_list}]"] + clauses
        text = f"MATCH (n:{ir.label})"
        if clauses:
            text += f" WHERE {' AND '.join(clauses)}"
        text += " RETURN n"
        if ir.order_by is not None:
            text += f" ORDER BY n.{ir.order_by}"
            if ir.descending:
                text += " DESC"
        if ir.limit is not None:
            text += f" LIMIT {ir.limit}"
        return text

    raise InvalidIR(f"cannot render query kind {ir.kind!r}")
