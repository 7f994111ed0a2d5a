"""Query IR validation and Cypher rendering against pinned golden files."""

from __future__ import annotations

from pathlib import Path

import pytest

from graphy.cypher import render_cypher
from graphy.errors import InvalidIR
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
    ir_from_json,
    ir_to_json,
)

GOLDEN_DIR = Path(__file__).parent / "goldens" / "cypher"


def golden(name: str) -> str:
    return (GOLDEN_DIR / name).read_bytes().decode("utf-8")


def test_attribute_search_matches_golden():
    ir = QueryIR(SELECT, "Paper", filters=(Filter(OP_HAS, "year"),), limit=100)
    assert render_cypher(ir) + "\n" == golden("e1.cypher")


def test_histogram_matches_golden():
    ir = QueryIR(HISTOGRAM, "Paper", attribute="year")
    assert render_cypher(ir) + "\n" == golden("e2.cypher")


def test_bucket_filter_matches_golden():
    ir = QueryIR(SELECT, "Paper", filters=(Filter(OP_EQ, "year", value=2023),), limit=50)
    assert render_cypher(ir) + "\n" == golden("e3.cypher")


def test_prequery_matches_golden():
    ir = QueryIR(NEIGHBORS, "Paper", anchors=("24ed84e94ea0234b2399db8ea88a694d",))
    assert render_cypher(ir) + "\n" == golden("prequery.cypher")


def test_neighbor_anchors_are_sorted():
    ir = QueryIR(NEIGHBORS, "Paper", anchors=("zz", "aa", "mm"))
    assert 'IN ["aa", "mm", "zz"]' in render_cypher(ir)


def test_rendering_is_deterministic():
    ir = QueryIR(
        SELECT,
        "Paper",
        filters=(Filter(OP_HAS, "year"), Filter(OP_CONTAINS, "title", value="Llama")),
        limit=10,
    )
    assert render_cypher(ir) == render_cypher(ir)


def test_filter_clause_shapes():
    cases = [
        (Filter(OP_MISSING, "year"), "n.year IS NULL"),
        (Filter(OP_EQ, "title", value='he said "hi"'), 'n.title = "he said \\"hi\\""'),
        (Filter(OP_EQ, "flag", value=True), "n.flag = true"),
        (Filter(OP_CONTAINS, "title", value="LLaMA"), 'toLower(n.title) CONTAINS "llama"'),
        (Filter(OP_RANGE, "year", lo=2020, hi=2024), "n.year >= 2020 AND n.year < 2024"),
        (
            Filter(OP_RANGE, "score", lo=0.5, hi=1.5, closed=True),
            "n.score >= 0.5 AND n.score <= 1.5",
        ),
    ]
    for f, expected in cases:
        ir = QueryIR(SELECT, "Paper", filters=(f,))
        assert expected in render_cypher(ir), f.op


def test_select_without_filters_or_limit():
    assert render_cypher(QueryIR(SELECT, "Paper")) == "MATCH (n:Paper) RETURN n"


def test_histogram_over_pinned_population():
    ir = QueryIR(HISTOGRAM, "Paper", attribute="year", anchors=("b", "a"))
    assert render_cypher(ir) == (
        'MATCH (n:Paper) WHERE id(n) IN ["a", "b"] AND n.year IS NOT NULL '
        "RETURN n.year AS key, count(n) AS cnt ORDER BY key"
    )


def test_ir_validation():
    with pytest.raises(InvalidIR):
        QueryIR("explode", "Paper")
    with pytest.raises(InvalidIR):
        QueryIR(HISTOGRAM, "Paper")  # no attribute
    with pytest.raises(InvalidIR):
        QueryIR(NEIGHBORS, "Paper")  # no anchors
    with pytest.raises(InvalidIR):
        QueryIR(SELECT, "Paper", limit=0)
    with pytest.raises(InvalidIR):
        QueryIR(HISTOGRAM, "Paper", attribute="year", limit=5)
    with pytest.raises(InvalidIR):
        Filter("like", "title")
    with pytest.raises(InvalidIR):
        Filter(OP_EQ, "title")  # no value
    with pytest.raises(InvalidIR):
        Filter(OP_RANGE, "year", lo=2020)  # no hi


def test_ir_json_round_trip():
    ir = QueryIR(
        NEIGHBORS,
        "Paper",
        filters=(Filter(OP_RANGE, "year", lo=2020, hi=2024, closed=True),),
        anchors=("a1", "b2"),
    )
    assert ir_from_json(ir_to_json(ir)) == ir
    ir2 = QueryIR(HISTOGRAM, "Paper", attribute="year")
    assert ir_from_json(ir_to_json(ir2)) == ir2
