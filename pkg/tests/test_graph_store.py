"""Graph store: schema checks, upserts, traversal, persistence, export."""

from __future__ import annotations

import random
from pathlib import Path

import pytest

from graphy.errors import KindViolation, SchemaViolation, UnknownLabel, UnknownNode, UnknownOwner
from graphy.graph import (
    HAS_DIMENSION,
    NAVIGATES_TO,
    FactNode,
    GraphSchema,
    GraphStore,
    PropertySpec,
    node_hash,
)
from graphy.graph.io import export_csv, export_jsonl, import_jsonl
from graphy.graph.predicates import AttrContains, AttrEq


def paper_schema() -> GraphSchema:
    schema = GraphSchema()
    schema.declare(
        "Paper",
        {
            "title": PropertySpec("text", required=True),
            "year": PropertySpec("integer"),
            "citation_count": PropertySpec("integer"),
            "abstract": PropertySpec("text"),
            "keywords": PropertySpec("text_list"),
        },
    )
    schema.declare("Challenge", {"summary": PropertySpec("text", required=True)})
    return schema


def make_store(tmp_path=None) -> GraphStore:
    return GraphStore(paper_schema(), tmp_path)


def fact(title: str, **props) -> FactNode:
    return FactNode(node_hash("fact", title.lower()), "Paper", {"title": title, **props})


def test_upsert_is_idempotent_and_merges():
    store = make_store()
    llama = fact("The Llama 3 Herd of Models", year=2024)
    store.upsert_fact(llama)
    store.upsert_fact(llama)
    assert store.counts()["facts"] == 1
    # last writer wins per key, untouched keys survive
    store.upsert_fact(FactNode(llama.id, "Paper", {"title": llama.properties["title"], "year": 2025}))
    node = store.get_node(llama.id)
    assert node.properties["year"] == 2025


def test_schema_violations_rejected():
    store = make_store()
    with pytest.raises(SchemaViolation):
        store.upsert_fact(FactNode("x" * 32, "Paper", {"title": "T", "year": "2023"}))
    with pytest.raises(SchemaViolation):
        store.upsert_fact(FactNode("x" * 32, "Book", {"title": "T"}))
    with pytest.raises(SchemaViolation):
        store.upsert_fact(FactNode("x" * 32, "Paper", {"year": 2023}))  # missing required title
    with pytest.raises(SchemaViolation):
        store.upsert_fact(FactNode("x" * 32, "Paper", {"title": "T", "year": True}))


def test_add_dimensions_basics():
    store = make_store()
    p = fact("P")
    store.upsert_fact(p)
    items = [{"summary": f"challenge {i}"} for i in range(3)]
    ids = store.add_dimensions(p.id, "Challenge", items)
    assert len(ids) == 3
    assert store.counts() == {"facts": 1, "dimensions": 3, "edges": 3}
    assert store.add_dimensions(p.id, "Challenge", []) == []
    assert store.counts()["dimensions"] == 3
    with pytest.raises(UnknownOwner):
        store.add_dimensions("0" * 32, "Challenge", items)
    # identical re-run creates nothing new
    again = store.add_dimensions(p.id, "Challenge", items)
    assert again == ids
    assert store.counts()["dimensions"] == 3


def test_link_facts_idempotent_and_kind_checked():
    store = make_store()
    p1, p2 = fact("P1"), fact("P2")
    store.upsert_fact(p1)
    store.upsert_fact(p2)
    store.link_facts(p1.id, p2.id)
    store.link_facts(p1.id, p2.id)
    assert len(store.edges(NAVIGATES_TO)) == 1
    (dim_id,) = store.add_dimensions(p1.id, "Challenge", [{"summary": "s"}])
    with pytest.raises(KindViolation):
        store.link_facts(p1.id, dim_id)
    with pytest.raises(UnknownNode):
        store.link_facts(p1.id, "f" * 32)


def test_link_replay_matches_pair_dedup_oracle():
    store = make_store()
    rng = random.Random(7)
    papers = [fact(f"P{i}") for i in range(20)]
    for p in papers:
        store.upsert_fact(p)
    pairs = [
        (papers[rng.randrange(20)].id, papers[rng.randrange(20)].id) for _ in range(200)
    ]
    for s, t in pairs:
        store.link_facts(s, t)
    assert len(store.edges(NAVIGATES_TO)) == len(set(pairs))


def test_neighbors_sorted_and_directional():
    store = make_store()
    p1, p2, p3 = fact("P1"), fact("P2"), fact("P3")
    for p in (p1, p2, p3):
        store.upsert_fact(p)
    store.link_facts(p1.id, p2.id)
    store.link_facts(p1.id, p3.id)
    assert store.neighbors(p1.id, NAVIGATES_TO, "out") == sorted([p2.id, p3.id])
    assert store.neighbors(p2.id, NAVIGATES_TO, "out") == []
    assert p1.id in store.neighbors(p2.id, NAVIGATES_TO, "both")
    with pytest.raises(UnknownNode):
        store.neighbors("e" * 32, NAVIGATES_TO)


def test_neighbors_equal_bruteforce_on_random_graphs():
    rng = random.Random(1234)
    for _ in range(200):
        store = make_store()
        n = rng.randrange(2, 30)
        papers = [fact(f"P{i}") for i in range(n)]
        for p in papers:
            store.upsert_fact(p)
        edges = set()
        for _ in range(rng.randrange(0, 3 * n)):
            s, t = rng.choice(papers).id, rng.choice(papers).id
            store.link_facts(s, t)
            edges.add((s, t))
        probe = rng.choice(papers).id
        out = sorted({t for s, t in edges if s == probe})
        inc = sorted({s for s, t in edges if t == probe})
        both = sorted(set(out) | set(inc))
        assert store.neighbors(probe, NAVIGATES_TO, "out") == out
        assert store.neighbors(probe, NAVIGATES_TO, "in") == inc
        assert store.neighbors(probe, NAVIGATES_TO, "both") == both


def test_dimensions_are_leaves():
    store = make_store()
    p = fact("P")
    store.upsert_fact(p)
    dim_ids = store.add_dimensions(p.id, "Challenge", [{"summary": "a"}, {"summary": "b"}])
    for dim_id in dim_ids:
        for kind in (HAS_DIMENSION, NAVIGATES_TO):
            assert store.neighbors(dim_id, kind, "out") == []


def test_scan_filters():
    store = make_store()
    store.upsert_fact(fact("The Llama 3 Herd of Models", year=2024))
    store.upsert_fact(fact("Llama3 Tokenizer Notes", year=2024))
    store.upsert_fact(fact("Attention Is All You Need", year=2017))
    hits = list(store.scan("Paper", AttrContains("title", "Llama3")))
    # substring match is case-insensitive but still a substring match
    assert len(hits) == 1
    assert [n.properties["year"] for n in store.scan("Paper", AttrEq("year", 2017))] == [2017]
    assert len(list(store.scan("Paper"))) == 3
    with pytest.raises(UnknownLabel):
        list(store.scan("Nope"))


def test_persistence_log_replay_and_compaction(tmp_path: Path):
    data = tmp_path / "store"
    store = make_store(data)
    p1, p2 = fact("P1", year=2020), fact("P2")
    store.upsert_fact(p1)
    store.upsert_fact(p2)
    store.link_facts(p1.id, p2.id)
    store.add_dimensions(p1.id, "Challenge", [{"summary": "s"}])

    # reopen without compaction: the op log replays
    reopened = GraphStore.open(data)
    assert reopened.counts() == store.counts()

    store.close()
    assert (data / "oplog.jsonl").read_text("utf-8") == ""
    compacted = GraphStore.open(data)
    assert compacted.counts() == {"facts": 2, "dimensions": 1, "edges": 2}
    assert compacted.get_node(p1.id).properties["year"] == 2020


def test_oplog_double_replay_is_identity(tmp_path: Path):
    data = tmp_path / "store"
    store = make_store(data)
    p1, p2 = fact("P1"), fact("P2")
    store.upsert_fact(p1)
    store.upsert_fact(p2)
    store.link_facts(p1.id, p2.id)
    store.add_dimensions(p1.id, "Challenge", [{"summary": "s"}, {"summary": "t"}])
    log = (data / "oplog.jsonl").read_text("utf-8")
    # doubling the op log must not change the resulting graph
    (data / "oplog.jsonl").write_text(log + log, "utf-8")
    doubled = GraphStore.open(data)
    assert doubled.counts() == store.counts()
    assert [r for r in doubled.export_records()] == [r for r in store.export_records()]


def test_jsonl_round_trip_identity(tmp_path: Path):
    store = make_store()
    p1 = fact("P1", year=2024, keywords=["graphs", "llm"])
    p2 = fact("P2")
    store.upsert_fact(p1)
    store.upsert_fact(p2)
    store.link_facts(p1.id, p2.id)
    store.add_dimensions(p1.id, "Challenge", [{"summary": "s"}])

    first = tmp_path / "first"
    export_jsonl(store, first)
    imported = import_jsonl(first)
    second = tmp_path / "second"
    export_jsonl(imported, second)
    assert (first / "graph.jsonl").read_bytes() == (second / "graph.jsonl").read_bytes()
    assert (first / "schema.json").read_bytes() == (second / "schema.json").read_bytes()


def test_csv_export_layout(tmp_path: Path):
    store = make_store()
    p = fact("P1", year=2024)
    store.upsert_fact(p)
    store.add_dimensions(p.id, "Challenge", [{"summary": "s"}])
    files = export_csv(store, tmp_path)
    names = {f.name for f in files}
    assert names == {
        "vertex_Paper.csv",
        "vertex_Challenge.csv",
        "edge_HAS_DIMENSION.csv",
        "edge_NAVIGATES_TO.csv",
    }
    header = (tmp_path / "vertex_Paper.csv").read_text("utf-8").splitlines()[0]
    assert header.split(",")[0] == "id"

    # empty store still emits headers
    empty_dir = tmp_path / "empty"
    export_csv(make_store(), empty_dir)
    lines = (empty_dir / "vertex_Paper.csv").read_text("utf-8").splitlines()
    assert len(lines) == 1


def test_dimension_extraction_order_survives_reload(tmp_path: Path):
    items = [{"summary": f"challenge number {i}"} for i in range(8)]
    data_dir = tmp_path / "g"
    store = GraphStore(paper_schema(), data_dir)
    p = fact("Ordered Paper")
    store.upsert_fact(p)
    store.add_dimensions(p.id, "Challenge", items)

    want = [d.properties["summary"] for d in store.dimensions_of(p.id, "Challenge")]
    assert want == [it["summary"] for it in items]
    # hashes as ids means id order and extraction order genuinely differ here
    assert [d.id for d in store.dimensions_of(p.id)] != sorted(
        d.id for d in store.dimensions_of(p.id)
    )
    store.close()

    reloaded = GraphStore.open(data_dir)
    got = [d.properties["summary"] for d in reloaded.dimensions_of(p.id, "Challenge")]
    assert got == want
    ordinals = [d.ordinal for d in reloaded.dimensions_of(p.id, "Challenge")]
    assert ordinals == list(range(8))
    reloaded.close()


def test_merge_schema_persists_new_labels(tmp_path: Path):
    data_dir = tmp_path / "g"
    store = GraphStore(paper_schema(), data_dir)
    store.upsert_fact(fact("Original Paper"))

    extension = GraphSchema()
    extension.declare("Dataset", {"name": PropertySpec("text", required=True)})
    store.merge_schema(extension)
    store.add_dimensions(fact("Original Paper").id, "Dataset", [{"name": "corpus-a"}])
    store.close()

    reloaded = GraphStore.open(data_dir)
    assert "Dataset" in reloaded.schema.nodes
    dims = reloaded.dimensions_of(fact("Original Paper").id, "Dataset")
    assert [d.properties["name"] for d in dims] == ["corpus-a"]
    reloaded.close()


def test_merge_schema_rejects_type_conflicts(tmp_path: Path):
    store = GraphStore(paper_schema())
    clash = GraphSchema()
    clash.declare("Paper", {"year": PropertySpec("text")})
    with pytest.raises(SchemaViolation):
        store.merge_schema(clash)
