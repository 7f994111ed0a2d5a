"""Inspection engine: DAG execution over a single document."""

from __future__ import annotations

import json
import random

import pytest

from dagtools import RecordingProvider, check_run, model_workflow, random_dag, DOC_TEXT
from graphy.errors import DocumentUnreadable
from graphy.ingest import RawDocument
from graphy.inspection import run_inspection
from graphy.providers import ProviderRegistry, ScriptedProvider
from graphy.workflow import parse_workflow

PAPER_BODY = """Title: Teaching Parrots to Code
Year: 2021

Abstract
Parrots can be taught simple programming. We study how.

1 Introduction
Long intro about parrots and programming and training.

References
[1] Birdsong Basics
"""


def plaintext(doc_id: str, text: str) -> RawDocument:
    return RawDocument(doc_id, "plaintext", text.encode("utf-8"))


def registry_with(provider) -> ProviderRegistry:
    registry = ProviderRegistry()
    registry.register("", provider)
    return registry


THREE_NODE = {
    "dag": {
        "nodes": [
            {
                "name": "Abstract",
                "extract_from": {"section": "Abstract"},
                "output_schema": {"single_typed": {"abstract": "text"}},
            },
            {
                "name": "Challenges",
                "model": {"name": "ollama/qwen2.5:7b"},
                "query": "What challenges does this work address?",
                "output_schema": {"array_typed": {"summary": "text"}},
            },
            {
                "name": "Solutions",
                "model": "qwen-plus",
                "query": "What solutions does this work propose?",
                "output_schema": {"array_typed": {"summary": "text"}},
            },
        ],
        "edges": [{"source": "Challenges", "target": "Solutions"}],
    }
}


def test_three_node_pipeline():
    spec = parse_workflow(json.dumps(THREE_NODE))
    scripted = ScriptedProvider(
        {
            "doc1": {
                "Challenges": [{"summary": "parrots get bored"}, {"summary": "keyboards are big"}],
                "Solutions": [{"summary": "tiny keyboards"}],
            }
        }
    )
    output = run_inspection(plaintext("doc1", PAPER_BODY), spec, registry_with(scripted))

    assert [s.state for s in output.status.values()] == ["ok", "ok", "ok"]
    assert output.fact_properties == {
        "abstract": "Parrots can be taught simple programming. We study how."
    }
    assert output.dimensions == {
        "Challenges": [{"summary": "parrots get bored"}, {"summary": "keyboards are big"}],
        "Solutions": [{"summary": "tiny keyboards"}],
    }


def test_rule_failure_skips_descendants():
    spec = parse_workflow(
        json.dumps(
            {
                "dag": {
                    "nodes": [
                        {
                            "name": "Venue",
                            "extract_from": {"pattern": r"^Venue: (?P<venue>.+)$"},
                            "output_schema": {"single_typed": {"venue": "text"}},
                        },
                        {
                            "name": "Polish",
                            "model": "m",
                            "query": "polish the venue",
                            "output_schema": {"single_typed": {"x": "text"}},
                        },
                    ],
                    "edges": [{"source": "Venue", "target": "Polish"}],
                }
            }
        )
    )
    provider = RecordingProvider()
    output = run_inspection(plaintext("d", PAPER_BODY), spec, registry_with(provider))
    assert output.status["Venue"].state == "failed"
    assert "matched nothing" in output.status["Venue"].reason
    assert output.status["Polish"].state == "skipped"
    assert provider.calls == []


def test_model_failure_skips_transitively():
    spec = model_workflow(["A", "B", "C"], [("A", "B"), ("B", "C")])
    provider = RecordingProvider(fail_subnodes={"B"})
    output = run_inspection(plaintext("d", DOC_TEXT), spec, registry_with(provider))
    assert output.status["A"].state == "ok"
    assert output.status["B"].state == "failed"
    assert output.status["C"].state == "skipped"
    # B got its one repair attempt, C never ran
    assert provider.calls == ["A", "B", "B"]


def test_predecessor_outputs_reach_the_prompt():
    spec = model_workflow(["A", "B"], [("A", "B")])
    provider = RecordingProvider()
    run_inspection(plaintext("d", DOC_TEXT), spec, registry_with(provider))
    prompt_b = provider.requests[1].prompt
    assert 'Output of A: {"x":"value-A"}' in prompt_b
    assert "what about B?" in prompt_b


def test_retrieval_k_limits_context():
    config = {
        "dag": {
            "nodes": [
                {
                    "name": "One",
                    "model": "m",
                    "query": "alpha bravo",
                    "output_schema": {"single_typed": {"x": "text"}},
                    "retrieval_k": 1,
                },
                {
                    "name": "Many",
                    "model": "m",
                    "query": "alpha bravo",
                    "output_schema": {"single_typed": {"x": "text"}},
                },
            ],
            "edges": [],
        }
    }
    spec = parse_workflow(json.dumps(config))
    provider = RecordingProvider()
    long_text = " ".join(f"word{i}" for i in range(2000))
    run_inspection(
        plaintext("d", long_text),
        spec,
        registry_with(provider),
        chunk_size=200,
        chunk_overlap=20,
        default_k=5,
    )
    by_name = dict(zip(provider.calls, provider.requests))
    assert len(by_name["One"].context_chunks) == 1
    assert len(by_name["Many"].context_chunks) == 5
    assert all("word" in c for c in by_name["Many"].context_chunks)


def test_as_node_single_output_becomes_dimension():
    config = {
        "dag": {
            "nodes": [
                {
                    "name": "Abstract",
                    "extract_from": {"section": "Abstract"},
                    "output_schema": {"single_typed": {"abstract": "text"}},
                    "as_node": True,
                }
            ],
            "edges": [],
        }
    }
    spec = parse_workflow(json.dumps(config))
    output = run_inspection(plaintext("d", PAPER_BODY), spec, registry_with(RecordingProvider()))
    assert output.fact_properties == {}
    assert output.dimensions == {
        "Abstract": [{"abstract": "Parrots can be taught simple programming. We study how."}]
    }


def test_unreadable_document_raises():
    spec = model_workflow(["A"], [])
    with pytest.raises(DocumentUnreadable):
        run_inspection(
            RawDocument("d", "plaintext", b"\xff\xfe"),
            spec,
            registry_with(RecordingProvider()),
        )


def test_metadata_survives_extraction():
    spec = model_workflow(["A"], [])
    doc = RawDocument(
        "d",
        "structured-json",
        json.dumps({"title": "Some Study", "body": DOC_TEXT}).encode(),
    )
    output = run_inspection(doc, spec, registry_with(RecordingProvider()))
    assert output.metadata["title"] == "Some Study"


def test_random_dags_execute_cleanly():
    rng = random.Random(41)
    for trial in range(120):
        names, edges = random_dag(rng, max_nodes=12)
        fail = {n for n in names if rng.random() < 0.25}
        spec = model_workflow(names, edges)
        provider = RecordingProvider(fail_subnodes=fail)
        output = run_inspection(plaintext("d", DOC_TEXT), spec, registry_with(provider))
        check_run(names, edges, fail, output, provider)
