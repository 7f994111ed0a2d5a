"""Model providers: routing, deterministic backends, completion parsing."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from graphy.errors import (
    DuplicatePrefix,
    InvalidParams,
    NoProvider,
    ParseFailure,
    ProviderFailure,
)
from graphy.providers import (
    CompletionRequest,
    ExtractiveProvider,
    HashEmbedder,
    HttpProvider,
    ProviderRegistry,
    ScriptedProvider,
    registry_from_config,
)
from graphy.workflow import OutputSchema


def single_schema(**fields) -> OutputSchema:
    return OutputSchema("single_typed", dict(fields), frozenset(fields))


def array_schema(**fields) -> OutputSchema:
    return OutputSchema("array_typed", dict(fields), frozenset(fields))


# ----------------------------------------------------------------------
# embedder

def test_hash_embedder_counts_and_norm():
    emb = HashEmbedder(dim=64)
    vec = emb.embed("a a b")
    nonzero = np.flatnonzero(vec)
    assert len(nonzero) == 2
    assert sorted(vec[nonzero]) == pytest.approx([1 / math.sqrt(5), 2 / math.sqrt(5)])
    assert np.linalg.norm(vec) == pytest.approx(1.0)


def test_hash_embedder_case_and_determinism():
    emb = HashEmbedder()
    assert np.array_equal(emb.embed("Hello WORLD"), emb.embed("hello world"))
    assert np.array_equal(emb.embed("hello world"), emb.embed("hello world"))


def test_hash_embedder_empty_raises():
    with pytest.raises(InvalidParams):
        HashEmbedder().embed("")


def test_hash_embedder_punctuation_only_still_embeds():
    vec = HashEmbedder().embed("!!! ???")
    assert np.linalg.norm(vec) == pytest.approx(1.0)


# ----------------------------------------------------------------------
# deterministic providers

def test_scripted_provider_lookup():
    provider = ScriptedProvider({"doc1": {"Challenges": [{"summary": "hard"}]}})
    req = CompletionRequest("m", "p", doc_id="doc1", subnode="Challenges")
    assert json.loads(provider.generate(req)) == [{"summary": "hard"}]


def test_scripted_provider_missing_key():
    provider = ScriptedProvider({"doc1": {"Challenges": []}})
    with pytest.raises(ProviderFailure):
        provider.generate(CompletionRequest("m", "p", doc_id="doc1", subnode="Solutions"))
    with pytest.raises(ProviderFailure):
        provider.generate(CompletionRequest("m", "p", doc_id="doc2", subnode="Challenges"))


def test_scripted_provider_reads_file(tmp_path):
    path = tmp_path / "fixtures.json"
    path.write_text(json.dumps({"d": {"s": {"x": 1}}}), "utf-8")
    provider = ScriptedProvider(path)
    out = provider.generate(CompletionRequest("m", "p", doc_id="d", subnode="s"))
    assert json.loads(out) == {"x": 1}


def test_extractive_provider_ranks_by_stem_overlap():
    provider = ExtractiveProvider(max_items=2)
    req = CompletionRequest(
        "m",
        "p",
        context_chunks=[
            "Cats purr. Training deep models is hard. Training data and training compute are challenges.",
        ],
        output_schema=array_schema(summary="text"),
        query="training challenges",
    )
    parsed = json.loads(provider.generate(req))
    assert parsed == [
        {"summary": "Training data and training compute are challenges."},
        {"summary": "Training deep models is hard."},
    ]


def test_extractive_provider_single_schema_joins():
    provider = ExtractiveProvider(max_items=2)
    req = CompletionRequest(
        "m",
        "p",
        context_chunks=["Models overfit. Regularization helps models. The sky is blue."],
        output_schema=single_schema(abstract="text"),
        query="models",
    )
    parsed = json.loads(provider.generate(req))
    assert parsed == {"abstract": "Models overfit. Regularization helps models."}


def test_extractive_provider_no_overlap_fails():
    provider = ExtractiveProvider()
    req = CompletionRequest(
        "m",
        "p",
        context_chunks=["Nothing relevant here."],
        output_schema=array_schema(summary="text"),
        query="quantum chromodynamics",
    )
    with pytest.raises(ProviderFailure):
        provider.generate(req)


# ----------------------------------------------------------------------
# registry routing

def test_registry_longest_prefix_wins():
    registry = ProviderRegistry()
    default = ScriptedProvider({})
    ollama = ScriptedProvider({})
    registry.register("", default)
    registry.register("ollama/", ollama)
    assert registry.route("ollama/qwen2.5:7b") is ollama
    assert registry.route("qwen-plus") is default


def test_registry_duplicate_prefix():
    registry = ProviderRegistry()
    registry.register("ollama/", ScriptedProvider({}))
    with pytest.raises(DuplicatePrefix):
        registry.register("ollama/", ScriptedProvider({}))


def test_registry_no_provider():
    registry = ProviderRegistry()
    registry.register("ollama/", ScriptedProvider({}))
    with pytest.raises(NoProvider):
        registry.route("qwen-plus")


def test_complete_parses_against_schema():
    registry = ProviderRegistry()
    registry.register("", ScriptedProvider({"d": {"Year": {"year": "2024", "junk": True}}}))
    req = CompletionRequest(
        "any-model",
        "p",
        output_schema=single_schema(year="integer"),
        doc_id="d",
        subnode="Year",
    )
    result = registry.complete(req)
    assert result.parsed == {"year": 2024}
    assert result.provider_id == "scripted"


class FlakyProvider:
    """Bad output once, then a valid completion; counts its calls."""

    provider_id = "flaky"

    def __init__(self, good: str, bad: str = "sorry, no JSON today"):
        self.good = good
        self.bad = bad
        self.calls = 0

    def generate(self, request: CompletionRequest) -> str:
        self.calls += 1
        return self.bad if self.calls == 1 else self.good


def test_complete_repairs_once():
    provider = FlakyProvider(good='{"summary": "fixed"}')
    registry = ProviderRegistry()
    registry.register("", provider)
    result = registry.complete(
        CompletionRequest("m", "p", output_schema=single_schema(summary="text"))
    )
    assert provider.calls == 2
    assert result.parsed == {"summary": "fixed"}


def test_complete_repair_prompt_restates_schema():
    provider = FlakyProvider(good='{"summary": "ok"}')
    seen = []
    original = provider.generate
    provider.generate = lambda req: seen.append(req.prompt) or original(req)
    registry = ProviderRegistry()
    registry.register("", provider)
    registry.complete(CompletionRequest("m", "base", output_schema=single_schema(summary="text")))
    assert seen[0] == "base"
    assert "summary" in seen[1] and seen[1] != "base"


def test_complete_gives_up_after_one_retry():
    provider = FlakyProvider(good="still not json", bad="not json either")
    registry = ProviderRegistry()
    registry.register("", provider)
    with pytest.raises(ParseFailure):
        registry.complete(CompletionRequest("m", "p", output_schema=single_schema(x="text")))
    assert provider.calls == 2


def test_complete_strips_code_fences():
    provider = FlakyProvider(good="unused", bad='```json\n{"x": "v"}\n```')
    registry = ProviderRegistry()
    registry.register("", provider)
    result = registry.complete(CompletionRequest("m", "p", output_schema=single_schema(x="text")))
    assert provider.calls == 1
    assert result.parsed == {"x": "v"}


def test_complete_without_schema_returns_raw():
    registry = ProviderRegistry()
    registry.register("", FlakyProvider(good="unused", bad="plain prose answer"))
    result = registry.complete(CompletionRequest("m", "p"))
    assert result.raw_text == "plain prose answer"
    assert result.parsed is None


# ----------------------------------------------------------------------
# offline guard

def test_http_provider_refuses_offline(monkeypatch):
    monkeypatch.setenv("GRAPHY_OFFLINE", "1")
    provider = HttpProvider("http://localhost:9/v1/chat/completions")
    with pytest.raises(ProviderFailure):
        provider.generate(CompletionRequest("m", "p"))


def test_registry_config_rejects_http_route_offline(monkeypatch):
    monkeypatch.setenv("GRAPHY_OFFLINE", "1")
    config = {"routes": [{"prefix": "", "type": "http", "endpoint": "http://x/v1"}]}
    with pytest.raises(ProviderFailure):
        registry_from_config(config)


def test_registry_config_builds_scripted_routes(tmp_path):
    fixtures = tmp_path / "f.json"
    fixtures.write_text(json.dumps({"d": {"s": {"a": "b"}}}), "utf-8")
    config = {
        "routes": [
            {"prefix": "ollama/", "type": "scripted", "fixtures": str(fixtures)},
            {"prefix": "", "type": "extractive"},
        ]
    }
    registry = registry_from_config(config)
    assert isinstance(registry.route("ollama/qwen2.5:7b"), ScriptedProvider)
    assert isinstance(registry.route("qwen-plus"), ExtractiveProvider)
