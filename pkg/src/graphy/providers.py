"""Completion and embedding backends behind one routing registry.

Requests are routed by longest model-id prefix, so ``ollama/qwen2.5:7b``
can hit a local backend while ``qwen-plus`` falls through to the default
route.  Three completion backends ship with the package:

* scripted -- lookup table keyed by (doc_id, subnode), for byte-exact
  offline runs;
* extractive -- deterministic keyword-overlap summarizer, so unscripted
  offline runs still produce meaningful output;
* http -- generic chat-completion client, refused when GRAPHY_OFFLINE=1.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from graphy.errors import (
    DuplicatePrefix,
    GraphyError,
    InvalidParams,
    NoProvider,
    ParseFailure,
    ProviderFailure,
)

if TYPE_CHECKING:  # pragma: no cover
    from graphy.workflow import OutputSchema

OFFLINE_ENV = "GRAPHY_OFFLINE"

_STOPWORDS = frozenset(
    """a an and are as at be by for from has have in is it its of on or that the
    this to was were will with please summarize paper their there what which""".split()
)


def offline() -> bool:
    return os.environ.get(OFFLINE_ENV, "") not in ("", "0")


@dataclass(frozen=True)
class CompletionRequest:
    model_id: str
    prompt: str
    context_chunks: list[str] = field(default_factory=list)
    output_schema: "OutputSchema | None" = None
    max_output: int = 8000
    # extraction metadata: lets deterministic backends key their behavior
    doc_id: str | None = None
    subnode: str | None = None
    query: str | None = None


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    parsed: object | None
    provider_id: str


def _stem(token: str) -> str:
    if len(token) > 3 and token.endswith("s"):
        return token[:-1]
    return token


def _stems(text: str) -> list[str]:
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    return [_stem(t) for t in tokens if t not in _STOPWORDS]


def split_sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+|\n+", text)
    return [p.strip() for p in parts if p.strip()]


class HashEmbedder:
    """Feature-hashing bag of tokens: dim buckets, counts L2-normalized."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise InvalidParams("embedder dimension must be >= 1")
        self.dim = dim
        self.embedder_id = f"hash{dim}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise InvalidParams("cannot embed empty text")
        tokens = re.findall(r"[a-z0-9]+", text.lower()) or [""]
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in tokens:
            vec[self._bucket(token)] += 1.0
        return vec / np.linalg.norm(vec)


class ScriptedProvider:
    """Canned completions from a fixtures file: {doc_id: {subnode: value}}."""

    provider_id = "scripted"

    def __init__(self, fixtures: str | Path | dict):
        if isinstance(fixtures, (str, Path)):
            self.table = json.loads(Path(fixtures).read_text("utf-8"))
        else:
            self.table = fixtures

    def generate(self, request: CompletionRequest) -> str:
        by_doc = self.table.get(request.doc_id or "")
        if by_doc is None or request.subnode not in by_doc:
            raise ProviderFailure(
                f"no scripted completion for doc={request.doc_id!r} subnode={request.subnode!r}"
            )
        return json.dumps(by_doc[request.subnode], sort_keys=True, ensure_ascii=False)


class ExtractiveProvider:
    """Deterministic summarizer: context sentences sharing at least one
    non-stopword query stem, ranked by stem overlap, ties in text order.
    """

    provider_id = "extractive"

    def __init__(self, max_items: int = 3):
        self.max_items = max_items

    def _ranked_sentences(self, request: CompletionRequest) -> list[str]:
        query_stems = set(_stems(request.query or request.prompt))
        scored = []
        position = 0
        for block in request.context_chunks:
            for sentence in split_sentences(block):
                overlap = len(query_stems & set(_stems(sentence)))
                if overlap > 0:
                    scored.append((-overlap, position, sentence))
                position += 1
        scored.sort()
        return [s for _, _, s in scored[: self.max_items]]

    def generate(self, request: CompletionRequest) -> str:
        sentences = self._ranked_sentences(request)
        schema = request.output_schema
        if schema is None:
            return sentences[0] if sentences else ""
        if not sentences:
            raise ProviderFailure("no context sentence shares a stem with the query")
        text_fields = [n for n, t in schema.fields.items() if t == "text"]
        if not text_fields:
            raise ProviderFailure("extractive provider can only fill text fields")
        if schema.kind == "array_typed":
            value = [{f: sentence for f in text_fields} for sentence in sentences]
        else:
            joined = " ".join(sentences)
            value = {f: joined for f in text_fields}
        return json.dumps(value, sort_keys=True, ensure_ascii=False)


class HttpProvider:
    """Chat-completion wire client for an OpenAI-style endpoint."""

    provider_id = "http"

    def __init__(self, endpoint: str, model_override: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint
        self.model_override = model_override
        self.timeout = timeout

    def generate(self, request: CompletionRequest) -> str:
        if offline():
            raise ProviderFailure(f"{OFFLINE_ENV}=1 forbids the http provider")
        import httpx

        messages = [{"role": "user", "content": request.prompt}]
        if request.context_chunks:
            context = "\n\n".join(request.context_chunks)
            messages.insert(0, {"role": "system", "content": f"Context:\n{context}"})
        payload = {"model": self.model_override or request.model_id, "messages": messages}
        try:
            resp = httpx.post(self.endpoint, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:  # transport and shape errors alike
            raise ProviderFailure(f"http completion failed: {exc}") from exc


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    m = re.match(r"^```[a-zA-Z]*\n(.*?)\n?```$", stripped, re.S)
    return m.group(1) if m else stripped


class ProviderRegistry:
    """Longest-prefix router over completion providers plus one embedder."""

    def __init__(self, embedder: HashEmbedder | None = None):
        self._routes: dict[str, object] = {}
        self.embedder = embedder or HashEmbedder()

    def register(self, prefix: str, provider) -> None:
        if prefix in self._routes:
            raise DuplicatePrefix(f"prefix {prefix!r} already registered")
        self._routes[prefix] = provider

    def route(self, model_id: str):
        best = None
        for prefix in self._routes:
            if model_id.startswith(prefix):
                if best is None or len(prefix) > len(best):
                    best = prefix
        if best is None:
            raise NoProvider(f"no provider registered for model {model_id!r}")
        return self._routes[best]

    def embed(self, text: str) -> np.ndarray:
        return self.embedder.embed(text)

    def complete(self, request: CompletionRequest) -> CompletionResult:
        provider = self.route(request.model_id)
        raw = provider.generate(request)
        if not raw:
            raise ProviderFailure(f"{provider.provider_id} returned an empty completion")
        schema = request.output_schema
        if schema is None:
            return CompletionResult(raw, None, provider.provider_id)
        try:
            parsed = schema.validate(json.loads(_strip_fences(raw)))
        except (json.JSONDecodeError, GraphyError):
            # one repair retry with the schema re-stated
            repair = replace(
                request,
                prompt=request.prompt
                + "\n\nYour previous answer was not valid. Respond with JSON only, matching exactly:\n"
                + schema.describe(),
            )
            raw = provider.generate(repair)
            try:
                parsed = schema.validate(json.loads(_strip_fences(raw)))
            except (json.JSONDecodeError, GraphyError) as exc:
                raise ParseFailure(f"completion does not match the output schema: {exc}") from exc
        return CompletionResult(raw, parsed, provider.provider_id)


def registry_from_config(config: dict, embedder: HashEmbedder | None = None) -> ProviderRegistry:
    """Build a registry from ``{"routes":[{"prefix":...,"type":...},...]}``."""
    registry = ProviderRegistry(embedder)
    for route in config.get("routes", []):
        kind = route.get("type")
        prefix = route.get("prefix", "")
        if kind == "scripted":
            provider = ScriptedProvider(route["fixtures"])
        elif kind == "extractive":
            provider = ExtractiveProvider(route.get("max_items", 3))
        elif kind == "http":
            if offline():
                raise ProviderFailure(
                    f"route {prefix!r} uses the http provider but {OFFLINE_ENV}=1 is set"
                )
            provider = HttpProvider(route["endpoint"], route.get("model"))
        else:
            raise InvalidParams(f"unknown provider type {kind!r}")
        registry.register(prefix, provider)
    return registry
