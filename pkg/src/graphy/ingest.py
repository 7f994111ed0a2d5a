"""Document ingestion: text extraction, chunking, and chunk retrieval.

Model-backed extraction shares one workflow: extract the document text,
chunk it with overlap, embed the chunks, and retrieve the most relevant
ones for a query.  Everything here is pure given its inputs, so distinct
documents can be processed in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graphy import pdftext
from graphy.errors import CorruptDocument, EmptyIndex, InvalidParams, UnsupportedKind
from graphy.graph.types import node_hash

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_CHUNK_OVERLAP = 200
SNAP_WINDOW = 40

PDF = "pdf"
PLAINTEXT = "plaintext"
STRUCTURED_JSON = "structured-json"


@dataclass(frozen=True)
class RawDocument:
    doc_id: str
    kind: str
    data: bytes
    source_uri: str | None = None


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    text: str
    char_span: tuple[int, int]


@dataclass
class ChunkIndex:
    """Immutable after build: chunks plus their unit-norm vectors."""

    chunks: list[Chunk]
    vectors: np.ndarray  # shape (n, dim), rows L2-normalized
    dimensionality: int
    embedder_id: str = ""


def extract_text(doc: RawDocument) -> tuple[str, dict]:
    """Extract UTF-8 text and metadata; page breaks normalized to \\f."""
    if doc.kind == PLAINTEXT:
        try:
            return doc.data.decode("utf-8"), {}
        except UnicodeDecodeError as exc:
            raise CorruptDocument(f"{doc.doc_id}: not valid UTF-8") from exc
    if doc.kind == STRUCTURED_JSON:
        try:
            fields = json.loads(doc.data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptDocument(f"{doc.doc_id}: invalid JSON document") from exc
        if not isinstance(fields, dict):
            raise CorruptDocument(f"{doc.doc_id}: JSON document must be an object")
        title = fields.get("title", "")
        body = fields.get("body", "")
        text = f"{title}\n\n{body}" if title else str(body)
        metadata = {k: v for k, v in fields.items() if k != "body"}
        return text, metadata
    if doc.kind == PDF:
        text, page_count = pdftext.extract_pdf_text(doc.data)
        return text, {"page_count": page_count}
    raise UnsupportedKind(f"unsupported document kind {doc.kind!r}")


def chunk_text(
    text: str,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
    doc_id: str = "",
) -> list[Chunk]:
    """Split ``text`` into overlapping chunks.

    Chunk ends snap backward to the nearest whitespace within SNAP_WINDOW
    chars when that keeps the chunk longer than the overlap, so consecutive
    chunks still overlap by exactly ``overlap`` characters.
    """
    if size < 1 or overlap < 0 or overlap >= size:
        raise InvalidParams(f"need 0 <= overlap < size, got size={size} overlap={overlap}")
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = start + size
        if end >= len(text):
            chunks.append(Chunk(doc_id, len(chunks), text[start:], (start, len(text))))
            break
        snapped = end
        window_start = max(start + overlap + 1, end - SNAP_WINDOW)
        for pos in range(end - 1, window_start - 1, -1):
            if text[pos].isspace():
                snapped = pos + 1
                break
        chunks.append(Chunk(doc_id, len(chunks), text[start:snapped], (start, snapped)))
        start = snapped - overlap
    return chunks


def build_index(chunks: list[Chunk], embedder) -> ChunkIndex:
    """Embed every chunk; vectors are re-normalized defensively."""
    if not chunks:
        raise InvalidParams("cannot index an empty chunk list")
    vectors = np.stack([np.asarray(embedder.embed(chunk.text), dtype=np.float64) for chunk in chunks])
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidParams("embedder produced a zero vector")
    vectors = vectors / norms
    return ChunkIndex(
        chunks=list(chunks),
        vectors=vectors,
        dimensionality=vectors.shape[1],
        embedder_id=getattr(embedder, "embedder_id", ""),
    )


def retrieve(index: ChunkIndex, query: str, k: int, embedder) -> list[Chunk]:
    """Top-k chunks by cosine similarity, ties broken by (doc_id, index)."""
    if k < 1:
        raise InvalidParams(f"k must be >= 1, got {k}")
    if not index.chunks:
        raise EmptyIndex("index holds no chunks")
    qvec = np.asarray(embedder.embed(query), dtype=np.float64)
    qnorm = np.linalg.norm(qvec)
    if qnorm > 0:
        qvec = qvec / qnorm
    scores = index.vectors @ qvec
    order = sorted(
        range(len(index.chunks)),
        key=lambda i: (-scores[i], index.chunks[i].doc_id, index.chunks[i].index),
    )
    return [index.chunks[i] for i in order[:k]]


@dataclass
class ChunkCache:
    """On-disk cache of chunk indexes, keyed by (doc_id, embedder_id)."""

    cache_dir: Path
    _hits: int = field(default=0, repr=False)

    def _path(self, doc_id: str, embedder_id: str) -> Path:
        return Path(self.cache_dir) / f"{node_hash('chunks', doc_id, embedder_id)}.jsonl"

    def load(self, doc_id: str, embedder_id: str) -> ChunkIndex | None:
        path = self._path(doc_id, embedder_id)
        if not path.exists():
            return None
        chunks, rows = [], []
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                rec = json.loads(line)
                chunks.append(Chunk(rec["doc_id"], rec["index"], rec["text"], tuple(rec["span"])))
                rows.append(rec["vector"])
        if not chunks:
            return None
        self._hits += 1
        vectors = np.asarray(rows, dtype=np.float64)
        return ChunkIndex(chunks, vectors, vectors.shape[1], embedder_id)

    def store(self, index: ChunkIndex) -> None:
        if not index.chunks:
            return
        path = self._path(index.chunks[0].doc_id, index.embedder_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for chunk, vector in zip(index.chunks, index.vectors):
                fh.write(
                    json.dumps(
                        {
                            "doc_id": chunk.doc_id,
                            "index": chunk.index,
                            "text": chunk.text,
                            "span": list(chunk.char_span),
                            "vector": [round(float(x), 12) for x in vector],
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )


def index_document(
    doc_id: str,
    text: str,
    embedder,
    size: int = DEFAULT_CHUNK_SIZE,
    overlap: int = DEFAULT_CHUNK_OVERLAP,
    cache: ChunkCache | None = None,
) -> ChunkIndex:
    """Chunk + embed ``text``, going through the cache when one is given."""
    embedder_id = getattr(embedder, "embedder_id", "")
    if cache is not None:
        cached = cache.load(doc_id, embedder_id)
        if cached is not None:
            return cached
    index = build_index(chunk_text(text, size, overlap, doc_id), embedder)
    if cache is not None:
        cache.store(index)
    return index
