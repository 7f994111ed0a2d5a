"""Run one document through an extraction DAG.

Subnodes execute in dependency order.  A rule subnode reads the full
document text; a model subnode gets retrieved chunks plus the outputs of
its predecessors as context.  When a subnode fails, every subnode
downstream of it is skipped rather than run on missing context.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from graphy.errors import DocumentUnreadable, GraphyError
from graphy.graph.types import canonical_json
from graphy.ingest import (
    DEFAULT_CHUNK_OVERLAP,
    DEFAULT_CHUNK_SIZE,
    ChunkCache,
    RawDocument,
    extract_text,
    index_document,
    retrieve,
)
from graphy.providers import CompletionRequest, ProviderRegistry
from graphy.workflow import (
    ARRAY_TYPED,
    InspectNodeSpec,
    WorkflowSpec,
    rule_extract,
    rule_extract_all,
    topological_order,
)

DEFAULT_RETRIEVAL_K = 5

OK = "ok"
FAILED = "failed"
SKIPPED = "skipped"


@dataclass(frozen=True)
class SubnodeStatus:
    state: str
    reason: str | None = None


@dataclass
class InspectionOutput:
    doc_id: str
    fact_properties: dict = field(default_factory=dict)
    dimensions: dict[str, list[dict]] = field(default_factory=dict)
    status: dict[str, SubnodeStatus] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def ok_subnodes(self) -> list[str]:
        return [name for name, s in self.status.items() if s.state == OK]


def _predecessor_context(spec: WorkflowSpec, name: str, results: dict[str, object]) -> str:
    blocks = []
    for source, target in spec.edges:
        if target == name and source in results:
            blocks.append(f"Output of {source}: {canonical_json(results[source])}")
    return "\n".join(blocks)


def run_inspection(
    doc: RawDocument,
    spec: WorkflowSpec,
    registry: ProviderRegistry,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP,
    cache: ChunkCache | None = None,
    default_k: int = DEFAULT_RETRIEVAL_K,
) -> InspectionOutput:
    """Execute every subnode of ``spec`` against ``doc``."""
    try:
        text, metadata = extract_text(doc)
    except GraphyError as exc:
        raise DocumentUnreadable(f"{doc.doc_id}: {exc}") from exc

    output = InspectionOutput(doc_id=doc.doc_id, metadata=metadata)
    results: dict[str, object] = {}
    index = None

    for name in topological_order(spec):
        node = spec.by_name[name]
        bad = [p for p in spec.predecessors(name) if output.status[p].state != OK]
        if bad:
            output.status[name] = SubnodeStatus(SKIPPED, f"upstream {bad[0]!r} did not finish")
            continue
        try:
            if node.is_rule:
                value = _run_rule(node, text)
            else:
                if index is None:
                    index = index_document(
                        doc.doc_id, text, registry.embedder, chunk_size, chunk_overlap, cache
                    )
                value = _run_model(node, spec, results, registry, index, default_k, doc.doc_id)
        except GraphyError as exc:
            output.status[name] = SubnodeStatus(FAILED, str(exc))
            continue
        results[name] = value
        output.status[name] = SubnodeStatus(OK)
        _merge(output, node, value)
    return output


def _run_rule(node: InspectNodeSpec, text: str):
    if node.output_schema.kind == ARRAY_TYPED:
        raw = rule_extract_all(text, node.rule)
    else:
        raw = rule_extract(text, node.rule)
    return node.output_schema.validate(raw)


def _run_model(
    node: InspectNodeSpec,
    spec: WorkflowSpec,
    results: dict[str, object],
    registry: ProviderRegistry,
    index,
    default_k: int,
    doc_id: str,
):
    k = node.retrieval_k or default_k
    chunks = retrieve(index, node.query, min(k, len(index.chunks)), registry.embedder)
    context = [c.text for c in chunks]
    upstream = _predecessor_context(spec, node.name, results)
    prompt = node.query
    if upstream:
        prompt = f"{upstream}\n\n{prompt}"
    prompt += "\n\nRespond with JSON only, matching exactly:\n" + node.output_schema.describe()
    request = CompletionRequest(
        model_id=node.model_id,
        prompt=prompt,
        context_chunks=context,
        output_schema=node.output_schema,
        doc_id=doc_id,
        subnode=node.name,
        query=node.query,
    )
    return registry.complete(request).parsed


def _merge(output: InspectionOutput, node: InspectNodeSpec, value) -> None:
    if node.output_schema.kind == ARRAY_TYPED:
        output.dimensions.setdefault(node.name, []).extend(value)
    elif node.as_node:
        output.dimensions.setdefault(node.name, []).append(value)
    else:
        output.fact_properties.update(value)
