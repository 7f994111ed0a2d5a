"""Offline pipeline: inspect documents and populate the graph store.

The fact label carries every single-typed field the workflow extracts;
each array-typed (or ``as_node``) subnode becomes a dimension label named
after the subnode.  Fact identity comes from the normalized title, so
scraping the same document twice, or two documents describing the same
work, converges on one node.
"""

from __future__ import annotations

from dataclasses import dataclass

from graphy.errors import SchemaViolation
from graphy.graph import (
    BOOLEAN,
    INTEGER,
    REAL,
    TEXT,
    FactNode,
    GraphSchema,
    GraphStore,
    PropertySpec,
    canonical_id,
)
from graphy.ingest import (
    DEFAULT_CHUNK_OVERLAP,
    DEFAULT_CHUNK_SIZE,
    ChunkCache,
    RawDocument,
)
from graphy.inspection import DEFAULT_RETRIEVAL_K, InspectionOutput, run_inspection
from graphy.providers import ProviderRegistry
from graphy.workflow import ARRAY_TYPED, WorkflowSpec

FACT_LABEL = "Paper"
TITLE_KEY = "title"

_TYPE_MAP = {"text": TEXT, "integer": INTEGER, "real": REAL, "boolean": BOOLEAN}


def schema_from_workflow(spec: WorkflowSpec, fact_label: str = FACT_LABEL) -> GraphSchema:
    """Graph schema implied by a workflow config."""
    schema = GraphSchema()
    fact_props = {TITLE_KEY: PropertySpec(TEXT, required=True)}
    for node in spec.nodes:
        fields = {
            name: PropertySpec(_TYPE_MAP[ftype], required=name in node.output_schema.required)
            for name, ftype in node.output_schema.fields.items()
        }
        if node.output_schema.kind == ARRAY_TYPED or node.as_node:
            schema.declare(node.name, fields)
        else:
            # fact attributes stay optional: a failed subnode must not make
            # the whole fact unstorable
            for name, pspec in fields.items():
                prior = fact_props.get(name)
                if prior is not None and prior.value_type != pspec.value_type:
                    raise SchemaViolation(
                        f"subnodes disagree on the type of {fact_label}.{name}"
                    )
                fact_props.setdefault(name, PropertySpec(pspec.value_type))
    schema.declare(fact_label, fact_props)
    return schema


@dataclass(frozen=True)
class ScrapeResult:
    doc_id: str
    fact_id: str
    title: str
    output: InspectionOutput


class Scrapper:
    """Runs the extraction DAG over documents and writes the results."""

    def __init__(
        self,
        store: GraphStore,
        workflow: WorkflowSpec,
        registry: ProviderRegistry,
        *,
        fact_label: str = FACT_LABEL,
        chunk_size: int = DEFAULT_CHUNK_SIZE,
        chunk_overlap: int = DEFAULT_CHUNK_OVERLAP,
        cache: ChunkCache | None = None,
        default_k: int = DEFAULT_RETRIEVAL_K,
    ):
        self.store = store
        self.workflow = workflow
        self.registry = registry
        self.fact_label = fact_label
        self.chunk_size = chunk_size
        self.chunk_overlap = chunk_overlap
        self.cache = cache
        self.default_k = default_k

    def inspect_document(self, doc: RawDocument) -> ScrapeResult:
        output = run_inspection(
            doc,
            self.workflow,
            self.registry,
            chunk_size=self.chunk_size,
            chunk_overlap=self.chunk_overlap,
            cache=self.cache,
            default_k=self.default_k,
        )
        title = (
            output.fact_properties.get(TITLE_KEY)
            or output.metadata.get(TITLE_KEY)
            or doc.doc_id
        )
        fact_id = canonical_id(title)
        properties = {**output.fact_properties, TITLE_KEY: title}
        self.store.upsert_fact(FactNode(fact_id, self.fact_label, properties))
        for label, items in output.dimensions.items():
            self.store.add_dimensions(fact_id, label, items)
        return ScrapeResult(doc.doc_id, fact_id, title, output)

    def scrape(self, docs: list[RawDocument]) -> list[ScrapeResult]:
        return [self.inspect_document(doc) for doc in docs]
