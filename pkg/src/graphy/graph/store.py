"""Embedded property-graph store.

Persistence is an append-only operation log plus a snapshot, both JSONL
in the store's data directory.  Opening a store replays the snapshot and
then the log; closing compacts the log into a fresh snapshot.  All
mutations are serialized through one writer lock; reads never block.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Callable, Iterator

from graphy.errors import IoFailure, KindViolation, UnknownLabel, UnknownNode, UnknownOwner
from graphy.graph.types import (
    HAS_DIMENSION,
    NAVIGATES_TO,
    DimensionNode,
    Edge,
    FactNode,
    GraphSchema,
    canonical_json,
    dimension_id,
)

SNAPSHOT_FILE = "snapshot.jsonl"
OPLOG_FILE = "oplog.jsonl"
SCHEMA_FILE = "schema.json"


class GraphStore:
    def __init__(self, schema: GraphSchema, data_dir: str | Path | None = None):
        self.schema = schema
        self._facts: dict[str, FactNode] = {}
        self._dimensions: dict[str, DimensionNode] = {}
        self._edges: dict[tuple[str, str, str], Edge] = {}
        self._by_label: dict[str, set[str]] = {}
        self._out: dict[tuple[str, str], set[str]] = {}
        self._in: dict[tuple[str, str], set[str]] = {}
        self._lock = threading.RLock()
        self._log = None
        self._data_dir = Path(data_dir) if data_dir is not None else None
        if self._data_dir is not None:
            self._open_dir()

    # ------------------------------------------------------------------
    # persistence

    @classmethod
    def open(cls, data_dir: str | Path) -> GraphStore:
        """Open an existing on-disk store, reading its saved schema."""
        schema_path = Path(data_dir) / SCHEMA_FILE
        if not schema_path.exists():
            raise IoFailure(f"no graph store at {data_dir} (missing {SCHEMA_FILE})")
        schema = GraphSchema.from_json(json.loads(schema_path.read_text("utf-8")))
        return cls(schema, data_dir)

    def _open_dir(self) -> None:
        try:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            schema_path = self._data_dir / SCHEMA_FILE
            schema_path.write_text(canonical_json(self.schema.to_json()) + "\n", "utf-8")
            snap = self._data_dir / SNAPSHOT_FILE
            if snap.exists():
                with snap.open("r", encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            self._apply_record(json.loads(line))
            oplog = self._data_dir / OPLOG_FILE
            if oplog.exists():
                with oplog.open("r", encoding="utf-8") as fh:
                    for line in fh:
                        if line.strip():
                            self._replay_op(json.loads(line))
            self._log = oplog.open("a", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot open graph store at {self._data_dir}: {exc}") from exc

    def _append_op(self, op: dict) -> None:
        if self._log is not None:
            self._log.write(canonical_json(op) + "\n")
            self._log.flush()

    def _replay_op(self, op: dict) -> None:
        kind = op["op"]
        if kind == "upsert_fact":
            self.upsert_fact(FactNode(op["id"], op["label"], op["properties"]), _replay=True)
        elif kind == "add_dimensions":
            self.add_dimensions(op["owner"], op["label"], op["items"], _replay=True)
        elif kind == "link_facts":
            self.link_facts(op["source"], op["target"], _replay=True)
        else:
            raise IoFailure(f"unknown op record {kind!r} in log")

    def _apply_record(self, rec: dict) -> None:
        """Load one snapshot/export record without logging."""
        if rec["kind"] == "node":
            props = self.schema.validate_properties(rec["label"], rec["properties"])
            if rec["node_type"] == "fact":
                self._index_fact(FactNode(rec["id"], rec["label"], props))
            else:
                self._index_dimension(
                    DimensionNode(rec["id"], rec["label"], rec["owner"], props, rec.get("ordinal", 0))
                )
        elif rec["kind"] == "edge":
            self._index_edge(Edge(rec["source"], rec["target"], rec["edge_kind"], rec.get("properties", {})))

    def merge_schema(self, other: GraphSchema) -> None:
        """Extend the schema in place; type conflicts are rejected.

        On-disk stores rewrite their saved schema so a reopen sees the
        merged version.
        """
        with self._lock:
            for label, props in other.nodes.items():
                self.schema.declare(label, props)
            if self._data_dir is not None:
                schema_path = self._data_dir / SCHEMA_FILE
                schema_path.write_text(canonical_json(self.schema.to_json()) + "\n", "utf-8")

    def close(self) -> None:
        """Compact the log into a snapshot and release the log handle."""
        with self._lock:
            if self._data_dir is None:
                return
            try:
                snap = self._data_dir / SNAPSHOT_FILE
                tmp = snap.with_suffix(".tmp")
                with tmp.open("w", encoding="utf-8") as fh:
                    for rec in self.export_records():
                        fh.write(canonical_json(rec) + "\n")
                tmp.replace(snap)
                if self._log is not None:
                    self._log.close()
                    self._log = None
                (self._data_dir / OPLOG_FILE).write_text("", "utf-8")
            except OSError as exc:
                raise IoFailure(f"cannot compact store at {self._data_dir}: {exc}") from exc

    # ------------------------------------------------------------------
    # indexing helpers

    def _index_fact(self, node: FactNode) -> None:
        self._facts[node.id] = node
        self._by_label.setdefault(node.label, set()).add(node.id)

    def _index_dimension(self, node: DimensionNode) -> None:
        self._dimensions[node.id] = node
        self._by_label.setdefault(node.label, set()).add(node.id)

    def _index_edge(self, edge: Edge) -> None:
        key = (edge.kind, edge.source, edge.target)
        if key in self._edges:
            return
        self._edges[key] = edge
        self._out.setdefault((edge.source, edge.kind), set()).add(edge.target)
        self._in.setdefault((edge.target, edge.kind), set()).add(edge.source)

    # ------------------------------------------------------------------
    # mutations

    def upsert_fact(self, node: FactNode, _replay: bool = False) -> str:
        """Store a fact node; an existing id is merged, new values winning."""
        props = self.schema.validate_properties(node.label, node.properties)
        with self._lock:
            existing = self._facts.get(node.id)
            if existing is not None:
                merged = dict(existing.properties)
                merged.update(props)
                props = merged
            self._index_fact(FactNode(node.id, node.label, props))
            if not _replay:
                self._append_op(
                    {"op": "upsert_fact", "id": node.id, "label": node.label, "properties": node.properties}
                )
        return node.id

    def add_dimensions(
        self, owner: str, label: str, items: list[dict], _replay: bool = False
    ) -> list[str]:
        """Attach one dimension node per item to ``owner``; returns new ids."""
        validated = [self.schema.validate_properties(label, item) for item in items]
        with self._lock:
            if owner not in self._facts:
                raise UnknownOwner(f"no fact node {owner!r}")
            ids = []
            for ordinal, props in enumerate(validated):
                node_id = dimension_id(owner, label, ordinal, props)
                self._index_dimension(DimensionNode(node_id, label, owner, props, ordinal))
                self._index_edge(Edge(owner, node_id, HAS_DIMENSION))
                ids.append(node_id)
            if not _replay:
                self._append_op({"op": "add_dimensions", "owner": owner, "label": label, "items": items})
        return ids

    def link_facts(self, source: str, target: str, _replay: bool = False) -> Edge:
        """Add a NAVIGATES_TO edge between two facts; idempotent."""
        with self._lock:
            for node_id in (source, target):
                if node_id in self._dimensions:
                    raise KindViolation(f"{node_id!r} is a dimension node")
                if node_id not in self._facts:
                    raise UnknownNode(f"no node {node_id!r}")
            edge = Edge(source, target, NAVIGATES_TO)
            self._index_edge(edge)
            if not _replay:
                self._append_op({"op": "link_facts", "source": source, "target": target})
        return self._edges[(NAVIGATES_TO, source, target)]

    # ------------------------------------------------------------------
    # reads

    def has_node(self, node_id: str) -> bool:
        return node_id in self._facts or node_id in self._dimensions

    def get_node(self, node_id: str) -> FactNode | DimensionNode:
        node = self._facts.get(node_id) or self._dimensions.get(node_id)
        if node is None:
            raise UnknownNode(f"no node {node_id!r}")
        return node

    def neighbors(self, node_id: str, kind: str, direction: str = "out") -> list[str]:
        """Neighbor ids along ``kind`` edges, sorted, without duplicates."""
        if not self.has_node(node_id):
            raise UnknownNode(f"no node {node_id!r}")
        found: set[str] = set()
        if direction in ("out", "both"):
            found |= self._out.get((node_id, kind), set())
        if direction in ("in", "both"):
            found |= self._in.get((node_id, kind), set())
        if direction not in ("out", "in", "both"):
            raise KindViolation(f"bad direction {direction!r}")
        return sorted(found)

    def dimensions_of(self, owner: str, label: str | None = None) -> list[DimensionNode]:
        """Dimension nodes attached to ``owner``, in extraction order."""
        out = []
        for dim_id in self._out.get((owner, HAS_DIMENSION), set()):
            dim = self._dimensions[dim_id]
            if label is None or dim.label == label:
                out.append(dim)
        return sorted(out, key=lambda d: (d.label, d.ordinal, d.id))

    def scan(
        self, label: str, predicate: Callable[[dict], bool] | None = None
    ) -> Iterator[FactNode | DimensionNode]:
        """Yield every node of ``label`` whose properties satisfy the filter."""
        if not self.schema.has_label(label):
            raise UnknownLabel(f"unknown label {label!r}")
        matcher = predicate.matches if hasattr(predicate, "matches") else predicate
        for node_id in sorted(self._by_label.get(label, set())):
            node = self._facts.get(node_id) or self._dimensions[node_id]
            if matcher is None or matcher(node.properties):
                yield node

    def has_edge(self, source: str, target: str, kind: str = NAVIGATES_TO) -> bool:
        return (kind, source, target) in self._edges

    def facts(self) -> list[FactNode]:
        return [self._facts[k] for k in sorted(self._facts)]

    def edges(self, kind: str | None = None) -> list[Edge]:
        out = [e for e in self._edges.values() if kind is None or e.kind == kind]
        return sorted(out, key=lambda e: (e.kind, e.source, e.target))

    def counts(self) -> dict:
        return {
            "facts": len(self._facts),
            "dimensions": len(self._dimensions),
            "edges": len(self._edges),
        }

    # ------------------------------------------------------------------
    # export records (shared by snapshot and jsonl export)

    def export_records(self) -> Iterator[dict]:
        """All nodes then edges, in a fixed deterministic order."""
        for node in sorted(self._facts.values(), key=lambda n: (n.label, n.id)):
            yield {
                "kind": "node",
                "node_type": "fact",
                "id": node.id,
                "label": node.label,
                "properties": node.properties,
            }
        for node in sorted(self._dimensions.values(), key=lambda n: (n.label, n.id)):
            yield {
                "kind": "node",
                "node_type": "dimension",
                "id": node.id,
                "label": node.label,
                "owner": node.owner,
                "ordinal": node.ordinal,
                "properties": node.properties,
            }
        for edge in self.edges():
            yield {
                "kind": "edge",
                "edge_kind": edge.kind,
                "source": edge.source,
                "target": edge.target,
                "properties": edge.properties,
            }
