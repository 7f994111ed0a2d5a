"""Graph import/export: JSONL round-trip files and CSV bulk-import files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from graphy.errors import IoFailure
from graphy.graph.store import GraphStore
from graphy.graph.types import GraphSchema, canonical_json

GRAPH_FILE = "graph.jsonl"
SCHEMA_FILE = "schema.json"


def export_jsonl(store: GraphStore, out_dir: str | Path) -> list[Path]:
    """Write ``schema.json`` and ``graph.jsonl`` (one record per node/edge)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        schema_path = out / SCHEMA_FILE
        schema_path.write_text(canonical_json(store.schema.to_json()) + "\n", "utf-8")
        graph_path = out / GRAPH_FILE
        with graph_path.open("w", encoding="utf-8") as fh:
            for rec in store.export_records():
                fh.write(canonical_json(rec) + "\n")
    except OSError as exc:
        raise IoFailure(f"export to {out} failed: {exc}") from exc
    return [schema_path, graph_path]


def import_jsonl(in_dir: str | Path, data_dir: str | Path | None = None) -> GraphStore:
    """Rebuild a store from an ``export_jsonl`` file set."""
    src = Path(in_dir)
    try:
        schema = GraphSchema.from_json(json.loads((src / SCHEMA_FILE).read_text("utf-8")))
        store = GraphStore(schema, data_dir)
        facts, dims, edges = [], [], []
        with (src / GRAPH_FILE).open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["kind"] == "node" and rec["node_type"] == "fact":
                    facts.append(rec)
                elif rec["kind"] == "node":
                    dims.append(rec)
                elif rec["kind"] == "edge":
                    edges.append(rec)
                else:
                    raise IoFailure(f"unknown record kind {rec.get('kind')!r}")
    except OSError as exc:
        raise IoFailure(f"import from {src} failed: {exc}") from exc
    # Facts first so dimension owners and edge endpoints resolve.
    for rec in facts + dims + edges:
        store._apply_record(rec)
    return store


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return json.dumps(value, ensure_ascii=False)
    if value is None:
        return ""
    return str(value)


def export_csv(store: GraphStore, out_dir: str | Path) -> list[Path]:
    """Write one ``vertex_<label>.csv`` per schema label and one
    ``edge_<kind>.csv`` per edge kind, headers included even when empty.
    """
    out = Path(out_dir)
    files = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for label in sorted(store.schema.nodes):
            keys = sorted(store.schema.attributes(label))
            path = out / f"vertex_{label}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["id"] + keys)
                for node in store.scan(label):
                    writer.writerow([node.id] + [_cell(node.properties.get(k)) for k in keys])
            files.append(path)
        for kind in sorted(store.schema.edge_kinds):
            path = out / f"edge_{kind}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["source", "target"])
                for edge in store.edges(kind):
                    writer.writerow([edge.source, edge.target])
            files.append(path)
    except OSError as exc:
        raise IoFailure(f"csv export to {out} failed: {exc}") from exc
    return files
