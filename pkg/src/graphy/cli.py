"""Command-line entrypoints: scrape, export, serve, and report."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from graphy.config import AppConfig, load_config
from graphy.errors import ConfigError, GraphyError, InvalidParams
from graphy.exploration import compute_histogram
from graphy.generation import (
    build_mindmap,
    collect_payload,
    interpret_intent,
    render_report,
    write_report,
)
from graphy.graph import INTEGER, REAL, GraphStore, canonical_id
from graphy.graph.io import export_csv, export_jsonl
from graphy.ingest import RawDocument
from graphy.navigation import (
    ExpansionBudget,
    ExpansionReport,
    FixtureRepository,
    expand,
)

_KIND_BY_SUFFIX = {".json": "structured-json", ".txt": "plaintext", ".pdf": "pdf"}
from graphy.providers import registry_from_config
from graphy.scrapper import Scrapper, schema_from_workflow

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _open_store(config: AppConfig) -> GraphStore:
    return GraphStore.open(config.graph_dir)


def _store_for_scrape(config: AppConfig) -> GraphStore:
    """Open the graph, creating it from the workflow schema on first use."""
    from graphy.graph.store import SCHEMA_FILE

    derived = schema_from_workflow(config.workflow, config.fact_label)
    if (config.graph_dir / SCHEMA_FILE).exists():
        store = GraphStore.open(config.graph_dir)
        store.merge_schema(derived)
        return store
    return GraphStore(derived, config.graph_dir)


def _build_scrapper(config: AppConfig, store: GraphStore) -> Scrapper:
    registry = registry_from_config(config.providers)
    return Scrapper(
        store,
        config.workflow,
        registry,
        fact_label=config.fact_label,
        chunk_size=config.chunk_size,
        chunk_overlap=config.chunk_overlap,
    )


def _document_from_path(path: Path) -> RawDocument:
    kind = _KIND_BY_SUFFIX.get(path.suffix, "plaintext")
    return RawDocument(path.stem, kind, path.read_bytes(), str(path))


def _documents_from_titles(repository: FixtureRepository, titles: list[str]) -> list[RawDocument]:
    by_title = {title: doc_id for doc_id, title in repository.titles()}
    docs = []
    for title in titles:
        if title not in by_title:
            raise InvalidParams(f"repository has no document titled {title!r}")
        docs.append(repository.fetch(by_title[title]))
    return docs


def cmd_scrape(args) -> int:
    config = load_config(args.config)
    store = _store_for_scrape(config)
    scrapper = _build_scrapper(config, store)

    repository = None
    if config.repository_manifest is not None:
        repository = FixtureRepository(config.repository_manifest)

    docs = [_document_from_path(Path(p)) for p in args.seeds]
    if args.titles:
        if repository is None:
            raise ConfigError("seed titles need a repository manifest in the config")
        docs.extend(_documents_from_titles(repository, args.titles))

    results = scrapper.scrape(docs)
    seed_ids = [r.fact_id for r in results]

    report = ExpansionReport()
    if repository is not None and seed_ids and args.depth > 0:
        budget = ExpansionBudget(args.depth, args.max_new, args.ref_cap)
        report = expand(scrapper, repository, seed_ids, budget)

    store.close()
    counts = store.counts()
    print(f"facts: {counts['facts']}")
    print(f"dimensions: {counts['dimensions']}")
    print(f"edges: {counts['edges']}")
    print(f"refs dropped: {report.refs_dropped}")
    return EXIT_OK


def cmd_export(args) -> int:
    config = load_config(args.config)
    store = _open_store(config)
    exporter = export_jsonl if args.format == "jsonl" else export_csv
    for path in exporter(store, args.out):
        print(path)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from graphy.server import app_from_config

    config = load_config(args.config)
    app = app_from_config(config)
    uvicorn.run(
        app,
        host=args.host or config.host,
        port=args.port if args.port is not None else config.port,
        log_level="warning",
    )
    return EXIT_OK


def _selection(store: GraphStore, titles: list[str]) -> list[str]:
    if not titles:
        return [fact.id for fact in store.facts()]
    return [canonical_id(title) for title in titles]


def _dimension_cell(items: list[dict]) -> str:
    parts = []
    for item in items:
        props = item["properties"]
        first = next((props[k] for k in sorted(props) if isinstance(props[k], str)), "")
        parts.append(first)
    return "; ".join(parts)


def _write_payload_csv(payload, intent, path: Path) -> Path:
    header = ["fact_id", *intent.required_attributes, *intent.required_dimensions]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in payload.rows:
            cells = [row.fact_id]
            for attr in intent.required_attributes:
                value = row.attributes.get(attr)
                cells.append("" if value is None else value)
            for label in intent.required_dimensions:
                cells.append(_dimension_cell(row.dimensions.get(label, [])))
            writer.writerow(cells)
    return path


def cmd_report(args) -> int:
    from graphy import figures

    config = load_config(args.config)
    store = _open_store(config)
    selected = _selection(store, args.select)

    from graphy.server import provider_from_config

    provider = provider_from_config(config)
    intent = interpret_intent(args.instruction, store.schema, provider, config.fact_label)
    payload = collect_payload(store, selected, intent)
    mindmap = build_mindmap(payload, intent, provider)
    draft = write_report(mindmap, intent, payload, provider)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt, name in (("markdown", "report.md"), ("latex", "report.tex")):
        target = out / name
        target.write_text(render_report(draft, fmt), encoding="utf-8")
        written.append(target)
    written.append(_write_payload_csv(payload, intent, out / "payload.csv"))

    written.append(figures.save_category_sizes(mindmap, out / "categories.png"))
    numeric = {INTEGER, REAL}
    attrs = store.schema.attributes(config.fact_label)
    for attr in intent.required_attributes:
        spec = attrs.get(attr)
        if spec is not None and spec.value_type in numeric:
            result = compute_histogram(store, config.fact_label, selected, attr)
            written.append(figures.save_histogram(result, out / f"hist_{attr}.png"))

    for path in written:
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="graphy",
        description="Build, explore, and report over document property graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scrape = sub.add_parser("scrape", help="run the extraction workflow over documents")
    scrape.add_argument("--config", required=True)
    scrape.add_argument("--seeds", nargs="*", default=[], help="document files to ingest")
    scrape.add_argument(
        "--titles", nargs="*", default=[], help="repository titles to ingest"
    )
    scrape.add_argument("--depth", type=int, default=1)
    scrape.add_argument("--max-new", type=int, default=50)
    scrape.add_argument("--ref-cap", type=int, default=10)
    scrape.set_defaults(handler=cmd_scrape)

    export = sub.add_parser("export", help="write the graph to files")
    export.add_argument("--config", required=True)
    export.add_argument("--format", required=True, choices=("jsonl", "csv"))
    export.add_argument("--out", required=True)
    export.set_defaults(handler=cmd_export)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--config", required=True)
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.set_defaults(handler=cmd_serve)

    report = sub.add_parser("report", help="write a report with figures and payload")
    report.add_argument("--config", required=True)
    report.add_argument("--instruction", required=True)
    report.add_argument(
        "--select", nargs="*", default=[], help="paper titles; default is every fact"
    )
    report.add_argument("--out", default="report_out")
    report.set_defaults(handler=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
