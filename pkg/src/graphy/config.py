"""Application configuration: one JSON file wires every component."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from graphy.errors import ConfigError, GraphyError
from graphy.workflow import WorkflowSpec, parse_workflow

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8787
DEFAULT_FACT_LABEL = "Paper"
DEFAULT_CHUNK_SIZE = 1200
DEFAULT_CHUNK_OVERLAP = 200
DEFAULT_SESSION_IDLE_HOURS = 24


@dataclass
class AppConfig:
    data_dir: Path
    workflow_path: Path
    workflow: WorkflowSpec
    providers: dict = field(default_factory=dict)
    repository_manifest: Path | None = None
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    fact_label: str = DEFAULT_FACT_LABEL
    chunk_size: int = DEFAULT_CHUNK_SIZE
    chunk_overlap: int = DEFAULT_CHUNK_OVERLAP
    session_idle_hours: float = DEFAULT_SESSION_IDLE_HOURS

    @property
    def graph_dir(self) -> Path:
        return self.data_dir / "graph"

    @property
    def session_dir(self) -> Path:
        return self.data_dir / "sessions"


def load_config(path: str | Path) -> AppConfig:
    """Read and validate the config file; bad configs fail fast."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    try:
        data_dir = resolve(raw["data_dir"])
        workflow_path = resolve(raw["workflow"])
    except KeyError as exc:
        raise ConfigError(f"config missing required key {exc.args[0]!r}") from exc

    try:
        workflow = parse_workflow(workflow_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"workflow file not found: {workflow_path}") from exc
    except GraphyError as exc:
        raise ConfigError(f"workflow {workflow_path} invalid: {exc}") from exc

    repository = raw.get("repository") or {}
    manifest = repository.get("manifest")

    server = raw.get("server") or {}
    chunking = raw.get("chunking") or {}

    config = AppConfig(
        data_dir=data_dir,
        workflow_path=workflow_path,
        workflow=workflow,
        providers=dict(raw.get("providers", {})),
        repository_manifest=resolve(manifest) if manifest else None,
        host=server.get("host", DEFAULT_HOST),
        port=int(server.get("port", DEFAULT_PORT)),
        fact_label=raw.get("fact_label", DEFAULT_FACT_LABEL),
        chunk_size=int(chunking.get("size", DEFAULT_CHUNK_SIZE)),
        chunk_overlap=int(chunking.get("overlap", DEFAULT_CHUNK_OVERLAP)),
        session_idle_hours=float(raw.get("session_idle_hours", DEFAULT_SESSION_IDLE_HOURS)),
    )
    try:
        config.data_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"data_dir {config.data_dir} not writable: {exc}") from exc
    return config
