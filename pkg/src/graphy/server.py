"""HTTP service exposing the graph and exploration sessions.

All state lives in the graph store and in per-session JSON files, so a
restart reproduces every canvas bit for bit.  Request handlers run under
a per-session lock; the graph itself is read-only here.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
import uuid
from contextlib import contextmanager
from pathlib import Path

from fastapi import APIRouter, FastAPI, Request, Response
from fastapi.responses import JSONResponse

from graphy.config import AppConfig
from graphy.errors import (
    GraphyError,
    InvalidParams,
    StageError,
    UnknownAttribute,
    UnknownSession,
    UnsupportedFormat,
)
from graphy.exploration import Session
from graphy.generation import (
    MindMap,
    ReportDraft,
    ReportIntent,
    build_mindmap,
    collect_payload,
    interpret_intent,
    render_report,
    write_report,
)
from graphy.graph import NAVIGATES_TO, FactNode, GraphStore
from graphy.providers import CompletionRequest, CompletionResult, registry_from_config
from graphy.queryir import filter_from_json

_STATUS_BY_CODE = {
    "unknown_session": 404,
    "unknown_node": 404,
    "unknown_fact": 404,
    "stale_bucket": 409,
    "stage_error": 409,
    "provider_failure": 502,
    "parse_failure": 502,
    "io_failure": 500,
    "bind_failure": 500,
    "internal": 500,
}

_MEDIA_TYPES = {"markdown": "text/markdown", "latex": "application/x-tex"}
_EXTENSIONS = {"markdown": "md", "latex": "tex"}

# report pipeline stages, in order; each confirm gates the next step
_STAGES = ("intent", "intent_confirmed", "mindmap", "mindmap_confirmed", "draft")


@dataclasses.dataclass(frozen=True)
class BoundProvider:
    """Routes generation-time completions through a registry.

    Generation code leaves ``model_id`` empty; the configured default
    fills it in so prefix routing has something to match.
    """

    registry: object
    model_id: str = ""

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if not request.model_id and self.model_id:
            request = dataclasses.replace(request, model_id=self.model_id)
        return self.registry.complete(request)


class SessionManager:
    """Loads, locks, and persists sessions as one JSON file each."""

    def __init__(
        self,
        store: GraphStore,
        session_dir,
        fact_label: str = "Paper",
        idle_hours: float = 24.0,
        clock=None,
    ):
        self.store = store
        self.dir = Path(session_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.fact_label = fact_label
        self.idle_hours = idle_hours
        self.clock = clock or time.time
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.dir / f"{session_id}.json"

    def _lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self) -> str:
        session_id = uuid.uuid4().hex
        session = Session(self.store, self.fact_label, session_id, self.clock)
        self._save(session, {"stage": None})
        return session_id

    def _save(self, session: Session, job: dict) -> None:
        payload = {
            "session": session.to_json(),
            "job": job,
            "last_used": self.clock(),
        }
        path = self._path(session.session_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=0))
        tmp.replace(path)

    def _load(self, session_id: str) -> tuple[Session, dict, float]:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(f"no session {session_id!r}")
        payload = json.loads(path.read_text())
        session = Session.from_json(self.store, payload["session"], self.clock)
        return session, payload.get("job", {"stage": None}), payload.get("last_used", 0.0)

    def expired(self, last_used: float) -> bool:
        return (self.clock() - last_used) > self.idle_hours * 3600

    @contextmanager
    def acquire(self, session_id: str):
        """Load under the session lock; persist on clean exit."""
        with self._lock(session_id):
            session, job, _ = self._load(session_id)
            yield session, job
            self._save(session, job)

    def peek(self, session_id: str) -> tuple[Session, dict, bool]:
        with self._lock(session_id):
            session, job, last_used = self._load(session_id)
            return session, job, self.expired(last_used)


def _card(store: GraphStore, node_id: str) -> dict:
    node = store.get_node(node_id)
    title = node.properties.get("title")
    if not isinstance(title, str):
        title = next(
            (v for v in node.properties.values() if isinstance(v, str)), node.label
        )
    return {
        "id": node.id,
        "label": node.label,
        "title": title,
        "properties": dict(node.properties),
    }


def _cards(store: GraphStore, ids) -> dict[str, dict]:
    return {node_id: _card(store, node_id) for node_id in ids}


def _view(manager: SessionManager, session: Session, job: dict, expired: bool) -> dict:
    state = session.to_json()
    shown: set[str] = set()
    for key in ("past", "present", "future", "staging"):
        shown.update(state[key])
    shown.update(state["population"] or [])
    return {
        "session_id": state["session_id"],
        "label": state["label"],
        "past": state["past"],
        "present": state["present"],
        "future": state["future"],
        "staging": state["staging"],
        "population": state["population"],
        "history": state["history"],
        "report": {"stage": job.get("stage")},
        "expired": expired,
        "nodes": _cards(manager.store, sorted(shown)),
    }


def _require_stage(job: dict, *allowed: str) -> None:
    stage = job.get("stage")
    if stage not in allowed:
        want = " or ".join(allowed)
        raise StageError(f"report pipeline is at {stage!r}, expected {want}")


def _intent_from_job(job: dict) -> ReportIntent:
    return ReportIntent.from_json(job["intent"])


def create_app(
    store: GraphStore,
    session_dir,
    *,
    fact_label: str = "Paper",
    provider=None,
    idle_hours: float = 24.0,
    clock=None,
) -> FastAPI:
    manager = SessionManager(store, session_dir, fact_label, idle_hours, clock)
    app = FastAPI(title="graphy", docs_url=None, redoc_url=None)
    app.state.manager = manager
    app.state.provider = provider
    router = APIRouter(prefix="/api/v1")

    @app.exception_handler(GraphyError)
    async def _graphy_error(request: Request, exc: GraphyError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": exc.message}
        )

    @router.get("/health")
    def health():
        return {"status": "ok"}

    @router.post("/sessions")
    def create_session():
        session_id = manager.create()
        session, job, expired = manager.peek(session_id)
        return _view(manager, session, job, expired)

    @router.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session, job, expired = manager.peek(session_id)
        return _view(manager, session, job, expired)

    @router.post("/sessions/{session_id}/search")
    def search(session_id: str, body: dict):
        label = body.get("label")
        with manager.acquire(session_id) as (session, job):
            if label is not None and label != session.label:
                raise InvalidParams(
                    f"session explores {session.label!r}, not {label!r}"
                )
            filters = None
            predicates = body.get("predicate")
            if predicates is not None:
                if isinstance(predicates, dict):
                    predicates = [predicates]
                filters = [filter_from_json(p) for p in predicates]
            nodes = session.search(
                query=body.get("query"),
                filters=filters,
                limit=body.get("limit", 20),
            )
            return {
                "results": [_card(manager.store, n.id) for n in nodes],
                "staging": list(session.staging),
                "cypher": session.history[-1].cypher,
            }

    @router.post("/sessions/{session_id}/histogram")
    def histogram(session_id: str, body: dict):
        attribute = body.get("attribute")
        if not attribute:
            raise InvalidParams("attribute is required")
        with manager.acquire(session_id) as (session, job):
            result, _ = session.histogram(attribute)
            return {
                "histogram": result.to_json(),
                "cypher": session.history[-1].cypher,
            }

    @router.post("/sessions/{session_id}/bucket-filter")
    def bucket_filter(session_id: str, body: dict):
        for key in ("attribute", "bucket", "token"):
            if key not in body:
                raise InvalidParams(f"{key} is required")
        with manager.acquire(session_id) as (session, job):
            chosen = session.filter_by_bucket(
                body["attribute"], body["bucket"], body["token"]
            )
            return {
                "future": chosen,
                "cypher": session.history[-1].cypher,
                "nodes": _cards(manager.store, chosen),
            }

    @router.post("/sessions/{session_id}/prequery")
    def prequery(session_id: str, body: dict):
        with manager.acquire(session_id) as (session, job):
            result = session.prequery(body.get("selected"))
            return {
                "population": result.ids,
                "cypher": result.cypher,
                "nodes": _cards(manager.store, result.ids),
            }

    @router.post("/sessions/{session_id}/refine")
    def refine(session_id: str, body: dict):
        mode = body.get("mode")
        params = body.get("params") or {}
        with manager.acquire(session_id) as (session, job):
            if mode == "top_k":
                ranked = session.refine(
                    params.get("attribute", ""),
                    int(params.get("k", 0)),
                    params.get("direction", "desc"),
                )
            elif mode == "bucket":
                ranked = session.filter_by_bucket(
                    params.get("attribute", ""),
                    params.get("bucket", []),
                    params.get("token", ""),
                )
            else:
                raise InvalidParams(f"unknown refine mode {mode!r}")
            return {
                "future": ranked,
                "cypher": session.history[-1].cypher,
                "nodes": _cards(manager.store, ranked),
            }

    @router.post("/sessions/{session_id}/promote")
    def promote(session_id: str, body: dict):
        with manager.acquire(session_id) as (session, job):
            session.promote(body.get("chosen", []))
            return _view(manager, session, job, False)

    @router.post("/sessions/{session_id}/report/intent")
    def report_intent(session_id: str, body: dict):
        instruction = body.get("instruction", "")
        with manager.acquire(session_id) as (session, job):
            intent = interpret_intent(
                instruction,
                manager.store.schema,
                app.state.provider,
                manager.fact_label,
            )
            # a fresh instruction restarts the pipeline from the top
            job.clear()
            job.update(
                {
                    "stage": "intent",
                    "instruction": instruction,
                    "intent": intent.to_json(),
                }
            )
            return {"stage": "intent", "intent": intent.to_json()}

    @router.post("/sessions/{session_id}/report/intent/confirm")
    def confirm_intent(session_id: str, body: dict):
        with manager.acquire(session_id) as (session, job):
            _require_stage(job, "intent")
            intent = _intent_from_job(job)
            attributes = body.get("attributes")
            dimensions = body.get("dimensions")
            if attributes is not None or dimensions is not None:
                intent = _edited_intent(
                    manager.store, manager.fact_label, intent, attributes, dimensions
                )
                job["intent"] = intent.to_json()
            job["stage"] = "intent_confirmed"
            return {"stage": "intent_confirmed", "intent": intent.to_json()}

    @router.post("/sessions/{session_id}/report/mindmap")
    def report_mindmap(session_id: str, body: dict):
        with manager.acquire(session_id) as (session, job):
            _require_stage(job, "intent_confirmed")
            intent = _intent_from_job(job)
            selected = list(session.present)
            payload = collect_payload(manager.store, selected, intent)
            mindmap = build_mindmap(payload, intent, app.state.provider)
            job["selected"] = selected
            job["mindmap"] = mindmap.to_json()
            job["stage"] = "mindmap"
            return {"stage": "mindmap", "mindmap": mindmap.to_json()}

    @router.post("/sessions/{session_id}/report/mindmap/confirm")
    def confirm_mindmap(session_id: str, body: dict):
        with manager.acquire(session_id) as (session, job):
            _require_stage(job, "mindmap")
            edited = body.get("mindmap")
            if edited is not None:
                job["mindmap"] = MindMap.from_json(edited).to_json()
            job["stage"] = "mindmap_confirmed"
            return {"stage": "mindmap_confirmed", "mindmap": job["mindmap"]}

    @router.post("/sessions/{session_id}/report/draft")
    def report_draft(session_id: str, body: dict | None = None):
        with manager.acquire(session_id) as (session, job):
            _require_stage(job, "mindmap_confirmed")
            intent = _intent_from_job(job)
            payload = collect_payload(manager.store, job["selected"], intent)
            mindmap = MindMap.from_json(job["mindmap"])
            draft = write_report(mindmap, intent, payload, app.state.provider)
            job["draft"] = draft.to_json()
            job["stage"] = "draft"
            return {"stage": "draft", "draft": draft.to_json()}

    @router.get("/sessions/{session_id}/report/download")
    def download(session_id: str, format: str = "markdown"):
        if format not in _MEDIA_TYPES:
            raise UnsupportedFormat(f"no renderer for format {format!r}")
        with manager.acquire(session_id) as (session, job):
            _require_stage(job, "draft")
            draft = ReportDraft.from_json(job["draft"])
            text = render_report(draft, format)
            filename = f"report.{_EXTENSIONS[format]}"
            return Response(
                content=text,
                media_type=_MEDIA_TYPES[format],
                headers={"Content-Disposition": f'attachment; filename="{filename}"'},
            )

    @router.get("/graph/nodes/{node_id}")
    def get_node(node_id: str):
        node = manager.store.get_node(node_id)
        card = _card(manager.store, node_id)
        if isinstance(node, FactNode):
            card["kind"] = "fact"
            grouped: dict[str, list] = {}
            for dim in manager.store.dimensions_of(node_id):
                grouped.setdefault(dim.label, []).append(_card(manager.store, dim.id))
            card["dimensions"] = dict(sorted(grouped.items()))
            card["links"] = manager.store.neighbors(node_id, NAVIGATES_TO, "out")
        else:
            card["kind"] = "dimension"
            card["owner"] = node.owner
            card["ordinal"] = node.ordinal
        return card

    app.include_router(router)
    return app


def _edited_intent(store, fact_label, intent, attributes, dimensions) -> ReportIntent:
    """Apply the user's edits, rejecting names the schema does not know."""
    schema = store.schema
    if attributes is None:
        attributes = list(intent.required_attributes)
    if dimensions is None:
        dimensions = list(intent.required_dimensions)
    known_attrs = schema.attributes(fact_label)
    for name in attributes:
        if name not in known_attrs:
            raise UnknownAttribute(f"no attribute {fact_label}.{name}")
    for label in dimensions:
        if label == fact_label or label not in schema.nodes:
            raise InvalidParams(f"no dimension label {label!r}")
    return ReportIntent(
        instruction=intent.instruction,
        required_attributes=tuple(attributes),
        required_dimensions=tuple(dimensions),
        report_kind=intent.report_kind,
    )


def provider_from_config(config: AppConfig):
    """Build the generation-time provider, or None when unconfigured."""
    if not config.providers.get("routes"):
        return None
    registry = registry_from_config(config.providers)
    return BoundProvider(registry, config.providers.get("generation_model", ""))


def app_from_config(config: AppConfig) -> FastAPI:
    store = GraphStore.open(config.graph_dir)
    return create_app(
        store,
        config.session_dir,
        fact_label=config.fact_label,
        provider=provider_from_config(config),
        idle_hours=config.session_idle_hours,
    )
