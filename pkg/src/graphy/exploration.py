"""Interactive exploration: query execution, histograms, and sessions.

A session works three canvases of fact ids.  Present holds the papers
under study, Past what was set aside, and Future the candidates the
refiner proposes; the three never overlap.  Search results wait in a
staging list until promoted.  Every operation is appended to a history
that can be replayed to reproduce the canvases exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from graphy.errors import (
    EmptySelection,
    InvalidIR,
    InvalidParams,
    NotInFuture,
    StageError,
    StaleBucket,
    UnknownAttribute,
)
from graphy.graph import (
    NAVIGATES_TO,
    REAL,
    GraphStore,
    canonical_json,
    node_hash,
    normalize_title,
)
from graphy.graph.predicates import AttrEq, AttrInRange, AttrMissing, HasAttr
from graphy.cypher import render_cypher
from graphy.queryir import (
    HISTOGRAM,
    NEIGHBORS,
    OP_CONTAINS,
    OP_EQ,
    OP_HAS,
    OP_MISSING,
    OP_RANGE,
    SELECT,
    Filter,
    QueryIR,
    filter_from_json,
    filter_to_json,
)

MISSING_KEY = "∅"
REAL_BIN_COUNT = 10
DEFAULT_SEARCH_LIMIT = 20


# ----------------------------------------------------------------------
# query execution

def _squeeze(text) -> str:
    return normalize_title(str(text)).replace(" ", "")


@dataclass(frozen=True)
class _LooseContains:
    """Substring match that ignores case, punctuation, and spacing.

    Queries like "Llama3" must find "The Llama 3 Herd of Models", so
    both sides are normalized and squeezed before comparing.
    """

    attribute: str
    needle: str

    def matches(self, properties: dict) -> bool:
        value = properties.get(self.attribute)
        if value is None:
            return False
        return self.needle in _squeeze(value)


def _predicate_for(f: Filter):
    if f.op == OP_HAS:
        return HasAttr(f.attribute)
    if f.op == OP_MISSING:
        return AttrMissing(f.attribute)
    if f.op == OP_EQ:
        return AttrEq(f.attribute, f.value)
    if f.op == OP_CONTAINS:
        return _LooseContains(f.attribute, _squeeze(f.value))
    if f.op == OP_RANGE:
        return AttrInRange(f.attribute, f.lo, f.hi, f.closed)
    raise InvalidIR(f"no predicate for filter op {f.op!r}")


def _matches_all(filters: tuple[Filter, ...], properties: dict) -> bool:
    return all(_predicate_for(f).matches(properties) for f in filters)


def execute(store: GraphStore, ir: QueryIR):
    """Run a query against the store.

    select -> list of fact nodes, histogram -> HistogramResult,
    neighbors -> sorted list of fact ids.
    """
    if ir.kind == SELECT:
        nodes = [
            n for n in store.scan(ir.label) if _matches_all(ir.filters, n.properties)
        ]
        if ir.anchors:
            allowed = set(ir.anchors)
            nodes = [n for n in nodes if n.id in allowed]
        if ir.order_by is not None:
            attr = ir.order_by
            ranked = [n for n in nodes if n.properties.get(attr) is not None]
            rest = [n for n in nodes if n.properties.get(attr) is None]
            ranked.sort(key=lambda n: n.id)
            ranked.sort(key=lambda n: n.properties[attr], reverse=ir.descending)
            nodes = ranked + rest
        return nodes[: ir.limit] if ir.limit is not None else nodes
    if ir.kind == NEIGHBORS:
        out: set[str] = set()
        for anchor in ir.anchors:
            out.update(store.neighbors(anchor, NAVIGATES_TO, "out"))
        return sorted(out)
    if ir.kind == HISTOGRAM:
        ids = (
            sorted(ir.anchors)
            if ir.anchors
            else [
                n.id for n in store.scan(ir.label) if _matches_all(ir.filters, n.properties)
            ]
        )
        result, _ = histogram_with_members(store, ir.label, ids, ir.attribute)
        return result
    raise InvalidIR(f"cannot execute query kind {ir.kind!r}")


# ----------------------------------------------------------------------
# histograms

MAX_SAMPLE_IDS = 10


@dataclass(frozen=True)
class Bucket:
    key: str
    count: int
    kind: str  # "exact" | "range" | "missing"
    sample_ids: tuple[str, ...] = ()
    value: object | None = None
    lo: float | None = None
    hi: float | None = None
    closed: bool = False

    def to_json(self) -> dict:
        out = {
            "key": self.key,
            "count": self.count,
            "kind": self.kind,
            "sample_ids": list(self.sample_ids),
        }
        if self.kind == "exact":
            out["value"] = self.value
        elif self.kind == "range":
            out.update({"lo": self.lo, "hi": self.hi, "closed": self.closed})
        return out


@dataclass(frozen=True)
class HistogramResult:
    attribute: str
    buckets: tuple[Bucket, ...]
    token: str
    population_size: int

    def to_json(self) -> dict:
        return {
            "attribute": self.attribute,
            "buckets": [b.to_json() for b in self.buckets],
            "token": self.token,
            "population_size": self.population_size,
        }


def _display(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


def _fingerprint(label: str, attribute: str, pairs: list[tuple[str, object]]) -> str:
    return node_hash("hist", label, attribute, canonical_json(pairs))


def histogram_with_members(
    store: GraphStore, label: str, ids: list[str], attribute: str
) -> tuple[HistogramResult, dict[str, list[str]]]:
    """Bucket ``attribute`` over the given population.

    Exact buckets for discrete types, ten equal-width bins for reals,
    and a trailing missing-value bucket keyed by the empty-set sign.
    """
    attrs = store.schema.attributes(label)
    if attribute not in attrs:
        raise UnknownAttribute(f"no attribute {label}.{attribute}")
    value_type = attrs[attribute].value_type

    ordered = sorted(set(ids))
    pairs = []
    missing: list[str] = []
    present: list[tuple[str, object]] = []
    for node_id in ordered:
        value = store.get_node(node_id).properties.get(attribute)
        pairs.append((node_id, value))
        if value is None:
            missing.append(node_id)
        else:
            present.append((node_id, value))
    token = _fingerprint(label, attribute, pairs)

    buckets: list[Bucket] = []
    members: dict[str, list[str]] = {}

    if value_type == REAL and present:
        values = [v for _, v in present]
        lo, hi = min(values), max(values)
        width = (hi - lo) / REAL_BIN_COUNT
        if width == 0.0:
            key = f"[{_display(lo)}, {_display(hi)}]"
            ids_in = [i for i, _ in present]
            buckets.append(
                Bucket(key, len(ids_in), "range", _samples(ids_in), lo=lo, hi=hi, closed=True)
            )
            members[key] = ids_in
        else:
            edges = [lo + i * width for i in range(REAL_BIN_COUNT + 1)]
            edges[-1] = hi
            assigned: list[list[str]] = [[] for _ in range(REAL_BIN_COUNT)]
            for node_id, value in present:
                idx = min(int((value - lo) / width), REAL_BIN_COUNT - 1)
                assigned[idx].append(node_id)
            for i in range(REAL_BIN_COUNT):
                if not assigned[i]:
                    continue  # every reported bucket holds at least one node
                closed = i == REAL_BIN_COUNT - 1
                close_char = "]" if closed else ")"
                key = f"[{_display(edges[i])}, {_display(edges[i + 1])}{close_char}"
                buckets.append(
                    Bucket(
                        key,
                        len(assigned[i]),
                        "range",
                        _samples(assigned[i]),
                        lo=edges[i],
                        hi=edges[i + 1],
                        closed=closed,
                    )
                )
                members[key] = assigned[i]
    elif present:
        grouped: dict[object, list[str]] = {}
        for node_id, value in present:
            grouped.setdefault(_freeze(value), []).append(node_id)
        for value in sorted(grouped, key=_sort_key):
            key = _display(value)
            ids_in = grouped[value]
            buckets.append(
                Bucket(key, len(ids_in), "exact", _samples(ids_in), value=_thaw(value))
            )
            members[key] = ids_in

    if missing:
        buckets.append(Bucket(MISSING_KEY, len(missing), "missing", _samples(missing)))
        members[MISSING_KEY] = missing

    result = HistogramResult(attribute, tuple(buckets), token, len(ordered))
    return result, members


def _samples(ids: list[str]) -> tuple[str, ...]:
    return tuple(sorted(ids)[:MAX_SAMPLE_IDS])


def _freeze(value):
    return tuple(value) if isinstance(value, list) else value


def _thaw(value):
    return list(value) if isinstance(value, tuple) else value


def _sort_key(value):
    # bool sorts before int of equal value; fine, keys never mix types
    return (str(type(value).__name__), value) if isinstance(value, tuple) else ("", value)


def compute_histogram(
    store: GraphStore, label: str, ids: list[str], attribute: str
) -> HistogramResult:
    result, _ = histogram_with_members(store, label, ids, attribute)
    return result


# ----------------------------------------------------------------------
# sessions

@dataclass
class HistoryEntry:
    action: str
    params: dict
    timestamp: float
    cypher: str | None = None

    def to_json(self) -> dict:
        return {
            "action": self.action,
            "params": self.params,
            "timestamp": self.timestamp,
            "cypher": self.cypher,
        }


@dataclass(frozen=True)
class PrequeryResult:
    ids: list[str]
    ir: QueryIR
    cypher: str


class Session:
    """One exploration thread over a store."""

    def __init__(
        self,
        store: GraphStore,
        label: str = "Paper",
        session_id: str = "",
        clock=None,
    ):
        self.store = store
        self.label = label
        self.session_id = session_id
        self._clock = clock or time.time
        self.past: list[str] = []
        self.present: list[str] = []
        self.future: list[str] = []
        self.staging: list[str] = []
        self._population: list[str] | None = None
        self._population_anchors: tuple[str, ...] = ()
        self.history: list[HistoryEntry] = []

    # -- plumbing ------------------------------------------------------

    def _record(self, action: str, params: dict, cypher: str | None = None) -> None:
        self.history.append(HistoryEntry(action, params, self._clock(), cypher))

    def _check_invariants(self) -> None:
        canvases = [set(self.past), set(self.present), set(self.future)]
        total = sum(len(c) for c in canvases)
        if len(set().union(*canvases)) != total:
            raise StageError("canvases overlap")

    @property
    def population(self) -> list[str]:
        """Current refiner pool: last prequery result, else every fact."""
        if self._population is not None:
            return list(self._population)
        return [n.id for n in self.store.scan(self.label)]

    # -- operations ----------------------------------------------------

    def search(
        self,
        query: str | None = None,
        filters: list[Filter] | None = None,
        limit: int = DEFAULT_SEARCH_LIMIT,
    ):
        """Stage matching facts without touching the canvases.

        A plain text query matches against titles; structured filters
        cover the attribute predicates.  Results come back in id order.
        """
        if limit < 1:
            raise InvalidParams(f"limit must be positive, got {limit}")
        effective = list(filters or [])
        if query is not None:
            if not _squeeze(query):
                raise InvalidParams("search query has no searchable characters")
            effective.append(Filter(OP_CONTAINS, "title", value=query))
        if not effective:
            raise InvalidParams("search needs a query or at least one filter")
        attrs = self.store.schema.attributes(self.label)
        for f in effective:
            if f.attribute not in attrs:
                raise UnknownAttribute(f"no attribute {self.label}.{f.attribute}")
        ir = QueryIR(SELECT, self.label, filters=tuple(effective), limit=limit)
        hits = execute(self.store, ir)
        self.staging = [n.id for n in hits]
        self._record(
            "search",
            {
                "query": query,
                "filters": [filter_to_json(f) for f in (filters or [])],
                "limit": limit,
            },
            render_cypher(ir),
        )
        return hits

    def promote(self, chosen: list[str]) -> None:
        picked = sorted(set(chosen))
        if not picked:
            raise EmptySelection("nothing chosen to promote")
        allowed = set(self.staging) | set(self.future)
        stray = [i for i in picked if i not in allowed]
        if stray:
            raise NotInFuture(f"{stray[0]!r} is neither staged nor in the future canvas")
        dropped = (set(self.past) | set(self.present)) - set(picked)
        self.past = sorted(dropped)
        self.present = picked
        self.future = []
        self.staging = []
        self._population = None
        self._population_anchors = ()
        self._record("promote", {"chosen": picked})
        self._check_invariants()

    def prequery(self, selected: list[str] | None = None) -> PrequeryResult:
        """Pin the neighbor set of the selection as the refiner pool.

        Neighbors already sitting on a canvas are left out; the pool is
        counted and refined without promoting anything.
        """
        anchors = sorted(set(selected)) if selected is not None else sorted(self.present)
        if not anchors:
            raise EmptySelection("nothing selected to pre-query")
        stray = [a for a in anchors if a not in self.present]
        if stray:
            raise InvalidParams(f"{stray[0]!r} is not on the present canvas")
        ir = QueryIR(NEIGHBORS, self.label, anchors=tuple(anchors))
        neighbor_ids = execute(self.store, ir)
        placed = set(self.past) | set(self.present)
        self._population = sorted(set(neighbor_ids) - placed)
        self._population_anchors = tuple(anchors)
        cypher = render_cypher(ir)
        self._record("prequery", {"selected": anchors}, cypher)
        return PrequeryResult(list(self._population), ir, cypher)

    def histogram(self, attribute: str) -> tuple[HistogramResult, QueryIR]:
        # scoped histograms pin the population in the IR; unscoped ones
        # range over the whole label and the rendered query says nothing
        scoped = tuple(sorted(self._population)) if self._population is not None else ()
        ir = QueryIR(HISTOGRAM, self.label, attribute=attribute, anchors=scoped)
        result = compute_histogram(self.store, self.label, self.population, attribute)
        self._record("histogram", {"attribute": attribute}, render_cypher(ir))
        return result, ir

    def filter_by_bucket(self, attribute: str, key, token: str) -> list[str]:
        """Fill the future canvas with the members of chosen buckets."""
        keys = [key] if isinstance(key, str) else list(key)
        if not keys:
            raise InvalidParams("no bucket keys given")
        result, members = histogram_with_members(
            self.store, self.label, self.population, attribute
        )
        if result.token != token:
            raise StaleBucket(f"bucket set for {attribute!r} is out of date")
        for k in keys:
            if k not in members:
                raise InvalidParams(f"no bucket {k!r} for {attribute!r}")
        union: set[str] = set()
        for k in keys:
            union.update(members[k])
        # papers already placed on a canvas are not proposed again
        chosen = sorted(union - set(self.present) - set(self.past))
        self.future = chosen
        cypher = self._bucket_cypher(attribute, keys, result, chosen)
        self._record(
            "filter_by_bucket",
            {"attribute": attribute, "key": key, "token": token},
            cypher,
        )
        self._check_invariants()
        return chosen

    def _bucket_cypher(self, attribute, keys, result, chosen) -> str | None:
        """Render the selection a bucket choice stands for."""
        anchors = tuple(sorted(self._population)) if self._population is not None else ()
        if len(keys) == 1:
            bucket = next(b for b in result.buckets if b.key == keys[0])
            if bucket.kind == "missing":
                flt = Filter(OP_MISSING, attribute)
            elif bucket.kind == "range":
                flt = Filter(
                    OP_RANGE, attribute, lo=bucket.lo, hi=bucket.hi, closed=bucket.closed
                )
            else:
                flt = Filter(OP_EQ, attribute, value=bucket.value)
            ir = QueryIR(SELECT, self.label, filters=(flt,), anchors=anchors)
        else:
            # a multi-bucket union has no single predicate; pin the ids instead
            ir = QueryIR(SELECT, self.label, anchors=tuple(chosen))
        return render_cypher(ir)

    def refine(self, attribute: str, k: int, direction: str = "desc") -> list[str]:
        """Fill the future canvas with the population's top-k by ``attribute``."""
        if k < 1:
            raise InvalidParams(f"k must be positive, got {k}")
        if direction not in ("asc", "desc"):
            raise InvalidParams(f"direction must be asc or desc, got {direction!r}")
        attrs = self.store.schema.attributes(self.label)
        if attribute not in attrs:
            raise UnknownAttribute(f"no attribute {self.label}.{attribute}")
        placed = set(self.present) | set(self.past)
        pool = []
        for node_id in self.population:
            if node_id in placed:
                continue
            value = self.store.get_node(node_id).properties.get(attribute)
            if value is not None:
                pool.append((value, node_id))
        # two stable passes keep ties in id order whichever way values go
        pool.sort(key=lambda t: t[1])
        pool.sort(key=lambda t: t[0], reverse=direction == "desc")
        ranked = [node_id for _, node_id in pool[:k]]
        self.future = sorted(ranked)
        ir = QueryIR(
            SELECT,
            self.label,
            filters=(Filter(OP_HAS, attribute),),
            anchors=tuple(sorted(self._population)) if self._population is not None else (),
            limit=k,
            order_by=attribute,
            descending=direction == "desc",
        )
        self._record(
            "refine",
            {"attribute": attribute, "k": k, "direction": direction},
            render_cypher(ir),
        )
        self._check_invariants()
        return ranked

    # -- persistence and replay ---------------------------------------

    def to_json(self) -> dict:
        return {
            "session_id": self.session_id,
            "label": self.label,
            "past": self.past,
            "present": self.present,
            "future": self.future,
            "staging": self.staging,
            "population": self._population,
            "population_anchors": list(self._population_anchors),
            "history": [h.to_json() for h in self.history],
        }

    @classmethod
    def from_json(cls, store: GraphStore, data: dict, clock=None) -> "Session":
        session = cls(store, data["label"], data.get("session_id", ""), clock)
        session.past = list(data.get("past", []))
        session.present = list(data.get("present", []))
        session.future = list(data.get("future", []))
        session.staging = list(data.get("staging", []))
        session._population = data.get("population")
        session._population_anchors = tuple(data.get("population_anchors", []))
        session.history = [
            HistoryEntry(h["action"], h["params"], h["timestamp"], h.get("cypher"))
            for h in data.get("history", [])
        ]
        session._check_invariants()
        return session


def replay(store: GraphStore, history: list[dict], label: str = "Paper") -> Session:
    """Re-run a recorded action sequence against ``store``.

    The replayed session records the original timestamps, so replaying
    a history and serializing it again is the identity.
    """
    session = Session(store, label)
    for entry in history:
        action, params = entry["action"], entry["params"]
        if action == "search":
            session.search(
                params.get("query"),
                [filter_from_json(f) for f in params.get("filters", [])],
                params.get("limit", DEFAULT_SEARCH_LIMIT),
            )
        elif action == "promote":
            session.promote(params["chosen"])
        elif action == "prequery":
            session.prequery(params.get("selected"))
        elif action == "histogram":
            session.histogram(params["attribute"])
        elif action == "filter_by_bucket":
            session.filter_by_bucket(params["attribute"], params["key"], params["token"])
        elif action == "refine":
            session.refine(params["attribute"], params["k"], params.get("direction", "desc"))
        else:
            raise InvalidParams(f"unknown history action {action!r}")
        session.history[-1].timestamp = entry["timestamp"]
    return session
