"""Reference resolution and breadth-first graph expansion.

A fact's reference list names other works.  Each name is looked up in a
document repository: exact matches on the normalized title win, close
titles (small edit distance) are accepted as the same work, everything
else is a NoMatch value that expansion silently drops.  Matched
documents are scraped into the graph and linked with NAVIGATES_TO edges,
within an explicit budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from graphy.errors import MalformedConfig, UnknownFact
from graphy.graph import canonical_id, normalize_title
from graphy.ingest import RawDocument
from graphy.scrapper import Scrapper

FUZZY_THRESHOLD = 0.92
REFERENCE_LABEL = "References"
REFERENCE_TITLE_KEY = "ref_title"

_KIND_BY_SUFFIX = {".json": "structured-json", ".txt": "plaintext", ".pdf": "pdf"}


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        current = [i]
        for j, cb in enumerate(b, 1):
            current.append(
                min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb))
            )
        previous = current
    return previous[-1]


def title_similarity(a: str, b: str) -> float:
    """1.0 for identical normalized titles, scaled down per edit."""
    na, nb = normalize_title(a), normalize_title(b)
    if not na and not nb:
        return 1.0
    longest = max(len(na), len(nb))
    return 1.0 - levenshtein(na, nb) / longest


@dataclass(frozen=True)
class RepositoryHit:
    repo_doc_id: str
    title: str
    exact: bool
    similarity: float


@dataclass(frozen=True)
class NoMatch:
    """Reference title that resolves to nothing; carried as a value."""

    title: str


class FixtureRepository:
    """Documents on disk, listed by a JSON manifest.

    Manifest entries: ``{"repo_doc_id": ..., "title": ..., "file": ...}``
    with files relative to the manifest's directory.
    """

    def __init__(self, manifest_path: str | Path):
        self._root = Path(manifest_path).parent
        data = json.loads(Path(manifest_path).read_text("utf-8"))
        entries = data["documents"] if isinstance(data, dict) else data
        self._entries: dict[str, dict] = {}
        for entry in entries:
            if not {"repo_doc_id", "title", "file"} <= set(entry):
                raise MalformedConfig("manifest entries need repo_doc_id, title, file")
            self._entries[entry["repo_doc_id"]] = entry

    def titles(self) -> list[tuple[str, str]]:
        return sorted((doc_id, e["title"]) for doc_id, e in self._entries.items())

    def fetch(self, repo_doc_id: str) -> RawDocument:
        entry = self._entries[repo_doc_id]
        path = self._root / entry["file"]
        kind = entry.get("kind") or _KIND_BY_SUFFIX.get(path.suffix, "plaintext")
        return RawDocument(repo_doc_id, kind, path.read_bytes())


def resolve_reference(title: str, repository) -> RepositoryHit | NoMatch:
    """Match a reference title against the repository.

    Exact normalized-title matches win outright; otherwise the closest
    title at or above the similarity threshold.  Ties go to the smaller
    repo_doc_id so resolution never depends on iteration order.
    """
    norm = normalize_title(title)
    if not norm:
        return NoMatch(title)

    exact: RepositoryHit | None = None
    fuzzy: RepositoryHit | None = None
    for repo_doc_id, repo_title in repository.titles():
        if normalize_title(repo_title) == norm:
            if exact is None or repo_doc_id < exact.repo_doc_id:
                exact = RepositoryHit(repo_doc_id, repo_title, True, 1.0)
            continue
        similarity = title_similarity(title, repo_title)
        if similarity < FUZZY_THRESHOLD:
            continue
        if (
            fuzzy is None
            or similarity > fuzzy.similarity
            or (similarity == fuzzy.similarity and repo_doc_id < fuzzy.repo_doc_id)
        ):
            fuzzy = RepositoryHit(repo_doc_id, repo_title, False, similarity)
    return exact or fuzzy or NoMatch(title)


@dataclass(frozen=True)
class ExpansionBudget:
    max_depth: int = 1
    max_new_facts: int = 50
    per_fact_reference_cap: int = 10


@dataclass
class ExpansionReport:
    new_fact_ids: list[str] = field(default_factory=list)
    new_edge_count: int = 0
    refs_considered: int = 0
    refs_exact: int = 0
    refs_fuzzy: int = 0
    refs_dropped: int = 0
    budget_stopped: int = 0
    existing_hits: int = 0
    depth_reached: int = 0


def expand(
    scrapper: Scrapper,
    repository,
    seed_fact_ids: list[str],
    budget: ExpansionBudget,
    *,
    reference_label: str = REFERENCE_LABEL,
    title_key: str = REFERENCE_TITLE_KEY,
) -> ExpansionReport:
    """Follow references outward from the seeds, breadth first.

    Each processed fact contributes at most ``per_fact_reference_cap``
    references, taken in document order.  Documents already present in
    the graph are linked but never re-inspected.
    """
    store = scrapper.store
    for fact_id in seed_fact_ids:
        if not store.has_node(fact_id):
            raise UnknownFact(f"seed {fact_id!r} is not in the graph")

    report = ExpansionReport()
    known = {f.id for f in store.facts()}
    frontier = list(seed_fact_ids)

    for depth in range(1, budget.max_depth + 1):
        if not frontier:
            break
        next_frontier: list[str] = []
        for fact_id in frontier:
            dims = store.dimensions_of(fact_id, reference_label)
            for dim in dims[: budget.per_fact_reference_cap]:
                title = dim.properties.get(title_key)
                if not title:
                    continue
                report.refs_considered += 1
                hit = resolve_reference(title, repository)
                if isinstance(hit, NoMatch):
                    report.refs_dropped += 1
                    continue
                if hit.exact:
                    report.refs_exact += 1
                else:
                    report.refs_fuzzy += 1

                target_id = canonical_id(hit.title)
                if target_id not in known:
                    if len(report.new_fact_ids) >= budget.max_new_facts:
                        report.budget_stopped += 1
                        continue
                    result = scrapper.inspect_document(repository.fetch(hit.repo_doc_id))
                    target_id = result.fact_id
                    if target_id not in known:
                        known.add(target_id)
                        report.new_fact_ids.append(target_id)
                        next_frontier.append(target_id)
                else:
                    report.existing_hits += 1
                if not store.has_edge(fact_id, target_id):
                    store.link_facts(fact_id, target_id)
                    report.new_edge_count += 1
        report.depth_reached = depth
        frontier = next_frontier
    return report
