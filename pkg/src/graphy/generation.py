"""Report generation: intent, payload, mind map, draft, rendering.

The pipeline runs in four steps.  An instruction is interpreted into
the attributes and dimension labels the report needs; those are pulled
from the graph into a payload table; the payload is grouped into a mind
map one batch at a time; the mind map becomes a sectioned draft that
renders to Markdown or LaTeX.  Every step works without a model: the
offline path groups by exact dimension value and fills template prose,
so the structure stays testable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from graphy.errors import (
    EmptySelection,
    GraphyError,
    InvalidParams,
    NoUsableIntent,
    ProviderFailure,
    UnknownFact,
    UnknownNode,
    UnsupportedFormat,
)
from graphy.graph import FactNode, GraphSchema, GraphStore, canonical_json
from graphy.providers import CompletionRequest, _strip_fences

REPORT_KINDS = ("related-work", "survey", "summary")
_KIND_TITLES = {"related-work": "Related Work", "survey": "Survey", "summary": "Summary"}
MISC_CATEGORY = "Misc"
BATCH_BUDGET_CHARS = 12000
_CITE = re.compile(r"\{cite:([0-9a-f]{32})\}")

ALWAYS_ATTRIBUTES = ("title", "abstract")


# ----------------------------------------------------------------------
# intent

@dataclass(frozen=True)
class ReportIntent:
    instruction: str
    required_attributes: tuple[str, ...]
    required_dimensions: tuple[str, ...]
    report_kind: str

    def to_json(self) -> dict:
        return {
            "instruction": self.instruction,
            "required_attributes": list(self.required_attributes),
            "required_dimensions": list(self.required_dimensions),
            "report_kind": self.report_kind,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ReportIntent":
        return cls(
            data["instruction"],
            tuple(data["required_attributes"]),
            tuple(data["required_dimensions"]),
            data["report_kind"],
        )


def _stem(token: str) -> str:
    token = token.lower()
    return token[:-1] if token.endswith("s") and len(token) > 3 else token


def _detect_kind(instruction: str) -> str:
    lowered = instruction.lower()
    if "related work" in lowered:
        return "related-work"
    if "survey" in lowered:
        return "survey"
    return "summary"


def interpret_intent(
    instruction: str,
    schema: GraphSchema,
    provider=None,
    fact_label: str = "Paper",
) -> ReportIntent:
    """Turn an instruction into the attributes and dimensions to fetch.

    A model proposes the lists when one is routed; otherwise a keyword
    fallback matches dimension label stems against the instruction.
    Either way the result is filtered to the schema vocabulary and goes
    back to the user for confirmation before any payload is built.
    """
    if not instruction or not instruction.strip():
        raise InvalidParams("empty instruction")
    fact_attrs = schema.attributes(fact_label)
    dimension_labels = [l for l in schema.nodes if l != fact_label]

    attributes: list[str] = []
    dimensions: list[str] = []
    if provider is not None:
        proposed = _propose_intent(instruction, provider, list(fact_attrs), dimension_labels)
        if proposed is not None:
            attributes = [a for a in proposed[0] if a in fact_attrs]
            dimensions = [d for d in proposed[1] if d in dimension_labels]
    if not dimensions:
        tokens = {_stem(t) for t in re.findall(r"\w+", instruction)}
        dimensions = [l for l in dimension_labels if _stem(l) in tokens]
    for always in ALWAYS_ATTRIBUTES:
        if always in fact_attrs and always not in attributes:
            attributes.append(always)

    if not dimensions:
        raise NoUsableIntent(f"no known dimension named in {instruction!r}")
    return ReportIntent(instruction, tuple(attributes), tuple(dimensions), _detect_kind(instruction))


def _propose_intent(instruction, provider, attr_names, dim_labels):
    prompt = (
        "Pick which attributes and dimensions a report needs.\n"
        f"Instruction: {instruction}\n"
        f"Known attributes: {', '.join(attr_names)}\n"
        f"Known dimensions: {', '.join(dim_labels)}\n\n"
        'Respond with JSON only, matching exactly:\n{"attributes": ["..."], "dimensions": ["..."]}'
    )
    try:
        result = provider.complete(CompletionRequest("", prompt))
        parsed = json.loads(_strip_fences(result.raw_text))
        return list(parsed.get("attributes", [])), list(parsed.get("dimensions", []))
    except (GraphyError, ValueError, AttributeError, TypeError):
        return None


# ----------------------------------------------------------------------
# payload

@dataclass(frozen=True)
class PayloadRow:
    fact_id: str
    attributes: dict
    dimensions: dict

    def to_json(self) -> dict:
        return {
            "fact_id": self.fact_id,
            "attributes": self.attributes,
            "dimensions": self.dimensions,
        }


@dataclass(frozen=True)
class PayloadTable:
    rows: tuple[PayloadRow, ...]
    intent: ReportIntent

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows], "intent": self.intent.to_json()}

    def row_for(self, fact_id: str) -> PayloadRow:
        for row in self.rows:
            if row.fact_id == fact_id:
                return row
        raise UnknownFact(f"no payload row for {fact_id!r}")


def collect_payload(store: GraphStore, selected: list[str], intent: ReportIntent) -> PayloadTable:
    """One row per selected fact, straight from the graph.

    Requested attributes appear as None and dimension labels as empty
    lists when the graph has nothing; values are never invented.
    """
    if not selected:
        raise EmptySelection("no facts selected for the report")
    rows = []
    for fact_id in sorted(set(selected)):
        try:
            node = store.get_node(fact_id)
        except UnknownNode as exc:
            raise UnknownFact(f"no fact {fact_id!r}") from exc
        if not isinstance(node, FactNode):
            raise UnknownFact(f"{fact_id!r} is not a fact")
        attributes = {a: node.properties.get(a) for a in intent.required_attributes}
        dimensions: dict[str, list] = {label: [] for label in intent.required_dimensions}
        for dim in store.dimensions_of(fact_id):
            if dim.label in dimensions:
                dimensions[dim.label].append({"id": dim.id, "properties": dict(dim.properties)})
        rows.append(PayloadRow(fact_id, attributes, dimensions))
    return PayloadTable(tuple(rows), intent)


# ----------------------------------------------------------------------
# mind map

@dataclass(frozen=True)
class MindMapMember:
    fact_id: str
    evidence: tuple[str, ...]

    def to_json(self) -> dict:
        return {"fact_id": self.fact_id, "evidence": list(self.evidence)}


@dataclass(frozen=True)
class MindMapCategory:
    name: str
    rationale: str
    members: tuple[MindMapMember, ...]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "rationale": self.rationale,
            "members": [m.to_json() for m in self.members],
        }


@dataclass(frozen=True)
class MindMap:
    root: str
    categories: tuple[MindMapCategory, ...]

    def to_json(self) -> dict:
        return {"root": self.root, "categories": [c.to_json() for c in self.categories]}

    @classmethod
    def from_json(cls, data: dict) -> "MindMap":
        return cls(
            data["root"],
            tuple(
                MindMapCategory(
                    c["name"],
                    c["rationale"],
                    tuple(MindMapMember(m["fact_id"], tuple(m["evidence"])) for m in c["members"]),
                )
                for c in data["categories"]
            ),
        )


def default_batch_size(payload: PayloadTable) -> int:
    sizes = [len(canonical_json(r.to_json())) for r in payload.rows]
    avg = max(1, sum(sizes) // max(1, len(sizes)))
    return max(1, BATCH_BUDGET_CHARS // avg)


def _primary_text_field(payload: PayloadTable, label: str) -> str | None:
    keys = set()
    for row in payload.rows:
        for entry in row.dimensions.get(label, []):
            keys.update(k for k, v in entry["properties"].items() if isinstance(v, str))
    return min(keys) if keys else None


def build_mindmap(
    payload: PayloadTable,
    intent: ReportIntent,
    provider=None,
    batch_size: int | None = None,
) -> MindMap:
    """Group the payload into categories, a batch of rows at a time.

    Facts the provider cannot place land in a final Misc category, so
    coverage holds whatever the provider does.  Without a provider the
    grouping is exact match on the first requested dimension's first
    text field, which makes the result independent of the batch size.
    """
    if not payload.rows:
        raise EmptySelection("payload has no rows")
    if batch_size is None:
        batch_size = default_batch_size(payload)
    if batch_size < 1:
        raise InvalidParams(f"batch_size must be positive, got {batch_size}")
    if not intent.required_dimensions:
        raise NoUsableIntent("intent names no dimensions to organize by")

    label = intent.required_dimensions[0]
    ordered_names: list[str] = []
    rationale: dict[str, str] = {}
    members: dict[str, list[MindMapMember]] = {}
    misc: list[MindMapMember] = []

    rows = list(payload.rows)
    for start in range(0, len(rows), batch_size):
        batch = rows[start : start + batch_size]
        if provider is None:
            assignments = _offline_assign(payload, batch, label)
        else:
            assignments = _model_assign(provider, batch, label, ordered_names)
        for row in batch:
            placed = assignments.get(row.fact_id)
            if not placed:
                misc.append(MindMapMember(row.fact_id, ()))
                continue
            for name, evidence in placed:
                own = {e["id"] for e in row.dimensions.get(label, [])}
                kept = tuple(e for e in evidence if e in own)
                if name not in members:
                    ordered_names.append(name)
                    members[name] = []
                    rationale[name] = f'works sharing the {label} value "{name}"'
                members[name].append(MindMapMember(row.fact_id, kept))

    categories = [
        MindMapCategory(name, rationale[name], tuple(members[name])) for name in ordered_names
    ]
    if misc:
        categories.append(
            MindMapCategory(MISC_CATEGORY, f"works without a usable {label} value", tuple(misc))
        )
    return MindMap(f"{_KIND_TITLES[intent.report_kind]} by {label}", tuple(categories))


def _offline_assign(payload, batch, label):
    primary = _primary_text_field(payload, label)
    assignments = {}
    for row in batch:
        placed = []
        seen = set()
        for entry in row.dimensions.get(label, []):
            value = entry["properties"].get(primary) if primary else None
            if isinstance(value, str) and value.strip():
                name = value.strip()
                if name not in seen:
                    seen.add(name)
                    placed.append((name, (entry["id"],)))
        assignments[row.fact_id] = placed
    return assignments


def _model_assign(provider, batch, label, current_names):
    lines = []
    for row in batch:
        texts = [canonical_json(e["properties"]) for e in row.dimensions.get(label, [])]
        lines.append(f"{row.fact_id}: title={row.attributes.get('title')!r} {label}={texts}")
    prompt = (
        "Assign each work to one or more categories; reuse existing names when they fit.\n"
        f"Existing categories: {current_names or 'none yet'}\n"
        "Works:\n" + "\n".join(lines) + "\n\n"
        "Respond with JSON only, matching exactly:\n"
        '{"assignments": [{"fact_id": "...", "category": "...", "evidence": ["..."]}]}'
    )
    try:
        result = provider.complete(CompletionRequest("", prompt))
        parsed = json.loads(_strip_fences(result.raw_text))
        out: dict[str, list] = {}
        for item in parsed.get("assignments", []):
            name = str(item.get("category", "")).strip()
            if not name:
                continue
            out.setdefault(str(item.get("fact_id")), []).append(
                (name, tuple(str(e) for e in item.get("evidence", [])))
            )
        return out
    except (GraphyError, ValueError, AttributeError, TypeError):
        return {}  # whole batch falls through to Misc


# ----------------------------------------------------------------------
# drafting

@dataclass(frozen=True)
class ReportSection:
    heading: str
    paragraphs: tuple[str, ...]
    cited: tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "heading": self.heading,
            "paragraphs": list(self.paragraphs),
            "cited": list(self.cited),
        }


@dataclass(frozen=True)
class ReportDraft:
    title: str
    sections: tuple[ReportSection, ...]
    bibliography: dict

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "sections": [s.to_json() for s in self.sections],
            "bibliography": dict(self.bibliography),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ReportDraft":
        return cls(
            data["title"],
            tuple(
                ReportSection(s["heading"], tuple(s["paragraphs"]), tuple(s["cited"]))
                for s in data["sections"]
            ),
            dict(data["bibliography"]),
        )


def _bib_entry(row: PayloadRow) -> str:
    title = row.attributes.get("title") or row.fact_id
    year = row.attributes.get("year")
    return f"{title} ({year})" if year is not None else str(title)


def write_report(
    mindmap: MindMap,
    intent: ReportIntent,
    payload: PayloadTable,
    provider=None,
) -> ReportDraft:
    """One section per category, wrapped in an intro and a conclusion.

    Every member is cited inside its category's section via {cite:id}
    markers that the renderers turn into real citations.  The offline
    text is template prose over payload strings only.
    """
    if not mindmap.categories:
        raise EmptySelection("mind map has no categories")
    covered = {m.fact_id for c in mindmap.categories for m in c.members}

    sections = [
        ReportSection(
            "Introduction",
            (
                f"This {_KIND_TITLES[intent.report_kind].lower()} covers {len(covered)} "
                f"works organized into {len(mindmap.categories)} groups.",
            ),
            (),
        )
    ]
    for category in mindmap.categories:
        cited = tuple(dict.fromkeys(m.fact_id for m in category.members))
        if provider is None:
            listing = "; ".join(
                f"{payload.row_for(fact_id).attributes.get('title')} {{cite:{fact_id}}}"
                for fact_id in cited
            )
            paragraphs = (f"Works addressing {category.name}: {listing}.",)
        else:
            paragraphs = _model_section(provider, category, payload)
        sections.append(ReportSection(category.name, paragraphs, cited))
    sections.append(
        ReportSection(
            "Conclusion",
            (f"Across {len(mindmap.categories)} groups, {len(covered)} works were reviewed.",),
            (),
        )
    )

    bibliography = {}
    for section in sections:
        for fact_id in section.cited:
            bibliography[fact_id] = _bib_entry(payload.row_for(fact_id))
    return ReportDraft(mindmap.root, tuple(sections), bibliography)


def _model_section(provider, category, payload):
    rows = [payload.row_for(m.fact_id) for m in category.members]
    listing = "\n".join(
        f"{r.fact_id}: {r.attributes.get('title')!r} abstract={r.attributes.get('abstract')!r}"
        for r in rows
    )
    prompt = (
        f"Write one cohesive paragraph about the category {category.name!r} "
        f"({category.rationale}). Cite every work with {{cite:<fact_id>}}.\n"
        f"Works:\n{listing}\n\n"
        'Respond with JSON only, matching exactly:\n{"paragraphs": ["..."]}'
    )
    try:
        result = provider.complete(CompletionRequest("", prompt))
        parsed = json.loads(_strip_fences(result.raw_text))
        paragraphs = [str(p) for p in parsed["paragraphs"]]
    except (GraphyError, ValueError, KeyError, TypeError) as exc:
        raise ProviderFailure(f"section drafting failed for {category.name!r}") from exc
    # citations the model forgot are appended so closure holds
    mentioned = set()
    for p in paragraphs:
        mentioned.update(_CITE.findall(p))
    missing = [m.fact_id for m in category.members if m.fact_id not in mentioned]
    if missing:
        tail = "; ".join(
            f"{payload.row_for(f).attributes.get('title')} {{cite:{f}}}" for f in missing
        )
        paragraphs.append(f"Also in this group: {tail}.")
    return tuple(paragraphs)


# ----------------------------------------------------------------------
# rendering

_LATEX_SPECIALS = {
    "\\": r"\textbackslash{}",
    "&": r"\&",
    "%": r"\%",
    "$": r"\$",
    "#": r"\#",
    "_": r"\_",
    "{": r"\{",
    "}": r"\}",
    "~": r"\textasciitilde{}",
    "^": r"\textasciicircum{}",
}


def _latex_escape(text: str) -> str:
    return "".join(_LATEX_SPECIALS.get(ch, ch) for ch in str(text))


def _render_paragraph(text: str, cite) -> str:
    out = []
    pos = 0
    for match in _CITE.finditer(text):
        out.append(_render_text(text[pos : match.start()], cite))
        out.append(cite(match.group(1)))
        pos = match.end()
    out.append(_render_text(text[pos:], cite))
    return "".join(out)


def _render_text(chunk: str, cite) -> str:
    return _latex_escape(chunk) if cite is _latex_cite else chunk


def _markdown_cite(fact_id: str) -> str:
    return f"[@{fact_id}]"


def _latex_cite(fact_id: str) -> str:
    return f"\\cite{{{fact_id}}}"


def render_report(draft: ReportDraft, format: str) -> str:
    if format == "markdown":
        return _render_markdown(draft)
    if format == "latex":
        return _render_latex(draft)
    raise UnsupportedFormat(f"no renderer for {format!r}")


def _render_markdown(draft: ReportDraft) -> str:
    lines = [f"# {draft.title}", ""]
    for section in draft.sections:
        lines.append(f"## {section.heading}")
        lines.append("")
        for paragraph in section.paragraphs:
            lines.append(_render_paragraph(paragraph, _markdown_cite))
            lines.append("")
    if draft.bibliography:
        lines.append("## References")
        lines.append("")
        for fact_id in sorted(draft.bibliography):
            lines.append(f"- [@{fact_id}] {draft.bibliography[fact_id]}")
        lines.append("")
    return "\n".join(lines)


def _render_latex(draft: ReportDraft) -> str:
    lines = [
        "\\documentclass{article}",
        f"\\title{{{_latex_escape(draft.title)}}}",
        "\\begin{document}",
        "\\maketitle",
        "",
    ]
    for section in draft.sections:
        lines.append(f"\\section{{{_latex_escape(section.heading)}}}")
        for paragraph in section.paragraphs:
            lines.append(_render_paragraph(paragraph, _latex_cite))
        lines.append("")
    if draft.bibliography:
        lines.append("\\begin{thebibliography}{99}")
        for fact_id in sorted(draft.bibliography):
            lines.append(f"\\bibitem{{{fact_id}}} {_latex_escape(draft.bibliography[fact_id])}")
        lines.append("\\end{thebibliography}")
    lines.append("\\end{document}")
    return "\n".join(lines)
