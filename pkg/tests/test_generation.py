"""Report generation: intent parsing, payload, mind map, draft, renderers."""

from __future__ import annotations

import json
import re
from collections import Counter

import pytest

from graphy.errors import (
    EmptySelection,
    NoUsableIntent,
    ProviderFailure,
    UnknownFact,
    UnsupportedFormat,
)
from graphy.generation import (
    MISC_CATEGORY,
    MindMap,
    ReportDraft,
    ReportIntent,
    ReportSection,
    build_mindmap,
    collect_payload,
    interpret_intent,
    render_report,
    write_report,
)
from graphy.graph import FactNode, GraphSchema, GraphStore, PropertySpec, canonical_id
from graphy.providers import CompletionResult

INSTRUCTION = "Please write me a related work, focusing on their challenge"

CHALLENGES = [
    ("Survey of Hallucination Mitigation", "hallucination"),
    ("Grounded Decoding for Factuality", "hallucination"),
    ("Faithful Summarization Benchmarks", "hallucination"),
    ("Scaling Context Windows", "long context"),
    ("Attention Sinks in Streaming Models", "long context"),
    ("Detecting Benchmark Leakage", "data contamination"),
]


def report_schema() -> GraphSchema:
    schema = GraphSchema()
    schema.declare(
        "Paper",
        {
            "title": PropertySpec("text", required=True),
            "abstract": PropertySpec("text"),
            "year": PropertySpec("integer"),
        },
    )
    schema.declare("Challenge", {"summary": PropertySpec("text", required=True)})
    return schema


def six_paper_store() -> tuple[GraphStore, list[str]]:
    store = GraphStore(report_schema())
    ids = []
    for i, (title, challenge) in enumerate(CHALLENGES):
        fact_id = canonical_id(title)
        store.upsert_fact(
            FactNode(fact_id, "Paper", {"title": title, "abstract": f"About {challenge}.", "year": 2020 + i})
        )
        store.add_dimensions(fact_id, "Challenge", [{"summary": challenge}])
        ids.append(fact_id)
    return store, ids


def fixture_payload():
    store, ids = six_paper_store()
    intent = interpret_intent(INSTRUCTION, store.schema)
    return collect_payload(store, ids, intent), intent


class CannedProvider:
    """Returns one canned raw response per call, in order."""

    def __init__(self, *responses: str):
        self.responses = list(responses)
        self.prompts: list[str] = []

    def complete(self, request):
        self.prompts.append(request.prompt)
        raw = self.responses.pop(0) if self.responses else "not json"
        return CompletionResult(raw, None, "canned")


# ----------------------------------------------------------------------
# intent


def test_intent_keyword_fallback():
    schema = report_schema()
    intent = interpret_intent(INSTRUCTION, schema)
    assert set(intent.required_attributes) == {"title", "abstract"}
    assert intent.required_dimensions == ("Challenge",)
    assert intent.report_kind == "related-work"


def test_intent_stems_plural_labels():
    schema = report_schema()
    intent = interpret_intent("A survey of the challenges in the field", schema)
    assert intent.required_dimensions == ("Challenge",)
    assert intent.report_kind == "survey"


def test_intent_without_usable_dimension():
    schema = report_schema()
    with pytest.raises(NoUsableIntent):
        interpret_intent("Write something nice about these papers", schema)


def test_intent_provider_filtered_to_schema():
    schema = report_schema()
    provider = CannedProvider(
        '{"attributes": ["title", "venue"], "dimensions": ["Challenge", "Dataset"]}'
    )
    intent = interpret_intent("group by whatever fits", schema, provider)
    assert intent.required_dimensions == ("Challenge",)  # unknown label dropped
    assert "venue" not in intent.required_attributes
    assert "title" in intent.required_attributes and "abstract" in intent.required_attributes


def test_intent_provider_garbage_falls_back():
    schema = report_schema()
    intent = interpret_intent(INSTRUCTION, schema, CannedProvider("```\nnope\n```"))
    assert intent.required_dimensions == ("Challenge",)


# ----------------------------------------------------------------------
# payload


def test_payload_rows_cover_selection():
    store, ids = six_paper_store()
    intent = interpret_intent(INSTRUCTION, store.schema)
    payload = collect_payload(store, ids[:3], intent)
    assert [r.fact_id for r in payload.rows] == sorted(ids[:3])
    for row in payload.rows:
        assert set(row.attributes) == {"title", "abstract"}
        challenge = row.dimensions["Challenge"]
        assert len(challenge) == 1
        assert challenge[0]["properties"]["summary"] in {c for _, c in CHALLENGES}
        assert challenge[0]["id"] in {d.id for d in store.dimensions_of(row.fact_id)}


def test_payload_marks_missing_values():
    store = GraphStore(report_schema())
    bare = canonical_id("Bare Paper")
    store.upsert_fact(FactNode(bare, "Paper", {"title": "Bare Paper"}))
    intent = ReportIntent("x", ("title", "abstract"), ("Challenge",), "summary")
    payload = collect_payload(store, [bare], intent)
    row = payload.rows[0]
    assert row.attributes["abstract"] is None
    assert row.dimensions["Challenge"] == []


def test_payload_rejects_bad_selection():
    store, ids = six_paper_store()
    intent = interpret_intent(INSTRUCTION, store.schema)
    with pytest.raises(EmptySelection):
        collect_payload(store, [], intent)
    with pytest.raises(UnknownFact):
        collect_payload(store, ["0" * 32], intent)
    dim_id = store.dimensions_of(ids[0])[0].id
    with pytest.raises(UnknownFact):
        collect_payload(store, [dim_id], intent)


# ----------------------------------------------------------------------
# mind map


def test_mindmap_groups_by_challenge_value():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    got = {c.name: len(c.members) for c in mindmap.categories}
    want = Counter(challenge for _, challenge in CHALLENGES)
    assert got == dict(want)
    # category order follows first appearance over sorted rows
    first_seen = []
    for row in payload.rows:
        value = row.dimensions["Challenge"][0]["properties"]["summary"]
        if value not in first_seen:
            first_seen.append(value)
    assert [c.name for c in mindmap.categories] == first_seen


def test_mindmap_batching_invariance():
    payload, intent = fixture_payload()
    maps = [build_mindmap(payload, intent, batch_size=b).to_json() for b in (1, 2, 6)]
    assert maps[0] == maps[1] == maps[2]


def test_mindmap_coverage_and_evidence_locality():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    covered = {m.fact_id for c in mindmap.categories for m in c.members}
    assert covered == {r.fact_id for r in payload.rows}
    for category in mindmap.categories:
        for member in category.members:
            row = payload.row_for(member.fact_id)
            own = {e["id"] for e in row.dimensions["Challenge"]}
            assert set(member.evidence) <= own
            assert member.evidence  # offline grouping always records its evidence


def test_mindmap_misc_backstop():
    store, ids = six_paper_store()
    lonely = canonical_id("No Dimensions Here")
    store.upsert_fact(FactNode(lonely, "Paper", {"title": "No Dimensions Here"}))
    intent = interpret_intent(INSTRUCTION, store.schema)
    payload = collect_payload(store, ids + [lonely], intent)
    mindmap = build_mindmap(payload, intent)
    assert mindmap.categories[-1].name == MISC_CATEGORY
    assert [m.fact_id for m in mindmap.categories[-1].members] == [lonely]
    covered = {m.fact_id for c in mindmap.categories for m in c.members}
    assert lonely in covered


def test_mindmap_single_paper():
    store, ids = six_paper_store()
    intent = interpret_intent(INSTRUCTION, store.schema)
    payload = collect_payload(store, [ids[0]], intent)
    mindmap = build_mindmap(payload, intent)
    assert len(mindmap.categories) == 1
    assert [m.fact_id for m in mindmap.categories[0].members] == [ids[0]]


def test_mindmap_model_assignments_validated():
    payload, intent = fixture_payload()
    rows = payload.rows
    own = rows[0].dimensions["Challenge"][0]["id"]
    responses = []
    # one response per batch: place the first row with one bogus evidence id,
    # leave every other row unplaced
    assignments = json.dumps(
        {
            "assignments": [
                {"fact_id": rows[0].fact_id, "category": "Grouped", "evidence": [own, "f" * 32]}
            ]
        }
    )
    provider = CannedProvider(assignments)
    mindmap = build_mindmap(payload, intent, provider, batch_size=len(rows))
    grouped = mindmap.categories[0]
    assert grouped.name == "Grouped"
    assert grouped.members[0].evidence == (own,)  # foreign id filtered out
    assert mindmap.categories[-1].name == MISC_CATEGORY
    assert len(mindmap.categories[-1].members) == len(rows) - 1


def test_mindmap_provider_failure_lands_in_misc():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent, CannedProvider("garbage", "more garbage"), batch_size=3)
    assert [c.name for c in mindmap.categories] == [MISC_CATEGORY]
    assert len(mindmap.categories[0].members) == len(payload.rows)


def test_mindmap_rejects_empty_payload():
    payload, intent = fixture_payload()
    with pytest.raises(EmptySelection):
        build_mindmap(type(payload)((), intent), intent)


# ----------------------------------------------------------------------
# drafting and rendering


def test_report_structure():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    draft = write_report(mindmap, intent, payload)
    assert [s.heading for s in draft.sections] == (
        ["Introduction"] + [c.name for c in mindmap.categories] + ["Conclusion"]
    )
    assert len(draft.sections) == 5
    for category, section in zip(mindmap.categories, draft.sections[1:-1]):
        assert set(section.cited) == {m.fact_id for m in category.members}
    assert set(draft.bibliography) == {r.fact_id for r in payload.rows}


def test_report_single_member_category():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    leak = next(c for c in mindmap.categories if c.name == "data contamination")
    draft = write_report(mindmap, intent, payload)
    section = next(s for s in draft.sections if s.heading == "data contamination")
    assert section.cited == (leak.members[0].fact_id,)


def test_report_rejects_empty_mindmap():
    payload, intent = fixture_payload()
    with pytest.raises(EmptySelection):
        write_report(MindMap("root", ()), intent, payload)


def test_offline_prose_uses_only_payload_strings():
    payload, intent = fixture_payload()
    draft = write_report(build_mindmap(payload, intent), intent, payload)
    allowed = json.dumps(payload.to_json(), ensure_ascii=False)
    scaffolding = re.compile(
        r"^(This related work covers \d+ works organized into \d+ groups\.|"
        r"Works addressing .*\.|"
        r"Across \d+ groups, \d+ works were reviewed\.)$"
    )
    for section in draft.sections:
        for paragraph in section.paragraphs:
            assert scaffolding.match(paragraph)
            # every variable chunk comes from the payload
            body = re.match(r"Works addressing (.+): (.+)\.$", paragraph)
            if body:
                assert body.group(1) in allowed
                for piece in body.group(2).split("; "):
                    title = re.sub(r" \{cite:[0-9a-f]{32}\}$", "", piece)
                    assert title in allowed


def test_latex_citation_closure_and_balance():
    payload, intent = fixture_payload()
    draft = write_report(build_mindmap(payload, intent), intent, payload)
    tex = render_report(draft, "latex")
    cites = set(re.findall(r"\\cite\{([0-9a-f]{32})\}", tex))
    bibitems = set(re.findall(r"\\bibitem\{([0-9a-f]{32})\}", tex))
    assert cites == bibitems == set(draft.bibliography)
    for env in ("document", "thebibliography"):
        assert tex.count(f"\\begin{{{env}}}") == tex.count(f"\\end{{{env}}}") == 1


def test_markdown_and_latex_share_heading_sequence():
    payload, intent = fixture_payload()
    draft = write_report(build_mindmap(payload, intent), intent, payload)
    md = render_report(draft, "markdown")
    tex = render_report(draft, "latex")
    md_heads = re.findall(r"^## (.+)$", md, re.MULTILINE)
    tex_heads = re.findall(r"^\\section\{(.+)\}$", tex, re.MULTILINE)
    assert md_heads[:-1] == tex_heads  # markdown adds a References heading
    assert md_heads[-1] == "References"
    for fact_id in draft.bibliography:
        assert f"[@{fact_id}]" in md


def test_latex_escapes_specials():
    section = ReportSection(
        "A & B",
        ("50% of $10 {cite:" + "a" * 32 + "}",),
        ("a" * 32,),
    )
    draft = ReportDraft("Costs & Limits", (section,), {"a" * 32: "Title_with_underscore"})
    tex = render_report(draft, "latex")
    assert "\\&" in tex and "\\%" in tex and "\\$" in tex and "\\_" in tex
    assert "\\cite{" + "a" * 32 + "}" in tex  # markers survive escaping


def test_unsupported_format():
    payload, intent = fixture_payload()
    draft = write_report(build_mindmap(payload, intent), intent, payload)
    with pytest.raises(UnsupportedFormat):
        render_report(draft, "pdf")


def test_model_report_appends_forgotten_citations():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    # one {"paragraphs": ...} response per category, never citing anyone
    provider = CannedProvider(*['{"paragraphs": ["A fine group of works."]}'] * 3)
    draft = write_report(mindmap, intent, payload, provider)
    tex = render_report(draft, "latex")
    cites = set(re.findall(r"\\cite\{([0-9a-f]{32})\}", tex))
    assert cites == {r.fact_id for r in payload.rows}


def test_model_report_failure_raises():
    payload, intent = fixture_payload()
    mindmap = build_mindmap(payload, intent)
    with pytest.raises(ProviderFailure):
        write_report(mindmap, intent, payload, CannedProvider("broken"))
