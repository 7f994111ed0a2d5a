"""Extraction workflow configs: output schemas, subnode specs, the DAG.

A workflow is a DAG of subnodes.  Each subnode either applies a rule
(regex pattern or section lookup) to the full document text or sends a
query to a completion model, and declares an output schema that types
what it produces: single-typed outputs become fact attributes,
array-typed outputs become dimension nodes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from graphy.errors import (
    CycleDetected,
    DuplicateNodeName,
    MalformedConfig,
    MissingRequired,
    RuleNoMatch,
    TypeMismatch,
    UnknownEdgeEndpoint,
)

SINGLE_TYPED = "single_typed"
ARRAY_TYPED = "array_typed"
FIELD_TYPES = ("text", "integer", "real", "boolean")


@dataclass(frozen=True)
class OutputSchema:
    kind: str
    fields: dict[str, str]
    required: frozenset[str]

    def describe(self) -> str:
        shape = {name: ftype for name, ftype in sorted(self.fields.items())}
        body = json.dumps(shape, sort_keys=True)
        return body if self.kind == SINGLE_TYPED else f"[{body}, ...]"

    def validate(self, raw) -> dict | list[dict]:
        return validate_output(raw, self)


def _coerce_field(value, ftype: str, name: str):
    if ftype == "text":
        if isinstance(value, str):
            return value
    elif ftype == "integer":
        if isinstance(value, bool):
            raise TypeMismatch(f"field {name!r}: expected integer, got boolean")
        if isinstance(value, int):
            return value
        if isinstance(value, str) and re.fullmatch(r"[+-]?\d+", value.strip()):
            return int(value)
    elif ftype == "real":
        if isinstance(value, bool):
            raise TypeMismatch(f"field {name!r}: expected real, got boolean")
        if isinstance(value, (int, float)):
            return float(value)
        if isinstance(value, str):
            try:
                return float(value.strip())
            except ValueError:
                pass
    elif ftype == "boolean":
        if isinstance(value, bool):
            return value
    raise TypeMismatch(f"field {name!r}: {value!r} is not a {ftype}")


def _validate_map(raw: dict, schema: OutputSchema) -> dict:
    if not isinstance(raw, dict):
        raise TypeMismatch(f"expected an object, got {type(raw).__name__}")
    out = {}
    for name, ftype in schema.fields.items():
        if name in raw and raw[name] is not None:
            out[name] = _coerce_field(raw[name], ftype, name)
    for name in schema.required:
        if name not in out:
            raise MissingRequired(f"missing required field {name!r}")
    return out


def validate_output(raw, schema: OutputSchema) -> dict | list[dict]:
    """Check a structured value against a schema; extra keys are dropped,
    numeric strings coerce to integer/real, nothing else coerces.
    """
    if schema.kind == ARRAY_TYPED:
        if not isinstance(raw, list):
            raise TypeMismatch(f"expected an array, got {type(raw).__name__}")
        return [_validate_map(item, schema) for item in raw]
    return _validate_map(raw, schema)


@dataclass(frozen=True)
class RuleSpec:
    kind: str  # "pattern" | "section"
    pattern: str | None = None
    section: str | None = None


@dataclass(frozen=True)
class InspectNodeSpec:
    name: str
    output_schema: OutputSchema
    rule: RuleSpec | None = None
    model_id: str | None = None
    query: str | None = None
    as_node: bool = False
    retrieval_k: int | None = None

    @property
    def is_rule(self) -> bool:
        return self.rule is not None


@dataclass
class WorkflowSpec:
    nodes: list[InspectNodeSpec]
    edges: list[tuple[str, str]]
    by_name: dict[str, InspectNodeSpec] = field(init=False)

    def __post_init__(self):
        self.by_name = {n.name: n for n in self.nodes}

    def predecessors(self, name: str) -> list[str]:
        return [s for s, t in self.edges if t == name]


# ----------------------------------------------------------------------
# parsing

def _parse_output_schema(data, node_name: str) -> OutputSchema:
    if not isinstance(data, dict):
        raise MalformedConfig(f"subnode {node_name!r}: output_schema must be an object")
    kinds = [k for k in (SINGLE_TYPED, ARRAY_TYPED) if k in data]
    if len(kinds) != 1:
        raise MalformedConfig(
            f"subnode {node_name!r}: output_schema needs exactly one of "
            f"{SINGLE_TYPED!r} or {ARRAY_TYPED!r}"
        )
    kind = kinds[0]
    fields = data[kind]
    if not isinstance(fields, dict) or not fields:
        raise MalformedConfig(f"subnode {node_name!r}: output_schema fields must be a non-empty map")
    for name, ftype in fields.items():
        if ftype not in FIELD_TYPES:
            raise MalformedConfig(
                f"subnode {node_name!r}: field {name!r} has unknown type {ftype!r}"
            )
    required = data.get("required")
    if required is None:
        required = list(fields)
    if not set(required) <= set(fields):
        raise MalformedConfig(f"subnode {node_name!r}: required names unknown fields")
    return OutputSchema(kind, dict(fields), frozenset(required))


def _parse_rule(data, node_name: str) -> RuleSpec:
    if not isinstance(data, dict):
        raise MalformedConfig(f"subnode {node_name!r}: extract_from must be an object")
    if "pattern" in data:
        try:
            re.compile(data["pattern"])
        except re.error as exc:
            raise MalformedConfig(f"subnode {node_name!r}: bad pattern: {exc}") from exc
        return RuleSpec("pattern", pattern=data["pattern"])
    if "section" in data:
        if not isinstance(data["section"], str) or not data["section"]:
            raise MalformedConfig(f"subnode {node_name!r}: section must be a non-empty string")
        return RuleSpec("section", section=data["section"])
    raise MalformedConfig(f"subnode {node_name!r}: extract_from needs 'pattern' or 'section'")


def _parse_node(data) -> InspectNodeSpec:
    if not isinstance(data, dict) or not isinstance(data.get("name"), str) or not data["name"]:
        raise MalformedConfig("every dag node needs a non-empty 'name'")
    name = data["name"]
    schema = _parse_output_schema(data.get("output_schema"), name)
    has_rule = "extract_from" in data
    has_model = "model" in data
    if has_rule == has_model:
        raise MalformedConfig(f"subnode {name!r}: exactly one of 'extract_from' or 'model' required")
    rule = model_id = query = None
    if has_rule:
        rule = _parse_rule(data["extract_from"], name)
        if schema.kind == ARRAY_TYPED and rule.kind != "pattern":
            raise MalformedConfig(f"subnode {name!r}: array outputs need a pattern rule")
    else:
        model = data["model"]
        model_id = model.get("name") if isinstance(model, dict) else model
        if not isinstance(model_id, str) or not model_id:
            raise MalformedConfig(f"subnode {name!r}: model needs a non-empty name")
        query = data.get("query")
        if not isinstance(query, str) or not query:
            raise MalformedConfig(f"subnode {name!r}: model subnodes need a 'query'")
    retrieval_k = data.get("retrieval_k")
    if retrieval_k is not None and (not isinstance(retrieval_k, int) or retrieval_k < 1):
        raise MalformedConfig(f"subnode {name!r}: retrieval_k must be a positive integer")
    return InspectNodeSpec(
        name=name,
        output_schema=schema,
        rule=rule,
        model_id=model_id,
        query=query,
        as_node=bool(data.get("as_node", False)),
        retrieval_k=retrieval_k,
    )


def parse_workflow(config_text: str) -> WorkflowSpec:
    """Parse and validate a workflow config (JSON text)."""
    try:
        data = json.loads(config_text)
    except json.JSONDecodeError as exc:
        raise MalformedConfig(f"workflow config is not valid JSON: {exc}") from exc
    dag = data.get("dag") if isinstance(data, dict) else None
    if not isinstance(dag, dict):
        raise MalformedConfig("workflow config needs a top-level 'dag' object")
    raw_nodes = dag.get("nodes")
    if not isinstance(raw_nodes, list):
        raise MalformedConfig("'dag.nodes' must be a list")
    nodes = [_parse_node(n) for n in raw_nodes]
    seen = set()
    for node in nodes:
        if node.name in seen:
            raise DuplicateNodeName(f"subnode name {node.name!r} declared twice")
        seen.add(node.name)
    edges = []
    for raw_edge in dag.get("edges", []):
        if not isinstance(raw_edge, dict) or "source" not in raw_edge or "target" not in raw_edge:
            raise MalformedConfig("every dag edge needs 'source' and 'target'")
        source, target = raw_edge["source"], raw_edge["target"]
        for endpoint in (source, target):
            if endpoint not in seen:
                raise UnknownEdgeEndpoint(f"edge endpoint {endpoint!r} is not a subnode")
        if source == target:
            raise CycleDetected(f"self-edge on {source!r}")
        edges.append((source, target))
    spec = WorkflowSpec(nodes, edges)
    topological_order(spec)  # raises CycleDetected on cycles
    return spec


def topological_order(spec: WorkflowSpec) -> list[str]:
    """Dependency order; ties broken by declaration order."""
    names = [n.name for n in spec.nodes]
    indegree = {name: 0 for name in names}
    for _, target in spec.edges:
        indegree[target] += 1
    out: list[str] = []
    emitted: set[str] = set()
    while len(out) < len(names):
        ready = next(
            (n for n in names if n not in emitted and indegree[n] == 0),
            None,
        )
        if ready is None:
            cyclic = sorted(set(names) - emitted)
            raise CycleDetected(f"cycle among subnodes {cyclic}")
        emitted.add(ready)
        out.append(ready)
        for source, target in spec.edges:
            if source == ready:
                indegree[target] -= 1
    return out


# ----------------------------------------------------------------------
# rule execution

# Lines that end a section: numbered headings plus the common unnumbered ones.
_NEXT_HEADING = re.compile(
    r"^(?:\d+(?:\.\d+)*\.?\s+\S[^\n]*|Abstract|References|Bibliography|"
    r"Acknowledg?ements|Appendix[^\n]*)\s*$",
    re.M,
)


def _section_heading_re(name: str) -> re.Pattern:
    return re.compile(rf"^(?:\d+(?:\.\d+)*\.?\s+)?{re.escape(name)}\s*$", re.I | re.M)


def rule_extract(text: str, rule: RuleSpec) -> dict:
    """Apply a rule to the document text, returning one property map."""
    if rule.kind == "pattern":
        m = re.search(rule.pattern, text, re.M)
        if m is None:
            raise RuleNoMatch(f"pattern {rule.pattern!r} matched nothing")
        return {k: v for k, v in m.groupdict().items() if v is not None}
    heading = _section_heading_re(rule.section).search(text)
    if heading is None:
        raise RuleNoMatch(f"no heading matches section {rule.section!r}")
    start = heading.end()
    nxt = _NEXT_HEADING.search(text, start)
    body = text[start : nxt.start() if nxt else len(text)]
    return {rule.section.lower(): body.strip()}


def rule_extract_all(text: str, rule: RuleSpec) -> list[dict]:
    """Pattern rule applied repeatedly; one property map per match."""
    if rule.kind != "pattern":
        raise RuleNoMatch("only pattern rules produce arrays")
    out = [
        {k: v for k, v in m.groupdict().items() if v is not None}
        for m in re.finditer(rule.pattern, text, re.M)
    ]
    if not out:
        raise RuleNoMatch(f"pattern {rule.pattern!r} matched nothing")
    return out
