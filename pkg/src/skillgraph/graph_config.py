"""Text format for reward graphs (``.rgraph``).

Grammar, one declaration per line, ``#`` starts a comment::

    document := "version" INT NL  skill_decl*  edge_decl*
    skill_decl := "skill" NAME "=" KIND "(" [param ("," param)*] ")"
    param     := NAME "=" NUMBER
    edge_decl := "edge" NAME "->" NAME ":" NUMBER

NAME is ``[A-Za-z_][A-Za-z0-9_]*``; NUMBER is a decimal real (integers are
accepted). Skills must all be declared before the first edge. Whitespace
between tokens is insignificant. The parser checks syntax and references
only; graph-level invariants (acyclicity, reachability) are enforced when the
document is lowered.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from skillgraph.reward_graph import (
    Edge, GraphError, RewardGraph, find_cycle, unreachable_skills, validate_graph,
)

SUPPORTED_VERSIONS = (1,)

KIND_PARAMS: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    # kind: (required, optional)
    "orientation_target": (frozenset({"target", "bandwidth"}), frozenset()),
    "height_target": (frozenset({"target", "bandwidth"}), frozenset()),
    "forward_velocity": (frozenset({"target"}), frozenset()),
    "uprightness": (frozenset({"bandwidth"}), frozenset()),
    "composite": (
        frozenset(),
        frozenset({
            "pitch", "pitch_bandwidth", "pitch_weight",
            "height", "height_bandwidth", "height_weight",
            "velocity", "velocity_weight",
        }),
    ),
}
_COMPOSITE_PAIRS = (("pitch", "pitch_bandwidth"), ("height", "height_bandwidth"))


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}")


@dataclass(frozen=True)
class PrimitiveBinding:
    kind: str
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        problem = binding_problem(self.kind, self.params)
        if problem:
            raise ValueError(problem)


@dataclass(frozen=True)
class SkillSpec:
    name: str
    primitive: PrimitiveBinding
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    passing_score: float
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class GraphSpecDocument:
    version: int
    skills: tuple[SkillSpec, ...]
    edges: tuple[EdgeSpec, ...] = ()

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.skills]


def binding_problem(kind: str, params: dict[str, float]) -> str | None:
    """Describe what is wrong with a primitive binding, or return None."""
    if kind not in KIND_PARAMS:
        return f"unknown primitive kind {kind!r}"
    required, optional = KIND_PARAMS[kind]
    unknown = sorted(set(params) - required - optional)
    if unknown:
        return f"unknown parameter {unknown[0]!r} for {kind}"
    missing = sorted(required - set(params))
    if missing:
        return f"{kind} requires parameter {missing[0]!r}"
    for key, value in params.items():
        if not math.isfinite(value):
            return f"parameter {key!r} must be finite"
        if key.endswith("bandwidth") and value <= 0:
            return f"parameter {key!r} must be positive"
        if key.endswith("weight") and value < 0:
            return f"parameter {key!r} must be non-negative"
    if kind == "forward_velocity" and params["target"] <= 0:
        return "forward_velocity target must be positive"
    if kind == "composite":
        for a, b in _COMPOSITE_PAIRS:
            if (a in params) != (b in params):
                return f"composite needs both {a!r} and {b!r}"
        if "velocity" in params and params["velocity"] <= 0:
            return "composite velocity target must be positive"
        if not {"pitch", "height", "velocity"} & set(params):
            return "composite needs at least one of pitch, height, velocity"
    return None


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<punct>[=(),:])
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize_line(text: str, lineno: int) -> list[_Tok]:
    body = text.split("#", 1)[0]
    toks = []
    pos = 0
    while pos < len(body):
        m = _TOKEN.match(body, pos)
        if m is None:
            raise ParseError(f"unexpected character {body[pos]!r}", lineno, pos + 1)
        if m.lastgroup != "ws":
            kind = m.lastgroup if m.lastgroup != "punct" else m.group()
            toks.append(_Tok(kind, m.group(), lineno, pos + 1))
        pos = m.end()
    return toks


class _Line:
    def __init__(self, toks: list[_Tok], lineno: int, width: int):
        self.toks = toks
        self.pos = 0
        self.lineno = lineno
        self.width = width

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def expect(self, kind: str, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise ParseError(f"expected {what} before end of line", self.lineno, self.width + 1)
        if tok.kind != kind:
            raise ParseError(f"expected {what}, found {tok.text!r}", tok.line, tok.col)
        self.pos += 1
        return tok

    def end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected {tok.text!r} after declaration", tok.line, tok.col)


def _number(tok: _Tok) -> float:
    value = float(tok.text)
    if not math.isfinite(value):
        raise ParseError(f"number {tok.text!r} is out of range", tok.line, tok.col)
    return value


def parse(text: str) -> GraphSpecDocument:
    """Parse ``.rgraph`` text. Raises :class:`ParseError` at the first problem."""
    version: int | None = None
    skills: list[SkillSpec] = []
    edges: list[EdgeSpec] = []
    declared: dict[str, _Tok] = {}
    lines = text.splitlines()

    for lineno, raw in enumerate(lines, start=1):
        toks = _tokenize_line(raw, lineno)
        if not toks:
            continue
        ln = _Line(toks, lineno, len(raw.split("#", 1)[0].rstrip()))
        head = ln.expect("name", "a declaration keyword")
        if version is None:
            if head.text != "version":
                raise ParseError("document must start with a 'version' line", head.line, head.col)
            num = ln.expect("number", "a version number")
            if not re.fullmatch(r"\d+", num.text):
                raise ParseError("version must be an integer", num.line, num.col)
            version = int(num.text)
            if version not in SUPPORTED_VERSIONS:
                raise ParseError(f"unsupported version {version}", num.line, num.col)
            ln.end()
            continue

        if head.text == "skill":
            if edges:
                raise ParseError("skills must be declared before edges", head.line, head.col)
            name = ln.expect("name", "a skill name")
            if name.text in declared:
                first = declared[name.text]
                raise ParseError(
                    f"duplicate skill {name.text!r} (first declared at line {first.line})",
                    name.line, name.col,
                )
            ln.expect("=", "'='")
            kind = ln.expect("name", "a primitive kind")
            if kind.text not in KIND_PARAMS:
                raise ParseError(f"unknown primitive kind {kind.text!r}", kind.line, kind.col)
            ln.expect("(", "'('")
            params: dict[str, float] = {}
            if ln.peek() is not None and ln.peek().kind == ")":
                ln.pos += 1
            else:
                while True:
                    key = ln.expect("name", "a parameter name")
                    if key.text in params:
                        raise ParseError(f"duplicate parameter {key.text!r}", key.line, key.col)
                    ln.expect("=", "'='")
                    params[key.text] = _number(ln.expect("number", "a number"))
                    sep = ln.peek()
                    if sep is not None and sep.kind == ",":
                        ln.pos += 1
                        continue
                    ln.expect(")", "',' or ')'")
                    break
            ln.end()
            problem = binding_problem(kind.text, params)
            if problem:
                raise ParseError(problem, kind.line, kind.col)
            declared[name.text] = name
            skills.append(SkillSpec(name.text, PrimitiveBinding(kind.text, params), head.line, head.col))
        elif head.text == "edge":
            src = ln.expect("name", "a source skill name")
            ln.expect("arrow", "'->'")
            dst = ln.expect("name", "a target skill name")
            ln.expect(":", "':'")
            score = _number(ln.expect("number", "a passing score"))
            ln.end()
            for tok in (src, dst):
                if tok.text not in declared:
                    raise ParseError(f"edge references undeclared skill {tok.text!r}", tok.line, tok.col)
            edges.append(EdgeSpec(src.text, dst.text, score, head.line, head.col))
        else:
            raise ParseError(f"unknown declaration {head.text!r}", head.line, head.col)

    if version is None:
        raise ParseError("missing 'version' line", max(len(lines), 1), 1)
    if not skills:
        raise ParseError("document declares no skills", max(len(lines), 1), 1)
    return GraphSpecDocument(version, tuple(skills), tuple(edges))


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize(doc: GraphSpecDocument) -> str:
    out = [f"version {doc.version}"]
    for s in doc.skills:
        params = ", ".join(f"{k}={_fmt(v)}" for k, v in s.primitive.params.items())
        out.append(f"skill {s.name} = {s.primitive.kind}({params})")
    for e in doc.edges:
        out.append(f"edge {e.src} -> {e.dst} : {_fmt(e.passing_score)}")
    return "\n".join(out) + "\n"


def lower(doc: GraphSpecDocument) -> tuple[RewardGraph, list[PrimitiveBinding]]:
    """Assign skill ids in declaration order and build a validated RewardGraph."""
    ids = {s.name: k for k, s in enumerate(doc.skills)}
    edges = tuple(Edge(ids[e.src], ids[e.dst], e.passing_score) for e in doc.edges)
    graph = RewardGraph(tuple(ids), edges)
    errors = validate_graph(graph)
    if errors:
        raise GraphError(errors, *_locate(doc, graph))
    return graph, [s.primitive for s in doc.skills]


def _locate(doc: GraphSpecDocument, graph: RewardGraph) -> tuple[int | None, int | None]:
    """Source position of the first structural problem: the edge closing a
    cycle, the repeated edge, or the unreachable skill's declaration."""
    seen = set()
    for spec, e in zip(doc.edges, graph.edges):
        if (e.src, e.dst) in seen or not math.isfinite(e.passing_score):
            return spec.line or None, spec.column or None
        seen.add((e.src, e.dst))
    cycle = find_cycle(graph)
    if cycle is not None:
        closing = (cycle[-1], cycle[0])
        for spec, e in zip(doc.edges, graph.edges):
            if (e.src, e.dst) == closing:
                return spec.line or None, spec.column or None
    unreachable = unreachable_skills(graph)
    if unreachable:
        spec = doc.skills[unreachable[0]]
        return spec.line or None, spec.column or None
    return None, None


def from_graph(graph: RewardGraph, bindings: list[PrimitiveBinding]) -> GraphSpecDocument:
    skills = tuple(SkillSpec(n, b) for n, b in zip(graph.names, bindings))
    edges = tuple(
        EdgeSpec(graph.names[e.src], graph.names[e.dst], e.passing_score) for e in graph.edges
    )
    return GraphSpecDocument(SUPPORTED_VERSIONS[-1], skills, edges)


def load(path: str | Path) -> GraphSpecDocument:
    return parse(Path(path).read_text(encoding="utf-8"))


def load_graph(path: str | Path) -> tuple[RewardGraph, list[PrimitiveBinding]]:
    return lower(load(path))
