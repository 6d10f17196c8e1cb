from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skillgraph import reward_graph as rg
from skillgraph.graph_config import (
    KIND_PARAMS, EdgeSpec, GraphSpecDocument, ParseError, PrimitiveBinding, SkillSpec, from_graph,
    load, lower, parse, serialize,
)
from skillgraph.harness.configs import config_path

GOLDEN = Path(__file__).parent / "golden"

SKILL = "skill {} = uprightness(bandwidth=1)\n"


def doc(*lines):
    return "version 1\n" + "".join(lines)


@pytest.mark.parametrize("name", ["reference", "linear", "tree"])
def test_golden_round_trip(name):
    text = serialize(load(config_path(f"{name}.rgraph")))
    assert text == (GOLDEN / f"{name}.rgraph.golden").read_text()
    assert serialize(parse(text)) == text
    assert parse(text) == load(config_path(f"{name}.rgraph"))


def test_reference_structure(reference):
    g, bindings = reference
    assert g.names == ("roll", "kneel", "crouch", "crawl", "stand", "walk")
    assert g.roots == (0,)
    assert len(g.predecessors(g.index("stand"))) == 2
    assert bindings[0].kind == "orientation_target"


def test_minimal_document():
    d = parse(doc(SKILL.format("a"), SKILL.format("b"), "edge a -> b : 0.5\n"))
    g, _ = lower(d)
    assert g.edges == (rg.Edge(0, 1, 0.5),)


def test_comments_and_blank_lines():
    d = parse("# head\n\nversion 1  # trailing\n" + SKILL.format("a") + "\n# done\n")
    assert d.names == ["a"]


class TestDiagnostics:
    def test_dangling_reference_position(self):
        with pytest.raises(ParseError) as err:
            parse(doc(SKILL.format("a"), "edge a -> ghost : 0.5\n"))
        assert (err.value.line, err.value.column) == (3, 11)
        assert "ghost" in err.value.message

    def test_cycle_position(self):
        text = doc(SKILL.format("a"), SKILL.format("b"), SKILL.format("c"),
                   "edge a -> b : 0.5\n", "edge b -> c : 0.5\n", "edge c -> b : 0.5\n")
        with pytest.raises(rg.GraphError) as err:
            lower(parse(text))
        assert err.value.line == 7 and err.value.column == 1
        assert any("cycle detected" in e for e in err.value.errors)

    def test_duplicate_edge_position(self):
        text = doc(SKILL.format("a"), SKILL.format("b"), "edge a -> b : 0.5\n", "edge a -> b : 0.2\n")
        with pytest.raises(rg.GraphError) as err:
            lower(parse(text))
        assert err.value.line == 5

    def test_missing_version(self):
        with pytest.raises(ParseError) as err:
            parse(SKILL.format("a"))
        assert (err.value.line, err.value.column) == (1, 1)

    def test_unsupported_version(self):
        with pytest.raises(ParseError) as err:
            parse("version 7\n" + SKILL.format("a"))
        assert (err.value.line, err.value.column) == (1, 9)

    def test_duplicate_skill(self):
        with pytest.raises(ParseError) as err:
            parse(doc(SKILL.format("a"), SKILL.format("a")))
        assert (err.value.line, err.value.column) == (3, 7)

    def test_unknown_kind(self):
        with pytest.raises(ParseError) as err:
            parse(doc("skill a = wiggle(x=1)\n"))
        assert (err.value.line, err.value.column) == (2, 11)

    def test_missing_parameter(self):
        with pytest.raises(ParseError, match="target"):
            parse(doc("skill a = orientation_target(bandwidth=1)\n"))

    def test_bad_character(self):
        with pytest.raises(ParseError) as err:
            parse(doc("skill a $ uprightness(bandwidth=1)\n"))
        assert (err.value.line, err.value.column) == (2, 9)

    def test_truncated_line(self):
        with pytest.raises(ParseError) as err:
            parse(doc(SKILL.format("a"), SKILL.format("b"), "edge a -> b :\n"))
        assert err.value.line == 4 and "passing score" in err.value.message

    def test_skill_after_edge(self):
        with pytest.raises(ParseError, match="before edges"):
            parse(doc(SKILL.format("a"), SKILL.format("b"), "edge a -> b : 0.5\n", SKILL.format("c")))

    def test_non_finite_number(self):
        with pytest.raises(ParseError):
            parse(doc(SKILL.format("a"), SKILL.format("b"), "edge a -> b : 1e999\n"))


def test_from_graph_round_trip(reference):
    g, b = reference
    g2, b2 = lower(parse(serialize(from_graph(g, b))))
    assert g2 == g and b2 == b


# ------------------------------------------------------------ random documents
names = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in ("version", "skill", "edge"))
finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 1e3, allow_nan=False)


@st.composite
def bindings(draw):
    kind = draw(st.sampled_from(sorted(KIND_PARAMS)))
    if kind == "composite":
        params = {}
        if draw(st.booleans()):
            params.update(pitch=draw(finite), pitch_bandwidth=draw(positive))
        if draw(st.booleans()) or not params:
            params.update(height=draw(finite), height_bandwidth=draw(positive))
        if draw(st.booleans()):
            params.update(velocity=draw(positive))
        for w in ("pitch_weight", "height_weight", "velocity_weight"):
            if draw(st.booleans()):
                params[w] = draw(st.floats(0, 10, allow_nan=False))
        return PrimitiveBinding(kind, params)
    required, _ = KIND_PARAMS[kind]
    params = {k: (draw(positive) if "bandwidth" in k or kind == "forward_velocity" else draw(finite))
              for k in sorted(required)}
    return PrimitiveBinding(kind, params)


@st.composite
def documents(draw):
    skill_names = draw(st.lists(names, min_size=1, max_size=7, unique=True))
    skills = tuple(SkillSpec(n, draw(bindings())) for n in skill_names)
    pairs = draw(st.lists(
        st.tuples(st.integers(0, len(skill_names) - 1), st.integers(0, len(skill_names) - 1)),
        max_size=10))
    edges = tuple(EdgeSpec(skill_names[i], skill_names[j], draw(finite)) for i, j in pairs)
    return GraphSpecDocument(1, skills, edges)


@given(documents())
@settings(max_examples=1000, deadline=None)
def test_random_document_round_trip(d):
    text = serialize(d)
    back = parse(text)
    assert back == d
    assert serialize(back) == text
