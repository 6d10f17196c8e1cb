import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_rewards, chain_rewards, random_dag
from skillgraph import reward_graph as rg
from skillgraph.reward_graph import Edge, RewardGraph


def chain(n, ps=0.5):
    return rg.make_linear([f"s{k}" for k in range(n)], [ps] * (n - 1))


class TestValidate:
    def test_two_node_chain_ok(self):
        assert rg.validate_graph(chain(2)) == []

    def test_cycle(self):
        g = RewardGraph(("a", "b"), (Edge(0, 1, 0.5), Edge(1, 0, 0.5)))
        errors = rg.validate_graph(g)
        assert any(e.startswith("cycle detected") and "a" in e and "b" in e for e in errors)

    def test_self_loop_is_a_cycle(self):
        g = RewardGraph(("a", "b"), (Edge(0, 1, 0.5), Edge(1, 1, 0.5)))
        assert any("cycle" in e for e in rg.validate_graph(g))

    def test_duplicate_edge(self):
        g = RewardGraph(("a", "b"), (Edge(0, 1, 0.5), Edge(0, 1, 0.5)))
        assert any("duplicate edge" in e for e in rg.validate_graph(g))

    def test_unreachable(self):
        # b <-> c form a cycle fed by nothing, so no root reaches them
        g = RewardGraph(("a", "b", "c"), (Edge(1, 2, 0.1), Edge(2, 1, 0.1)))
        errors = rg.validate_graph(g)
        assert any("unreachable" in e for e in errors)

    def test_non_finite_score(self):
        g = RewardGraph(("a", "b"), (Edge(0, 1, float("nan")),))
        assert any("non-finite" in e for e in rg.validate_graph(g))

    def test_check_graph_raises(self):
        with pytest.raises(rg.GraphError):
            rg.check_graph(RewardGraph(("a", "b"), (Edge(0, 1, 0.5), Edge(1, 0, 0.5))))

    def test_topological_order(self, reference):
        g, _ = reference
        order = rg.topological_order(g)
        pos = {k: i for i, k in enumerate(order)}
        assert all(pos[e.src] < pos[e.dst] for e in g.edges)


class TestUpdate:
    @pytest.mark.parametrize("a, r, ps, expected", [
        (0.0, 0.3, 0.5, 0.0),
        (0.2, 0.9, 0.5, 0.4),
        (0.6, 0.1, 0.5, 0.6),
    ])
    def test_examples(self, a, r, ps, expected):
        g = chain(2, ps)
        out = rg.update_achievements(g, np.array([a]), np.array([r, 0.0]))
        assert out[0] == pytest.approx(expected, abs=1e-15)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            rg.update_achievements(chain(3), np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            rg.update_achievements(chain(3), np.zeros(1), np.zeros(3))

    def test_batched(self):
        g = chain(3)
        state = np.zeros((4, 2))
        r = np.random.default_rng(0).uniform(size=(4, 3))
        out = rg.update_achievements(g, state, r)
        for k in range(4):
            assert np.array_equal(out[k], rg.update_achievements(g, state[k], r[k]))


class TestTotal:
    def test_single_root(self):
        g = RewardGraph(("only",))
        assert rg.total_reward(g, np.zeros(0), np.array([0.7])) == pytest.approx(0.7)

    def test_chain(self):
        # hand evaluation: root 0.9 plus 0.4 * 0.5
        assert rg.total_reward(chain(2), np.array([0.4]), np.array([0.9, 0.5])) == pytest.approx(1.1)

    def test_locked_skill(self):
        assert rg.total_reward(chain(2), np.array([0.0]), np.array([0.9, 5.0])) == pytest.approx(0.9)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            rg.total_reward(chain(2), np.zeros(1), np.array([np.inf, 0.0]))

    def test_multiple_predecessors_add(self):
        g = RewardGraph(("a", "b", "c"), (Edge(0, 2, 0.1), Edge(1, 2, 0.1)))
        total = rg.total_reward(g, np.array([0.2, 0.3]), np.array([1.0, 1.0, 2.0]))
        assert total == pytest.approx(1.0 + 1.0 + 0.2 * 2.0 + 0.3 * 2.0)


class TestActive:
    def test_fresh(self):
        assert rg.active_skills(chain(3), np.zeros(2)) == {0}

    def test_partial(self):
        assert rg.active_skills(chain(3), np.array([0.3, 0.0])) == {0, 1}

    def test_all(self):
        assert rg.active_skills(chain(3), np.array([0.3, 0.1])) == {0, 1, 2}


class TestMakeLinear:
    def test_two(self):
        assert chain(2).edge_count == 1

    def test_six_skill_chain(self):
        names = ["roll", "kneel", "crouch", "crawl", "stand", "walk"]
        g = rg.make_linear(names, [0.5] * 5)
        assert g.node_count == 6 and g.edge_count == 5
        assert [(e.src, e.dst) for e in g.edges] == [(k, k + 1) for k in range(5)]
        assert rg.validate_graph(g) == []

    def test_single(self):
        g = rg.make_linear(["a"], [])
        assert g.node_count == 1 and g.edge_count == 0 and g.roots == (0,)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            rg.make_linear(["a", "b"], [0.5, 0.5])


class TestFirstActivation:
    def test_empty_history(self):
        assert rg.first_activation_times(chain(3), []) == {0: 0, 1: None, 2: None}

    def test_step_17(self):
        hist = [np.array([0.0, 0.0])] * 17 + [np.array([0.1, 0.0])] * 3
        assert rg.first_activation_times(chain(3), hist)[1] == 17

    def test_batched_history(self):
        hist = [np.zeros((2, 2)), np.array([[0.0, 0.0], [0.2, 0.0]])]
        assert rg.first_activation_times(chain(3), hist)[1] == 1


def _run(g, seq):
    a = rg.initial_achievements(g)
    totals, states = [], []
    for r in seq:
        a, total = rg.step(g, a, np.asarray(r))
        totals.append(total)
        states.append(a.copy())
    return totals, states


def check_against_oracle(n_graphs, steps, seed):
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(n_graphs):
        names, edges = random_dag(rng)
        g = RewardGraph(tuple(names), tuple(Edge(*e) for e in edges))
        seq = [[rng.uniform(0, 1) for _ in names] for _ in range(steps)]
        totals, states = _run(g, seq)
        o_totals, o_states = brute_force_rewards(names, edges, seq)
        states = np.array(states).reshape(steps, -1)
        worst = max(worst, np.abs(np.array(totals) - o_totals).max(),
                    np.abs(states - np.array(o_states).reshape(steps, -1)).max(initial=0.0))
        assert (states >= 0).all() and (np.diff(states, axis=0) >= 0).all()
    return worst


def test_oracle_equivalence_random_dags():
    assert check_against_oracle(60, 60, 1234) <= 1e-12


def test_gate_blocks_locked_skill():
    # diamond a -> {b, c} -> d; c scores high while still locked
    g = RewardGraph(("a", "b", "c", "d"), (Edge(0, 1, 0.5), Edge(0, 2, 0.2), Edge(1, 3, 0.7), Edge(2, 3, 0.1)))
    a = rg.update_achievements(g, rg.initial_achievements(g), np.array([0.0, 0.0, 1.0, 0.0]))
    assert np.array_equal(a, np.zeros(4))
    assert rg.active_skills(g, a) == {0}


def test_chain_unlocks_within_one_step():
    a = rg.update_achievements(chain(3), np.zeros(2), np.array([0.9, 0.8, 0.0]))
    assert a == pytest.approx([0.4, 0.3])


def test_linear_matches_hand_written_chain():
    rng = np.random.default_rng(5)
    for n in range(1, 7):
        scores = list(rng.uniform(0.2, 0.8, n - 1))
        g = rg.make_linear([f"s{k}" for k in range(n)], scores)
        seq = rng.uniform(0, 1, size=(80, n))
        totals, _ = _run(g, seq)
        assert np.allclose(totals, chain_rewards(scores, seq.tolist()), atol=1e-12, rtol=0)


rewards_seq = st.lists(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=4, max_size=4), min_size=1, max_size=40
)


@given(rewards_seq)
@settings(max_examples=200, deadline=None)
def test_monotone_and_non_negative(seq):
    g = RewardGraph(("a", "b", "c", "d"), (Edge(0, 1, 0.5), Edge(0, 2, 0.2), Edge(1, 3, 0.7), Edge(2, 3, 0.1)))
    _, states = _run(g, seq)
    prev = np.zeros(g.edge_count)
    for a in states:
        assert np.all(a >= 0) and np.all(a >= prev)
        prev = a


@given(rewards_seq, st.floats(-100, 100, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_locked_skill_annihilation(seq, perturbation):
    g = RewardGraph(("a", "b", "c", "d"), (Edge(0, 1, 0.5), Edge(0, 2, 0.2), Edge(1, 3, 0.7), Edge(2, 3, 0.1)))
    a = rg.initial_achievements(g)
    for r in seq:
        r = np.asarray(r)
        a = rg.update_achievements(g, a, r)
        for j in (1, 2, 3):
            incoming = [k for k, e in enumerate(g.edges) if e.dst == j]
            if all(a[k] == 0 for k in incoming):
                bumped = r.copy()
                bumped[j] += perturbation
                assert rg.total_reward(g, a, bumped) == rg.total_reward(g, a, r)


@given(rewards_seq)
@settings(max_examples=200, deadline=None)
def test_activation_respects_edges(seq):
    g = RewardGraph(("a", "b", "c", "d"), (Edge(0, 1, 0.5), Edge(0, 2, 0.2), Edge(1, 3, 0.7), Edge(2, 3, 0.1)))
    _, states = _run(g, seq)
    times = rg.first_activation_times(g, states)
    assert rg.activation_order_respected(g, times)
    for e in g.edges:
        if times[e.dst] is not None and times[e.src] is not None:
            # some predecessor precedes; for single-parent nodes it is this one
            if len(g.predecessors(e.dst)) == 1:
                assert times[e.src] <= times[e.dst]
