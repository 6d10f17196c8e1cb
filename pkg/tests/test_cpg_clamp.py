from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skillgraph.action_clamp import ClampSchedule, apply_clamp, clamp_coefficient
from skillgraph.cpg import DEFAULT_FREQUENCIES, CpgConfig, cpg_block

FIRST_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


class TestCpg:
    def test_default_frequencies(self):
        assert list(DEFAULT_FREQUENCIES) == [0.5, 0.75, 1.25, 1.75, 2.75, 3.25, 4.25, 4.75]
        assert tuple(Fraction(f) * 4 for f in DEFAULT_FREQUENCIES) == FIRST_PRIMES
        assert CpgConfig().size == 16

    def test_inverted_is_negation(self):
        t = np.random.default_rng(0).uniform(0, 100, size=10_000)
        block = cpg_block(t)
        base, inv = block[:, :8], block[:, 8:]
        assert np.abs(inv + base).max() <= 1e-12
        # against the phase-shifted definition evaluated directly
        direct = np.sin(2 * np.pi * t[:, None] * np.array(DEFAULT_FREQUENCIES) - np.pi)
        assert np.abs(inv - direct).max() <= 1e-12
        assert np.all(np.abs(block) <= 1.0)

    def test_known_values(self):
        # at t = 1 s each sine sits at sin(2 pi f) with f a quarter-integer
        expected = [np.sin(2 * np.pi * f) for f in DEFAULT_FREQUENCIES]
        assert np.allclose(cpg_block(1.0)[:8], expected, atol=1e-15)
        assert np.array_equal(cpg_block(0.0), np.zeros(16))
        assert cpg_block(0.125)[0] == pytest.approx(np.sin(np.pi / 8), abs=1e-15)

    def test_period_of_whole_block_is_four_seconds(self):
        t = np.linspace(0, 3, 50)
        assert np.allclose(cpg_block(t), cpg_block(t + 4.0), atol=1e-12)

    def test_without_inverted(self):
        assert cpg_block(0.3, CpgConfig(include_inverted=False)).shape == (8,)

    @pytest.mark.parametrize("freqs", [(), (1.0, 0.5), (0.0, 1.0), (-1.0,)])
    def test_bad_config(self, freqs):
        with pytest.raises(ValueError):
            CpgConfig(frequencies=freqs)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            cpg_block(-0.1)


def exact_coefficient(step, length, frac=Fraction(1, 2)):
    return min(Fraction(1), Fraction(step) / (frac * length))


class TestClamp:
    def test_endpoints(self):
        s = ClampSchedule(600)
        assert clamp_coefficient(0, s) == 0.0
        assert clamp_coefficient(300, s) == 1.0
        assert clamp_coefficient(600, s) == 1.0

    @pytest.mark.parametrize("length", [600, 601, 37])
    def test_exact_rational_100_steps(self, length):
        s = ClampSchedule(length)
        steps = np.random.default_rng(length).integers(0, length + 1, size=100)
        got = clamp_coefficient(steps, s)
        for k, c in zip(steps, got):
            want = exact_coefficient(int(k), length)
            # the float result is the correctly rounded value of the exact ratio
            assert Fraction(float(c)) == Fraction(float(want))
            if 2 * k >= length:
                assert c == 1.0

    def test_linear_between(self):
        s = ClampSchedule(600)
        c = clamp_coefficient(np.arange(0, 301), s)
        assert np.allclose(np.diff(c), 1 / 300, atol=1e-15)

    def test_disabled(self):
        s = ClampSchedule(600, enabled=False)
        assert np.array_equal(clamp_coefficient(np.arange(601), s), np.ones(601))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            clamp_coefficient(601, ClampSchedule(600))
        with pytest.raises(ValueError):
            clamp_coefficient(-1, ClampSchedule(600))

    @pytest.mark.parametrize("kwargs", [dict(episode_length=1), dict(episode_length=10.5),
                                        dict(episode_length=10, ramp_fraction=0.0),
                                        dict(episode_length=10, ramp_fraction=1.5)])
    def test_bad_schedule(self, kwargs):
        with pytest.raises(ValueError):
            ClampSchedule(**kwargs)

    def test_apply(self):
        stall = np.array([10.0, 20.0])
        assert np.array_equal(apply_clamp([2.0, -0.5], 0.5, stall), [5.0, -5.0])
        batch = apply_clamp(np.ones((3, 2)), np.array([0.0, 0.5, 1.0]), stall)
        assert np.array_equal(batch, [[0, 0], [5, 10], [10, 20]])

    def test_apply_errors(self):
        with pytest.raises(ValueError):
            apply_clamp([1.0], 0.5, [1.0, 2.0])
        with pytest.raises(ValueError):
            apply_clamp([1.0], 1.5, [1.0])


@given(st.integers(2, 5000), st.floats(0.01, 1.0), st.data())
@settings(max_examples=300, deadline=None)
def test_clamp_monotone_and_bounded(length, frac, data):
    s = ClampSchedule(length, frac)
    a, b = sorted(data.draw(st.lists(st.integers(0, length), min_size=2, max_size=2)))
    ca, cb = clamp_coefficient(a, s), clamp_coefficient(b, s)
    assert 0.0 <= ca <= cb <= 1.0


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=4, max_size=4), st.floats(0, 1))
def test_torque_bounded_by_stall(action, coeff):
    stall = np.array([1.0, 2.0, 3.0, 4.0])
    tau = apply_clamp(action, coeff, stall)
    assert np.all(np.abs(tau) <= coeff * stall + 1e-15)
