from dataclasses import replace

import numpy as np
import pytest

from skillgraph.graph_config import load
from skillgraph.harness.configs import config_path
from skillgraph.physics import EnvConfig, PlanarEnv, check_stagnation, five_link, single_link
from skillgraph.physics import rewards as kernels
from skillgraph.physics.env import PENETRATION_TOLERANCE, REASON_STAGNANT
from skillgraph.physics.rewards import SkillSignals

G = 9.81


def floating(model, gravity=G):
    return replace(model, gravity=gravity, has_ground=False)


def lying(env, pitch):
    q = np.zeros((1, env.model.n_dof))
    q[0, 2] = pitch
    return env.make_state(env.place_on_ground(q))


def angular_momentum(env, state):
    """About the system centre of mass, from per-body kinematics."""
    kin = env.kinematics(state)
    m, inertia = env._a["mass"], env._a["inertia"]
    com = (m[:, None] * kin.com).sum(1) / m.sum()
    rel = kin.com[0] - com[0]
    vrel = kin.vel[0] - (m[:, None] * kin.vel[0]).sum(0) / m.sum()
    # planar cross product r x v about +y: z * vx - x * vz
    return float((m * (rel[:, 1] * vrel[:, 0] - rel[:, 0] * vrel[:, 1])).sum() + (inertia * kin.rate[0]).sum())


class TestFreeFall:
    def test_single_link_matches_ballistic(self):
        env = PlanarEnv(floating(single_link()))
        q0 = np.array([0.3, 5.0, 0.2])
        qd0 = np.array([1.5, 2.0, 3.0])
        s = env.make_state(q0, qd0)
        steps = 30  # 0.5 s at 60 Hz
        worst = 0.0
        for k in range(1, steps + 1):
            s, *_ = env.step(s, np.zeros(0))
            t = k * env.model.control_dt
            z = q0[1] + qd0[1] * t - 0.5 * G * t * t
            worst = max(worst, abs(s.q[0, 1] - z), abs(s.q[0, 0] - (q0[0] + qd0[0] * t)))
        assert worst <= 1e-3
        assert s.q[0, 2] == pytest.approx(q0[2] + qd0[2] * 0.5, abs=1e-9)

    def test_articulated_com_is_ballistic(self):
        env = PlanarEnv(floating(five_link()))
        rng = np.random.default_rng(0)
        s = env.make_state(np.r_[0.0, 3.0, rng.uniform(-1, 1, 5)], rng.normal(size=7))
        z0, vz0 = s.q[0, 1], s.qd[0, 1]
        for _ in range(30):
            s, *_ = env.step(s, rng.uniform(-40, 40, 4))
        assert s.q[0, 1] == pytest.approx(z0 + vz0 * 0.5 - 0.5 * G * 0.25, abs=1e-3)


class TestConservation:
    def test_zero_gravity_linear_momentum(self):
        env = PlanarEnv(floating(five_link(), gravity=0.0))
        rng = np.random.default_rng(1)
        for trial in range(5):
            s = env.make_state(rng.uniform(-1, 1, 7), rng.normal(size=7))
            p = env.linear_momentum(s)
            for _ in range(60):
                s, *_ = env.step(s, np.zeros(4))
                p_new = env.linear_momentum(s)
                assert np.abs(p_new - p).max() <= 1e-9
                p = p_new

    def test_internal_torques_keep_momentum(self):
        env = PlanarEnv(floating(five_link(), gravity=0.0))
        rng = np.random.default_rng(2)
        s = env.make_state(rng.uniform(-1, 1, 7), rng.normal(size=7))
        p0 = env.linear_momentum(s)
        for _ in range(60):
            s, *_ = env.step(s, rng.uniform(-40, 40, 4))
        assert np.abs(env.linear_momentum(s) - p0).max() <= 1e-9

    def test_angular_momentum_drift_shrinks_with_dt(self):
        # joint damping and limits are internal, so the total spin is conserved
        # up to the integrator's error, which must vanish as the substep shrinks
        drift = []
        for sub in (8, 32):
            env = PlanarEnv(replace(floating(five_link(), gravity=0.0), substeps=sub))
            rng = np.random.default_rng(3)
            s = env.make_state(np.r_[0, 0, rng.uniform(-0.3, 0.3, 5)], rng.normal(scale=0.5, size=7))
            l0 = angular_momentum(env, s)
            for _ in range(60):
                s, *_ = env.step(s, np.zeros(4))
            drift.append(abs(angular_momentum(env, s) - l0))
        assert drift[0] <= 1e-2 * 0.1
        assert drift[1] <= drift[0] / 4

    def test_energy_conserved_without_dissipation(self):
        m = floating(five_link())
        m = replace(m, joints=tuple(replace(j, damping=0.0, lower=-10.0, upper=10.0) for j in m.joints))
        env = PlanarEnv(m)
        rng = np.random.default_rng(4)
        s = env.make_state(np.r_[0, 10, rng.uniform(-0.3, 0.3, 5)], rng.normal(scale=0.5, size=7))

        def energy(st):
            return env.kinetic_energy(st)[0] + G * m.total_mass * st.q[0, 1]

        e0 = energy(s)
        for _ in range(60):
            s, *_ = env.step(s, np.zeros(4))
        assert abs(energy(s) - e0) <= 1e-3 * env.kinetic_energy(s)[0] + 1e-6


class TestResting:
    @pytest.mark.parametrize("pitch", [-np.pi / 2, np.pi / 2])
    def test_flat_robot_comes_to_rest(self, pitch):
        env = PlanarEnv()
        s = lying(env, pitch)
        ke = []
        for _ in range(120):  # 2 s
            s, *_ = env.step(s, np.zeros(4))
            ke.append(env.kinetic_energy(s)[0])
        assert ke[-1] < 1e-6
        # once the contact transient is over the energy only drains
        assert np.all(np.diff(ke[10:]) <= 1e-12)

    def test_random_resets_come_to_rest(self):
        env = PlanarEnv()
        s = env.reset(range(20))
        for _ in range(360):
            s, *_ = env.step(s, np.zeros(4))
        assert env.kinetic_energy(s).max() < 1e-6


class TestReset:
    def test_deterministic(self):
        env = PlanarEnv()
        a, b = env.reset(7), env.reset(7)
        for f in ("q", "qd", "contact_forces", "max_penetration"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_seeds_differ_and_respect_limits(self):
        env = PlanarEnv()
        joints = np.stack([env.lying_pose(np.random.default_rng(k))[3:] for k in range(50)])
        assert len({tuple(r) for r in joints}) == 50
        frac = env.config.reset_joint_fraction
        assert np.all(joints >= frac * env.model.joint_lower) and np.all(joints <= frac * env.model.joint_upper)

    def test_lying_and_settled(self):
        env = PlanarEnv()
        s = env.reset(range(50))
        assert np.all(np.abs(s.root_pitch + np.pi / 2) <= env.config.reset_pitch_noise + 1e-12)
        assert s.max_penetration.max() <= 1e-3
        assert env.penetration(s).max() <= 1e-3
        assert np.array_equal(s.qd, np.zeros_like(s.qd))
        # bent legs can prop the torso up, but never into the kneel band
        assert np.all(env.kinematics(s).com[:, 0, 1] < 0.4)


class TestStep:
    def test_determinism(self):
        env = PlanarEnv()
        rng = np.random.default_rng(5)
        torques = rng.uniform(-40, 40, size=(100, 4, 4))
        runs = []
        for _ in range(2):
            s = env.reset([1, 2, 3, 4])
            for t in torques:
                s, *_ = env.step(s, t)
            runs.append(s)
        assert np.array_equal(runs[0].q, runs[1].q) and np.array_equal(runs[0].qd, runs[1].qd)

    def test_rows_independent(self):
        env = PlanarEnv()
        rng = np.random.default_rng(6)
        torques = rng.uniform(-40, 40, size=(50, 3, 4))
        s = env.reset([1, 2, 3])
        single = env.reset([2])
        for t in torques:
            s, *_ = env.step(s, t)
            single, *_ = env.step(single, t[1:2])
        assert np.array_equal(s.q[1], single.q[0])

    def test_fuzz_100_seeds_full_episode(self):
        env = PlanarEnv()
        stall = env.model.stall_torques
        rng = np.random.default_rng(7)
        s = env.reset(range(100))
        worst_pen = 0.0
        for _ in range(env.config.episode_length):
            # piecewise torques at the limits are the harshest input allowed
            s, _, term, info = env.step(s, stall * rng.choice([-1.0, 0.0, 1.0], size=(100, 4)))
            assert np.isfinite(s.q).all() and np.isfinite(s.qd).all()
            assert not (info["reason"] == 2).any()
            worst_pen = max(worst_pen, info["max_penetration"].max())
        assert worst_pen <= PENETRATION_TOLERANCE
        assert np.all(s.step == env.config.episode_length)

    def test_truncation_flag(self):
        env = PlanarEnv(config=EnvConfig(episode_length=5))
        s = env.reset(0)
        for k in range(5):
            s, _, term, info = env.step(s, np.full(4, 10.0))
        assert info["truncated"][0]


class TestStagnation:
    def test_all_zero(self):
        assert check_stagnation(np.zeros((60, 5)), np.zeros((60, 5)))

    def test_one_body_moving(self):
        lin = np.zeros((60, 5))
        lin[:, 2] = 1.0
        assert not check_stagnation(lin, np.zeros((60, 5)))

    def test_short_history(self):
        assert not check_stagnation(np.zeros((59, 5)), np.zeros((59, 5)))

    def test_first_full_quiet_window(self):
        # speeds decay geometrically; the flag rises exactly when the window is all quiet
        speeds = 0.5 * 0.9 ** np.arange(200)
        quiet_from = int(np.argmax((speeds < 0.02) & (0.5 * speeds < 0.05)))
        flags = [check_stagnation(np.tile(speeds[:t, None], (1, 5)), np.tile(0.5 * speeds[:t, None], (1, 5)))
                 for t in range(1, 200)]
        first = flags.index(True) + 1
        assert first == quiet_from + 60

    def test_env_terminates_resting_robot(self):
        env = PlanarEnv()
        s = lying(env, -np.pi / 2)
        reasons = []
        for _ in range(200):
            s, _, term, info = env.step(s, np.zeros(4))
            reasons.append(info["reason"][0])
        assert REASON_STAGNANT in reasons


@pytest.fixture(scope="module")
def bindings():
    from skillgraph.graph_config import lower
    _, b = lower(load(config_path("reference.rgraph")))
    return b


class TestSkillRewards:
    def test_standing_pose(self, bindings):
        env = PlanarEnv()
        s = env.make_state(env.place_on_ground(np.zeros((1, 7))))
        r = dict(zip(["roll", "kneel", "crouch", "crawl", "stand", "walk"], env.skill_rewards(s, bindings)[0]))
        assert env.kinematics(s).com[0, 0, 1] == pytest.approx(0.89)
        assert r["stand"] >= 0.9
        assert r["walk"] == pytest.approx(0.0, abs=1e-12)

    def test_lying_pose(self, bindings):
        env = PlanarEnv()
        r = env.skill_rewards(env.reset(range(20)), bindings)
        assert r[:, 3:].max() < 1e-3  # crawl, stand, walk
        # roll is a Gaussian in pitch around prone, evaluated directly
        pitch = env.kinematics(env.reset(range(20))).pitch[:, 0]
        err = np.angle(np.exp(1j * (pitch - 1.5708)))
        assert np.allclose(r[:, 0], np.exp(-0.5 * err**2), atol=1e-12)

    def test_rewards_in_unit_interval(self, bindings):
        rng = np.random.default_rng(8)
        sig = SkillSignals(rng.uniform(-10, 10, 5000), rng.uniform(-1, 3, 5000), rng.uniform(-5, 5, 5000))
        r = kernels.skill_rewards(bindings, sig)
        assert r.min() >= 0.0 and r.max() <= 1.0

    def test_lipschitz_spot_check(self, bindings):
        rng = np.random.default_rng(9)
        h = 1e-6
        for b in bindings:
            bound = kernels.lipschitz(b)
            for _ in range(200):
                base = rng.uniform([-3, 0, -1], [3, 1.2, 1.5])
                for axis in range(3):
                    hi, lo = base.copy(), base.copy()
                    hi[axis] += h
                    lo[axis] -= h
                    fd = (kernels.evaluate(b, SkillSignals(*hi)) - kernels.evaluate(b, SkillSignals(*lo))) / (2 * h)
                    assert abs(fd) <= bound[axis] * (1 + 1e-4) + 1e-7

    def test_wrap_angle(self):
        assert kernels.wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
        assert kernels.wrap_angle(0.3) == pytest.approx(0.3)
