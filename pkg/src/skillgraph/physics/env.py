"""Batched planar environment: reset, step, robot-state views and termination."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from skillgraph.ego_frame import RobotState, quat_conj, quat_from_pitch, quat_rotate
from skillgraph.graph_config import PrimitiveBinding
from skillgraph.physics import rewards as kernels
from skillgraph.physics import sim
from skillgraph.physics.model import RobotModel, five_link

REASON_NONE = 0
REASON_STAGNANT = 1
REASON_NONFINITE = 2

PENETRATION_TOLERANCE = 0.04  # m, worst case under bang-bang stall torques, checked by the fuzz tests


@dataclass(frozen=True)
class EnvConfig:
    episode_length: int = 600
    reset_pitch: float = -np.pi / 2  # supine
    reset_pitch_noise: float = 0.1
    reset_joint_fraction: float = 0.5
    stagnation_window: int = 60
    stagnation_linear: float = 0.02  # m/s
    stagnation_angular: float = 0.05  # rad/s
    settle_steps: int = 1


@dataclass(frozen=True)
class EnvState:
    """State of ``n`` environments; ``q``/``qd`` rows are generalized coordinates.

    ``q = [com_x, com_z, root_pitch, joint angles...]``.
    """

    q: np.ndarray
    qd: np.ndarray
    step: np.ndarray
    quiet_steps: np.ndarray
    contact_forces: np.ndarray  # (n, links, 2) world frame, substep average
    max_penetration: np.ndarray

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def root_pitch(self) -> np.ndarray:
        return self.q[:, 2]

    @property
    def joint_angles(self) -> np.ndarray:
        return self.q[:, 3:]

    @property
    def contact_flags(self) -> np.ndarray:
        return self.contact_forces[..., 1] > 0.0

    def row(self, k: int) -> "EnvState":
        return EnvState(*(a[k:k + 1].copy() for a in (
            self.q, self.qd, self.step, self.quiet_steps, self.contact_forces, self.max_penetration
        )))


@dataclass(frozen=True)
class BodyKinematics:
    com: np.ndarray  # (n, links, 2) world x, z
    vel: np.ndarray  # (n, links, 2)
    pitch: np.ndarray  # (n, links)
    rate: np.ndarray  # (n, links)


class PlanarEnv:
    def __init__(self, model: RobotModel | None = None, config: EnvConfig | None = None):
        self.model = model or five_link()
        self.config = config or EnvConfig()
        self._a = self.model.arrays()
        self.dt = self.model.control_dt / self.model.substeps

    # ----------------------------------------------------------------- views
    def kinematics(self, state: EnvState) -> BodyKinematics:
        n, nl = state.n, self.model.n_links
        com = np.empty((n, nl, 2))
        vel = np.empty((n, nl, 2))
        pitch = np.empty((n, nl))
        rate = np.empty((n, nl))
        a = self._a
        sim.body_states(state.q, state.qd, a["mass"], a["parent"], a["joint_of"],
                        a["parent_anchor"], a["child_anchor"], com, vel, pitch, rate)
        return BodyKinematics(com, vel, pitch, rate)

    def robot_state(self, state: EnvState, kin: BodyKinematics | None = None) -> RobotState:
        """3-D world-frame view (y = 0 plane) of every body, as fed to the ego transform."""
        kin = kin or self.kinematics(state)
        n, nl = state.n, self.model.n_links
        pos = np.zeros((n, nl, 3))
        pos[..., 0] = kin.com[..., 0]
        pos[..., 2] = kin.com[..., 1]
        lin = np.zeros((n, nl, 3))
        lin[..., 0] = kin.vel[..., 0]
        lin[..., 2] = kin.vel[..., 1]
        ang = np.zeros((n, nl, 3))
        ang[..., 1] = kin.rate
        quat = quat_from_pitch(kin.pitch)
        f = np.zeros((n, nl, 3))
        f[..., 0] = state.contact_forces[..., 0]
        f[..., 2] = state.contact_forces[..., 1]
        local_f = quat_rotate(quat_conj(quat), f)
        inv_root = quat_conj(quat[:, 0])
        gravity = quat_rotate(inv_root, np.broadcast_to([0.0, 0.0, -1.0], (n, 3)))
        sensors = np.concatenate(
            [gravity, quat_rotate(inv_root, lin[:, 0]), quat_rotate(inv_root, ang[:, 0])], axis=-1
        )
        return RobotState(pos, quat, lin, ang, state.q[:, 3:].copy(), state.qd[:, 3:].copy(),
                          local_f, sensors)

    def signals(self, state: EnvState, kin: BodyKinematics | None = None) -> kernels.SkillSignals:
        kin = kin or self.kinematics(state)
        return kernels.SkillSignals(
            pitch=kernels.wrap_angle(kin.pitch[:, 0]),
            height=kin.com[:, 0, 1],
            forward_velocity=kin.vel[:, 0, 0],
        )

    def skill_rewards(self, state: EnvState, bindings: Sequence[PrimitiveBinding],
                      kin: BodyKinematics | None = None) -> np.ndarray:
        return kernels.skill_rewards(bindings, self.signals(state, kin))

    def kinetic_energy(self, state: EnvState, kin: BodyKinematics | None = None) -> np.ndarray:
        kin = kin or self.kinematics(state)
        m = self._a["mass"]
        inertia = self._a["inertia"]
        return 0.5 * ((m * (kin.vel**2).sum(-1)).sum(-1) + (inertia * kin.rate**2).sum(-1))

    def endpoints(self, state: EnvState, kin: BodyKinematics | None = None) -> np.ndarray:
        """Capsule end-cap centres, shape (n, links, 2, 2)."""
        kin = kin or self.kinematics(state)
        hl = self._a["half_length"]
        axis = np.stack([np.sin(kin.pitch), np.cos(kin.pitch)], axis=-1) * hl[:, None]
        return np.stack([kin.com - axis, kin.com + axis], axis=-2)

    def penetration(self, state: EnvState, kin: BodyKinematics | None = None) -> np.ndarray:
        ends = self.endpoints(state, kin)
        depth = self._a["radius"][:, None] - ends[..., 1]
        return np.maximum(depth.reshape(state.n, -1).max(axis=-1), 0.0)

    def linear_momentum(self, state: EnvState) -> np.ndarray:
        kin = self.kinematics(state)
        return (self._a["mass"][:, None] * kin.vel).sum(axis=1)

    # -------------------------------------------------------------- dynamics
    def make_state(self, q: np.ndarray, qd: np.ndarray | None = None) -> EnvState:
        q = np.atleast_2d(np.asarray(q, dtype=np.float64)).copy()
        qd = np.zeros_like(q) if qd is None else np.atleast_2d(np.asarray(qd, dtype=np.float64)).copy()
        n = q.shape[0]
        return EnvState(q, qd, np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64),
                        np.zeros((n, self.model.n_links, 2)), np.zeros(n))

    def _advance(self, q, qd, torques):
        n = q.shape[0]
        cforce = np.zeros((n, self.model.n_links, 2))
        maxpen = np.zeros(n)
        a = self._a
        tau = np.ascontiguousarray(np.broadcast_to(torques, (n, self.model.n_joints)), dtype=np.float64)
        sim.simulate(q, qd, tau, self.dt, self.model.substeps, a["mass"], a["inertia"],
                     a["half_length"], a["radius"], a["parent"], a["joint_of"], a["parent_anchor"],
                     a["child_anchor"], a["lower"], a["upper"], a["damping"], a["params"],
                     cforce, maxpen)
        return cforce, maxpen

    def lying_pose(self, rng: np.random.Generator) -> np.ndarray:
        cfg = self.config
        m = self.model
        q = np.zeros(m.n_dof)
        q[2] = cfg.reset_pitch + rng.uniform(-cfg.reset_pitch_noise, cfg.reset_pitch_noise)
        f = cfg.reset_joint_fraction
        q[3:] = rng.uniform(f * m.joint_lower, f * m.joint_upper)
        return q

    def place_on_ground(self, q: np.ndarray) -> np.ndarray:
        """Shift rows of ``q`` so the root is at x = 0 and the lowest end cap touches z = 0."""
        q = np.atleast_2d(q).copy()
        a = self._a
        rel = np.empty((q.shape[0], self.model.n_links, 2))
        sim.place_com(np.ascontiguousarray(q[:, 2:]), a["mass"], a["parent"], a["joint_of"],
                      a["parent_anchor"], a["child_anchor"], rel)
        q[:, :2] = 0.0
        probe = self.make_state(q)
        probe.q[:, 0] = -rel[:, 0, 0]
        ends = self.endpoints(probe)
        low = (ends[..., 1] - a["radius"][:, None]).reshape(q.shape[0], -1).min(axis=-1)
        probe.q[:, 1] = -low
        return probe.q

    def reset(self, seed: int | Sequence[int]) -> EnvState:
        """Lying-down start with randomised joint angles, one row per seed, settled and at rest."""
        seeds = np.atleast_1d(np.asarray(seed, dtype=np.int64))
        q = np.stack([self.lying_pose(np.random.default_rng(int(s))) for s in seeds])
        state = self.make_state(self.place_on_ground(q))
        for _ in range(self.config.settle_steps):
            cforce, pen = self._advance(state.q, state.qd, 0.0)
            state = replace(state, contact_forces=cforce, max_penetration=pen)
        state.qd[:] = 0.0  # the settle step only resolves contacts; episodes start at rest
        return state

    def reset_rows(self, state: EnvState, rows: np.ndarray, seeds: Sequence[int]) -> EnvState:
        rows = np.asarray(rows)
        if rows.size == 0:
            return state
        fresh = self.reset(seeds)
        arrays = {}
        for name in ("q", "qd", "step", "quiet_steps", "contact_forces", "max_penetration"):
            arr = getattr(state, name).copy()
            arr[rows] = getattr(fresh, name)
            arrays[name] = arr
        return EnvState(**arrays)

    def step(self, state: EnvState, torques) -> tuple[EnvState, RobotState, np.ndarray, dict]:
        """Advance one control step.

        Returns the new state, its world-frame robot view, a per-row
        termination flag (stagnation or numerical failure) and an info dict
        with ``reason``, ``truncated`` (episode length reached) and
        ``max_penetration``.
        """
        q = state.q.copy()
        qd = state.qd.copy()
        cforce, maxpen = self._advance(q, qd, torques)
        bad = ~(np.isfinite(q).all(axis=1) & np.isfinite(qd).all(axis=1))
        if bad.any():
            q[bad] = state.q[bad]
            qd[bad] = 0.0
            cforce[bad] = 0.0
        new = EnvState(q, qd, state.step + 1, state.quiet_steps, cforce, maxpen)
        kin = self.kinematics(new)
        cfg = self.config
        quiet = (np.linalg.norm(kin.vel, axis=-1).max(axis=-1) < cfg.stagnation_linear) & (
            np.abs(kin.rate).max(axis=-1) < cfg.stagnation_angular
        )
        quiet_steps = np.where(quiet, state.quiet_steps + 1, 0)
        new = replace(new, quiet_steps=quiet_steps)
        stagnant = quiet_steps >= cfg.stagnation_window
        reason = np.where(bad, REASON_NONFINITE, np.where(stagnant, REASON_STAGNANT, REASON_NONE))
        terminated = reason != REASON_NONE
        info = {
            "reason": reason,
            "truncated": (new.step >= cfg.episode_length) & ~terminated,
            "max_penetration": maxpen,
            "kinematics": kin,
        }
        return new, self.robot_state(new, kin), terminated, info


def check_stagnation(linear_speeds, angular_speeds, window: int = 60,
                     v_eps: float = 0.02, w_eps: float = 0.05) -> bool:
    """True iff the last ``window`` steps were all quiet for every body.

    ``linear_speeds``/``angular_speeds`` have shape ``(steps, bodies)``.
    """
    lin = np.asarray(linear_speeds, dtype=float)
    ang = np.asarray(angular_speeds, dtype=float)
    if lin.shape[0] < window or ang.shape[0] < window:
        return False
    return bool(np.abs(lin[-window:]).max() < v_eps and np.abs(ang[-window:]).max() < w_eps)
