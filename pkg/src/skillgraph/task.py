"""The skill-curriculum task: planar robot + reward graph + observation pipeline.

This is the vectorized environment the learner trains on. Every control
step it assembles the observation (ego transform, CPG block, clamp
coefficient, episode phase), maps actions to clamped torques, advances the
simulator, evaluates skill rewards, updates achievements and produces the
step reward for the configured reward variant.

Episodes run in synchronized rounds of ``episode_length`` steps: every
environment is truncated at a round boundary, and one that stagnates earlier
restarts immediately and finishes the round with a shorter episode. Rounds
are the "episodes" of the metric log.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from skillgraph import reward_graph as rg
from skillgraph.action_clamp import ClampSchedule, apply_clamp, clamp_coefficient
from skillgraph.cpg import CpgConfig, cpg_block
from skillgraph.ego_frame import ObservationLayout, assemble_observation, layout_for, to_ego
from skillgraph.graph_config import PrimitiveBinding
from skillgraph.physics.env import EnvConfig, EnvState, PlanarEnv

VARIANTS = ("graph", "linear", "tree", "single", "sum")


@dataclass(frozen=True)
class Toggles:
    ego_frame: bool = True
    cpg: bool = True
    action_clamp: bool = True
    clamp_in_observation: bool = True


def terminal_skill(g: rg.RewardGraph) -> int:
    """Last skill in topological order (the most advanced one)."""
    return rg.topological_order(g)[-1]


@dataclass
class MetricRow:
    episode: int
    epoch: int
    env_steps: int
    skill: str
    reward: float  # max over envs and steps within this epoch
    max_reward: float  # running max within the episode (non-decreasing over epochs)
    achievement: float  # largest incoming-edge achievement over envs at epoch end
    active: bool


class MetricsRecorder:
    """Aggregates per-step skill rewards into (episode, epoch, skill) rows.

    Also tracks the first global env-step at which each skill of the
    measurement graph became active in any environment.
    """

    def __init__(self, graph: rg.RewardGraph, num_envs: int, episode_length: int, epoch_length: int):
        self.graph = graph
        self.num_envs = num_envs
        self.episode_length = episode_length
        self.epoch_length = epoch_length
        self.rows: list[MetricRow] = []
        self.first_active: dict[int, int | None] = {k: None for k in range(graph.node_count)}
        for k in graph.roots:
            self.first_active[k] = 0
        self._key: tuple[int, int] | None = None
        self._epoch_max = np.zeros(graph.node_count)
        self._episode_max = np.zeros(graph.node_count)
        self._achievement = np.zeros(graph.node_count)
        self._active = np.zeros(graph.node_count, dtype=bool)
        self._env_steps = 0
        self._incoming = [[k for k, e in enumerate(graph.edges) if e.dst == j]
                          for j in range(graph.node_count)]

    def record(self, control_step: int, rewards: np.ndarray, achievements: np.ndarray) -> None:
        episode, within = divmod(control_step, self.episode_length)
        key = (episode, within // self.epoch_length)
        if self._key is not None and key != self._key:
            self._flush()
            if key[0] != self._key[0]:
                self._episode_max[:] = 0.0
        if self._key != key:
            self._epoch_max[:] = -np.inf
        self._key = key
        self._env_steps = (control_step + 1) * self.num_envs
        self._epoch_max = np.maximum(self._epoch_max, rewards.max(axis=0))
        self._episode_max = np.maximum(self._episode_max, rewards.max(axis=0))
        mask = rg.active_mask(self.graph, achievements).any(axis=0)
        self._active = mask
        for j, inc in enumerate(self._incoming):
            self._achievement[j] = achievements[:, inc].max() if inc else 1.0
            if mask[j] and self.first_active[j] is None:
                self.first_active[j] = control_step * self.num_envs + 1
        # rows are emitted lazily; _flush writes the pending epoch

    def _flush(self) -> None:
        if self._key is None:
            return
        ep, epoch = self._key
        for j, name in enumerate(self.graph.names):
            self.rows.append(MetricRow(
                ep, epoch, self._env_steps, name, float(self._epoch_max[j]),
                float(self._episode_max[j]), float(self._achievement[j]), bool(self._active[j]),
            ))

    def close(self) -> None:
        self._flush()
        self._key = None


class CurriculumTask:
    """Vectorized task exposing the ``VecTask`` interface used by the trainer."""

    def __init__(
        self,
        graph: rg.RewardGraph,
        bindings: Sequence[PrimitiveBinding],
        num_envs: int = 64,
        seed: int = 0,
        variant: str = "graph",
        toggles: Toggles = Toggles(),
        training_graph: rg.RewardGraph | None = None,
        env: PlanarEnv | None = None,
        episode_length: int | None = None,
        epoch_length: int = 32,
        cpg: CpgConfig = CpgConfig(),
        ramp_fraction: float = 0.5,
        record_metrics: bool = True,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")
        if len(bindings) != graph.node_count:
            raise ValueError("need one primitive binding per skill")
        rg.check_graph(graph)
        if training_graph is not None:
            rg.check_graph(training_graph)
            if training_graph.names != graph.names:
                raise ValueError("training graph must use the same skills as the measurement graph")
        self.graph = graph
        self.training_graph = training_graph or graph
        self.bindings = list(bindings)
        self.variant = variant
        self.toggles = toggles
        self.num_envs = num_envs
        if env is None:
            env = PlanarEnv(config=EnvConfig(episode_length=episode_length or EnvConfig().episode_length))
        elif episode_length is not None and episode_length != env.config.episode_length:
            raise ValueError("episode_length disagrees with the environment config")
        self.env = env
        self.episode_length = env.config.episode_length
        self.schedule = ClampSchedule(self.episode_length, ramp_fraction, enabled=toggles.action_clamp)
        self.cpg = cpg
        self.stall = env.model.stall_torques
        self.act_dim = env.model.n_joints
        self._rng = np.random.default_rng(seed)
        self._terminal = terminal_skill(graph)
        self.metrics = (MetricsRecorder(graph, num_envs, self.episode_length, epoch_length)
                        if record_metrics else None)
        self.control_step = 0
        self.state: EnvState | None = None
        probe = self.env.robot_state(self.env.make_state(np.zeros((1, env.model.n_dof))))
        self.layout: ObservationLayout = layout_for(probe, cpg.size)
        self.obs_dim = self.layout.size
        self.train_ach = rg.initial_achievements(self.training_graph, (num_envs,))
        self.meas_ach = rg.initial_achievements(graph, (num_envs,))
        self.last_rewards = np.zeros((num_envs, graph.node_count))
        self.last_torques = np.zeros((num_envs, self.act_dim))
        self.last_state: EnvState | None = None

    # --------------------------------------------------------------- helpers
    def _episode_seeds(self, n: int) -> np.ndarray:
        return self._rng.integers(0, 2**31 - 1, size=n)

    def clamp(self, steps: np.ndarray) -> np.ndarray:
        return np.asarray(clamp_coefficient(np.minimum(steps, self.episode_length), self.schedule),
                          dtype=np.float64).reshape(-1)

    def observe(self, state: EnvState, kin=None) -> np.ndarray:
        robot = self.env.robot_state(state, kin)
        if self.toggles.ego_frame:
            robot = to_ego(robot)
        t = state.step * self.env.model.control_dt
        if self.toggles.cpg:
            block = cpg_block(t, self.cpg)
        else:
            block = np.zeros((state.n, self.cpg.size))
        coeff = self.clamp(state.step) if self.toggles.clamp_in_observation else np.zeros(state.n)
        phase = state.step / self.episode_length
        return assemble_observation(robot, block, coeff, phase, self.layout)

    def step_reward(self, skill_r: np.ndarray) -> np.ndarray:
        if self.variant == "single":
            return skill_r[:, self._terminal]
        if self.variant == "sum":
            return skill_r.sum(axis=-1)
        return np.asarray(rg.total_reward(self.training_graph, self.train_ach, skill_r))

    # ------------------------------------------------------------- interface
    def reset(self) -> np.ndarray:
        self.state = self.env.reset(self._episode_seeds(self.num_envs))
        self.train_ach[:] = 0.0
        self.meas_ach[:] = 0.0
        self.control_step = 0
        return self.observe(self.state)

    def step(self, actions: np.ndarray):
        state = self.state
        torques = apply_clamp(actions, self.clamp(state.step), self.stall)
        state, _, terminated, info = self.env.step(state, torques)
        self.last_torques = torques
        self.last_state = state  # before any auto-reset, for trajectory recording
        kin = info["kinematics"]
        skill_r = self.env.skill_rewards(state, self.bindings, kin)
        self.last_rewards = skill_r
        self.train_ach = rg.update_achievements(self.training_graph, self.train_ach, skill_r)
        self.meas_ach = rg.update_achievements(self.graph, self.meas_ach, skill_r)
        reward = self.step_reward(skill_r)
        if self.metrics is not None:
            self.metrics.record(self.control_step, skill_r, self.meas_ach)
        self.control_step += 1
        boundary = self.control_step % self.episode_length == 0
        truncated = np.full(self.num_envs, boundary) & ~terminated
        done = terminated | truncated
        out_info = {"reason": info["reason"], "skill_rewards": skill_r,
                    "achievements": self.meas_ach.copy()}
        if done.any():
            out_info["final_obs"] = self.observe(state, kin)
            rows = np.flatnonzero(done)
            state = self.env.reset_rows(state, rows, self._episode_seeds(rows.size))
            self.train_ach[rows] = 0.0
            self.meas_ach[rows] = 0.0
            kin = None
        self.state = state
        return self.observe(state, kin), reward, terminated, truncated, out_info
