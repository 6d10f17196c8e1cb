"""One-dimensional point mass that must hold the origin; a quick end-to-end check of the learner.

The reward ``1 / (1 + (x / width)**2)`` has heavy tails so a policy that
wanders off still sees which way is better, and inelastic walls at
``+-bound`` keep the state where that signal is usable.
"""

from __future__ import annotations

import numpy as np


class PointMassTask:
    obs_dim = 2
    act_dim = 1

    def __init__(self, num_envs: int = 16, episode_length: int = 200, seed: int = 0,
                 dt: float = 0.05, max_force: float = 5.0, width: float = 0.7, bound: float = 3.0):
        self.num_envs = num_envs
        self.episode_length = episode_length
        self.dt = dt
        self.max_force = max_force
        self.width = width
        self.bound = bound
        self.rng = np.random.default_rng(seed)
        self.x = np.zeros(num_envs)
        self.v = np.zeros(num_envs)
        self.t = np.zeros(num_envs, dtype=np.int64)

    def _obs(self):
        return np.stack([self.x, self.v], axis=-1)

    def _reset_rows(self, rows):
        self.x[rows] = self.rng.uniform(-1.0, 1.0, size=rows.sum() if rows.dtype == bool else len(rows))
        self.v[rows] = 0.0
        self.t[rows] = 0

    def reset(self):
        self._reset_rows(np.ones(self.num_envs, dtype=bool))
        return self._obs()

    def step(self, actions):
        force = self.max_force * np.clip(np.asarray(actions)[:, 0], -1.0, 1.0)
        self.v = self.v + self.dt * force
        self.x = self.x + self.dt * self.v
        hit = np.abs(self.x) > self.bound
        self.x = np.clip(self.x, -self.bound, self.bound)
        self.v[hit] = 0.0
        self.t += 1
        reward = 1.0 / (1.0 + (self.x / self.width) ** 2)
        terminated = np.zeros(self.num_envs, dtype=bool)
        truncated = self.t >= self.episode_length
        info = {}
        if truncated.any():
            info["final_obs"] = self._obs()
            self._reset_rows(truncated)
        return self._obs(), reward, terminated, truncated, info
