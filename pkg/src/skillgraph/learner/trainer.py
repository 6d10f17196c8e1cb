"""Vectorized rollout collection and the PPO training loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from skillgraph.learner.config import TrainerConfig
from skillgraph.learner.networks import PolicyParams, forward_policy, init_params, mlp_forward
from skillgraph.learner.ppo import (
    Adam, LossWeights, RolloutBatch, RunningNormalizer, UpdateSettings, compute_gae,
    gaussian_log_prob, ppo_update,
)

log = logging.getLogger(__name__)


class VecTask(Protocol):
    """Batch of environments that auto-reset on episode end.

    ``step`` returns ``(obs, reward, terminated, truncated, info)``; for rows
    that ended, ``obs`` is already the first observation of the next episode
    and ``info["final_obs"]`` holds the last observation of the finished one.
    """

    num_envs: int
    obs_dim: int
    act_dim: int

    def reset(self) -> np.ndarray: ...

    def step(self, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, dict]: ...


@dataclass
class TrainResult:
    params: PolicyParams
    normalizer: RunningNormalizer
    stats: list[dict] = field(default_factory=list)
    env_steps: int = 0


def _value(params: PolicyParams, x: np.ndarray) -> np.ndarray:
    v, _ = mlp_forward(params.critic_shape, params.critic, x.astype(params.theta.dtype, copy=False))
    return v[:, 0].astype(np.float64)


def train(task: VecTask, cfg: TrainerConfig,
          callback: Callable[[int, TrainResult], bool | None] | None = None) -> TrainResult:
    """Run PPO on ``task`` for ``cfg.total_env_steps`` environment steps.

    Everything random flows from ``cfg.seed``, so a single-process run is
    bit-reproducible. ``callback(update_index, result)`` runs after every
    update; returning True stops training early.
    """
    rng = np.random.default_rng(cfg.seed)
    params = init_params(task.obs_dim, task.act_dim, cfg.hidden, seed=cfg.seed,
                         init_log_std=cfg.init_log_std, dtype=np.dtype(cfg.dtype))
    norm = RunningNormalizer(task.obs_dim)
    opt = Adam(cfg.learning_rate)
    settings = UpdateSettings(
        epochs=cfg.epochs, minibatch_size=cfg.minibatch_size, max_grad_norm=cfg.max_grad_norm,
        weights=LossWeights(clip_epsilon=cfg.clip_epsilon, value_coef=cfg.value_coef,
                            entropy_coef=cfg.entropy_coef, bound_coef=cfg.bound_coef),
        kl_target=cfg.kl_target,
    )
    result = TrainResult(params, norm)
    T, N = cfg.rollout_horizon, task.num_envs
    n_updates = max(1, cfg.total_env_steps // (T * N))

    obs = task.reset()
    for update in range(n_updates):
        t0 = time.perf_counter()
        b_obs = np.empty((T, N, task.obs_dim))
        b_raw = np.empty((T, N, task.obs_dim))
        b_act = np.empty((T, N, task.act_dim))
        b_logp = np.empty((T, N))
        b_val = np.empty((T, N))
        b_rew = np.empty((T, N))
        b_mask = np.empty((T, N))
        for t in range(T):
            x = norm(obs)
            mean, log_std, value = forward_policy(params, x)
            mean = mean.astype(np.float64)
            log_std = log_std.astype(np.float64)
            action = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
            b_raw[t] = obs
            b_obs[t] = x
            b_act[t] = action
            b_logp[t] = gaussian_log_prob(action, mean, log_std)
            b_val[t] = value
            obs, reward, terminated, truncated, info = task.step(action)
            reward = cfg.reward_scale * np.asarray(reward, dtype=np.float64)
            cut = truncated & ~terminated
            if cut.any():
                reward[cut] += cfg.gamma * _value(params, norm(info["final_obs"][cut]))
            b_rew[t] = reward
            b_mask[t] = 1.0 - (terminated | truncated)
        next_value = _value(params, norm(obs))
        adv, ret = compute_gae(b_rew, b_val, next_value, b_mask, cfg.gamma, cfg.gae_lambda)
        norm.update(b_raw.reshape(-1, task.obs_dim))
        batch = RolloutBatch(
            obs=b_obs.reshape(T * N, -1), actions=b_act.reshape(T * N, -1),
            log_probs=b_logp.reshape(-1), advantages=adv.reshape(-1), returns=ret.reshape(-1),
            values=b_val.reshape(-1),
        )
        params, stats = ppo_update(params, batch, opt, rng, settings)
        result.params = params
        result.env_steps = (update + 1) * T * N
        stats.update(
            update=update, env_steps=result.env_steps,
            mean_reward=float(b_rew.mean() / cfg.reward_scale),
            seconds=time.perf_counter() - t0,
        )
        result.stats.append(stats)
        if update % 50 == 0:
            log.info("update %d env_steps %d reward %.4f kl %.4f lr %.2e", update,
                     result.env_steps, stats["mean_reward"], stats["approx_kl"], stats["lr"])
        if callback is not None and callback(update, result):
            break
    return result


def run_policy(task: VecTask, params: PolicyParams, normalizer: RunningNormalizer, steps: int,
               seed: int = 0, deterministic: bool = False,
               on_step: Callable[[int, np.ndarray, dict], None] | None = None) -> np.ndarray:
    """Roll a frozen policy for ``steps`` control steps; returns the (steps, envs) rewards."""
    rng = np.random.default_rng(seed)
    obs = task.reset()
    rewards = np.empty((steps, task.num_envs))
    for t in range(steps):
        mean, log_std, _ = forward_policy(params, normalizer(obs))
        mean = mean.astype(np.float64)
        action = mean if deterministic else mean + np.exp(log_std) * rng.standard_normal(mean.shape)
        obs, reward, terminated, truncated, info = task.step(action)
        rewards[t] = reward
        if on_step is not None:
            on_step(t, reward, info)
    return rewards
