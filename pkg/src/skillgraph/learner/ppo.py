"""GAE, the PPO clipped-surrogate loss with its analytic gradient, and the update loop."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from skillgraph.learner.networks import PolicyParams, mlp_backward, mlp_forward

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class UpdateError(RuntimeError):
    """A PPO update produced a non-finite loss or gradient."""


def compute_gae(rewards, values, next_value, masks, gamma: float, lam: float):
    """Generalized advantage estimates by backward recursion.

    Arrays are time-major, ``(T, ...)``. ``masks[t]`` is 0 when the episode
    ended at step ``t`` (so ``values[t + 1]`` belongs to a new episode) and 1
    otherwise; ``next_value`` bootstraps the step after ``T - 1``.

        delta_t = r_t + gamma * v_{t+1} * mask_t - v_t
        A_t     = delta_t + gamma * lam * mask_t * A_{t+1}
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    next_value = np.asarray(next_value, dtype=np.float64)
    if not (rewards.shape == values.shape == masks.shape) or next_value.shape != rewards.shape[1:]:
        raise ValueError(
            f"misaligned shapes: rewards {rewards.shape}, values {values.shape}, "
            f"masks {masks.shape}, next_value {next_value.shape}"
        )
    adv = np.zeros_like(rewards)
    last = np.zeros_like(next_value)
    for t in range(rewards.shape[0] - 1, -1, -1):
        v_next = next_value if t == rewards.shape[0] - 1 else values[t + 1]
        delta = rewards[t] + gamma * v_next * masks[t] - values[t]
        last = delta + gamma * lam * masks[t] * last
        adv[t] = last
    return adv, adv + values


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Zero mean, unit std; a batch with no spread (relative to its scale) maps to zeros."""
    centered = adv - adv.mean()
    centered -= centered.mean()  # second pass removes the rounding residue of the first
    if adv.size < 2:
        return centered
    std = centered.std()
    if std <= 1e-12 * max(1.0, float(np.abs(adv).max())):
        return np.zeros_like(adv)
    return centered / std


def gaussian_log_prob(actions, mean, log_std):
    z = (actions - mean) * np.exp(-log_std)
    return -0.5 * (z**2).sum(-1) - log_std.sum() - 0.5 * LOG_2PI * mean.shape[-1]


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std) + 0.5 * (1.0 + LOG_2PI) * log_std.shape[-1])


@dataclass(frozen=True)
class LossWeights:
    clip_epsilon: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    bound_coef: float = 0.01
    bound: float = 1.1


def ppo_loss_and_grad(params: PolicyParams, obs, actions, old_log_prob, advantages, returns,
                      w: LossWeights = LossWeights()):
    """Total loss (to minimize) and its gradient w.r.t. ``params.theta``.

    loss = -mean(min(r A, clip(r, 1-eps, 1+eps) A))
           + value_coef * 0.5 * mean((V - R)^2)
           - entropy_coef * entropy
           + bound_coef * mean(sum(relu(|mu| - bound)^2))
    """
    n = obs.shape[0]
    mean, a_cache = mlp_forward(params.actor_shape, params.actor, obs)
    value, c_cache = mlp_forward(params.critic_shape, params.critic, obs)
    value = value[:, 0]
    log_std = params.log_std
    inv_std = np.exp(-log_std)

    z = (actions - mean) * inv_std
    logp = -0.5 * (z**2).sum(-1) - log_std.sum() - 0.5 * LOG_2PI * mean.shape[-1]
    log_ratio = logp - old_log_prob
    ratio = np.exp(log_ratio)
    eps = w.clip_epsilon
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantages
    policy_loss = -np.minimum(surr1, surr2).mean()
    value_loss = 0.5 * ((value - returns) ** 2).mean()
    entropy = gaussian_entropy(log_std)
    over = np.maximum(mean - w.bound, 0.0) - np.maximum(-w.bound - mean, 0.0)
    bound_loss = (over**2).sum(-1).mean()
    total = policy_loss + w.value_coef * value_loss - w.entropy_coef * entropy + w.bound_coef * bound_loss

    # d policy_loss / d logp: the unclipped branch is the active one iff surr1 <= surr2
    active = surr1 <= surr2
    g_logp = np.where(active, -advantages * ratio, 0.0) / n
    g_mean = g_logp[:, None] * z * inv_std + w.bound_coef * 2.0 * over / n
    g_log_std = (g_logp[:, None] * (z**2 - 1.0)).sum(0) - w.entropy_coef
    g_value = w.value_coef * (value - returns) / n

    grad = np.empty_like(params.theta)
    na = params.actor_shape.n_params
    nc = params.critic_shape.n_params
    grad[:na] = mlp_backward(params.actor_shape, params.actor, a_cache, g_mean)
    grad[na:na + nc] = mlp_backward(params.critic_shape, params.critic, c_cache, g_value[:, None])
    grad[na + nc:] = g_log_std

    stats = {
        "loss": float(total),
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "approx_kl": float(((ratio - 1.0) - log_ratio).mean()),
        "clip_fraction": float((np.abs(ratio - 1.0) > eps).mean()),
    }
    return float(total), grad, stats


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)
    t: int = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        """In-place descent step on ``theta``."""
        if self.m is None:
            self.m = np.zeros_like(theta)
            self.v = np.zeros_like(theta)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        theta -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


@dataclass
class RunningNormalizer:
    """Running mean/variance observation normalizer (parallel Welford merge)."""

    dim: int
    clip: float = 5.0
    mean: np.ndarray = field(default=None)
    var: np.ndarray = field(default=None)
    count: float = 1e-4
    frozen: bool = False

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.var is None:
            self.var = np.ones(self.dim)

    def update(self, x: np.ndarray) -> None:
        if self.frozen:
            return
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.dim)
        b_mean = x.mean(0)
        b_var = x.var(0)
        b_n = x.shape[0]
        delta = b_mean - self.mean
        tot = self.count + b_n
        self.mean = self.mean + delta * b_n / tot
        m2 = self.var * self.count + b_var * b_n + delta**2 * self.count * b_n / tot
        self.var = m2 / tot
        self.count = tot

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)


@dataclass
class RolloutBatch:
    """Flattened (env*step) samples ready for optimisation."""

    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        n = self.obs.shape[0]
        for name in ("actions", "log_probs", "advantages", "returns", "values"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(self.advantages)):
            raise ValueError("non-finite advantages")


@dataclass(frozen=True)
class UpdateSettings:
    epochs: int = 5
    minibatch_size: int = 1024
    max_grad_norm: float = 1.0
    weights: LossWeights = LossWeights()
    kl_target: float | None = 0.008  # adaptive learning rate; None keeps it fixed
    lr_bounds: tuple[float, float] = (1e-6, 1e-2)


def ppo_update(params: PolicyParams, batch: RolloutBatch, opt: Adam, rng: np.random.Generator,
               settings: UpdateSettings = UpdateSettings()) -> tuple[PolicyParams, dict]:
    """Several epochs of minibatch descent on the clipped-surrogate loss.

    Advantages are normalised once over the whole batch. Returns a new
    parameter object (the input is left untouched) and averaged statistics.
    """
    new = params.copy()
    adv = normalize_advantages(batch.advantages)
    n = batch.obs.shape[0]
    mb = min(settings.minibatch_size, n)
    dtype = new.theta.dtype
    obs = batch.obs.astype(dtype, copy=False)
    acts = batch.actions.astype(dtype, copy=False)
    totals: dict[str, float] = {}
    count = 0
    for _ in range(settings.epochs):
        order = rng.permutation(n)
        epoch_kl = []
        for start in range(0, n - mb + 1, mb):
            idx = order[start:start + mb]
            loss, grad, stats = ppo_loss_and_grad(
                new, obs[idx], acts[idx], batch.log_probs[idx], adv[idx], batch.returns[idx],
                settings.weights,
            )
            if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
                raise UpdateError(f"non-finite loss or gradient: {stats}")
            norm = float(np.linalg.norm(grad))
            if settings.max_grad_norm and norm > settings.max_grad_norm:
                grad *= settings.max_grad_norm / norm
            opt.step(new.theta, grad)
            stats["grad_norm"] = norm
            for k, v in stats.items():
                totals[k] = totals.get(k, 0.0) + v
            count += 1
            epoch_kl.append(stats["approx_kl"])
        if settings.kl_target is not None:
            kl = float(np.mean(epoch_kl))
            lo, hi = settings.lr_bounds
            if kl > 2.0 * settings.kl_target:
                opt.lr = max(lo, opt.lr / 1.5)
            elif kl < 0.5 * settings.kl_target:
                opt.lr = min(hi, opt.lr * 1.5)
    out = {k: v / max(count, 1) for k, v in totals.items()}
    out["lr"] = opt.lr
    return new, out
