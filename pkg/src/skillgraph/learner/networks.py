"""Numpy MLP actor-critic with hand-written backpropagation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


@dataclass(frozen=True)
class MLPShape:
    sizes: tuple[int, ...]  # input, hidden..., output

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in zip(self.sizes[:-1], self.sizes[1:]))

    def views(self, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        out, k = [], 0
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            w = flat[k:k + a * b].reshape(a, b)
            k += a * b
            out.append((w, flat[k:k + b]))
            k += b
        return out


def mlp_forward(shape: MLPShape, flat: np.ndarray, x: np.ndarray):
    """Returns the output and the pre-activations needed for the backward pass."""
    cache = [x]
    layers = shape.views(flat)
    h = x
    for k, (w, b) in enumerate(layers):
        z = h @ w + b
        if k < len(layers) - 1:
            cache.append(z)
            h = elu(z)
        else:
            h = z
    return h, cache


def mlp_backward(shape: MLPShape, flat: np.ndarray, cache, grad_out: np.ndarray) -> np.ndarray:
    """Gradient of a scalar loss w.r.t. the flat parameters, given dL/d(output)."""
    layers = shape.views(flat)
    grad = np.zeros_like(flat)
    gviews = shape.views(grad)
    g = grad_out
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        inp = cache[0] if k == 0 else elu(cache[k])
        gw, gb = gviews[k]
        gw[...] = inp.T @ g
        gb[...] = g.sum(axis=0)
        if k > 0:
            g = (g @ w.T) * elu_grad(cache[k])
    return grad


@dataclass
class PolicyParams:
    """Actor and critic weights plus the Gaussian head's log standard deviation.

    All parameters live in one flat vector ``theta`` laid out as
    ``[actor | critic | log_std]``; the accessors return views into it.
    """

    obs_dim: int
    act_dim: int
    hidden: tuple[int, ...]
    theta: np.ndarray = field(repr=False)

    @property
    def actor_shape(self) -> MLPShape:
        return MLPShape((self.obs_dim, *self.hidden, self.act_dim))

    @property
    def critic_shape(self) -> MLPShape:
        return MLPShape((self.obs_dim, *self.hidden, 1))

    @property
    def _split(self) -> tuple[int, int]:
        a = self.actor_shape.n_params
        return a, a + self.critic_shape.n_params

    @property
    def actor(self) -> np.ndarray:
        return self.theta[: self._split[0]]

    @property
    def critic(self) -> np.ndarray:
        a, c = self._split
        return self.theta[a:c]

    @property
    def log_std(self) -> np.ndarray:
        return self.theta[self._split[1]:]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.obs_dim, self.act_dim, self.hidden, self.theta.copy())


def n_params(obs_dim: int, act_dim: int, hidden) -> int:
    hidden = tuple(hidden)
    return (MLPShape((obs_dim, *hidden, act_dim)).n_params
            + MLPShape((obs_dim, *hidden, 1)).n_params + act_dim)


def init_params(obs_dim: int, act_dim: int, hidden=(256, 128, 64, 32), seed: int = 0,
                init_log_std: float = -0.5, dtype=np.float64) -> PolicyParams:
    """He-style init for hidden layers, small final layers, zero biases."""
    rng = np.random.default_rng(seed)
    p = PolicyParams(obs_dim, act_dim, tuple(hidden),
                     np.zeros(n_params(obs_dim, act_dim, hidden), dtype=dtype))
    for shape, flat, last_scale in ((p.actor_shape, p.actor, 0.01), (p.critic_shape, p.critic, 1.0)):
        layers = shape.views(flat)
        for k, (w, _) in enumerate(layers):
            fan_in = w.shape[0]
            scale = np.sqrt(2.0 / fan_in) if k < len(layers) - 1 else last_scale / np.sqrt(fan_in)
            w[...] = rng.normal(0.0, scale, size=w.shape)
    p.log_std[...] = init_log_std
    return p


def forward_policy(params: PolicyParams, obs: np.ndarray):
    """Action mean, log-std and state value for a batch (or single row) of observations."""
    obs = np.asarray(obs, dtype=params.theta.dtype)
    single = obs.ndim == 1
    x = obs[None] if single else obs
    if x.shape[-1] != params.obs_dim:
        raise ValueError(f"observation has {x.shape[-1]} entries, network expects {params.obs_dim}")
    mean, _ = mlp_forward(params.actor_shape, params.actor, x)
    value, _ = mlp_forward(params.critic_shape, params.critic, x)
    value = value[:, 0]
    if single:
        return mean[0], params.log_std.copy(), float(value[0])
    return mean, params.log_std.copy(), value
