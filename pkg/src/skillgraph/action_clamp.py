"""Episode-progress scaling of the action-to-torque map."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class ClampSchedule:
    episode_length: int
    ramp_fraction: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        if int(self.episode_length) != self.episode_length or self.episode_length < 2:
            raise ValueError("episode_length must be an integer >= 2")
        if not 0.0 < self.ramp_fraction <= 1.0:
            raise ValueError("ramp_fraction must lie in (0, 1]")

    @property
    def ramp_steps(self) -> Fraction:
        return Fraction(self.ramp_fraction).limit_denominator(10**9) * self.episode_length


def clamp_coefficient(step, sched: ClampSchedule):
    """Torque scale at ``step``: ``min(1, step / (ramp_fraction * episode_length))``.

    Accepts a scalar or an integer array of steps.
    """
    steps = np.asarray(step)
    if np.any(steps < 0) or np.any(steps > sched.episode_length):
        raise ValueError(f"step out of range [0, {sched.episode_length}]")
    if not sched.enabled:
        out = np.ones(steps.shape)
    else:
        ramp = sched.ramp_steps
        out = np.minimum(1.0, steps * float(ramp.denominator) / float(ramp.numerator))
    return float(out) if out.ndim == 0 else out


def apply_clamp(action, coeff, stall_torques) -> np.ndarray:
    """``coeff * stall * clip(action, -1, 1)``; ``coeff`` may be per-row for batches."""
    action = np.asarray(action, dtype=np.float64)
    stall = np.asarray(stall_torques, dtype=np.float64)
    if action.shape[-1:] != stall.shape[-1:]:
        raise ValueError(f"action has {action.shape[-1]} entries, expected {stall.shape[-1]}")
    coeff = np.asarray(coeff, dtype=np.float64)
    if np.any(coeff < 0) or np.any(coeff > 1):
        raise ValueError("clamp coefficient must lie in [0, 1]")
    if coeff.ndim:
        coeff = coeff[..., None]
    return coeff * stall * np.clip(action, -1.0, 1.0)
