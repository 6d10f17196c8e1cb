"""Coprime-frequency sine features used as a rhythmic prior in observations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# First eight primes divided by four, spanning roughly 0.5-5 Hz.
DEFAULT_FREQUENCIES = (0.5, 0.75, 1.25, 1.75, 2.75, 3.25, 4.25, 4.75)


@dataclass(frozen=True)
class CpgConfig:
    frequencies: tuple[float, ...] = DEFAULT_FREQUENCIES
    include_inverted: bool = True

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("need at least one frequency")
        if np.any(f <= 0) or np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be positive and strictly increasing")

    @property
    def size(self) -> int:
        return len(self.frequencies) * (2 if self.include_inverted else 1)


def cpg_block(t, cfg: CpgConfig = CpgConfig()) -> np.ndarray:
    """Sine features at time ``t`` seconds.

    Returns ``sin(2*pi*t*f)`` for each frequency followed, when enabled, by
    the phase-inverted copy ``sin(2*pi*t*f - pi)``. ``t`` may be an array, in
    which case the feature axis is appended last.
    """
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    phase = 2.0 * np.pi * t[..., None] * np.asarray(cfg.frequencies)
    base = np.sin(phase)
    if not cfg.include_inverted:
        return base
    # sin(x - pi) evaluated as -sin(x): the two rows agree bit for bit
    return np.concatenate([base, -base], axis=-1)
