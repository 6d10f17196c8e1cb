"""Skill reward kernels.

Each skill reward is a smooth kernel in [0, 1] of three signals of the root
(torso) body: its pitch (0 upright, +pi/2 prone, -pi/2 supine), its COM
height, and its forward velocity.

===================  =====================================================
kind                 value
===================  =====================================================
orientation_target   g(wrap(pitch - target), bandwidth)
height_target        g(height - target, bandwidth)
forward_velocity     clip(vx / target, 0, 1)
uprightness          g(wrap(pitch), bandwidth)
composite            product of the pitch / height / velocity factors that
                     are present, each raised to its ``*_weight`` (default 1)
===================  =====================================================

with ``g(e, b) = exp(-e**2 / (2 b**2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from skillgraph.graph_config import PrimitiveBinding


@dataclass(frozen=True)
class SkillSignals:
    pitch: np.ndarray
    height: np.ndarray
    forward_velocity: np.ndarray


def wrap_angle(x):
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def gaussian(err, bandwidth):
    return np.exp(-0.5 * (np.asarray(err) / bandwidth) ** 2)


def ramp(v, target):
    return np.clip(np.asarray(v) / target, 0.0, 1.0)


def evaluate(binding: PrimitiveBinding, s: SkillSignals) -> np.ndarray:
    p = binding.params
    kind = binding.kind
    if kind == "orientation_target":
        return gaussian(wrap_angle(s.pitch - p["target"]), p["bandwidth"])
    if kind == "height_target":
        return gaussian(s.height - p["target"], p["bandwidth"])
    if kind == "forward_velocity":
        return ramp(s.forward_velocity, p["target"])
    if kind == "uprightness":
        return gaussian(wrap_angle(s.pitch), p["bandwidth"])
    if kind == "composite":
        out = np.ones(np.shape(s.pitch))
        if "pitch" in p:
            out = out * gaussian(wrap_angle(s.pitch - p["pitch"]), p["pitch_bandwidth"]) ** p.get("pitch_weight", 1.0)
        if "height" in p:
            out = out * gaussian(s.height - p["height"], p["height_bandwidth"]) ** p.get("height_weight", 1.0)
        if "velocity" in p:
            out = out * ramp(s.forward_velocity, p["velocity"]) ** p.get("velocity_weight", 1.0)
        return out
    raise ValueError(f"unknown primitive kind {kind!r}")


def skill_rewards(bindings: Sequence[PrimitiveBinding], s: SkillSignals) -> np.ndarray:
    """Stack per-skill rewards along a trailing axis."""
    return np.stack([evaluate(b, s) for b in bindings], axis=-1)


_GAUSS_SLOPE = 1.0 / math.sqrt(math.e)  # max |d/de g(e, 1)|


def lipschitz(binding: PrimitiveBinding) -> tuple[float, float, float]:
    """Upper bounds on |dr/dpitch|, |dr/dheight|, |dr/dvx| for one kernel.

    Exact for single-factor kinds; for composites each factor contributes
    ``weight * slope`` (valid for weights >= 1 or 0, where ``f**w`` stays
    Lipschitz on [0, 1]).
    """
    p = binding.params
    kind = binding.kind
    if kind in ("orientation_target", "uprightness"):
        return (_GAUSS_SLOPE / p["bandwidth"], 0.0, 0.0)
    if kind == "height_target":
        return (0.0, _GAUSS_SLOPE / p["bandwidth"], 0.0)
    if kind == "forward_velocity":
        return (0.0, 0.0, 1.0 / p["target"])
    lp = lh = lv = 0.0
    if "pitch" in p:
        lp = max(p.get("pitch_weight", 1.0), 1.0) * _GAUSS_SLOPE / p["pitch_bandwidth"]
    if "height" in p:
        lh = max(p.get("height_weight", 1.0), 1.0) * _GAUSS_SLOPE / p["height_bandwidth"]
    if "velocity" in p:
        lv = max(p.get("velocity_weight", 1.0), 1.0) / p["velocity"]
    return (lp, lh, lv)
