"""Frozen-policy evaluation, including deployment-only ablations.

Two deployment conditions can be applied to a checkpoint trained with the
full feature set:

* ``cpg_off``: the CPG slots of the observation are zero-filled.
* ``clamp_off``: the clamp coefficient is forced to 1 from step 0, both in
  the torque mapping and in the observation slot.

The report gives, per skill, the mean over seeds and environments of the
episode maximum reward, for the training-time condition ("reference") and
the requested one, and their ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from skillgraph.graph_config import lower, parse
from skillgraph.learner import load_checkpoint, run_policy
from skillgraph.learner.checkpoint import CheckpointError
from skillgraph.task import CurriculumTask, Toggles


class IncompatibleCheckpoint(CheckpointError):
    pass


@dataclass
class Policy:
    params: object
    normalizer: object
    metadata: dict
    graph: object
    bindings: list
    training_graph: object | None

    @property
    def toggles(self) -> Toggles:
        t = self.metadata["toggles"]
        return Toggles(ego_frame=t["ego_frame"], cpg=t["cpg"], action_clamp=t["action_clamp"],
                       clamp_in_observation=t["action_clamp"])


def load_policy(path: str | Path) -> Policy:
    params, norm, meta = load_checkpoint(path)
    for key in ("graph", "variant", "toggles", "episode_length", "obs_layout"):
        if key not in meta:
            raise IncompatibleCheckpoint(f"{path}: checkpoint lacks {key!r}; not a curriculum policy")
    if norm is None:
        raise IncompatibleCheckpoint(f"{path}: checkpoint has no observation normalizer")
    norm.frozen = True
    graph, bindings = lower(parse(meta["graph"]))
    training = lower(parse(meta["training_graph"]))[0] if meta.get("training_graph") else None
    return Policy(params, norm, meta, graph, bindings, training)


def make_eval_task(policy: Policy, num_envs: int, seed: int, cpg: bool = True,
                   action_clamp: bool = True) -> CurriculumTask:
    trained = policy.toggles
    if cpg and not trained.cpg:
        raise IncompatibleCheckpoint("policy was trained without CPG input; cannot enable it at evaluation")
    if action_clamp and not trained.action_clamp:
        raise IncompatibleCheckpoint("policy was trained without action clamping; cannot enable it")
    toggles = Toggles(ego_frame=trained.ego_frame, cpg=cpg, action_clamp=action_clamp,
                      clamp_in_observation=trained.clamp_in_observation)
    task = CurriculumTask(policy.graph, policy.bindings, num_envs=num_envs, seed=seed,
                          variant=policy.metadata["variant"], toggles=toggles,
                          training_graph=policy.training_graph,
                          episode_length=policy.metadata["episode_length"], record_metrics=False)
    if [list(s) for s in task.layout.slots()] != policy.metadata["obs_layout"]:
        raise IncompatibleCheckpoint("observation layout differs from the one the policy was trained on")
    if task.obs_dim != policy.params.obs_dim or task.act_dim != policy.params.act_dim:
        raise IncompatibleCheckpoint("policy input/output sizes do not match the task")
    return task


def episode_maxima(policy: Policy, seeds: Sequence[int], num_envs: int, cpg: bool = True,
                   action_clamp: bool = True, deterministic: bool = False) -> np.ndarray:
    """(seeds, envs, skills) episode-maximum skill rewards over one full episode."""
    out = []
    steps = policy.metadata["episode_length"]
    for seed in seeds:
        task = make_eval_task(policy, num_envs, seed, cpg, action_clamp)
        best = np.full((num_envs, policy.graph.node_count), -np.inf)

        def on_step(t, reward, info, best=best):
            np.maximum(best, info["skill_rewards"], out=best)

        run_policy(task, policy.params, policy.normalizer, steps, seed=seed,
                   deterministic=deterministic, on_step=on_step)
        out.append(best)
    return np.stack(out)


def evaluate(checkpoint: str | Path, cpg: bool = True, action_clamp: bool = True,
             seeds: Sequence[int] = (0, 1, 2), num_envs: int = 16, deterministic: bool = False) -> dict:
    """Evaluate a checkpoint under the given deployment toggles; returns the report."""
    policy = load_policy(checkpoint)
    trained = policy.toggles
    make_eval_task(policy, 1, 0, cpg, action_clamp)  # rejects features the policy never saw
    conditions = []
    if trained.cpg and not cpg:
        conditions.append("cpg_off")
    if trained.action_clamp and not action_clamp:
        conditions.append("clamp_off")
    ref = episode_maxima(policy, seeds, num_envs, trained.cpg, trained.action_clamp, deterministic)
    cur = ref if not conditions else episode_maxima(policy, seeds, num_envs, cpg, action_clamp, deterministic)
    names = policy.graph.names
    ref_mean = ref.mean(axis=(0, 1))
    cur_mean = cur.mean(axis=(0, 1))
    ratio = {n: (float(c / r) if r > 0 else None) for n, c, r in zip(names, cur_mean, ref_mean)}
    return {
        "checkpoint": str(checkpoint),
        "conditions": conditions,
        "seeds": list(seeds),
        "num_envs": num_envs,
        "deterministic": deterministic,
        "reference": {n: float(v) for n, v in zip(names, ref_mean)},
        "evaluated": {n: float(v) for n, v in zip(names, cur_mean)},
        "best": {n: float(v) for n, v in zip(names, cur.max(axis=(0, 1)))},
        "ratio": ratio,
    }
