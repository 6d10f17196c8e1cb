"""Trajectory dumps and bit-exact replay.

A dump is tab-separated text::

    # skillgraph-trajectory v1
    # key=value           (seed, episode_length, control_dt, substeps, ...)
    step  q0..  qd0..  tau0..  <skill rewards>

Row ``t`` holds the state after ``t`` control steps and the torque applied
next (NaN on the last row). Floats are written with ``repr`` so they parse
back exactly, which lets :func:`replay` re-simulate and demand identical
bits at every step.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from skillgraph.graph_config import lower, parse
from skillgraph.harness.evaluate import load_policy, make_eval_task
from skillgraph.learner.networks import forward_policy
from skillgraph.physics.env import EnvConfig, PlanarEnv

MAGIC = "# skillgraph-trajectory v1"


@dataclass
class Trajectory:
    meta: dict
    q: np.ndarray  # (T+1, n_dof)
    qd: np.ndarray
    tau: np.ndarray  # (T+1, n_joints); last row NaN
    rewards: np.ndarray  # (T+1, n_skills)
    skills: list[str]

    @property
    def steps(self) -> int:
        return self.q.shape[0] - 1


def record(checkpoint: str | Path, seed: int = 0, steps: int | None = None, deterministic: bool = True,
           cpg: bool = True, action_clamp: bool = True) -> Trajectory:
    """Roll one environment of a trained policy; stops early if the episode terminates."""
    policy = load_policy(checkpoint)
    task = make_eval_task(policy, 1, seed, cpg, action_clamp)
    steps = steps or task.episode_length
    rng = np.random.default_rng(seed)
    obs = task.reset()
    state = task.state
    qs, qds, taus, rews = [state.q[0].copy()], [state.qd[0].copy()], [], []
    rews.append(task.env.skill_rewards(state, task.bindings)[0])
    for _ in range(steps):
        mean, log_std, _ = forward_policy(policy.params, policy.normalizer(obs))
        mean = mean.astype(np.float64)
        action = mean if deterministic else mean + np.exp(log_std) * rng.standard_normal(mean.shape)
        obs, _, terminated, truncated, info = task.step(action)
        taus.append(np.asarray(task.last_torques, dtype=np.float64)[0].copy())
        after = task.last_state
        qs.append(after.q[0].copy())
        qds.append(after.qd[0].copy())
        rews.append(info["skill_rewards"][0].copy())
        if terminated[0] or truncated[0]:
            break
    taus.append(np.full(task.act_dim, np.nan))
    model = task.env.model
    meta = {
        "checkpoint": str(checkpoint), "seed": seed, "deterministic": deterministic,
        "cpg": cpg, "action_clamp": action_clamp, "episode_length": task.episode_length,
        "control_dt": repr(model.control_dt), "substeps": model.substeps,
        "graph": policy.metadata["graph"].replace("\n", "\\n"),
    }
    return Trajectory(meta, np.array(qs), np.array(qds), np.array(taus), np.array(rews),
                      list(policy.graph.names))


def write_trajectory(traj: Trajectory, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nd, nj = traj.q.shape[1], traj.tau.shape[1]
    cols = (["step"] + [f"q{k}" for k in range(nd)] + [f"qd{k}" for k in range(nd)]
            + [f"tau{k}" for k in range(nj)] + [f"r_{s}" for s in traj.skills])
    with open(path, "w", newline="\n") as fh:
        fh.write(MAGIC + "\n")
        for k, v in traj.meta.items():
            fh.write(f"# {k}={v}\n")
        fh.write("\t".join(cols) + "\n")
        for t in range(traj.q.shape[0]):
            vals = [*traj.q[t], *traj.qd[t], *traj.tau[t], *traj.rewards[t]]
            fh.write(f"{t}\t" + "\t".join(repr(float(x)) for x in vals) + "\n")
    return path


def read_trajectory(path: str | Path) -> Trajectory:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a trajectory dump (missing '{MAGIC}')")
    meta, k = {}, 1
    while k < len(lines) and lines[k].startswith("# "):
        key, _, value = lines[k][2:].partition("=")
        meta[key] = value
        k += 1
    if k >= len(lines):
        raise ValueError(f"{path}: missing column header")
    cols = lines[k].split("\t")
    nd = sum(c.startswith("q") and not c.startswith("qd") for c in cols)
    nj = sum(c.startswith("tau") for c in cols)
    skills = [c[2:] for c in cols if c.startswith("r_")]
    try:
        data = np.array([[float(x) for x in line.split("\t")[1:]] for line in lines[k + 1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed row ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(cols) - 1 or len(data) < 1:
        raise ValueError(f"{path}: ragged or empty trajectory")
    q, qd = data[:, :nd], data[:, nd:2 * nd]
    tau, rew = data[:, 2 * nd:2 * nd + nj], data[:, 2 * nd + nj:]
    return Trajectory(meta, q, qd, tau, rew, skills)


def replay(traj: Trajectory) -> dict:
    """Re-simulate from the first state with the recorded torques and compare bitwise."""
    env = PlanarEnv(config=EnvConfig(episode_length=int(traj.meta.get("episode_length", 600))))
    if "control_dt" in traj.meta and float(traj.meta["control_dt"]) != env.model.control_dt:
        raise ValueError("trajectory was recorded with a different control rate")
    if "substeps" in traj.meta and int(traj.meta["substeps"]) != env.model.substeps:
        raise ValueError("trajectory was recorded with a different substep count")
    state = env.make_state(traj.q[:1], traj.qd[:1])
    first_mismatch = None
    max_diff = 0.0
    for t in range(traj.steps):
        state, _, _, _ = env.step(state, traj.tau[t][None])
        diff = max(np.abs(state.q[0] - traj.q[t + 1]).max(), np.abs(state.qd[0] - traj.qd[t + 1]).max())
        max_diff = max(max_diff, float(diff))
        same = np.array_equal(state.q[0], traj.q[t + 1]) and np.array_equal(state.qd[0], traj.qd[t + 1])
        if not same and first_mismatch is None:
            first_mismatch = t + 1
    rewards_ok = None
    if "graph" in traj.meta:
        _, bindings = lower(parse(traj.meta["graph"].replace("\\n", "\n")))
        r = env.skill_rewards(env.make_state(traj.q, traj.qd), bindings)
        rewards_ok = bool(np.array_equal(r, traj.rewards))
    return {
        "steps": traj.steps,
        "identical": first_mismatch is None,
        "first_mismatch": first_mismatch,
        "max_abs_diff": max_diff,
        "rewards_identical": rewards_ok,
        "final_reward": dict(zip(traj.skills, map(float, traj.rewards[-1]))),
    }


def filmstrip(traj: Trajectory, path: str | Path, frames: int = 12) -> Path:
    """Stick-figure SVG of evenly spaced poses, laid out left to right."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    env = PlanarEnv()
    idx = np.unique(np.linspace(0, traj.steps, min(frames, traj.steps + 1)).round().astype(int))
    ends = env.endpoints(env.make_state(traj.q[idx], traj.qd[idx]))
    plt.rcParams["svg.hashsalt"] = "skillgraph"
    fig, ax = plt.subplots(figsize=(1.2 * len(idx) + 1, 2.6))
    dt = float(traj.meta.get("control_dt", env.model.control_dt))
    for k, t in enumerate(idx):
        shift = 1.2 * k - ends[k, 0, :, 0].mean()
        for link in range(ends.shape[1]):
            xs = ends[k, link, :, 0] + shift
            zs = ends[k, link, :, 1]
            ax.plot(xs, zs, color="tab:blue" if link == 0 else "tab:gray", linewidth=3,
                    solid_capstyle="round")
        ax.text(1.2 * k, -0.15, f"{t * dt:.1f}s", ha="center", fontsize=7)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_aspect("equal")
    ax.set_ylim(-0.25, 1.25)
    ax.axis("off")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
