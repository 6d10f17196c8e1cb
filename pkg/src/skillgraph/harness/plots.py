"""SVG learning curves from metric logs.

Two families, one line per skill:

* ``max_reward.svg``: per-episode maximum skill reward against episode.
* ``progression.svg``: within-episode reward (per 32-step epoch) during each
  seed's best episode, the one with the largest summed skill maxima.

With three or more seeds the line is the median and the band spans the
first to third quartile. Output is byte-stable for identical input.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from skillgraph.task import MetricRow  # noqa: E402

BAND_MIN_SEEDS = 3


def _skills(rows: list[MetricRow]) -> list[str]:
    seen: dict[str, None] = {}
    for r in rows:
        seen.setdefault(r.skill)
    return list(seen)


def _episode_table(rows: list[MetricRow], skills: list[str]) -> np.ndarray:
    n_ep = max(r.episode for r in rows) + 1
    out = np.full((n_ep, len(skills)), np.nan)
    col = {s: k for k, s in enumerate(skills)}
    for r in rows:
        k = col[r.skill]
        out[r.episode, k] = r.max_reward if np.isnan(out[r.episode, k]) else max(out[r.episode, k], r.max_reward)
    return out


def _best_episode(rows: list[MetricRow], skills: list[str]) -> np.ndarray:
    table = _episode_table(rows, skills)
    best = int(np.argmax(np.nansum(table, axis=1)))
    n_epoch = max(r.epoch for r in rows if r.episode == best) + 1
    out = np.full((n_epoch, len(skills)), np.nan)
    col = {s: k for k, s in enumerate(skills)}
    for r in rows:
        if r.episode == best:
            out[r.epoch, col[r.skill]] = r.reward
    return out


def _stack(tables: list[np.ndarray]) -> np.ndarray:
    n = max(t.shape[0] for t in tables)
    out = np.full((len(tables), n, tables[0].shape[1]), np.nan)
    for k, t in enumerate(tables):
        out[k, :t.shape[0]] = t
    return out


def _draw(data: np.ndarray, skills: list[str], xlabel: str, ylabel: str, title: str, path: Path) -> Path:
    plt.rcParams["svg.hashsalt"] = "skillgraph"
    fig, ax = plt.subplots(figsize=(7, 4))
    x = np.arange(data.shape[1])
    cmap = plt.get_cmap("tab10")
    with warnings.catch_warnings():
        # all-NaN columns (seeds with fewer episodes) are expected
        warnings.simplefilter("ignore", RuntimeWarning)
        mid = np.nanmedian(data, axis=0)
        q1 = np.nanpercentile(data, 25, axis=0)
        q3 = np.nanpercentile(data, 75, axis=0)
    for k, name in enumerate(skills):
        color = cmap(k % 10)
        ax.plot(x, mid[:, k], color=color, label=name, linewidth=1.5)
        if data.shape[0] >= BAND_MIN_SEEDS:
            ax.fill_between(x, q1[:, k], q3[:, k], color=color, alpha=0.25, linewidth=0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.set_ylim(-0.05, 1.05)
    ax.legend(loc="upper left", fontsize=8, ncol=2)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_curves(logs: Sequence[list[MetricRow]], out_dir: str | Path, title: str = "") -> list[Path]:
    """Render both plot families for one or more seeds' metric logs."""
    logs = [rows for rows in logs if rows]
    if not logs:
        raise ValueError("metric log is empty; nothing to plot")
    skills = _skills(logs[0])
    out_dir = Path(out_dir)
    n = len(logs)
    suffix = f" ({n} seed{'s' if n > 1 else ''})"
    maxima = _stack([_episode_table(rows, skills) for rows in logs])
    progress = _stack([_best_episode(rows, skills) for rows in logs])
    return [
        _draw(maxima, skills, "episode", "max skill reward", (title or "per-skill max reward") + suffix,
              out_dir / "max_reward.svg"),
        _draw(progress, skills, "epoch (32 control steps)", "skill reward",
              (title or "best-episode progression") + suffix, out_dir / "progression.svg"),
    ]


def plot_run(run_dir: str | Path) -> list[Path]:
    """Plot every seed found in an experiment directory into ``<run>/plots``."""
    from skillgraph.harness.experiment import read_metrics

    run_dir = Path(run_dir)
    paths = sorted(run_dir.glob("seed_*/metrics.tsv"), key=lambda p: int(p.parent.name.split("_")[1]))
    if not paths:
        raise ValueError(f"{run_dir}: no metric logs found")
    return plot_curves([read_metrics(p) for p in paths], run_dir / "plots", title=run_dir.name)
