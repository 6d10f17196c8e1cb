"""Experiment configs (``.rexp``), training runs and their artifact directories.

An experiment file uses the same line-oriented family as ``.rgraph``::

    version 1
    graph = reference.rgraph
    variant = graph            # graph | linear | tree | single | sum
    ego_frame = on
    cpg = on
    action_clamp = on
    profile = desk
    seeds = 0 1 2
    output = runs/reference
    trainer.total_env_steps = 2000000

Relative paths resolve against the experiment file, then the bundled
configs. A relative ``output`` is placed under ``$SKILLGRAPH_OUTPUT_ROOT``
when that is set.

Artifact layout (version 1)::

    <output>/LAYOUT           "skillgraph-run 1"
    <output>/config.rexp      snapshot of the experiment
    <output>/graph.rgraph     snapshot of the measurement graph
    <output>/training.rgraph  snapshot of the training graph, if it differs
    <output>/summary.json     per-seed activation results
    <output>/plots/*.svg
    <output>/seed_<s>/metrics.tsv  stats.tsv  checkpoint.skg  summary.json
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from skillgraph import reward_graph as rg
from skillgraph.graph_config import ParseError, lower, parse
from skillgraph.harness.configs import resolve
from skillgraph.learner import TrainerConfig, profile, save_checkpoint, train
from skillgraph.learner.config import PROFILES
from skillgraph.task import VARIANTS, CurriculumTask, MetricRow, Toggles

log = logging.getLogger(__name__)

LAYOUT_VERSION = 1
OUTPUT_ROOT_ENV = "SKILLGRAPH_OUTPUT_ROOT"
METRICS_MAGIC = "# skillgraph-metrics v1"
METRICS_COLUMNS = ("episode", "epoch", "env_steps", "skill", "reward", "max_reward", "achievement", "active")
FORGETTING_WINDOW = 10
_TOGGLES = ("ego_frame", "cpg", "action_clamp")
_BOOL = {"on": True, "true": True, "yes": True, "1": True,
         "off": False, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class ExperimentConfig:
    graph: str
    variant: str = "graph"
    training_graph: str | None = None
    ego_frame: bool = True
    cpg: bool = True
    action_clamp: bool = True
    profile: str = "desk"
    seeds: tuple[int, ...] = (0,)
    output: str = "runs/experiment"
    trainer: tuple[tuple[str, object], ...] = ()
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ValueError("seeds must be distinct non-negative integers")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown trainer profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if self.variant in ("linear", "tree") and self.training_graph is None:
            raise ValueError(f"variant {self.variant} needs a training_graph file")
        if self.variant not in ("linear", "tree") and self.training_graph is not None:
            raise ValueError("training_graph only applies to the linear and tree variants")
        known = {f.name for f in fields(TrainerConfig)} - {"seed"}
        for key, _ in self.trainer:
            if key not in known:
                raise ValueError(f"unknown trainer setting {key!r}")

    @property
    def toggles(self) -> Toggles:
        return Toggles(ego_frame=self.ego_frame, cpg=self.cpg, action_clamp=self.action_clamp,
                       clamp_in_observation=self.action_clamp)

    def trainer_config(self, seed: int) -> TrainerConfig:
        return profile(self.profile, seed=seed, **dict(self.trainer))

    def output_dir(self) -> Path:
        out = Path(self.output)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if not out.is_absolute() and root:
            out = Path(root) / out
        return out

    def graph_path(self) -> Path:
        return resolve(self.graph, Path(self.base_dir) if self.base_dir else None)

    def training_graph_path(self) -> Path | None:
        if self.training_graph is None:
            return None
        return resolve(self.training_graph, Path(self.base_dir) if self.base_dir else None)


def _trainer_value(key: str, raw: str):
    kind = {f.name: f.type for f in fields(TrainerConfig)}[key]
    if key == "hidden":
        return tuple(int(x) for x in re.split(r"[,\s]+", raw.strip()) if x)
    if key == "kl_target" and raw.lower() == "none":
        return None
    if key == "dtype":
        return raw
    if "int" in str(kind):
        return int(float(raw)) if float(raw).is_integer() else int(raw)
    return float(raw)


def parse_experiment(text: str, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse a ``.rexp`` document; errors are ParseError with line and column."""
    kw: dict = {}
    trainer: list[tuple[str, object]] = []
    seen_version = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        col = len(body) - len(body.lstrip()) + 1
        stripped = body.strip()
        if not seen_version:
            m = re.fullmatch(r"version\s+(\d+)", stripped)
            if not m:
                raise ParseError("expected 'version N' as the first statement", lineno, col)
            if int(m.group(1)) != 1:
                raise ParseError(f"unsupported experiment version {m.group(1)}", lineno, col + 8)
            seen_version = True
            continue
        m = re.fullmatch(r"([A-Za-z_][\w.]*)\s*=\s*(.*)", stripped)
        if not m:
            raise ParseError("expected 'key = value'", lineno, col)
        key, value = m.group(1), m.group(2).strip()
        vcol = col + stripped.index(value) if value else col + len(stripped)
        if not value:
            raise ParseError(f"missing value for {key}", lineno, vcol)
        try:
            if key.startswith("trainer."):
                name = key[len("trainer."):]
                if name not in {f.name for f in fields(TrainerConfig)} or name == "seed":
                    raise ParseError(f"unknown trainer setting {name!r}", lineno, col)
                trainer.append((name, _trainer_value(name, value)))
                continue
            if key in kw:
                raise ParseError(f"duplicate key {key!r}", lineno, col)
            if key in _TOGGLES:
                if value.lower() not in _BOOL:
                    raise ParseError(f"{key} must be on or off", lineno, vcol)
                kw[key] = _BOOL[value.lower()]
            elif key == "seeds":
                kw[key] = tuple(int(s) for s in re.split(r"[,\s]+", value) if s)
            elif key in ("graph", "training_graph", "variant", "profile", "output"):
                kw[key] = value
            else:
                raise ParseError(f"unknown key {key!r}", lineno, col)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad value for {key}: {exc}", lineno, vcol) from None
    if not seen_version:
        raise ParseError("empty experiment file", 1, 1)
    if "graph" not in kw:
        raise ParseError("missing required key 'graph'", 1, 1)
    try:
        return ExperimentConfig(**kw, trainer=tuple(trainer),
                                base_dir=str(base_dir) if base_dir is not None else None)
    except ValueError as exc:
        raise ParseError(str(exc), 1, 1) from None


def load_experiment(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_experiment(path.read_text(), base_dir=path.parent)


def serialize_experiment(cfg: ExperimentConfig) -> str:
    onoff = {True: "on", False: "off"}
    lines = ["version 1", f"graph = {cfg.graph}", f"variant = {cfg.variant}"]
    if cfg.training_graph is not None:
        lines.append(f"training_graph = {cfg.training_graph}")
    lines += [f"{t} = {onoff[getattr(cfg, t)]}" for t in _TOGGLES]
    lines += [f"profile = {cfg.profile}", "seeds = " + " ".join(map(str, cfg.seeds)),
              f"output = {cfg.output}"]
    for key, value in cfg.trainer:
        if isinstance(value, tuple):
            value = ",".join(map(str, value))
        lines.append(f"trainer.{key} = {value}")
    return "\n".join(lines) + "\n"


def config_diff(a: ExperimentConfig, b: ExperimentConfig) -> list[str]:
    """Mechanisms that differ between two experiments (seeds and output ignored).

    The reward variant and its training graph count as one mechanism.
    """
    out = []
    if (a.variant, a.training_graph) != (b.variant, b.training_graph):
        out.append("reward")
    for name in ("graph", *_TOGGLES, "profile"):
        if getattr(a, name) != getattr(b, name):
            out.append(name)
    if dict(a.trainer) != dict(b.trainer):
        out.append("trainer")
    return out


# ------------------------------------------------------------------ metric log
def write_metrics(rows: list[MetricRow], path: Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(METRICS_MAGIC + "\n")
        fh.write("\t".join(METRICS_COLUMNS) + "\n")
        for r in rows:
            fh.write(f"{r.episode}\t{r.epoch}\t{r.env_steps}\t{r.skill}\t{r.reward!r}\t"
                     f"{r.max_reward!r}\t{r.achievement!r}\t{int(r.active)}\n")


def read_metrics(path: str | Path) -> list[MetricRow]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != METRICS_MAGIC:
        raise ValueError(f"{path}: not a metric log (missing '{METRICS_MAGIC}' header)")
    if len(lines) < 2 or tuple(lines[1].split("\t")) != METRICS_COLUMNS:
        raise ValueError(f"{path}: unexpected metric columns")
    rows = []
    for n, line in enumerate(lines[2:], start=3):
        parts = line.split("\t")
        if len(parts) != len(METRICS_COLUMNS):
            raise ValueError(f"{path}:{n}: expected {len(METRICS_COLUMNS)} fields")
        rows.append(MetricRow(int(parts[0]), int(parts[1]), int(parts[2]), parts[3], float(parts[4]),
                              float(parts[5]), float(parts[6]), parts[7] == "1"))
    return rows


def episode_maxima(rows: list[MetricRow], skills, epochs_per_episode: int | None = None) -> np.ndarray:
    """(episodes, skills) array of per-episode max reward.

    With ``epochs_per_episode`` given, a trailing incomplete episode is dropped.
    """
    index = {s: k for k, s in enumerate(skills)}
    n_ep = max((r.episode for r in rows), default=-1) + 1
    out = np.zeros((n_ep, len(skills)))
    last_epoch = np.full(n_ep, -1)
    for r in rows:
        out[r.episode, index[r.skill]] = max(out[r.episode, index[r.skill]], r.max_reward)
        last_epoch[r.episode] = max(last_epoch[r.episode], r.epoch)
    if epochs_per_episode is not None and n_ep and last_epoch[-1] < epochs_per_episode - 1:
        out = out[:-1]
    return out


def analyze_seed(graph: rg.RewardGraph, rows: list[MetricRow], first_active: dict[int, int | None],
                 budget: int, epochs_per_episode: int) -> dict:
    """Activation and forgetting results for one training run.

    Success means every skill became active within ``budget`` env steps.
    Forgetting is checked on the final complete episodes: for every edge
    whose source skill ever cleared the passing score, the source's episode
    max must stay at or above that score.
    """
    times = {k: (t if t is not None and t <= budget else None) for k, t in first_active.items()}
    maxima = episode_maxima(rows, graph.names, epochs_per_episode)
    violations = []
    if len(maxima):
        tail = maxima[-FORGETTING_WINDOW:]
        first_tail = len(maxima) - len(tail)
        for e in graph.edges:
            if (maxima[:, e.src] > e.passing_score).any():
                for k, value in enumerate(tail[:, e.src]):
                    if value < e.passing_score:
                        violations.append({"episode": first_tail + k, "skill": graph.names[e.src],
                                           "max_reward": float(value), "passing_score": e.passing_score})
    return {
        "first_activation": {graph.names[k]: t for k, t in sorted(times.items())},
        "active_count": sum(t is not None for t in times.values()),
        "all_active": all(t is not None for t in times.values()),
        "order_respected": rg.activation_order_respected(graph, times),
        "episodes": int(len(maxima)),
        "forgetting_violations": violations,
        "final_episode_max": {s: float(v) for s, v in zip(graph.names, maxima[-1])} if len(maxima) else {},
    }


# ------------------------------------------------------------------ running
def load_graphs(cfg: ExperimentConfig):
    """Measurement graph, bindings, training graph and their source texts."""
    text = cfg.graph_path().read_text()
    graph, bindings = lower(parse(text))
    training = None
    ttext = None
    tpath = cfg.training_graph_path()
    if tpath is not None:
        ttext = tpath.read_text()
        training, tbind = lower(parse(ttext))
        if training.names != graph.names or tbind != bindings:
            raise ValueError("training graph must declare the same skills as the measurement graph")
    return graph, bindings, training, text, ttext


def make_task(graph, bindings, training, variant: str, toggles: Toggles, num_envs: int, seed: int,
              episode_length: int, record_metrics: bool = True) -> CurriculumTask:
    return CurriculumTask(graph, bindings, num_envs=num_envs, seed=seed, variant=variant, toggles=toggles,
                          training_graph=training, episode_length=episode_length,
                          record_metrics=record_metrics)


def run_seed(cfg: ExperimentConfig, seed: int, out_dir: Path | None = None) -> dict:
    """Train one seed and write its artifacts; returns the seed summary."""
    out_dir = Path(out_dir or cfg.output_dir()) / f"seed_{seed}"
    out_dir.mkdir(parents=True, exist_ok=True)
    graph, bindings, training, gtext, ttext = load_graphs(cfg)
    tcfg = cfg.trainer_config(seed)
    task = make_task(graph, bindings, training, cfg.variant, cfg.toggles, tcfg.num_envs, seed,
                     tcfg.episode_length)
    t0 = time.perf_counter()

    def progress(update, result):
        if update % 100 == 0:
            log.info("seed %d update %d env_steps %d reward %.3f active %d/%d", seed, update,
                     result.env_steps, result.stats[-1]["mean_reward"],
                     sum(v is not None for v in task.metrics.first_active.values()), graph.node_count)

    result = train(task, tcfg, progress)
    task.metrics.close()
    elapsed = time.perf_counter() - t0
    write_metrics(task.metrics.rows, out_dir / "metrics.tsv")
    with open(out_dir / "stats.tsv", "w", newline="\n") as fh:
        keys = [k for k in result.stats[0] if k != "seconds"]
        fh.write("\t".join(keys) + "\n")
        for s in result.stats:
            fh.write("\t".join(repr(s[k]) for k in keys) + "\n")
    metadata = {
        "graph": gtext, "training_graph": ttext, "variant": cfg.variant,
        "toggles": {"ego_frame": cfg.ego_frame, "cpg": cfg.cpg, "action_clamp": cfg.action_clamp},
        "episode_length": tcfg.episode_length, "cpg_frequencies": list(task.cpg.frequencies),
        "obs_layout": [list(s) for s in task.layout.slots()], "seed": seed,
        "env_steps": result.env_steps, "trainer": tcfg.to_dict(),
    }
    save_checkpoint(result.params, out_dir / "checkpoint.skg", result.normalizer, metadata)
    epochs = math.ceil(tcfg.episode_length / task.metrics.epoch_length)
    summary = analyze_seed(graph, task.metrics.rows, task.metrics.first_active, tcfg.total_env_steps, epochs)
    summary.update(seed=seed, env_steps=result.env_steps, variant=cfg.variant)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("seed %d done in %.0fs: %d/%d skills active", seed, elapsed, summary["active_count"],
             graph.node_count)
    return summary


def _run_seed_job(args):
    cfg, seed, out = args
    return run_seed(cfg, seed, out)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, plots: bool = True) -> Path:
    """Train every seed, then write the experiment summary and plots.

    Seeds are independent; with ``workers > 1`` they run in separate
    processes, each reproducing the single-process result exactly.
    """
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    (out / "LAYOUT").write_text(f"skillgraph-run {LAYOUT_VERSION}\n")
    (out / "config.rexp").write_text(serialize_experiment(cfg))
    *_, text, ttext = load_graphs(cfg)  # fail fast on config errors before any training
    (out / "graph.rgraph").write_text(text)  # the exact graphs trained against
    if ttext is not None:
        (out / "training.rgraph").write_text(ttext)
    jobs = [(cfg, s, out) for s in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_seed_job, jobs))
    else:
        summaries = [_run_seed_job(j) for j in jobs]
    write_summary(out, summaries)
    if plots:
        from skillgraph.harness.plots import plot_run
        plot_run(out)
    return out


def write_summary(out: Path, summaries: list[dict]) -> dict:
    counts = [s["active_count"] for s in summaries]
    doc = {
        "layout_version": LAYOUT_VERSION,
        "seeds": {str(s["seed"]): s for s in summaries},
        "success_count": sum(s["all_active"] for s in summaries),
        "median_active": float(np.median(counts)),
    }
    (out / "summary.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def collect_summary(out: Path) -> dict:
    """Rebuild the experiment summary from whatever seed directories exist."""
    summaries = [json.loads(p.read_text()) for p in sorted(Path(out).glob("seed_*/summary.json"))]
    if not summaries:
        raise FileNotFoundError(f"{out}: no completed seeds")
    return write_summary(Path(out), sorted(summaries, key=lambda s: s["seed"]))
