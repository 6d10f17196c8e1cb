"""Command-line entry point: ``skillgraph <verb> ...``.

Exit codes: 0 success, 1 user error (bad input, config or checkpoint),
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from skillgraph import reward_graph as rg
from skillgraph.graph_config import ParseError, lower, parse
from skillgraph.learner.checkpoint import CheckpointError

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


class UserError(Exception):
    pass


def _cmd_train(args) -> int:
    from skillgraph.harness.experiment import load_experiment, run_experiment

    cfg = load_experiment(args.config)
    changes = {}
    if args.seeds:
        changes["seeds"] = tuple(args.seeds)
    if args.output:
        changes["output"] = args.output
    if args.steps:
        changes["trainer"] = tuple((k, v) for k, v in cfg.trainer if k != "total_env_steps") + (
            ("total_env_steps", args.steps),)
    cfg = replace(cfg, **changes) if changes else cfg
    out = run_experiment(cfg, workers=args.workers, plots=not args.no_plots)
    summary = json.loads((out / "summary.json").read_text())
    print(f"run directory: {out}")
    for seed, s in summary["seeds"].items():
        print(f"seed {seed}: {s['active_count']} skills active, all_active={s['all_active']}, "
              f"order_respected={s['order_respected']}, forgetting_violations={len(s['forgetting_violations'])}")
    print(f"success {summary['success_count']}/{len(summary['seeds'])}, median active {summary['median_active']}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    from skillgraph.harness.evaluate import evaluate

    report = evaluate(args.checkpoint, cpg=not args.cpg_off, action_clamp=not args.clamp_off,
                      seeds=list(range(args.seeds)), num_envs=args.envs, deterministic=args.deterministic)
    if args.json:
        print(json.dumps(report, indent=2))
        return EXIT_OK
    print(f"conditions: {', '.join(report['conditions']) or 'as trained'}")
    print(f"{'skill':<10} {'reference':>10} {'evaluated':>10} {'ratio':>7}")
    for name in report["reference"]:
        ratio = report["ratio"][name]
        print(f"{name:<10} {report['reference'][name]:>10.3f} {report['evaluated'][name]:>10.3f} "
              f"{'n/a' if ratio is None else f'{ratio:.3f}':>7}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    status = EXIT_OK
    for path in args.files:
        try:
            graph, _ = lower(parse(Path(path).read_text()))
        except ParseError as exc:
            print(f"{path}:{exc.line}:{exc.column}: {exc.message}")
            status = EXIT_USER
            continue
        except rg.GraphError as exc:
            where = f"{path}:{exc.line}:{exc.column}" if exc.line is not None else path
            for err in exc.errors:
                print(f"{where}: {err}")
            status = EXIT_USER
            continue
        order = " -> ".join(graph.names[k] for k in rg.topological_order(graph))
        print(f"{path}: ok ({graph.node_count} skills, {graph.edge_count} edges; order {order})")
    return status


def _cmd_plot(args) -> int:
    from skillgraph.harness.experiment import read_metrics
    from skillgraph.harness.plots import plot_curves, plot_run

    paths = [Path(p) for p in args.inputs]
    if len(paths) == 1 and paths[0].is_dir():
        written = plot_run(paths[0]) if args.out is None else plot_curves(
            [read_metrics(p) for p in sorted(paths[0].glob("seed_*/metrics.tsv"))], args.out)
    else:
        if args.out is None:
            raise UserError("--out is required when plotting individual metric files")
        written = plot_curves([read_metrics(p) for p in paths], args.out)
    for p in written:
        print(p)
    return EXIT_OK


def _cmd_replay(args) -> int:
    from skillgraph.harness import replay as rp

    if args.record:
        traj = rp.record(args.path, seed=args.seed, steps=args.steps, deterministic=not args.stochastic,
                         cpg=not args.cpg_off, action_clamp=not args.clamp_off)
        out = rp.write_trajectory(traj, args.record)
        print(f"wrote {traj.steps} steps to {out}")
    else:
        traj = rp.read_trajectory(args.path)
    if args.svg:
        print(f"filmstrip: {rp.filmstrip(traj, args.svg)}")
    report = rp.replay(traj)
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["identical"] else EXIT_INTERNAL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skillgraph", description="Skill-graph curriculum training tools.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)

    t = sub.add_parser("train", help="run an experiment file (.rexp)")
    t.add_argument("config")
    t.add_argument("--seeds", type=int, nargs="+", help="override the seed list")
    t.add_argument("--output", help="override the output directory")
    t.add_argument("--steps", type=int, help="override trainer.total_env_steps")
    t.add_argument("--workers", type=int, default=1, help="seeds trained in parallel processes")
    t.add_argument("--no-plots", action="store_true")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="evaluate a checkpoint, optionally with deployment ablations")
    e.add_argument("checkpoint")
    e.add_argument("--cpg-off", action="store_true", help="zero-fill the CPG observation slots")
    e.add_argument("--clamp-off", action="store_true", help="force the clamp coefficient to 1")
    e.add_argument("--seeds", type=int, default=3, help="number of evaluation seeds")
    e.add_argument("--envs", type=int, default=16)
    e.add_argument("--deterministic", action="store_true", help="use the mean action")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=_cmd_evaluate)

    v = sub.add_parser("validate-graph", help="check .rgraph files")
    v.add_argument("files", nargs="+")
    v.set_defaults(func=_cmd_validate)

    pl = sub.add_parser("plot", help="plot metric logs or a run directory")
    pl.add_argument("inputs", nargs="+", help="run directory or metrics.tsv files (one per seed)")
    pl.add_argument("--out", help="output directory for the SVG files")
    pl.set_defaults(func=_cmd_plot)

    r = sub.add_parser("replay", help="verify a trajectory dump, or record one from a checkpoint")
    r.add_argument("path", help="trajectory .tsv, or a checkpoint with --record")
    r.add_argument("--record", metavar="OUT", help="record a trajectory from the checkpoint to OUT")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--steps", type=int)
    r.add_argument("--stochastic", action="store_true")
    r.add_argument("--cpg-off", action="store_true")
    r.add_argument("--clamp-off", action="store_true")
    r.add_argument("--svg", help="also draw a pose filmstrip to this SVG file")
    r.set_defaults(func=_cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USER
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: line {exc.line}, column {exc.column}: {exc.message}", file=sys.stderr)
        return EXIT_USER
    except (UserError, rg.GraphError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
