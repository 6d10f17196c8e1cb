"""Experiment orchestration: configs, training runs, evaluation, plots, replay."""

from skillgraph.harness.configs import config_path
from skillgraph.harness.experiment import (
    ExperimentConfig, config_diff, load_experiment, parse_experiment, read_metrics, run_experiment,
    serialize_experiment,
)

__all__ = [
    "ExperimentConfig", "config_diff", "config_path", "load_experiment", "parse_experiment",
    "read_metrics", "run_experiment", "serialize_experiment",
]
