"""Experiment configuration, sweep orchestration, and the command-line tool."""

from .config import ExperimentSpec, dump_config, load_config, parse_config, save_config
from .experiments import CSV_COLUMNS, ResultRow, ResultTable, emit_csv, evaluate_policy, read_csv, run_experiment

__all__ = [
    "CSV_COLUMNS",
    "ExperimentSpec",
    "ResultRow",
    "ResultTable",
    "dump_config",
    "emit_csv",
    "evaluate_policy",
    "load_config",
    "parse_config",
    "read_csv",
    "run_experiment",
    "save_config",
]
