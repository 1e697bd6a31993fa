"""Benchmark harness: disturbances, experiments, configuration, export and CLI."""

from .config import Config, ConfigError, load_config, load_preset, parse_config, resolve_config
from .disturbance import DisturbanceKind, DisturbanceSpec, Level, LEVELS, make_disturbance
from .experiment import ExperimentResult, ExperimentSpec, RunRecord, Summary, run_experiment, run_sweep
from .export import aggregate, csv_text, export_results, json_text

__all__ = [
    "Config", "ConfigError", "load_config", "load_preset", "parse_config", "resolve_config",
    "DisturbanceKind", "DisturbanceSpec", "Level", "LEVELS", "make_disturbance",
    "ExperimentResult", "ExperimentSpec", "RunRecord", "Summary", "run_experiment", "run_sweep",
    "aggregate", "csv_text", "export_results", "json_text",
]
