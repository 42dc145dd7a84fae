"""Experiment sweeps, summaries, plots and the command line entry point."""

from .experiment import (
    METHODS,
    PRESETS,
    ExperimentSpec,
    SummaryRow,
    TrialRecord,
    default_lambda_grid,
    parse_config,
    records_from_csv,
    records_to_csv,
    run_experiment,
    run_trial,
    spec_to_config,
    summarize,
    summary_from_csv,
    summary_to_csv,
    trial_seed,
)
from .plot import emit_plot, render_svg

__all__ = [
    "METHODS", "PRESETS", "ExperimentSpec", "SummaryRow", "TrialRecord", "default_lambda_grid",
    "parse_config", "records_from_csv", "records_to_csv", "run_experiment", "run_trial",
    "spec_to_config", "summarize", "summary_from_csv", "summary_to_csv", "trial_seed",
    "emit_plot", "render_svg",
]
