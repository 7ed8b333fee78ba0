"""Experiment orchestration, rate fitting, diagnostics and CSV export."""

from .diagnostics import DEFAULT_GRID, ProbeResult, run_diagnostics
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    RateTable,
    export_csv,
    read_csv,
    run_experiment,
    streaming_moments,
)
from .rates import RateEstimate, fit_rate

__all__ = [
    "DEFAULT_GRID",
    "ExperimentConfig",
    "ExperimentResult",
    "ProbeResult",
    "RateEstimate",
    "RateTable",
    "export_csv",
    "fit_rate",
    "read_csv",
    "run_diagnostics",
    "run_experiment",
    "streaming_moments",
]
