"""Monte Carlo experiments with their scoring and figure output."""
from .config import ExperimentConfig, load_config
from .experiments import (TrialRecord, rmsae, run_convergence_trace, run_resolution_scatter,
                          run_snr_sweep, score_estimate)
from .plotting import emit_plot

__all__ = ["ExperimentConfig", "load_config", "TrialRecord", "rmsae", "score_estimate",
           "run_snr_sweep", "run_resolution_scatter", "run_convergence_trace", "emit_plot"]
