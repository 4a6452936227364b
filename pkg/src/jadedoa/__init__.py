"""Gridless single-snapshot 2D direction finding for uniform circular arrays.

The estimator maps the circular array onto a virtual rectangular array with a
jointly optimized linear transform and recovers a two-level Toeplitz
covariance through a low-rank augmented Lagrangian solve. Paired
(azimuth, elevation) estimates come from 2D ESPRIT. Baseline estimators and
the deterministic CRB are provided for comparison.
"""
from .array_model import (
    Snapshot,
    SourceSet,
    UcaGeometry,
    load_snapshot,
    save_snapshot,
    snr_to_noise_var,
    synthesize_snapshot,
    uca_steering,
)
from .baselines import CrbResult, SpectrumMap, crb_2d, lasso_2d, music_2d
from .errors import (
    DegenerateGeometryError,
    DomainError,
    FormatError,
    InfeasibleFrequencyError,
    NumericalError,
)
from .mlt import MltParams, mlt_build, mlt_project, mlt_residual
from .recovery import DoaEstimate, esprit_2d, estimate_jade, reconstruct_mlt
from .solver import SolverConfig, SolverReport, SolverState, ialm_solve
from .virtual_manifold import (
    AngularGrid,
    UraConfig,
    angles_to_freqs,
    build_constraint_grid,
    freqs_to_angles,
    init_transform,
    ura_steering,
)

__version__ = "0.1.0"

__all__ = [
    "AngularGrid", "CrbResult", "DegenerateGeometryError", "DoaEstimate", "DomainError", "FormatError",
    "InfeasibleFrequencyError", "MltParams", "NumericalError", "Snapshot", "SolverConfig", "SolverReport",
    "SolverState", "SourceSet", "SpectrumMap", "UcaGeometry", "UraConfig", "angles_to_freqs",
    "build_constraint_grid", "crb_2d", "esprit_2d", "estimate_jade", "freqs_to_angles", "ialm_solve",
    "init_transform", "lasso_2d", "load_snapshot", "mlt_build", "mlt_project", "mlt_residual",
    "music_2d", "reconstruct_mlt", "save_snapshot", "snr_to_noise_var", "synthesize_snapshot",
    "uca_steering", "ura_steering",
]
