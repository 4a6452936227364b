"""Experiment configuration and its YAML file format.

Example file::

    geometry: {n_sensors: 16, radius_wl: 1.0}
    ura: {m_x: 3, m_y: 3, d_x_wl: 0.5, d_y_wl: 0.5}
    solver:
      lambda_t: 0.1
      lambda_x: 0.5
      grid: {n_theta: 24, n_phi: 7}
    sources: {theta_deg: [17.19, -68.75], phi_deg: [34.38, 57.3]}
    snr_db_list: [0, 10, 20]
    n_trials: 50
    methods: [jade, music, lasso, crb]

Angles may be given in radians (``theta``/``phi``) or degrees
(``theta_deg``/``phi_deg``). Unknown keys are rejected.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..array_model import SourceSet, UcaGeometry
from ..baselines import one_degree_grid
from ..errors import FormatError
from ..solver import SolverConfig
from ..virtual_manifold import AngularGrid, UraConfig, build_constraint_grid

METHODS = ("jade", "music", "lasso", "crb")
DESK_TRIALS = 50
FULL_TRIALS = 500


def _default_sources():
    return SourceSet((0.3, -1.2), (0.6, 1.0))


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: UcaGeometry = field(default_factory=UcaGeometry)
    ura: UraConfig = field(default_factory=UraConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sources: SourceSet = field(default_factory=_default_sources)
    snr_db_list: tuple = (0.0, 10.0, 20.0)
    n_trials: int = DESK_TRIALS
    base_seed: int = 0
    methods: tuple = METHODS
    output_dir: str = "results"
    baseline_grid: AngularGrid = field(default_factory=one_degree_grid)
    lasso_lambda: float | None = None
    lasso_max_iters: int = 500
    lasso_tol: float = 1e-8
    workers: int = 1
    timing: bool = True  # False writes 0.0 wall times so CSVs are byte-reproducible

    def __post_init__(self):
        if self.n_trials < 1:
            raise FormatError("n_trials must be at least 1")
        if len(self.snr_db_list) == 0:
            raise FormatError("snr_db_list must not be empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise FormatError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(self, "methods", tuple(self.methods))

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _take(d: dict, section: str, allowed):
    d = dict(d or {})
    extra = set(d) - set(allowed)
    if extra:
        raise FormatError(f"unknown key(s) in '{section}': {sorted(extra)}")
    return d


def _grid(d, section, default):
    if d is None:
        return default
    d = _take(d, section, ("n_theta", "n_phi"))
    try:
        return build_constraint_grid(int(d["n_theta"]), int(d["n_phi"]))
    except KeyError as exc:
        raise FormatError(f"'{section}' needs n_theta and n_phi") from exc


def _angles(d, section):
    d = _take(d, section, ("theta", "phi", "theta_deg", "phi_deg"))
    if "theta_deg" in d or "phi_deg" in d:
        th = [math.radians(x) for x in d.get("theta_deg", [])]
        ph = [math.radians(x) for x in d.get("phi_deg", [])]
    else:
        th, ph = d.get("theta", []), d.get("phi", [])
    return tuple(float(x) for x in th), tuple(float(x) for x in ph)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = _take(raw, "<root>", [f.name for f in dataclasses.fields(ExperimentConfig)])
    kw = {}
    try:
        if "geometry" in raw:
            kw["geometry"] = UcaGeometry(**_take(raw["geometry"], "geometry", ("n_sensors", "radius_wl")))
        if "ura" in raw:
            kw["ura"] = UraConfig(**_take(raw["ura"], "ura", ("m_x", "m_y", "d_x_wl", "d_y_wl")))
        if "solver" in raw:
            names = [f.name for f in dataclasses.fields(SolverConfig)]
            s = _take(raw["solver"], "solver", names)
            if "grid" in s:
                s["grid"] = _grid(s["grid"], "solver.grid", None)
            if "eps" in s and isinstance(s["eps"], str):
                s["eps"] = float(s["eps"])
            kw["solver"] = SolverConfig(**s)
        if "sources" in raw:
            th, ph = _angles(raw["sources"], "sources")
            kw["sources"] = SourceSet(th, ph)
        if "baseline_grid" in raw:
            kw["baseline_grid"] = _grid(raw["baseline_grid"], "baseline_grid", None)
        for key in ("snr_db_list", "methods"):
            if key in raw:
                kw[key] = tuple(raw[key])
        for key in ("n_trials", "base_seed", "output_dir", "lasso_lambda", "lasso_max_iters",
                    "lasso_tol", "workers", "timing"):
            if key in raw:
                kw[key] = raw[key]
        return ExperimentConfig(**kw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"invalid config: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise FormatError(f"{path}: invalid YAML ({exc})") from exc
    return config_from_dict(raw or {})
