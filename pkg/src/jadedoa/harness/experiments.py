"""Monte Carlo runs behind the three evaluation experiments.

Every (snr, trial) cell draws one snapshot from ``seed = base_seed + trial``
and all methods consume that same snapshot. Output rows are sorted before
writing so files do not depend on worker scheduling.
"""
from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..array_model import SourceSet, random_phase_sources, snr_to_noise_var, synthesize_snapshot
from ..baselines import crb_2d, lasso_2d, music_2d
from ..errors import DomainError
from ..recovery import DoaEstimate, estimate_jade
from ..solver import ialm_solve
from .config import ExperimentConfig

TRIAL_COLUMNS = ["method", "snr_db", "trial", "seed", "k", "theta_true_k", "phi_true_k",
                 "theta_est_k", "phi_est_k", "sq_err", "wall_time_s", "status"]
SUMMARY_COLUMNS = ["method", "snr_db", "rmsae", "mean_wall_time_s"]
SCATTER_COLUMNS = ["method", "trial", "k", "theta", "phi", "status"]
TRACE_COLUMNS = ["iter", "objective", "feasibility_gap"]


@dataclass
class TrialRecord:
    method: str
    snr_db: float
    trial: int
    seed: int
    est: DoaEstimate
    truth: SourceSet
    sq_angular_error: float
    wall_time_s: float
    solver_status: str | None = None
    snapshot_hash: str = ""
    per_source: list = field(default_factory=list)  # [(theta_est, phi_est, sq_err)] in truth order


# -- scoring -----------------------------------------------------------------

def _wrap(d):
    return (np.asarray(d) + np.pi) % (2 * np.pi) - np.pi


def pair_sq_error(est_angles, true_angles) -> np.ndarray:
    """Matrix of weighted squared errors, rows = estimates, cols = truths."""
    est = np.asarray(est_angles, dtype=float).reshape(-1, 2)
    tru = np.asarray(true_angles, dtype=float).reshape(-1, 2)
    dth = _wrap(est[:, None, 0] - tru[None, :, 0])
    dph = est[:, None, 1] - tru[None, :, 1]
    return dth ** 2 * np.cos(tru[None, :, 1]) ** 2 + dph ** 2


def score_estimate(est: DoaEstimate, truth: SourceSet):
    """Match estimates to truths by minimum total weighted squared error.

    Returns a list, in truth order, of ``(theta_est, phi_est, sq_err)``.
    Truths left unmatched (fewer estimates than sources) are scored against
    their nearest estimate, or against zenith (0, 0) when there is none.
    """
    tru = truth.angles
    ests = est.angles
    if ests.shape[0] == 0:
        ests = np.zeros((1, 2))
    cost = pair_sq_error(ests, tru)
    rows, cols = linear_sum_assignment(cost)
    match = {int(c): int(r) for r, c in zip(rows, cols)}
    out = []
    for k in range(tru.shape[0]):
        r = match.get(k, int(np.argmin(cost[:, k])))
        out.append((float(ests[r, 0]), float(ests[r, 1]), float(cost[r, k])))
    return out


def rmsae(records) -> float:
    """Root mean square angular error over records of one method and SNR."""
    records = list(records)
    if not records:
        raise DomainError("rmsae needs at least one record")
    total = sum(r.sq_angular_error for r in records)
    n = sum(r.truth.k for r in records)
    return math.sqrt(total / n)


# -- single trials -----------------------------------------------------------

def trial_snapshot(cfg: ExperimentConfig, sources: SourceSet, snr_db: float, trial: int):
    seed = cfg.base_seed + trial
    truth = random_phase_sources(sources.thetas, sources.phis, seed)
    return synthesize_snapshot(cfg.geometry, truth, snr_to_noise_var(snr_db), seed)


def run_method(method: str, cfg: ExperimentConfig, snap, k: int):
    """Returns (estimate, solver status or None)."""
    if method == "jade":
        est, report = estimate_jade(snap.y, cfg.geometry, cfg.ura, cfg.solver, k)
        return est, report.status
    if method == "music":
        est, _ = music_2d(snap.y, cfg.geometry, k, cfg.baseline_grid)
        return est, None
    if method == "lasso":
        est, _ = lasso_2d(snap.y, cfg.geometry, cfg.baseline_grid, cfg.lasso_lambda, cfg.lasso_max_iters,
                          cfg.lasso_tol, k=k, noise_var=snap.noise_var)
        return est, None
    raise DomainError(f"method {method!r} does not produce per-trial estimates")


def run_trial(task) -> TrialRecord:
    method, snr_db, trial, cfg, sources = task
    snap = trial_snapshot(cfg, sources, snr_db, trial)
    t0 = time.perf_counter()
    est, status = run_method(method, cfg, snap, sources.k)
    elapsed = time.perf_counter() - t0 if cfg.timing else 0.0
    per_source = score_estimate(est, snap.truth)
    return TrialRecord(method, snr_db, trial, snap.seed, est, snap.truth,
                       sum(p[2] for p in per_source), elapsed, status, snap.digest(), per_source)


def run_trials(tasks, workers: int = 1):
    """Evaluate trial tasks, optionally in a process pool; result order is the task order."""
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [run_trial(t) for t in tasks]
    workers = min(workers, os.cpu_count() or 1, len(tasks))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# -- CSV helpers -------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def trial_rows(records):
    rows = []
    for r in records:
        for k, (te, pe, se) in enumerate(r.per_source):
            rows.append({
                "method": r.method, "snr_db": float(r.snr_db), "trial": r.trial, "seed": r.seed, "k": k,
                "theta_true_k": float(r.truth.thetas[k]), "phi_true_k": float(r.truth.phis[k]),
                "theta_est_k": te, "phi_est_k": pe, "sq_err": se,
                "wall_time_s": float(r.wall_time_s), "status": r.solver_status or "ok",
            })
    rows.sort(key=lambda d: (d["method"], d["snr_db"], d["trial"], d["k"]))
    return rows


def _out_dir(cfg: ExperimentConfig, out_dir):
    return Path(out_dir if out_dir is not None else cfg.output_dir)


# -- experiments --------------------------------------------------------------

def sweep_records(cfg: ExperimentConfig):
    """All per-trial records of the SNR sweep (estimating methods only)."""
    methods = [m for m in cfg.methods if m != "crb"]
    tasks = [(m, snr, t, cfg, cfg.sources) for m in methods for snr in cfg.snr_db_list
             for t in range(cfg.n_trials)]
    return run_trials(tasks, cfg.workers)


def run_snr_sweep(cfg: ExperimentConfig, out_dir=None):
    """RMSAE versus SNR for every enabled method.

    Writes ``trials.csv`` and ``summary.csv`` into the output directory and
    returns the summary path. CRB rows are computed analytically with unit
    amplitudes.
    """
    out = _out_dir(cfg, out_dir)
    records = sweep_records(cfg)
    summary = []
    groups = {}
    for r in records:
        groups.setdefault((r.method, r.snr_db), []).append(r)
    for (method, snr), recs in groups.items():
        summary.append({"method": method, "snr_db": float(snr), "rmsae": rmsae(recs),
                        "mean_wall_time_s": float(np.mean([r.wall_time_s for r in recs]))})
    if "crb" in cfg.methods:
        for snr in cfg.snr_db_list:
            bound = crb_2d(cfg.geometry, cfg.sources, snr_to_noise_var(snr)).rmsae_bound
            summary.append({"method": "crb", "snr_db": float(snr), "rmsae": bound, "mean_wall_time_s": 0.0})
    summary.sort(key=lambda d: (d["method"], d["snr_db"]))
    write_csv(out / "trials.csv", TRIAL_COLUMNS, trial_rows(records))
    return write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)


def run_resolution_scatter(cfg: ExperimentConfig, source_pair=None, snr_db=None, out_dir=None):
    """Per-trial estimates for two sources, plus one truth row per source.

    ``source_pair`` is a SourceSet with K = 2 (defaults to ``cfg.sources``).
    Returns the path of ``scatter.csv``.
    """
    sources = cfg.sources if source_pair is None else source_pair
    if sources.k != 2:
        raise DomainError("resolution scatter needs exactly two sources")
    snr = cfg.snr_db_list[0] if snr_db is None else float(snr_db)
    methods = [m for m in cfg.methods if m != "crb"]
    tasks = [(m, snr, t, cfg, sources) for m in methods for t in range(cfg.n_trials)]
    records = run_trials(tasks, cfg.workers)
    rows = [{"method": "truth", "trial": -1, "k": k, "theta": float(t), "phi": float(p), "status": "truth"}
            for k, (t, p) in enumerate(zip(sources.thetas, sources.phis))]
    for r in records:
        for k, (te, pe, _) in enumerate(r.per_source):
            rows.append({"method": r.method, "trial": r.trial, "k": k, "theta": te, "phi": pe,
                         "status": r.solver_status or "ok"})
    rows.sort(key=lambda d: (d["method"], d["trial"], d["k"]))
    return write_csv(_out_dir(cfg, out_dir) / "scatter.csv", SCATTER_COLUMNS, rows)


def run_convergence_trace(cfg: ExperimentConfig, snr_db=None, seed=None, out_dir=None):
    """Objective and feasibility gap per outer iteration of one solve; returns ``trace.csv``."""
    snr = cfg.snr_db_list[0] if snr_db is None else float(snr_db)
    trial = 0 if seed is None else int(seed) - cfg.base_seed
    snap = trial_snapshot(cfg, cfg.sources, snr, trial)
    _, report = ialm_solve(snap.y, cfg.geometry, cfg.ura, cfg.solver, n_sources=cfg.sources.k)
    rows = [{"iter": i + 1, "objective": float(o), "feasibility_gap": float(g)}
            for i, (o, g) in enumerate(zip(report.obj_history, report.feas_history))]
    return write_csv(_out_dir(cfg, out_dir) / "trace.csv", TRACE_COLUMNS, rows)
