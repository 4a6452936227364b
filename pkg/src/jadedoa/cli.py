"""Command-line entry point: ``jadedoa <subcommand> ...``.

Exit codes: 0 on success, 2 for bad input files or arguments, 3 for
numerical failures (non-finite solver iterates, singular Fisher matrices).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .array_model import load_snapshot, random_phase_sources, save_snapshot, snr_to_noise_var, synthesize_snapshot
from .baselines import crb_2d, lasso_2d, music_2d
from .errors import DegenerateGeometryError, FormatError, NumericalError
from .harness.config import FULL_TRIALS, ExperimentConfig, load_config
from .harness.experiments import run_convergence_trace, run_resolution_scatter, run_snr_sweep
from .harness.plotting import emit_plot
from .recovery import estimate_jade

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _config(path) -> ExperimentConfig:
    return ExperimentConfig() if path is None else load_config(path)


def _write_json(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def cmd_simulate(args):
    cfg = _config(args.config)
    truth = random_phase_sources(cfg.sources.thetas, cfg.sources.phis, args.seed)
    noise_var = 0.0 if args.noiseless else snr_to_noise_var(args.snr_db)
    snap = synthesize_snapshot(cfg.geometry, truth, noise_var, args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_snapshot(snap, args.out)


def cmd_estimate(args):
    cfg = _config(args.config)
    snap = load_snapshot(args.snapshot)
    geom = snap.geometry
    out = {"method": args.method, "k": args.k}
    if args.method == "jade":
        est, report = estimate_jade(snap.y, geom, cfg.ura, cfg.solver, args.k)
        out["report"] = report.to_dict()
    elif args.method == "music":
        est, _ = music_2d(snap.y, geom, args.k, cfg.baseline_grid)
    else:
        est, _ = lasso_2d(snap.y, geom, cfg.baseline_grid, cfg.lasso_lambda, cfg.lasso_max_iters,
                          cfg.lasso_tol, k=args.k, noise_var=snap.noise_var)
    out["estimate"] = est.to_dict()
    _write_json(out, args.out)


def cmd_benchmark(args):
    cfg = _config(args.config)
    changes = {}
    if args.full:
        changes["n_trials"] = FULL_TRIALS
    if args.trials is not None:
        changes["n_trials"] = args.trials
    if args.workers is not None:
        changes["workers"] = args.workers
    if args.no_timing:
        changes["timing"] = False
    cfg = cfg.replace(**changes) if changes else cfg
    runner = {"snr": run_snr_sweep, "resolution": run_resolution_scatter,
              "convergence": run_convergence_trace}[args.experiment]
    path = runner(cfg, out_dir=args.out_dir)
    print(path)


def cmd_crb(args):
    cfg = _config(args.config)
    res = crb_2d(cfg.geometry, cfg.sources, snr_to_noise_var(args.snr_db))
    _write_json({
        "snr_db": args.snr_db,
        "rmsae_bound": res.rmsae_bound,
        "rmsae_bound_deg": math.degrees(res.rmsae_bound),
        "per_source": [b.tolist() for b in res.per_source],
    }, None)


def cmd_plot(args):
    print(emit_plot(args.input, args.kind, args.out))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jadedoa", description="Single-snapshot 2D DOA estimation for circular arrays")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize one snapshot and write it as JSON")
    s.add_argument("--config")
    s.add_argument("--snr-db", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--noiseless", action="store_true", help="ignore --snr-db and add no noise")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate directions from a snapshot file")
    s.add_argument("--method", choices=("jade", "music", "lasso"), required=True)
    s.add_argument("--snapshot", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--config")
    s.add_argument("--out", help="output JSON path (stdout when omitted)")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("benchmark", help="run one Monte Carlo experiment and write CSVs")
    s.add_argument("--config")
    s.add_argument("--experiment", choices=("snr", "resolution", "convergence"), required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--full", action="store_true", help=f"use {FULL_TRIALS} trials")
    s.add_argument("--no-timing", action="store_true", help="write zero wall times for byte-stable CSVs")
    s.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("crb", help="print the CRB for the configured sources as JSON")
    s.add_argument("--config")
    s.add_argument("--snr-db", type=float, required=True)
    s.set_defaults(func=cmd_crb)

    s = sub.add_parser("plot", help="render an experiment CSV as SVG")
    s.add_argument("--kind", choices=("line", "scatter", "trace"), required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (NumericalError, DegenerateGeometryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
