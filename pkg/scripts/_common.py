"""Shared argument handling for the experiment scripts."""
import argparse

from jadedoa.harness import ExperimentConfig, load_config
from jadedoa.harness.config import FULL_TRIALS


def parse(description, default_config):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", default=default_config)
    p.add_argument("--out-dir")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--full", action="store_true", help=f"{FULL_TRIALS} Monte Carlo trials")
    args = p.parse_args()
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.full:
        changes["n_trials"] = FULL_TRIALS
    if args.trials is not None:
        changes["n_trials"] = args.trials
    if args.workers is not None:
        changes["workers"] = args.workers
    cfg = cfg.replace(**changes) if changes else cfg
    return cfg, args.out_dir or cfg.output_dir
