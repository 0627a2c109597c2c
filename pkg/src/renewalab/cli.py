"""Command-line runner: ``renewalab <subcommand> [-c config] [--seed N] [--workers N] [--out DIR]``.

Exit status is 0 when every check passes, 2 when the experiment ran but a
check failed, and 1 on any error (bad config, invalid model, I/O).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__, catalog
from .config import EXPERIMENTS, ExperimentConfig, default_config, load_config
from .errors import ConfigError, ConsistencyError, DecompositionError, RenewalabError
from .experiments import ExperimentResult, Table, run_experiment
from .rng import SEED_ENV, resolve_seed

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
# raised by a module when its own built-in consistency assertion fails
ASSERTION_ERRORS = (ConsistencyError, DecompositionError)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: str, table: Table) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.header)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])


def _config_hash(cfg: ExperimentConfig, seed: int, workers: int) -> str:
    blob = json.dumps({"experiment": cfg.experiment, "model": cfg.model, "params": cfg.params,
                       "seed": seed, "workers": workers}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="renewalab", description="Renewal-theorem numerical laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("-c", "--config", help="YAML experiment config")
        sp.add_argument("--seed", type=int, help=f"overrides {SEED_ENV} and the config seed")
        sp.add_argument("--workers", type=int, help="worker threads (default: logical cores)")
        sp.add_argument("--out", help="output directory")
        if name == "renewal-run":
            sp.add_argument("--tau", type=_parse_floats, help="comma-separated tau ladder")
            sp.add_argument("--paths", type=int, help="Monte Carlo paths per tau")
        if name in ("dyadic-check", "oscillatory-check"):
            sp.add_argument("--suite", help="which group of checks to run")
    sub.add_parser("list-catalog")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-catalog":
        sys.stdout.write(catalog.listing())
        return EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else default_config(args.command)
        if cfg.experiment != args.command:
            raise ConfigError(f"config describes '{cfg.experiment}' but the subcommand is '{args.command}'")
        if getattr(args, "tau", None):
            cfg.params["taus"] = args.tau
        if getattr(args, "paths", None):
            cfg.params["n_paths"] = args.paths
        if getattr(args, "suite", None):
            cfg.params["suite"] = args.suite
        seed = resolve_seed(args.seed, cfg.seed)
        workers = args.workers or (cfg.workers if args.config else None) or os.cpu_count() or 1
        out = args.out or cfg.output
        os.makedirs(out, exist_ok=True)
        start = time.perf_counter()
        try:
            result = run_experiment(cfg, seed, workers)
        except ASSERTION_ERRORS as exc:
            print(f"FAIL {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_FAILED
        wall = time.perf_counter() - start
        files = []
        for name, table in result.tables.items():
            path = os.path.join(out, f"{name}.csv")
            write_csv(path, table)
            files.append(os.path.basename(path))
        manifest = {
            "experiment": cfg.experiment,
            "config": cfg.source,
            "config_sha256": _config_hash(cfg, seed, workers),
            "seed": seed,
            "workers": workers,
            "versions": {"renewalab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                         "python": platform.python_version()},
            "outputs": sorted(files),
            "checks": [{"label": c.label, "passed": c.passed, "detail": c.detail} for c in result.checks],
            "wall_time_s": wall,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    except (RenewalabError, OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    _report(result)
    return EXIT_OK if result.passed else EXIT_FAILED


def _report(result: ExperimentResult) -> None:
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.label}: {c.detail}")


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
