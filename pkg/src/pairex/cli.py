"""Command line entry point: ``pairex evolve|oracle|identities|sweep --config FILE``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import SimulationConfig, U64_MAX, load_config, serialize_config
from .conserved import diagnostics_header
from .dynamics import Trajectory, evolve
from .errors import ConfigError, IntegrationError, PairexError
from .kernelalg import write_snapshot

log = logging.getLogger("pairex")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IDENTITIES = 4


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def thread_count(default: int | None = None) -> int:
    raw = os.environ.get("PAIREX_THREADS")
    if raw is None:
        return default or os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"PAIREX_THREADS must be a positive integer, got '{raw}'") from None
    if n < 1:
        raise ConfigError(f"PAIREX_THREADS must be a positive integer, got '{raw}'")
    return n


def write_trajectory(traj: Trajectory, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(diagnostics_header(traj.grid.dim))
        for rec in traj.records:
            writer.writerow([_fmt(x) for x in rec.row()])
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    for i, s in enumerate(traj.snapshots):
        write_snapshot(snaps / f"phi_{i:06d}.bin", s.phi, traj.grid, "field")
        write_snapshot(snaps / f"zeta_{i:06d}.bin", s.zeta, traj.grid, "symmetric")


def run_evolve(cfg: SimulationConfig, out: Path) -> int:
    try:
        traj = evolve(cfg)
    except IntegrationError as exc:
        log.error("integration failed: %s", exc)
        if exc.trajectory is not None:
            write_trajectory(exc.trajectory, out)
        return EXIT_NUMERICAL
    write_trajectory(traj, out)
    (out / "config.txt").write_text(serialize_config(cfg))
    return EXIT_OK


def run_oracle(cfg: SimulationConfig, out: Path) -> int:
    from .oracle import compare_with_exact, hred_on_trajectory

    run = compare_with_exact(cfg, cfg.N, cfg.beta)
    doc = run.result.as_dict()
    doc["X"] = hred_on_trajectory(run, cfg.N, run.result.n_max)
    out.mkdir(parents=True, exist_ok=True)
    (out / "oracle.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def run_identities(cfg: SimulationConfig, out: Path) -> int:
    from .identities import identity_suite

    report = identity_suite(cfg)
    out.mkdir(parents=True, exist_ok=True)
    (out / "identities.json").write_text(json.dumps(report, indent=2) + "\n")
    failed = [r["name"] for r in report["checks"] if not r["pass"]]
    if failed:
        log.error("identities out of tolerance: %s", ", ".join(failed))
        return EXIT_IDENTITIES
    return EXIT_OK


SWEEP_COLUMNS = ["N", "beta", "t", "fidelity_pair", "fidelity_meanfield", "error_pair", "error_meanfield"]


def sweep_rows(cfg: SimulationConfig, threads: int = 1) -> list[list[float]]:
    """One oracle comparison per (N, beta) point, returned in sweep order."""
    from .oracle import compare_with_exact

    points = [(n, b) for n in cfg.sweep_N for b in cfg.sweep_beta]

    def one(point):
        r = compare_with_exact(cfg, *point).result
        return [r.N, r.beta, r.t, r.fidelity, r.fidelity_meanfield, r.error, r.error_meanfield]

    with ThreadPoolExecutor(max_workers=max(1, min(threads, len(points)))) as pool:
        return list(pool.map(one, points))


def run_sweep(cfg: SimulationConfig, out: Path) -> int:
    rows = sweep_rows(cfg, thread_count())
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return EXIT_OK


COMMANDS = {"evolve": run_evolve, "oracle": run_oracle, "identities": run_identities, "sweep": run_sweep}


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairex", description="Condensate and pair-excitation dynamics.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="path to a key = value configuration file")
    parser.add_argument("--out", help="output directory (default: output_dir from the config)")
    parser.add_argument("--seed", type=_seed, help="override the config seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        out = Path(args.out or cfg.output_dir)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"pairex: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PairexError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"pairex: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
