"""Command line driver: one subcommand per experiment plus scenario tools.

Exit codes: 0 success, 1 invalid input, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from .channel import ScenarioError, random_scenario
from .config import dump_scenario, load_scenario
from .design import AllocationWarning, InfeasibleAllocation
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment
from .io import emit_csv, table_to_csv

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2
DEFAULT_SNR = "-10:30:5"


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def parse_snr(text: str) -> tuple[float, ...]:
    """``"0,10,20"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [float(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
                raise ValueError
            start, stop, step = parts
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return tuple(float(start + i * step) for i in range(n))
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"invalid SNR grid {text!r}; use 'a,b,c' or 'start:stop:step'"
        ) from None
    if not vals:
        raise argparse.ArgumentTypeError("SNR grid must not be empty")
    return vals


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beamkey", description="Beam-domain secret key generation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in EXPERIMENTS:
        e = sub.add_parser(name, help=f"run the {name} experiment")
        if name != "leakage-curves":
            e.add_argument("--scenario", required=True, type=Path, help="scenario TOML file")
        e.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
        e.add_argument("--seed", type=int, default=0, help="master RNG seed (default 0)")
        default_snr = "20" if name == "nist" else DEFAULT_SNR
        e.add_argument("--snr", type=parse_snr, default=parse_snr(default_snr),
                       help=f"SNR grid in dB (default {default_snr})")
        e.add_argument("--trials", type=_positive_int, default=1000 if name == "nist" else 2000,
                       help="Monte-Carlo draws per point (keys for nist)")
        e.add_argument("--me", type=_positive_int, nargs="+",
                       help="effective BS dimension(s); default: paths per UT")
        e.add_argument("--ne", type=_positive_int, help="effective UT dimension")
        e.add_argument("--mode", choices=("reused", "orthogonal"), default="reused",
                       help="pilot sharing between UTs (default reused)")
        e.add_argument("--cov-mode", choices=("monte-carlo", "analytic"), default="monte-carlo",
                       help="covariances used for beam selection")
        if name == "rate-vs-k":
            e.add_argument("--users", type=_positive_int, nargs="+", default=[2, 4, 6],
                           help="user counts to compare (default 2 4 6)")
        if name == "leakage-curves":
            e.add_argument("--rho", type=float, nargs="+", default=[0.2, 0.5, 0.8, 1.0],
                           help="channel correlations to tabulate")

    v = sub.add_parser("validate", help="check a scenario file")
    v.add_argument("scenario", type=Path)

    m = sub.add_parser("make-scenario", help="write a random scenario file")
    m.add_argument("--M", type=_positive_int, default=64)
    m.add_argument("--K", type=_positive_int, default=6)
    m.add_argument("--N", type=_positive_int, default=4)
    m.add_argument("--NP", type=_positive_int, default=6)
    m.add_argument("--layout", choices=("uniform", "clustered"), default="uniform")
    m.add_argument("--on-grid", action="store_true")
    m.add_argument("--decay-db", type=float, default=0.0, help="path power decay per path")
    m.add_argument("--shared-paths", type=int, default=0,
                   help="departure angles UT 2j+1 copies from UT 2j")
    m.add_argument("--snr", type=float, default=20.0)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", type=Path)
    return p


def _write(text_or_table, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text_or_table if isinstance(text_or_table, str)
                         else table_to_csv(text_or_table))
    elif isinstance(text_or_table, str):
        out.write_text(text_or_table, encoding="utf-8")
    else:
        emit_csv(text_or_table, out)


def _run(args) -> int:
    if args.command == "validate":
        s = load_scenario(args.scenario)
        print(f"ok: M={s.M} K={s.K} N={list(s.N)} NP={s.NP} snr_db={s.snr_db:g}")
        return EXIT_OK
    if args.command == "make-scenario":
        s = random_scenario(args.M, args.K, args.N, args.NP, layout=args.layout,
                            on_grid=args.on_grid, power_decay_db=args.decay_db,
                            shared_paths=args.shared_paths, snr_db=args.snr, seed=args.seed)
        _write(dump_scenario(s), args.out)
        return EXIT_OK
    scenario = load_scenario(args.scenario) if hasattr(args, "scenario") else None
    extra = {}
    if hasattr(args, "users"):
        extra["users"] = tuple(args.users)
    if hasattr(args, "rho"):
        extra["rho"] = tuple(args.rho)
    try:
        spec = ExperimentSpec(args.command, scenario, args.snr, trials=args.trials,
                              seed=args.seed, M_e=tuple(args.me) if args.me else None,
                              N_e=args.ne, pilot_mode=args.mode, cov_mode=args.cov_mode, **extra)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("always", AllocationWarning)
        table = run_experiment(spec)
    _write(table, args.out)
    for key, value in table.meta.items():
        if key != "report":
            print(f"{key}: {value}", file=sys.stderr)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except ScenarioError as exc:
        print("invalid scenario:", file=sys.stderr)
        for problem in exc.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleAllocation as exc:
        print(f"allocation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
