"""Command-line interface.

    npsci interval --det 20 --pas 50 --pro 30 --method aw:3:t
    npsci coverage --method wald --method aw:3:t --n 5:100:5 --seed 1 -o cov.csv
    npsci surrogate --count 1098 --seed 1 -o obs.csv
    npsci weights --observations obs.csv --seed 1 -o weights.csv
    npsci mae --coverage cov.csv --weights weights.csv -o mae.csv
    npsci report --coverage cov.csv --weights weights.csv -o report.md

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import secrets
import shlex
import sys
from typing import Sequence

from npsci.core import ConfidenceLevel, InvalidInputError, TrinomialCounts
from npsci.coverage import EXACT_N_CAP, LatticeSpec, run_grid, sample_simplex_lattice
from npsci.methods import DEFAULT_METHODS, MethodSpec, SolverError, compute_interval
from npsci.report import mae_rows, render_markdown, summarize, write_mae_csv, write_summary_csv
from npsci.tables import (
    fmt_real,
    read_coverage_csv,
    read_observations_csv,
    read_tpmds_csv,
    read_weights_csv,
    write_coverage_csv,
    write_observations_csv,
    write_weights_csv,
)
from npsci.weights import fit_weight_model, synth_observed_surrogate

log = logging.getLogger("npsci")

PROG = "npsci"


# ---------------------------------------------------------------------------
# Argument types


def method_arg(text: str) -> MethodSpec:
    try:
        return MethodSpec.parse(text)
    except InvalidInputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def level_arg(text: str) -> float:
    try:
        return ConfidenceLevel(float(text)).level
    except (ValueError, InvalidInputError):
        raise argparse.ArgumentTypeError(
            f"level must be a number in (0, 1), got {text!r}"
        ) from None


def n_grid_arg(text: str) -> tuple[int, ...]:
    """``start:stop:step`` (stop inclusive), or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (int(p) for p in text.split(":"))
            if start < 1 or step < 1 or stop < start:
                raise ValueError
            values = tuple(range(start, stop + 1, step))
        else:
            values = tuple(int(p) for p in text.split(","))
        if not values or min(values) < 1:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"n grid must be start:stop:step or a list like 5,10,20 of positive integers, "
            f"got {text!r}"
        ) from None
    return values


def nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        value = -1
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text!r}")
    return value


def positive_int(text: str) -> int:
    value = nonneg_int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def seed_arg(text: str) -> int:
    value = nonneg_int(text)
    if value >= 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG, description="Confidence intervals and coverage evaluation for the NPS."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interval", help="intervals for one set of counts", parents=[common])
    p.add_argument("--det", type=nonneg_int, required=True)
    p.add_argument("--pas", type=nonneg_int, required=True)
    p.add_argument("--pro", type=nonneg_int, required=True)
    p.add_argument("--method", type=method_arg, action="append",
                   help="method, repeatable (default: every method)")
    p.add_argument("--level", type=level_arg, default=0.95)
    p.add_argument("--scale", type=float, default=1.0,
                   help="multiply displayed values, e.g. 100")
    p.add_argument("--raw", action="store_true", help="do not clamp bounds to [-1, 1]")
    p.add_argument("--digits", type=positive_int, default=6)

    p = sub.add_parser(
        "coverage", help="coverage grid over sampled distributions", parents=[common]
    )
    p.add_argument("--method", type=method_arg, action="append",
                   help="method, repeatable (default: every method)")
    p.add_argument("--n", type=n_grid_arg, default=tuple(range(5, 101, 5)),
                   help="start:stop:step or list (default 5:100:5)")
    p.add_argument("--level", type=level_arg, action="append", help="repeatable (default 0.95)")
    p.add_argument("--degree", type=positive_int, default=400, help="lattice degree")
    p.add_argument("--samples", type=positive_int, default=500, help="lattice points J")
    p.add_argument("--tpmds", help="read distributions from a CSV instead of the lattice")
    p.add_argument("--mode", choices=("auto", "exact", "monte_carlo"), default="auto",
                   help="auto: exact for n <= 100, Monte Carlo above")
    p.add_argument("--sims", type=positive_int, default=2000)
    p.add_argument("--cap", type=positive_int, default=EXACT_N_CAP,
                   help="largest n for exact enumeration")
    p.add_argument("--seed", type=seed_arg)
    p.add_argument("--workers", type=positive_int, default=1)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser(
        "surrogate", help="synthetic observed (nps, variance) pairs", parents=[common]
    )
    p.add_argument("--count", type=positive_int, default=1098)
    p.add_argument("--seed", type=seed_arg)
    p.add_argument("-o", "--output", default="-")

    p = sub.add_parser(
        "weights", help="observation weights for the lattice sample", parents=[common]
    )
    p.add_argument("--observations", required=True, help="CSV with nps,variance columns")
    p.add_argument("--degree", type=positive_int, default=400)
    p.add_argument("--samples", type=positive_int, default=500)
    p.add_argument("--tpmds", help="weight these distributions instead of the lattice sample")
    p.add_argument("--seed", type=seed_arg)
    p.add_argument("-o", "--output", default="-")

    for name, help_text in (("mae", "MAE and rank per method and n"),
                            ("report", "MAE/rank summary table")):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("--coverage", required=True)
        p.add_argument("--weights")
        p.add_argument("--max-n", type=positive_int, default=100,
                       help="largest n in totals and mean ranks")
        if name == "report":
            p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
            p.add_argument("--scale", type=float, default=100.0)
        p.add_argument("-o", "--output", default="-")
    return parser


def canonical_argv(args: argparse.Namespace) -> list[str]:
    """Arguments that reproduce ``args`` exactly, in canonical form."""
    argv = [args.command]
    if args.command == "interval":
        argv += ["--det", str(args.det), "--pas", str(args.pas), "--pro", str(args.pro)]
        for m in args.method:
            argv += ["--method", str(m)]
        argv += ["--level", fmt_real(args.level), "--scale", fmt_real(args.scale),
                 "--digits", str(args.digits)]
        if args.raw:
            argv.append("--raw")
    elif args.command == "coverage":
        for m in args.method:
            argv += ["--method", str(m)]
        argv += ["--n", ",".join(str(n) for n in args.n)]
        for level in args.level:
            argv += ["--level", fmt_real(level)]
        if args.tpmds:
            argv += ["--tpmds", args.tpmds]
        else:
            argv += ["--degree", str(args.degree), "--samples", str(args.samples)]
        argv += ["--mode", args.mode, "--sims", str(args.sims), "--cap", str(args.cap),
                 "--seed", str(args.seed)]
    elif args.command == "surrogate":
        argv += ["--count", str(args.count), "--seed", str(args.seed)]
    elif args.command == "weights":
        argv += ["--observations", args.observations]
        if args.tpmds:
            argv += ["--tpmds", args.tpmds]
        else:
            argv += ["--degree", str(args.degree), "--samples", str(args.samples),
                     "--seed", str(args.seed)]
    elif args.command in ("mae", "report"):
        argv += ["--coverage", args.coverage]
        if args.weights:
            argv += ["--weights", args.weights]
        argv += ["--max-n", str(args.max_n)]
        if args.command == "report":
            argv += ["--format", args.format, "--scale", fmt_real(args.scale)]
    if getattr(args, "output", "-") != "-":
        argv += ["-o", args.output]
    return argv


def _fill_defaults(args: argparse.Namespace) -> None:
    if getattr(args, "method", False) is None:
        args.method = list(DEFAULT_METHODS)
    if args.command == "coverage" and args.level is None:
        args.level = [0.95]
    if hasattr(args, "seed") and args.seed is None:
        args.seed = secrets.randbits(63)
        log.warning("no --seed given; using %d", args.seed)


@contextlib.contextmanager
def _open_output(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _open_input(path: str):
    return open(path, newline="", encoding="utf-8")


# ---------------------------------------------------------------------------
# Commands


def cmd_interval(args) -> None:
    counts = TrinomialCounts(args.det, args.pas, args.pro)
    counts.require_nonempty()
    lvl = ConfidenceLevel(args.level)
    d = args.digits
    print("method\tcenter\tlower\tupper\twidth")
    for m in args.method:
        est = compute_interval(counts, lvl, m)
        center, lower, upper = (
            (est.center, est.lower, est.upper) if args.raw else est.clamped()
        )
        values = [v * args.scale for v in (center, lower, upper, upper - lower)]
        print("\t".join([str(m), *(f"{v:.{d}f}" for v in values)]))


def _lattice(args):
    if args.tpmds:
        with _open_input(args.tpmds) as fh:
            return read_tpmds_csv(fh, args.tpmds)
    return sample_simplex_lattice(LatticeSpec(args.degree, args.samples, args.seed))


def cmd_coverage(args) -> None:
    tpmds = _lattice(args)
    records = []
    for level in args.level:
        lvl = ConfidenceLevel(level)
        log.info("level %s: %d methods x %d n x %d distributions",
                 fmt_real(level), len(args.method), len(args.n), len(tpmds))
        records += run_grid(args.method, args.n, lvl, tpmds, mode=args.mode, seed=args.seed,
                            sims=args.sims, cap=args.cap, workers=args.workers)
    with _open_output(args.output) as fh:
        rows = write_coverage_csv(records, fh)
    log.info("wrote %d rows", rows)


def cmd_surrogate(args) -> None:
    tpmds = synth_observed_surrogate(args.count, args.seed)
    with _open_output(args.output) as fh:
        write_observations_csv(tpmds, fh)


def cmd_weights(args) -> None:
    with _open_input(args.observations) as fh:
        obs = read_observations_csv(fh, args.observations)
    model = fit_weight_model(obs)
    log.info("bandwidths nps=%.4g variance=%.4g", *model.bandwidth)
    tpmds = _lattice(args)
    with _open_output(args.output) as fh:
        write_weights_csv(tpmds, model.weights(tpmds), fh)


def _mae_inputs(args):
    with _open_input(args.coverage) as fh:
        records = read_coverage_csv(fh, args.coverage)
    weights = None
    if args.weights:
        with _open_input(args.weights) as fh:
            tpmds, w = read_weights_csv(fh, args.weights)
        weights = {p.as_tuple(): float(x) for p, x in zip(tpmds, w)}
    return mae_rows(records, weights)


def cmd_mae(args) -> None:
    rows = _mae_inputs(args)
    with _open_output(args.output) as fh:
        write_mae_csv(rows, fh)


def cmd_report(args) -> None:
    rows = _mae_inputs(args)
    with _open_output(args.output) as fh:
        if args.format == "csv":
            write_summary_csv(summarize(rows, args.max_n), fh)
        else:
            fh.write(render_markdown(rows, args.max_n, args.scale))


COMMANDS = {
    "interval": cmd_interval,
    "coverage": cmd_coverage,
    "surrogate": cmd_surrogate,
    "weights": cmd_weights,
    "mae": cmd_mae,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    _fill_defaults(args)
    print(f"# {PROG} {shlex.join(canonical_argv(args))}", file=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (InvalidInputError, SolverError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
