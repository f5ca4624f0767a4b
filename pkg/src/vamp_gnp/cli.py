"""Command-line interface: Monte-Carlo sweeps and single-instance solves.

`sweep` runs the paired benchmark over an SNR grid and writes the per-trial
CSV, aggregate CSV, run manifest, and (on request) the NRMSE figure into an
output directory. `solve` reads one problem from a plain-text file and
prints or writes the recovered signal.

The input format for `solve`: first line `M N`; the next M lines hold the
rows of A (N values each); the final line holds the M values of y. Values
may be separated by whitespace or commas.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .denoisers import BinaryNoise, GaussianNoise, LaplaceNoise, SignalPrior
from .engine import EngineConfig, run_gnp_vamp, run_standard_vamp
from .errors import DivergenceError
from .harness import ALGORITHMS, SweepConfig, emit_outputs, run_sweep
from .lmmse import ProblemInstance

NOISE_CHOICES = ("gaussian", "laplace", "binary")


def _noise_from_args(args):
    if args.noise == "gaussian":
        return GaussianNoise(args.noise_var)
    if args.noise == "laplace":
        return LaplaceNoise(args.noise_mu, args.noise_b)
    return BinaryNoise(args.noise_s)


def _add_noise_options(parser):
    parser.add_argument("--noise", choices=NOISE_CHOICES, required=True,
                        help="measurement-noise model")
    parser.add_argument("--noise-var", type=float, default=1.0,
                        help="gaussian noise variance (default 1.0)")
    parser.add_argument("--noise-mu", type=float, default=0.0,
                        help="laplace location (default 0.0)")
    parser.add_argument("--noise-b", type=float, default=1.0,
                        help="laplace scale (default 1.0)")
    parser.add_argument("--noise-s", type=float, default=1.0,
                        help="binary level (default 1.0)")


def _add_engine_options(parser):
    parser.add_argument("--max-iter", type=int, default=100,
                        help="iteration cap (default 100)")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="relative-change stopping tolerance (default 1e-8)")
    parser.add_argument("--damping", type=float, default=1.0,
                        help="message damping factor in (0, 1]; 1 disables (default)")


def _engine_from_args(args) -> EngineConfig:
    return EngineConfig(max_iters=args.max_iter, tol=args.tol, damping=args.damping)


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _comma_names(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip() != "")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vamp-gnp",
        description="Sparse recovery under general i.i.d. measurement-noise priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a Monte-Carlo SNR sweep")
    _add_noise_options(sweep)
    sweep.add_argument("--snr", type=_comma_floats, default=(0.0, 5.0, 10.0, 15.0, 20.0),
                       help="comma-separated SNR grid in dB (default 0,5,10,15,20)")
    sweep.add_argument("--trials", type=int, default=100, help="trials per SNR point")
    sweep.add_argument("--m", type=int, default=250, help="number of measurements")
    sweep.add_argument("--n", type=int, default=500, help="signal dimension")
    sweep.add_argument("--rho", type=float, default=0.95,
                       help="zero-atom mass of the signal prior (default 0.95)")
    sweep.add_argument("--algorithms", type=_comma_names, default=ALGORITHMS,
                       help="comma-separated subset of gnp,standard")
    sweep.add_argument("--seed", type=int, default=42, help="base seed")
    _add_engine_options(sweep)
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--emit-plot", action="store_true",
                       help="also render the NRMSE-vs-SNR figure")
    sweep.set_defaults(func=_cmd_sweep)

    solve = sub.add_parser("solve", help="solve one instance from a text file")
    solve.add_argument("input", help="problem file: 'M N', M rows of A, then y")
    solve.add_argument("--algorithm", choices=ALGORITHMS, default="gnp")
    _add_noise_options(solve)
    solve.add_argument("--rho", type=float, default=0.95,
                       help="zero-atom mass of the signal prior (default 0.95)")
    _add_engine_options(solve)
    solve.add_argument("--out", default=None,
                       help="write the recovered signal here (default: stdout)")
    solve.set_defaults(func=_cmd_solve)

    return parser


def _cmd_sweep(args) -> int:
    config = SweepConfig(
        m=args.m,
        n=args.n,
        rho=args.rho,
        snr_grid_db=args.snr,
        trials=args.trials,
        noise_model=_noise_from_args(args),
        algorithms=args.algorithms,
        base_seed=args.seed,
        engine=_engine_from_args(args),
    )
    records, aggregates = run_sweep(config)
    paths = emit_outputs(records, aggregates, args.out, config, emit_plot=args.emit_plot)
    diverged = sum(1 for r in records if r.diverged)
    print(f"wrote {', '.join(str(p) for p in paths.values())}")
    if diverged:
        print(f"warning: {diverged} of {len(records)} runs diverged", file=sys.stderr)
    return 0


def read_problem_file(path) -> ProblemInstance:
    """Parse the documented plain-text problem layout into an instance."""
    with open(path) as fh:
        rows = [line.replace(",", " ").split() for line in fh if line.strip() != ""]
    if not rows:
        raise ValueError(f"{path}: empty problem file")
    header = rows[0]
    if len(header) != 2:
        raise ValueError(f"{path}: first line must be 'M N', got {' '.join(header)!r}")
    try:
        m, n = int(header[0]), int(header[1])
    except ValueError:
        raise ValueError(f"{path}: first line must be 'M N', got {' '.join(header)!r}")
    if len(rows) != m + 2:
        raise ValueError(f"{path}: expected {m + 2} lines (header, {m} matrix rows, y), "
                         f"got {len(rows)}")
    try:
        A = np.array([[float(v) for v in row] for row in rows[1:m + 1]])
        y = np.array([float(v) for v in rows[m + 1]])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry: {exc}")
    if A.shape != (m, n):
        raise ValueError(f"{path}: matrix block has shape {A.shape}, expected ({m}, {n})")
    if y.shape != (m,):
        raise ValueError(f"{path}: y has {y.shape[0]} values, expected {m}")
    return ProblemInstance(A=A, y=y)


def _cmd_solve(args) -> int:
    instance = read_problem_file(args.input)
    signal_prior = SignalPrior(args.rho)
    engine = _engine_from_args(args)
    noise = _noise_from_args(args)
    try:
        if args.algorithm == "gnp":
            result = run_gnp_vamp(instance, signal_prior, noise, engine)
        else:
            from .harness import matched_variance

            result = run_standard_vamp(instance, signal_prior, matched_variance(noise), engine)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    body = "\n".join(format(v, ".17g") for v in result.x_hat) + "\n"
    if args.out is not None:
        with open(args.out, "w") as fh:
            fh.write(body)
    else:
        sys.stdout.write(body)
    print(f"iterations={result.iterations_used} converged={str(result.converged).lower()}",
          file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
