"""Command line entry point: ``lpopt-portfolio {solve,sweep} [options]``.

Exit status: 0 on success, 1 on I/O or parse errors, 2 when a solve aborts.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..solver import SolverError, SolverParams
from .data import PriceDataError, load_prices, synthetic_panels
from .experiment import ExperimentConfig, run_experiment
from .reports import emit_reports

DEFAULT_GRID = "1e-5,1e-4,1e-3,1e-2,1e-1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prices", help="in-sample wide CSV (date,<tickers>...); "
                        "synthetic data when omitted")
    common.add_argument("--oos-prices", help="out-of-sample wide CSV")
    common.add_argument("--eta", type=float, default=0.001)
    common.add_argument("--p", type=float, default=0.5)
    common.add_argument("--alpha", type=float, default=0.998)
    common.add_argument("--beta-factor", type=float, default=1.1)
    common.add_argument("--eps0", type=float, default=0.001)
    common.add_argument("--max-iters", type=int, default=100_000)
    common.add_argument("--tol-step", type=float, default=1e-10)
    common.add_argument("--tol-residual", type=float, default=1e-8)
    common.add_argument("--seed", type=int, default=0, help="seed of the synthetic panel")
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="lpopt-portfolio",
                     description="lp-regularized sparse Markowitz portfolios")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    solve = sub.add_parser("solve", parents=[common], help="single penalty weight")
    solve.add_argument("--lambda", dest="lam", type=float, default=0.001)
    sweep = sub.add_parser("sweep", parents=[common], help="grid of penalty weights")
    sweep.add_argument("--lambda-grid", type=_float_list, default=_float_list(DEFAULT_GRID))
    sweep.add_argument("--lambda", dest="lam", type=float, default=0.001,
                       help="grid entry whose residual trajectory is reported")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        params = SolverParams(alpha=args.alpha, beta_factor=args.beta_factor, eps0=args.eps0,
                              max_iters=args.max_iters, tol_step=args.tol_step,
                              tol_residual=args.tol_residual)
        lambdas = [args.lam] if args.command == "solve" else args.lambda_grid
        config = ExperimentConfig(eta=args.eta, p=args.p, lambdas=tuple(lambdas),
                                  primary_lambda=args.lam, solver=params)
    except ValueError as exc:
        print(f"lpopt-portfolio: error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.prices:
            panel_in = load_prices(args.prices)
            panel_out = load_prices(args.oos_prices) if args.oos_prices else None
        else:
            panel_in, panel_out = synthetic_panels(seed=args.seed)
            if args.oos_prices:
                panel_out = load_prices(args.oos_prices)
    except (OSError, PriceDataError) as exc:
        print(f"lpopt-portfolio: error: {exc}", file=sys.stderr)
        return 1
    try:
        result = run_experiment(panel_in, panel_out, config)
    except SolverError as exc:
        print(f"lpopt-portfolio: abort: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"lpopt-portfolio: error: {exc}", file=sys.stderr)
        return 1
    try:
        paths = emit_reports(result, args.out)
    except OSError as exc:
        print(f"lpopt-portfolio: error: {exc}", file=sys.stderr)
        return 1
    for lam, k in zip(result.lambda_grid, result.nnz):
        print(f"lambda={lam:g} nnz={k}")
    print(f"wrote {len(paths)} file(s) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
