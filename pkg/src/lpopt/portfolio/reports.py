"""CSV reports of an experiment (17 significant digits, fixed row order)."""

from __future__ import annotations

import csv
from pathlib import Path

from .experiment import ExperimentResult


def _num(v: float) -> str:
    return format(float(v), ".17g")


def weights_filename(lam: float) -> str:
    return f"weights_{_num(lam)}.csv"


def _write(path: Path, header, rows):
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_reports(result: ExperimentResult, outdir) -> list:
    """Write the report CSVs into ``outdir``; returns the written paths."""
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    written = []

    path = out / "residual_trajectory.csv"
    _write(path, ["iter", "alpha_residual"],
           [[k + 1, _num(a)] for k, a in enumerate(result.residual_trace)])
    written.append(path)

    path = out / "sparsity_vs_lambda.csv"
    _write(path, ["lambda", "nnz"],
           [[_num(lam), k] for lam, k in zip(result.lambda_grid, result.nnz)])
    written.append(path)

    for lam, x in zip(result.lambda_grid, result.weights):
        path = out / weights_filename(lam)
        _write(path, ["ticker", "weight"], [[t, _num(v)] for t, v in zip(result.tickers, x)])
        written.append(path)

    path = out / "sharpe.csv"
    rows = [[_num(lam), k, _num(si[0]), _num(si[1]), _num(so[0]), _num(so[1])]
            for lam, k, si, so in zip(result.lambda_grid, result.nnz,
                                      result.sharpe_in, result.sharpe_out)]
    _write(path, ["lambda", "nnz", "sharpe_in_daily", "sharpe_in_annualized",
                  "sharpe_out_daily", "sharpe_out_annualized"], rows)
    written.append(path)
    return written
