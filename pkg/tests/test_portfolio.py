import datetime as dt
import math

import numpy as np
import pytest

from lpopt.calculus import LpRegularizer
from lpopt.portfolio import cli
from lpopt.portfolio.data import (PriceDataError, PricePanel, business_days, load_prices,
                                  synthetic_panels, write_prices)
from lpopt.portfolio.experiment import (ExperimentConfig, portfolio_oracle, run_experiment,
                                        sharpe_ratio)
from lpopt.portfolio.moments import daily_returns, estimate_moments
from lpopt.portfolio.reports import emit_reports
from lpopt.solver import DescentViolationError, SolverParams
from lpopt.subproblems import project_simplex


def write_csv(path, text):
    path.write_text(text)
    return path


# --- load_prices ------------------------------------------------------------

def test_sparse_ticker_is_dropped(tmp_path):
    rows = ["date,A,B,C"]
    for i, day in enumerate(business_days(dt.date(2020, 1, 1), 10)):
        c = "" if i % 2 else "7.0"
        rows.append(f"{day},{10 + i},{20 + i},{c}")
    panel = load_prices(write_csv(tmp_path / "p.csv", "\n".join(rows) + "\n"))
    assert panel.tickers == ["A", "B"]
    assert panel.dropped == ("C",)


def test_complete_panel_unchanged(tmp_path):
    text = "date,A,B\n2020-01-02,1.5,2\n2020-01-03,1.25,2.5\n2020-01-06,1.75,3\n"
    panel = load_prices(write_csv(tmp_path / "p.csv", text))
    assert panel.filled == 0
    np.testing.assert_array_equal(panel.prices, [[1.5, 2], [1.25, 2.5], [1.75, 3]])
    assert panel.dates == [dt.date(2020, 1, 2), dt.date(2020, 1, 3), dt.date(2020, 1, 6)]


def test_interior_gap_forward_filled(tmp_path):
    rows = ["date,A,B"]
    for i, day in enumerate(business_days(dt.date(2020, 1, 1), 12)):
        a = "" if i == 5 else f"{10 + i}"
        rows.append(f"{day},{a},{30 + i}")
    panel = load_prices(write_csv(tmp_path / "p.csv", "\n".join(rows)))
    assert panel.filled == 1
    assert panel.prices[5, 0] == panel.prices[4, 0] == 14.0


def test_leading_gap_backfilled(tmp_path):
    rows = ["date,A,B"]
    for i, day in enumerate(business_days(dt.date(2020, 1, 1), 10)):
        a = "" if i == 0 else f"{10 + i}"
        rows.append(f"{day},{a},{30 + i}")
    panel = load_prices(write_csv(tmp_path / "p.csv", "\n".join(rows)))
    assert panel.prices[0, 0] == 11.0


@pytest.mark.parametrize("text, match", [
    ("date,A,B\n2020-01-02,1,x\n2020-01-03,1,2\n", "unparseable"),
    ("date,A,B\n2020-01-02,1,2\n2020-01-02,1,2\n", "duplicate date"),
    ("date,A,B\n2020-01-02,1,2\n", "at least 2 dates"),
    ("date,A\n2020-01-02,1\n2020-01-03,2\n", "survive"),
    ("day,A,B\n2020-01-02,1,2\n2020-01-03,1,2\n", "first column"),
    ("date,A,B\n2020-13-02,1,2\n2020-01-03,1,2\n", "bad date"),
])
def test_malformed_files(tmp_path, text, match):
    with pytest.raises(PriceDataError, match=match):
        load_prices(write_csv(tmp_path / "p.csv", text))


def test_write_then_load_roundtrip(tmp_path):
    panel, _ = synthetic_panels(seed=1, n_assets=4, n_days=20, n_oos_days=5)
    write_prices(panel, tmp_path / "p.csv")
    back = load_prices(tmp_path / "p.csv")
    assert back.tickers == panel.tickers and back.dates == panel.dates
    np.testing.assert_array_equal(back.prices, panel.prices)


# --- moments ----------------------------------------------------------------

def panel_from(prices):
    prices = np.asarray(prices, dtype=float)
    dates = business_days(dt.date(2021, 3, 1), prices.shape[0])
    return PricePanel(dates, [f"T{i}" for i in range(prices.shape[1])], prices)


def test_identical_assets_give_rank_one_covariance():
    s = np.array([10.0, 10.5, 10.2, 11.0, 10.7])
    m = estimate_moments(panel_from(np.stack([s, s], axis=1)))
    assert np.array_equal(m.R[0], m.R[1]) and np.array_equal(m.R[:, 0], m.R[:, 1])
    assert np.linalg.matrix_rank(m.R) <= 1


def test_constant_prices():
    m = estimate_moments(panel_from(np.full((6, 3), 42.0)))
    assert np.all(m.mu == 0) and np.all(m.R == 0) and m.Lf == 0.0


def two_pass_covariance(r):
    T, n = r.shape
    mean = [sum(r[t, j] for t in range(T)) / T for j in range(n)]
    C = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            C[i, j] = sum((r[t, i] - mean[i]) * (r[t, j] - mean[j]) for t in range(T)) / (T - 1)
    return np.array(mean), C


def test_moments_match_two_pass_oracle():
    rng = np.random.default_rng(2)
    L = np.array([[1.0, 0, 0], [0.5, 1.0, 0], [-0.3, 0.2, 1.0]]) * 0.01
    r = rng.normal(size=(120, 3)) @ L.T + 5e-4
    prices = 100 * np.vstack([np.ones(3), np.cumprod(1 + r, axis=0)])
    panel = panel_from(prices)
    m = estimate_moments(panel)
    mean, C = two_pass_covariance(daily_returns(panel))
    np.testing.assert_allclose(m.mu, mean, rtol=0, atol=1e-14)
    np.testing.assert_allclose(m.R, C, rtol=0, atol=1e-14)
    assert np.max(np.abs(m.R - m.R.T)) <= 1e-12
    v = m.top_vector
    assert abs(v @ m.R @ v / (v @ v) - m.Lf) <= 1e-8 * m.Lf


def test_nonpositive_prices_rejected():
    with pytest.raises(PriceDataError):
        estimate_moments(panel_from([[1.0, 2.0], [0.0, 2.0], [1.0, 2.0]]))


def test_portfolio_gradient_matches_finite_differences():
    panel, _ = synthetic_panels(seed=0)
    m = estimate_moments(panel)
    eta = 1e-3
    f = portfolio_oracle(m, eta)
    rng = np.random.default_rng(0)
    x = rng.dirichlet(np.ones(m.mu.size))
    g = f.gradient(x)
    np.testing.assert_allclose(g, m.R @ x - eta * m.mu, rtol=1e-15, atol=0)
    h = 1e-6
    fd = np.array([(f.value(x + h * e) - f.value(x - h * e)) / (2 * h) for e in np.eye(x.size)])
    assert np.linalg.norm(fd - g) <= 1e-6 * np.linalg.norm(g)


# --- experiment -------------------------------------------------------------

def test_sharpe_three_days_by_hand():
    # A: 100 -> 110 -> 99 gives +10%, -10%; B: 50 -> 55 -> 66 gives +10%, +20%.
    # Equal weights: portfolio returns 0.10, 0.05; mean 0.075, stdev 0.025 * sqrt(2).
    panel = panel_from([[100.0, 50.0], [110.0, 55.0], [99.0, 66.0]])
    daily, annual = sharpe_ratio(daily_returns(panel), [0.5, 0.5])
    assert daily == pytest.approx(3 / math.sqrt(2), abs=1e-12)
    assert annual == pytest.approx(3 / math.sqrt(2) * math.sqrt(252), abs=1e-10)


def projected_gradient(R, c, iters=1_000_000):
    L = np.linalg.eigvalsh(R)[-1]
    x = np.full(R.shape[0], 1.0 / R.shape[0])
    for _ in range(iters):
        x_new, _ = project_simplex(x - (R @ x - c) / L, 1.0)
        if np.max(np.abs(x_new - x)) <= 1e-15:
            break
        x = x_new
    return x


def test_lambda_zero_matches_projected_gradient():
    panel, _ = synthetic_panels(seed=3, n_assets=12, n_days=120, n_oos_days=2)
    cfg = ExperimentConfig(lambdas=(0.0,), primary_lambda=0.0)
    res = run_experiment(panel, None, cfg)
    m = estimate_moments(panel)
    f = portfolio_oracle(m, cfg.eta)
    ref = projected_gradient(m.R, cfg.eta * m.mu)
    assert abs(f.value(res.weights[0]) - f.value(ref)) <= 1e-6


def test_equal_asset_panel_is_symmetric():
    rng = np.random.default_rng(9)
    s = 50 * np.cumprod(1 + rng.normal(0, 0.01, size=60))
    panel = panel_from(np.tile(s[:, None], (1, 4)))
    res = run_experiment(panel, None, ExperimentConfig(lambdas=(1e-3,)))
    x = res.weights[0]
    m = estimate_moments(panel)
    f = portfolio_oracle(m, 1e-3)
    reg = LpRegularizer(0.5, lam=1e-3)

    def F(y):
        return f.value(y) + reg.lam * np.sum(np.sqrt(y))

    for perm in ([1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]):
        assert F(x[perm]) == pytest.approx(F(x), rel=1e-12)
    # equal weights on whatever support is selected
    sup = x[x > 0]
    np.testing.assert_allclose(sup, sup[0], rtol=1e-9)


def test_sweep_invariants_and_monotone_sparsity():
    panel_in, panel_out = synthetic_panels(seed=0)
    res = run_experiment(panel_in, panel_out, ExperimentConfig(lambdas=(1e-4, 1e-3, 1e-2)))
    for x in res.weights:
        assert abs(x.sum() - 1) <= 1e-10 and x.min() >= 0
    assert all(b <= a for a, b in zip(res.nnz, res.nnz[1:]))
    assert res.residual_trace.size == res.reports[1].iterations
    assert all(np.isfinite(s[0]) for s in res.sharpe_out)


def test_solver_abort_carries_lambda(monkeypatch):
    import lpopt.portfolio.experiment as exp

    class Broken(exp.ReweightedL1Solver):
        def solve(self, *a, **k):
            raise DescentViolationError("boom")

    monkeypatch.setattr(exp, "ReweightedL1Solver", Broken)
    panel, _ = synthetic_panels(seed=0, n_assets=5, n_days=30, n_oos_days=2)
    with pytest.raises(exp.ExperimentError) as info:
        run_experiment(panel, None, ExperimentConfig(lambdas=(0.25,)))
    assert info.value.lam == 0.25


# --- reports and CLI --------------------------------------------------------

def test_empty_grid_writes_headers_only(tmp_path):
    panel, _ = synthetic_panels(seed=0, n_assets=5, n_days=30, n_oos_days=2)
    res = run_experiment(panel, None, ExperimentConfig(lambdas=()))
    paths = emit_reports(res, tmp_path)
    assert sorted(p.name for p in paths) == ["residual_trajectory.csv", "sharpe.csv",
                                             "sparsity_vs_lambda.csv"]
    for p in paths:
        assert len(p.read_text().splitlines()) == 1


def test_single_lambda_weights_file(tmp_path):
    panel, _ = synthetic_panels(seed=0, n_assets=7, n_days=40, n_oos_days=2)
    res = run_experiment(panel, None, ExperimentConfig(lambdas=(1e-3,)))
    emit_reports(res, tmp_path)
    lines = (tmp_path / "weights_0.001.csv").read_text().splitlines()
    assert lines[0] == "ticker,weight" and len(lines) == 1 + 7
    values = [float(line.split(",")[1]) for line in lines[1:]]
    assert values == res.weights[0].tolist()  # 17 significant digits round-trip


def test_report_io_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    panel, _ = synthetic_panels(seed=0, n_assets=5, n_days=30, n_oos_days=2)
    res = run_experiment(panel, None, ExperimentConfig(lambdas=()))
    with pytest.raises(OSError, match="file"):
        emit_reports(res, blocker / "out")


def test_cli_solve_and_sweep(tmp_path, capsys):
    assert cli.main(["solve", "--out", str(tmp_path / "a"), "--lambda", "0.01"]) == 0
    assert (tmp_path / "a" / "weights_0.01.csv").exists()
    assert cli.main(["sweep", "--out", str(tmp_path / "b"), "--lambda-grid", "1e-3,1e-2"]) == 0
    sp = (tmp_path / "b" / "sparsity_vs_lambda.csv").read_text().splitlines()
    assert sp[0] == "lambda,nnz" and len(sp) == 3


def test_cli_reads_price_files(tmp_path):
    panel_in, panel_out = synthetic_panels(seed=4, n_assets=6, n_days=60, n_oos_days=10)
    write_prices(panel_in, tmp_path / "in.csv")
    write_prices(panel_out, tmp_path / "out.csv")
    code = cli.main(["solve", "--prices", str(tmp_path / "in.csv"),
                     "--oos-prices", str(tmp_path / "out.csv"), "--out", str(tmp_path / "r")])
    assert code == 0
    row = (tmp_path / "r" / "sharpe.csv").read_text().splitlines()[1].split(",")
    assert row[4] != "nan"


def test_cli_exit_codes(tmp_path, monkeypatch, capsys):
    assert cli.main(["solve", "--prices", str(tmp_path / "missing.csv")]) == 1
    bad = write_csv(tmp_path / "bad.csv", "date,A,B\n2020-01-02,1,oops\n2020-01-03,1,2\n")
    assert cli.main(["solve", "--prices", str(bad)]) == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["solve", "--lambda", "abc"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        cli.main(["frobnicate"])
    assert info.value.code == 1
    assert cli.main(["solve", "--alpha", "1.5", "--out", str(tmp_path / "x")]) == 1

    def abort(*a, **k):
        raise DescentViolationError("descent violated")

    monkeypatch.setattr(cli, "run_experiment", abort)
    assert cli.main(["solve", "--out", str(tmp_path / "y")]) == 2
    assert "abort" in capsys.readouterr().err


def test_sweep_outputs_are_deterministic(tmp_path):
    args = ["sweep", "--lambda-grid", "1e-4,1e-2"]
    assert cli.main(args + ["--out", str(tmp_path / "one")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "two")]) == 0
    names = sorted(p.name for p in (tmp_path / "one").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "two").iterdir())
    for name in names:
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
