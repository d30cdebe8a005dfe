import numpy as np
import pytest

from lpopt.calculus import LpRegularizer, smoothed_objective
from lpopt.oracles import SmoothOracle, quadratic, zero
from lpopt.solver import (CONVERGED, DescentViolationError, InfeasibleStartError,
                          NonFiniteError, PowerIterationError, ReweightedL1Solver, SolverParams,
                          assert_descent, estimate_lipschitz, power_iteration, solve)
from lpopt.subproblems import FeasibleSet, UnsupportedSubproblemError


def jacobi_eigenvalues(A, sweeps=100):
    """Cyclic Jacobi rotations for a symmetric matrix (independent eigen-oracle)."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(max(np.sum(A ** 2) - np.sum(np.diag(A) ** 2), 0.0))
        if off < 1e-14 * np.linalg.norm(A):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                tau = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                c = 1 / np.sqrt(1 + t * t)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
    return np.sort(np.diag(A))


# --- power iteration --------------------------------------------------------

def test_power_iteration_examples():
    assert estimate_lipschitz(np.eye(3)) == pytest.approx(1.0, rel=1e-12)
    assert estimate_lipschitz(np.diag([1.0, 2.0, 5.0])) == pytest.approx(5.0, rel=1e-8)


def test_power_iteration_against_jacobi(rng):
    for _ in range(10):
        A = rng.normal(size=(10, 10))
        R = A @ A.T
        rho, v = power_iteration(R)
        ref = jacobi_eigenvalues(R)[-1]
        assert rho == pytest.approx(ref, rel=1e-6)
        assert np.linalg.norm(R @ v - rho * v) <= 1e-8 * rho


def test_power_iteration_reports_nonconvergence():
    with pytest.raises(PowerIterationError) as info:
        power_iteration(np.diag([2.0, -2.0]), max_iter=50)
    assert info.value.rayleigh <= 2.0 + 1e-12


def test_estimate_lipschitz_sources():
    assert estimate_lipschitz(quadratic(np.diag([3.0, 1.0]))) == pytest.approx(3.0, rel=1e-8)
    f = SmoothOracle(lambda x: 0.0, lambda x: 0 * x, lipschitz=7.5)
    assert estimate_lipschitz(f) == 7.5
    with pytest.raises(ValueError):
        estimate_lipschitz(SmoothOracle(lambda x: 0.0, lambda x: 0 * x))


def test_zero_matrix_gives_zero():
    assert estimate_lipschitz(np.zeros((3, 3))) == 0.0


# --- assert_descent ---------------------------------------------------------

def test_assert_descent_examples():
    x = np.array([1.0, 2.0])
    f = quadratic(np.eye(2))
    reg = LpRegularizer(0.5, lam=1.0)
    e1, e2 = np.full(2, 1e-2), np.full(2, 1e-3)
    F1 = smoothed_objective(f, reg, x, e1)
    F2 = smoothed_objective(f, reg, x, e2)
    assert assert_descent((x, e1, F1), (x, e1, F1), 1.1, 1.0) == 0.0
    assert assert_descent((x, e1, F1), (x, e2, F2), 1.1, 1.0) > 0.0
    y = np.array([0.5, 1.0])
    Fy = smoothed_objective(f, reg, y, e1)
    forward = assert_descent((x, e1, F1), (y, e1, Fy), 1.1, 1.0)
    backward = assert_descent((y, e1, Fy), (x, e1, F1), 1.1, 1.0)
    assert forward > 0 > backward


# --- solver -----------------------------------------------------------------

def one_d_oracle():
    # (x - 1)^2 = 0.5 * 2 x^2 - 2 x + 1
    return quadratic(np.array([[2.0]]), np.array([2.0]), const=1.0)


def grid_stationary_point(lam, p=0.5, lo=-2.0, hi=2.0, h=1e-6):
    g = np.arange(lo, hi + 0.5 * h, h)
    return g[np.argmin((g - 1.0) ** 2 + lam * np.abs(g) ** p)]


def test_one_d_instance_matches_grid():
    reg = LpRegularizer(0.5, lam=0.1)
    rep = solve(one_d_oracle(), reg, FeasibleSet.unconstrained(), [1.0])
    assert rep.converged
    x_ref = grid_stationary_point(0.1)
    assert abs(rep.x[0] - x_ref) <= 1e-4
    # root of 2(x - 1) + 0.05 x^(-1/2) = 0 (bracketed root finder, 1e-15)
    assert rep.x[0] == pytest.approx(0.974677325225717, abs=1e-7)
    assert np.all(rep.descent_slack >= -1e-12)


def test_zero_objective_goes_to_origin():
    rep = solve(zero(2), LpRegularizer(0.5, lam=1.0), FeasibleSet.nonnegative(), [1.0, 1.0])
    assert rep.converged
    assert rep.x.tolist() == [0.0, 0.0]
    # f = 0 has L_f = 0; beta falls back to beta_factor itself
    assert rep.lipschitz == 0.0 and rep.beta == pytest.approx(1.1)


def test_small_portfolio_invariants():
    rng = np.random.default_rng(11)
    A = rng.normal(size=(5, 5))
    R = A @ A.T / 5 + 0.05 * np.eye(5)
    oracle = quadratic(R, 0.01 * rng.normal(size=5))
    gamma = FeasibleSet.simplex(1.0)
    rep = solve(oracle, LpRegularizer(0.5, lam=0.01), gamma, np.full(5, 0.2))
    assert rep.converged
    for x, _ in rep.iterates:
        assert gamma.contains(x, 1e-10)
    F = rep.objective_trace
    assert np.all(np.diff(F) <= 1e-10 * (1 + np.abs(F[:-1])))
    assert np.all(rep.descent_slack >= -1e-10 * (1 + np.abs(F[:-1])))
    # telescoped bound
    decrease = rep.beta - 0.5 * rep.lipschitz
    k = rep.iterations
    assert np.sum(rep.step_norms ** 2) <= (F[0] - F[-1]) / decrease + k * 1e-10
    assert rep.step_norms.min() < SolverParams().tol_step


def test_eps_trajectory_is_geometric():
    prm = SolverParams(alpha=0.9, eps0=0.5, max_iters=400, eps_floor=1e-14)
    rep = solve(one_d_oracle(), LpRegularizer(0.5, lam=0.1), FeasibleSet.unconstrained(), [1.0],
                params=prm)
    eps = np.array([e[0] for _, e in rep.iterates])
    expected = [0.5]
    for _ in range(eps.size - 1):
        expected.append(max(0.9 * expected[-1], 1e-14))
    assert eps.tolist() == expected
    again = solve(one_d_oracle(), LpRegularizer(0.5, lam=0.1), FeasibleSet.unconstrained(), [1.0],
                  params=prm)
    assert all(a[0].tobytes() == b[0].tobytes() for a, b in zip(rep.iterates, again.iterates))


def test_eps_floor_is_respected():
    prm = SolverParams(alpha=0.5, eps0=1.0, eps_floor=1e-6, max_iters=200,
                       tol_step=0.0, tol_residual=0.0)
    rep = solve(one_d_oracle(), LpRegularizer(0.5, lam=0.1), FeasibleSet.unconstrained(), [1.0],
                params=prm)
    assert rep.eps[0] == 1e-6
    assert rep.termination == "max_iters" and rep.iterations == 200


def test_param_validation():
    with pytest.raises(ValueError):
        SolverParams(alpha=1.0)
    with pytest.raises(ValueError):
        SolverParams(beta_factor=0.5)
    with pytest.raises(ValueError):
        SolverParams(eps0=0.0)
    with pytest.raises(ValueError):
        SolverParams(max_iters=0)


def test_start_and_oracle_errors():
    gamma = FeasibleSet.simplex(1.0)
    with pytest.raises(InfeasibleStartError):
        solve(quadratic(np.eye(2)), LpRegularizer(0.5, lam=0.1), gamma, [0.6, 0.6])
    bad = SmoothOracle(lambda x: np.nan, lambda x: 0 * x, lipschitz=1.0)
    with pytest.raises(NonFiniteError):
        solve(bad, LpRegularizer(0.5, lam=0.1), FeasibleSet.unconstrained(), [1.0])
    with pytest.raises(ValueError):
        solve(quadratic(np.eye(1)), LpRegularizer(0.5, theta=1.0), FeasibleSet.unconstrained(),
              [1.0])


def test_wrong_lipschitz_constant_aborts():
    oracle = quadratic(np.diag([50.0, 1.0]), np.array([10.0, 1.0]))
    with pytest.raises(DescentViolationError):
        solve(oracle, LpRegularizer(0.5, lam=0.01), FeasibleSet.unconstrained(), [0.0, 0.0],
              lipschitz=1.0)


def test_general_set_without_hook_is_rejected():
    from lpopt.oracles import affine_constraint
    gamma = FeasibleSet.general([affine_constraint([1.0], 1.0)])
    with pytest.raises(UnsupportedSubproblemError):
        ReweightedL1Solver().solve(quadratic(np.eye(1)), LpRegularizer(0.5, lam=0.1), gamma, [0.0])


def test_callback_and_no_recording():
    seen = []
    rep = solve(one_d_oracle(), LpRegularizer(0.5, lam=0.1), FeasibleSet.unconstrained(), [1.0],
                callback=lambda k, x, sol: seen.append(k), record_iterates=False)
    assert rep.iterates == []
    assert seen == list(range(rep.iterations))
    assert rep.termination == CONVERGED
