"""Iteratively reweighted l1 minimization for lp-regularized problems (0 < p <= 1)."""

from .calculus import (ConeDescription, InfeasiblePointError, LpRegularizer, Support,
                       horizon_subdifferential, normal_cone_lp_ball, phi,
                       regular_subdifferential, smoothed_objective, support, weight, weights)
from .optimality import (AKKTResult, EMFCQResult, MultiplierSet, OptimalityCertificate,
                         akkt_certify, alpha_residual, emfcq_check, fit_multipliers,
                         horizon_obstruction, kkt_residual_p1, kkt_residual_p2)
from .oracles import Constraint, SmoothOracle, affine_constraint, ball_constraint, linear, quadratic
from .solver import (ReweightedL1Solver, SolveReport, SolverError, SolverParams, assert_descent,
                     estimate_lipschitz, power_iteration, solve)
from .subproblems import (FeasibleSet, SubproblemSolution, UnsupportedSubproblemError,
                          project_simplex, solve_subproblem)

__version__ = "0.1.0"
