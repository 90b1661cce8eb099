"""Shooting solver for the optimal-control two-point boundary value problem.

The optimal control and penalty schedule of the truncated problem satisfy a
TPBVP coupling the Riccati pair (P, Q) (terminal data) with the closed-loop
state (initial data), where the Riccati forcing is evaluated along the swept
state itself.  Only the terminal state is unknown: the solver integrates the
coupled system backward from a candidate terminal state and drives the
mismatch with the prescribed initial state to zero with a Nelder-Mead search
over that candidate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import barrier as _barrier
from ._kernels import KIND_LOG, KIND_TABLE, tpbvp_sweep_rk4
from .barrier import PhiKind
from .errors import IntegrationDivergedError, InvalidParameterError
from .lti import ControlSignal, Grid, Problem, Trajectory, cost_lqr, default_grid, game_cost
from .riccati import RiccatiSolution, _realized_controls, closed_loop_rollout
from .simplex import nelder_mead

_TABLE_SIZE = 8192


@dataclass(frozen=True)
class ShootingConfig:
    """Search parameters for the terminal-state shooting iteration.

    ``max_iters`` bounds each simplex run; ``restart_count`` bounds the
    restarts per resolution rung.  Restart simplices are re-inflated to a
    radius matched to the incumbent residual and the locally estimated
    sensitivity of the backward map (the map can amplify terminal-state
    perturbations by many orders of magnitude, so a fixed radius stalls).
    ``fixed_point_damping`` is the damped update of the restart center toward
    the incumbent best terminal state (1.0 restarts exactly at it).
    """

    max_iters: int = 400
    simplex_init_radius: float = 0.5
    residual_tol: float = 1e-6
    restart_count: int = 24
    fixed_point_damping: float = 1.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidParameterError("max_iters must be at least 1")
        if not (self.residual_tol > 0.0):
            raise InvalidParameterError("residual_tol must be positive")
        if not (0.0 < self.fixed_point_damping <= 1.0):
            raise InvalidParameterError("fixed_point_damping must lie in (0, 1]")
        if self.restart_count < 0:
            raise InvalidParameterError("restart_count must be nonnegative")


@dataclass(frozen=True)
class ShootingResult:
    """Converged trajectory, inputs of both players, and diagnostics."""

    terminal_state: np.ndarray
    trajectory: Trajectory
    control: ControlSignal
    alpha: np.ndarray
    riccati: RiccatiSolution
    value: float
    residual: float
    iterations: int
    converged: bool


def _barrier_kernel_args(problem: Problem):
    """Pack the active-quadratic lookup for the sweep kernel."""
    dual = problem.dual
    spec = dual.spec
    beta_M = dual.a_inv(problem.M)
    rhohat_M = dual.rho_hat(problem.M)
    if spec.phi_kind is PhiKind.LOG_BARRIER:
        return KIND_LOG, spec.b2, beta_M, rhohat_M, float(problem.M), 1.0, np.zeros(2), np.zeros(2)
    if rhohat_M <= 0.0:
        # Degenerate truncation: the cap branch is always active.
        return KIND_TABLE, spec.b2, beta_M, rhohat_M, float(problem.M), 1.0, np.zeros(2), np.zeros(2)
    rho_grid = np.linspace(0.0, rhohat_M, _TABLE_SIZE)
    tbl_beta = np.array([spec.dphi(float(r)) for r in rho_grid])
    tbl_alpha = np.array([dual.a(float(bb)) for bb in tbl_beta])
    return (KIND_TABLE, spec.b2, beta_M, rhohat_M, float(problem.M),
            rho_grid[1] - rho_grid[0], tbl_beta, tbl_alpha)


def _sweep(problem: Problem, xi_t_guess: np.ndarray, grid: Grid, kernel_args):
    """Run the coupled backward sweep; returns (P, Q, R, X) in forward order."""
    P_T = problem.P_t.copy()
    Q_T = -problem.P_t @ problem.z
    R_T = float(problem.z @ problem.P_t @ problem.z)
    A = problem.plant.A
    BBk = problem.plant.B @ problem.plant.B.T / problem.kappa
    kind, b2, beta_M, rhohat_M, M, tbl_step, tbl_beta, tbl_alpha = kernel_args
    with np.errstate(over="ignore", invalid="ignore"):
        P_tau, Q_tau, R_tau, X_tau = tpbvp_sweep_rk4(
            A, np.ascontiguousarray(A.T), BBk, P_T, Q_T, R_T,
            np.asarray(xi_t_guess, dtype=float), grid.h, grid.N, problem.K,
            kind, b2, beta_M, rhohat_M, M, tbl_step, tbl_beta, tbl_alpha,
        )
    return P_tau[::-1], Q_tau[::-1], R_tau[::-1], X_tau[::-1]


def backward_sweep(problem: Problem, x: np.ndarray, xi_t_guess: np.ndarray,
                   grid: Grid) -> tuple[RiccatiSolution, Trajectory, float]:
    """Integrate the coupled TPBVP system backward from a terminal-state guess.

    Returns the Riccati solution along the swept state, the swept trajectory,
    and the residual |x - xi_0| against the prescribed initial state.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P, Q, R, X = _sweep(problem, xi_t_guess, grid, _barrier_kernel_args(problem))
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(X))):
        raise IntegrationDivergedError("backward sweep produced non-finite values")
    rho = np.sum(X * X, axis=1)
    alpha = _barrier.maximizer_alpha_M_values(problem.dual, problem.M, rho)
    sol = RiccatiSolution(problem=problem, grid=grid, alpha=alpha, P=P, Q=Q, R=R)
    residual = float(np.linalg.norm(x - X[0]))
    return sol, Trajectory(X), residual


def _assemble_result(problem: Problem, x: np.ndarray, xi_t: np.ndarray, grid: Grid,
                     iterations: int, tol: float) -> ShootingResult:
    sol, traj, residual = backward_sweep(problem, x, xi_t, grid)
    u = ControlSignal(_realized_controls(problem, sol, traj.states))
    value = game_cost(problem, x, u, sol.alpha, grid)
    return ShootingResult(
        terminal_state=np.asarray(xi_t, dtype=float).copy(),
        trajectory=traj,
        control=u,
        alpha=sol.alpha,
        riccati=sol,
        value=value,
        residual=residual,
        iterations=iterations,
        converged=residual <= tol,
    )


_COARSE_RUNGS = (125, 250)
_RADIUS_CYCLE = (2.0, 60.0, 0.07, 600.0)
_STALL_LIMIT = 6
_STALL_FACTOR = 0.985  # an attempt must improve by 1.5% to count as progress
_RUNG_BUDGET_FACTOR = 10  # per-rung simplex iteration budget, times max_iters


def _gain_estimate(residual_of, xi_t: np.ndarray, f: float) -> float:
    """Largest finite-difference slope of the residual at xi_t (>= 1)."""
    eps = 1e-9 * (1.0 + float(np.linalg.norm(xi_t)))
    gain = 1.0
    for i in range(xi_t.size):
        e = np.zeros_like(xi_t)
        e[i] = eps
        fe = residual_of(xi_t + e)
        if math.isfinite(fe):
            gain = max(gain, abs(fe - f) / eps)
    return gain


def solve_tpbvp(problem: Problem, x: np.ndarray, config: ShootingConfig | None = None,
                grid: Grid | None = None,
                xi_t_init: np.ndarray | None = None) -> ShootingResult:
    """Solve the TPBVP by Nelder-Mead shooting over the terminal state.

    Candidate starting points (the open-loop endpoint ``expm(A t) x``, the
    barrier-free LQR closed-loop endpoint, 0, z, and ``xi_t_init`` when
    given) are ranked on a coarse grid, and the search proceeds through a
    coarse-to-fine resolution ladder ending at ``grid``.  On each rung the
    simplex is restarted around the incumbent with its radius re-inflated to
    the incumbent residual divided by the locally estimated map sensitivity,
    cycling over spread factors when progress stalls.  Non-convergence is
    reported in the result, not raised.
    """
    config = config or ShootingConfig()
    grid = grid or default_grid(problem.horizon)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.linalg.norm(x) >= problem.b:
        warnings.warn("initial state lies outside the constraint ball; "
                      "the exact problem has infinite value there", stacklevel=2)
    kernel_args = _barrier_kernel_args(problem)

    def residual_on(g: Grid):
        def residual_of(xi_t: np.ndarray) -> float:
            _, _, _, X = _sweep(problem, xi_t, g, kernel_args)
            r = x - X[0]
            val = math.sqrt(float(r @ r))
            return val if math.isfinite(val) else math.inf
        return residual_of

    rungs = [N for N in _COARSE_RUNGS if N < grid.N] + [grid.N]
    coarse = Grid(N=rungs[0], horizon=problem.horizon)

    centers = [expm(problem.plant.A * problem.horizon) @ x,
               np.zeros_like(x), problem.z.copy()]
    try:
        lqr_traj, _ = closed_loop_rollout(problem, _solve_lqr_fvp(problem, coarse), x)
        centers.insert(1, lqr_traj.terminal.copy())
    except IntegrationDivergedError:
        pass
    if xi_t_init is not None:
        centers.insert(0, np.asarray(xi_t_init, dtype=float))
    resid_coarse = residual_on(coarse)
    center_fs = [resid_coarse(c) for c in centers]
    best_x = np.asarray(centers[int(np.argmin(center_fs))], dtype=float)

    total_iters = 0
    converged_points: list[np.ndarray] = []
    best_f = math.inf
    for N in rungs:
        residual_of = residual_on(Grid(N=N, horizon=problem.horizon))
        best_f = residual_of(best_x)
        target = config.residual_tol if N == grid.N else max(0.1 * config.residual_tol, 1e-9)
        # A final rung entered far above tolerance cannot recover (the map's
        # conditioning only worsens with resolution); keep its budget short.
        hopeless = (N == grid.N and N != rungs[0]
                    and best_f > 1e4 * config.residual_tol)
        attempts_allowed = 2 if hopeless else config.restart_count + 1
        attempt_iters = min(config.max_iters, 150) if hopeless else config.max_iters
        rung_budget = _RUNG_BUDGET_FACTOR * config.max_iters
        used = 0
        stall = 0
        center = best_x
        for attempt in range(attempts_allowed):
            if best_f <= target or stall > _STALL_LIMIT or used >= rung_budget:
                break
            gain = _gain_estimate(residual_of, best_x, best_f)
            radius = float(np.clip(best_f / gain * _RADIUS_CYCLE[stall % 4],
                                   1e-10, config.simplex_init_radius))
            d = config.fixed_point_damping
            center = d * best_x + (1.0 - d) * center
            res = nelder_mead(residual_of, center, radius,
                              max_iters=attempt_iters,
                              diameter_tol=min(1e-9, 1e-3 * radius),
                              ftarget=target)
            total_iters += res.iterations
            used += res.iterations
            stall = 0 if res.fx < _STALL_FACTOR * best_f else stall + 1
            if res.fx < best_f:
                best_x, best_f = res.x, res.fx
            if res.fx <= config.residual_tol and N == grid.N:
                converged_points.append(res.x)
    if len(converged_points) > 1:
        spread = max(np.linalg.norm(p - converged_points[0]) for p in converged_points[1:])
        if spread > 1e-4 * (1.0 + np.linalg.norm(converged_points[0])):
            warnings.warn(f"multiple distinct terminal states converged (spread {spread:.3g}); "
                          "the boundary value problem may admit several solutions", stacklevel=2)
    return _assemble_result(problem, x, best_x, grid, total_iters, config.residual_tol)


def unconstrained_reference(problem: Problem, x: np.ndarray,
                            grid: Grid | None = None) -> ShootingResult:
    """Barrier-free LQR reference with the penalty maximizer as a diagnostic.

    Synthesizes the feedback with the barrier forcing dropped (quadratic state
    weight K only), rolls the loop forward from x, and evaluates the pointwise
    penalty maximizer along the resulting trajectory.  ``value`` is the cost
    without the barrier term; ``alpha`` holds the diagnostic schedule.
    """
    grid = grid or default_grid(problem.horizon)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lqr_sol = _solve_lqr_fvp(problem, grid)
    traj, u = closed_loop_rollout(problem, lqr_sol, x)
    rho = np.sum(traj.states * traj.states, axis=1)
    diag_alpha = _barrier.maximizer_alpha_M_values(problem.dual, problem.M, rho)
    return ShootingResult(
        terminal_state=traj.terminal.copy(),
        trajectory=traj,
        control=u,
        alpha=diag_alpha,
        riccati=lqr_sol,
        value=cost_lqr(problem, x, u, grid),
        residual=0.0,
        iterations=0,
        converged=True,
    )


def _solve_lqr_fvp(problem: Problem, grid: Grid) -> RiccatiSolution:
    """Component FVP solve with the barrier forcing removed (weight K only)."""
    from ._kernels import riccati_components_rk4

    P_T = problem.P_t.copy()
    Q_T = -problem.P_t @ problem.z
    R_T = float(problem.z @ problem.P_t @ problem.z)
    A = problem.plant.A
    BBk = problem.plant.B @ problem.plant.B.T / problem.kappa
    c_nodes = np.full(grid.N + 1, problem.K)
    c_mids = np.full(grid.N, problem.K)
    zeros_n = np.zeros(grid.N + 1)
    zeros_m = np.zeros(grid.N)
    with np.errstate(over="ignore", invalid="ignore"):
        P_tau, Q_tau, R_tau = riccati_components_rk4(
            A, np.ascontiguousarray(A.T), BBk, P_T, Q_T, R_T,
            c_nodes, c_mids, zeros_n, zeros_m, grid.h,
        )
    return RiccatiSolution(
        problem=problem, grid=grid,
        alpha=np.full(grid.N + 1, -problem.dual.phi0),
        P=P_tau[::-1], Q=Q_tau[::-1], R=R_tau[::-1],
    )
