"""Differential Riccati final-value problems for a fixed penalty schedule.

For a schedule ``alpha`` taking values in ``[-phi(0), M]``, the auxiliary
value of the inner regulator is quadratic,
``0.5 x' P_s x + Q_s' x + 0.5 R_s``, where (P, Q, R) solve final-value
problems driven by the quadratic weight ``K + a_inv(alpha_s)``.  Two
independent formulations are provided: the three component equations, and a
single augmented (n+1)-dimensional Riccati equation whose blocks reproduce
them.  Both integrate backward in time-to-go with fixed-step RK4 and
symmetrize after every step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import barrier as _barrier
from ._kernels import closed_loop_rk4, riccati_components_rk4, riccati_matrix_rk4
from .errors import DomainError, IntegrationDivergedError
from .lti import ControlSignal, Grid, Problem, Trajectory, _frozen, validate_schedule


@dataclass(frozen=True)
class AugmentedData:
    """Homogenized system absorbing the affine terms of a nonzero target.

    A_hat stacks A with a constant unit coordinate; the terminal block matrix
    carries Q_t = -P_t z and R_t = <z, P_t z>.
    """

    A_hat: np.ndarray
    B_hat: np.ndarray
    P_t_hat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_hat", _frozen(self.A_hat))
        object.__setattr__(self, "B_hat", _frozen(self.B_hat))
        object.__setattr__(self, "P_t_hat", _frozen(self.P_t_hat))


def augment(problem: Problem) -> AugmentedData:
    """Build the (n+1)-dimensional data from (A, B, P_t, z)."""
    n, m = problem.plant.n, problem.plant.m
    A_hat = np.zeros((n + 1, n + 1))
    A_hat[:n, :n] = problem.plant.A
    B_hat = np.zeros((n + 1, m))
    B_hat[:n, :] = problem.plant.B
    Q_t = -problem.P_t @ problem.z
    R_t = float(problem.z @ problem.P_t @ problem.z)
    P_t_hat = np.zeros((n + 1, n + 1))
    P_t_hat[:n, :n] = problem.P_t
    P_t_hat[:n, n] = Q_t
    P_t_hat[n, :n] = Q_t
    P_t_hat[n, n] = R_t
    return AugmentedData(A_hat=A_hat, B_hat=B_hat, P_t_hat=P_t_hat)


@dataclass(frozen=True)
class RiccatiSolution:
    """Time-sampled (P, Q, R) for a given schedule, in forward time order."""

    problem: Problem
    grid: Grid
    alpha: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "P", "Q", "R"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise IntegrationDivergedError(f"non-finite values in {name}")
            object.__setattr__(self, name, _frozen(arr))

    def interpolate(self, s: float) -> tuple[np.ndarray, np.ndarray, float]:
        """(P, Q, R) at time s, linear between grid nodes."""
        t = self.grid.horizon
        if not (-1e-12 * max(1.0, t) <= s <= t * (1.0 + 1e-12) + 1e-12):
            raise DomainError(f"time {s} outside [0, {t}]")
        pos = min(max(s, 0.0), t) / self.grid.h
        k = min(int(pos), self.grid.N - 1)
        w = pos - k
        P = (1.0 - w) * self.P[k] + w * self.P[k + 1]
        Q = (1.0 - w) * self.Q[k] + w * self.Q[k + 1]
        R = (1.0 - w) * self.R[k] + w * self.R[k + 1]
        return P, Q, float(R)


def _terminal_data(problem: Problem) -> tuple[np.ndarray, np.ndarray, float]:
    Q_t = -problem.P_t @ problem.z
    R_t = float(problem.z @ problem.P_t @ problem.z)
    return problem.P_t.copy(), Q_t, R_t


def _schedule_stage_values(problem: Problem, alpha: np.ndarray):
    """Forcing c = K + a_inv(alpha) and alpha itself at nodes and midpoints,
    flipped into time-to-go order for the kernels."""
    alpha_mids = 0.5 * (alpha[:-1] + alpha[1:])
    c_nodes = problem.K + _barrier.a_inv_values(problem.dual, alpha)
    c_mids = problem.K + _barrier.a_inv_values(problem.dual, alpha_mids)
    return (
        np.ascontiguousarray(c_nodes[::-1]),
        np.ascontiguousarray(c_mids[::-1]),
        np.ascontiguousarray(alpha[::-1]),
        np.ascontiguousarray(alpha_mids[::-1]),
    )


def solve_fvp_components(problem: Problem, alpha: np.ndarray, grid: Grid) -> RiccatiSolution:
    """Backward RK4 of the three component FVPs for the given schedule."""
    alpha = validate_schedule(problem, alpha, grid)
    P_T, Q_T, R_T = _terminal_data(problem)
    c_nodes, c_mids, a_nodes, a_mids = _schedule_stage_values(problem, alpha)
    A = problem.plant.A
    BBk = problem.plant.B @ problem.plant.B.T / problem.kappa
    with np.errstate(over="ignore", invalid="ignore"):
        P_tau, Q_tau, R_tau = riccati_components_rk4(
            A, np.ascontiguousarray(A.T), BBk, P_T, Q_T, R_T,
            c_nodes, c_mids, a_nodes, a_mids, grid.h,
        )
    return RiccatiSolution(
        problem=problem, grid=grid, alpha=alpha,
        P=P_tau[::-1], Q=Q_tau[::-1], R=R_tau[::-1],
    )


def solve_fvp_augmented(problem: Problem, alpha: np.ndarray, grid: Grid) -> RiccatiSolution:
    """Backward RK4 of the single augmented FVP; blocks extracted afterwards.

    Independent of :func:`solve_fvp_components`; the two must agree to
    discretization accuracy on every instance.
    """
    alpha = validate_schedule(problem, alpha, grid)
    n = problem.plant.n
    aug = augment(problem)
    alpha_mids = 0.5 * (alpha[:-1] + alpha[1:])
    c_nodes = problem.K + _barrier.a_inv_values(problem.dual, alpha)
    c_mids = problem.K + _barrier.a_inv_values(problem.dual, alpha_mids)

    def forcing(c, a):
        V = np.zeros((c.shape[0], n + 1, n + 1))
        for i in range(n):
            V[:, i, i] = c
        V[:, n, n] = -a
        return V

    V_nodes = np.ascontiguousarray(forcing(c_nodes, alpha)[::-1])
    V_mids = np.ascontiguousarray(forcing(c_mids, alpha_mids)[::-1])
    BBk_hat = aug.B_hat @ aug.B_hat.T / problem.kappa
    with np.errstate(over="ignore", invalid="ignore"):
        Phat_tau = riccati_matrix_rk4(
            aug.A_hat, np.ascontiguousarray(aug.A_hat.T), BBk_hat,
            aug.P_t_hat.copy(), V_nodes, V_mids, grid.h,
        )
    Phat = Phat_tau[::-1]
    return RiccatiSolution(
        problem=problem, grid=grid, alpha=alpha,
        P=Phat[:, :n, :n], Q=Phat[:, :n, n], R=Phat[:, n, n],
    )


def auxiliary_value(sol: RiccatiSolution, s: float, x: np.ndarray) -> float:
    """Quadratic value 0.5 x'P_s x + Q_s'x + 0.5 R_s at time s."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P, Q, R = sol.interpolate(s)
    return float(0.5 * x @ P @ x + Q @ x + 0.5 * R)


def feedback_control(sol: RiccatiSolution, s: float, x: np.ndarray) -> np.ndarray:
    """Affine feedback u = -(1/kappa) B'(P_s x + Q_s)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P, Q, _ = sol.interpolate(s)
    problem = sol.problem
    return -(problem.plant.B.T @ (P @ x + Q)) / problem.kappa


def closed_loop_rollout(problem: Problem, sol: RiccatiSolution,
                        x0: np.ndarray) -> tuple[Trajectory, ControlSignal]:
    """Forward RK4 of the closed loop under the solution's feedback law.

    The realized cost ``game_cost(x0, u, alpha)`` reproduces
    ``auxiliary_value(sol, 0, x0)`` up to quadrature error.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    grid = sol.grid
    BBk = problem.plant.B @ problem.plant.B.T / problem.kappa
    P_mids = np.ascontiguousarray(0.5 * (sol.P[:-1] + sol.P[1:]))
    Q_mids = np.ascontiguousarray(0.5 * (sol.Q[:-1] + sol.Q[1:]))
    with np.errstate(over="ignore", invalid="ignore"):
        states = closed_loop_rk4(problem.plant.A, BBk, sol.P, P_mids, sol.Q, Q_mids,
                                 x0, grid.h)
    if not np.all(np.isfinite(states)):
        raise IntegrationDivergedError("closed-loop rollout produced non-finite states")
    traj = Trajectory(states)
    return traj, ControlSignal(_realized_controls(problem, sol, states))


def _realized_controls(problem: Problem, sol: RiccatiSolution, states: np.ndarray) -> np.ndarray:
    Px = np.einsum("kij,kj->ki", sol.P, states)
    return -((Px + sol.Q) @ problem.plant.B) / problem.kappa
