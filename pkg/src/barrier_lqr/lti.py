"""Linear time-invariant dynamics, trajectories, and cost functionals.

Trajectories are produced by classical fixed-step RK4 with controls interpreted
piecewise-linearly between grid nodes; all integral costs use the composite
trapezoid rule on the same grid, so trajectories and quadrature share nodes.
Types are immutable after construction (arrays are copied and marked
read-only) and every operation is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import barrier as _barrier
from ._kernels import simulate_rk4
from .barrier import DualBarrier
from .errors import InvalidParameterError, ShapeError

_ALPHA_SLACK = 1e-9  # tolerated roundoff when validating schedule bounds


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Plant:
    """State matrices of dx/ds = A x + B u."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0]:
            raise ShapeError(f"B must be {A.shape[0]} x m, got shape {B.shape}")
        if not np.any(B != 0.0):
            raise InvalidParameterError("B must have at least one nonzero entry")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class Grid:
    """Uniform time grid with N steps on [0, horizon]."""

    N: int
    horizon: float

    def __post_init__(self):
        if self.N < 2:
            raise InvalidParameterError(f"grid needs N >= 2 steps, got {self.N}")
        if not (self.horizon > 0.0):
            raise InvalidParameterError(f"horizon must be positive, got {self.horizon}")

    @property
    def h(self) -> float:
        return self.horizon / self.N

    @cached_property
    def times(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.horizon, self.N + 1))


def default_grid(horizon: float) -> Grid:
    """Default resolution: 500 steps per unit time (N=2000 at horizon 4)."""
    return Grid(N=max(2, int(round(500.0 * horizon))), horizon=float(horizon))


@dataclass(frozen=True)
class ControlSignal:
    """Control samples at grid nodes, shape (N+1, m), piecewise-linear in time."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ShapeError(f"control samples must be (N+1, m), got shape {s.shape}")
        object.__setattr__(self, "samples", _frozen(s))

    @staticmethod
    def zeros(grid: Grid, m: int) -> "ControlSignal":
        return ControlSignal(np.zeros((grid.N + 1, m)))


@dataclass(frozen=True)
class Trajectory:
    """State samples at grid nodes, shape (N+1, n)."""

    states: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise ShapeError(f"trajectory states must be (N+1, n), got shape {s.shape}")
        object.__setattr__(self, "states", _frozen(s))

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.states * self.states, axis=1))


@dataclass(frozen=True)
class Problem:
    """Plant, horizon, weights, terminal data, and truncated barrier level.

    Enforces ``K + dphi(0) >= 0`` (so the combined quadratic state weight is
    nonnegative for every admissible penalty), ``kappa > 0``, symmetric PSD
    terminal weight, and ``M >= -phi(0)``.
    """

    plant: Plant
    horizon: float
    K: float
    kappa: float
    P_t: np.ndarray
    z: np.ndarray
    dual: DualBarrier
    M: float

    def __post_init__(self):
        n = self.plant.n
        if not (self.horizon > 0.0):
            raise InvalidParameterError(f"horizon must be positive, got {self.horizon}")
        if not (self.kappa > 0.0):
            raise InvalidParameterError(f"kappa must be positive, got {self.kappa}")
        if self.K + self.dual.dphi0 < -1e-12:
            raise InvalidParameterError(
                f"state weight must satisfy K >= -dphi(0) = {-self.dual.dphi0}, got {self.K}"
            )
        if self.M < -self.dual.phi0 - 1e-12:
            raise InvalidParameterError(
                f"truncation level must satisfy M >= -phi(0) = {-self.dual.phi0}, got {self.M}"
            )
        P_t = np.atleast_2d(np.asarray(self.P_t, dtype=float))
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if P_t.shape != (n, n):
            raise ShapeError(f"P_t must be {n} x {n}, got shape {P_t.shape}")
        if z.shape != (n,):
            raise ShapeError(f"z must have length {n}, got shape {z.shape}")
        if np.max(np.abs(P_t - P_t.T)) > 1e-10 * max(1.0, np.max(np.abs(P_t))):
            raise InvalidParameterError("P_t must be symmetric")
        if np.min(np.linalg.eigvalsh(0.5 * (P_t + P_t.T))) < -1e-10:
            raise InvalidParameterError("P_t must be positive semidefinite")
        object.__setattr__(self, "P_t", _frozen(0.5 * (P_t + P_t.T)))
        object.__setattr__(self, "z", _frozen(z))

    @property
    def b(self) -> float:
        return self.dual.spec.b


def terminal_cost(problem: Problem, x: np.ndarray) -> float:
    """Quadratic terminal cost 0.5 <x - z, P_t (x - z)>."""
    d = np.asarray(x, dtype=float) - problem.z
    return 0.5 * float(d @ problem.P_t @ d)


def _check_lengths(grid: Grid, *arrays) -> None:
    for a in arrays:
        if a.shape[0] != grid.N + 1:
            raise ShapeError(f"expected {grid.N + 1} samples, got {a.shape[0]}")


def simulate(plant: Plant, x0: np.ndarray, u: ControlSignal, grid: Grid) -> Trajectory:
    """RK4 integration of dx/ds = A x + B u from x0 over the grid."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (plant.n,):
        raise ShapeError(f"x0 must have length {plant.n}, got shape {x0.shape}")
    su = u.samples
    if su.shape[1] != plant.m:
        raise ShapeError(f"control must have {plant.m} columns, got {su.shape[1]}")
    _check_lengths(grid, su)
    u_mids = 0.5 * (su[:-1] + su[1:])
    states = simulate_rk4(plant.A, plant.B, x0, su, u_mids, grid.h)
    return Trajectory(states)


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(np.trapezoid(values, dx=h))


def control_energy(u: ControlSignal, grid: Grid) -> float:
    """Trapezoid approximation of the squared L2 norm of u."""
    _check_lengths(grid, u.samples)
    return _trapezoid(np.sum(u.samples * u.samples, axis=1), grid.h)


def cost_exact(problem: Problem, x0: np.ndarray, u: ControlSignal, grid: Grid) -> float:
    """Barrier-constrained cost; +inf on any sampled boundary contact.

    Integral of (K/2)|xi|^2 + (1/2) Phi(|xi|^2) plus control energy and the
    terminal cost.  Quadrature of a blown-up integrand is meaningless, so a
    single node with |xi| >= b yields +inf outright.
    """
    traj = simulate(problem.plant, x0, u, grid)
    rho = np.sum(traj.states * traj.states, axis=1)
    if np.any(rho >= problem.b * problem.b):
        return math.inf
    integrand = 0.5 * problem.K * rho + 0.5 * _barrier.phi_values(problem.dual, rho)
    return (
        _trapezoid(integrand, grid.h)
        + 0.5 * problem.kappa * control_energy(u, grid)
        + terminal_cost(problem, traj.terminal)
    )


def cost_truncated(problem: Problem, x0: np.ndarray, u: ControlSignal, grid: Grid) -> float:
    """Cost with the truncated barrier; finite for every trajectory."""
    traj = simulate(problem.plant, x0, u, grid)
    rho = np.sum(traj.states * traj.states, axis=1)
    integrand = 0.5 * problem.K * rho + 0.5 * _barrier.phi_M_values(problem.dual, problem.M, rho)
    return (
        _trapezoid(integrand, grid.h)
        + 0.5 * problem.kappa * control_energy(u, grid)
        + terminal_cost(problem, traj.terminal)
    )


def cost_lqr(problem: Problem, x0: np.ndarray, u: ControlSignal, grid: Grid) -> float:
    """Cost with the barrier term removed entirely (reference solves)."""
    traj = simulate(problem.plant, x0, u, grid)
    rho = np.sum(traj.states * traj.states, axis=1)
    return (
        _trapezoid(0.5 * problem.K * rho, grid.h)
        + 0.5 * problem.kappa * control_energy(u, grid)
        + terminal_cost(problem, traj.terminal)
    )


def validate_schedule(problem: Problem, alpha: np.ndarray, grid: Grid) -> np.ndarray:
    """Check a penalty schedule lies in [-phi(0), M] at every node."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    _check_lengths(grid, alpha)
    lo = -problem.dual.phi0
    if np.any(alpha < lo - _ALPHA_SLACK) or np.any(alpha > problem.M + _ALPHA_SLACK):
        raise InvalidParameterError(
            f"penalty schedule must lie in [{lo}, {problem.M}]"
        )
    return np.clip(alpha, lo, problem.M)


def game_cost(problem: Problem, x0: np.ndarray, u: ControlSignal,
              alpha: np.ndarray, grid: Grid) -> float:
    """Two-player cost for a fixed penalty schedule alpha.

    Integrand nu(x, a) = (K/2)|x|^2 + (1/2)(a_inv(a)|x|^2 - a); the schedule
    is sampled at grid nodes and must lie in [-phi(0), M].
    """
    alpha = validate_schedule(problem, alpha, grid)
    traj = simulate(problem.plant, x0, u, grid)
    rho = np.sum(traj.states * traj.states, axis=1)
    ainv = _barrier.a_inv_values(problem.dual, alpha)
    integrand = 0.5 * problem.K * rho + 0.5 * (ainv * rho - alpha)
    return (
        _trapezoid(integrand, grid.h)
        + 0.5 * problem.kappa * control_energy(u, grid)
        + terminal_cost(problem, traj.terminal)
    )


def violation_measure(problem: Problem, traj: Trajectory, grid: Grid,
                      radius: float | None = None) -> float:
    """Lebesgue measure of { s : |xi_s| >= radius } (radius defaults to b).

    Node counting with linear-interpolation refinement of crossing times, so
    an isolated tangential contact at a single node contributes zero.
    """
    _check_lengths(grid, traj.states)
    r = problem.b if radius is None else float(radius)
    g = traj.norms() - r
    h = grid.h
    total = 0.0
    for k in range(grid.N):
        g0, g1 = g[k], g[k + 1]
        if g0 >= 0.0 and g1 >= 0.0:
            total += h
        elif g0 >= 0.0 and g1 < 0.0:
            total += h * g0 / (g0 - g1)
        elif g0 < 0.0 and g1 >= 0.0:
            total += h * g1 / (g1 - g0)
    return total
