"""Shared fixtures: canonical problem instances and kernel warmup."""

from __future__ import annotations

import numpy as np
import pytest

import barrier_lqr as bl


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation of the integration kernels once per session.

    Keeps timed tests measuring solver work, not compiler work; compiled
    kernels are disk-cached so later sessions skip this cost too.
    """
    dual = bl.conjugate(bl.make_log_barrier(3.0))
    plant = bl.Plant(A=np.zeros((1, 1)), B=np.ones((1, 1)))
    prob = bl.Problem(plant=plant, horizon=0.1, K=0.0, kappa=1.0,
                      P_t=np.zeros((1, 1)), z=np.zeros(1), dual=dual, M=5.0)
    grid = bl.Grid(N=4, horizon=0.1)
    alpha = np.zeros(grid.N + 1)
    sol = bl.solve_fvp_components(prob, alpha, grid)
    bl.solve_fvp_augmented(prob, alpha, grid)
    bl.closed_loop_rollout(prob, sol, np.array([0.5]))
    bl.simulate(plant, np.array([0.5]), bl.ControlSignal.zeros(grid, 1), grid)
    bl.backward_sweep(prob, np.array([0.5]), np.array([0.2]), grid)


@pytest.fixture(scope="session")
def log_dual():
    return bl.conjugate(bl.make_log_barrier(3.0))


@pytest.fixture(scope="session")
def case1_problem(log_dual):
    plant = bl.Plant(A=np.array([[-1.0, 2.0], [-1.0, 1.0]]), B=np.array([[1.0], [0.0]]))
    return bl.Problem(plant=plant, horizon=4.0, K=0.1, kappa=1.0,
                      P_t=np.eye(2), z=np.zeros(2), dual=log_dual, M=50.0)


@pytest.fixture(scope="session")
def case2_problem(log_dual):
    plant = bl.Plant(A=np.array([[-1.0, 2.0], [-1.0, 1.0]]), B=np.array([[1.0], [0.0]]))
    return bl.Problem(plant=plant, horizon=4.0, K=0.1, kappa=1.0,
                      P_t=10.0 * np.eye(2), z=np.array([1.0, 1.0]), dual=log_dual, M=50.0)


@pytest.fixture(scope="session")
def case1_x0():
    return np.array([1.6, -1.6])


@pytest.fixture(scope="session")
def case1_grid():
    return bl.Grid(N=2000, horizon=4.0)


@pytest.fixture(scope="session")
def case1_result(case1_problem, case1_x0, case1_grid):
    """The converged Case I solve, shared by the solver and audit tests."""
    return bl.solve_tpbvp(case1_problem, case1_x0, grid=case1_grid)


@pytest.fixture(scope="session")
def scalar_problem(log_dual):
    """Scalar integrator with the tanh-oracle penalty level available."""
    plant = bl.Plant(A=np.zeros((1, 1)), B=np.ones((1, 1)))
    return bl.Problem(plant=plant, horizon=1.0, K=0.0, kappa=1.0,
                      P_t=np.zeros((1, 1)), z=np.zeros(1), dual=log_dual, M=50.0)
