"""Riccati FVP tests against analytic oracles and internal identities.

The scalar workhorse instance fixes a_inv(alpha) = 1 by choosing the
constant schedule alpha = a(1), which turns the state FVP into
dP/dtau = 1 - P^2 with closed forms (tanh, fixed point) and makes Q and R
linear ODEs with explicit solutions.
"""

import math

import numpy as np
import pytest

import barrier_lqr as bl
from barrier_lqr.errors import DomainError, InvalidParameterError
from barrier_lqr.riccati import augment


@pytest.fixture(scope="module")
def tanh_alpha(log_dual):
    return log_dual.a(1.0)  # makes the quadratic weight a_inv(alpha) = 1


def scalar_problem_with(log_dual, P_t, z=0.0, horizon=1.0):
    plant = bl.Plant(A=np.zeros((1, 1)), B=np.ones((1, 1)))
    return bl.Problem(plant=plant, horizon=horizon, K=0.0, kappa=1.0,
                      P_t=np.array([[P_t]]), z=np.array([z]), dual=log_dual, M=50.0)


class TestComponentSolver:
    def test_tanh_oracle(self, log_dual, tanh_alpha):
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=1000, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        assert sol.P[0, 0, 0] == pytest.approx(math.tanh(1.0), abs=1e-8)
        # interior nodes follow tanh of time-to-go
        for k in (0, 250, 500, 750):
            tau = grid.horizon - grid.times[k]
            assert sol.P[k, 0, 0] == pytest.approx(math.tanh(tau), abs=1e-8)

    def test_fixed_point(self, log_dual, tanh_alpha):
        prob = scalar_problem_with(log_dual, 1.0)
        grid = bl.Grid(N=500, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        assert np.max(np.abs(sol.P - 1.0)) <= 1e-12

    def test_affine_closed_forms(self, log_dual, tanh_alpha):
        """With P = 1 and z = 1: Q(tau) = -e^{-tau}, R(tau) = 1 - a tau - (1-e^{-2tau})/2."""
        prob = scalar_problem_with(log_dual, 1.0, z=1.0)
        grid = bl.Grid(N=1000, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        taus = grid.horizon - grid.times
        assert np.max(np.abs(sol.Q[:, 0] + np.exp(-taus))) <= 1e-9
        r_expect = 1.0 - tanh_alpha * taus - 0.5 * (1.0 - np.exp(-2.0 * taus))
        assert np.max(np.abs(sol.R - r_expect)) <= 1e-9

    def test_terminal_conditions(self, case1_problem):
        grid = bl.Grid(N=200, horizon=4.0)
        alpha = np.full(grid.N + 1, 10.0)
        sol = bl.solve_fvp_components(case1_problem, alpha, grid)
        assert np.allclose(sol.P[-1], case1_problem.P_t)
        assert np.allclose(sol.Q[-1], -case1_problem.P_t @ case1_problem.z)
        assert sol.R[-1] == pytest.approx(
            float(case1_problem.z @ case1_problem.P_t @ case1_problem.z))

    def test_symmetry_and_state_block_psd(self, case2_problem):
        grid = bl.Grid(N=400, horizon=4.0)
        alpha = np.clip(25.0 + 20.0 * np.sin(grid.times), 0.0, 50.0)
        sol = bl.solve_fvp_components(case2_problem, alpha, grid)
        asym = np.max(np.abs(sol.P - np.transpose(sol.P, (0, 2, 1))))
        assert asym <= 1e-10
        min_eig = min(np.min(np.linalg.eigvalsh(P)) for P in sol.P)
        assert min_eig >= -1e-8

    def test_zero_forcing_gives_zero(self, log_dual):
        # alpha = -phi(0) = 0 with K = -dphi(0) makes the forcing vanish
        plant = bl.Plant(A=np.zeros((1, 1)), B=np.ones((1, 1)))
        prob = bl.Problem(plant=plant, horizon=1.0, K=-log_dual.dphi0, kappa=1.0,
                          P_t=np.zeros((1, 1)), z=np.zeros(1), dual=log_dual, M=50.0)
        grid = bl.Grid(N=100, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.zeros(grid.N + 1), grid)
        assert np.max(np.abs(sol.P)) == 0.0

    def test_step_halving_fourth_order(self, case1_problem):
        vals = {}
        for N in (100, 200, 400):
            grid = bl.Grid(N=N, horizon=4.0)
            alpha = np.full(grid.N + 1, 20.0)
            vals[N] = bl.solve_fvp_components(case1_problem, alpha, grid).P[0]
        e1 = np.max(np.abs(vals[100] - vals[400]))
        e2 = np.max(np.abs(vals[200] - vals[400]))
        assert e2 <= 0.12 * e1  # ~16x shrink for O(h^4)

    def test_schedule_validation(self, case1_problem):
        grid = bl.Grid(N=50, horizon=4.0)
        with pytest.raises(InvalidParameterError):
            bl.solve_fvp_components(case1_problem, np.full(grid.N + 1, 51.0), grid)


class TestAugmentedSolver:
    def test_block_structure(self, case2_problem):
        aug = augment(case2_problem)
        n = case2_problem.plant.n
        assert aug.A_hat.shape == (n + 1, n + 1)
        assert np.allclose(aug.A_hat[:n, :n], case2_problem.plant.A)
        assert np.all(aug.A_hat[n, :] == 0.0) and np.all(aug.A_hat[:, n][:n] == 0.0)
        assert np.allclose(aug.B_hat[:n], case2_problem.plant.B)
        Q_t = -case2_problem.P_t @ case2_problem.z
        assert np.allclose(aug.P_t_hat[:n, n], Q_t)
        assert aug.P_t_hat[n, n] == pytest.approx(
            float(case2_problem.z @ case2_problem.P_t @ case2_problem.z))

    def test_agrees_with_components(self, case2_problem):
        grid = bl.Grid(N=500, horizon=4.0)
        alpha = np.clip(30.0 + 15.0 * np.cos(2.0 * grid.times), 0.0, 50.0)
        sol_c = bl.solve_fvp_components(case2_problem, alpha, grid)
        sol_a = bl.solve_fvp_augmented(case2_problem, alpha, grid)
        assert np.max(np.abs(sol_c.P - sol_a.P)) <= 1e-6
        assert np.max(np.abs(sol_c.Q - sol_a.Q)) <= 1e-6
        assert np.max(np.abs(sol_c.R - sol_a.R)) <= 1e-6

    def test_zero_target_keeps_q_zero(self, case1_problem):
        grid = bl.Grid(N=200, horizon=4.0)
        alpha = np.full(grid.N + 1, 5.0)
        sol = bl.solve_fvp_augmented(case1_problem, alpha, grid)
        assert np.max(np.abs(sol.Q)) == 0.0
        # R is driven only by -alpha
        assert sol.R[0] == pytest.approx(-5.0 * 4.0, rel=1e-10)

    def test_augmented_block_indefinite_in_general(self, log_dual):
        """The full block [[P, Q], [Q', R]] need not be PSD: any positive
        schedule drives R negative (the scalar tanh instance is a
        counterexample), even though the state block P stays PSD."""
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=200, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, log_dual.a(1.0)), grid)
        assert sol.R[0] < 0.0
        block = np.block([[sol.P[0], sol.Q[0][:, None]], [sol.Q[0][None, :], sol.R[0]]])
        assert np.min(np.linalg.eigvalsh(block)) < 0.0
        assert all(np.min(np.linalg.eigvalsh(P)) >= -1e-10 for P in sol.P[::20])


class TestValueAndFeedback:
    def test_terminal_identity(self, case2_problem):
        grid = bl.Grid(N=200, horizon=4.0)
        alpha = np.full(grid.N + 1, 10.0)
        sol = bl.solve_fvp_components(case2_problem, alpha, grid)
        for x in (np.array([0.3, -0.7]), np.array([1.0, 1.0]), np.zeros(2)):
            assert bl.auxiliary_value(sol, 4.0, x) == pytest.approx(
                bl.terminal_cost(case2_problem, x), abs=1e-10)
        assert bl.auxiliary_value(sol, 4.0, case2_problem.z) == pytest.approx(0.0, abs=1e-12)

    def test_scalar_value_with_alpha_term(self, log_dual, tanh_alpha):
        """Value = quadratic tanh part plus the schedule's accumulated -alpha/2."""
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=1000, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        expected = 0.5 * math.tanh(1.0) - 0.5 * tanh_alpha * 1.0
        assert bl.auxiliary_value(sol, 0.0, np.array([1.0])) == pytest.approx(expected, abs=1e-8)
        assert 0.5 * math.tanh(1.0) == pytest.approx(0.380797, abs=1e-6)

    def test_feedback_forms(self, log_dual, tanh_alpha):
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=1000, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        u = bl.feedback_control(sol, 0.0, np.array([1.0]))
        assert u[0] == pytest.approx(-math.tanh(1.0), abs=1e-8)
        zero_sol = bl.solve_fvp_components(
            scalar_problem_with(log_dual, 0.0),
            np.zeros(grid.N + 1), grid)
        assert bl.feedback_control(zero_sol, 0.5, np.array([2.0]))[0] != 0.0  # P > 0 forcing

    def test_feedback_stationary_point(self, case2_problem):
        grid = bl.Grid(N=300, horizon=4.0)
        alpha = np.full(grid.N + 1, 5.0)
        sol = bl.solve_fvp_components(case2_problem, alpha, grid)
        P, Q, _ = sol.interpolate(1.0)
        x_star = -np.linalg.solve(P, Q)
        u = bl.feedback_control(sol, 1.0, x_star)
        assert np.max(np.abs(u)) <= 1e-10

    def test_time_domain_error(self, log_dual, tanh_alpha):
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=100, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.full(grid.N + 1, tanh_alpha), grid)
        with pytest.raises(DomainError):
            bl.auxiliary_value(sol, -0.1, np.array([1.0]))
        with pytest.raises(DomainError):
            bl.feedback_control(sol, 1.2, np.array([1.0]))


class TestRollout:
    def test_zero_instance(self, log_dual):
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=100, horizon=1.0)
        sol = bl.solve_fvp_components(prob, np.zeros(grid.N + 1), grid)
        traj, u = bl.closed_loop_rollout(prob, sol, np.zeros(1))
        assert np.max(np.abs(traj.states)) == 0.0
        assert np.max(np.abs(u.samples)) == 0.0

    def test_scalar_realized_cost_matches_value(self, log_dual, tanh_alpha):
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=1000, horizon=1.0)
        alpha = np.full(grid.N + 1, tanh_alpha)
        sol = bl.solve_fvp_components(prob, alpha, grid)
        traj, u = bl.closed_loop_rollout(prob, sol, np.array([1.0]))
        realized = bl.game_cost(prob, np.array([1.0]), u, alpha, grid)
        assert realized == pytest.approx(bl.auxiliary_value(sol, 0.0, np.array([1.0])), abs=1e-4)

    def test_value_identity_randomized(self, log_dual):
        """Rollout cost reproduces the quadratic value on random small instances."""
        rng = np.random.default_rng(42)
        grid_n = 600
        for trial in range(10):
            n = int(rng.integers(1, 4))
            m = int(rng.integers(1, 3))
            A = rng.uniform(-1.0, 1.0, (n, n))
            B = rng.uniform(-1.0, 1.0, (n, m))
            if not np.any(B):
                B[0, 0] = 1.0
            L = rng.uniform(-1.0, 1.0, (n, n))
            prob = bl.Problem(
                plant=bl.Plant(A=A, B=B), horizon=1.5, K=float(rng.uniform(0.0, 1.0)),
                kappa=float(rng.uniform(0.5, 2.0)), P_t=L @ L.T,
                z=rng.uniform(-0.5, 0.5, n), dual=log_dual, M=50.0,
            )
            grid = bl.Grid(N=grid_n, horizon=1.5)
            alpha = np.clip(25.0 + 20.0 * np.sin(grid.times + trial), 0.0, 50.0)
            sol = bl.solve_fvp_components(prob, alpha, grid)
            x0 = rng.uniform(-1.0, 1.0, n)
            _, u = bl.closed_loop_rollout(prob, sol, x0)
            realized = bl.game_cost(prob, x0, u, alpha, grid)
            value = bl.auxiliary_value(sol, 0.0, x0)
            assert abs(value - realized) <= 5e-4 * (1.0 + abs(value))

    def test_rollout_under_converged_schedule(self, case1_problem, case1_result,
                                              case1_grid, case1_x0):
        """Rolling out the solved schedule's feedback reproduces its value."""
        sol = case1_result.riccati
        _, u = bl.closed_loop_rollout(case1_problem, sol, case1_x0)
        realized = bl.game_cost(case1_problem, case1_x0, u, sol.alpha, case1_grid)
        value = bl.auxiliary_value(sol, 0.0, case1_x0)
        assert abs(realized - value) <= 1e-3 * (1.0 + abs(value))

    def test_feedback_is_minimizer(self, log_dual, tanh_alpha):
        """Perturbed controls never beat the feedback law for its own schedule."""
        prob = scalar_problem_with(log_dual, 0.0)
        grid = bl.Grid(N=2000, horizon=1.0)
        alpha = np.full(grid.N + 1, tanh_alpha)
        sol = bl.solve_fvp_components(prob, alpha, grid)
        x0 = np.array([1.0])
        _, u = bl.closed_loop_rollout(prob, sol, x0)
        base = bl.game_cost(prob, x0, u, alpha, grid)
        rng = np.random.default_rng(11)
        for _ in range(20):
            du = 1e-3 * rng.standard_normal(u.samples.shape)
            cost = bl.game_cost(prob, x0, bl.ControlSignal(u.samples + du), alpha, grid)
            assert cost >= base - 1e-8
