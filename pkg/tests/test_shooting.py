"""Shooting solver tests: sweeps, the end-to-end solve, and the LQR reference."""

import numpy as np
import pytest

import barrier_lqr as bl
from barrier_lqr.barrier import maximizer_alpha_M_values
from barrier_lqr.errors import InvalidParameterError


@pytest.fixture(scope="module")
def scalar_mid(log_dual):
    """Scalar instance whose optimal trajectory stays well inside the ball."""
    plant = bl.Plant(A=np.zeros((1, 1)), B=np.ones((1, 1)))
    return bl.Problem(plant=plant, horizon=1.0, K=0.0, kappa=1.0,
                      P_t=np.array([[1.0]]), z=np.zeros(1), dual=log_dual, M=50.0)


class TestBackwardSweep:
    def test_origin_equilibrium(self, case1_problem):
        grid = bl.Grid(N=300, horizon=4.0)
        sol, traj, residual = bl.backward_sweep(case1_problem, np.zeros(2), np.zeros(2), grid)
        assert residual == 0.0
        assert np.max(np.abs(traj.states)) == 0.0
        assert np.max(np.abs(sol.Q)) == 0.0

    def test_interior_matches_fixed_schedule_solve(self, scalar_mid):
        """When the coupling is mild the sweep agrees with the two-step path."""
        grid = bl.Grid(N=1000, horizon=1.0)
        x = np.array([0.5])
        result = bl.solve_tpbvp(scalar_mid, x, grid=grid)
        assert result.converged
        sol2 = bl.solve_fvp_components(scalar_mid, result.alpha, grid)
        assert np.max(np.abs(result.riccati.P - sol2.P)) <= 1e-6
        assert np.max(np.abs(result.riccati.R - sol2.R)) <= 1e-6
        traj2, _ = bl.closed_loop_rollout(scalar_mid, sol2, x)
        assert np.max(np.abs(result.trajectory.states - traj2.states)) <= 1e-6

    def test_alpha_nodes_match_swept_states(self, case1_problem):
        grid = bl.Grid(N=200, horizon=4.0)
        guess = np.array([0.4, 0.1])
        sol, traj, _ = bl.backward_sweep(case1_problem, np.zeros(2), guess, grid)
        rho = np.sum(traj.states**2, axis=1)
        expected = maximizer_alpha_M_values(case1_problem.dual, case1_problem.M, rho)
        assert np.max(np.abs(sol.alpha - expected)) == 0.0


class TestSolveTpbvp:
    def test_trivial_zero_instance(self, log_dual):
        plant = bl.Plant(A=np.array([[-1.0, 2.0], [-1.0, 1.0]]), B=np.array([[1.0], [0.0]]))
        prob = bl.Problem(plant=plant, horizon=4.0, K=0.1, kappa=1.0,
                          P_t=np.eye(2), z=np.zeros(2), dual=log_dual, M=50.0)
        result = bl.solve_tpbvp(prob, np.zeros(2), grid=bl.Grid(N=300, horizon=4.0))
        assert result.converged and result.residual <= 1e-9
        assert np.max(np.abs(result.control.samples)) <= 1e-9
        assert np.max(np.abs(result.alpha)) <= 1e-9
        assert abs(result.value) <= 1e-9

    def test_case1_converges(self, case1_result):
        assert case1_result.converged
        assert case1_result.residual <= 1e-6

    def test_case1_self_consistency(self, case1_problem, case1_result, case1_grid):
        rho = np.sum(case1_result.trajectory.states**2, axis=1)
        expected = maximizer_alpha_M_values(case1_problem.dual, case1_problem.M, rho)
        assert np.max(np.abs(case1_result.alpha - expected)) <= 1e-8

    def test_case1_control_is_feedback(self, case1_problem, case1_result):
        sol = case1_result.riccati
        states = case1_result.trajectory.states
        expected = np.empty_like(case1_result.control.samples)
        for k in range(states.shape[0]):
            expected[k] = -(case1_problem.plant.B.T @ (sol.P[k] @ states[k] + sol.Q[k])) \
                / case1_problem.kappa
        assert np.max(np.abs(case1_result.control.samples - expected)) <= 1e-12

    def test_case1_value_identities(self, case1_problem, case1_result, case1_grid, case1_x0):
        game = bl.game_cost(case1_problem, case1_x0, case1_result.control,
                            case1_result.alpha, case1_grid)
        trunc = bl.cost_truncated(case1_problem, case1_x0, case1_result.control, case1_grid)
        assert abs(game - trunc) <= 1e-6
        assert case1_result.value == pytest.approx(game, abs=1e-6)

    def test_case1_saddle_inequalities(self, case1_problem, case1_result, case1_grid, case1_x0):
        rng = np.random.default_rng(123)
        base = bl.game_cost(case1_problem, case1_x0, case1_result.control,
                            case1_result.alpha, case1_grid)
        for _ in range(20):
            alpha_pert = np.clip(
                case1_result.alpha + 0.5 * rng.uniform(-1, 1, case1_result.alpha.shape),
                0.0, case1_problem.M)
            assert bl.game_cost(case1_problem, case1_x0, case1_result.control,
                                alpha_pert, case1_grid) <= base + 1e-6
        for _ in range(20):
            u_pert = bl.ControlSignal(case1_result.control.samples
                                      + 1e-3 * rng.standard_normal(case1_result.control.samples.shape))
            assert bl.game_cost(case1_problem, case1_x0, u_pert,
                                case1_result.alpha, case1_grid) >= base - 1e-6

    def test_grid_refinement_value_stable(self, case1_problem, case1_x0, case1_result):
        half = bl.solve_tpbvp(case1_problem, case1_x0, grid=bl.Grid(N=1000, horizon=4.0),
                              xi_t_init=case1_result.terminal_state)
        assert half.converged
        rel = abs(half.value - case1_result.value) / abs(case1_result.value)
        assert rel <= 1e-3

    def test_determinism(self, scalar_mid):
        grid = bl.Grid(N=200, horizon=1.0)
        a = bl.solve_tpbvp(scalar_mid, np.array([0.5]), grid=grid)
        b = bl.solve_tpbvp(scalar_mid, np.array([0.5]), grid=grid)
        assert np.array_equal(a.terminal_state, b.terminal_state)
        assert np.array_equal(a.trajectory.states, b.trajectory.states)
        assert a.value == b.value and a.residual == b.residual
        assert a.iterations == b.iterations

    def test_nonconvergence_reported(self, case1_problem, case1_x0):
        config = bl.ShootingConfig(max_iters=1, restart_count=0)
        result = bl.solve_tpbvp(case1_problem, case1_x0, config,
                                grid=bl.Grid(N=125, horizon=4.0))
        assert not result.converged
        assert result.residual > 1e-6
        assert np.all(np.isfinite(result.trajectory.states))

    def test_outside_ball_warns(self, case1_problem):
        with pytest.warns(UserWarning, match="outside the constraint ball"):
            bl.solve_tpbvp(case1_problem, np.array([3.0, 1.0]),
                           bl.ShootingConfig(max_iters=2, restart_count=0),
                           grid=bl.Grid(N=125, horizon=4.0))

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            bl.ShootingConfig(max_iters=0)
        with pytest.raises(InvalidParameterError):
            bl.ShootingConfig(residual_tol=0.0)
        with pytest.raises(InvalidParameterError):
            bl.ShootingConfig(fixed_point_damping=1.5)


class TestUnconstrainedReference:
    def test_zero_instance_identical(self, case1_problem):
        grid = bl.Grid(N=300, horizon=4.0)
        ref = bl.unconstrained_reference(case1_problem, np.zeros(2), grid)
        assert np.max(np.abs(ref.trajectory.states)) == 0.0
        assert ref.value == 0.0

    def test_case1_diagnostic_saturates(self, case1_problem, case1_x0):
        grid = bl.Grid(N=2000, horizon=4.0)
        ref = bl.unconstrained_reference(case1_problem, case1_x0, grid)
        rhohat = case1_problem.dual.rho_hat(case1_problem.M)
        rho = np.sum(ref.trajectory.states**2, axis=1)
        outside = rho > rhohat
        assert np.any(outside)
        assert np.all(ref.alpha[outside] == case1_problem.M)
        assert np.all(ref.alpha[~outside] < case1_problem.M)
        mu = bl.violation_measure(case1_problem, ref.trajectory, grid,
                                  radius=float(np.sqrt(rhohat)))
        assert mu > 0.0

    def test_reference_value_below_constrained(self, case1_problem, case1_result, case1_x0,
                                               case1_grid):
        ref = bl.unconstrained_reference(case1_problem, case1_x0, case1_grid)
        assert ref.value <= case1_result.value

    def test_reference_starts_exactly_at_x(self, case1_problem, case1_x0):
        grid = bl.Grid(N=500, horizon=4.0)
        ref = bl.unconstrained_reference(case1_problem, case1_x0, grid)
        assert np.array_equal(ref.trajectory.states[0], case1_x0)
        assert ref.residual == 0.0 and ref.converged
