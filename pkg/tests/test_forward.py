"""
Tests for forward model module
"""

import numpy as np
import pytest

from src.config import Config
from src.errors import ParameterError, TimestepDivergedError
from src.grid.field import ParamPair, ScalarField
from src.grid.grid import build_grid, square_mask
from src.model.forward import (
    LinearizedSteps,
    TimeGrid,
    gaussian_bump,
    solve_forward,
    step_implicit,
    step_jacobian,
)
from src.grid.operators import diffusion_matrix
from src.model.linear_solver import LinearSolver


def uniform_params(grid, D, G):
    return ParamPair(D=ScalarField.constant(grid, D), G=ScalarField.constant(grid, G))


def logistic(c, g, t):
    return c * np.exp(g * t) / (1.0 + c * (np.exp(g * t) - 1.0))


class TestTimeGrid:
    """Test suite for TimeGrid"""

    def test_dt(self):
        """Test step length and times"""
        tg = TimeGrid(10.0, 20)
        assert tg.dt == 0.5
        assert tg.time(20) == 10.0
        assert len(tg.times()) == 21

    @pytest.mark.parametrize("T,Nt", [(0.0, 10), (-1.0, 10), (1.0, 0), (1.0, 2.5)])
    def test_invalid(self, T, Nt):
        """Test invalid final time or step count"""
        with pytest.raises(ParameterError):
            TimeGrid(T, Nt)


class TestStepImplicit:
    """Test suite for one implicit Euler step"""

    def test_identity_without_dynamics(self, disk_grid, rng):
        """Test D = G = 0 leaves the state unchanged"""
        u_prev = ScalarField(disk_grid, rng.random(disk_grid.n_active))
        u = step_implicit(u_prev, uniform_params(disk_grid, 0.0, 0.0), 0.3)
        assert np.array_equal(u.values, u_prev.values)

    def test_scalar_logistic_root(self, square_grid):
        """Test uniform reaction step against the scalar quadratic root"""
        g, c, dt = 0.5, 0.2, 0.5
        u_prev = ScalarField.constant(square_grid, c)
        u = step_implicit(u_prev, uniform_params(square_grid, 0.0, g), dt)

        b = 1.0 / dt - g
        expected = (-b + np.sqrt(b**2 + 4.0 * g * c / dt)) / (2.0 * g)
        assert np.allclose(u.values, expected, atol=1e-10)

    def test_mass_conservation_step(self, disk_grid, rng, monkeypatch):
        """Test G = 0 conserves area-weighted mass"""
        monkeypatch.setattr(Config, "LINEAR_SOLVER", "direct")
        n = disk_grid.n_active
        params = ParamPair(D=ScalarField(disk_grid, 0.5 + rng.random(n)), G=ScalarField.zeros(disk_grid))
        u_prev = ScalarField(disk_grid, rng.random(n))
        u = step_implicit(u_prev, params, 0.2)
        assert u.total() == pytest.approx(u_prev.total(), rel=1e-10)

    def test_nonpositive_dt(self, disk_grid):
        """Test dt must be positive"""
        with pytest.raises(ParameterError):
            step_implicit(ScalarField.zeros(disk_grid), uniform_params(disk_grid, 1.0, 0.1), 0.0)

    def test_divergence_carries_context(self, square_grid, monkeypatch):
        """Test inner Newton failure raises with step information"""
        monkeypatch.setattr(Config, "NEWTON_MAX_ITERS", 0)
        u_prev = ScalarField.constant(square_grid, 0.2)
        with pytest.raises(TimestepDivergedError, match="timestep diverged") as exc:
            step_implicit(u_prev, uniform_params(square_grid, 0.0, 0.5), 0.5, step=3, time=1.5)
        assert exc.value.step == 3
        assert exc.value.time == 1.5


class TestSolveForward:
    """Test suite for solve_forward"""

    def test_zero_initial_condition(self, disk_grid, truth):
        """Test u0 = 0 is a fixed point"""
        traj = solve_forward(truth, ScalarField.zeros(disk_grid), TimeGrid(1.0, 5))
        assert len(traj) == 6
        assert all(np.all(s.values == 0) for s in traj)

    def test_initial_condition_range(self, disk_grid, truth):
        """Test u0 outside [0, 1] is rejected"""
        with pytest.raises(ParameterError):
            solve_forward(truth, ScalarField.constant(disk_grid, 1.5), TimeGrid(1.0, 5))

    def test_bounds(self, truth, u0, time_grid):
        """Test snapshots stay within the relaxed [0, 1] range"""
        traj = solve_forward(truth, u0, time_grid)
        assert traj.within_bounds()
        assert traj[0] is u0

    def test_mass_conservation(self, disk_grid, rng, monkeypatch):
        """Test G = 0 conserves mass over 50 steps and keeps a spike nonnegative"""
        monkeypatch.setattr(Config, "LINEAR_SOLVER", "direct")
        n = disk_grid.n_active
        params = ParamPair(D=ScalarField(disk_grid, 0.5 + rng.random(n)), G=ScalarField.zeros(disk_grid))
        spike = np.zeros(n)
        spike[n // 2] = 1.0
        u0 = ScalarField(disk_grid, spike)

        traj = solve_forward(params, u0, TimeGrid(5.0, 50))

        assert abs(traj.final.total() - u0.total()) <= 1e-10 * u0.total()
        assert traj.bounds()[0] >= -1e-12

    def test_temporal_order(self):
        """Test first-order convergence to the logistic closed form"""
        grid = build_grid(square_mask(2, 2), 1.0, 1.0)
        g, c, T = 0.5, 0.1, 10.0
        params = uniform_params(grid, 0.0, g)
        u0 = ScalarField.constant(grid, c)

        errors = []
        for Nt in (20, 40, 80):
            traj = solve_forward(params, u0, TimeGrid(T, Nt))
            errors.append(np.max(np.abs(traj.final.values - logistic(c, g, T))))

        assert 1.8 <= errors[0] / errors[1] <= 2.2
        assert 1.8 <= errors[1] / errors[2] <= 2.2

    @pytest.mark.slow
    def test_spatial_order(self):
        """Test second-order self-convergence under grid refinement"""
        L = 8.0

        def solve(n):
            h = L / n
            grid = build_grid(square_mask(n, n), h, h)
            mode = lambda x, y: np.cos(np.pi * x / L) * np.cos(np.pi * y / L)
            params = ParamPair(
                D=ScalarField.from_function(grid, lambda x, y: 1.0 + 0.3 * mode(x, y)),
                G=ScalarField.constant(grid, 0.5),
            )
            u0 = ScalarField.from_function(grid, lambda x, y: 0.3 + 0.2 * mode(x, y))
            return solve_forward(params, u0, TimeGrid(1.0, 10)).final.to_array()

        def restrict(fine):
            n = fine.shape[0] // 2
            return fine.reshape(n, 2, n, 2).mean(axis=(1, 3))

        u8, u16, u32 = solve(8), solve(16), solve(32)
        e_coarse = np.max(np.abs(u8 - restrict(u16)))
        e_fine = np.max(np.abs(u16 - restrict(u32)))
        assert 3.5 <= e_coarse / e_fine <= 4.5


class TestLinearizedSteps:
    """Test suite for the step operators reused by adjoint solves"""

    def test_jacobian_is_symmetric(self, truth, u0, time_grid):
        """Test J_k is symmetric and SPD for small dt"""
        traj = solve_forward(truth, u0, time_grid)
        J, spd = step_jacobian(diffusion_matrix(truth.D), truth.G, traj[3], time_grid.dt)
        assert spd
        assert abs(J - J.T).max() < 1e-14

    def test_solve_inverts_jacobian(self, truth, u0, time_grid, rng):
        """Test cached solver returns J_k^-1 rhs"""
        traj = solve_forward(truth, u0, time_grid)
        steps = LinearizedSteps(traj, truth)
        rhs = rng.standard_normal(traj.grid.n_active)
        x = steps.solve(2, rhs)
        J, _ = step_jacobian(diffusion_matrix(truth.D), truth.G, traj[2], time_grid.dt)
        assert np.allclose(J @ x, rhs, rtol=1e-9, atol=1e-9)
        assert steps.solver(2) is steps.solver(2)

    def test_direct_fallback(self, truth, u0, time_grid, rng):
        """Test the LU path agrees with CG"""
        traj = solve_forward(truth, u0, time_grid)
        J, spd = step_jacobian(diffusion_matrix(truth.D), truth.G, traj[1], time_grid.dt)
        rhs = rng.standard_normal(traj.grid.n_active)
        x_cg = LinearSolver(J, spd, method="cg").solve(rhs)
        x_lu = LinearSolver(J, spd, method="direct").solve(rhs)
        assert np.allclose(x_cg, x_lu, rtol=1e-9, atol=1e-10)

    def test_gaussian_bump_amplitude(self, disk_grid):
        """Test bump amplitude must lie in [0, 1]"""
        with pytest.raises(ParameterError):
            gaussian_bump(disk_grid, (6.0, 6.0), 2.0, 1.5)
