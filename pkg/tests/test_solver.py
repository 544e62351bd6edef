"""
Tests for the Newton solver
"""
import dataclasses

import numpy as np
import pytest
from pydantic import ValidationError

from app.assembly import DiscreteSystem, Provenance, assemble, residual
from app.catalog import get_entry
from app.exceptions import ConfigurationError, DimensionMismatchError, SingularJacobianError
from app.grid import CellVector, UniformGrid, cell_means
from app.kernel import Nonlinearity
from app.solver import (
    GuessPolicy,
    NewtonConfig,
    initial_guess,
    jacobian,
    newton_solve,
    scaled_norm,
    solve_linear,
)


def catalog_config(problem_id: str, **overrides) -> NewtonConfig:
    entry = get_entry(problem_id)
    return NewtonConfig(guess=entry.guess, guess_scale=entry.guess_scale, **overrides)


@pytest.mark.unit
class TestNewtonConfig:
    """Test NewtonConfig validation"""

    def test_defaults(self):
        """Test defaults from settings"""
        cfg = NewtonConfig()
        assert cfg.guess is GuessPolicy.ZEROS
        assert cfg.tol == 1e-14
        assert cfg.max_iter == 50
        assert not cfg.damping

    @pytest.mark.parametrize("field,value", [("tol", 0.0), ("tol", -1e-3), ("max_iter", 0)])
    def test_invalid_values(self, field, value):
        """Test that non-positive tolerances and budgets are rejected"""
        with pytest.raises(ValidationError):
            NewtonConfig(**{field: value})

    def test_guess_from_string(self):
        """Test that guess policies parse from their names"""
        assert NewtonConfig(guess="ymeans").guess is GuessPolicy.YMEANS

    def test_negative_jitter(self):
        with pytest.raises(ValidationError):
            NewtonConfig(guess_jitter=-0.1)


@pytest.mark.unit
class TestInitialGuess:
    """Test initial guess policies"""

    def test_zeros(self, example1_system):
        np.testing.assert_array_equal(initial_guess(example1_system, NewtonConfig()).values, np.zeros(10))

    def test_ymeans(self, example1_system):
        guess = initial_guess(example1_system, NewtonConfig(guess="ymeans"))
        np.testing.assert_array_equal(guess.values, np.ones(10))

    def test_scaled_reference(self, example1_system):
        guess = initial_guess(example1_system, NewtonConfig(guess="reference", guess_scale=0.65))
        np.testing.assert_allclose(guess.values, 0.65 * np.ones(10))

    def test_reference_required(self, linear_problem, grid10):
        """Test that the reference policy needs phi_ref"""
        sys = assemble(linear_problem, grid10)
        with pytest.raises(ConfigurationError):
            initial_guess(sys, NewtonConfig(guess="reference"))

    def test_user_values(self, example1_system):
        cfg = NewtonConfig(guess="user", guess_values=list(range(10)))
        np.testing.assert_array_equal(initial_guess(example1_system, cfg).values, np.arange(10.0))

    def test_user_file(self, example1_system, tmp_path):
        path = tmp_path / "guess.txt"
        np.savetxt(path, np.full(10, 0.5))
        cfg = NewtonConfig(guess="user", guess_file=path)
        np.testing.assert_array_equal(initial_guess(example1_system, cfg).values, np.full(10, 0.5))

    def test_user_length_mismatch(self, example1_system):
        with pytest.raises(ConfigurationError):
            initial_guess(example1_system, NewtonConfig(guess="user", guess_values=[1.0, 2.0]))

    def test_user_without_values(self, example1_system):
        with pytest.raises(ConfigurationError):
            initial_guess(example1_system, NewtonConfig(guess="user"))

    def test_jitter_reproducible(self, example1_system):
        """Test that the seed fixes the perturbation"""
        cfg = NewtonConfig(guess="reference", guess_jitter=0.05, seed=7)
        first = initial_guess(example1_system, cfg).values
        np.testing.assert_array_equal(initial_guess(example1_system, cfg).values, first)
        assert np.max(np.abs(first - 1.0)) <= 0.05
        assert np.any(first != 1.0)
        other = initial_guess(example1_system, NewtonConfig(guess="reference", guess_jitter=0.05, seed=8))
        assert np.any(other.values != first)

    def test_zero_jitter_ignores_seed(self, example1_system):
        guess = initial_guess(example1_system, NewtonConfig(guess="reference", seed=3))
        np.testing.assert_array_equal(guess.values, np.ones(10))


@pytest.mark.unit
class TestJacobian:
    """Test F_n'(X) = A diag(N'(X)) - I"""

    @pytest.mark.parametrize("N", [Nonlinearity.sine(1), Nonlinearity.sine(2), Nonlinearity.square()],
                             ids=["sinpi", "sin2pi", "square"])
    def test_finite_difference_agreement(self, example1, grid10, rng, N):
        """Test the Jacobian against central differences at random points"""
        sys = assemble(dataclasses.replace(example1, N=N), grid10)
        step = 1e-6
        for _ in range(20):
            x = rng.uniform(-1.0, 2.0, size=10)
            J = jacobian(sys, x)
            fd = np.empty_like(J)
            for j in range(10):
                e = np.zeros(10)
                e[j] = step
                fd[:, j] = (residual(sys, x + e) - residual(sys, x - e)) / (2 * step)
            assert np.max(np.abs(J - fd)) <= 1e-6

    def test_wrong_length(self, example1_system):
        with pytest.raises(DimensionMismatchError):
            jacobian(example1_system, np.zeros(3))


@pytest.mark.unit
class TestSolveLinear:
    """Test the dense LU solve"""

    def test_solution(self, rng):
        J = rng.normal(size=(6, 6)) + 6 * np.eye(6)
        r = rng.normal(size=6)
        np.testing.assert_allclose(J @ solve_linear(J, r), r, atol=1e-12)

    def test_singular(self):
        """Test that a zero pivot raises with its index"""
        J = np.array([[1.0, 2.0], [2.0, 4.0]])
        with pytest.raises(SingularJacobianError) as exc_info:
            solve_linear(J, np.ones(2))
        assert exc_info.value.pivot_index == 1

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            solve_linear(np.eye(3), np.ones(2))

    def test_non_finite(self):
        with pytest.raises(SingularJacobianError):
            solve_linear(np.array([[np.inf]]), np.ones(1))


@pytest.mark.integration
class TestNewtonSolve:
    """Test newton_solve"""

    def test_exact_root_stops_immediately(self, example1_system):
        """Test that the exact discrete root is accepted after one step"""
        C_ref = CellVector(example1_system.grid, np.ones(10))
        report = newton_solve(example1_system, NewtonConfig(guess="user", guess_values=[1.0] * 10), C_ref)
        assert report.converged
        assert report.iterations == 1
        assert report.relative_errors[0] == 0.0
        assert report.relative_errors[-1] <= 1e-14
        assert report.failure_reason is None

    @pytest.mark.parametrize("problem_id", ["example1-sinpi", "example2"])
    def test_perturbed_root(self, problem_id, rng):
        """Test quadratic convergence from a small perturbation of the root"""
        p = get_entry(problem_id).build()
        grid = UniformGrid(p.a, p.b, 10)
        sys = assemble(p, grid)
        C_ref = cell_means(p.phi_ref, grid)
        guess = C_ref.values + 1e-4 * rng.uniform(-1.0, 1.0, size=10)
        report = newton_solve(sys, NewtonConfig(guess="user", guess_values=list(guess)), C_ref)
        assert report.converged
        assert report.iterations <= 6
        assert report.relative_errors[-1] <= 1e-12

    @pytest.mark.parametrize("n", [10, 100])
    def test_quadratic_decay_from_catalog_guess(self, n):
        """Test convergence from the catalog guess for N = sin(pi u)"""
        p = get_entry("example1-sinpi").build()
        grid = UniformGrid(p.a, p.b, n)
        sys = assemble(p, grid)
        report = newton_solve(sys, catalog_config("example1-sinpi"), cell_means(p.phi_ref, grid))
        errors = report.relative_errors
        assert report.converged
        assert report.iterations <= 10
        assert errors[-1] <= 1e-13
        for e, e_next in zip(errors, errors[1:]):
            if 1e-12 < e < 1e-2:
                assert e_next <= 10 * e * e + 1e-14

    def test_linear_problem_solved_in_one_step(self, linear_problem, grid10):
        """Test that a linear N reduces to one linear solve"""
        sys = assemble(linear_problem, grid10)
        report = newton_solve(sys)
        expected = np.linalg.solve(-sys.A - np.eye(10), sys.Y)
        assert report.converged
        assert report.iterations <= 2
        np.testing.assert_allclose(report.solution.values, expected, atol=1e-12)

    def test_history_lengths(self, example1_system):
        """Test that iterates, residuals and errors line up"""
        C_ref = CellVector(example1_system.grid, np.ones(10))
        report = newton_solve(example1_system, catalog_config("example1-sinpi", max_iter=3), C_ref)
        assert len(report.iterates) == report.iterations + 1
        assert len(report.residual_norms) == len(report.iterates)
        assert len(report.relative_errors) == len(report.iterates)
        np.testing.assert_allclose(report.iterates[0].values, 0.65 * np.ones(10))
        assert report.residual_norms[0] == pytest.approx(scaled_norm(example1_system, residual(example1_system, report.iterates[0])))

    def test_budget_exhausted(self, example1_2pi, grid10):
        """Test that non-convergence is reported, not raised"""
        sys = assemble(example1_2pi, grid10)
        report = newton_solve(sys, catalog_config("example1-sin2pi", max_iter=1))
        assert not report.converged
        assert report.iterations == 1
        assert report.failure_reason == "no convergence within 1 iterations"
        assert len(report.iterates) == 2
        assert report.relative_errors is None

    def test_singular_jacobian_reported(self, linear_problem, grid10):
        """Test that a singular Jacobian ends the run with a reason"""
        sys = DiscreteSystem(grid10, -np.eye(10), np.zeros(10), linear_problem, Provenance.DOUBLE_MOMENT)
        report = newton_solve(sys, NewtonConfig(guess="user", guess_values=[1.0] * 10))
        assert not report.converged
        assert "singular" in report.failure_reason
        assert len(report.iterates) == 1

    def test_damping_near_root(self, example1_system, rng):
        """Test that damped Newton keeps full steps near the root"""
        C_ref = CellVector(example1_system.grid, np.ones(10))
        guess = 1.0 + 1e-4 * rng.uniform(-1.0, 1.0, size=10)
        cfg = NewtonConfig(guess="user", guess_values=list(guess), damping=True)
        report = newton_solve(example1_system, cfg, C_ref)
        assert report.converged
        assert report.relative_errors[-1] <= 1e-12

    def test_condition_estimate(self, example1_system):
        """Test that a condition estimate is recorded"""
        report = newton_solve(example1_system, NewtonConfig(guess="user", guess_values=[1.0] * 10))
        assert np.isfinite(report.jacobian_condition_estimate)
        assert report.jacobian_condition_estimate >= 1.0

    def test_reference_grid_mismatch(self, example1_system):
        with pytest.raises(DimensionMismatchError):
            newton_solve(example1_system, C_ref=CellVector.zeros(UniformGrid(0.0, 1.0, 4)))

    def test_expect_root_needs_reference(self, example1_system):
        with pytest.raises(ConfigurationError):
            newton_solve(example1_system, expect_root=True)


def solve_catalog(problem_id: str, n: int, cfg: NewtonConfig, expect_root: bool = True):
    p = get_entry(problem_id).build()
    grid = UniformGrid(p.a, p.b, n)
    return newton_solve(assemble(p, grid), cfg, cell_means(p.phi_ref, grid), expect_root=expect_root)


@pytest.mark.integration
class TestCatalogRuns:
    """Test Newton from the recorded catalog guesses"""

    @pytest.mark.parametrize("n", [10, 100])
    def test_example2_from_catalog_guess(self, n):
        """Test the two-level example reaches its root in a few steps"""
        report = solve_catalog("example2", n, catalog_config("example2"))
        assert report.converged
        assert report.iterations <= 8
        assert report.relative_errors[-1] <= 1e-13

    def test_sin2pi_coarse_grid_settles_elsewhere(self):
        """Test that a root away from the reference is reported as not converged"""
        plain = solve_catalog("example1-sin2pi", 10, catalog_config("example1-sin2pi"), expect_root=False)
        assert plain.converged
        assert plain.relative_errors[-1] > 1e-2

        report = solve_catalog("example1-sin2pi", 10, catalog_config("example1-sin2pi"))
        assert not report.converged
        assert "different discrete root" in report.failure_reason
        assert report.relative_errors[-1] > 1e-2

    def test_sin2pi_fine_grid_reaches_reference(self):
        report = solve_catalog("example1-sin2pi", 100, catalog_config("example1-sin2pi"))
        assert report.converged
        assert report.failure_reason is None
        assert report.relative_errors[-1] <= 1e-12

    @pytest.mark.parametrize("n", [10, 100])
    def test_sinpi_from_zeros_fails(self, n):
        """Test that the zero guess does not reach the reference for N = sin(pi u)"""
        report = solve_catalog("example1-sinpi", n, NewtonConfig(max_iter=16))
        assert not report.converged
        assert min(report.relative_errors) >= 0.9
