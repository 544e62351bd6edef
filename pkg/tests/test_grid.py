"""
Tests for grids, cell means and the moduli w1, w2
"""
import numpy as np
import pytest

from app.exceptions import ConfigurationError, DimensionMismatchError, DomainError, QuadratureError
from app.grid import (
    CellVector,
    Integrable1D,
    UniformGrid,
    cell_means,
    l1_distance,
    projection_error,
    w1_oscillation,
    w2_modulus,
)


def identity_function():
    return Integrable1D.from_callable(lambda s: np.asarray(s, dtype=float), 0.0, 1.0, label="s")


def step_function():
    return Integrable1D.piecewise_constant([0.0, 0.5, 1.0], [1.0, 2.0])


@pytest.mark.unit
class TestUniformGrid:
    """Test UniformGrid"""

    def test_nodes_and_spacing(self):
        """Test node placement and the exact right endpoint"""
        grid = UniformGrid(0.0, 1.0, 10)
        assert grid.h == pytest.approx(0.1)
        assert len(grid.nodes) == 11
        assert grid.nodes[0] == 0.0
        assert grid.nodes[-1] == 1.0

    @pytest.mark.parametrize("a,b,n", [(0.0, 1.0, 0), (1.0, 0.0, 5), (0.0, np.inf, 3), (0.0, 1.0, 2.5)])
    def test_invalid_grid(self, a, b, n):
        """Test that degenerate grids are rejected"""
        with pytest.raises(ConfigurationError):
            UniformGrid(a, b, n)

    def test_cell_bounds(self, grid10):
        """Test 0-based cell endpoints"""
        lo, hi = grid10.cell(3)
        assert lo == pytest.approx(0.3)
        assert hi == pytest.approx(0.4)
        with pytest.raises(DomainError):
            grid10.cell(10)

    def test_locate(self, grid10):
        """Test locating points, with b in the last cell"""
        np.testing.assert_array_equal(grid10.locate([0.0, 0.55, 0.99, 1.0]), [0, 5, 9, 9])
        with pytest.raises(DomainError):
            grid10.locate(1.5)


@pytest.mark.unit
class TestIntegrable1D:
    """Test Integrable1D and its constructors"""

    def test_jumps_filtered_and_sorted(self):
        """Test that only interior jumps are kept"""
        f = Integrable1D.from_callable(np.sin, 0.0, 1.0, jumps=(0.7, 0.0, 0.2, 1.5))
        assert f.jumps == (0.2, 0.7)

    def test_zero_extension(self):
        """Test extension by zero outside [a, b]"""
        f = Integrable1D.constant(3.0, 0.0, 1.0)
        np.testing.assert_array_equal(f.extended([-0.1, 0.5, 1.2]), [0.0, 3.0, 0.0])

    def test_piecewise_constant_values(self):
        """Test evaluation of a step function"""
        f = step_function()
        np.testing.assert_array_equal(f([0.0, 0.25, 0.5, 1.0]), [1.0, 1.0, 2.0, 2.0])
        assert f.jumps == (0.5,)

    def test_piecewise_constant_validation(self):
        """Test that mismatched breaks and values are rejected"""
        with pytest.raises(ConfigurationError):
            Integrable1D.piecewise_constant([0.0, 1.0], [1.0, 2.0])


@pytest.mark.unit
class TestCellMeans:
    """Test the projection onto piecewise constants"""

    def test_constant_exact(self, grid10):
        """Test that constants project to themselves"""
        means = cell_means(Integrable1D.constant(-1.0, 0.0, 1.0), grid10)
        np.testing.assert_array_equal(means.values, -np.ones(10))

    def test_linear_function(self, grid10):
        """Test that s projects to the cell midpoints"""
        means = cell_means(identity_function(), grid10)
        np.testing.assert_allclose(means.values, 0.5 * (grid10.nodes[:-1] + grid10.nodes[1:]), atol=1e-14)

    def test_step_function(self, grid10):
        """Test the step function of the discontinuous example"""
        means = cell_means(step_function(), grid10)
        np.testing.assert_allclose(means.values, [1.0] * 5 + [2.0] * 5, atol=1e-14)

    def test_jump_inside_cell(self):
        """Test a jump in the middle of a cell"""
        grid = UniformGrid(0.0, 1.0, 3)
        f = Integrable1D.from_callable(lambda s: np.where(s < 0.5, 1.0, 2.0), 0.0, 1.0, jumps=(0.5,))
        means = cell_means(f, grid)
        assert means.values[1] == pytest.approx(1.5, abs=1e-13)

    def test_projection_idempotent(self, grid10, rng):
        """Test pi_n(pi_n f) = pi_n f exactly"""
        C = CellVector(grid10, rng.normal(size=10))
        np.testing.assert_array_equal(cell_means(C.as_function(), grid10).values, C.values)

    @pytest.mark.parametrize("n", [1, 3, 7, 10, 64])
    def test_l1_contraction(self, n):
        """Test ||pi_n x||_1 <= ||x||_1, with equality for a function of one sign"""
        grid = UniformGrid(0.0, 1.0, n)
        wave = Integrable1D.from_callable(lambda s: np.cos(3 * np.pi * np.asarray(s)), 0.0, 1.0)
        assert cell_means(wave, grid).l1_norm() <= 2 / np.pi + 1e-12
        assert cell_means(step_function(), grid).l1_norm() == pytest.approx(1.5, abs=1e-12)

    def test_failure_reports_cell(self, grid10):
        """Test that a non-finite integrand names the failing cell"""
        f = Integrable1D.from_callable(lambda s: np.where(s > 0.55, np.nan, 1.0), 0.0, 1.0)
        with pytest.raises(QuadratureError) as exc_info:
            cell_means(f, grid10)
        assert exc_info.value.cell == 5


@pytest.mark.unit
class TestCellVector:
    """Test CellVector"""

    def test_wrong_length(self, grid10):
        """Test length validation"""
        with pytest.raises(DimensionMismatchError):
            CellVector(grid10, np.zeros(9))

    def test_values_read_only(self, grid10):
        """Test that stored values cannot be mutated"""
        source = np.zeros(10)
        C = CellVector(grid10, source)
        source[0] = 1.0
        assert C.values[0] == 0.0
        with pytest.raises(ValueError):
            C.values[0] = 2.0

    def test_norms(self, grid10):
        """Test the scaled L1 norm and distance"""
        ones = CellVector(grid10, np.ones(10))
        assert ones.l1_norm() == pytest.approx(1.0)
        assert l1_distance(ones, CellVector.zeros(grid10)) == pytest.approx(1.0)

    def test_distance_requires_same_grid(self, grid10):
        """Test that vectors on different grids are rejected"""
        with pytest.raises(DimensionMismatchError):
            l1_distance(CellVector.zeros(grid10), CellVector.zeros(UniformGrid(0.0, 1.0, 5)))


@pytest.mark.unit
class TestModuli:
    """Test w1 oscillation and w2 modulus of continuity"""

    @pytest.mark.parametrize("n", [10, 40, 160])
    def test_w1_constant(self, n):
        """Test w1(1, h) = 2h (two edges of the zero extension)"""
        h = 1.0 / n
        assert w1_oscillation(Integrable1D.constant(1.0, 0.0, 1.0), h) == pytest.approx(2 * h, rel=0.05)

    @pytest.mark.parametrize("n", [10, 40, 160])
    def test_w1_step(self, n):
        """Test w1 = 4h for the step 1 | 2"""
        h = 1.0 / n
        assert w1_oscillation(step_function(), h) == pytest.approx(4 * h, rel=0.05)

    def test_w1_linear(self):
        """Test w1(s, h) = 2h - h^2"""
        h = 0.1
        assert w1_oscillation(identity_function(), h) == pytest.approx(2 * h - h * h, rel=1e-10)

    def test_w1_monotone_in_h(self):
        """Test that w1 does not decrease with h"""
        f = step_function()
        values = [w1_oscillation(f, h) for h in (0.01, 0.02, 0.05, 0.1)]
        assert values == sorted(values)

    def test_w1_edge_cases(self):
        """Test h = 0 and negative h"""
        f = step_function()
        assert w1_oscillation(f, 0.0) == 0.0
        with pytest.raises(DomainError):
            w1_oscillation(f, -0.1)

    def test_w2_linear(self):
        """Test w2(s + t, h) = 2h in the max-norm"""
        value = w2_modulus(lambda s, t: s + t, 0.1, 0.0, 1.0)
        assert value == pytest.approx(0.2, rel=1e-10)

    def test_w2_constant(self):
        """Test that a constant factor has zero modulus"""
        assert w2_modulus(lambda s, t: np.ones(np.broadcast(s, t).shape), 0.1, 0.0, 1.0) == 0.0

    def test_w2_monotone_in_h(self):
        """Test that w2 does not decrease with h"""
        values = [w2_modulus(lambda s, t: s + t * t, h, 0.0, 1.0) for h in (0.01, 0.05, 0.1, 0.2, 0.4)]
        assert values == sorted(values)
        assert values[0] > 0.0

    def test_w2_negative_h(self):
        """Test that negative h is rejected"""
        with pytest.raises(DomainError):
            w2_modulus(lambda s, t: s, -1.0, 0.0, 1.0)

    @pytest.mark.parametrize("n", [10, 40, 160])
    @pytest.mark.parametrize("f", [identity_function(), step_function()], ids=["linear", "step"])
    def test_projection_bound(self, f, n):
        """Test ||pi_n f - f||_1 <= 2 w1(f, h)"""
        grid = UniformGrid(0.0, 1.0, n)
        assert projection_error(f, grid) <= 2 * w1_oscillation(f, grid.h)

    def test_projection_error_linear(self):
        """Test ||pi_n s - s||_1 = h / 4"""
        grid = UniformGrid(0.0, 1.0, 10)
        assert projection_error(identity_function(), grid) == pytest.approx(0.025, rel=1e-10)
