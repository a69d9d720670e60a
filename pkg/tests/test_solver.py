"""Tests for the linear solution operators."""
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special

from frac_schrodinger.tool.fracalc import TimeGrid
from frac_schrodinger.tool.mlf import MLParams, ml_eval_array
from frac_schrodinger.tool.oracle import l1_linear_modes, reference_ml_array
from frac_schrodinger.tool.solver import (SolveConfig, SolverError, convolve_weights,
                                          duhamel_weights, kernel_apply, kernel_mode,
                                          propagator_table, solve_full, solve_homogeneous,
                                          solve_inhomogeneous)
from frac_schrodinger.tool.spectral import (DiagonalOperator, ShapeMismatchError, SpectralField,
                                            SpectralVector, field_norms)

pytestmark = pytest.mark.level1


def _sine_forcing(grid: TimeGrid, M: int) -> np.ndarray:
    t = grid.nodes
    return np.array([np.sin((n + 1) * t) / (n + 1) for n in range(M)], dtype=complex)


class TestConfig:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, 1.2])
    def test_alpha(self, alpha, grid, laplacian):
        with pytest.raises(SolverError):
            SolveConfig(alpha, grid, laplacian)

    def test_quadrature(self, grid, laplacian):
        with pytest.raises(SolverError):
            SolveConfig(0.5, grid, laplacian, "simpson")


class TestKernel:
    def test_nonpositive_lag(self):
        assert kernel_mode(0.5, 10.0, 0.0) == 0.0
        assert kernel_mode(0.5, 10.0, -1.0) == 0.0

    def test_value(self):
        s = 0.3
        expected = s ** -0.4 * ml_eval_array(MLParams(0.6, 0.6), -1j * 5.0 * s ** 0.6)
        assert kernel_mode(0.6, 5.0, s) == pytest.approx(complex(expected), rel=1e-14)

    def test_apply_shape(self, grid, laplacian):
        cfg = SolveConfig(0.5, grid, laplacian)
        with pytest.raises(ShapeMismatchError):
            kernel_apply(cfg, 0.5, SpectralVector.zeros(3))
        assert_allclose(kernel_apply(cfg, 0.0, SpectralVector.basis(4, 1)).coeffs, 0.0)


class TestHomogeneous:
    def test_matches_mittag_leffler(self, grid, laplacian):
        cfg = SolveConfig(0.5, grid, laplacian)
        u0 = SpectralVector(np.array([1.0, 0.5, 0.0, -0.25]))
        u = solve_homogeneous(cfg, u0)
        t = grid.nodes
        lam = laplacian.lam
        for n in range(4):
            expected = u0.coeffs[n] * ml_eval_array(MLParams(0.5, 1.0), -1j * lam[n] * t ** 0.5)
            assert_allclose(u.coeffs[n], expected, rtol=1e-11, atol=1e-12)
        assert_allclose(u.coeffs[:, 0], u0.coeffs)

    def test_table_is_cached_and_frozen(self, grid, laplacian):
        first = propagator_table(0.5, grid.T, grid.N, laplacian.eigenvalues)
        second = propagator_table(0.5, grid.T, grid.N, laplacian.eigenvalues)
        assert first is second
        assert not first.flags.writeable

    def test_mode_mismatch(self, grid, laplacian):
        with pytest.raises(ShapeMismatchError):
            solve_homogeneous(SolveConfig(0.5, grid, laplacian), SpectralVector.zeros(2))


class TestDuhamel:
    @pytest.mark.parametrize("alpha", [0.3, 0.7])
    def test_zero_eigenvalue_is_fractional_integral(self, alpha, grid):
        a, b = duhamel_weights(alpha, grid.h, grid.N, (0.0,))
        t = grid.nodes
        ones = convolve_weights(a, b, np.ones((1, grid.N + 1)))
        linear = convolve_weights(a, b, t[None, :])
        assert_allclose(ones[0], t ** alpha / special.gamma(alpha + 1.0), rtol=1e-10, atol=1e-12)
        assert_allclose(linear[0], t ** (alpha + 1.0) / special.gamma(alpha + 2.0),
                        rtol=1e-10, atol=1e-12)

    def test_midpoint_agrees_with_moments(self, laplacian):
        grid = TimeGrid(1.0, 512)
        operator = DiagonalOperator(laplacian.eigenvalues[:2])
        f = SpectralField(grid, np.vstack([grid.nodes, grid.nodes]).astype(complex))
        exact = solve_inhomogeneous(SolveConfig(0.6, grid, operator, "moments"), f).coeffs
        mid = solve_inhomogeneous(SolveConfig(0.6, grid, operator, "midpoint"), f).coeffs
        assert np.max(np.abs(mid - exact)) <= 1e-2 * np.max(np.abs(exact))

    def test_refinement_self_consistent(self, laplacian):
        coarse_grid = TimeGrid(1.0, 128)
        fine_grid = coarse_grid.refined()
        coarse = solve_inhomogeneous(SolveConfig(0.6, coarse_grid, laplacian),
                                     SpectralField(coarse_grid, _sine_forcing(coarse_grid, 4)))
        fine = solve_inhomogeneous(SolveConfig(0.6, fine_grid, laplacian),
                                   SpectralField(fine_grid, _sine_forcing(fine_grid, 4)))
        gap = np.max(np.abs(coarse.coeffs - fine.coeffs[:, ::2]))
        assert gap <= 1e-4 * np.max(np.abs(fine.coeffs))

    def test_against_l1_stepper(self, laplacian):
        grid = TimeGrid(1.0, 512)
        f = _sine_forcing(grid, 4)
        u = solve_full(SolveConfig(0.6, grid, laplacian), SpectralVector.zeros(4),
                       SpectralField(grid, f)).coeffs
        reference = l1_linear_modes(0.6, laplacian.lam, f, np.zeros(4), grid.h)
        assert np.linalg.norm(u - reference) <= 2e-2 * np.linalg.norm(reference)

    @pytest.mark.parametrize("alpha", [0.6, 0.8, 0.95])
    def test_moments_exact_for_linear_forcing(self, alpha):
        # f = 1 gives t^a E_{a,a+1}(-i lam t^a); f = t gives t^{a+1} E_{a,a+2}(-i lam t^a)
        grid = TimeGrid(1.0, 64)
        t = grid.nodes
        lam = np.array([1.0, 1.0, 64.0, 64.0]) * np.pi ** 2
        f = np.vstack([np.ones_like(t), t, np.ones_like(t), t]).astype(complex)
        u = solve_inhomogeneous(SolveConfig(alpha, grid, DiagonalOperator(tuple(lam))),
                                SpectralField(grid, f)).coeffs
        for row in range(4):
            z = -1j * lam[row] * t ** alpha
            if row % 2 == 0:
                expected = t ** alpha * reference_ml_array(alpha, alpha + 1.0, z)
            else:
                expected = t ** (alpha + 1.0) * reference_ml_array(alpha, alpha + 2.0, z)
            assert np.max(np.abs(u[row] - expected)) < 1e-9

    def test_grid_mismatch(self, grid, laplacian):
        cfg = SolveConfig(0.5, grid, laplacian)
        with pytest.raises(ShapeMismatchError):
            solve_inhomogeneous(cfg, SpectralField.zeros(grid.refined(), 4))
        with pytest.raises(ShapeMismatchError):
            solve_inhomogeneous(cfg, SpectralField.zeros(grid, 3))


class TestFull:
    def test_superposition(self, grid, laplacian):
        cfg = SolveConfig(0.5, grid, laplacian)
        u0 = SpectralVector.basis(4, 1)
        f = SpectralField(grid, _sine_forcing(grid, 4))
        full = solve_full(cfg, u0, f)
        parts = solve_homogeneous(cfg, u0) + solve_inhomogeneous(cfg, f)
        assert_allclose(full.coeffs, parts.coeffs)

    def test_homogeneous_norm_decays(self, grid):
        operator = DiagonalOperator.dirichlet_laplacian_1d(1)
        u = solve_homogeneous(SolveConfig(0.5, grid, operator), SpectralVector.basis(1, 1))
        norms = field_norms(u.coeffs)
        assert norms[0] == 1.0
        assert norms[-1] < norms[0]

    def test_linearity(self, grid, laplacian):
        cfg = SolveConfig(0.6, grid, laplacian)
        f = SpectralField(grid, _sine_forcing(grid, 4))
        g = SpectralField(grid, np.cos(grid.nodes)[None, :] * np.ones((4, 1), dtype=complex))
        combined = solve_inhomogeneous(cfg, f.scaled(1.5) + g.scaled(-2.0j)).coeffs
        separate = (1.5 * solve_inhomogeneous(cfg, f).coeffs
                    - 2.0j * solve_inhomogeneous(cfg, g).coeffs)
        assert_allclose(combined, separate, rtol=1e-12, atol=1e-14)

    @pytest.mark.parametrize("alpha", [0.4, 0.7])
    def test_continuous_at_the_origin(self, alpha):
        # f = 1 on lambda = 1: the first step carries the t^alpha onset
        operator = DiagonalOperator((1.0,))
        u0 = SpectralVector(np.array([1.0 + 0.0j]))
        steps = []
        for N in (128, 256, 512):
            grid = TimeGrid(1.0, N)
            f = SpectralField(grid, np.ones((1, N + 1), dtype=complex))
            u = solve_full(SolveConfig(alpha, grid, operator), u0, f).coeffs[0]
            assert u[0] == u0.coeffs[0]
            steps.append(np.max(np.abs(np.diff(u))))
        assert steps[1] < steps[0] * 2.0 ** -alpha * 1.2
        assert steps[2] < steps[1] * 2.0 ** -alpha * 1.2
