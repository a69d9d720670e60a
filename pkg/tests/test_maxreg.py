"""Tests for reports, seeded ensembles and the linear inequality checks."""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from frac_schrodinger.tool.fracalc import TimeGrid, Trajectory, rl_integral
from frac_schrodinger.tool.maxreg import (CheckError, EnsembleSpec, RegularityReport,
                                          coercivity_check, coercivity_ensemble,
                                          continuity_check, continuity_slope,
                                          da_estimate_check, default_s_samples, embedding_check,
                                          estimate_mr_constant, generate_forcing,
                                          generate_trajectories, homogeneous_checks,
                                          homogeneous_mode_sups, i_alpha, i_alpha_check,
                                          mikhlin_scan, relative_change, run_members,
                                          sector_power)
from frac_schrodinger.tool.output import REPORT_HEADER
from frac_schrodinger.tool.solver import SolveConfig
from frac_schrodinger.tool.spectral import DiagonalOperator, SpectralVector

pytestmark = pytest.mark.level1

SEED = 20240607


class TestReport:
    def test_pass_rule(self):
        assert RegularityReport("a", 1.0, 1.0, 0.0).passed
        assert RegularityReport("a", 1.005, 1.0, 0.0).passed
        assert not RegularityReport("a", 1.02, 1.0, 0.0).passed
        assert not RegularityReport("a", 1.005, 1.0, 0.0, tolerance=0.0).passed

    def test_nonfinite_lhs_fails(self):
        assert not RegularityReport("a", math.nan, 1.0, 0.0).passed
        assert not RegularityReport("a", math.inf, math.inf, 0.0).passed
        assert RegularityReport("a", 5.0, math.inf, 0.0).passed

    def test_requirements(self):
        report = RegularityReport("a", 0.0, 1.0, 0.0, requirements={"x": True, "y": False})
        assert not report.passed

    def test_row(self, grid):
        report = RegularityReport("a", 0.5, 1.0, 2.0, grid=grid, modes=3)
        row = report.row()
        assert list(row) == list(REPORT_HEADER)
        assert row["N"] == grid.N
        assert row["seed"] == ""
        assert row["passed"] is True

    def test_relative_change(self):
        assert relative_change(2.0, 2.0) == 0.0
        assert relative_change(1.0, 2.0) == 0.5
        assert relative_change(0.0, 3.0) == 1.0


class TestEnsembles:
    def test_invalid(self):
        with pytest.raises(CheckError):
            EnsembleSpec(0, SEED)
        with pytest.raises(CheckError):
            EnsembleSpec(3, SEED, mode_decay=-1.0)

    def test_deterministic(self, grid, ensemble):
        lam = (1.0, 4.0)
        assert_allclose(generate_forcing(ensemble, grid, lam, 2),
                        generate_forcing(ensemble, grid, lam, 2))
        assert not np.allclose(generate_forcing(ensemble, grid, lam, 1),
                               generate_forcing(ensemble, grid, lam, 2))

    def test_independent_of_mode_count(self, grid, ensemble):
        few = generate_forcing(ensemble, grid, (1.0, 4.0), 0)
        many = generate_forcing(ensemble, grid, (1.0, 4.0, 9.0, 16.0), 0)
        assert_allclose(many[:2], few)

    def test_independent_of_step_count(self, ensemble):
        coarse = generate_forcing(ensemble, TimeGrid(1.0, 64), (1.0, 4.0), 0)
        fine = generate_forcing(ensemble, TimeGrid(1.0, 128), (1.0, 4.0), 0)
        assert_allclose(fine[:, ::2], coarse, rtol=1e-12, atol=1e-14)

    def test_mode_decay(self, grid):
        flat = generate_forcing(EnsembleSpec(1, SEED, mode_decay=0.0), grid, (1.0, 100.0), 0)
        decayed = generate_forcing(EnsembleSpec(1, SEED, mode_decay=1.0), grid, (1.0, 100.0), 0)
        assert_allclose(decayed[1], flat[1] / 100.0)

    def test_run_members_threads_keep_order(self):
        serial = run_members(lambda k: k * k, 10, workers=1)
        threaded = run_members(lambda k: k * k, 10, workers=4)
        assert serial == threaded == [k * k for k in range(10)]


class TestCoercivity:
    def test_single_member(self, grid):
        w = generate_trajectories(EnsembleSpec(1, SEED), grid)[0]
        report = coercivity_check(0.5, rl_integral(0.5, w))
        assert report.passed
        assert report.constant_estimate >= 1.0

    def test_zero_trajectory(self, grid):
        report = coercivity_check(0.5, Trajectory(grid, np.zeros(grid.N + 1)))
        assert report.lhs == 0.0
        assert report.passed

    def test_ensemble(self):
        report = coercivity_ensemble(0.5, TimeGrid(1.0, 256), EnsembleSpec(5, SEED))
        assert report.passed
        assert report.ensemble_size == 5
        assert report.seed == SEED


class TestMRConstant:
    def test_rejects_p(self, grid, laplacian, ensemble):
        with pytest.raises(CheckError):
            estimate_mr_constant(SolveConfig(0.5, grid, laplacian), 1.0, ensemble)

    def test_estimate_with_stability(self, laplacian, ensemble):
        cfg = SolveConfig(0.5, TimeGrid(1.0, 64), laplacian)
        report = estimate_mr_constant(cfg, 2.0, ensemble)
        assert report.name == "mrconstant"
        assert 0.0 < report.constant_estimate < math.inf
        assert {"estimate_2N", "estimate_2M", "growth_N", "growth_M"} <= set(report.details)
        assert report.lhs == max(report.details["growth_N"], report.details["growth_M"])

    def test_explicit_forcings_skip_stability(self, grid, laplacian):
        forcing = np.zeros((4, grid.N + 1), dtype=complex)
        forcing[0] = np.sin(np.pi * grid.nodes)
        report = estimate_mr_constant(SolveConfig(0.5, grid, laplacian), 2.0,
                                      EnsembleSpec(1, SEED), forcings=[forcing])
        assert report.lhs == 0.0
        assert "estimate_2N" not in report.details

    @pytest.mark.parametrize("factor", [2.5, np.exp(0.7j), -3.0j])
    def test_phase_and_scale_invariance(self, grid, laplacian, ensemble, factor):
        cfg = SolveConfig(0.5, grid, laplacian)
        forcings = [generate_forcing(ensemble, grid, laplacian.eigenvalues, k) for k in range(3)]
        base = estimate_mr_constant(cfg, 2.0, ensemble, forcings=forcings)
        turned = estimate_mr_constant(cfg, 2.0, ensemble, forcings=[factor * f for f in forcings])
        assert turned.constant_estimate == pytest.approx(base.constant_estimate, rel=1e-10)

    def test_continuity_invariance(self, grid, laplacian, ensemble):
        cfg = SolveConfig(0.6, grid, laplacian)
        forcings = [generate_forcing(ensemble, grid, laplacian.eigenvalues, k) for k in range(2)]
        base = continuity_check(cfg, 2.0, ensemble, forcings=forcings)
        turned = continuity_check(cfg, 2.0, ensemble,
                                  forcings=[4.0 * np.exp(1.1j) * f for f in forcings])
        assert turned.constant_estimate == pytest.approx(base.constant_estimate, rel=1e-10)

    def test_unrefinable_operator(self, ensemble):
        cfg = SolveConfig(0.5, TimeGrid(1.0, 32), DiagonalOperator((1.0, 5.0)))
        report = estimate_mr_constant(cfg, 2.0, ensemble.with_count(2))
        assert "estimate_2M" not in report.details


class TestIAlpha:
    def test_half(self):
        report = i_alpha_check(0.5)
        assert report.passed
        assert math.isfinite(report.constant_estimate)
        assert report.constant_estimate > 0.0

    def test_converges_in_s_max(self):
        assert i_alpha(0.6, 1e3) == pytest.approx(i_alpha(0.6, 1e5), rel=1e-2)

    @pytest.mark.parametrize("alpha,s_max", [(1.0, 1e4), (0.5, 1.0)])
    def test_invalid(self, alpha, s_max):
        with pytest.raises(CheckError):
            i_alpha_check(alpha, s_max)


class TestMikhlin:
    def test_sector_power(self):
        assert sector_power(np.array([1.0]), 0.5)[0] == pytest.approx(np.exp(1j * np.pi / 4))
        assert sector_power(np.array([-4.0]), 0.5)[0] == pytest.approx(2.0 * np.exp(-1j * np.pi / 4))

    def test_scan_passes(self):
        operator = DiagonalOperator.dirichlet_laplacian_1d(64)
        report = mikhlin_scan(operator, 0.5, default_s_samples(400))
        assert report.passed
        assert report.requirements["sector_angles"]
        assert math.isfinite(report.details["sup_s_derivative"])

    def test_rejects_zero(self, laplacian):
        with pytest.raises(CheckError):
            mikhlin_scan(laplacian, 0.5, [0.0, 1.0])


class TestHomogeneous:
    def test_reports(self, grid, laplacian):
        cfg = SolveConfig(0.6, grid, laplacian)
        reports = homogeneous_checks(cfg, SpectralVector.basis(4, 1), 2.0)
        names = [r.name for r in reports]
        assert names == ["homogeneous.decay", "homogeneous.weak", "homogeneous.interp",
                         "homogeneous.da_bound"]
        assert reports[-1].passed

    def test_decay_and_weak_bounds(self, grid, laplacian):
        cfg = SolveConfig(0.6, grid, laplacian)
        decay, weak = homogeneous_checks(cfg, SpectralVector.basis(4, 1), 2.0)[:2]
        for report in (decay, weak):
            assert math.isfinite(report.rhs)
            assert report.rhs == report.details["C0"]
            assert report.requirements["stable_2N"]
            assert report.details["change_2N"] <= 0.05
            assert report.passed

    def test_bounds_scale_free_in_u0(self, grid, laplacian):
        cfg = SolveConfig(0.6, grid, laplacian)
        u0 = SpectralVector(np.array([1.0, 0.5, 0.25, 0.125]))
        base = homogeneous_checks(cfg, u0, 2.0)
        scaled = homogeneous_checks(cfg, SpectralVector(3.0j * u0.coeffs), 2.0)
        for a, b in zip(base[:2], scaled[:2]):
            assert b.lhs == pytest.approx(a.lhs, rel=1e-10)
            assert b.rhs == a.rhs

    def test_lp_branch(self, grid, laplacian):
        cfg = SolveConfig(0.4, grid, laplacian)
        reports = homogeneous_checks(cfg, SpectralVector.basis(4, 1), 2.0)
        lp = next(r for r in reports if r.name == "homogeneous.lp")
        assert math.isfinite(lp.rhs)
        assert lp.passed

    def test_zero_data(self, grid, laplacian):
        with pytest.raises(CheckError):
            homogeneous_checks(SolveConfig(0.6, grid, laplacian), SpectralVector.zeros(4), 2.0)

    def test_mode_sups_bounded(self):
        cfg = SolveConfig(0.5, TimeGrid(1.0, 256), DiagonalOperator.dirichlet_laplacian_1d(16))
        sups = homogeneous_mode_sups(cfg)
        assert 0.1 < sups["decay"] < 2.0
        assert 0.1 < sups["weak"] < 10.0


class TestOtherChecks:
    def test_continuity_precondition(self, grid, laplacian, ensemble):
        with pytest.raises(CheckError):
            continuity_check(SolveConfig(0.4, grid, laplacian), 2.0, ensemble)

    def test_continuity_report(self, laplacian):
        cfg = SolveConfig(0.6, TimeGrid(1.0, 64), laplacian)
        report = continuity_check(cfg, 2.0, EnsembleSpec(2, SEED))
        assert report.name == "continuity"
        assert report.details["t_slope_target"] == pytest.approx(0.1)
        assert abs(report.details["t_slope"] - 0.1) <= 0.05
        assert report.requirements["t_scaling"]

    @pytest.mark.parametrize("alpha,p", [(0.6, 2.0), (0.8, 2.0), (0.8, 4.0)])
    def test_continuity_slope_is_self_similar(self, laplacian, alpha, p):
        cfg = SolveConfig(alpha, TimeGrid(1.0, 64), laplacian)
        assert continuity_slope(cfg, p) == pytest.approx(alpha - 1.0 / p, abs=1e-6)

    def test_continuity_slope_ignores_reference_horizon(self, laplacian):
        short = continuity_slope(SolveConfig(0.7, TimeGrid(0.5, 64), laplacian), 2.0)
        long = continuity_slope(SolveConfig(0.7, TimeGrid(2.0, 64), laplacian), 2.0)
        assert short == pytest.approx(long, abs=1e-6)

    def test_embedding(self, grid):
        ws = generate_trajectories(EnsembleSpec(6, SEED), grid)
        report = embedding_check(0.6, 2.0, ws)
        assert report.passed
        assert report.requirements["first_node"]
        assert 0.0 < report.details["first_node_ratio"] <= report.details["first_node_bound"]

    def test_embedding_first_node_constant(self, grid):
        # w = 1: Gamma(alpha) v(h) = h^alpha / alpha, ||w||_{L^2} = 1
        report = embedding_check(0.6, 2.0, [Trajectory(grid, np.ones(grid.N + 1))])
        assert report.details["first_node_ratio"] == pytest.approx(math.sqrt(grid.h) / 0.6,
                                                                   rel=1e-10)
        assert report.details["first_node_bound"] == pytest.approx(5.0 ** 0.5)
        assert report.requirements["first_node"]

    def test_embedding_precondition(self, grid):
        with pytest.raises(CheckError):
            embedding_check(0.4, 2.0, [])

    def test_da_estimate(self, grid):
        cfg = SolveConfig(0.5, grid, DiagonalOperator.dirichlet_laplacian_1d(8))
        report = da_estimate_check(cfg, 2.0, EnsembleSpec(4, SEED))
        assert report.passed
        assert report.explicit_constant
