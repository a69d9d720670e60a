"""Tests for the acceptance runner and a few of its quick criteria."""
import math

import numpy as np
import pytest

from frac_schrodinger.tool.acceptance import (CRITERIA, ORDER_SLACK, AcceptanceSettings,
                                              criterion_da_estimate, criterion_determinism,
                                              criterion_fk_lemma, criterion_mikhlin, criterion_mlf,
                                              criterion_overlap, criterion_solver_oracle,
                                              oracle_reach, run_acceptance, smooth_forcing)
from frac_schrodinger.tool.fracalc import TimeGrid
from frac_schrodinger.tool.maxreg import EnsembleSpec
from frac_schrodinger.tool.oracle import MAX_DIGITS, MAX_RADIUS, working_digits

pytestmark = pytest.mark.level1

QUICK = AcceptanceSettings(quick=True)


class TestHelpers:
    def test_numbering(self):
        assert [number for number, _ in CRITERIA] == list(range(1, 16))

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 0.9])
    def test_oracle_reach_fits_budget(self, alpha):
        reach = oracle_reach(alpha)
        assert 0.0 < reach <= MAX_RADIUS
        assert working_digits(alpha, reach, 30) <= MAX_DIGITS

    def test_oracle_reach_grows_with_alpha(self):
        assert oracle_reach(0.3) < oracle_reach(0.5) < oracle_reach(0.7)

    def test_smooth_forcing_starts_at_zero(self, laplacian):
        grid = TimeGrid(1.0, 64)
        f = smooth_forcing(EnsembleSpec(1, 3), grid, laplacian)
        assert f.shape == (4, grid.N + 1)
        assert np.all(f[:, 0] == 0.0)
        assert np.any(f[:, 1:] != 0.0)

    def test_pick(self):
        assert QUICK.pick(100, 10) == 10
        assert AcceptanceSettings().pick(100, 10) == 100
        assert QUICK.ensemble(100, 10).count == 10


@pytest.mark.slow
class TestQuickCriteria:
    def test_determinism(self):
        (report,) = criterion_determinism(QUICK)
        assert report.lhs == 0.0
        assert report.passed
        assert report.details["rows"] > 14

    def test_mlf_reaches_the_whole_ray(self):
        (report,) = criterion_mlf(QUICK)
        assert report.passed
        assert report.lhs <= 1e-9
        assert set(report.details) >= {"err[0.5,1]", "err[0.5,0.5]", "err[0.5,1.5]"}

    def test_overlap_has_an_annulus(self):
        (report,) = criterion_overlap(QUICK)
        assert report.requirements["annulus_found"]
        assert "missing" not in report.details
        assert report.details["r_inner[0.5,1]"] < report.details["r_outer[0.5,1]"]
        assert report.passed

    def test_solver_order_window(self):
        (report,) = criterion_solver_oracle(QUICK)
        order = report.details["order"]
        assert 2.0 - 0.6 - ORDER_SLACK <= order <= 2.0 + ORDER_SLACK
        assert report.requirements["order_window"]
        assert report.details["midpoint_error"] > 0.0

    def test_mikhlin_reports(self):
        reports = criterion_mikhlin(QUICK)
        assert [r.name for r in reports] == ["accept.09.mikhlin[alpha=0.5]",
                                             "accept.09.mikhlin[alpha=0.9]"]
        assert all(math.isfinite(r.constant_estimate) for r in reports)

    def test_da_estimate(self):
        (report,) = criterion_da_estimate(QUICK)
        assert report.name == "accept.07.daestimate"
        assert report.passed

    def test_fk_lemma(self):
        lemma, selfconv = criterion_fk_lemma(QUICK)
        assert lemma.passed
        assert math.isfinite(selfconv.lhs)
        assert selfconv.details["closed_form"] > 0.0

    def test_run_selection(self):
        reports = run_acceptance(QUICK, only=[15])
        assert [r.name for r in reports] == ["accept.15.determinism"]
