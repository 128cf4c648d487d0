import math

import numpy as np
import pytest

from phl import balayage as bal
from phl import harnack as har
from phl import lattice as lat
from phl.errors import DomainError


@pytest.fixture(scope="module")
def cyl8(perc_graph_2d, centre_vertex):
    return bal.make_cylinder(perc_graph_2d, centre_vertex, 8)


@pytest.fixture(scope="module")
def family8(cyl8):
    return bal.caloric_family(cyl8, seed=3)


class TestThetaFormula:
    def test_ch_one_gives_theta_one(self):
        assert har.theta_from_ch(1.0) == pytest.approx(1.0)

    def test_monotone_decreasing_to_zero(self):
        vals = [har.theta_from_ch(c) for c in (1.0, 2.0, 5.0, 50.0, 5000.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-3

    def test_below_one_rejected(self):
        with pytest.raises(DomainError):
            har.theta_from_ch(0.5)


class TestPhiRatio:
    def test_constant_field_has_ratio_one(self, cyl8):
        f = bal.CaloricField(cyl8, np.ones((cyl8.T + 1, cyl8.n_bbar)))
        rep = har.phi_ratio(cyl8, [f])
        assert rep.c_h == pytest.approx(1.0)
        assert rep.theta_hat == pytest.approx(1.0)

    def test_full_lattice_finite_and_above_one(self, full_graph_2d):
        x0 = lat.closest_point(full_graph_2d, full_graph_2d.centre)
        cyl = bal.make_cylinder(full_graph_2d, x0, 8)
        rep = har.phi_ratio(cyl, bal.caloric_family(cyl, seed=1))
        assert 1.0 < rep.c_h < math.inf
        assert rep.unbounded_cases == 0

    def test_scale_stability_on_full_lattice(self):
        cfg = lat.gen_bond_config(2, 160, 1.0, 1)
        g = lat.build_weighted_graph(cfg, lat.extract_giant_cluster(cfg),
                                     "myopic")
        x0 = lat.closest_point(g, g.centre)
        chs = {}
        for R in (16, 32):
            cyl = bal.make_cylinder(g, x0, R)
            chs[R] = har.phi_ratio(cyl, bal.caloric_family(cyl, seed=1)).c_h
        assert abs(chs[32] - chs[16]) / chs[16] < 0.2

    def test_invariant_under_positive_scaling(self, cyl8, family8):
        rep1 = har.phi_ratio(cyl8, family8)
        scaled = [bal.CaloricField(cyl8, 3.7 * f.values) for f in family8]
        rep2 = har.phi_ratio(cyl8, scaled)
        assert rep1.c_h == pytest.approx(rep2.c_h, rel=1e-12)

    def test_family_bound_holds_by_construction(self, cyl8, family8):
        rep = har.phi_ratio(cyl8, family8)
        cols = np.flatnonzero(cyl8.in_b0)
        for f in family8:
            uhat = f.hat()
            lo, hi = cyl8.q_minus
            sup_m = uhat[lo:hi + 1][:, cols].max()
            lo, hi = cyl8.q_plus
            inf_p = uhat[lo:hi + 1][:, cols].min()
            assert sup_m <= rep.c_h * inf_p * (1 + 1e-12)

    def test_vanishing_field_counted_not_crashed(self, cyl8):
        # a field injected after Q+ opens stays zero on part of Q+
        c = cyl8
        bdata = np.zeros((c.T, c.boundary.size))
        bdata[c.T - 1] = 1.0
        late = bal.evolve_caloric(c, np.zeros(c.n_bbar), bdata)
        const = bal.CaloricField(c, np.ones((c.T + 1, c.n_bbar)))
        rep = har.phi_ratio(c, [late, const])
        assert rep.unbounded_cases == 1
        assert rep.c_h == pytest.approx(1.0)


class TestOscillation:
    def test_constant_field_all_zero(self, cyl8):
        f = bal.CaloricField(cyl8, np.ones((cyl8.T + 1, cyl8.n_bbar)))
        windows = har.nested_windows(cyl8)
        rep = har.oscillation_profile(f, windows, 1.0)
        assert all(o == 0.0 for o in rep.oscillations)
        assert rep.violations == 0

    def test_nested_windows_consistency(self, cyl8):
        windows = har.nested_windows(cyl8)
        assert len(windows) >= 2
        for a, b in zip(windows, windows[1:]):
            assert b.rows == a.rows_plus
            assert np.array_equal(b.cols, a.cols_half)

    def test_oscillations_non_increasing(self, cyl8, family8):
        windows = har.nested_windows(cyl8)
        for f in family8:
            rep = har.oscillation_profile(f, windows, 10.0)
            osc = rep.oscillations
            assert all(a >= b - 1e-15 for a, b in zip(osc, osc[1:]))

    def test_zero_violations_with_measured_constant(self, cyl8, family8):
        rep = har.phi_ratio(cyl8, family8)
        windows = har.nested_windows(cyl8)
        for f in family8:
            out = har.oscillation_profile(f, windows, rep.c_h)
            assert out.violations == 0

    def test_chained_decay(self, cyl8, family8):
        rep = har.phi_ratio(cyl8, family8)
        windows = har.nested_windows(cyl8)
        for f in family8:
            out = har.oscillation_profile(f, windows, rep.c_h)
            delta = out.delta_hat
            osc = out.oscillations
            for m in range(1, len(osc)):
                bound = (1 - delta) ** m * osc[0]
                assert osc[m] <= bound + 1e-10 * max(1.0, osc[0])

    def test_too_small_cylinder_rejected(self, perc_graph_2d, centre_vertex):
        cyl = bal.make_cylinder(perc_graph_2d, centre_vertex, 3, 16)
        with pytest.raises(DomainError):
            har.nested_windows(cyl)


class TestStabilizationRadius:
    def test_picks_first_settled_doubling(self):
        prof = {8: 30.0, 16: 20.0, 32: 21.0, 64: 22.0}
        assert har.stabilization_radius(prof) == 16

    def test_none_when_never_settles(self):
        assert har.stabilization_radius({8: 1.0, 16: 2.0, 32: 8.0}) is None

    def test_none_without_doubling_pairs(self):
        assert har.stabilization_radius({8: 1.0, 24: 1.0}) is None


class TestHolder:
    def test_degenerate_pair_contributes_zero(self, cyl8, family8):
        # x1 == x2, n1 == n2 gives lhs 0; any c works, fit stays finite
        rep = har.holder_check(family8[0], 5.0, n_samples=1, seed=0)
        assert rep.c_fit >= 0.0

    def test_finite_fit_on_family(self, cyl8, family8):
        rep = har.phi_ratio(cyl8, family8)
        for f in family8:
            hold = har.holder_check(f, rep.c_h, n_samples=300, seed=2)
            assert np.isfinite(hold.c_fit)
            assert hold.theta == pytest.approx(rep.theta_hat)

    def test_zero_field_reports_zero(self, cyl8):
        f = bal.CaloricField(cyl8, np.zeros((cyl8.T + 1, cyl8.n_bbar)))
        rep = har.holder_check(f, 5.0)
        assert rep.c_fit == 0.0 and rep.sup_qplus == 0.0
