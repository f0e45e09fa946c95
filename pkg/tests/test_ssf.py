import math

import numpy as np
import pytest

from ssf_lab.coefficients import bump_test_function, plateau_test_function
from ssf_lab.quantization import CoverageError, Grid1D, WindowTheta, required_points
from ssf_lab.ssf import (
    MarginError,
    OperatorPair,
    WindowRangeError,
    build_pair,
    mollified_density_pairing,
    ssf_counting,
    ssf_estimate,
    ssf_mollified,
    sturm_count,
    weak_pairing,
)
from ssf_lab.symbols import model_potential


def gauss_well(depth=-1.0):
    return model_potential("diagonal_bumps", depths=[depth], centers=[0.0], widths=[1.0])


def make_pair(v, h=1 / 16, R=12.0, tau_max=2.0):
    grid = Grid1D(R=R, M=required_points(R, h, tau_max), h=h, tau_max=tau_max)
    return build_pair(v, grid)


class TestBuildPair:
    def test_degenerate_shares_operator(self):
        v = model_potential("constant", v_inf=[0.4, 1.0], N=2)
        pair = make_pair(v)
        assert pair.P0 is pair.P1

    def test_difference_supported_on_potential(self):
        v = model_potential("reference")
        pair = make_pair(v)
        diff = pair.P1.matrix - pair.P0.matrix
        # the kinetic parts cancel: what is left is the block potential
        nodes = pair.grid.nodes
        for j in (0, len(nodes) // 2, len(nodes) - 1):
            sl = slice(j * 2, (j + 1) * 2)
            assert np.allclose(diff[sl, sl], v(nodes[j]) - v.v_infinity, atol=1e-12)
        off = diff.copy()
        for j in range(len(nodes)):
            off[j * 2:(j + 1) * 2, j * 2:(j + 1) * 2] = 0.0
        assert np.max(np.abs(off)) < 1e-12

    def test_trace_of_difference(self):
        v = model_potential("reference")
        pair = make_pair(v)
        lhs = float(np.trace(pair.P1.matrix - pair.P0.matrix).real)
        rhs = float(sum(np.trace(v(x) - v.v_infinity).real for x in pair.grid.nodes))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_margin_rejection(self):
        wide = model_potential("diagonal_bumps", depths=[1.0], centers=[0.0], widths=[6.0])
        grid = Grid1D(R=8.0, M=required_points(8.0, 1 / 8, 2.0), h=1 / 8, tau_max=2.0)
        with pytest.raises(MarginError):
            build_pair(wide, grid)

    def test_coverage_rejection(self):
        with pytest.raises(CoverageError):
            Grid1D(R=12.0, M=64, h=1 / 64, tau_max=2.0)


class TestWeakPairing:
    def test_degenerate_zero(self):
        pair = make_pair(model_potential("constant", v_inf=0.0, N=1))
        f = bump_test_function((0.8, 1.2))
        assert weak_pairing(pair, f) == 0.0

    def test_window_violation(self):
        pair = make_pair(gauss_well(), tau_max=2.0)
        f = bump_test_function((1.8, 2.6))
        with pytest.raises(WindowRangeError):
            weak_pairing(pair, f)

    def test_first_order_perturbation_sign(self):
        # V = c * wide bump: pairing ~ -sum f'(lam0) <u, V u>
        c = 0.01
        v = model_potential("diagonal_bumps", depths=[c], centers=[0.0], widths=[3.0])
        pair = make_pair(v, h=1 / 16, R=16.0, tau_max=2.0)
        f = bump_test_function((0.8, 1.2))
        got = weak_pairing(pair, f)
        lam0 = pair.P0.eigenvalues()
        d = 1e-6
        fp = (f(lam0 + d) - f(lam0 - d)) / (2 * d)
        vbar = float(np.mean(c * np.exp(-((pair.grid.nodes / 3.0) ** 2))))
        oracle = -float(np.sum(fp) * vbar)
        assert got == pytest.approx(oracle, rel=0.05)
        assert got * oracle > 0

    def test_abel_summation_identity(self):
        # integrating the counting staircase against f' telescopes back to
        # the weak pairing
        v = gauss_well()
        pair = make_pair(v, h=1 / 8)
        f = bump_test_function((0.4, 1.4))
        lam1 = pair.P1.eigenvalues()
        lam0 = pair.P0.eigenvalues()
        events = np.concatenate([lam1, lam0])
        signs = np.concatenate([np.ones_like(lam1), -np.ones_like(lam0)])
        order = np.argsort(events, kind="stable")
        events, signs = events[order], signs[order]
        # sum over jumps: s(tau) changes by sign at each event;
        # int f' s dtau = -sum_j sign_j f(event_j) after telescoping
        total = float(np.sum(signs * f(events)))
        assert weak_pairing(pair, f) == pytest.approx(-total, abs=1e-12)


class TestCounting:
    def test_degenerate_zero(self):
        pair = make_pair(model_potential("constant", v_inf=[0.5], N=1))
        assert ssf_counting(pair, 1.0) == 0
        assert ssf_counting(pair, -10.0) == 0

    def test_below_both_spectra(self):
        pair = make_pair(gauss_well())
        assert ssf_counting(pair, -5.0) == 0

    def test_bound_state_count_against_sturm_oracle(self):
        h = 0.05
        pair = make_pair(gauss_well(), h=h, tau_max=1.0)
        for tau in (-0.75, -0.5, -0.25, -0.1):
            mine = ssf_counting(pair, tau)
            oracle = sturm_count(lambda xs: -np.exp(-(xs**2)), h, tau)
            assert mine == oracle

    def test_shift_covariance(self):
        c = 0.7
        v = gauss_well()
        v_shift = model_potential("diagonal_bumps", depths=[-1.0], centers=[0.0],
                                  widths=[1.0], v_inf=[c])
        h = 1 / 8
        grid = Grid1D(R=12.0, M=required_points(12.0, h, 3.0), h=h, tau_max=3.0)
        p1 = build_pair(v, grid)
        p2 = build_pair(v_shift, grid)
        for tau in (-0.6, 0.35, 1.1):
            assert ssf_counting(p1, tau) == ssf_counting(p2, tau + c)

    def test_vectorized_and_step_structure(self):
        pair = make_pair(gauss_well(), h=0.1)
        lam1 = pair.P1.eigenvalues()
        taus = np.array([lam1[3] - 1e-9, lam1[3], lam1[3] + 1e-9])
        vals = ssf_counting(pair, taus)
        assert vals[2] >= vals[0]
        # constant between consecutive eigenvalues
        merged = np.sort(np.concatenate([lam1, pair.P0.eigenvalues()]))
        mid1 = 0.5 * (merged[10] + merged[11])
        mid2 = 0.4 * merged[10] + 0.6 * merged[11]
        assert ssf_counting(pair, mid1) == ssf_counting(pair, mid2)


class TestMollified:
    def test_degenerate_zero(self):
        pair = make_pair(model_potential("constant", v_inf=0.0, N=2))
        w = WindowTheta("bump_at_zero", eps=0.25)
        assert ssf_mollified(pair, w, None, 1.0) == 0.0

    def test_vanishes_below_spectrum(self):
        pair = make_pair(gauss_well())
        w = WindowTheta("bump_at_zero", eps=0.25)
        lam_min = min(pair.P1.eigenvalues().min(), pair.P0.eigenvalues().min())
        far = lam_min - 2000.0 * pair.h / w.eps
        assert ssf_mollified(pair, w, None, far) == 0.0

    def test_close_to_counting(self):
        pair = make_pair(gauss_well(), h=1 / 16)
        w = WindowTheta("bump_at_zero", eps=0.25)
        lam = np.sort(np.concatenate([pair.P1.eigenvalues(), pair.P0.eigenvalues()]))
        for tau in (0.5, 1.0):
            smooth = ssf_mollified(pair, w, None, tau)
            stair = ssf_counting(pair, tau)
            width = 30.0 * pair.h / w.eps
            nearby = int(np.sum(np.abs(lam - tau) <= width))
            assert abs(smooth - stair) <= nearby + 0.1

    def test_requires_even_window(self):
        pair = make_pair(gauss_well())
        with pytest.raises(ValueError):
            ssf_mollified(pair, WindowTheta("bump_positive", eps=0.3), None, 1.0)

    def test_estimate_csv(self, tmp_path):
        pair = make_pair(gauss_well())
        est = ssf_estimate(pair, [0.5, 1.0], method="counting")
        assert est.values.dtype == float
        assert np.all(est.values == np.round(est.values))
        est2 = ssf_estimate(pair, [0.5, 1.0], method="mollified_counting",
                            w=WindowTheta("bump_at_zero", eps=0.25))
        path = tmp_path / "ssf.csv"
        est2.to_csv(path)
        header = path.read_text().split("\n")[0]
        assert header == "tau,value,method,h,eps"
        with pytest.raises(ValueError):
            ssf_estimate(pair, [1.0], method="unknown")


class TestDensityPairing:
    def test_degenerate_zero(self):
        pair = make_pair(model_potential("constant", v_inf=0.0, N=1))
        f = plateau_test_function((0.5, 1.5), (0.8, 1.2))
        w = WindowTheta("bump_at_zero", eps=0.5)
        assert mollified_density_pairing(pair, f, w, 1.0) == 0.0

    def test_matches_gamma0_at_moderate_h(self):
        from ssf_lab.coefficients import gamma0

        v = gauss_well()
        pair = make_pair(v, h=1 / 64, R=12.0, tau_max=2.56)
        f = plateau_test_function((1.2, 2.4), (1.5, 2.1))
        w = WindowTheta("bump_at_zero", eps=0.5)
        got = 2.0 * math.pi * pair.h * mollified_density_pairing(pair, f, w, 1.8)
        ref = gamma0(v, 1.8)
        assert got == pytest.approx(ref, rel=0.01)
