import math

import numpy as np
import pytest

from ssf_lab.bumps import Bump1D, ProductCutoff
from ssf_lab.coefficients import bump_test_function
from ssf_lab.quantization import (
    CertificateError,
    CoverageError,
    Grid1D,
    GridMismatchError,
    SupportMarginError,
    WindowTheta,
    build_schrodinger,
    fourier_window,
    required_points,
    smoothed_trace,
    theorem1_check,
    theorem2_check,
    weyl_quantize,
    window_primitive,
)
from ssf_lab.symbols import model_potential, schrodinger_symbol


def small_grid(h=0.25, R=6.0, tau_max=1.5, M=None):
    return Grid1D(R=R, M=M or required_points(R, h, tau_max), h=h, tau_max=tau_max)


CHI = ProductCutoff(g=Bump1D(0, 2.0), k=Bump1D(0, 1.2))


class TestGrid:
    def test_geometry(self):
        g = Grid1D(R=6.0, M=128, h=0.25)
        assert g.M * g.dx == pytest.approx(2 * g.R, abs=0)
        assert g.dp == pytest.approx(math.pi * g.h / g.R)
        assert len(g.nodes) == 128 and g.nodes[0] == -6.0
        assert g.momenta[0] == -g.dp * 64 and g.momenta[-1] == g.dp * 63

    def test_coverage_rule(self):
        need = required_points(6.0, 0.25, 1.5)
        g = Grid1D(R=6.0, M=need, h=0.25, tau_max=1.5)
        assert g.p_max >= 2.0 * math.sqrt(1.5)
        with pytest.raises(CoverageError) as err:
            Grid1D(R=6.0, M=need - 2, h=0.25, tau_max=1.5)
        assert err.value.required_m == need

    def test_validation(self):
        with pytest.raises(ValueError):
            Grid1D(R=6.0, M=127, h=0.25)
        with pytest.raises(ValueError):
            Grid1D(R=-1.0, M=128, h=0.25)


class TestBuildSchrodinger:
    def test_free_spectrum_exact(self):
        g = small_grid()
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=1), g)
        assert np.array_equal(op.eigenvalues(), np.sort(g.momenta**2))

    def test_free_multiplicity_with_channels(self):
        g = small_grid()
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=2), g)
        expect = np.sort(np.concatenate([g.momenta**2, g.momenta**2]))
        assert np.array_equal(op.eigenvalues(), expect)

    def test_constant_shift_exact(self):
        g = small_grid()
        op = build_schrodinger(model_potential("constant", v_inf=[0.7], N=1), g)
        assert np.array_equal(op.eigenvalues(), np.sort(g.momenta**2 + 0.7))

    def test_hermitian_and_reconstruction(self):
        g = small_grid(h=0.5, M=64)
        op = build_schrodinger(model_potential("reference"), g)
        scale = np.max(np.abs(op.matrix))
        assert np.max(np.abs(op.matrix - op.matrix.conj().T)) <= 1e-11 * scale
        assert op.reconstruction_residual() < 1e-10

    def test_against_finite_difference_oracle(self):
        # truncated harmonic-like well; 4th-order periodic FD at 4x resolution
        v = model_potential("diagonal_bumps", depths=[-4.0], centers=[0.0],
                            widths=[2.0], v_inf=[4.0])
        h0 = 0.5
        e0 = build_schrodinger(v, Grid1D(R=6.0, M=128, h=h0)).eigenvalues()[0]
        m_f = 512
        xs = -6.0 + 12.0 * np.arange(m_f) / m_f
        dx = 12.0 / m_f
        lap = (np.diag(np.full(m_f, 30.0))
               + np.diag(np.full(m_f - 1, -16.0), 1) + np.diag(np.full(m_f - 1, -16.0), -1)
               + np.diag(np.full(m_f - 2, 1.0), 2) + np.diag(np.full(m_f - 2, 1.0), -2))
        lap[0, -1] = lap[-1, 0] = -16.0
        lap[0, -2] = lap[-2, 0] = lap[1, -1] = lap[-1, 1] = 1.0
        lap /= 12.0 * dx * dx
        fd = h0 * h0 * lap + np.diag(4.0 - 4.0 * np.exp(-((xs / 2.0) ** 2)))
        e0_fd = np.linalg.eigvalsh(fd)[0]
        assert abs(e0 - e0_fd) / abs(e0_fd) < 1e-6

    def test_analytic_pairs_reconstruct(self):
        g = small_grid(h=0.5, M=64)
        op = build_schrodinger(model_potential("constant", v_inf=[0.3, 0.9], N=2), g)
        assert op.reconstruction_residual() < 1e-10


class TestWeylQuantize:
    def test_identity_exact(self):
        g = small_grid()
        assert np.array_equal(weyl_quantize(1.0, g).matrix, np.eye(g.M))

    def test_multiplication_exact(self):
        g = small_grid()
        fn = lambda x: np.cos(x) * np.exp(-np.asarray(x) ** 2)
        assert np.array_equal(weyl_quantize(fn, g).matrix, np.diag(fn(g.nodes)))

    def test_trace_rule(self):
        # momentum grid must resolve the xi-factor for spectral accuracy
        g = small_grid(h=1 / 64)
        a = weyl_quantize(CHI, g)
        tr = float(np.trace(a.matrix).real)
        target = CHI.integral(order=400) / (2.0 * math.pi * g.h)
        assert abs(tr - target) <= 1e-8 * abs(target)

    def test_product_vs_general_path(self):
        g = small_grid(h=0.25)
        a1 = weyl_quantize(CHI, g)
        a2 = weyl_quantize(lambda x, xi: CHI.g(x) * CHI.k(xi), g)
        assert np.max(np.abs(a1.matrix - a2.matrix)) < 1e-14

    def test_hermitization_drift_small(self):
        g = small_grid(h=0.25)
        kappa = np.fft.ifft(CHI.k(g.momenta_fft_order))
        from ssf_lab.quantization import _index_tables, _midpoint_values

        delta, mid_idx, ambiguous = _index_tables(g)
        g_mid = _midpoint_values(CHI.g(g.half_nodes), mid_idx, ambiguous, g.M)
        raw = g_mid * kappa[delta % g.M]
        drift = np.max(np.abs(raw - raw.conj().T))
        assert drift <= 1e-12 * max(1.0, np.max(np.abs(raw)))

    def test_support_margin_rejection(self):
        g = small_grid()
        wide = ProductCutoff(g=Bump1D(0, 5.5), k=Bump1D(0, 1.0))
        with pytest.raises(SupportMarginError):
            weyl_quantize(wide, g)
        fast = ProductCutoff(g=Bump1D(0, 1.0), k=Bump1D(0, 50.0))
        with pytest.raises(SupportMarginError):
            weyl_quantize(fast, g)

    def test_general_memory_cap(self):
        g = Grid1D(R=6.0, M=4096, h=1 / 64)
        with pytest.raises(MemoryError):
            weyl_quantize(lambda x, xi: CHI.g(x) * CHI.k(xi), g, general_m_cap=2048)


class TestWindows:
    def test_theta_invariants(self):
        w0 = WindowTheta("bump_at_zero", eps=0.3)
        ts = np.linspace(-2, 2, 2001)
        vals = w0.theta(ts)
        assert np.all(vals[np.abs(ts) >= 0.3] == 0.0)
        assert np.all(vals[np.abs(ts) <= 0.3 / 4] == 1.0)
        wp = WindowTheta("bump_positive", eps=0.3)
        vp = wp.theta(ts)
        assert np.all(vp[np.abs(ts) <= 0.15] == 0.0)
        assert np.all(vp[ts >= 0.3] == 0.0)
        assert np.any(vp > 0)
        with pytest.raises(ValueError):
            WindowTheta("square", eps=0.3)
        with pytest.raises(ValueError):
            WindowTheta("bump_at_zero", eps=0.0)

    def test_window_integral_is_theta_at_zero(self):
        w = WindowTheta("bump_at_zero", eps=0.3)
        s = np.linspace(-500, 500, 1000001)
        total = np.trapezoid(fourier_window(w, 0.1, s), s)
        assert abs(total - 1.0) < 1e-8

    def test_scaling_identity_exact(self, rng):
        from ssf_lab.quantization import _profile

        prof = _profile("bump_at_zero")
        for _ in range(3):
            eps = float(rng.uniform(0.05, 1.0))
            h = float(rng.uniform(0.01, 0.5))
            s = float(rng.uniform(-5, 5))
            lhs = fourier_window(WindowTheta("bump_at_zero", eps=eps), h, s)
            rhs = (eps / h) * float(prof(np.array([eps * s / h]))[0])
            assert lhs == rhs

    def test_bump_positive_decay_fit(self):
        w = WindowTheta("bump_positive", eps=0.3)
        h = 0.05
        s = np.linspace(0.5, 200.0, 800)
        vals = np.abs(fourier_window(w, h, s))
        y = w.eps * s / h
        c4 = float(np.max(vals * (1.0 + y) ** 4 / (w.eps / h)))
        assert np.isfinite(c4)
        # far tail must be genuinely small, not just bounded
        assert np.max(vals[y > 1000.0]) < 1e-8 * (w.eps / h)

    def test_primitive_limits(self):
        w = WindowTheta("bump_at_zero", eps=0.25)
        assert window_primitive(w, 0.1, -1e9) == 0.0
        assert window_primitive(w, 0.1, 1e9) == pytest.approx(1.0, abs=1e-8)
        with pytest.raises(ValueError):
            window_primitive(WindowTheta("bump_positive", eps=0.25), 0.1, 0.0)


class TestSmoothedTrace:
    def test_identity_cutoff_free_reduction(self):
        g = small_grid(h=0.25)
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=2), g)
        f = bump_test_function((0.5, 1.5))
        w = WindowTheta("bump_at_zero", eps=0.25)
        got = smoothed_trace(None, op, f, w, 1.0)
        p2 = g.momenta**2
        expect = 2.0 * np.sum(f(p2) * fourier_window(w, g.h, 1.0 - p2))
        assert complex(got).real == pytest.approx(expect, rel=1e-12)
        assert abs(complex(got).imag) < 1e-10

    def test_zero_cutoff(self):
        g = small_grid(h=0.25)
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=1), g)
        zero = weyl_quantize(0.0, g)
        f = bump_test_function((0.5, 1.5))
        w = WindowTheta("bump_at_zero", eps=0.25)
        assert complex(smoothed_trace(zero, op, f, w, 1.0)) == 0.0

    def test_linearity(self, rng):
        g = small_grid(h=0.25)
        op = build_schrodinger(model_potential("reference"), g)
        w = WindowTheta("bump_at_zero", eps=0.25)
        a1 = weyl_quantize(CHI, g)
        a2 = weyl_quantize(ProductCutoff(g=Bump1D(0.5, 1.5), k=Bump1D(0, 1.0)), g)
        f1 = bump_test_function((0.5, 1.5))
        f2 = bump_test_function((0.8, 1.8))
        alpha, beta = 1.7, -0.4
        t_a1 = smoothed_trace(a1, op, f1, w, 1.0)
        t_a2 = smoothed_trace(a2, op, f1, w, 1.0)
        from ssf_lab.quantization import GridOperator

        combined = GridOperator(grid=g, N=1,
                                matrix=alpha * a1.matrix + beta * a2.matrix)
        t_mix = smoothed_trace(combined, op, f1, w, 1.0)
        assert abs(t_mix - (alpha * t_a1 + beta * t_a2)) < 1e-12 * max(1.0, abs(t_mix))
        # linearity in f
        f_mix = lambda t: alpha * f1(t) + beta * f2(t)
        t_f = smoothed_trace(a1, op, f_mix, w, 1.0)
        assert abs(t_f - (alpha * smoothed_trace(a1, op, f1, w, 1.0)
                          + beta * smoothed_trace(a1, op, f2, w, 1.0))) < 1e-12

    def test_far_tau_tiny(self):
        g = small_grid(h=0.25)
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=1), g)
        a = weyl_quantize(CHI, g)
        f = bump_test_function((0.5, 1.5))
        w = WindowTheta("bump_at_zero", eps=0.25)
        val = complex(smoothed_trace(a, op, f, w, -300.0))
        assert abs(val) < 1e-8

    def test_grid_mismatch(self):
        g1, g2 = small_grid(h=0.25), small_grid(h=0.125)
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=1), g1)
        a = weyl_quantize(CHI, g2)
        f = bump_test_function((0.5, 1.5))
        with pytest.raises(GridMismatchError):
            smoothed_trace(a, op, f, WindowTheta(), 1.0)

    def test_tau_vectorized(self):
        g = small_grid(h=0.25)
        op = build_schrodinger(model_potential("constant", v_inf=0.0, N=1), g)
        f = bump_test_function((0.5, 1.5))
        w = WindowTheta("bump_at_zero", eps=0.25)
        taus = np.array([0.9, 1.0, 1.1])
        batch = smoothed_trace(None, op, f, w, taus)
        singles = [smoothed_trace(None, op, f, w, float(t)) for t in taus]
        assert np.allclose(batch, singles, atol=0)


class TestTheoremCheckPlumbing:
    def test_certificate_gate(self):
        v = model_potential("constant", v_inf=0.0, N=1)
        f = bump_test_function((0.8, 1.2))
        with pytest.raises(CertificateError):
            theorem1_check(v, CHI, f, 1.0, [1 / 8, 1 / 16, 1 / 32], None)

    def test_theorem2_identity_exact_zero(self):
        from ssf_lab.microhyperbolicity import check_on_energy_shell

        v = model_potential("constant", v_inf=0.0, N=1)
        f = bump_test_function((0.8, 1.2))
        w = WindowTheta("bump_at_zero", eps=0.3)
        rep = theorem2_check(v, v, CHI, f, [0.9, 1.0, 1.1], [1 / 8, 1 / 16],
                             w, R=6.0, tau_max=1.69)
        assert np.array_equal(rep.values, np.zeros(2))
        assert rep.verdict == "PASS" and rep.below_floor

    def test_theorem2_separation_rejection(self):
        v0 = model_potential("constant", v_inf=0.0, N=1)
        v1 = model_potential("diagonal_bumps", depths=[0.5], centers=[2.5], widths=[0.4])
        f = bump_test_function((0.8, 1.2))
        w = WindowTheta("bump_at_zero", eps=0.3)
        with pytest.raises(SupportMarginError):
            theorem2_check(v0, v1, CHI, f, [1.0], [1 / 8, 1 / 16], w, R=8.0,
                           tau_max=1.69)

    def test_resource_cap_rejection(self):
        from ssf_lab.microhyperbolicity import check_on_energy_shell

        v = model_potential("constant", v_inf=0.0, N=1)
        cert = check_on_energy_shell(schrodinger_symbol(v), 1.0, ((-2, 2), (-2, 2)),
                                     grid_points=21)
        f = bump_test_function((0.8, 1.2))
        with pytest.raises(CoverageError) as err:
            theorem1_check(v, CHI, f, 1.0, [1 / 4096], cert, R=6.0, tau_max=1.69,
                           m_cap=4096)
        assert err.value.required_m > 4096
