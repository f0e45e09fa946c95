"""Periodic 1D Fourier-spectral discretization and Weyl quantization.

The grid covers x in [-R, R) with M points and carries the scaled momenta
p_m = (pi h / R) m, m = -M/2 .. M/2-1, so the kinetic operator is exactly
diagonal with symbol p^2 on the momentum window.  Energies are reliable up
to tau_max = (pi h M / (2R))^2 / 4, i.e. the momentum window must cover
twice the classical shell radius (the assembly-time coverage rule).

Weyl quantization of a cutoff a(x, xi) produces the dense matrix

    A[i, j] = dx * (dp / 2 pi h) * sum_m exp(i d_ij p_m / h) a(mid_ij, p_m),

with d_ij the minimal-image periodic difference and mid_ij the matching
periodic midpoint (on the half-step grid).  For symbols depending on x only
the momentum sum is a discrete delta and is evaluated in closed form, so
multiplication operators come out exactly diagonal.

Smoothed spectral traces sum f(lambda_j) K(tau - lambda_j) <u_j, A u_j> over
the eigenpairs, where K is the scaled inverse Fourier transform of a window
theta(t/eps): K(s) = (eps/h) Phi(eps s / h) with an h-independent profile
Phi cached per window shape.
"""
from __future__ import annotations

import inspect
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .bumps import ProductCutoff, bump_profile, transition
from .quadrature import gauss_rule
from .symbols import MatrixPotential, hermiticity_defect

__all__ = [
    "CoverageError",
    "SupportMarginError",
    "GridMismatchError",
    "Grid1D",
    "GridOperator",
    "required_points",
    "build_schrodinger",
    "weyl_quantize",
    "WindowTheta",
    "fourier_window",
    "window_primitive",
    "smoothed_trace",
    "loglog_slope",
    "DecayReport",
    "ComparisonReport",
    "theorem1_check",
    "theorem2_check",
    "theorem3_check",
]


class CoverageError(ValueError):
    """Momentum window too small for the configured energy range."""

    def __init__(self, msg: str, required_m: int | None = None):
        super().__init__(msg)
        self.required_m = required_m


class SupportMarginError(ValueError):
    """Symbol support too close to the periodic seam or the momentum edge."""


class GridMismatchError(ValueError):
    """Operators live on different grids."""


def required_points(R: float, h: float, tau_max: float) -> int:
    """Smallest even M with momentum coverage pi h (M/2) / R >= 2 sqrt(tau_max)."""
    m = math.ceil(4.0 * R * math.sqrt(tau_max) / (math.pi * h))
    return m + (m % 2)


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid x in [-R, R), M even points, semiclassical parameter h."""

    R: float
    M: int
    h: float
    tau_max: float | None = None

    def __post_init__(self):
        if self.M < 2 or self.M % 2:
            raise ValueError("M must be even and >= 2")
        if not (self.R > 0 and 0 < self.h):
            raise ValueError("R and h must be positive")
        if self.tau_max is not None:
            need = required_points(self.R, self.h, self.tau_max)
            if self.M < need:
                raise CoverageError(
                    f"M={self.M} below coverage for tau_max={self.tau_max}: need M>={need}",
                    required_m=need,
                )

    @property
    def dx(self) -> float:
        return 2.0 * self.R / self.M

    @property
    def dp(self) -> float:
        return math.pi * self.h / self.R

    @property
    def nodes(self) -> np.ndarray:
        return -self.R + self.dx * np.arange(self.M)

    @property
    def half_nodes(self) -> np.ndarray:
        return -self.R + 0.5 * self.dx * np.arange(2 * self.M)

    @property
    def momenta(self) -> np.ndarray:
        return self.dp * np.arange(-self.M // 2, self.M // 2)

    @property
    def momenta_fft_order(self) -> np.ndarray:
        return self.dp * np.fft.fftfreq(self.M, 1.0 / self.M)

    @property
    def p_max(self) -> float:
        return self.dp * (self.M // 2)

    def reliable_tau_max(self) -> float:
        return (0.5 * self.p_max) ** 2


def _kinetic_circulant(grid: Grid1D) -> np.ndarray:
    """Dense kinetic matrix F* diag(p^2) F as a real symmetric circulant."""
    p2 = grid.momenta_fft_order**2
    row = np.fft.ifft(p2).real
    idx = (np.arange(grid.M)[:, None] - np.arange(grid.M)[None, :]) % grid.M
    k = row[idx]
    return 0.5 * (k + k.T)


@dataclass
class GridOperator:
    """Dense hermitian operator on the grid with a lazy eigendecomposition.

    ``eigenvalues`` uses a values-only solve; ``eigenpairs`` upgrades to a
    full decomposition (and replaces the cached values so both views stay
    mutually consistent).  Constant-potential operators carry an analytic
    spectrum instead: plane waves tensored with channel eigenvectors.
    """

    grid: Grid1D
    N: int
    matrix: np.ndarray
    label: str = ""
    _values: np.ndarray | None = field(default=None, repr=False)
    _vectors: np.ndarray | None = field(default=None, repr=False)
    _analytic: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        dim = self.grid.M * self.N
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match grid")
        scale = float(np.max(np.abs(self.matrix))) or 1.0
        defect = hermiticity_defect(self.matrix)
        if defect > 1e-11 * scale:
            raise ValueError(f"relative hermiticity defect {defect/scale:.2e} too large")
        self.matrix = 0.5 * (self.matrix + self.matrix.conj().T)

    @property
    def dim(self) -> int:
        return self.grid.M * self.N

    def eigenvalues(self) -> np.ndarray:
        if self._values is None:
            if self._analytic is not None:
                self._values = self._analytic_values()
            else:
                self._values = np.linalg.eigvalsh(self.matrix)
        return self._values

    def eigenpairs(self) -> tuple[np.ndarray, np.ndarray]:
        if self._vectors is None:
            if self._analytic is not None:
                self._values, self._vectors = self._analytic_pairs()
            else:
                self._values, self._vectors = np.linalg.eigh(self.matrix)
        return self._values, self._vectors

    # -- analytic spectrum for constant potentials ------------------------
    def _analytic_order(self):
        channel_vals, _ = self._analytic
        p2 = self.grid.momenta**2
        vals = (p2[:, None] + channel_vals[None, :]).ravel()
        order = np.argsort(vals, kind="stable")
        return vals, order

    def _analytic_values(self) -> np.ndarray:
        vals, order = self._analytic_order()
        return vals[order]

    def _analytic_pairs(self):
        vals, order = self._analytic_order()
        _, channel_vecs = self._analytic
        m_grid = self.grid.M
        phases = np.exp(1j * np.outer(self.grid.nodes, self.grid.momenta / self.grid.h))
        phases /= math.sqrt(m_grid)
        vectors = np.zeros((m_grid * self.N, m_grid * self.N), dtype=complex)
        for col, flat in enumerate(order):
            m_idx, k_idx = divmod(flat, self.N)
            vectors[:, col] = np.kron(phases[:, m_idx], channel_vecs[:, k_idx])
        return vals[order], vectors

    def reconstruction_residual(self) -> float:
        vals, vecs = self.eigenpairs()
        approx = (vecs * vals) @ vecs.conj().T
        scale = float(np.max(np.abs(self.matrix))) or 1.0
        return float(np.max(np.abs(approx - self.matrix))) / scale


def build_schrodinger(v: MatrixPotential, grid: Grid1D) -> GridOperator:
    """Dense matrix of the kinetic circulant tensor identity plus block
    potential; constant potentials additionally get an analytic spectrum."""
    if v.n != 1:
        raise NotImplementedError("the quantization engine is one-dimensional")
    blocks = []
    for x in grid.nodes:
        b = np.asarray(v.eval(float(x)))
        blocks.append(0.5 * (b + b.conj().T))
    blocks = np.stack(blocks)

    kin = _kinetic_circulant(grid)
    real = bool(np.max(np.abs(blocks.imag)) == 0.0)
    dtype = float if real else complex
    mat = np.kron(kin, np.eye(v.N)).astype(dtype)
    for j in range(grid.M):
        sl = slice(j * v.N, (j + 1) * v.N)
        mat[sl, sl] += blocks[j].real if real else blocks[j]

    op = GridOperator(grid=grid, N=v.N, matrix=mat, label=f"schrodinger({v.name})")
    const = bool(np.max(np.abs(blocks - blocks[0])) == 0.0)
    if const:
        b0 = blocks[0]
        off = b0 - np.diag(np.diag(b0))
        if np.max(np.abs(off), initial=0.0) == 0.0:
            channel_vals = np.diag(b0).real.copy()
            channel_vecs = np.eye(v.N, dtype=complex)
        else:
            channel_vals, channel_vecs = np.linalg.eigh(b0)
        op._analytic = (channel_vals, channel_vecs)
    return op


def _index_tables(grid: Grid1D):
    m_pts = grid.M
    i = np.arange(m_pts)
    delta = (i[:, None] - i[None, :] + m_pts // 2) % m_pts - m_pts // 2
    mid_idx = (2 * i[None, :] + delta) % (2 * m_pts)
    # at the antipodal lag |delta| = M/2 the minimal image ties and the two
    # candidate midpoints differ by R; they are averaged to keep the matrix
    # hermitian (the phase factor is the same for both representatives)
    ambiguous = delta == -(m_pts // 2)
    return delta, mid_idx, ambiguous


def _midpoint_values(values_half: np.ndarray, mid_idx, ambiguous, m_pts: int):
    out = values_half[mid_idx]
    if np.any(ambiguous):
        other = values_half[(mid_idx + m_pts) % (2 * m_pts)]
        out = np.where(ambiguous, 0.5 * (out + other), out)
    return out


def weyl_quantize(a, grid: Grid1D, margin: float = 2.0,
                  general_m_cap: int = 2048) -> GridOperator:
    """Weyl quantization of a scalar phase-space symbol on the grid.

    Accepted symbols: a number (multiple of the identity), a function of x
    alone (multiplication operator; both assembled through the closed-form
    discrete delta, hence exact), a ``ProductCutoff`` g(x) k(xi) (separable
    fast path), or a general callable a(x, xi) (table path, M capped for
    memory).  Compactly supported symbols must keep ``margin`` clear of the
    periodic seam; the xi-factor support must sit inside the momentum window.
    """
    m_pts = grid.M

    if isinstance(a, (int, float)):
        return GridOperator(grid=grid, N=1,
                            matrix=float(a) * np.eye(m_pts), label=f"const({a})")

    if isinstance(a, ProductCutoff):
        _check_margins(a, grid, margin)
        kappa = np.fft.ifft(a.k(grid.momenta_fft_order))
        delta, mid_idx, ambiguous = _index_tables(grid)
        g_mid = _midpoint_values(a.g(grid.half_nodes), mid_idx, ambiguous, m_pts)
        mat = g_mid * kappa[delta % m_pts]
        mat = 0.5 * (mat + mat.conj().T)
        if np.max(np.abs(mat.imag), initial=0.0) <= 1e-14 * max(1.0, np.max(np.abs(mat.real))):
            mat = mat.real.copy()
        return GridOperator(grid=grid, N=1, matrix=mat, label="weyl(product)")

    if callable(a):
        n_args = len(inspect.signature(a).parameters)
        if n_args == 1:
            return GridOperator(grid=grid, N=1,
                                matrix=np.diag(np.asarray(a(grid.nodes), dtype=float)),
                                label="weyl(multiplication)")
        if m_pts > general_m_cap:
            raise MemoryError(
                f"general symbol table needs M <= {general_m_cap}; use a ProductCutoff"
            )
        amp = np.asarray(a(grid.half_nodes[:, None], grid.momenta_fft_order[None, :]),
                         dtype=complex)
        table = np.fft.ifft(amp, axis=1)
        delta, mid_idx, ambiguous = _index_tables(grid)
        mat = table[mid_idx, delta % m_pts]
        if np.any(ambiguous):
            other = table[(mid_idx + m_pts) % (2 * m_pts), delta % m_pts]
            mat = np.where(ambiguous, 0.5 * (mat + other), mat)
        mat = 0.5 * (mat + mat.conj().T)
        return GridOperator(grid=grid, N=1, matrix=mat, label="weyl(general)")

    raise TypeError(f"cannot quantize object of type {type(a)!r}")


def _check_margins(chi: ProductCutoff, grid: Grid1D, margin: float) -> None:
    xa, xb = chi.x_support
    if xa < -grid.R + margin or xb > grid.R - margin:
        raise SupportMarginError(
            f"x-support [{xa}, {xb}] violates the margin {margin} inside [-R, R)"
        )
    qa, qb = chi.xi_support
    if qa < -grid.p_max or qb > grid.p_max:
        raise SupportMarginError(
            f"xi-support [{qa}, {qb}] exceeds the momentum window +-{grid.p_max:.3f}"
        )


# ---------------------------------------------------------------------------
# smoothing windows
# ---------------------------------------------------------------------------

_PROFILE_CACHE: dict[str, "_WindowProfile"] = {}
_PROFILE_YMAX = 1200.0  # the one-sided window tail is Gevrey-slow
_GL_ORDER = 768


def _theta_eval(kind: str, t):
    t = np.asarray(t, dtype=float)
    if kind == "bump_at_zero":
        # identically 1 on |t| <= 1/4, supported in (-1, 1)
        return transition((np.abs(t) - 0.25) * (4.0 / 3.0))
    if kind == "bump_positive":
        # supported in (1/2, 1)
        return bump_profile(4.0 * t - 3.0)
    raise ValueError(f"unknown window kind {kind!r}")


class _WindowProfile:
    """h-independent profile Phi(y) = (1/2pi) int theta(u) exp(i u y) du."""

    def __init__(self, kind: str):
        self.kind = kind
        if kind == "bump_at_zero":
            supp = (-1.0, 1.0)
        else:
            supp = (0.5, 1.0)
        ys = np.concatenate([
            np.arange(0.0, 16.0, 0.002),
            np.arange(16.0, 64.0, 0.01),
            np.arange(64.0, 256.0, 0.05),
            np.arange(256.0, _PROFILE_YMAX + 0.1, 0.1),
        ])
        un, uw = gauss_rule(_GL_ORDER)
        mid, half = 0.5 * (supp[0] + supp[1]), 0.5 * (supp[1] - supp[0])
        u = mid + half * un
        w = half * uw * _theta_eval(kind, u)
        phase = np.exp(1j * np.outer(ys, u))
        vals = phase @ w / (2.0 * math.pi)
        self.even = kind == "bump_at_zero"
        self.ys = ys
        if self.even:
            vals = vals.real
            self._re = CubicSpline(ys, vals)
            self._im = None
            anti = self._re.antiderivative()
            self._anti = anti
            self.total = 2.0 * float(anti(ys[-1]))
        else:
            self._re = CubicSpline(ys, vals.real)
            self._im = CubicSpline(ys, vals.imag)
            self._anti = None
            self.total = None

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        inside = ay <= self.ys[-1]
        re = np.zeros_like(ay)
        re[inside] = self._re(ay[inside])
        if self.even:
            return re
        im = np.zeros_like(ay)
        im[inside] = self._im(ay[inside])
        out = re + 1j * im
        return np.where(y >= 0, out, np.conj(out))

    def primitive(self, y):
        """int_{-inf}^{y} Phi(u) du (even profiles only)."""
        if not self.even:
            raise ValueError("primitive is only defined for the even window")
        y = np.asarray(y, dtype=float)
        ay = np.clip(np.abs(y), 0.0, self.ys[-1])
        part = self._anti(ay)
        return 0.5 * self.total + np.sign(y) * part


def _profile(kind: str) -> _WindowProfile:
    if kind not in _PROFILE_CACHE:
        _PROFILE_CACHE[kind] = _WindowProfile(kind)
    return _PROFILE_CACHE[kind]


@dataclass(frozen=True)
class WindowTheta:
    """Window theta(t/eps) used to mollify energies at scale eps * h^-1.

    ``bump_at_zero`` equals 1 on |t| <= eps/4 (even, real transform);
    ``bump_positive`` is supported in eps * (1/2, 1) (one-sided, complex
    transform).  ``eps_rule`` optionally records how eps was derived from h.
    """

    kind: str = "bump_at_zero"
    eps: float = 0.25
    eps_rule: str | None = None

    def __post_init__(self):
        if self.kind not in ("bump_at_zero", "bump_positive"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def theta(self, t):
        return _theta_eval(self.kind, np.asarray(t, dtype=float) / self.eps)

    def with_eps(self, eps: float) -> "WindowTheta":
        return replace(self, eps=float(eps))

    @property
    def is_even(self) -> bool:
        return self.kind == "bump_at_zero"


def fourier_window(w: WindowTheta, h: float, s):
    """Scaled inverse transform (1/2 pi h) int exp(i t s / h) theta(t/eps) dt.

    Equals (eps/h) Phi(eps s / h) for the cached h-independent profile Phi;
    real for the even window, complex for the one-sided one.
    """
    prof = _profile(w.kind)
    scalar = np.ndim(s) == 0
    y = w.eps * np.atleast_1d(np.asarray(s, dtype=float)) / h
    vals = (w.eps / h) * prof(y)
    if scalar:
        return vals[0] if not prof.even else float(vals[0])
    return vals


def window_primitive(w: WindowTheta, h: float, s):
    """Primitive of fourier_window in s: a smoothed step rising to theta(0)."""
    prof = _profile(w.kind)
    scalar = np.ndim(s) == 0
    y = w.eps * np.atleast_1d(np.asarray(s, dtype=float)) / h
    vals = prof.primitive(y)
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# smoothed spectral traces
# ---------------------------------------------------------------------------


def _cutoff_diagonal(a_op: GridOperator, h_op: GridOperator) -> np.ndarray:
    """<u_j, A u_j> for every eigenvector of H; A may be per-channel scalar."""
    vals, vecs = h_op.eigenpairs()
    if a_op.N == h_op.N:
        t = a_op.matrix @ vecs
        return np.einsum("ij,ij->j", vecs.conj(), t)
    if a_op.N == 1 and h_op.N > 1:
        m_pts = h_op.grid.M
        uv = vecs.reshape(m_pts, h_op.N, vecs.shape[1])
        t = np.tensordot(a_op.matrix, uv, axes=([1], [0]))
        return np.einsum("mnk,mnk->k", uv.conj(), t)
    raise GridMismatchError("channel counts are incompatible")


def smoothed_trace(a_op: GridOperator | None, h_op: GridOperator, f, w: WindowTheta,
                   tau):
    """tr(A f(H) K_w(tau - H)) evaluated through the eigendecomposition.

    ``a_op=None`` means the identity.  Returns a complex scalar (or array over
    tau); for the even window and hermitian A the imaginary part is at
    rounding level.
    """
    if a_op is not None and a_op.grid != h_op.grid:
        raise GridMismatchError("cutoff and Hamiltonian live on different grids")
    lam = h_op.eigenvalues()
    fv = np.asarray(f(lam), dtype=float) if callable(f) else np.asarray(f, dtype=float)
    if a_op is None:
        weights = fv.astype(complex)
    else:
        weights = fv * _cutoff_diagonal(a_op, h_op)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    kern = fourier_window(w, h_op.grid.h, taus[:, None] - lam[None, :])
    vals = kern @ weights
    return vals[0] if np.ndim(tau) == 0 else vals


def loglog_slope(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    coef = np.polyfit(np.log(hs), np.log(errs), 1)
    return float(coef[0])


# ---------------------------------------------------------------------------
# empirical theorem checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    hs: np.ndarray
    values: np.ndarray
    slope: float | None
    below_floor: bool
    verdict: str
    floor: float
    threshold: float

    def rows(self):
        for h, v in zip(self.hs, self.values):
            yield {"h": h, "value": v, "reference": 0.0, "rel_error": v,
                   "fitted_slope": self.slope if self.slope is not None else float("nan")}


@dataclass(frozen=True)
class ComparisonReport:
    hs: np.ndarray
    values: np.ndarray
    reference: float
    rel_errors: np.ndarray
    residual_order: float | None
    verdict: str

    def rows(self):
        for h, v, e in zip(self.hs, self.values, self.rel_errors):
            yield {"h": h, "value": v, "reference": self.reference, "rel_error": e,
                   "fitted_slope": self.residual_order if self.residual_order is not None else float("nan")}


class CertificateError(RuntimeError):
    """The check requires a valid certificate for its hypothesis."""


def _grid_for(h: float, R: float, tau_max: float, m_cap: int) -> Grid1D:
    need = required_points(R, h, tau_max)
    if need > m_cap:
        raise CoverageError(
            f"h={h} needs M={need} > cap {m_cap}; raise h or the cap", required_m=need
        )
    return Grid1D(R=R, M=need, h=h, tau_max=tau_max)


def _require_valid(certificate) -> None:
    # an empty shell certifies the hypothesis vacuously
    if certificate is not None and getattr(certificate, "empty_shell", False):
        return
    if certificate is None or not getattr(certificate, "valid", False):
        raise CertificateError("a valid certificate for the hypothesis is required")


def theorem1_check(
    v: MatrixPotential,
    chi: ProductCutoff,
    f,
    tau0: float,
    h_list,
    certificate,
    window_kind: str = "bump_positive",
    eps_rule=None,
    R: float = 6.0,
    tau_max: float | None = None,
    m_cap: int = 8192,
    floor: float = 1e-10,
    slope_threshold: float = 3.0,
) -> DecayReport:
    """Decay of the off-zero-window smoothed trace along an h-sweep.

    With the one-sided window the trace should vanish to high order in h on a
    certified shell; the verdict is PASS when the fitted slope reaches the
    threshold or every value is below the floor.  Running it with the even
    window instead exhibits the leading 1/(2 pi h) growth (negative slope),
    which callers use as the non-applicability control.
    """
    _require_valid(certificate)
    eps_rule = eps_rule or (lambda h: math.sqrt(h))
    values = []
    for h in h_list:
        grid = _grid_for(h, R, tau_max if tau_max is not None else 1.6 * abs(tau0) + 0.5, m_cap)
        h_op = build_schrodinger(v, grid)
        a_op = weyl_quantize(chi, grid)
        eps = eps_rule(h) if callable(eps_rule) else float(eps_rule)
        w = WindowTheta(kind=window_kind, eps=eps)
        values.append(abs(complex(smoothed_trace(a_op, h_op, f, w, tau0))))
    values = np.asarray(values)
    hs = np.asarray(list(h_list), dtype=float)
    below = bool(np.all(values < floor))
    slope = None
    if not below and np.all(values > 0):
        slope = loglog_slope(hs, values)
    verdict = "PASS" if below or (slope is not None and slope >= slope_threshold) else "FAIL"
    return DecayReport(hs=hs, values=values, slope=slope, below_floor=below,
                       verdict=verdict, floor=floor, threshold=slope_threshold)


def theorem2_check(
    v0: MatrixPotential,
    v1: MatrixPotential,
    chi: ProductCutoff,
    f,
    taus,
    h_list,
    window: WindowTheta,
    R: float = 10.0,
    tau_max: float | None = None,
    m_cap: int = 8192,
    d_sep: float = 2.0,
    floor: float = 1e-10,
    slope_threshold: float = 3.0,
) -> DecayReport:
    """Locality: traces of two operators agreeing near supp chi must differ
    only to high order in h.  Rejects perturbations closer than ``d_sep``."""
    probe = np.linspace(-R, R, 4001)
    diff = np.array([
        np.max(np.abs(np.asarray(v1.eval(float(x))) - np.asarray(v0.eval(float(x)))))
        for x in probe
    ])
    moved = probe[diff > 1e-12]
    xa, xb = chi.x_support
    if moved.size:
        overlap = bool(np.any((moved >= xa) & (moved <= xb)))
        gap = 0.0 if overlap else float(
            np.min(np.where(moved > xb, moved - xb, xa - moved))
        )
        if overlap or gap < d_sep:
            raise SupportMarginError(
                f"perturbation support within {d_sep} of the cutoff support (gap {gap:.2f})"
            )
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    values = []
    for h in h_list:
        tmax = tau_max if tau_max is not None else 1.6 * float(np.max(np.abs(taus))) + 0.5
        grid = _grid_for(h, R, tmax, m_cap)
        a_op = weyl_quantize(chi, grid)
        op0 = build_schrodinger(v0, grid)
        op1 = build_schrodinger(v1, grid)
        t1 = smoothed_trace(a_op, op1, f, window, taus)
        t0 = smoothed_trace(a_op, op0, f, window, taus)
        values.append(float(np.max(np.abs(t1 - t0))))
    values = np.asarray(values)
    hs = np.asarray(list(h_list), dtype=float)
    below = bool(np.all(values < floor))
    slope = None
    if not below and np.all(values > 0):
        slope = loglog_slope(hs, values)
    verdict = "PASS" if below or (slope is not None and slope >= slope_threshold) else "FAIL"
    return DecayReport(hs=hs, values=values, slope=slope, below_floor=below,
                       verdict=verdict, floor=floor, threshold=slope_threshold)


def theorem3_check(
    v: MatrixPotential,
    chi: ProductCutoff,
    f,
    tau: float,
    h_list,
    window: WindowTheta,
    certificate,
    reference: float | None = None,
    R: float = 6.0,
    tau_max: float | None = None,
    m_cap: int = 8192,
    rel_threshold: float = 0.05,
    order_threshold: float = 1.0,
) -> ComparisonReport:
    """Leading term of the localized trace: 2 pi h tr(...) against
    f(tau) * gamma0_localized(tau), with the fitted order of the residual."""
    _require_valid(certificate)
    if not window.is_even:
        raise ValueError("the leading-term check uses the even window")
    if reference is None:
        from .coefficients import gamma0_localized
        from .symbols import schrodinger_symbol

        dens = gamma0_localized(schrodinger_symbol(v), chi, tau)
        if not dens.converged:
            raise CertificateError("localized density did not converge at this tau")
        f_at = float(f(tau)) if callable(f) else float(f)
        reference = f_at * dens.value
    values = []
    for h in h_list:
        grid = _grid_for(h, R, tau_max if tau_max is not None else 1.6 * abs(tau) + 0.5, m_cap)
        h_op = build_schrodinger(v, grid)
        a_op = weyl_quantize(chi, grid)
        tr = smoothed_trace(a_op, h_op, f, window, tau)
        values.append(2.0 * math.pi * h * float(np.real(tr)))
    values = np.asarray(values)
    hs = np.asarray(list(h_list), dtype=float)
    rel = np.abs(values - reference) / max(abs(reference), 1e-300)
    resid = np.abs(values - reference)
    order = loglog_slope(hs, resid) if np.all(resid > 0) else None
    ok = rel[-1] <= rel_threshold and (order is None or order >= order_threshold)
    return ComparisonReport(hs=hs, values=values, reference=float(reference),
                            rel_errors=rel, residual_order=order,
                            verdict="PASS" if ok else "FAIL")
