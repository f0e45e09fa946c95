"""Smooth compactly supported profiles, cutoffs, and scalar phase-space fields.

Everything here is vectorized over numpy arrays and vanishes *exactly*
outside its stated support (no 1e-300 tails), which keeps truncated
integrals and degenerate-input identities exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "smootherstep",
    "transition",
    "bump_profile",
    "radial_cutoff",
    "Bump1D",
    "ProductCutoff",
    "ScalarPhaseFunction",
    "dilation_generator",
]


def smootherstep(t):
    """Order-7 polynomial step: 0 for t<=0, 1 for t>=1, C^3 across the joins."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t**4 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))


def _phi(u):
    # exp(-1/u) continued by 0; the standard C-infinity glue factor
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def transition(s):
    """C-infinity monotone ramp: 1 for s<=0, 0 for s>=1."""
    s = np.asarray(s, dtype=float)
    a = _phi(1.0 - s)
    b = _phi(s)
    return a / (a + b + np.finfo(float).tiny)


def bump_profile(u):
    """C-infinity bump on (-1,1), normalized to peak value 1 at u=0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def radial_cutoff(r):
    """Radial cutoff: 1 for r<=1, 0 for r>=2, polynomial smoothstep between."""
    r = np.asarray(r, dtype=float)
    return 1.0 - smootherstep(r - 1.0)


@dataclass(frozen=True)
class Bump1D:
    """Smooth bump g(x) supported on [center-halfwidth, center+halfwidth]."""

    center: float = 0.0
    halfwidth: float = 1.0
    amplitude: float = 1.0

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return self.amplitude * bump_profile(u)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        u = (x - self.center) / self.halfwidth
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        w = 1.0 - ui * ui
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / w) * (-2.0 * ui / w**2)
        return out / self.halfwidth

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def integral(self, order: int = 200) -> float:
        nodes, weights = np.polynomial.legendre.leggauss(order)
        a, b = self.support
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return float(half * np.sum(weights * self(mid + half * nodes)))


@dataclass(frozen=True)
class ProductCutoff:
    """Phase-space cutoff chi(x, xi) = g(x) * k(xi) with compact supports."""

    g: Bump1D = field(default_factory=Bump1D)
    k: Bump1D = field(default_factory=Bump1D)

    def __call__(self, x, xi):
        return self.g(x) * self.k(xi)

    @property
    def x_support(self) -> tuple[float, float]:
        return self.g.support

    @property
    def xi_support(self) -> tuple[float, float]:
        return self.k.support

    def box(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (self.x_support, self.xi_support)

    def integral(self, order: int = 200) -> float:
        return self.g.integral(order) * self.k.integral(order)


@dataclass(frozen=True)
class ScalarPhaseFunction:
    """Scalar G(x, xi) with an explicit phase-space gradient.

    ``grad(x, xi)`` returns the 2n-vector (dG/dx..., dG/dxi...); for n=1 a
    plain pair (G_x, G_xi).
    """

    n: int
    eval: Callable
    grad: Callable
    name: str = ""

    def __call__(self, x, xi):
        return self.eval(x, xi)

    def gradient(self, x, xi) -> np.ndarray:
        return np.asarray(self.grad(x, xi), dtype=float)


def dilation_generator(n: int = 1) -> ScalarPhaseFunction:
    """G(x, xi) = x . xi, the generator of phase-space dilations."""
    if n == 1:
        return ScalarPhaseFunction(
            n=1,
            eval=lambda x, xi: x * xi,
            grad=lambda x, xi: np.array([xi, x], dtype=float),
            name="x.xi",
        )

    def _eval(x, xi):
        return float(np.dot(x, xi))

    def _grad(x, xi):
        return np.concatenate([np.asarray(xi, float), np.asarray(x, float)])

    return ScalarPhaseFunction(n=n, eval=_eval, grad=_grad, name="x.xi")
