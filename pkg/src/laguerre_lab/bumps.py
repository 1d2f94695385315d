"""Compactly supported bump functions used as spectral multipliers."""

from __future__ import annotations

import numpy as np

SQUARE_FUNCTION_SUPPORT = (0.125, 0.5)


def standard_bump(s):
    """exp(1 - 1/(1 - s^2)) on (-1, 1), zero elsewhere; peak value 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


class Bump:
    """The standard bump rescaled to the open interval ``(lo, hi)``.

    Even about the midpoint and nonnegative, so its Fourier transform at
    zero is strictly positive.
    """

    def __init__(self, lo: float = SQUARE_FUNCTION_SUPPORT[0], hi: float = SQUARE_FUNCTION_SUPPORT[1]):
        if not hi > lo:
            raise ValueError("bump support must satisfy lo < hi")
        self.lo = float(lo)
        self.hi = float(hi)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return standard_bump((t - self.center) / self.half_width)

    def __repr__(self):
        return f"Bump({self.lo!r}, {self.hi!r})"

    def fourier(self, xi, n_nodes: int = 400):
        """phi_hat(xi) = int phi(t) exp(-i xi t) dt by Gauss-Legendre on the support.

        The integrand is C-infinity with all derivatives vanishing at the
        endpoints, so a few hundred nodes reach machine precision for
        |xi| up to a few thousand.
        """
        xi = np.asarray(xi, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        t = self.center + self.half_width * nodes
        w = self.half_width * weights * self(t)
        phase = np.exp(-1j * np.multiply.outer(xi, t))
        return phase @ w


def smooth_step(v):
    """C-infinity step: 0 for v <= 0, 1 for v >= 1."""
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
        b = np.where(v < 1, np.exp(-1.0 / np.where(v < 1, 1.0 - v, 1.0)), 0.0)
    return a / (a + b)


def dyadic_partition_bump(s):
    """psi supported in (1/2, 2) with sum_k psi(2^-k s) = 1 for every s > 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    u = np.log2(s[pos])
    out[pos] = smooth_step(u + 1.0) - smooth_step(u)
    return out
