"""Modified Bessel functions of the first kind for real order nu >= -1/2.

Power series below the switch point, Hankel's large-argument expansion above
it.  The exponentially scaled form ``e^{-z} I_nu(z)`` is the primitive; the
unscaled value is derived from it only where it fits in a double.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

_SERIES_TERMS = 200
_ASYMPTOTIC_TERMS = 60


def _switch_point(nu: float) -> float:
    # Hankel terms shrink from the start only once z is well beyond nu^2
    return max(20.0, 2.0 * nu * nu)


def _check_order(nu: float, extended: bool):
    if extended:
        if not nu > -1:
            raise ValueError(f"order {nu} must exceed -1")
    elif nu < -0.5:
        raise ValueError(f"order {nu} below -1/2 requires extended=True")


def _series_scaled(nu: float, z: np.ndarray) -> np.ndarray:
    """e^{-z} I_nu(z) from the power series; z > 0."""
    q = 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + nu))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    log_pref = nu * np.log(0.5 * z) - gammaln(nu + 1.0) - z
    return total * np.exp(log_pref)


def _asymptotic_scaled(nu: float, z: np.ndarray) -> np.ndarray:
    """e^{-z} I_nu(z) from the Hankel expansion; z beyond the switch point."""
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = np.ones_like(z)
    prev_abs = np.full_like(z, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * z)
        cur_abs = np.abs(term)
        # stop each entry at its smallest term
        active &= cur_abs < prev_abs
        total = total + np.where(active, term, 0.0)
        prev_abs = cur_abs
        if not active.any() or np.all(cur_abs <= 1e-17 * np.abs(total)):
            break
    return total / np.sqrt(2.0 * math.pi * z)


def modified_bessel_ive(nu: float, z, extended: bool = False):
    """Exponentially scaled modified Bessel function e^{-z} I_nu(z), z >= 0."""
    _check_order(nu, extended)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    out = np.empty(z.shape)
    zero = z == 0
    if nu == 0:
        out[zero] = 1.0
    elif nu > 0:
        out[zero] = 0.0
    else:
        out[zero] = np.inf
    sw = _switch_point(nu)
    low = (~zero) & (z <= sw)
    high = z > sw
    if low.any():
        out[low] = _series_scaled(nu, z[low])
    if high.any():
        out[high] = _asymptotic_scaled(nu, z[high])
    return out[()] if out.ndim == 0 else out


def log_modified_bessel_ive(nu: float, z, extended: bool = False):
    """log(e^{-z} I_nu(z)) for z > 0, safe where the scaled value underflows."""
    _check_order(nu, extended)
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape)
    sw = _switch_point(nu)
    low = z <= sw
    high = ~low
    if low.any():
        zl = z[low]
        q = 0.25 * zl * zl
        term = np.ones_like(zl)
        total = np.ones_like(zl)
        for k in range(1, _SERIES_TERMS):
            term = term * q / (k * (k + nu))
            total = total + term
            if np.all(term <= 1e-17 * total):
                break
        with np.errstate(divide="ignore"):
            out[low] = np.log(total) + nu * np.log(0.5 * zl) - gammaln(nu + 1.0) - zl
    if high.any():
        out[high] = np.log(_asymptotic_scaled(nu, z[high]))
    return out[()] if out.ndim == 0 else out


def modified_bessel_I(nu: float, z, extended: bool = False):
    """Modified Bessel function I_nu(z) for real z >= 0."""
    scaled = modified_bessel_ive(nu, z, extended=extended)
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(z == 0, scaled, scaled * np.exp(z))
    return out[()] if np.ndim(out) == 0 else out
