"""Laguerre polynomials, normalized Laguerre functions and the Hermite-type
eigenfunctions of the Laguerre operator on the positive orthant.

All evaluation goes through one scaled three-term recurrence for the
orthonormal polynomials ``q_n = sqrt(n!/Gamma(n+a+1)) L_n^a``.  Mantissas are
renormalized whenever they leave ``[1e-150, 1e150]`` and the accumulated
exponent is combined with the weight ``e^{-u/2} u^{a/2}`` in log space, so
degrees in the thousands and arguments deep in the exponential tail neither
overflow nor lose the normalization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln, xlogy

_RESCALE = 1e150
_LOG_RESCALE_GUARD = math.log(_RESCALE)
# smallest positive double, in log space
_LOG_TINY = math.log(np.finfo(float).tiny)


@dataclass(frozen=True)
class AlphaParam:
    """Type multi-index alpha in [-1/2, inf)^d.

    ``extended=True`` admits entries in (-1, -1/2); those eigenfunctions are
    no longer in every L^p, so the flag has to be requested explicitly.
    """

    entries: tuple[float, ...]
    extended: bool = False
    alpha_l1: float = field(init=False)

    def __post_init__(self):
        entries = tuple(float(a) for a in np.atleast_1d(self.entries))
        if not entries:
            raise ValueError("alpha must have at least one entry")
        lower = -1.0 if self.extended else -0.5
        for a in entries:
            if not math.isfinite(a):
                raise ValueError(f"alpha entry {a} is not finite")
            if (self.extended and a <= lower) or (not self.extended and a < lower):
                raise ValueError(f"alpha entry {a} outside the admissible range")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "alpha_l1", math.fsum(entries))

    @classmethod
    def of(cls, *values: float, extended: bool = False) -> "AlphaParam":
        if len(values) == 1 and isinstance(values[0], (Sequence, np.ndarray)):
            values = tuple(values[0])
        return cls(tuple(values), extended=extended)

    @classmethod
    def uniform(cls, value: float, dim: int) -> "AlphaParam":
        return cls((float(value),) * dim)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]


@dataclass(frozen=True)
class EvalPoint:
    """A point of (0, inf)^d with cached Euclidean and l1 norms."""

    coords: tuple[float, ...]
    norm: float = field(init=False)
    l1: float = field(init=False)

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if not coords:
            raise ValueError("point must have at least one coordinate")
        if any(not (c > 0 and math.isfinite(c)) for c in coords):
            raise ValueError("all coordinates must be finite and strictly positive")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "norm", math.sqrt(math.fsum(c * c for c in coords)))
        object.__setattr__(self, "l1", math.fsum(coords))

    @classmethod
    def of(cls, *coords: float) -> "EvalPoint":
        if len(coords) == 1 and isinstance(coords[0], (Sequence, np.ndarray)):
            coords = tuple(coords[0])
        return cls(tuple(coords))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.array(self.coords)


class Regime(enum.Enum):
    BELOW_1_OVER_NU = "below_1_over_nu"
    BULK = "bulk"
    TRANSITION = "transition"
    EXPONENTIAL_TAIL = "exponential_tail"


class RegimeTag(NamedTuple):
    regime: Regime
    nu: float


def _check_type(a: float, strict_half: bool = False):
    if strict_half and a < -0.5:
        raise ValueError(f"type parameter {a} < -1/2")
    if not a > -1:
        raise ValueError(f"type parameter {a} must exceed -1")


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

def laguerre_poly_explicit(n: int, a: float, x: float, dps: int = 40) -> float:
    """L_n^a(x) from the explicit alternating sum, in extended precision.

    Used only as an oracle: the sum cancels catastrophically in double
    precision once x is comparable to n.
    """
    _check_type(a)
    if n < 0 or n > 60:
        raise ValueError("explicit sum is restricted to 0 <= n <= 60")
    if x < 0:
        raise ValueError("x must be nonnegative")
    with mpmath.workdps(dps):
        a_ = mpmath.mpf(a)
        x_ = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for j in range(n + 1):
            total += (
                mpmath.gamma(n + a_ + 1)
                / (mpmath.gamma(n - j + 1) * mpmath.gamma(j + a_ + 1))
                * (-x_) ** j
                / mpmath.factorial(j)
            )
        value = float(total)
    if not math.isfinite(value):
        raise OverflowError("explicit sum exceeded the double range")
    return value


def laguerre_recurrence(n_max: int, a: float, x) -> np.ndarray:
    """L_0^a(x), ..., L_{n_max}^a(x) by the forward three-term recurrence.

    ``x`` may be an array; the result then has shape ``(n_max + 1,) + x.shape``.
    """
    _check_type(a)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 1.0 + a - x
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1 + a - x) * out[n] - (n + a) * out[n - 1]) / (n + 1)
    return out


def laguerre_at_zero(n, a: float):
    """L_n^a(0) = Gamma(n+a+1) / (Gamma(n+1) Gamma(a+1)), via log-Gamma."""
    n = np.asarray(n, dtype=float)
    return np.exp(gammaln(n + a + 1) - gammaln(n + 1) - gammaln(a + 1))


def log_norm_ratio(n, a: float):
    """log sqrt(Gamma(n+1) / Gamma(n+a+1))."""
    n = np.asarray(n, dtype=float)
    return 0.5 * (gammaln(n + 1) - gammaln(n + a + 1))


# ---------------------------------------------------------------------------
# scaled recurrence
# ---------------------------------------------------------------------------

def _scaled_rows(n_max: int, a: float, u: np.ndarray, log_weight: np.ndarray):
    """Yield (n, mantissa, log_scale) with exp(log_weight) q_n(u) = mantissa * exp(log_scale)."""
    k = u.size
    s = np.full(k, -0.5 * math.lgamma(a + 1)) + log_weight
    prev = np.zeros(k)
    cur = np.ones(k)
    yield 0, cur, s
    for n in range(n_max):
        nxt = ((2 * n + a + 1 - u) * cur - math.sqrt(n * (n + a)) * prev) / math.sqrt(
            (n + 1) * (n + a + 1)
        )
        big = np.abs(nxt) > _RESCALE
        if big.any():
            f = np.abs(nxt[big])
            nxt[big] /= f
            cur[big] /= f
            s = s.copy()
            s[big] += np.log(f)
        prev, cur = cur, nxt
        yield n + 1, cur, s


def _combine(mant, scale):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logmag = np.log(np.abs(mant)) + scale
        vals = np.where(logmag < _LOG_TINY, 0.0, np.sign(mant) * np.exp(np.minimum(logmag, 709.0)))
    inf_w = np.isposinf(scale)
    if inf_w.any():
        vals = np.where(inf_w, np.sign(mant) * np.inf, vals)
    return vals


def _prepare(u, log_weight):
    u = np.asarray(u, dtype=float)
    lw = np.broadcast_to(np.asarray(log_weight, dtype=float), u.shape)
    return u, u.reshape(-1), np.ascontiguousarray(lw).reshape(-1)


def orthonormal_table(n_max: int, a: float, u, log_weight) -> np.ndarray:
    """exp(log_weight) * q_n(u) for n = 0..n_max, q_n the orthonormal Laguerre polynomials.

    ``log_weight`` broadcasts against ``u``.  Entries whose true magnitude is
    below the double range come back as exact zeros.
    """
    u, fu, flw = _prepare(u, log_weight)
    out = np.empty((n_max + 1, fu.size))
    for n, mant, scale in _scaled_rows(n_max, a, fu, flw):
        out[n] = _combine(mant, scale)
    return out.reshape((n_max + 1,) + u.shape)


def orthonormal_rows(n_max: int, a: float, u, log_weight, rows) -> np.ndarray:
    """Selected rows of :func:`orthonormal_table` without storing the rest."""
    u, fu, flw = _prepare(u, log_weight)
    rows = list(rows)
    want = {r: i for i, r in enumerate(rows)}
    out = np.empty((len(rows), fu.size))
    for n, mant, scale in _scaled_rows(n_max, a, fu, flw):
        if n in want:
            out[want[n]] = _combine(mant, scale)
    return out.reshape((len(rows),) + u.shape)


def orthonormal_sumsq(n_max: int, a: float, u, log_weight) -> np.ndarray:
    """sum_{n <= n_max} (exp(log_weight) q_n(u))^2, streamed."""
    u, fu, flw = _prepare(u, log_weight)
    total = np.zeros(fu.size)
    for _, mant, scale in _scaled_rows(n_max, a, fu, flw):
        total += _combine(mant, scale) ** 2
    return total.reshape(u.shape)


def normalized_laguerre_table(n_max: int, a: float, x) -> np.ndarray:
    """Normalized Laguerre functions L_n^a(x) sqrt(n!/Gamma(n+a+1)) e^{-x/2} x^{a/2}, n <= n_max."""
    _check_type(a)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    with np.errstate(divide="ignore"):
        lw = -0.5 * x + xlogy(0.5 * a, x)
    return orthonormal_table(n_max, a, x, lw)


def normalized_laguerre(n: int, a: float, x, return_flag: bool = False):
    """Normalized Laguerre function of type ``a`` and degree ``n``.

    With ``return_flag`` the result is ``(value, underflow)``, where the flag
    marks values that are exactly zero because the weight left the double range.
    """
    vals = normalized_laguerre_table(n, a, x)[n]
    if not return_flag:
        return vals[()] if np.ndim(vals) == 0 else vals
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        lw = -0.5 * x + xlogy(0.5 * a, x)
    flag = (vals == 0.0) & (lw < _LOG_TINY + 50)
    if np.ndim(vals) == 0:
        return float(vals), bool(flag)
    return vals, flag


def laguerre_function_table(n_max: int, a: float, x) -> np.ndarray:
    """phi_n^a(x) = sqrt(2x) * normalized_laguerre(n, a, x^2) for n = 0..n_max.

    At x = 0 the functions are extended by continuity: zero for a > -1/2 and
    the finite limit sqrt(2 n!/Gamma(n+1/2)) L_n^{-1/2}(0) for a = -1/2.
    """
    _check_type(a)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    return orthonormal_table(n_max, a, x * x, _phi_log_weight(a, x))


def _phi_log_weight(a: float, x):
    with np.errstate(divide="ignore"):
        return 0.5 * math.log(2.0) + xlogy(a + 0.5, x) - 0.5 * x * x


def laguerre_function_rows(n_max: int, a: float, x, rows) -> np.ndarray:
    """Selected degrees of phi_n^a(x), streaming the recurrence up to n_max."""
    x = np.asarray(x, dtype=float)
    return orthonormal_rows(n_max, a, x * x, _phi_log_weight(a, x), rows)


def laguerre_function_sumsq(n_max: int, a: float, x) -> np.ndarray:
    """sum_{n <= n_max} phi_n^a(x)^2 (the reciprocal Christoffel function)."""
    x = np.asarray(x, dtype=float)
    return orthonormal_sumsq(n_max, a, x * x, _phi_log_weight(a, x))


def laguerre_function_1d(n: int, a: float, x):
    """One-dimensional Laguerre function of Hermite type phi_n^a(x)."""
    vals = laguerre_function_table(n, a, x)[n]
    return vals[()] if np.ndim(vals) == 0 else vals


def laguerre_function_md(mu, alpha: AlphaParam, x) -> float:
    """Tensor-product eigenfunction prod_i phi_{mu_i}^{alpha_i}(x_i)."""
    mu = tuple(getattr(mu, "entries", mu))
    coords = x.coords if isinstance(x, EvalPoint) else tuple(np.atleast_1d(x))
    if not (len(mu) == alpha.dim == len(coords)):
        raise ValueError(
            f"dimension mismatch: mu has {len(mu)}, alpha {alpha.dim}, x {len(coords)} entries"
        )
    value = 1.0
    for m, a, xi in zip(mu, alpha.entries, coords):
        value *= float(laguerre_function_1d(int(m), a, xi))
    return value


def eigenvalue(n, alpha: AlphaParam):
    """e_n = 4n + 2|alpha|_1 + 2d."""
    return 4.0 * np.asarray(n) + 2.0 * alpha.alpha_l1 + 2.0 * alpha.dim


def operator_residual(n: int, a: float, x, h: float = 1e-4):
    """(L phi_n^a - e_n phi_n^a)(x) in one dimension by central differences.

    L = -d^2/dx^2 + x^2 + (a^2 - 1/4)/x^2.  Returns (residual, e_n * phi_n^a(x)).
    """
    x = np.asarray(x, dtype=float)
    pts = np.stack([x - h, x, x + h])
    f = laguerre_function_table(n, a, pts)[n]
    second = (f[0] - 2 * f[1] + f[2]) / (h * h)
    lhs = -second + (x * x + (a * a - 0.25) / (x * x)) * f[1]
    e = 4.0 * n + 2.0 * a + 2.0
    return lhs - e * f[1], e * f[1]


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def asymptotic_nu(n: int, a: float) -> float:
    return 4.0 * n + 2.0 * a + 2.0


def classify_regime(n: int, a: float, x: float) -> RegimeTag:
    nu = asymptotic_nu(n, a)
    if x <= 1.0 / nu:
        regime = Regime.BELOW_1_OVER_NU
    elif x <= nu / 2:
        regime = Regime.BULK
    elif x <= 1.5 * nu:
        regime = Regime.TRANSITION
    else:
        regime = Regime.EXPONENTIAL_TAIL
    return RegimeTag(regime, nu)


def envelope_shape(n: int, a: float, x: float, gamma: float) -> tuple[RegimeTag, float]:
    """Four-regime envelope of |normalized_laguerre| without the constant C."""
    tag = classify_regime(n, a, x)
    nu = tag.nu
    if tag.regime is Regime.BELOW_1_OVER_NU:
        shape = (x * nu) ** (a / 2) if x > 0 else (1.0 if a == 0 else (0.0 if a > 0 else math.inf))
    elif tag.regime is Regime.BULK:
        shape = (x * nu) ** -0.25
    elif tag.regime is Regime.TRANSITION:
        shape = nu ** -0.25 * (nu ** (1.0 / 3.0) + abs(nu - x)) ** -0.25
    else:
        shape = math.exp(-gamma * x)
    return tag, shape


def asymptotic_envelope(n: int, a: float, x: float, C: float | None = None, gamma: float | None = None):
    """Regime tag and envelope value C * shape for |normalized_laguerre(n, a, x)|.

    The constants default to the calibrated values in the fixture file.
    """
    _check_type(a)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if C is None or gamma is None:
        from .fixtures import load_fixtures

        fx = load_fixtures()
        C = fx["envelope_C"] if C is None else C
        gamma = fx["envelope_gamma"] if gamma is None else gamma
    tag, shape = envelope_shape(n, a, x, gamma)
    return tag, C * shape


class OscillatoryApprox(NamedTuple):
    main: float
    error_budget: float


def oscillatory_approx(n: int, a: float, x: float, C_err: float | None = None) -> OscillatoryApprox:
    """Main oscillatory term of normalized_laguerre(n, a, x) and its error budget.

    Valid on 1 <= x <= nu - nu^{1/3}; the budget is
    C_err * (nu^{1/4} (nu - x)^{-7/4} + (x nu)^{-3/4}).
    """
    nu = asymptotic_nu(n, a)
    if not (1.0 <= x <= nu - nu ** (1.0 / 3.0)):
        raise ValueError(f"x = {x} outside the oscillatory window [1, {nu - nu ** (1 / 3)}]")
    if C_err is None:
        from .fixtures import load_fixtures

        C_err = load_fixtures()["oscillatory_C"]
    theta = math.acos(math.sqrt(x / nu))
    main = (
        math.sqrt(2.0 / math.pi)
        * (-1.0) ** n
        * x ** -0.25
        * (nu - x) ** -0.25
        * math.cos((nu * (2 * theta - math.sin(2 * theta)) - math.pi) / 4.0)
    )
    budget = C_err * (nu ** 0.25 * (nu - x) ** -1.75 + (x * nu) ** -0.75)
    return OscillatoryApprox(main, budget)


class GeneratingCheck(NamedTuple):
    partial: float
    closed: float


def generating_check(a: float, x: float, t: float, N: int) -> GeneratingCheck:
    """Partial sum of L_n^a(x) t^n up to N against (1-t)^{-a-1} exp(-xt/(1-t))."""
    _check_type(a)
    if abs(t) >= 1:
        raise ValueError("generating series diverges for |t| >= 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    vals = laguerre_recurrence(N, a, x)
    powers = t ** np.arange(N + 1)
    partial = math.fsum(vals * powers)
    closed = (1.0 - t) ** (-a - 1.0) * math.exp(-x * t / (1.0 - t))
    return GeneratingCheck(partial, closed)


def generating_tail_bound(a: float, x: float, t: float, N: int) -> float:
    """10 |t|^{N+1}/(1-|t|) * max_{n <= N+20} |L_n^a(x)|."""
    vals = laguerre_recurrence(N + 20, a, x)
    return 10.0 * abs(t) ** (N + 1) / (1.0 - abs(t)) * float(np.max(np.abs(vals)))
