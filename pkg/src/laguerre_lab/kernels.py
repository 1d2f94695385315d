"""Heat, potential and wave kernels of the Laguerre operator, and probes of
the pointwise bounds they satisfy.

Both closed-form kernels are written in the variable ``s = tanh t`` where
the Gaussian factor and the exponential growth of the Bessel functions
combine into ``-(s |x+y|^2 + |x-y|^2 / s) / 4``; that exponent is formed
first and the scaled Bessel function supplies the rest, so nothing
overflows for small t or large |x|, |y|.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec
from scipy.special import gammaln
from scipy.stats import qmc

from .bessel import log_modified_bessel_ive
from .errors import NumericalFailure
from .laguerre import AlphaParam, EvalPoint, eigenvalue, laguerre_function_table
from .quadrature import QuadratureRule, rule_for_alpha, tanh_sinh
from .spectral import SpectralCoefficients, level_count, scale_levels

#: additive constant in (4|mu| + 2|alpha| + shift)^{-beta}; see negative_power_apply
NEGATIVE_POWER_SHIFT = 2.0
#: truncation of y-integrals beyond |x|; the Gaussian factor is below 1e-30 there
Y_TRUNCATION = 12.0


class KernelId(enum.Enum):
    HEAT = "HEAT"
    POTENTIAL = "POTENTIAL"
    WAVE_TRUNCATED = "WAVE_TRUNCATED"


@dataclass
class KernelProbeReport:
    kernel_id: KernelId
    params: dict
    max_ratio: float
    argmax_point: tuple[EvalPoint, EvalPoint]
    samples: int
    fixture_constant: float | None = None
    passed: bool | None = None

    def __post_init__(self):
        if not self.max_ratio >= 0:
            raise ValueError("max_ratio must be nonnegative")
        if self.samples < 1:
            raise ValueError("a probe needs at least one sample")
        if self.passed is None and self.fixture_constant is not None:
            self.passed = bool(self.max_ratio < self.fixture_constant)

    def to_dict(self) -> dict:
        return {
            "kernel_id": self.kernel_id.value,
            "params": {k: _plain(v) for k, v in sorted(self.params.items())},
            "max_ratio": self.max_ratio,
            "argmax": [list(self.argmax_point[0].coords), list(self.argmax_point[1].coords)],
            "samples": self.samples,
            "fixture_constant": self.fixture_constant,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_plain(u) for u in v]
    return v


def _pairs(x, y) -> tuple[np.ndarray, np.ndarray, bool]:
    scalar = isinstance(x, EvalPoint) and isinstance(y, EvalPoint)
    xa = x.as_array() if isinstance(x, EvalPoint) else np.asarray(x, dtype=float)
    ya = y.as_array() if isinstance(y, EvalPoint) else np.asarray(y, dtype=float)
    xa, ya = np.atleast_2d(xa), np.atleast_2d(ya)
    xa, ya = np.broadcast_arrays(xa, ya)
    return xa, ya, scalar


def _log_bessel_product(alpha: AlphaParam, q, xa: np.ndarray, ya: np.ndarray) -> np.ndarray:
    """sum_i log(sqrt(q x_i y_i) e^{-q x_i y_i} I_{alpha_i}(q x_i y_i))."""
    z = q * xa * ya
    out = np.zeros(z.shape[:-1])
    for i, a in enumerate(alpha.entries):
        zi = z[..., i]
        out = out + 0.5 * np.log(zi) + log_modified_bessel_ive(a, zi, extended=alpha.extended)
    return out


# ---------------------------------------------------------------------------
# heat kernel
# ---------------------------------------------------------------------------

def heat_kernel_closed(t: float, x, y, alpha: AlphaParam):
    """Kernel of exp(-t L) from its Bessel-function closed form.

    (sinh 2t)^{-d} exp(-coth(2t)(|x|^2 + |y|^2)/2) prod_i sqrt(x_i y_i) I_{alpha_i}(x_i y_i / sinh 2t)
    """
    if not t > 0:
        raise ValueError("t must be positive")
    xa, ya, scalar = _pairs(x, y)
    d = alpha.dim
    if xa.shape[-1] != d:
        raise ValueError("points and alpha have different dimensions")
    s = math.tanh(t)
    # sinh 2t = 2s / (1 - s^2); the product carries d factors sqrt(1/sinh 2t)
    log_sinh = 2 * t + math.log1p(-math.exp(-4 * t)) - math.log(2.0)
    q = math.exp(-log_sinh)
    expo = -0.25 * (s * np.sum((xa + ya) ** 2, -1) + np.sum((xa - ya) ** 2, -1) / s)
    logk = -0.5 * d * log_sinh + expo + _log_bessel_product(alpha, q, xa, ya)
    out = np.exp(logk)
    return float(out[0]) if scalar else out


def level_kernels(alpha: AlphaParam, N: int, x, y) -> np.ndarray:
    """sum_{|mu|=n} phi_mu(x) phi_mu(y) for n = 0..N, shape (N + 1, P)."""
    xa, ya, _ = _pairs(x, y)
    acc = None
    for i, a in enumerate(alpha.entries):
        prod = laguerre_function_table(N, a, xa[:, i]) * laguerre_function_table(N, a, ya[:, i])
        if acc is None:
            acc = prod
        else:
            # discrete convolution in the level index, truncated at N
            new = np.zeros_like(acc)
            for k in range(N + 1):
                new[k:] += acc[k][None, :] * prod[: N + 1 - k]
            acc = new
    return acc


def heat_kernel_series(t: float, x, y, alpha: AlphaParam, N: int):
    """Truncated eigenfunction expansion of the heat kernel and a tail estimate.

    The tail estimate is exp(-t e_{N+1}) times the largest level kernel seen,
    times the level-count growth, summed geometrically.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    xa, ya, scalar = _pairs(x, y)
    lk = level_kernels(alpha, N, xa, ya)
    e = eigenvalue(np.arange(N + 1), alpha)
    vals = np.exp(-t * e) @ lk
    mass = np.max(np.abs(lk), axis=0) * level_count(N + 1, alpha.dim)
    tail = math.exp(-t * float(eigenvalue(N + 1, alpha))) * mass / (-math.expm1(-4 * t))
    if scalar:
        return float(vals[0]), float(tail[0])
    return vals, tail


def gauss_weierstrass(s: float, x):
    """(4 pi s)^{-d/2} exp(-|x|^2 / (4 s)); the last axis of ``x`` is the coordinate axis."""
    if not s > 0:
        raise ValueError("s must be positive")
    x = np.asarray(x, dtype=float)
    d = x.shape[-1] if x.ndim else 1
    r2 = np.sum(x * x, axis=-1) if x.ndim else x * x
    return (4 * math.pi * s) ** (-d / 2) * np.exp(-r2 / (4 * s))


def sobol_pairs(count: int, d: int, box: float, seed: int) -> np.ndarray:
    """``count`` scrambled Sobol pairs in (0, box]^d x (0, box]^d, shape (count, 2, d)."""
    sampler = qmc.Sobol(2 * d, scramble=True, seed=seed)
    pts = sampler.random(count)
    pts = np.clip(pts, 1e-9, None) * box
    return pts.reshape(count, 2, d)


def gaussian_domination_probe(t_list: Sequence[float], point_pairs, alpha: AlphaParam,
                              constant: float | None = None) -> KernelProbeReport:
    """max of K_t(x, y) / W_t(x - y) over every t and pair."""
    pairs = np.asarray(point_pairs, dtype=float)
    if len(t_list) == 0 or pairs.size == 0:
        raise ValueError("need at least one time and one pair")
    xa, ya = pairs[:, 0, :], pairs[:, 1, :]
    d = alpha.dim
    best, arg = -1.0, (0, 0)
    for j, t in enumerate(t_list):
        log_w = -0.5 * d * math.log(4 * math.pi * t) - np.sum((xa - ya) ** 2, -1) / (4 * t)
        with np.errstate(divide="ignore"):
            log_k = np.log(heat_kernel_closed(t, xa, ya, alpha))
        ratio = np.exp(log_k - log_w)
        i = int(np.argmax(ratio))
        if ratio[i] > best:
            best, arg = float(ratio[i]), (j, i)
    j, i = arg
    return KernelProbeReport(
        KernelId.HEAT,
        {"alpha": list(alpha.entries), "t": list(t_list)},
        best,
        (EvalPoint(tuple(xa[i])), EvalPoint(tuple(ya[i]))),
        len(t_list) * len(pairs),
        constant,
    )


# ---------------------------------------------------------------------------
# potential kernel
# ---------------------------------------------------------------------------

def _potential_log_integrand(s, beta, alpha, xa, ya):
    """log of the s-integrand of the potential kernel, including the 1/s and the constant."""
    d = alpha.dim
    q = (1.0 - s * s) / (2.0 * s)
    log_zeta = (
        0.5 * (math.log1p(-s) - math.log1p(s))
        + (d / 2 - 1) * math.log((1 - s * s) / s)
        + (beta - 1) * math.log(math.log1p(s) - math.log1p(-s))
    )
    const = -gammaln(beta) - (d / 2 + beta - 1) * math.log(2.0)
    expo = -0.25 * (s * np.sum((xa + ya) ** 2, -1) + np.sum((xa - ya) ** 2, -1) / s)
    return const + log_zeta - math.log(s) + expo + _log_bessel_product(alpha, q, xa, ya)


# initial partition of the u-range: near the diagonal the integrand peaks at u ~ |x - y|
_U_BREAKS = tuple(math.sqrt(0.5) * 2.0 ** -np.arange(1, 40, 2))


def potential_kernel(beta: float, x, y, alpha: AlphaParam, rtol: float = 1e-8):
    """Kernel of the subordinated negative power, an integral over s in (0, 1).

    The s-range is split at 1/2.  On (0, 1/2] the substitution s = u^2
    tames the power behaviour at the origin; on [1/2, 1) the substitution
    s = 1 - e^{-v} turns the logarithmic endpoint into exponential decay.
    Both pieces use adaptive Gauss-Kronrod on the whole batch of pairs.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    xa, ya, scalar = _pairs(x, y)

    def f_low(u):
        if u <= 0:
            return np.zeros(len(xa))
        s = u * u
        return 2.0 * u * np.exp(_potential_log_integrand(s, beta, alpha, xa, ya))

    def f_high(v):
        s = -math.expm1(-v)
        if s >= 1.0:
            return np.zeros(len(xa))
        return math.exp(-v) * np.exp(_potential_log_integrand(s, beta, alpha, xa, ya))

    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lo, err_lo = quad_vec(f_low, 0.0, math.sqrt(0.5), epsrel=rtol * 1e-2, epsabs=0.0, norm="max",
                              limit=2000, points=_U_BREAKS)
        hi, err_hi = quad_vec(f_high, math.log(2.0), np.inf, epsrel=rtol * 1e-2, epsabs=0.0, norm="max", limit=400)
    val = lo + hi
    err = err_lo + err_hi
    if not np.all(np.isfinite(val)) or err > rtol * np.max(np.abs(val)):
        raise NumericalFailure(f"potential kernel quadrature error {err:.3g} exceeds tolerance")
    return float(val[0]) if scalar else val


def phi_bound(beta: float, v, d: int):
    """Profile dominating the potential kernel, as a function of v = x - y."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    v = np.asarray(v, dtype=float)
    r = np.sqrt(np.sum(v * v, axis=-1)) if v.ndim else np.abs(v)
    with np.errstate(divide="ignore"):
        if beta < d / 2:
            near = r ** (-(d - 2 * beta))
        elif beta == d / 2:
            near = np.log(math.e / r)
        else:
            near = np.ones_like(r)
    out = np.where(r < 1, near, np.exp(-0.25 * r * r))
    return float(out) if np.ndim(out) == 0 else out


def potential_domination_probe(beta: float, point_pairs, alpha: AlphaParam,
                               constant: float | None = None) -> KernelProbeReport:
    pairs = np.asarray(point_pairs, dtype=float)
    xa, ya = pairs[:, 0, :], pairs[:, 1, :]
    k = potential_kernel(beta, xa, ya, alpha)
    ratio = k / phi_bound(beta, xa - ya, alpha.dim)
    i = int(np.argmax(ratio))
    return KernelProbeReport(
        KernelId.POTENTIAL,
        {"alpha": list(alpha.entries), "beta": beta},
        float(ratio[i]),
        (EvalPoint(tuple(xa[i])), EvalPoint(tuple(ya[i]))),
        len(pairs),
        constant,
    )


def _split_axis_rule(c: float, cap: float, n: int):
    """tanh-sinh nodes on [0, c] and [c, cap], clustering at the split point."""
    a_nodes, a_w, _, _ = tanh_sinh(0.0, c, n)
    b_nodes, b_w, _, _ = tanh_sinh(c, cap, n)
    return np.concatenate([a_nodes, b_nodes]), np.concatenate([a_w, b_w])


def schur_integrals(beta: float, x: EvalPoint, alpha: AlphaParam, nodes: int = 40) -> tuple[float, float]:
    """Row and column Schur integrals of the weighted potential kernel at ``x``.

    row = (1+|x|)^{2 beta} int K(x, y) dy,  col = int (1+|y|)^{2 beta} K(y, x) dy,
    over the box [0, x_i + 12] in each coordinate, each axis split at x_i.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if beta == 0:
        raise ValueError("beta = 0 gives the identity, which has no kernel")
    cap = x.norm + Y_TRUNCATION
    axes = [_split_axis_rule(xi, cap, nodes) for xi in x.coords]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    ys = np.stack([g.reshape(-1) for g in grids], axis=1)
    w = axes[0][1]
    for a in axes[1:]:
        w = np.multiply.outer(w, a[1])
    w = np.asarray(w).reshape(-1)
    k = potential_kernel(beta, np.broadcast_to(x.as_array(), ys.shape), ys, alpha)
    row = (1 + x.norm) ** (2 * beta) * float(np.dot(w, k))
    col = float(np.dot(w, (1 + np.sqrt(np.sum(ys * ys, 1))) ** (2 * beta) * k))
    return row, col


def negative_power_apply(c: SpectralCoefficients, beta: float, shift: float = NEGATIVE_POWER_SHIFT) -> SpectralCoefficients:
    """c_mu -> (4|mu| + 2|alpha| + shift)^{-beta} c_mu.

    The default shift of 2 follows the series written for (1 + L)^{-beta};
    the kernel above realizes shift = 2d + 1 instead (see tests).
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    n = np.arange(c.max_level + 1)
    factors = (4.0 * n + 2.0 * c.alpha.alpha_l1 + shift) ** (-beta)
    return scale_levels(c, factors)


def weighted_negative_power_norm(alpha: AlphaParam, beta: float, order: int,
                                 shift: float = NEGATIVE_POWER_SHIFT) -> float:
    """Norm of f -> (1+|x|)^{2 beta} (1+L)^{-beta} f on the levels a rule of ``order`` resolves.

    Uses N = (order - 16) // 2 and the largest eigenvalue of the weighted Gram.
    """
    from .spectral import weighted_basis_gram

    N = (order - 16) // 2
    rule = rule_for_alpha(alpha, N, order)
    G, lev = weighted_basis_gram(alpha, N, rule, -4.0 * beta)
    lam = (4.0 * lev + 2.0 * alpha.alpha_l1 + shift) ** (-beta)
    top = np.linalg.eigvalsh(lam[:, None] * G * lam[None, :])[-1]
    return math.sqrt(max(float(top), 0.0))


# ---------------------------------------------------------------------------
# wave kernel
# ---------------------------------------------------------------------------

def wave_kernel(t: float, N: int, alpha: AlphaParam, x, y) -> np.ndarray:
    """sum_{n <= N} cos(t sqrt(e_n)) sum_{|mu| = n} phi_mu(x) phi_mu(y)."""
    lk = level_kernels(alpha, N, x, y)
    e = eigenvalue(np.arange(N + 1), alpha)
    return np.cos(t * np.sqrt(e)) @ lk


def wave_support_probe(t: float, N: int, alpha: AlphaParam, pair_grid, c0: float | None = None) -> KernelProbeReport:
    """Ratio of the largest truncated wave kernel value off the light cone to the largest inside.

    Points with |x - y| <= c0 t count as inside.  Truncation smears the
    kernel, so only the decay of this ratio with N is meaningful.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if c0 is None:
        from .fixtures import load_fixtures

        c0 = load_fixtures()["wave_c0"]
    pairs = np.asarray(pair_grid, dtype=float)
    xa, ya = pairs[:, 0, :], pairs[:, 1, :]
    k = np.abs(wave_kernel(t, N, alpha, xa, ya))
    # pairs on the cone itself count as inside even when |x - y| rounds up
    inside = np.sqrt(np.sum((xa - ya) ** 2, 1)) <= c0 * t * (1 + 1e-12)
    if not inside.any() or inside.all():
        raise ValueError("pair grid must contain points on both sides of the cone")
    out_idx = np.nonzero(~inside)[0]
    i = int(out_idx[np.argmax(k[out_idx])])
    inside_max = float(np.max(k[inside]))
    ratio = float(k[i] / inside_max) if inside_max > 0 else math.inf
    return KernelProbeReport(
        KernelId.WAVE_TRUNCATED,
        {"alpha": list(alpha.entries), "t": t, "N": N, "c0": c0},
        ratio,
        (EvalPoint(tuple(xa[i])), EvalPoint(tuple(ya[i]))),
        len(pairs),
    )


def heat_semigroup_defect(t: float, s: float, x: EvalPoint, y: EvalPoint, alpha: AlphaParam,
                          nodes: int = 120) -> tuple[float, float]:
    """(int K_t(x, z) K_s(z, y) dz, K_{t+s}(x, y)).

    Each axis of the z integral runs over [0, max(x_i, y_i) + 12], split at
    the midpoint of x_i and y_i, with tanh-sinh nodes on both pieces.
    """
    xa, ya = x.as_array(), y.as_array()
    axes = [_split_axis_rule(0.5 * (xi + yi), max(xi, yi) + Y_TRUNCATION, nodes) for xi, yi in zip(xa, ya)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    zs = np.stack([g.reshape(-1) for g in grids], axis=1)
    w = axes[0][1]
    for a in axes[1:]:
        w = np.multiply.outer(w, a[1])
    w = np.asarray(w).reshape(-1)
    left = heat_kernel_closed(t, np.broadcast_to(xa, zs.shape), zs, alpha)
    right = heat_kernel_closed(s, zs, np.broadcast_to(ya, zs.shape), alpha)
    return float(np.dot(w, left * right)), heat_kernel_closed(t + s, x, y, alpha)


def potential_spectral_coefficients(beta: float, y: float, alpha: AlphaParam, n_max: int,
                                    nodes: int = 80) -> np.ndarray:
    """<K(beta; ., y), phi_n> for n = 0..n_max in one dimension.

    The x integral runs over [0, y] and [y, y + 14] with tanh-sinh nodes,
    which cluster at the logarithmic or power singularity on the diagonal.
    """
    if alpha.dim != 1:
        raise ValueError("spectral coefficients of the potential kernel are computed for d = 1")
    cap = y + Y_TRUNCATION + 2.0
    a_nodes, a_w, _, _ = tanh_sinh(0.0, y, nodes, min_gap=1e-15)
    b_nodes, b_w, _, _ = tanh_sinh(y, cap, nodes, min_gap=1e-15)
    xs = np.concatenate([a_nodes, b_nodes])
    w = np.concatenate([a_w, b_w])
    k = potential_kernel(beta, xs[:, None], np.full((xs.size, 1), y), alpha)
    table = laguerre_function_table(n_max, alpha.entries[0], xs)
    return table @ (w * k)
