"""Oscillatory test functions built from the Laguerre generating function and
the desk-scale divergence experiment for Bochner-Riesz means below the
critical index.

The true construction uses frequencies growing like 2^(2^k); here a short
geometric sequence (ratio >= 4) stands in for it, so every statement is a
finite-scale trend rather than a limit.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .bumps import Bump
from .errors import ConfigError, NumericalFailure
from .laguerre import (
    AlphaParam,
    EvalPoint,
    laguerre_at_zero,
    laguerre_function_md,
    normalized_laguerre_table,
)
from .spectral import enumerate_level

#: largest frequency the oscillatory quadrature is allowed to resolve
MU_BUDGET = 4096
SHELL = (1.0, 2.0)


def critical_index(p: float, d: int) -> float:
    """lambda(p) = max(d (1/2 - 1/p) - 1/2, 0)."""
    return max(d * (0.5 - 1.0 / p) - 0.5, 0.0)


@dataclass
class SharpnessConfig:
    p: float
    lam: float
    alpha: AlphaParam
    mu_sequence: tuple[int, ...] = (64, 256, 1024)
    phi_bump: Bump = field(default_factory=Bump)
    shell: tuple[float, float] = SHELL
    threshold_c: float | None = None
    radial_cells: int = 48
    angular_cells: int = 32
    seed: int = 0

    def __post_init__(self):
        self.mu_sequence = tuple(int(m) for m in self.mu_sequence)
        if not self.p > 2:
            raise ConfigError("p must exceed 2")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if not self.mu_sequence:
            raise ConfigError("mu_sequence must be nonempty")
        for a, b in zip(self.mu_sequence, self.mu_sequence[1:]):
            if b < 4 * a:
                raise ConfigError("consecutive frequencies need ratio >= 4")
        if self.mu_sequence[0] < 1:
            raise ConfigError("frequencies must be positive")

    @property
    def dim(self) -> int:
        return self.alpha.dim

    @property
    def critical(self) -> float:
        return critical_index(self.p, self.dim)

    @property
    def regime(self) -> str:
        return "divergence" if self.lam < self.critical / 2 else "convergence"

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "lambda": self.lam,
            "alpha": list(self.alpha.entries),
            "mu_sequence": list(self.mu_sequence),
            "phi_support": [self.phi_bump.lo, self.phi_bump.hi],
            "shell": list(self.shell),
            "threshold_c": self.threshold_c,
            "critical_index": self.critical,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# level functions and the generating function
# ---------------------------------------------------------------------------

def level_zero_normalized(mu, alpha: AlphaParam) -> float:
    """prod_i sqrt(L_{mu_i}^{alpha_i}(0))."""
    mu = tuple(mu)
    logs = [0.5 * (gammaln(m + a + 1) - gammaln(m + 1) - gammaln(a + 1)) for m, a in zip(mu, alpha.entries)]
    return math.exp(math.fsum(logs))


def _prefactor(alpha: AlphaParam, pts: np.ndarray) -> np.ndarray:
    """prod_i sqrt(2 / Gamma(alpha_i + 1)) x_i^{alpha_i + 1/2}."""
    out = np.ones(pts.shape[0])
    for i, a in enumerate(alpha.entries):
        out = out * math.sqrt(2.0 / math.gamma(a + 1)) * pts[:, i] ** (a + 0.5)
    return out


def _points(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, EvalPoint):
        return x.as_array()[None, :], True
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    return pts, False


def g_level_table(n_max: int, alpha: AlphaParam, x) -> np.ndarray:
    """G_n(x) for n = 0..n_max from the closed form, shape (n_max + 1, K).

    Uses L_n^A(u) = sqrt(Gamma(n+A+1)/n!) e^{u/2} u^{-A/2} times the
    normalized Laguerre function, so the Gaussian cancels exactly and large
    n never overflows.
    """
    pts, _ = _points(x)
    A = alpha.alpha_l1 + alpha.dim - 1
    u = np.sum(pts * pts, axis=1)
    n = np.arange(n_max + 1)
    norm = np.exp(0.5 * (gammaln(n + A + 1) - gammaln(n + 1)))
    tab = normalized_laguerre_table(n_max, A, u)
    return norm[:, None] * tab * (u ** (-A / 2) * _prefactor(alpha, pts))[None, :]


def g_level(n: int, alpha: AlphaParam, x):
    """G_n(x) = sum over |mu| = n of phi_mu(x) times prod_i sqrt(L_{mu_i}(0)), via its closed form."""
    pts, scalar = _points(x)
    vals = g_level_table(n, alpha, pts)[n]
    return float(vals[0]) if scalar else vals


def g_level_sum(n: int, alpha: AlphaParam, x: EvalPoint) -> float:
    """The defining sum of G_n, term by term (cross-check of the closed form)."""
    xa = x.as_array()
    return math.fsum(
        laguerre_function_md(mu.entries, alpha, xa) * level_zero_normalized(mu.entries, alpha)
        for mu in enumerate_level(n, alpha.dim)
    )


def level_identity(n: int, alpha: AlphaParam, x: EvalPoint) -> tuple[float, float]:
    """(sum over |mu| = n of L~_mu(0) L~_mu(x^2), L_n^{|alpha|+d-1}(|x|^2)) for comparison."""
    from .laguerre import laguerre_recurrence

    xs = x.as_array() ** 2
    lhs = 0.0
    terms = []
    for mu in enumerate_level(n, alpha.dim):
        term = 1.0
        for m, a, xi in zip(mu.entries, alpha.entries, xs):
            # L~(0) L~(x) = L(x) since L~(y) = L(y) / sqrt(L(0))
            term *= laguerre_recurrence(m, a, xi)[m]
        terms.append(term)
    lhs = math.fsum(terms)
    A = alpha.alpha_l1 + alpha.dim - 1
    rhs = float(laguerre_recurrence(n, A, float(np.sum(xs)))[n])
    return lhs, rhs


def _abel_closed(r: float, t: float, pts: np.ndarray, alpha: AlphaParam) -> np.ndarray:
    w = r * cmath.exp(-1j * t)
    u = np.sum(pts * pts, axis=1)
    expo = -0.5 * u - u * w / (1 - w)
    return (1 - w) ** (-(alpha.alpha_l1 + alpha.dim)) * np.exp(expo) * _prefactor(alpha, pts)


def abel_sum(r: float, t: float, x, alpha: AlphaParam, N: int | None = None, check: bool = True):
    """G_r(t, x) = sum_n G_n(x) r^n e^{-int} in closed form, checked against the truncated series.

    ``N`` defaults to the truncation where r^N drops below 1e-17.
    """
    if not 0 <= r < 1:
        raise ValueError("r must lie in [0, 1)")
    pts, scalar = _points(x)
    closed = _abel_closed(r, t, pts, alpha)
    if check and r > 0:
        if N is None:
            N = int(math.ceil(math.log(1e-17) / math.log(r))) + 20
        G = g_level_table(N + 20, alpha, pts)
        n = np.arange(N + 1)
        series = (r ** n * np.exp(-1j * n * t)) @ G[: N + 1]
        tail = 10.0 * r ** (N + 1) / (1 - r) * np.max(np.abs(G), axis=0)
        slack = 1e-12 * np.sum(np.abs(G[: N + 1]) * (r ** n)[:, None], axis=0)
        if np.any(np.abs(series - closed) > tail + slack):
            raise NumericalFailure("generating series and closed form disagree beyond the tail bound")
    return complex(closed[0]) if scalar else closed


def generating_limit(t: float, x, alpha: AlphaParam):
    """Boundary value G(t, x) of the generating function as r -> 1."""
    s = math.sin(t / 2)
    if abs(s) < 1e-12:
        raise ValueError("generating limit is singular where sin(t/2) = 0")
    pts, scalar = _points(x)
    u = np.sum(pts * pts, axis=1)
    base = cmath.exp(0.5j * t) / (2j * s)
    out = base ** (alpha.alpha_l1 + alpha.dim) * np.exp(0.5j * u / math.tan(t / 2)) * _prefactor(alpha, pts)
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# oscillatory functions g_mu
# ---------------------------------------------------------------------------

def shell_radius_sq(mu: int, alpha: AlphaParam, phi: Bump | None = None) -> float:
    """|x|^2 whose stationary point in t sits at the centre of the bump support."""
    phi = Bump() if phi is None else phi
    return 4.0 * math.sin(phi.center / 2) ** 2 * (mu + 0.5 * (alpha.alpha_l1 + alpha.dim))


def _t_nodes(mu: int, rho_max: float, phi: Bump, per_wave: int = 24, min_nodes: int = 320):
    """Trapezoid nodes on the bump support, fine enough for the fastest phase.

    The integrand vanishes to all orders at both ends of the support, so
    the trapezoid rule converges faster than any power of the step.
    """
    lo, hi = phi.lo, phi.hi
    # |d/dt phase| <= rho / (4 sin^2(t/2)) + mu over the support
    rate = rho_max / (4.0 * math.sin(lo / 2) ** 2) + mu
    n = int(math.ceil(max(min_nodes, per_wave * rate * (hi - lo) / (2 * math.pi))))
    t = np.linspace(lo, hi, n + 1)
    w = np.full(n + 1, (hi - lo) / n)
    w[0] = w[-1] = 0.5 * (hi - lo) / n
    return t, w


def oscillatory_integral(mu: int, rho, alpha: AlphaParam, phi: Bump | None = None, chunk: int = 64):
    """int phi(t) (e^{it/2} / (2i sin(t/2)))^{|alpha|+d} e^{(i/2) rho cot(t/2) + i mu t} dt.

    ``rho`` stands for |x|^2 (scalar or array).  This is g_mu(x) without
    the algebraic prefactor in x.
    """
    phi = Bump() if phi is None else phi
    if mu > MU_BUDGET:
        raise ValueError(f"frequency {mu} exceeds the quadrature budget {MU_BUDGET}")
    if phi.lo < 0.125 or phi.hi > 0.5:
        raise ValueError("phi must be supported in (1/8, 1/2)")
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty(rho.shape, dtype=complex)
    order = np.argsort(rho)
    power = alpha.alpha_l1 + alpha.dim
    # group by size of rho so small radii do not pay for the fastest phase
    for start in range(0, rho.size, chunk):
        idx = order[start : start + chunk]
        t, w = _t_nodes(mu, float(rho[idx].max()), phi)
        amp = w * phi(t) * (np.exp(0.5j * t) / (2j * np.sin(t / 2))) ** power * np.exp(1j * mu * t)
        cot = 1.0 / np.tan(t / 2)
        out[idx] = np.exp(0.5j * np.multiply.outer(rho[idx], cot)) @ amp
    return out if out.size > 1 or np.ndim(rho) else out[0]


def oscillatory_gk(mu: int, phi: Bump | None, x, alpha: AlphaParam):
    """g_mu(x) = int phi(t) G(t, x) e^{i mu t} dt."""
    pts, scalar = _points(x)
    u = np.sum(pts * pts, axis=1)
    vals = oscillatory_integral(mu, u, alpha, phi) * _prefactor(alpha, pts)
    return complex(vals[0]) if scalar else vals


def _orthant_sphere_moment(b: np.ndarray) -> float:
    """int over the positive part of S^{d-1} of prod_i w_i^{b_i}."""
    return math.exp(math.fsum(gammaln((b + 1) / 2)) - gammaln((np.sum(b) + len(b)) / 2)) / 2 ** (len(b) - 1)


def gk_lp_norm(mu: int, p: float, alpha: AlphaParam, phi: Bump | None = None,
               r_max: float | None = None, radial_nodes: int = 1000) -> float:
    """||g_mu||_p over the orthant in polar coordinates.

    |g_mu(x)| = r^{|alpha| + d/2} |I(r^2)| prod_i c_i w_i^{alpha_i + 1/2}, so the
    angular part is a closed-form moment and the radial part a Gauss-Legendre
    sum on [0, r_max] with r_max = 2 sqrt(mu) + 12 by default.
    """
    d = alpha.dim
    a = np.asarray(alpha.entries)
    r_max = 2 * math.sqrt(mu) + 12 if r_max is None else r_max
    nodes, weights = np.polynomial.legendre.leggauss(radial_nodes)
    r = 0.5 * r_max * (nodes + 1)
    w = 0.5 * r_max * weights
    I = np.abs(oscillatory_integral(mu, r * r, alpha, phi))
    radial = np.sum(w * (r ** (alpha.alpha_l1 + d / 2) * I) ** p * r ** (d - 1))
    const = np.prod([(2.0 / math.gamma(ai + 1)) ** (p / 2) for ai in a])
    angular = _orthant_sphere_moment(p * (a + 0.5))
    return float((const * angular * radial) ** (1.0 / p))


def projection_identity_check(mu_k: int, mu_j: int, phi: Bump | None, alpha: AlphaParam, x,
                              order: int = 512) -> tuple[complex, complex]:
    """(P_{mu_k} g_{mu_j}(x) by quadrature, phi_hat(mu_k - mu_j) G_{mu_k}(x)).

    The left side analyses g_{mu_j} on a Gauss rule of ``order`` nodes per
    axis; levels up to 2 order - mu_k are integrated exactly, which leaves
    an aliasing error governed by the decay of phi_hat.
    """
    from .quadrature import GridFunction, rule_for_alpha
    from .spectral import analyze, project, synthesize

    phi = Bump() if phi is None else phi
    if max(mu_k, mu_j) > order // 2:
        raise ValueError("indices exceed the truncation budget of the rule")
    N = mu_k
    rule = rule_for_alpha(alpha, N, order)
    g = GridFunction(rule, oscillatory_gk(mu_j, phi, rule.nodes, alpha))
    c = analyze(g, alpha, N)
    lhs = synthesize(project(c, mu_k), x)
    rhs = complex(phi.fourier(mu_k - mu_j)) * g_level(mu_k, alpha, x)
    return lhs, rhs


# ---------------------------------------------------------------------------
# exceedance sets on the shell
# ---------------------------------------------------------------------------

def shell_volume(d: int, shell=SHELL) -> float:
    """Volume of {a <= |x| <= b} intersected with the open positive orthant."""
    a, b = shell
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return ball * (b ** d - a ** d) / 2 ** d


def shell_samples(d: int, radial: int, angular: int, seed: int, shell=SHELL):
    """Jittered polar samples of the shell with their volume weights (d = 2 or 3).

    One uniformly random point per cell of a (radius, angle...) grid; the
    weights are the exact cell volumes, so a constant integrates exactly.
    """
    rng = np.random.default_rng(seed)
    a, b = shell
    if d == 2:
        r_edges = np.linspace(a, b, radial + 1)
        th_edges = np.linspace(0.0, math.pi / 2, angular + 1)
        R0, T0 = np.meshgrid(r_edges[:-1], th_edges[:-1], indexing="ij")
        dr, dth = (b - a) / radial, (math.pi / 2) / angular
        vol = 0.5 * ((R0 + dr) ** 2 - R0 ** 2) * dth
        # sample r with density proportional to r inside each cell
        u = rng.random(R0.shape)
        r = np.sqrt(R0 ** 2 + u * ((R0 + dr) ** 2 - R0 ** 2))
        th = T0 + rng.random(T0.shape) * dth
        pts = np.stack([r * np.cos(th), r * np.sin(th)], axis=-1).reshape(-1, 2)
        return pts, vol.reshape(-1)
    if d == 3:
        r_edges = np.linspace(a, b, radial + 1)
        z_edges = np.linspace(0.0, 1.0, angular + 1)
        p_edges = np.linspace(0.0, math.pi / 2, angular + 1)
        R0, Z0, P0 = np.meshgrid(r_edges[:-1], z_edges[:-1], p_edges[:-1], indexing="ij")
        dr, dz, dp = (b - a) / radial, 1.0 / angular, (math.pi / 2) / angular
        vol = ((R0 + dr) ** 3 - R0 ** 3) / 3 * dz * dp
        r = np.cbrt(R0 ** 3 + rng.random(R0.shape) * ((R0 + dr) ** 3 - R0 ** 3))
        z = Z0 + rng.random(Z0.shape) * dz
        ph = P0 + rng.random(P0.shape) * dp
        s = np.sqrt(1 - z * z)
        pts = np.stack([r * s * np.cos(ph), r * s * np.sin(ph), r * z], axis=-1).reshape(-1, 3)
        return pts, vol.reshape(-1)
    raise ValueError("shell sampling supports d = 2 or 3")


def level_growth_exponent(alpha: AlphaParam) -> float:
    """(|alpha| + d)/2 - 3/4, the growth rate of G_mu on the shell."""
    return 0.5 * (alpha.alpha_l1 + alpha.dim) - 0.75


def lower_bound_set_measure(mu: int, alpha: AlphaParam, threshold_c: float,
                            radial: int = 96, angular: int = 64, seed: int = 0) -> float:
    """Measure of {x in shell : |G_mu(x)| >= threshold_c mu^{(|alpha|+d)/2 - 3/4}}."""
    if mu > MU_BUDGET:
        raise ValueError(f"frequency {mu} exceeds the budget {MU_BUDGET}")
    pts, vol = shell_samples(alpha.dim, radial, angular, seed)
    if threshold_c <= 0:
        return float(np.sum(vol))
    G = np.abs(g_level_table(mu, alpha, pts)[mu])
    level = threshold_c * mu ** level_growth_exponent(alpha)
    return float(np.sum(vol[G >= level]))


# ---------------------------------------------------------------------------
# divergence experiment
# ---------------------------------------------------------------------------

@dataclass
class DivergenceReport:
    config: dict
    mu_sequence: list
    per_k: list
    regime: str
    passed: bool
    fixture_C0: float
    samples: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "mu_sequence": self.mu_sequence,
            "per_k": self.per_k,
            "regime": self.regime,
            "fixture_C0": self.fixture_C0,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "mu", "statistic", "value"])
        for k, row in enumerate(self.per_k):
            for key in ("gk_norm_p", "threshold", "exceed_measure"):
                writer.writerow([k, row["mu"], key, repr(float(row[key]))])
        return buf.getvalue()


def _phi_hat_margin(phi: Bump, rel: float = 1e-10) -> int:
    """Smallest M with |phi_hat(xi)| < rel phi_hat(0) for all |xi| >= M (probed on a grid)."""
    xi = np.arange(0, 8001, 25)
    vals = np.abs(phi.fourier(xi, n_nodes=1600))
    above = np.nonzero(vals >= rel * vals[0])[0]
    return int(xi[above[-1]] + 25) if above.size else 25


def divergence_experiment(cfg: SharpnessConfig, fixtures: dict | None = None,
                          r_ratio: float = 1.01, return_samples: bool = False) -> DivergenceReport:
    """Exceedance measures of the maximal Riesz mean of f = sum_k 2^-k g_k / ||g_k||_p.

    Level values use the expansion P_n g_mu = phi_hat(n - mu) G_n, which the
    projection-identity check verifies independently in one dimension.  For
    lambda = 0 the supremum over R is taken over every partial sum; for
    lambda > 0 over a geometric R grid with ratio ``r_ratio`` refined by
    sqrt(e_n) +- 1 ulp near each frequency, which gives a lower bound.
    With ``return_samples`` the report also carries the maximal-function
    values at the shell samples.
    """
    from .spectral import riesz_factor

    d = cfg.dim
    if d < 2:
        raise ConfigError("the divergence construction needs d >= 2")
    if not cfg.p > 2 * d / (d - 1):
        raise ConfigError(f"p must exceed 2d/(d-1) = {2 * d / (d - 1)}")
    if cfg.mu_sequence[-1] > MU_BUDGET:
        raise ConfigError(f"frequency {cfg.mu_sequence[-1]} exceeds the budget {MU_BUDGET}")
    if fixtures is None:
        from .fixtures import load_fixtures

        fixtures = load_fixtures()
    c = cfg.threshold_c if cfg.threshold_c is not None else fixtures["divergence_threshold_c"]
    C0 = fixtures["divergence_C0"]
    if cfg.regime != "divergence":
        warnings.warn("lambda >= lambda(p)/2: running the convergence-regime contrast", stacklevel=2)

    phi = cfg.phi_bump
    margin = _phi_hat_margin(phi)
    n_max = cfg.mu_sequence[-1] + margin
    n = np.arange(n_max + 1)
    norms = [gk_lp_norm(mu, cfg.p, cfg.alpha, phi) for mu in cfg.mu_sequence]
    # coefficient of G_n in f
    hat = np.zeros(n_max + 1, dtype=complex)
    for k, (mu, nk) in enumerate(zip(cfg.mu_sequence, norms)):
        hat += 2.0 ** (-k) / nk * phi.fourier(n - mu, n_nodes=800)

    pts, vol = shell_samples(d, cfg.radial_cells, cfg.angular_cells, cfg.seed, cfg.shell)
    e = 4.0 * n + 2 * cfg.alpha.alpha_l1 + 2 * d
    smax = np.zeros(pts.shape[0])
    for start in range(0, pts.shape[0], 512):
        sl = slice(start, start + 512)
        V = hat[:, None] * g_level_table(n_max, cfg.alpha, pts[sl])
        if cfg.lam == 0:
            smax[sl] = np.max(np.abs(np.cumsum(V, axis=0)), axis=0)
        else:
            roots = np.sqrt(e)
            lo, hi = 0.9 * roots[0], 1.1 * roots[-1]
            count = int(math.ceil(math.log(hi / lo) / math.log(r_ratio))) + 1
            grid = [lo * r_ratio ** np.arange(count)]
            for mu in cfg.mu_sequence:
                near = roots[max(mu - 64, 0) : mu + 65]
                grid += [np.nextafter(near, 0), np.nextafter(near, np.inf)]
            R = np.unique(np.concatenate(grid))
            best = np.zeros(V.shape[1])
            for r0 in range(0, R.size, 256):
                F = np.stack([riesz_factor(e, cfg.lam, Rv) for Rv in R[r0 : r0 + 256]])
                best = np.maximum(best, np.max(np.abs(F @ V), axis=0))
            smax[sl] = best
    per_k = []
    exponent = cfg.critical / 2 - cfg.lam
    for k, (mu, nk) in enumerate(zip(cfg.mu_sequence, norms)):
        thr = c * 2.0 ** (-k) * mu ** exponent
        per_k.append({
            "mu": mu,
            "gk_norm_p": nk,
            "threshold": thr,
            "exceed_measure": float(np.sum(vol[smax >= thr])),
        })
    measures = [row["exceed_measure"] for row in per_k]
    if cfg.regime == "divergence":
        passed = all(m >= C0 for m in measures)
    else:
        passed = all(b < a for a, b in zip(measures, measures[1:]))
    return DivergenceReport(cfg.to_dict(), list(cfg.mu_sequence), per_k, cfg.regime, bool(passed), C0,
                            smax if return_samples else None)
