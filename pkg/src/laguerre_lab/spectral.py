"""Spectral side of the Laguerre operator: coefficients, multipliers and the
operators built from them (Bochner-Riesz means, maximal and square
functions, Littlewood-Paley pieces, projection norms).

Everything here works level by level.  The eigenspace of ``e_n`` is spanned
by the ``phi_mu`` with ``|mu|_1 = n``, so most operators reduce to the
vector of level values ``P_n f(x)`` at the points of interest.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .bumps import SQUARE_FUNCTION_SUPPORT, Bump
from .errors import (
    ConvergenceError,
    InsufficientQuadratureError,
    SupportViolationError,
    UnboundedMultiplierError,
)
from .laguerre import AlphaParam, EvalPoint, eigenvalue, laguerre_function_rows, laguerre_function_table
from .quadrature import GridFunction, QuadratureRule, nq_norm, rule_for_alpha, tanh_sinh

COEFF_FORMAT_VERSION = 1

__all__ = [
    "MultiIndex",
    "enumerate_level",
    "level_count",
    "eigenvalue",
    "SpectralCoefficients",
    "ArgumentConvention",
    "MultiplierSpec",
    "analyze",
    "synthesize",
    "synthesize_on_rule",
    "project",
    "apply_multiplier",
    "bochner_riesz",
    "maximal_riesz",
    "square_function",
    "stein_wainger_average",
    "projection_operator_norm",
    "extended_trace_check",
    "littlewood_paley_energy",
]


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class MultiIndex:
    entries: tuple[int, ...]

    def __post_init__(self):
        entries = tuple(int(m) for m in self.entries)
        if not entries or any(m < 0 for m in entries):
            raise ValueError("multi-index entries must be nonnegative integers")
        object.__setattr__(self, "entries", entries)

    @property
    def level(self) -> int:
        return sum(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def level_count(n: int, d: int) -> int:
    """Number of multi-indices of length d and level n."""
    return math.comb(n + d - 1, d - 1)


def _compositions(n: int, d: int):
    if d == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, d - 1):
            yield (first,) + rest


def enumerate_level(n: int, d: int) -> list[MultiIndex]:
    """All mu in N^d with |mu|_1 = n, in lexicographic order."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    return [MultiIndex(m) for m in _compositions(n, d)]


@functools.lru_cache(maxsize=64)
def _level_index_array(n: int, d: int) -> np.ndarray:
    arr = np.array(list(_compositions(n, d)), dtype=np.intp).reshape(-1, d)
    arr.flags.writeable = False
    return arr


@functools.lru_cache(maxsize=32)
def _level_grid(d: int, N: int) -> np.ndarray:
    grid = np.indices((N + 1,) * d).sum(axis=0)
    grid.flags.writeable = False
    return grid


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Coefficients <f, phi_mu> for all |mu|_1 <= max_level.

    Stored densely as an array of shape ``(N + 1,) * d`` whose entries above
    level N are kept at zero.  ``flags`` records conditions such as a
    projection requested beyond the truncation level.
    """

    alpha: AlphaParam
    max_level: int
    array: np.ndarray
    flags: frozenset = frozenset()
    energy: float = field(init=False)

    def __post_init__(self):
        d, N = self.alpha.dim, int(self.max_level)
        if N < 0:
            raise ValueError("max_level must be nonnegative")
        arr = np.array(self.array, dtype=complex)
        if arr.shape != (N + 1,) * d:
            raise ValueError(f"coefficient array must have shape {(N + 1,) * d}, got {arr.shape}")
        arr[_level_grid(d, N) > N] = 0.0
        arr.flags.writeable = False
        object.__setattr__(self, "max_level", N)
        object.__setattr__(self, "array", arr)
        object.__setattr__(self, "flags", frozenset(self.flags))
        object.__setattr__(self, "energy", math.fsum(np.abs(arr.ravel()) ** 2))

    @classmethod
    def zeros(cls, alpha: AlphaParam, N: int, flags=()) -> "SpectralCoefficients":
        return cls(alpha, N, np.zeros((N + 1,) * alpha.dim), frozenset(flags))

    @classmethod
    def basis(cls, alpha: AlphaParam, N: int, mu) -> "SpectralCoefficients":
        mu = tuple(MultiIndex(tuple(mu)).entries)
        if sum(mu) > N:
            raise ValueError("multi-index above the truncation level")
        arr = np.zeros((N + 1,) * alpha.dim, dtype=complex)
        arr[mu] = 1.0
        return cls(alpha, N, arr)

    @classmethod
    def from_levels(cls, alpha: AlphaParam, N: int, level_values) -> "SpectralCoefficients":
        """Coefficients that are constant on each level (mainly for tests)."""
        vals = np.asarray(level_values)
        return cls(alpha, N, vals[_level_grid(alpha.dim, N)])

    @property
    def dim(self) -> int:
        return self.alpha.dim

    @property
    def levels(self) -> np.ndarray:
        return _level_grid(self.dim, self.max_level)

    def __len__(self) -> int:
        return sum(level_count(n, self.dim) for n in range(self.max_level + 1))

    def __getitem__(self, mu) -> complex:
        mu = MultiIndex(tuple(mu))
        if mu.dim != self.dim:
            raise ValueError("multi-index has the wrong dimension")
        if mu.level > self.max_level:
            return 0j
        return complex(self.array[mu.entries])

    def items(self) -> Iterable[tuple[MultiIndex, complex]]:
        for n in range(self.max_level + 1):
            for mu in enumerate_level(n, self.dim):
                yield mu, complex(self.array[mu.entries])

    def level_coefficients(self, n: int) -> np.ndarray:
        idx = _level_index_array(n, self.dim)
        return self.array[tuple(idx.T)]

    def level_energies(self) -> np.ndarray:
        return np.bincount(self.levels.ravel(), weights=np.abs(self.array.ravel()) ** 2,
                           minlength=self.max_level + 1)[: self.max_level + 1]

    def check_energy(self, rtol: float = 1e-12) -> bool:
        fresh = math.fsum(np.abs(self.array.ravel()) ** 2)
        return abs(fresh - self.energy) <= rtol * max(fresh, np.finfo(float).tiny)

    def with_array(self, array, flags=None) -> "SpectralCoefficients":
        return SpectralCoefficients(self.alpha, self.max_level, array,
                                    self.flags if flags is None else flags)

    def __add__(self, other: "SpectralCoefficients") -> "SpectralCoefficients":
        _check_compatible(self, other)
        return self.with_array(self.array + other.array, self.flags | other.flags)

    def __sub__(self, other: "SpectralCoefficients") -> "SpectralCoefficients":
        _check_compatible(self, other)
        return self.with_array(self.array - other.array, self.flags | other.flags)

    def __mul__(self, scalar) -> "SpectralCoefficients":
        return self.with_array(self.array * scalar)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.sqrt(self.energy)


def _check_compatible(a: SpectralCoefficients, b: SpectralCoefficients):
    if a.alpha != b.alpha or a.max_level != b.max_level:
        raise ValueError("coefficient sets have different alpha or truncation level")


def random_coefficients(alpha: AlphaParam, N: int, seed: int, normalize: bool = True) -> SpectralCoefficients:
    """Complex Gaussian coefficients on all levels <= N, reproducible from ``seed``."""
    rng = np.random.default_rng(seed)
    shape = (N + 1,) * alpha.dim
    arr = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    c = SpectralCoefficients(alpha, N, arr)
    return c * (1.0 / c.norm()) if normalize and c.energy > 0 else c


def dump_coefficients(c: SpectralCoefficients) -> str:
    lines = [
        f"# laguerre_lab spectral coefficients v{COEFF_FORMAT_VERSION}",
        f"d {c.dim}",
        "alpha " + " ".join(repr(a) for a in c.alpha.entries),
        f"N {c.max_level}",
    ]
    if c.flags:
        lines.append("flags " + " ".join(sorted(c.flags)))
    for mu, val in c.items():
        lines.append(" ".join(str(m) for m in mu) + f" {val.real!r} {val.imag!r}")
    return "\n".join(lines) + "\n"


def load_coefficients(text: str) -> SpectralCoefficients:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# laguerre_lab spectral coefficients v"):
        raise ValueError("not a spectral coefficient file")
    version = int(lines[0].rsplit("v", 1)[1])
    if version != COEFF_FORMAT_VERSION:
        raise ValueError(f"unsupported coefficient format version {version}")
    meta = {}
    body = []
    for ln in lines[1:]:
        key = ln.split()[0]
        if key in ("d", "alpha", "N", "flags"):
            meta[key] = ln.split()[1:]
        else:
            body.append(ln.split())
    d = int(meta["d"][0])
    alpha = AlphaParam(tuple(float(a) for a in meta["alpha"]), extended=any(float(a) < -0.5 for a in meta["alpha"]))
    N = int(meta["N"][0])
    arr = np.zeros((N + 1,) * d, dtype=complex)
    for row in body:
        if len(row) != d + 2:
            raise ValueError("malformed coefficient line")
        mu = tuple(int(m) for m in row[:d])
        arr[mu] = complex(float(row[d]), float(row[d + 1]))
    return SpectralCoefficients(alpha, N, arr, frozenset(meta.get("flags", ())))


# ---------------------------------------------------------------------------
# analysis and synthesis
# ---------------------------------------------------------------------------

_LETTERS = "abcdefgh"


def _require_order(rule: QuadratureRule, N: int):
    need = 2 * N + 16
    if rule.order < need:
        raise InsufficientQuadratureError(f"rule order {rule.order} < 2N + 16 = {need}")


def _point_tables(alpha: AlphaParam, N: int, pts: np.ndarray) -> list[np.ndarray]:
    """phi_k^{alpha_i}(x_i) for k <= N at every point, one (N+1, K) table per axis."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != alpha.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, alpha has {alpha.dim}")
    return [laguerre_function_table(N, a, pts[:, i]) for i, a in enumerate(alpha.entries)]


@functools.lru_cache(maxsize=16)
def _rule_axis_tables(rule: QuadratureRule, alpha: AlphaParam, N: int):
    return tuple(laguerre_function_table(N, a, ax.nodes) for a, ax in zip(alpha.entries, rule.axes))


def _as_points(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, EvalPoint):
        return x.as_array()[None, :], True
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        return pts[None, :], True
    return pts, False


def analyze(f: GridFunction, alpha: AlphaParam, N: int) -> SpectralCoefficients:
    """Coefficients <f, phi_mu> for |mu|_1 <= N by the quadrature of ``f.rule``."""
    rule = f.rule
    _require_order(rule, N)
    if rule.dim != alpha.dim:
        raise ValueError("rule and alpha have different dimensions")
    d = alpha.dim
    wf = rule.weights * f.values
    if rule.is_tensor():
        tabs = _rule_axis_tables(rule, alpha, N)
        T = wf.reshape(tuple(ax.nodes.size for ax in rule.axes))
        src = _LETTERS[d : 2 * d]
        spec = ",".join(_LETTERS[i] + src[i] for i in range(d)) + "," + src + "->" + _LETTERS[:d]
        arr = np.einsum(spec, *tabs, T, optimize=True)
    else:
        tabs = _point_tables(alpha, N, rule.nodes)
        spec = ",".join(_LETTERS[i] + "z" for i in range(d)) + ",z->" + _LETTERS[:d]
        arr = np.einsum(spec, *tabs, wf, optimize=True)
    return SpectralCoefficients(alpha, N, arr)


def synthesize(c: SpectralCoefficients, x):
    """sum_mu c_mu phi_mu(x); ``x`` an EvalPoint or an array of points of shape (K, d)."""
    pts, scalar = _as_points(x)
    tabs = _point_tables(c.alpha, c.max_level, pts)
    d = c.dim
    spec = _LETTERS[:d] + "," + ",".join(_LETTERS[i] + "z" for i in range(d)) + "->z"
    out = np.einsum(spec, c.array, *tabs, optimize=True)
    return complex(out[0]) if scalar else out


def synthesize_on_rule(c: SpectralCoefficients, rule: QuadratureRule) -> GridFunction:
    """The truncated expansion sampled at the nodes of ``rule``."""
    d = c.dim
    if rule.is_tensor():
        tabs = _rule_axis_tables(rule, c.alpha, c.max_level)
        out_idx = _LETTERS[d : 2 * d]
        spec = _LETTERS[:d] + "," + ",".join(_LETTERS[i] + out_idx[i] for i in range(d)) + "->" + out_idx
        vals = np.einsum(spec, c.array, *tabs, optimize=True).reshape(-1)
    else:
        vals = synthesize(c, rule.nodes)
    return GridFunction(rule, vals)


def level_basis(alpha: AlphaParam, n: int, pts: np.ndarray, tables=None) -> np.ndarray:
    """phi_mu at the points for every mu of level n, rows in lexicographic order."""
    pts = np.atleast_2d(pts)
    if tables is None:
        if alpha.dim == 1:
            return laguerre_function_rows(n, alpha[0], pts[:, 0], (n,))
        tables = _point_tables(alpha, n, pts)
    idx = _level_index_array(n, alpha.dim)
    out = tables[0][idx[:, 0]].copy()
    for i in range(1, alpha.dim):
        out *= tables[i][idx[:, i]]
    return out


def level_values(c: SpectralCoefficients, x) -> np.ndarray:
    """P_n f(x) for n = 0..N, shape (N + 1, K) (or (N + 1,) for a single point)."""
    pts, scalar = _as_points(x)
    tabs = _point_tables(c.alpha, c.max_level, pts)
    out = np.empty((c.max_level + 1, pts.shape[0]), dtype=complex)
    for n in range(c.max_level + 1):
        basis = level_basis(c.alpha, n, pts, tabs)
        out[n] = c.level_coefficients(n) @ basis
    return out[:, 0] if scalar else out


def project(c: SpectralCoefficients, n: int) -> SpectralCoefficients:
    """Keep only the level-n coefficients.

    Asking for a level above the truncation returns zero coefficients
    carrying the flag ``"beyond_max_level"``.
    """
    if n < 0:
        raise ValueError("level must be nonnegative")
    if n > c.max_level:
        return SpectralCoefficients.zeros(c.alpha, c.max_level, c.flags | {"beyond_max_level"})
    return c.with_array(np.where(c.levels == n, c.array, 0.0))


# ---------------------------------------------------------------------------
# multipliers
# ---------------------------------------------------------------------------

class ArgumentConvention(enum.Enum):
    OF_EIGENVALUE = "OF_EIGENVALUE"
    OF_SQRT = "OF_SQRT"


@dataclass(frozen=True)
class MultiplierSpec:
    """A function m evaluated on the spectrum, either at e_n or at sqrt(e_n)."""

    func: Callable
    convention: ArgumentConvention = ArgumentConvention.OF_EIGENVALUE
    support_hint: tuple[float, float] | None = None
    name: str = "custom"

    def level_factors(self, alpha: AlphaParam, N: int) -> np.ndarray:
        e = eigenvalue(np.arange(N + 1), alpha).astype(float)
        arg = e if self.convention is ArgumentConvention.OF_EIGENVALUE else np.sqrt(e)
        with np.errstate(all="ignore"):
            vals = np.asarray(self.func(arg), dtype=complex)
        vals = np.broadcast_to(vals, arg.shape)
        if not np.all(np.isfinite(vals)):
            bad = int(np.argmin(np.isfinite(vals)))
            raise UnboundedMultiplierError(f"multiplier {self.name!r} is not finite at level {bad}")
        return vals


def _heat(t: float):
    return MultiplierSpec(lambda e: np.exp(-t * e), name=f"heat(t={t})")


def _negative_power(beta: float):
    return MultiplierSpec(lambda e: (1.0 + e) ** (-beta), name=f"negative_power(beta={beta})")


def riesz_factor(e, lam: float, R: float):
    """(1 - e/R^2)_+^lam with the convention 0^0 = 0 at the cut-off."""
    r = 1.0 - np.asarray(e, dtype=float) / (R * R)
    pos = r > 0
    if lam == 0:
        return pos.astype(float)
    return np.where(pos, np.abs(r) ** lam, 0.0)


MULTIPLIER_REGISTRY: dict[str, Callable[..., MultiplierSpec]] = {
    "identity": lambda: MultiplierSpec(lambda e: np.ones_like(e), name="identity"),
    "eigenvalue": lambda: MultiplierSpec(lambda e: e, name="eigenvalue"),
    "heat": _heat,
    "negative_power": _negative_power,
    "bochner_riesz": lambda lam, R: MultiplierSpec(
        lambda e: riesz_factor(e, lam, R), name=f"bochner_riesz(lam={lam}, R={R})"
    ),
    "bump": lambda lo, hi: MultiplierSpec(
        Bump(lo, hi), ArgumentConvention.OF_SQRT, (lo, hi), name=f"bump({lo}, {hi})"
    ),
}


def multiplier_from_registry(name: str, **params) -> MultiplierSpec:
    try:
        factory = MULTIPLIER_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown multiplier {name!r}; known: {sorted(MULTIPLIER_REGISTRY)}") from None
    return factory(**params)


def scale_levels(c: SpectralCoefficients, factors) -> SpectralCoefficients:
    """c_mu -> factors[|mu|] c_mu for one factor per level 0..N."""
    factors = np.asarray(factors)
    # the dense array also holds |mu| > N (always zero); clip their index
    idx = np.minimum(c.levels, c.max_level)
    return c.with_array(c.array * factors[idx])


def apply_multiplier(c: SpectralCoefficients, m: MultiplierSpec) -> SpectralCoefficients:
    """c_mu -> m(e_{|mu|}) c_mu (or m(sqrt(e_{|mu|})) c_mu)."""
    return scale_levels(c, m.level_factors(c.alpha, c.max_level))


def bochner_riesz(c: SpectralCoefficients, lam: float, R: float) -> SpectralCoefficients:
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if not R > 0:
        raise ValueError("R must be positive")
    e = eigenvalue(np.arange(c.max_level + 1), c.alpha)
    return scale_levels(c, riesz_factor(e, lam, R))


def default_r_grid(alpha: AlphaParam, N: int, ratio: float = 1.01) -> np.ndarray:
    """Geometric grid over [0.9 sqrt(e_0), 1.1 sqrt(e_N)] plus sqrt(e_n) +- one ulp."""
    roots = np.sqrt(eigenvalue(np.arange(N + 1), alpha).astype(float))
    lo, hi = 0.9 * roots[0], 1.1 * roots[-1]
    count = int(math.ceil(math.log(hi / lo) / math.log(ratio))) + 1
    geo = lo * ratio ** np.arange(count)
    extra = np.concatenate([np.nextafter(roots, 0.0), np.nextafter(roots, np.inf)])
    return np.unique(np.concatenate([geo[geo <= hi], [hi], extra]))


def maximal_riesz(c: SpectralCoefficients, lam: float, R_grid, x):
    """max over the grid of |S_R^lam f(x)|.

    Only a lower bound for the supremum over all R > 0; refining the grid
    can only increase it.
    """
    R_grid = np.asarray(R_grid, dtype=float)
    if R_grid.size == 0:
        raise ValueError("R grid must be nonempty")
    if np.any(np.diff(R_grid) < 0):
        raise ValueError("R grid must be sorted")
    v = level_values(c, x)
    e = eigenvalue(np.arange(c.max_level + 1), c.alpha)
    factors = np.stack([riesz_factor(e, lam, R) for R in R_grid])
    out = np.max(np.abs(factors @ v), axis=0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# square function
# ---------------------------------------------------------------------------

class SquareFunctionValue(NamedTuple):
    low: float
    high: float
    total: float


def _bump_support(phi) -> tuple[float, float]:
    lo, hi = (phi.lo, phi.hi) if isinstance(phi, Bump) else SQUARE_FUNCTION_SUPPORT
    if lo < SQUARE_FUNCTION_SUPPORT[0] or hi > SQUARE_FUNCTION_SUPPORT[1]:
        raise SupportViolationError("phi must be supported in (1/8, 1/2)")
    probe = np.linspace(-1.0, 2.0, 3001)
    vals = np.abs(np.asarray(phi(probe)))
    outside = (probe <= lo) | (probe >= hi)
    if np.any(vals[outside] != 0):
        raise SupportViolationError("phi is nonzero outside its support")
    if np.any(vals > 1 + 1e-12):
        raise ValueError("phi must be bounded by 1")
    return lo, hi


def square_function_weights(alpha: AlphaParam, N: int, delta: float, phi=None,
                            points_per_octave: int = 64, min_points: int = 257):
    """Matrices I_low, I_high with |S_delta f(x)|^2 = sum_nm I_nm P_n f(x) conj(P_m f(x)).

    I_nm is the integral of phi_n(t) conj(phi_m(t)) dt/t with
    phi_n(t) = phi(delta^{-1}(1 - e_n/t^2)), split at t = delta^{-1/2}.
    Each pair is integrated by the trapezoid rule in log t over the overlap
    of the two supports only, with at least ``points_per_octave`` nodes per
    octave.  The integrand vanishes to all orders at the ends of that
    interval, which is where the trapezoid rule is spectrally accurate.
    """
    if not 0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    phi = Bump() if phi is None else phi
    lo, hi = _bump_support(phi)
    e = eigenvalue(np.arange(N + 1), alpha).astype(float)
    # phi_n(t) != 0  <=>  e_n / t^2 in (1 - delta hi, 1 - delta lo)
    tau_lo = 0.5 * np.log(e / (1.0 - delta * lo))
    tau_hi = 0.5 * np.log(e / (1.0 - delta * hi))
    tau_split = -0.5 * math.log(delta)
    tau_floor = math.log(0.5)
    I_low = np.zeros((N + 1, N + 1))
    I_high = np.zeros((N + 1, N + 1))

    def piece(n, m, a, b):
        if b <= a:
            return 0.0
        k = max(min_points, int(math.ceil(points_per_octave * (b - a) / math.log(2))) + 1)
        tau = np.linspace(a, b, k)
        t2 = np.exp(2 * tau)
        vn = np.asarray(phi((1.0 - e[n] / t2) / delta))
        vm = vn if m == n else np.asarray(phi((1.0 - e[m] / t2) / delta))
        g = vn * np.conj(vm)
        h = tau[1] - tau[0]
        return float(np.real(h * (g.sum() - 0.5 * (g[0] + g[-1]))))

    for n in range(N + 1):
        for m in range(n, N + 1):
            a, b = max(tau_lo[n], tau_lo[m], tau_floor), min(tau_hi[n], tau_hi[m])
            if b <= a:
                if tau_lo[m] >= tau_hi[n]:
                    break
                continue
            low = piece(n, m, a, min(b, tau_split))
            high = piece(n, m, max(a, tau_split), b)
            I_low[n, m] = I_low[m, n] = low
            I_high[n, m] = I_high[m, n] = high
    return I_low, I_high


def _quadratic(I: np.ndarray, v: np.ndarray) -> np.ndarray:
    """sum_nm I_nm v_n conj(v_m), columnwise."""
    return np.maximum(np.real(np.einsum("nk,nm,mk->k", v, I, np.conj(v))), 0.0)


def square_function(c: SpectralCoefficients, delta: float, phi=None, x=None, weights=None):
    """Low, high and total parts of the square function at the point(s) ``x``."""
    if weights is None:
        weights = square_function_weights(c.alpha, c.max_level, delta, phi)
    I_low, I_high = weights
    v = level_values(c, x)
    scalar = v.ndim == 1
    v = v[:, None] if scalar else v
    low = np.sqrt(_quadratic(I_low, v))
    high = np.sqrt(_quadratic(I_high, v))
    total = np.hypot(low, high)
    if scalar:
        return SquareFunctionValue(float(low[0]), float(high[0]), float(total[0]))
    return SquareFunctionValue(low, high, total)


def weighted_level_gram(c: SpectralCoefficients, rule: QuadratureRule, beta: float) -> np.ndarray:
    """M_nm = sum_i w_i (1 + |x_i|)^{-beta} P_n f(x_i) conj(P_m f(x_i))."""
    V = level_values(c, rule.nodes)
    w = rule.weights * (1.0 + rule.radii) ** (-beta)
    return (V * w) @ np.conj(V).T


def square_function_weighted_norm(c: SpectralCoefficients, delta: float, beta: float,
                                  rule: QuadratureRule, phi=None) -> SquareFunctionValue:
    """L^2((1+|x|)^{-beta}) norms of the low, high and total square function."""
    I_low, I_high = square_function_weights(c.alpha, c.max_level, delta, phi)
    M = weighted_level_gram(c, rule, beta)
    low = math.sqrt(max(float(np.real(np.sum(I_low * M))), 0.0))
    high = math.sqrt(max(float(np.real(np.sum(I_high * M))), 0.0))
    return SquareFunctionValue(low, high, math.hypot(low, high))


def weighted_basis_gram(alpha: AlphaParam, N: int, rule: QuadratureRule, beta: float):
    """Gram matrix of all phi_mu with |mu|_1 <= N in L^2((1+|x|)^{-beta}).

    Returns the matrix and the level of each row (rows grouped by level).
    """
    _require_order(rule, N)
    tabs = _point_tables(alpha, N, rule.nodes)
    B = np.concatenate([level_basis(alpha, n, rule.nodes, tabs) for n in range(N + 1)])
    levels = np.concatenate([np.full(level_count(n, alpha.dim), n) for n in range(N + 1)])
    w = rule.weights * (1.0 + rule.radii) ** (-beta)
    return (B * w) @ B.T, levels


def square_function_operator_norm(alpha: AlphaParam, N: int, delta: float, beta: float,
                                  rule: QuadratureRule, phi=None, gram=None) -> SquareFunctionValue:
    """Norms of f -> S_delta f from band-limited L^2 into L^2((1+|x|)^{-beta}).

    The squared norm is the top eigenvalue of the weighted basis Gram matrix
    multiplied entrywise by the pair integrals of the level multipliers.
    """
    I_low, I_high = square_function_weights(alpha, N, delta, phi)
    G, lev = weighted_basis_gram(alpha, N, rule, beta) if gram is None else gram
    out = []
    for I in (I_low, I_high, I_low + I_high):
        K = G * I[np.ix_(lev, lev)]
        out.append(math.sqrt(max(float(np.linalg.eigvalsh(K)[-1]), 0.0)))
    return SquareFunctionValue(*out)


# ---------------------------------------------------------------------------
# Stein-Wainger type average
# ---------------------------------------------------------------------------

def stein_wainger_average(c: SpectralCoefficients, rho: float, R: float, x, nodes: int = 60) -> float:
    """(R^{-1} int_0^R |S_t^rho f(x)|^2 dt)^{1/2}.

    The integrand jumps (rho = 0) or has an integrable power singularity
    (rho < 0) at every t = sqrt(e_n), so the integral is split there and each
    piece uses tanh-sinh nodes, which cluster at the breakpoints and carry
    the distance to them without cancellation.
    """
    if not rho > -0.5:
        raise ValueError("rho must exceed -1/2")
    if not R > 0:
        raise ValueError("R must be positive")
    v = level_values(c, x)
    if v.ndim != 1:
        raise ValueError("stein_wainger_average takes a single point")
    e = eigenvalue(np.arange(c.max_level + 1), c.alpha).astype(float)
    roots = np.sqrt(e)
    total = 0.0
    for k in range(c.max_level + 1):
        a = roots[k]
        if a >= R:
            break
        b = min(R, roots[k + 1]) if k < c.max_level else R
        if b <= a:
            continue
        t, w, dist, _ = tanh_sinh(a, b, nodes)
        # 1 - e_n/t^2 for n < k directly, and for n = k through the exact distance
        r = 1.0 - e[: k + 1, None] / (t[None, :] ** 2)
        r[k] = dist * (t + a) / t ** 2
        factors = r ** rho if rho != 0 else np.ones_like(r)
        s = v[: k + 1] @ factors
        total += float(np.sum(w * np.abs(s) ** 2))
    return math.sqrt(total / R)


# ---------------------------------------------------------------------------
# projection norms and trace checks
# ---------------------------------------------------------------------------

def _power_iteration(G: np.ndarray, start: np.ndarray, tol: float, max_iter: int) -> float:
    v = start / np.linalg.norm(start)
    lam_prev = 0.0
    for _ in range(max_iter):
        u = G @ v
        lam = float(np.real(np.vdot(v, u)))
        nu = np.linalg.norm(u)
        if nu == 0:
            return 0.0
        v = u / nu
        if abs(lam - lam_prev) <= tol * abs(lam):
            return lam
        lam_prev = lam
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def level_weighted_gram(n: int, alpha: AlphaParam, beta: float, rule: QuadratureRule) -> np.ndarray:
    """<(1+|x|)^{-beta} phi_mu, phi_nu> over the level-n multi-indices."""
    _require_order(rule, n)
    B = level_basis(alpha, n, rule.nodes)
    w = rule.weights * (1.0 + rule.radii) ** (-beta)
    return (B * w) @ B.T


def projection_operator_norm(n: int, alpha: AlphaParam, beta: float, rule: QuadratureRule,
                             tol: float = 1e-6, max_iter: int = 10_000, seed: int = 0) -> float:
    """Norm of P_n from L^2 into L^2((1+|x|)^{-beta}) by power iteration on the level Gram."""
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    G = level_weighted_gram(n, alpha, beta, rule)
    rng = np.random.default_rng(seed)
    start = np.ones(G.shape[0]) + 0.1 * rng.standard_normal(G.shape[0])
    return math.sqrt(max(_power_iteration(G, start, tol, max_iter), 0.0))


class TraceCheck(NamedTuple):
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def extended_trace_check(F: Callable, N: int, alpha: AlphaParam, beta: float,
                         rule: QuadratureRule | None = None, eps: float = 0.1,
                         restarts: int = 20, seed: int = 0, max_active: int = 4000) -> TraceCheck:
    """Compare ||(1+|x|)^{-beta/2} F(sqrt L) f||^2 maximized over unit f with the N^2,q bound.

    ``F`` must vanish outside [N/4, N].  The left side is the largest
    Rayleigh quotient reached by power iteration from ``restarts`` random
    unit starting vectors on the levels where F(sqrt(e_n)) is nonzero.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    probe = np.linspace(0.0, 2.0 * N, 64 * N + 1)
    e_all = eigenvalue(np.arange(int((N * N) // 4) + 2), alpha).astype(float)
    roots = np.sqrt(e_all)
    pts = np.concatenate([probe, roots])
    vals = np.abs(np.asarray(F(pts), dtype=complex))
    outside = (pts < N / 4) | (pts > N)
    if np.any(vals[outside] != 0):
        raise SupportViolationError("F is nonzero outside [N/4, N]")

    def dilated(s):
        return F(N * np.asarray(s))

    if beta > 1:
        rhs = N * nq_norm(dilated, N, 2.0) ** 2
    else:
        q = 2.0 * (1.0 + eps) / beta
        rhs = N ** (beta / (1.0 + eps)) * nq_norm(dilated, N, q) ** 2

    Fn = np.asarray(F(roots), dtype=complex)
    active = np.nonzero(Fn != 0)[0]
    if active.size == 0:
        return TraceCheck(0.0, rhs)
    counts = [level_count(int(n), alpha.dim) for n in active]
    if sum(counts) > max_active:
        raise ValueError(f"{sum(counts)} active eigenfunctions exceed max_active={max_active}")
    top = int(active[-1])
    if rule is None:
        rule = rule_for_alpha(alpha, top)
    _require_order(rule, top)
    if alpha.dim == 1:
        B = laguerre_function_rows(top, alpha[0], rule.nodes[:, 0], active)
    else:
        tabs = _point_tables(alpha, top, rule.nodes)
        B = np.concatenate([level_basis(alpha, int(n), rule.nodes, tabs) for n in active])
    scale = np.repeat(Fn[active], counts)
    w = rule.weights * (1.0 + rule.radii) ** (-beta)
    A = scale[:, None] * B
    G = (A * w) @ np.conj(A).T
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(restarts):
        start = rng.standard_normal(G.shape[0]) + 1j * rng.standard_normal(G.shape[0])
        best = max(best, _power_iteration(G, start, 1e-10, 10_000))
    return TraceCheck(best, rhs)


# ---------------------------------------------------------------------------
# Littlewood-Paley
# ---------------------------------------------------------------------------

def littlewood_paley_pieces(alpha: AlphaParam, N: int, psi: Callable) -> tuple[np.ndarray, np.ndarray]:
    """Dyadic indices k and factors psi(2^{-k} sqrt(e_n)), shape (K, N + 1)."""
    roots = np.sqrt(eigenvalue(np.arange(N + 1), alpha).astype(float))
    probe = np.concatenate([np.linspace(0.0, 0.5, 200), np.linspace(2.0, 8.0, 200)])
    if np.any(np.asarray(psi(probe)) != 0):
        raise SupportViolationError("psi must be supported in (1/2, 2)")
    ks = np.arange(math.floor(math.log2(roots[0])) - 1, math.ceil(math.log2(roots[-1])) + 2)
    factors = np.stack([np.asarray(psi(roots * 2.0 ** (-int(k))), dtype=float) for k in ks])
    keep = np.any(factors != 0, axis=1)
    return ks[keep], factors[keep]


def littlewood_paley_energy(c: SpectralCoefficients, psi: Callable, beta: float, rule: QuadratureRule) -> float:
    """L^2((1+|x|)^{beta}) norm of (sum_k |psi(2^{-k} sqrt L) f|^2)^{1/2}."""
    if not -c.dim < beta < c.dim:
        raise ValueError("beta must lie in (-d, d)")
    _, factors = littlewood_paley_pieces(c.alpha, c.max_level, psi)
    M = weighted_level_gram(c, rule, -beta)
    total = float(np.real(np.einsum("kn,nm,km->", factors, M, factors)))
    return math.sqrt(max(total, 0.0))
