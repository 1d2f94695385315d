"""Quadrature rules on (0, inf)^d and the inner products and norms built on them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .laguerre import AlphaParam, EvalPoint, laguerre_function_sumsq, orthonormal_rows

RULE_FORMAT_VERSION = 1


class RuleKind(enum.Enum):
    GAUSS_GENLAGUERRE_SQUARED = "GAUSS_GENLAGUERRE_SQUARED"
    TANH_SINH_TRUNCATED = "TANH_SINH_TRUNCATED"
    UNIFORM_BOX = "UNIFORM_BOX"


@dataclass(frozen=True, eq=False)
class AxisRule:
    nodes: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights on (0, inf)^d.

    ``axes`` holds the one-dimensional factors when the rule is a tensor
    product; the flattened ``nodes`` are in C order over those factors.
    """

    nodes: np.ndarray  # shape (n, d)
    weights: np.ndarray  # shape (n,)
    kind: RuleKind
    order: int
    domain_cap: float = math.inf
    rho: tuple[float, ...] = ()
    axes: tuple[AxisRule, ...] | None = None

    def __post_init__(self):
        if self.nodes.ndim != 2 or self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("nodes must be (n, d) and match the weights")
        if not np.all(self.weights > 0):
            raise ValueError("quadrature weights must be positive")
        if not np.all(self.nodes > 0):
            raise ValueError("quadrature nodes must lie in the open orthant")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.sum(self.nodes ** 2, axis=1))

    def points(self) -> list[EvalPoint]:
        return [EvalPoint(tuple(row)) for row in self.nodes]

    def integrate(self, values) -> complex | float:
        return np.dot(self.weights, values)

    def is_tensor(self) -> bool:
        return self.axes is not None


def gauss_genlaguerre_abscissae(order: int, rho: float) -> np.ndarray:
    """Zeros of L_order^rho via Golub-Welsch, polished by Newton on the scaled recurrence."""
    k = np.arange(order)
    diag = 2.0 * k + rho + 1.0
    off = np.sqrt(k[1:] * (k[1:] + rho))
    u = eigh_tridiagonal(diag, off, eigvals_only=True)
    for _ in range(2):
        qm1, qm = orthonormal_rows(order, rho, u, -0.5 * u, (order - 1, order))
        deriv = order * qm - math.sqrt(order * (order + rho)) * qm1
        u = u - u * qm / deriv
    return np.sort(u)


def gauss_squared_axis(order: int, rho: float, scale: float = 1.0) -> AxisRule:
    """x = scale * sqrt(u); exact for x^{2 rho + 1} e^{-x^2/scale^2} p(x^2), deg p <= 2 order - 1.

    The weights are the Christoffel numbers 1 / sum_{k < order} phi_k^rho(x)^2,
    which stay representable where the classical Gauss-Laguerre weights underflow.
    """
    if order < 4:
        raise ValueError("order must be at least 4")
    if not rho > -1:
        raise ValueError("rho must exceed -1")
    u = gauss_genlaguerre_abscissae(order, rho)
    y = np.sqrt(u)
    w = 1.0 / laguerre_function_sumsq(order - 1, rho, y)
    return AxisRule(scale * y, scale * w)


def tanh_sinh(a: float, b: float, n: int, h: float | None = None, min_gap: float = 1e-300):
    """Tanh-sinh nodes and weights on [a, b] with 2n+1 points.

    Without an explicit step ``h`` the outermost nodes sit about
    ``min_gap`` (relative to b - a) from the endpoints.
    Also returns the distances of each node to ``a`` and ``b`` computed
    without cancellation, for integrands with endpoint singularities.
    """
    if h is None:
        # the step that brings the outermost node within ~1e-300 of the endpoints
        h = math.asinh(math.log(2 / min_gap) / math.pi) / n
    t = h * np.arange(-n, n + 1)
    s = 0.5 * math.pi * np.sinh(t)
    x = np.tanh(s)
    with np.errstate(over="ignore"):
        w = h * 0.5 * math.pi * np.cosh(t) / np.cosh(s) ** 2
        gap = 2.0 / (np.exp(2 * np.abs(s)) + 1.0)  # 1 - |x|
    half = 0.5 * (b - a)
    dist_a = np.where(x < 0, gap, 1.0 + x) * half
    dist_b = np.where(x > 0, gap, 1.0 - x) * half
    nodes = np.where(x < 0, a + dist_a, b - dist_b)
    keep = (dist_a > 0) & (dist_b > 0) & (w > 0) & (nodes > a) & (nodes < b)
    return nodes[keep], (half * w)[keep], dist_a[keep], dist_b[keep]


def _tensor(axes: Sequence[AxisRule]):
    grids = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    w = axes[0].weights
    for ax in axes[1:]:
        w = np.multiply.outer(w, ax.weights)
    return nodes, np.asarray(w).reshape(-1)


def build_rule(kind, order: int, dim: int, scale: float = 1.0, rho=-0.5) -> QuadratureRule:
    """Construct a tensor-product rule.

    For GAUSS_GENLAGUERRE_SQUARED ``rho`` (scalar or one per axis) is the
    generalized-Laguerre parameter; choosing rho = alpha_i makes products of
    eigenfunctions of type alpha_i exact.  For the truncated kinds ``scale``
    is the truncation radius.
    """
    kind = RuleKind(kind) if not isinstance(kind, RuleKind) else kind
    if order < 4:
        raise ValueError("order must be at least 4")
    if dim < 1:
        raise ValueError("dim must be positive")
    rhos = tuple(float(r) for r in np.broadcast_to(np.asarray(rho, dtype=float), (dim,)))
    if kind is RuleKind.GAUSS_GENLAGUERRE_SQUARED:
        axes = tuple(gauss_squared_axis(order, r, scale) for r in rhos)
        cap = math.inf
    elif kind is RuleKind.TANH_SINH_TRUNCATED:
        if dim > 3:
            raise ValueError("truncated tanh-sinh rules support dim <= 3")
        n = max(2, (order - 1) // 2)
        # endpoint gap near machine precision keeps tensor products of weights representable
        nodes, w, _, _ = tanh_sinh(0.0, scale, n, min_gap=1e-15)
        axes = (AxisRule(nodes, w),) * dim
        cap = float(scale)
    elif kind is RuleKind.UNIFORM_BOX:
        if dim > 3:
            raise ValueError("uniform box rules support dim <= 3")
        hstep = scale / order
        axis = AxisRule((np.arange(order) + 0.5) * hstep, np.full(order, hstep))
        axes = (axis,) * dim
        cap = float(scale)
    else:  # pragma: no cover
        raise ValueError(f"unsupported rule kind {kind}")
    nodes, weights = _tensor(axes)
    return QuadratureRule(nodes, weights, kind, order, cap, rhos, axes)


def rule_for_alpha(alpha: AlphaParam, max_level: int, order: int | None = None) -> QuadratureRule:
    """Gauss rule matched to alpha that resolves every product of level <= max_level functions."""
    need = 2 * max_level + 16
    order = need if order is None else order
    if order < need:
        raise ValueError(f"order {order} below the required 2N + 16 = {need}")
    return build_rule(RuleKind.GAUSS_GENLAGUERRE_SQUARED, order, alpha.dim, rho=alpha.entries)


def plotting_box_rule(alpha: AlphaParam, max_level: int, order: int = 200) -> QuadratureRule:
    """Uniform box covering 1.5 sqrt(largest eigenvalue) on every axis."""
    e_max = 4.0 * max_level + 2 * alpha.alpha_l1 + 2 * alpha.dim
    return build_rule(RuleKind.UNIFORM_BOX, order, alpha.dim, scale=1.5 * math.sqrt(e_max))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function at the nodes of a rule."""

    rule: QuadratureRule
    values: np.ndarray = field()

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.rule.size,):
            raise ValueError(f"expected {self.rule.size} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, rule: QuadratureRule, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        """Evaluate ``func`` on the (n, d) node array."""
        return cls(rule, np.asarray(func(rule.nodes)))

    def __add__(self, other):
        _same_rule(self, other)
        return GridFunction(self.rule, self.values + other.values)

    def __mul__(self, c):
        return GridFunction(self.rule, self.values * c)

    __rmul__ = __mul__


def _same_rule(f: GridFunction, g: GridFunction):
    if f.rule is not g.rule:
        raise ValueError("grid functions live on different quadrature rules")


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """sum_i w_i f_i conj(g_i)."""
    _same_rule(f, g)
    return complex(np.sum(f.rule.weights * f.values * np.conj(g.values)))


def weighted_norm(f: GridFunction, beta: float) -> float:
    """L^2 norm with respect to (1 + |x|)^{-beta} dx."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    w = f.rule.weights * (1.0 + f.rule.radii) ** (-beta)
    return float(math.sqrt(np.sum(w * np.abs(f.values) ** 2)))


def nq_norm(F: Callable, N: int, q: float, samples: int = 17) -> float:
    """Cellwise-sup q-mean of F over [0, 1] split into N^2 cells.

    The sup on each cell is estimated from ``samples`` equispaced interior
    points plus both endpoints.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if q < 2:
        raise ValueError("q must be at least 2")
    cells = N * N
    frac = np.linspace(0.0, 1.0, samples + 2)
    grid = (np.arange(cells)[:, None] + frac[None, :]) / cells
    vals = np.abs(np.asarray(F(grid.reshape(-1)))).reshape(cells, samples + 2)
    sup = vals.max(axis=1)
    return float(np.mean(sup ** q) ** (1.0 / q))


# ---------------------------------------------------------------------------
# text serialization
# ---------------------------------------------------------------------------

def dump_rule(rule: QuadratureRule) -> str:
    lines = [
        f"# laguerre_lab quadrature rule v{RULE_FORMAT_VERSION}",
        f"kind {rule.kind.value}",
        f"order {rule.order}",
        f"dim {rule.dim}",
        f"domain_cap {rule.domain_cap!r}",
        "rho " + " ".join(repr(r) for r in rule.rho),
        f"nodes {rule.size}",
    ]
    for row, w in zip(rule.nodes, rule.weights):
        lines.append(" ".join(repr(float(v)) for v in row) + " " + repr(float(w)))
    return "\n".join(lines) + "\n"


def load_rule(text: str) -> QuadratureRule:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0]
    if not head.startswith("# laguerre_lab quadrature rule v"):
        raise ValueError("not a quadrature rule file")
    version = int(head.rsplit("v", 1)[1])
    if version != RULE_FORMAT_VERSION:
        raise ValueError(f"unsupported rule format version {version}")
    meta = {}
    i = 1
    while not lines[i].startswith("nodes"):
        key, _, rest = lines[i].partition(" ")
        meta[key] = rest
        i += 1
    count = int(lines[i].split()[1])
    dim = int(meta["dim"])
    data = np.array([[float(v) for v in ln.split()] for ln in lines[i + 1 : i + 1 + count]])
    if data.shape != (count, dim + 1):
        raise ValueError("malformed node table")
    rho = tuple(float(v) for v in meta.get("rho", "").split())
    return QuadratureRule(
        data[:, :dim].copy(),
        data[:, dim].copy(),
        RuleKind(meta["kind"]),
        int(meta["order"]),
        float(meta["domain_cap"]),
        rho,
        None,
    )
