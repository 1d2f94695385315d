"""Experiment registry: each entry turns a parameter dict into a JSON summary
and a CSV table.

Parameters come from three layers, later ones winning: the preset defaults
declared here, the ``[params]`` section of the config file, and the config
section named after the preset.  Values are parsed according to the type of
the default, so a misspelt key or a malformed number is a config error.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError

PRESETS = ("smoke", "full")


@dataclass
class ExperimentResult:
    name: str
    summary: dict
    header: list[str]
    rows: list[list]
    passed: bool


@dataclass
class Experiment:
    name: str
    description: str
    runner: Callable[[dict, int, int], ExperimentResult]
    defaults: dict = field(default_factory=dict)

    def params(self, preset: str, overrides: dict[str, str] | None = None) -> dict:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        base = dict(self.defaults["common"])
        base.update(self.defaults[preset])
        for key, raw in (overrides or {}).items():
            if key not in base:
                raise ConfigError(f"{self.name}: unknown parameter {key!r}")
            base[key] = _coerce(key, raw, base[key])
        return base


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"parameter {key!r}: cannot parse {raw!r}") from None
    return raw


def parallel_map(fn, items, jobs: int):
    """Ordered map; with jobs > 1 the cells run in worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def fit_slope(x, y) -> float:
    """Least-squares slope of y against x."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def _alpha(values, dim: int | None = None):
    from .laguerre import AlphaParam

    if dim is not None and len(values) == 1:
        values = tuple(values) * dim
    return AlphaParam.of(*values)


# ---------------------------------------------------------------------------
# ORTHO
# ---------------------------------------------------------------------------

def _ortho_cell(args):
    from .laguerre import AlphaParam
    from .quadrature import GridFunction, rule_for_alpha
    from .spectral import analyze, random_coefficients, synthesize_on_rule, weighted_basis_gram

    alpha_entries, max_level, seed = args
    alpha = AlphaParam.of(*alpha_entries)
    rule = rule_for_alpha(alpha, max_level)
    G, _ = weighted_basis_gram(alpha, max_level, rule, 0.0)
    gram_err = float(np.max(np.abs(G - np.eye(G.shape[0]))))
    c = random_coefficients(alpha, max_level, seed)
    back = analyze(GridFunction(rule, synthesize_on_rule(c, rule).values), alpha, max_level)
    return gram_err, float(np.max(np.abs(back.array - c.array)))


def run_ortho(p: dict, seed: int, jobs: int) -> ExperimentResult:
    cases = []
    for d in p["dims"]:
        for family in ("minus_half", "zero", "mixed"):
            if family == "minus_half":
                entries = (-0.5,) * d
            elif family == "zero":
                entries = (0.0,) * d
            else:
                entries = ((0.5, 1.3) + (1.3,) * d)[:d]
            cases.append((entries, p["max_level"], seed))
    out = parallel_map(_ortho_cell, cases, jobs)
    rows, ok = [], True
    for (entries, _, _), (g, r) in zip(cases, out):
        rows.append([len(entries), " ".join(repr(a) for a in entries), g, r])
        ok &= g <= p["tolerance"] and r <= p["tolerance"]
    summary = {
        "max_gram_error": max(o[0] for o in out),
        "max_roundtrip_error": max(o[1] for o in out),
        "tolerance": p["tolerance"],
        "pass": bool(ok),
    }
    return ExperimentResult("ORTHO", summary, ["d", "alpha", "gram_error", "roundtrip_error"], rows, bool(ok))


# ---------------------------------------------------------------------------
# RIESZ_CONVERGENCE
# ---------------------------------------------------------------------------

def truncated_gaussian(alpha, N: int, center, width: float):
    """Coefficients of exp(-|x - center|^2 / (2 width^2)), cut off above level N."""
    from .quadrature import GridFunction, rule_for_alpha
    from .spectral import analyze

    rule = rule_for_alpha(alpha, N)
    vals = np.exp(-np.sum((rule.nodes - np.asarray(center)) ** 2, axis=1) / (2 * width ** 2))
    return analyze(GridFunction(rule, vals), alpha, N)


def riesz_relative_error(c, lam: float, R: float) -> float:
    """||S_R^lam f - f||_2 / ||f||_2 from the coefficients (Parseval)."""
    from .spectral import bochner_riesz

    return (bochner_riesz(c, lam, R) - c).norm() / c.norm()


def run_riesz_convergence(p: dict, seed: int, jobs: int) -> ExperimentResult:
    from .laguerre import eigenvalue

    alpha = _alpha(p["alpha"], p["dim"])
    N = p["max_level"]
    c = truncated_gaussian(alpha, N, p["center"], p["width"])
    eN = float(eigenvalue(N, alpha))
    rows, ok = [], True
    first_pass = {}
    for lam in p["lambdas"]:
        passing = None
        for factor in p["r_squared_factors"]:
            R2 = factor * eN
            err = riesz_relative_error(c, lam, math.sqrt(R2))
            rows.append([lam, R2, err])
            ok &= err <= p["tolerance"]
            if err <= p["tolerance"] and passing is None:
                passing = R2
        first_pass[repr(lam)] = passing
    summary = {
        "e_N": eN,
        "tolerance": p["tolerance"],
        "first_passing_R_squared": first_pass,
        "pass": bool(ok),
    }
    return ExperimentResult("RIESZ_CONVERGENCE", summary, ["lambda", "R_squared", "rel_error"], rows, bool(ok))


# ---------------------------------------------------------------------------
# TRACE_DECAY
# ---------------------------------------------------------------------------

def _trace_cell(args):
    from .quadrature import rule_for_alpha
    from .spectral import projection_operator_norm

    alpha_entries, beta, n, order, seed, max_iter = args
    alpha = _alpha(alpha_entries)
    rule = rule_for_alpha(alpha, n, order)
    return projection_operator_norm(n, alpha, beta, rule, tol=1e-10, max_iter=max_iter, seed=seed)


def run_trace_decay(p: dict, seed: int, jobs: int) -> ExperimentResult:
    ns = p["n_values"]
    order = max(p["rule_order"], 2 * max(ns) + 16)
    norms = parallel_map(_trace_cell, [(p["alpha"], p["beta"], n, order, seed, p["power_max_iter"]) for n in ns], jobs)
    slope = fit_slope(np.log(ns), np.log(norms))
    lo, hi = p["slope_band"]
    ok = lo <= slope <= hi
    rows = [[n, v, math.log(n), math.log(v)] for n, v in zip(ns, norms)]
    summary = {"slope": slope, "slope_band": list(p["slope_band"]), "rule_order": order, "pass": bool(ok)}
    return ExperimentResult("TRACE_DECAY", summary, ["n", "norm", "log_n", "log_norm"], rows, bool(ok))


# ---------------------------------------------------------------------------
# SQUARE_SCALING
# ---------------------------------------------------------------------------

def _square_cell(args):
    from .quadrature import rule_for_alpha
    from .spectral import square_function_operator_norm, weighted_basis_gram

    alpha_entries, N, order, beta, delta = args
    alpha = _alpha(alpha_entries)
    rule = rule_for_alpha(alpha, N, order)
    gram = _cached_gram(alpha, N, order, beta, rule, weighted_basis_gram)
    return tuple(square_function_operator_norm(alpha, N, delta, beta, rule, gram=gram))


_GRAMS: dict = {}


def _cached_gram(alpha, N, order, beta, rule, builder):
    key = (alpha.entries, N, order, beta)
    if key not in _GRAMS:
        _GRAMS.clear()
        _GRAMS[key] = builder(alpha, N, rule, beta)
    return _GRAMS[key]


def run_square_scaling(p: dict, seed: int, jobs: int) -> ExperimentResult:
    alpha = _alpha(p["alpha"], p["dim"])
    deltas = [2.0 ** (-k) for k in p["delta_exponents"]]
    order = max(p["rule_order"], 2 * p["max_level"] + 16)
    cells = [(alpha.entries, p["max_level"], order, p["beta"], d) for d in deltas]
    vals = parallel_map(_square_cell, cells, jobs)
    totals = [v[2] for v in vals]
    # the norm shrinks like delta^{exponent} as the bump narrows
    exponent = fit_slope(np.log(deltas), np.log(totals))
    target = (1 + (1 - p["beta"]) / 2) / 2
    ok = abs(exponent - target) <= p["exponent_tolerance"]
    rows = [[d, lo, hi, tot, exponent] for d, (lo, hi, tot) in zip(deltas, vals)]
    summary = {
        "fitted_exponent": exponent,
        "target_exponent": target,
        "tolerance": p["exponent_tolerance"],
        "rule_order": order,
        "pass": bool(ok),
    }
    return ExperimentResult("SQUARE_SCALING", summary,
                            ["delta", "low_norm", "high_norm", "total", "fitted_exponent"], rows, bool(ok))


# ---------------------------------------------------------------------------
# KERNEL_PROBE
# ---------------------------------------------------------------------------

def heat_series_errors(alpha, t_values, points, N: int):
    """Largest relative gap between the closed form and the eigen-series, per t."""
    from .kernels import heat_kernel_closed, heat_kernel_series

    xa, ya = points[:, 0, :], points[:, 1, :]
    out = []
    for t in t_values:
        closed = heat_kernel_closed(t, xa, ya, alpha)
        series, _ = heat_kernel_series(t, xa, ya, alpha, N)
        out.append(float(np.max(np.abs(series - closed) / closed)))
    return out


def heat_probe_points(d: int, count: int, seed: int, lo: float = 0.25, hi: float = 2.5):
    """Pairs in [lo, hi]^d with |x - y| <= 1.5, where the kernel is not tiny."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=(count, d))
    step = rng.uniform(-1.0, 1.0, size=(count, d))
    step *= 1.5 / max(1.0, math.sqrt(d)) / np.maximum(1.0, np.linalg.norm(step, axis=1, keepdims=True))
    y = np.clip(x + step, lo, hi)
    return np.stack([x, y], axis=1)


def run_kernel_probe(p: dict, seed: int, jobs: int) -> ExperimentResult:
    from .fixtures import require_fixtures
    from .kernels import gaussian_domination_probe, heat_semigroup_defect, sobol_pairs
    from .laguerre import EvalPoint

    fx = require_fixtures()
    rows, summary, ok = [], {}, True
    worst_series = 0.0
    for a0 in p["series_alphas"]:
        for d in p["series_dims"]:
            a = _alpha((a0,), d)
            pts = heat_probe_points(d, p["series_points"], seed)
            errs = heat_series_errors(a, p["t_values"], pts, p["series_levels"])
            for t, e in zip(p["t_values"], errs):
                rows.append(["series", d, " ".join(map(repr, a.entries)), t, e])
            worst_series = max(worst_series, max(errs))
    ok &= worst_series <= p["tolerance"]
    summary["series_max_rel_error"] = worst_series

    a1 = _alpha((p["semigroup_alpha"],))
    worst_semi = 0.0
    rng = np.random.default_rng(seed + 1)
    for _ in range(p["semigroup_points"]):
        x, y = rng.uniform(0.2, 3.0, size=2)
        lhs, rhs = heat_semigroup_defect(p["semigroup_t"], p["semigroup_s"], EvalPoint((x,)), EvalPoint((y,)), a1)
        worst_semi = max(worst_semi, abs(lhs - rhs) / rhs)
    rows.append(["semigroup", 1, repr(a1.entries[0]), p["semigroup_t"] + p["semigroup_s"], worst_semi])
    ok &= worst_semi <= p["tolerance"]
    summary["semigroup_max_rel_error"] = worst_semi

    domination = []
    C = fx["gaussian_domination_C"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for entries in p["domination_alphas"]:
            a = _alpha(tuple(float(v) for v in entries.split("/")))
            ratios = []
            for count in (p["domination_pairs"], 2 * p["domination_pairs"]):
                pairs = sobol_pairs(count, a.dim, p["domination_box"], seed + 7)
                rep = gaussian_domination_probe(p["t_values_domination"], pairs, a, C)
                ratios.append(rep.max_ratio)
            stable = abs(ratios[1] - ratios[0]) <= p["stability"] * ratios[0]
            finite = all(math.isfinite(r) for r in ratios)
            below = ratios[1] < C
            ok &= stable and finite and below
            domination.append({"alpha": list(a.entries), "max_ratio": ratios[0],
                               "max_ratio_doubled": ratios[1], "stable": bool(stable), "below_fixture": bool(below)})
            rows.append(["domination", a.dim, " ".join(map(repr, a.entries)), 0.0, ratios[1]])
    summary["gaussian_domination"] = domination
    summary["fixture_gaussian_domination_C"] = C
    summary["pass"] = bool(ok)
    return ExperimentResult("KERNEL_PROBE", summary, ["check", "d", "alpha", "t", "value"], rows, bool(ok))


# ---------------------------------------------------------------------------
# POTENTIAL_SCHUR
# ---------------------------------------------------------------------------

def potential_consistency_error(beta: float, alpha, y_values, n_max: int, shift: float) -> float:
    """max over y, n <= n_max of |<K(.,y), phi_n> - (4n + 2 alpha + shift)^-beta phi_n(y)|, relative."""
    from .kernels import potential_spectral_coefficients
    from .laguerre import laguerre_function_table

    worst = 0.0
    n = np.arange(n_max + 1)
    a = alpha.entries[0]
    for y in y_values:
        coef = potential_spectral_coefficients(beta, y, alpha, n_max)
        ref = (4.0 * n + 2.0 * a + shift) ** (-beta) * laguerre_function_table(n_max, a, np.array([y]))[:, 0]
        worst = max(worst, float(np.max(np.abs(coef - ref)) / np.max(np.abs(ref))))
    return worst


def run_potential_schur(p: dict, seed: int, jobs: int) -> ExperimentResult:
    from .fixtures import require_fixtures
    from .kernels import potential_domination_probe, schur_integrals, sobol_pairs
    from .laguerre import EvalPoint

    fx = require_fixtures()
    rows, ok = [], True
    a1 = _alpha((p["alpha_1d"],))
    consistency = {}
    for beta in p["betas"]:
        err = potential_consistency_error(beta, a1, p["y_values"], p["max_level"], p["eigen_shift"])
        rows.append(["consistency", beta, p["eigen_shift"], err])
        consistency[repr(beta)] = err
        ok &= err <= p["tolerance"]
    domination, schur = {}, {}
    a2 = _alpha(tuple(float(v) for v in p["domination_alpha"].split("/")))
    for beta in p["betas"]:
        pairs = sobol_pairs(p["domination_pairs"], a2.dim, p["domination_box"], seed + 11)
        C = fx[f"potential_domination_C_beta_{beta}"]
        rep = potential_domination_probe(beta, pairs, a2, C)
        rows.append(["domination", beta, C, rep.max_ratio])
        domination[repr(beta)] = {"max_ratio": rep.max_ratio, "fixture": C}
        ok &= bool(rep.passed)
        C_row, C_col = fx[f"schur_row_C_beta_{beta}"], fx[f"schur_col_C_beta_{beta}"]
        for x in p["schur_points"]:
            row, col = schur_integrals(beta, EvalPoint((x,)), a1)
            rows.append(["schur_row", beta, x, row])
            rows.append(["schur_col", beta, x, col])
            ok &= row < C_row and col < C_col
        schur[repr(beta)] = {"fixture_row": C_row, "fixture_col": C_col}
    summary = {
        "eigen_shift": p["eigen_shift"],
        "consistency_max_rel_error": consistency,
        "domination": domination,
        "schur_fixtures": schur,
        "tolerance": p["tolerance"],
        "pass": bool(ok),
    }
    return ExperimentResult("POTENTIAL_SCHUR", summary, ["check", "beta", "parameter", "value"], rows, bool(ok))


# ---------------------------------------------------------------------------
# SHARPNESS
# ---------------------------------------------------------------------------

def run_sharpness(p: dict, seed: int, jobs: int) -> ExperimentResult:
    from .fixtures import require_fixtures
    from .sharpness import SharpnessConfig, critical_index, divergence_experiment

    fx = require_fixtures()
    alpha = _alpha(p["alpha"], p["dim"])
    lam = p["lambda"]
    if p["lambda_offset"] is not None and not math.isnan(p["lambda_offset"]):
        lam = critical_index(p["p"], alpha.dim) / 2 + p["lambda_offset"]
    cfg = SharpnessConfig(p=p["p"], lam=lam, alpha=alpha, mu_sequence=p["mu_sequence"],
                          radial_cells=p["radial_cells"], angular_cells=p["angular_cells"], seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = divergence_experiment(cfg, fx)
    rows = [[k, r["mu"], r["gk_norm_p"], r["threshold"], r["exceed_measure"]] for k, r in enumerate(report.per_k)]
    return ExperimentResult("SHARPNESS", report.to_dict(), ["k", "mu", "gk_norm_p", "threshold", "exceed_measure"],
                            rows, report.passed)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

REGISTRY: dict[str, Experiment] = {}


def register(exp: Experiment) -> Experiment:
    REGISTRY[exp.name] = exp
    return exp


register(Experiment(
    "ORTHO", "Gram matrix and analyze/synthesize round trip of low levels", run_ortho,
    {"common": {"max_level": 4, "tolerance": 1e-8},
     "smoke": {"dims": (1, 2)}, "full": {"dims": (1, 2, 3)}},
))
register(Experiment(
    "RIESZ_CONVERGENCE", "L2 convergence of Bochner-Riesz means of a truncated Gaussian", run_riesz_convergence,
    {"common": {"dim": 2, "alpha": (0.0,), "center": (1.5, 1.5), "width": 0.5,
                "lambdas": (0.0, 0.5, 1.0), "tolerance": 1e-3,
                "r_squared_factors": (1.0000001, 1.5, 2.0, 4.0, 16.0, 64.0, 256.0)},
     "smoke": {"max_level": 24}, "full": {"max_level": 48}},
))
register(Experiment(
    "TRACE_DECAY", "Decay of the level projections into a weighted L2", run_trace_decay,
    {"common": {"alpha": (0.0,), "beta": 1.5, "slope_band": (-0.35, -0.15), "power_max_iter": 10_000},
     "smoke": {"n_values": (16, 32, 64), "rule_order": 144},
     "full": {"n_values": (16, 32, 64, 128, 256, 512), "rule_order": 1040}},
))
register(Experiment(
    "SQUARE_SCALING", "delta-scaling of the weighted square-function norm", run_square_scaling,
    {"common": {"dim": 2, "alpha": (0.0,), "beta": 1.5, "exponent_tolerance": 0.15},
     "smoke": {"max_level": 24, "rule_order": 64, "delta_exponents": (3, 4, 5)},
     "full": {"max_level": 48, "rule_order": 112, "delta_exponents": (3, 4, 5, 6, 7, 8)}},
))
register(Experiment(
    "KERNEL_PROBE", "Heat kernel: series, semigroup and Gaussian domination", run_kernel_probe,
    {"common": {"t_values": (0.1, 0.3, 1.0), "series_alphas": (-0.5, 0.0, 0.7), "series_dims": (1, 2),
                "semigroup_alpha": 0.5, "semigroup_t": 0.2, "semigroup_s": 0.3, "tolerance": 1e-6,
                "domination_alphas": ("-0.5", "0.0", "0.5/1.5"), "domination_box": 6.0,
                "t_values_domination": (0.01, 0.1, 0.5, 1.0, 2.0, 5.0), "stability": 0.05},
     "smoke": {"series_points": 16, "series_levels": 80, "semigroup_points": 3, "domination_pairs": 1024},
     "full": {"series_points": 64, "series_levels": 160, "semigroup_points": 10, "domination_pairs": 16384}},
))
register(Experiment(
    "POTENTIAL_SCHUR", "Potential kernel: spectral consistency, domination, Schur integrals", run_potential_schur,
    {"common": {"alpha_1d": 0.0, "betas": (0.5, 1.0, 2.0), "eigen_shift": 2.0, "tolerance": 1e-6,
                "domination_alpha": "0.5/1.5", "domination_box": 4.0, "max_level": 20},
     "smoke": {"y_values": (1.3,), "domination_pairs": 64, "schur_points": (0.5, 2.0)},
     "full": {"y_values": (0.4, 1.3, 3.0), "domination_pairs": 1024, "schur_points": (0.5, 2.0, 8.0, 20.0)}},
))
register(Experiment(
    "SHARPNESS", "Exceedance measures of the maximal Riesz mean on the shell", run_sharpness,
    {"common": {"dim": 2, "alpha": (0.0,), "p": 8.0, "lambda": 0.0, "lambda_offset": float("nan")},
     "smoke": {"mu_sequence": (16, 64), "radial_cells": 16, "angular_cells": 12},
     "full": {"mu_sequence": (64, 256, 1024), "radial_cells": 48, "angular_cells": 32}},
))
