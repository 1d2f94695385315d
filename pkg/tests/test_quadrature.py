import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln, roots_genlaguerre

from laguerre_lab.laguerre import AlphaParam, laguerre_function_table
from laguerre_lab.quadrature import (
    GridFunction,
    RuleKind,
    build_rule,
    dump_rule,
    gauss_genlaguerre_abscissae,
    inner_product,
    load_rule,
    nq_norm,
    rule_for_alpha,
    tanh_sinh,
    weighted_norm,
)


def test_abscissae_match_scipy():
    for rho in (-0.5, 0.0, 2.5):
        ref, _ = roots_genlaguerre(40, rho)
        np.testing.assert_allclose(gauss_genlaguerre_abscissae(40, rho), ref, rtol=1e-12)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 1.5])
def test_gaussian_moments(rho):
    # int_0^inf x^{2 rho + 1 + 2m} e^{-x^2} dx = Gamma(rho + 1 + m) / 2
    rule = build_rule(RuleKind.GAUSS_GENLAGUERRE_SQUARED, 24, 1, rho=rho)
    x = rule.nodes[:, 0]
    for m in range(0, 20):
        got = rule.integrate(x ** (2 * rho + 1 + 2 * m) * np.exp(-x * x))
        ref = math.exp(gammaln(rho + 1 + m)) / 2
        assert got == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("alpha", [(-0.5,), (0.0,), (1.0,), (0.5, 1.5)])
def test_orthonormality_exact(alpha):
    a = AlphaParam.of(*alpha)
    N = 20
    rule = rule_for_alpha(a, N)
    tables = [laguerre_function_table(N, a.entries[i], rule.axes[i].nodes) for i in range(a.dim)]
    for i in range(a.dim):
        gram = (tables[i] * rule.axes[i].weights) @ tables[i].T
        assert np.max(np.abs(gram - np.eye(N + 1))) < 1e-12


def test_rule_for_alpha_order_floor():
    with pytest.raises(ValueError):
        rule_for_alpha(AlphaParam.of(0.0), 20, order=40)
    assert rule_for_alpha(AlphaParam.of(0.0), 20).order == 56


def test_weights_positive_and_nodes_interior():
    for kind in RuleKind:
        rule = build_rule(kind, 32, 2, scale=5.0)
        assert np.all(rule.weights > 0)
        assert np.all(rule.nodes > 0)
        assert rule.size == len(rule.weights)


def test_high_order_weights_do_not_underflow():
    rule = build_rule(RuleKind.GAUSS_GENLAGUERRE_SQUARED, 600, 1, rho=0.0)
    assert np.all(rule.weights > 0) and np.all(np.isfinite(rule.weights))


def test_tanh_sinh_integrates_endpoint_singularity():
    x, w, da, _ = tanh_sinh(0.0, 1.0, 60)
    assert np.sum(w * da ** -0.5) == pytest.approx(2.0, rel=1e-10)
    assert np.all((x > 0) & (x < 1))


def test_uniform_box_volume():
    rule = build_rule(RuleKind.UNIFORM_BOX, 10, 3, scale=2.0)
    assert rule.integrate(np.ones(rule.size)) == pytest.approx(8.0)


def test_grid_function_shape_and_rules():
    rule = build_rule(RuleKind.UNIFORM_BOX, 8, 1, scale=1.0)
    other = build_rule(RuleKind.UNIFORM_BOX, 8, 1, scale=1.0)
    f = GridFunction.sample(rule, lambda x: x[:, 0])
    with pytest.raises(ValueError):
        GridFunction(rule, np.zeros(3))
    with pytest.raises(ValueError):
        inner_product(f, GridFunction(other, f.values))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=5), min_size=16, max_size=16),
       st.lists(st.complex_numbers(max_magnitude=5), min_size=16, max_size=16))
def test_inner_product_hermitian(fv, gv):
    rule = build_rule(RuleKind.UNIFORM_BOX, 16, 1, scale=3.0)
    f, g = GridFunction(rule, np.array(fv)), GridFunction(rule, np.array(gv))
    assert inner_product(f, g) == pytest.approx(np.conj(inner_product(g, f)), abs=1e-9)
    assert inner_product(f, f).real >= -1e-12


def test_weighted_norm_examples():
    rule = rule_for_alpha(AlphaParam.of(0.0), 8)
    f = GridFunction(rule, laguerre_function_table(8, 0.0, rule.nodes[:, 0])[0])
    assert weighted_norm(f, 0.0) == pytest.approx(1.0, rel=1e-13)
    assert weighted_norm(f, 2.0) < 1.0
    with pytest.raises(ValueError):
        weighted_norm(f, -1.0)


def test_nq_norm_examples():
    assert nq_norm(lambda s: np.ones_like(s), 4, 2.0) == pytest.approx(1.0)
    # F(s) = s: the sup on cell j is (j + 1) / N^2
    N, q = 3, 4.0
    cells = N * N
    ref = (np.mean(((np.arange(cells) + 1) / cells) ** q)) ** (1 / q)
    assert nq_norm(lambda s: s, N, q) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        nq_norm(lambda s: s, 2, 1.5)


@given(st.integers(1, 6), st.floats(2.0, 8.0))
def test_nq_norm_dominates_mean(N, q):
    F = lambda s: np.sin(7 * s) + 0.5
    grid = np.linspace(0, 1, 2001)
    assert nq_norm(F, N, q) >= np.mean(np.abs(F(grid)) ** q) ** (1 / q) - 1e-12


@pytest.mark.parametrize("kind", list(RuleKind))
def test_rule_round_trip(kind):
    rule = build_rule(kind, 12, 2, scale=3.0, rho=(0.5, 1.5))
    back = load_rule(dump_rule(rule))
    np.testing.assert_array_equal(back.nodes, rule.nodes)
    np.testing.assert_array_equal(back.weights, rule.weights)
    assert back.kind is rule.kind and back.order == rule.order
    assert back.rho == rule.rho and back.domain_cap == rule.domain_cap


def test_rule_version_rejected():
    text = dump_rule(build_rule(RuleKind.UNIFORM_BOX, 4, 1)).replace("rule v1", "rule v9")
    with pytest.raises(ValueError):
        load_rule(text)
