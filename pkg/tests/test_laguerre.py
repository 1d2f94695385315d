import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import eval_genlaguerre, eval_hermite, gamma

from laguerre_lab.bessel import modified_bessel_I, modified_bessel_ive
from laguerre_lab.laguerre import (
    AlphaParam,
    EvalPoint,
    Regime,
    asymptotic_envelope,
    asymptotic_nu,
    classify_regime,
    generating_check,
    generating_tail_bound,
    laguerre_function_1d,
    laguerre_function_md,
    laguerre_function_table,
    laguerre_poly_explicit,
    laguerre_recurrence,
    normalized_laguerre,
    normalized_laguerre_table,
    operator_residual,
    oscillatory_approx,
)


# --- parameter types --------------------------------------------------------

@given(st.lists(st.floats(-0.5, 20.0), min_size=1, max_size=5))
def test_alpha_l1_is_sum(entries):
    a = AlphaParam.of(*entries)
    assert a.dim == len(entries)
    assert a.alpha_l1 == pytest.approx(math.fsum(entries), rel=1e-15, abs=1e-15)


def test_alpha_range_enforced():
    with pytest.raises(ValueError):
        AlphaParam.of(-0.7)
    assert AlphaParam.of(-0.7, extended=True).entries == (-0.7,)
    with pytest.raises(ValueError):
        AlphaParam.of(-1.0, extended=True)


@given(st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=4))
def test_eval_point_norms(coords):
    p = EvalPoint.of(*coords)
    assert p.norm ** 2 == pytest.approx(sum(c * c for c in coords), rel=1e-14)
    assert p.l1 == pytest.approx(sum(coords), rel=1e-14)


@pytest.mark.parametrize("coords", [(0.0,), (1.0, -2.0), (math.nan,)])
def test_eval_point_rejects_boundary(coords):
    with pytest.raises(ValueError):
        EvalPoint.of(*coords)


# --- polynomials ------------------------------------------------------------

def test_explicit_sum_examples():
    assert laguerre_poly_explicit(0, 0.7, 3.1) == 1.0
    assert laguerre_poly_explicit(1, 0.5, 2.0) == pytest.approx(-0.5, abs=1e-15)
    assert laguerre_poly_explicit(2, 0.0, 1.0) == pytest.approx(-0.5, abs=1e-15)


def test_recurrence_examples():
    np.testing.assert_array_equal(laguerre_recurrence(0, 0.3, 5.0), [1.0])
    np.testing.assert_allclose(laguerre_recurrence(2, 0.0, 1.0), [1.0, 0.0, -0.5], atol=1e-15)


def test_recurrence_against_extended_precision():
    vals = laguerre_recurrence(50, 1.5, 10.0)
    oracle = laguerre_poly_explicit(50, 1.5, 10.0, dps=80)
    assert vals[50] == pytest.approx(oracle, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 40), st.floats(-0.5, 6.0), st.floats(0.0, 30.0))
def test_recurrence_matches_scipy(n, a, x):
    ref = eval_genlaguerre(n, a, x)
    got = laguerre_recurrence(n, a, x)[n]
    scale = max(1.0, float(np.max(np.abs(laguerre_recurrence(n, a, x)))))
    assert abs(got - ref) <= 1e-9 * scale


# --- normalized functions ---------------------------------------------------

def test_normalized_examples():
    assert normalized_laguerre(0, 0.0, 0.0) == pytest.approx(1.0)
    assert normalized_laguerre(0, 2.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2.0), rel=1e-14)


def test_normalized_bulk_bound():
    n, a, x = 200, 1.0, 100.0
    nu = 4 * n + 2 * a + 2
    tag, bound = asymptotic_envelope(n, a, x)
    assert tag.regime is Regime.BULK
    assert abs(normalized_laguerre(n, a, x)) <= bound * (1 + 1e-12)
    assert bound == pytest.approx(asymptotic_envelope(n, a, x)[1])
    assert bound / (x * nu) ** -0.25 > 0


def test_normalized_large_degree_is_finite():
    vals, flag = normalized_laguerre(5000, 0.5, np.array([1.0, 1e4, 5e4]), return_flag=True)
    assert np.all(np.isfinite(vals))
    assert flag[2] and not flag[0]


def test_laguerre_function_examples():
    assert laguerre_function_1d(0, 0.5, 1.0) == pytest.approx(math.sqrt(2 / gamma(1.5)) * math.exp(-0.5), rel=1e-14)
    x = np.linspace(1e-6, 12.0, 20001)
    f = laguerre_function_table(3, 0.25, x)[3]
    assert np.trapezoid(f * f, x) == pytest.approx(1.0, abs=1e-8)


def test_half_type_is_hermite():
    # phi_n^{-1/2} is proportional to the Hermite function h_{2n} on x > 0
    xs = np.array([0.5, 1.0, 2.0])
    herm = eval_hermite(2, xs) * np.exp(-xs ** 2 / 2)
    ratio = laguerre_function_1d(1, -0.5, xs) / herm
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)


def test_md_is_product():
    a = AlphaParam.of(0.5, 0.5)
    one = laguerre_function_1d(0, 0.5, 1.0)
    assert laguerre_function_md((0, 0), a, EvalPoint.of(1.0, 1.0)) == pytest.approx(one ** 2, rel=1e-15)
    with pytest.raises(ValueError):
        laguerre_function_md((0, 0, 0), a, EvalPoint.of(1.0, 1.0))


def test_operator_eigen_relation():
    rng = np.random.default_rng(3)
    for a in (-0.5, 0.0, 1.3):
        for n in (0, 2, 5):
            x = rng.uniform(0.4, 3.0, 10)
            res, scale = operator_residual(n, a, x)
            assert np.max(np.abs(res)) <= 1e-4 * np.max(np.abs(scale))


# --- Bessel -----------------------------------------------------------------

def test_bessel_examples():
    assert modified_bessel_I(0.0, 0.0) == 1.0
    assert modified_bessel_I(1.5, 0.0) == 0.0
    assert modified_bessel_I(0.5, 1.0) == pytest.approx(math.sqrt(2 / math.pi) * math.sinh(1.0), rel=1e-14)


def test_bessel_growth_bound():
    z = np.array([0.1, 1.0, 10.0, 50.0])
    ratio = np.sqrt(z) * modified_bessel_ive(-0.5, z)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 1.0


# --- asymptotics ------------------------------------------------------------

def test_regime_examples():
    nu = asymptotic_nu(100, 0.0)
    tag, _ = asymptotic_envelope(100, 0.0, nu / 4)
    assert tag.regime is Regime.BULK
    assert classify_regime(0, 0.0, 10 * asymptotic_nu(0, 0.0)).regime is Regime.EXPONENTIAL_TAIL


def test_envelope_sweep():
    """10 degrees x 3 types x 50 points, all below the calibrated envelope."""
    for a in (-0.5, 0.0, 2.0):
        for n in np.unique(np.geomspace(1, 400, 10).astype(int)):
            nu = asymptotic_nu(n, a)
            xs = np.geomspace(1e-3, 3 * nu, 50)
            vals = np.abs(normalized_laguerre_table(n, a, xs)[n])
            bounds = np.array([asymptotic_envelope(n, a, float(x))[1] for x in xs])
            assert np.all(vals <= bounds)


def test_oscillatory_examples():
    n, a = 50, 0.0
    nu = asymptotic_nu(n, a)
    x = nu / 2
    approx = oscillatory_approx(n, a, x)
    assert abs(normalized_laguerre(n, a, x) - approx.main) <= approx.error_budget
    assert math.acos(math.sqrt(x / nu)) == pytest.approx(math.pi / 4)


def test_oscillatory_parity():
    a, frac = 0.0, 0.37
    signs = []
    for n in (40, 41):
        nu = asymptotic_nu(n, a)
        approx = oscillatory_approx(n, a, frac * nu)
        assert abs(normalized_laguerre(n, a, frac * nu) - approx.main) <= approx.error_budget
        signs.append(np.sign(approx.main) * (-1) ** n)
    # the (-1)^n factor carries the parity; the cosine part keeps its sign
    assert signs[0] == signs[1]


def test_oscillatory_window():
    with pytest.raises(ValueError):
        oscillatory_approx(10, 0.0, 0.5)


# --- generating function ----------------------------------------------------

@pytest.mark.parametrize(
    "a,x,t,N,tol",
    [(0.0, 0.0, 0.5, 40, 1e-9), (0.5, 1.0, 0.3, 60, 1e-10), (-0.5, 2.0, -0.5, 60, 1e-10)],
)
def test_generating_examples(a, x, t, N, tol):
    g = generating_check(a, x, t, N)
    assert abs(g.partial - g.closed) <= tol


def test_generating_closed_at_origin():
    assert generating_check(0.0, 0.0, 0.5, 40).closed == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 4.0), st.floats(0.0, 20.0), st.floats(-0.9, 0.9), st.integers(10, 60))
def test_generating_within_tail_bound(a, x, t, N):
    g = generating_check(a, x, t, N)
    bound = generating_tail_bound(a, x, t, N)
    assert abs(g.partial - g.closed) <= bound + 1e-12 * max(1.0, abs(g.closed))


def test_generating_rejects_divergent():
    with pytest.raises(ValueError):
        generating_check(0.0, 1.0, 1.0, 10)
