import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wfg.errors import ConfigError
from wfg.symbols import (
    ONE,
    XI,
    DilatedSymbol,
    NumericDerivative,
    SymbolExpr,
    X,
    differentiate_symbol,
    is_exact,
    japanese,
    parse_symbol,
    shubin_probe_h,
    shubin_seminorm_probe,
)

coord = st.floats(-3, 3)


@given(coord, coord)
def test_polynomial_algebra(x, xi):
    p = (X + 2 * XI) * (X - XI) + 3
    assert np.isclose(p.eval((x, xi)), (x + 2 * xi) * (x - xi) + 3)
    assert p.is_polynomial and p.degree() == 2
    assert (p - p).is_zero


@given(coord, coord)
def test_gaussian_and_bump_values(x, xi):
    g = SymbolExpr.gaussian((0.5, -0.5), (1.0, 2.0), coeff=2.0)
    assert np.isclose(g.eval((x, xi)), 2 * math.exp(-((x - 0.5) ** 2) - 2 * (xi + 0.5) ** 2))
    b = SymbolExpr.bump((0.0, 1.0), 2.0, p=3)
    q = 1 - (x * x + (xi - 1) ** 2) / 4
    assert np.isclose(b.eval((x, xi)), max(q, 0.0) ** 3)


def test_exact_derivatives_against_sympy():
    sp = pytest.importorskip("sympy")
    x, y = sp.symbols("x xi", real=True)
    a = (X * X * XI + 1) * SymbolExpr.gaussian((0.2, 0.1), (0.7, 1.3)) + SymbolExpr.bump((0.0, 0.0), 4.0, p=8) * XI
    ref = (x**2 * y + 1) * sp.exp(-sp.Rational(7, 10) * (x - sp.Rational(1, 5)) ** 2 - sp.Rational(13, 10) * (y - sp.Rational(1, 10)) ** 2)
    ref += (1 - (x**2 + y**2) / 16) ** 8 * y
    pts = np.random.default_rng(1).uniform(-3, 3, (10, 2))
    for alpha in [(1, 0), (0, 1), (2, 1), (1, 2), (3, 3)]:
        da = differentiate_symbol(a, alpha)
        assert is_exact(da)
        f = sp.lambdify((x, y), sp.diff(ref, x, alpha[0], y, alpha[1]), "numpy")
        got = da(pts[:, 0], pts[:, 1])
        assert np.allclose(got, f(pts[:, 0], pts[:, 1]), rtol=1e-12, atol=1e-12)


@given(coord, coord)
def test_first_derivative_against_finite_differences(x, xi):
    a = (X * X * XI + 1) * SymbolExpr.gaussian((0.2, 0.1), (0.7, 1.3))
    for alpha in [(1, 0), (0, 1)]:
        da = differentiate_symbol(a, alpha)
        assert np.isclose(da.eval((x, xi)), NumericDerivative(a, alpha).eval((x, xi)), rtol=1e-7, atol=1e-8)


def test_derivative_falls_back_past_taper_order():
    b = SymbolExpr.bump((0.0, 0.0), 1.0, p=3)
    d1 = differentiate_symbol(b, (1, 0))
    assert isinstance(d1, SymbolExpr)
    d2 = differentiate_symbol(b, (2, 0))
    assert isinstance(d2, NumericDerivative) and not is_exact(d2)
    # d^2/dx^2 (1 - x^2)^3 at x = 0.3: 6 (1 - x^2)(5 x^2 - 1)
    assert np.isclose(d2.eval((0.3, 0.0)), 6 * (1 - 0.09) * (5 * 0.09 - 1), rtol=1e-6)


@given(st.floats(0.05, 1.0), coord, coord)
def test_dilation(h, x, xi):
    a = SymbolExpr.bump((0.5, 0.2), 1.0) + X * XI + SymbolExpr.gaussian((0.0, 1.0), (1.0, 1.0))
    ah = DilatedSymbol(a, h)
    m = ah.materialize()
    assert np.isclose(ah.eval((x, xi)), a.eval((h * x, h * xi)))
    assert np.isclose(m.eval((x, xi)), a.eval((h * x, h * xi)))


def test_support_box():
    b = SymbolExpr.bump((1.0, 2.0), 0.5)
    assert b.support_box() == [(0.5, 1.5), (1.5, 2.5)]
    assert DilatedSymbol(b, 0.5).support_box() == [(1.0, 3.0), (3.0, 5.0)]
    assert (b + X).support_box() is None
    assert (b * X).support_box() == b.support_box()


def test_parse_round_trip():
    a = SymbolExpr.bump((0.0, 1.0), 0.5, p=6, coeff=2 - 1j) + X * XI
    back = parse_symbol(a.to_list())
    for z in [(0.1, 0.9), (2.0, -1.0)]:
        assert np.isclose(back.eval(z), a.eval(z))
    assert parse_symbol({"terms": X.to_list(), "order": 3}).declared_order == 3


@pytest.mark.parametrize(
    "bad",
    [[], [{"powers": [1]}], [{"powers": [1, 0]}, {"powers": [1, 0, 0, 0]}], [{"powers": [0, 0], "bump": {"center": [0, 0], "radius": -1}}]],
)
def test_parse_rejects(bad):
    with pytest.raises(ConfigError):
        parse_symbol(bad)


def test_japanese_and_probes():
    assert japanese(3.0, 4.0) == math.sqrt(26.0)
    grid = np.meshgrid(np.linspace(-50, 50, 201), np.linspace(-50, 50, 201))
    # x xi is order 2: the weighted sup stays bounded (= 1/2 at |x| = |xi|, large radius)
    assert shubin_seminorm_probe(X * XI, 2.0, (0, 0), grid) <= 0.5 + 1e-12
    # and ~ |z|^{-1} below order 2 when weighted as order 1
    assert shubin_seminorm_probe(X * XI, 1.0, (0, 0), grid) > 20
    # bumps are order -inf: the h-uniform probe of a_h is bounded
    b = SymbolExpr.bump((1.0, 0.0), 0.5, p=8)
    v = shubin_probe_h(b, 0.0, (1, 0), grid, [1.0, 0.5, 0.25])
    assert math.isfinite(v) and v > 0


def test_shorthands():
    assert ONE.eval((5.0, 5.0)) == 1
    assert X.eval((2.0, 3.0)) == 2 and XI.eval((2.0, 3.0)) == 3
    with pytest.raises(ConfigError):
        X + SymbolExpr.constant(1.0, d=2)
    with pytest.raises(ValueError):
        X(1.0)
