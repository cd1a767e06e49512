import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goldenrenorm.errors import CriticalCenter, DomainEscape, NonFiniteInput
from goldenrenorm.series import (
    Series1, Series2, compose1, compose2, partial_y, revert_about, use_extended,
)

cplx = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


def coeff_lists(n=10, scale=1.0):
    return st.lists(cplx, min_size=n + 1, max_size=n + 1).map(
        lambda c: np.array(c) * scale * 0.5 ** np.arange(len(c)))


def test_compose_polynomial_identity():
    f = Series1([0, 0, 1], radius=2.0)
    g = Series1.affine(1, 1, 2, radius=0.5)
    assert np.allclose(compose1(f, g).coeffs, [1, 2, 1])


def test_compose_with_identity_returns_f():
    f = Series1(np.arange(1, 9) / 10.0, radius=1.0)
    g = Series1.identity(7, radius=1.0)
    assert np.allclose(compose1(f, g).coeffs, f.coeffs, atol=1e-15)


def test_geometric_series_at_half():
    f = Series1(np.ones(9), radius=1.0)
    g = Series1.affine(0.5, 0, 8, radius=1.0)
    h = compose1(f, g)
    assert np.allclose(h.coeffs, 0.5 ** np.arange(9), atol=1e-15)
    x = np.linspace(-0.9, 0.9, 7)
    assert np.max(np.abs(h(x) - 1 / (1 - x / 2))) < 2.0 ** -9


def test_compose_domain_escape():
    f = Series1(np.ones(5), radius=0.5)
    g = Series1.affine(2.0, 0, 4, radius=1.0)
    with pytest.raises(DomainEscape):
        compose1(f, g)


def test_revert_identity_and_quadratic():
    g = revert_about(Series1.identity(12, radius=1.0), 0.0)
    assert np.allclose(g.coeffs[:2], [0, 1]) and np.max(np.abs(g.coeffs[2:])) < 1e-14
    f = Series1([0, 2, 1] + [0] * 18, radius=0.4)
    g = revert_about(f, 0.0)
    assert abs(g.deriv()(0.0) - 0.5) < 1e-14
    x = 0.1 * np.exp(2j * np.pi * np.arange(16) / 16)
    assert np.max(np.abs(f(g(x)) - x)) < 1e-12


def test_revert_at_critical_point():
    with pytest.raises(CriticalCenter):
        revert_about(Series1([0, 0, 1], radius=1.0), 0.0)


def test_arithmetic_examples():
    f = Series1([1, 0, 1])
    assert abs(f(1j)) < 1e-15
    assert np.allclose(Series1([0, 0, 0, 1]).deriv().coeffs, [0, 0, 3])
    assert np.all((f * Series1.zero(2)).coeffs == 0)


def test_partial_y_examples():
    deg = (6, 4)
    xy = Series2.from_polynomial(np.array([[0, 0], [0, 1]]), deg)
    assert np.allclose(partial_y(xy).coeffs[1, 0], 1)
    assert np.count_nonzero(np.abs(partial_y(xy).coeffs) > 1e-15) == 1
    x2 = Series2.from_polynomial(np.array([[0], [0], [1]]), deg)
    assert np.all(partial_y(x2).coeffs == 0)


def test_partial_y_finite_difference():
    rng = np.random.default_rng(5)
    poly = np.zeros((5, 3), dtype=complex)
    poly[:4, 2] = rng.normal(size=4) + 1j * rng.normal(size=4)  # y^2 alpha(x)
    F = Series2.from_polynomial(poly, (8, 4), radii=(1.0, 1.0))
    dF = F.partial_y()
    x = rng.uniform(-0.5, 0.5, 5) + 0j
    y = rng.uniform(-0.5, 0.5, 5) + 0j
    h = 1e-5
    fd = (F(x, y + h) - F(x, y - h)) / (2 * h)
    assert np.max(np.abs(fd - dF(x, y)) / np.abs(dF(x, y))) < 1e-8


def test_non_finite_rejected():
    with pytest.raises(NonFiniteInput):
        Series1([1, np.nan])
    with pytest.raises(ValueError):
        Series1([1, 2], radius=0.0)


def test_json_round_trip_exact():
    f = Series1(np.exp(1j * np.arange(7)) / 3, radius=0.7, center=0.2 - 0.1j)
    g = Series1.from_json(json.loads(json.dumps(f.to_json())))
    assert np.array_equal(f.coeffs, g.coeffs) and g.center == f.center and g.radius == f.radius
    data = f.to_json()
    assert {"coeffs", "radius", "degree"} <= set(data)
    F = Series2(np.outer(np.arange(4), np.arange(3)) + 1j, radii=(0.5, 0.3))
    G = Series2.from_json(json.loads(json.dumps(F.to_json())))
    assert np.array_equal(F.coeffs, G.coeffs)


def test_extended_precision_agrees():
    use_extended()
    f = Series1(0.5 ** np.arange(8), radius=1.0)
    g = Series1.affine(0.3, 0.1, 7, radius=1.0)
    a = compose1(f, g)
    b = compose1(f.to_extended(), g.to_extended())
    assert b.extended
    assert np.max(np.abs(a.coeffs - b.to_double().coeffs)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(coeff_lists(), coeff_lists(scale=0.3), coeff_lists(scale=0.3))
def test_compose_associative(fc, gc, hc):
    # inner maps fix 0, so truncated composition is exact jet arithmetic
    gc[0] = hc[0] = 0
    f = Series1(fc, radius=1.0)
    g = Series1(gc, radius=1.0)
    h = Series1(hc, radius=1.0)
    lhs = compose1(f, compose1(g, h))
    rhs = compose1(compose1(f, g), h)
    assert lhs.distance(rhs) <= 1e-12 * max(f.norm(), 1.0)


def _cubic(c, degree=10):
    out = np.zeros(degree + 1, dtype=complex)
    out[:4] = c
    return out


@settings(max_examples=30, deadline=None)
@given(st.lists(cplx, min_size=4, max_size=4), st.lists(cplx, min_size=4, max_size=4),
       st.lists(cplx, min_size=20, max_size=20))
def test_compose_matches_pointwise(fc, gc, pts):
    f = Series1(_cubic(fc), radius=1.0)
    g = Series1(_cubic(np.array(gc) * [0.2, 0.2, 0.05, 0.05]), radius=1.0)
    x = 0.5 * np.array(pts)
    assert np.max(np.abs(compose1(f, g)(x) - f(g(x)))) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(min_magnitude=0.5, max_magnitude=2.0), coeff_lists(n=12, scale=0.2))
def test_revert_then_compose_is_identity(slope, rest):
    c = np.array(rest)
    c[0], c[1] = 0, slope
    f = Series1(c, radius=0.5)
    g = revert_about(f, 0.0)
    x = 0.5 * g.radius * np.exp(2j * np.pi * np.arange(24) / 24)
    assert np.max(np.abs(f(g(x)) - x)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.lists(cplx, min_size=12, max_size=12))
def test_compose2_matches_pointwise(vals):
    v = np.array(vals)
    deg = (8, 4)
    poly = np.array([[v[0], 0.5], [0.3, 0.2 * v[1]], [0.25, 0]])
    F = Series2.from_polynomial(poly, deg)
    G1 = Series2.from_polynomial(np.array([[0.1 * v[1], 0.2], [0.3, 0]]), deg)
    G2 = Series2.from_polynomial(np.array([[0.1 * v[2], 0], [0.2 * v[3], 0]]), deg)
    H = compose2(F, G1, G2)
    x, y = 0.3 * v[4:8], 0.3 * v[8:12]
    assert np.max(np.abs(H(x, y) - F(G1(x, y), G2(x, y)))) < 1e-10
