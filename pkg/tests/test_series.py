from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fatou2d.errors import NonUnitLeadingTerm, TruncationUnderflow
from fatou2d.series import FracSeries1, FracSeries2, TruncPoly2, binomial, poly_compose

small = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


def polys(order=5):
    keys = [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]
    return st.dictionaries(st.sampled_from(keys), small, max_size=6).map(
        lambda d: TruncPoly2(d, order))


def fseries(root=2, tm=8):
    return st.dictionaries(st.integers(0, tm), small, max_size=5).map(
        lambda d: FracSeries1(d, root, tm))


def test_binomial_exact():
    assert binomial(Fraction(-1, 2), 2) == Fraction(3, 8)
    assert binomial(-2, 2) == 3
    assert binomial(5, 7) == 0


@settings(max_examples=40, deadline=None)
@given(polys(), polys(), polys())
def test_poly_ring_laws(a, b, c):
    assert ((a * b) * c).allclose(a * (b * c), 1e-9)
    assert (a * (b + c)).allclose(a * b + a * c, 1e-9)
    assert (a + b - b).allclose(a, 1e-12)


@settings(max_examples=30, deadline=None)
@given(polys(4), st.complex_numbers(max_magnitude=0.5), st.complex_numbers(max_magnitude=0.5))
def test_poly_evaluation_is_a_homomorphism(a, x, y):
    b = TruncPoly2({(1, 1): 1, (0, 0): 2}, 4)
    full = a * b
    # the product is exact as long as no monomial is dropped
    if a.degree() + 2 <= 4:
        assert abs(full(x, y) - a(x, y) * b(x, y)) < 1e-9


def test_poly_truncation_drops_high_degree():
    x, y = TruncPoly2.x(3), TruncPoly2.y(3)
    p = (x + y) ** 4
    assert p.is_zero()
    assert ((x + y) ** 3)[(1, 2)] == 3


def test_compose_with_identity_and_known_map():
    order = 6
    x, y = TruncPoly2.x(order), TruncPoly2.y(order)
    f = (x + x * y, y + y * y + x * x)
    ident = (x, y)
    for a, b in zip(poly_compose(f, ident, order), f):
        assert a == b
    f2 = poly_compose(f, f, order)
    # second iterate, computed by hand through degree 2: (x + 2xy, y + 2y^2 + 2x^2)
    assert f2[0][(1, 1)] == 2 and f2[1][(0, 2)] == 2 and f2[1][(2, 0)] == 2
    # numerical agreement at a small point
    p = (0.01 + 0.002j, 0.02 - 0.001j)
    once = tuple(c(*p) for c in f)
    twice = tuple(c(*once) for c in f)
    assert abs(f2[0](*p) - twice[0]) < 1e-12
    assert abs(f2[1](*p) - twice[1]) < 1e-12


def test_compose_rejects_constant_inner_and_underflow():
    x, y = TruncPoly2.x(4), TruncPoly2.y(4)
    with pytest.raises(ValueError):
        poly_compose((x, y), (x + 1, y), 3)
    with pytest.raises(TruncationUnderflow):
        poly_compose((x, y), (x, y), 5)


@settings(max_examples=40, deadline=None)
@given(fseries(), fseries(3, 6))
def test_fracseries_mixed_roots_evaluate(a, b):
    z = 40.0 + 5j
    prod = a * b
    assert prod.base_root == 6
    ref = a(z) * b(z)
    # products keep every term below the truncation of the finer grid
    if a.max_m() * 3 + b.max_m() * 2 <= prod.trunc_m:
        assert abs(prod(z) - ref) <= 1e-9 * (1 + abs(ref))


@settings(max_examples=30, deadline=None)
@given(fseries(2, 12))
def test_fracpow_inverts(a):
    one_plus = FracSeries1.constant(1, 2, 12) + a.shift(1)
    r = one_plus.reciprocal()
    assert (r * one_plus).allclose(FracSeries1.constant(1, 2, 12), 1e-8)
    half = one_plus.fracpow(Fraction(1, 2))
    assert (half * half).allclose(one_plus, 1e-8)


def test_fracpow_requires_unit_and_truncation():
    with pytest.raises(NonUnitLeadingTerm):
        FracSeries1({0: 2, 1: 1}, 1, 4).fracpow(Fraction(1, 2))
    with pytest.raises(TruncationUnderflow):
        FracSeries1({0: 1, 1: 1}, 1).fracpow(Fraction(1, 2))
    # nonnegative integer powers of exact polynomials stay exact
    p = FracSeries1({0: 1, 1: 1}, 1) ** 3
    assert p.coeffs == {0: 1, 1: 3, 2: 3, 3: 1}


def test_fracseries_matches_mpmath_taylor():
    # (1 + z^(-1/2))^(-1/3) against a high-precision evaluation
    s = FracSeries1({0: 1, 1: 1}, 2, 20).fracpow(Fraction(-1, 3))
    z = 400.0
    mpmath.mp.dps = 30
    ref = (1 + mpmath.mpf(z) ** mpmath.mpf(-0.5)) ** (mpmath.mpf(-1) / 3)
    assert abs(s(z) - complex(ref)) < 1e-15


def test_mpmath_coefficients_pass_through():
    mpmath.mp.dps = 30
    a = FracSeries1({0: mpmath.mpf(1), 1: mpmath.mpf(1) / 3}, 1, 6)
    r = a.reciprocal()
    assert isinstance(r[2], (mpmath.mpf, mpmath.mpc))
    assert abs(r[2] - mpmath.mpf(1) / 9) < mpmath.mpf(10) ** -28


def test_fracseries2_product_and_reciprocal():
    inner = FracSeries1({0: 1, 1: 0.5}, 2, 8)
    a = FracSeries2({0: 1, 1: inner}, base_root_v=1, trunc_n=4, inner_root=2, inner_trunc=8)
    r = a.reciprocal()
    one = a * r
    assert one[0].allclose(FracSeries1.constant(1, 2, 8), 1e-12)
    for n in range(1, 5):
        assert one[n].allclose(FracSeries1({}, 2, 8), 1e-12)
    z, w = 50.0 + 1j, 300.0
    assert abs(a(z, w) * r(z, w) - 1) < 1e-9


def test_fracseries2_root_mismatch():
    a = FracSeries2({0: 1}, 1, 4, 2)
    b = FracSeries2({0: 1}, 2, 4, 2)
    with pytest.raises(ValueError):
        a + b
    with pytest.raises(NonUnitLeadingTerm):
        FracSeries2({0: 3}, 1, 4, 2).reciprocal()


def test_coefficient_array_dense():
    a = FracSeries1({0: 1, 3: 2j}, 2)
    assert np.allclose(a.coefficient_array(), [1, 0, 0, 2j])
