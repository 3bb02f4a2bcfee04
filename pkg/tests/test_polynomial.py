from fractions import Fraction

from hypothesis import given, strategies as st

from heatchain.polynomial import Poly

N = 3
coef = st.fractions(min_value=-5, max_value=5, max_denominator=7)
expo = st.tuples(*[st.integers(0, 2)] * N)
polys = st.dictionaries(expo, coef, max_size=5).map(lambda t: Poly(N, t))
points = st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=5)] * N)


def test_constructors_and_evaluation():
    x = Poly.var(2, 0)
    y = Poly.var(2, 1)
    p = x * x * 3 + y - Poly.const(2, Fraction(1, 2))
    assert p((Fraction(1, 3), 2)) == Fraction(1, 3) + 2 - Fraction(1, 2)
    assert p.degree == 2
    assert Poly.univariate([1, 0, 2], x + y) == Poly.const(2, 1) + (x + y) * (x + y) * 2
    assert Poly(2).is_zero() and Poly(2).degree == -1


def test_diff_and_bits():
    x = Poly.var(1, 0)
    p = x * x * x * Fraction(1, 4)
    assert p.diff(0) == x * x * Fraction(3, 4)
    assert p.max_bits() == 3


@given(polys, polys, points)
def test_ring_homomorphism(p, q, pt):
    assert (p + q)(pt) == p(pt) + q(pt)
    assert (p * q)(pt) == p(pt) * q(pt)
    assert (p - p).is_zero()


@given(polys, polys)
def test_leibniz_rule(p, q):
    for i in range(N):
        assert (p * q).diff(i) == p.diff(i) * q + p * q.diff(i)


@given(polys)
def test_mixed_partials_commute(p):
    assert p.diff(0).diff(1) == p.diff(1).diff(0)
