import math
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pconvex.polycore import (
    DimensionMismatch,
    ParseError,
    Polynomial,
    parse,
    shift_integer_coefficients,
)


def q_form(d):
    return parse(" - ".join(["x1^2"] + [f"x{j}^2" for j in range(2, d + 1)]), d)


# ---------------------------------------------------------------------------
# hand-computed values
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("d", [3, 4, 5])
def test_q_values(d):
    q = q_form(d)
    e_d = [0] * (d - 1) + [1]
    assert q.evaluate(e_d) == -1
    xi = [1, 1] + [0] * (d - 2)
    assert q.evaluate(xi) == 0
    assert [g.evaluate(xi) for g in q.gradient()] == [2, -2] + [0] * (d - 2)


def test_parse_basic():
    assert parse("0", 3).is_zero()
    assert parse("(x1+x2)^2", 2) == parse("x1^2 + 2*x1*x2 + x2^2", 2)
    assert parse("x1*x2/3 - 1/2", 2).coefficient((1, 1)) == Fraction(1, 3)
    assert parse("-x1", 1).coefficient((1,)) == -1


@pytest.mark.parametrize("text", ["x1 +* 2", "x1^", "2/0", "x1/x2", "(x1", "x1^-1", ""])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse(text, 2)


def test_parse_dimension():
    with pytest.raises(DimensionMismatch):
        parse("x4", 3)


def test_evaluate_wrong_length():
    with pytest.raises(DimensionMismatch, match="point has 2 coordinates"):
        q_form(3).evaluate((1, 2))


def test_derivative_examples():
    q = q_form(3)
    assert q.derivative((0, 0, 1)) == parse("-2*x3", 3)
    assert q.derivative((2, 0, 0)) == Polynomial.constant(3, 2)
    assert q.derivative((3, 0, 0)).is_zero()


def test_taylor_shift_example():
    q = q_form(3)
    s = q.taylor_shift((5, 5, 0))
    assert s.coefficient((1, 0, 0)) == 10
    assert s.coefficient((0, 1, 0)) == -10
    assert s.coefficient((0, 0, 0)) == 0


def test_homogeneity_and_principal_part():
    q = q_form(3)
    p = q ** 4 + parse("(x1^2+x2^2+x3^2)^3", 3)
    assert q.is_homogeneous() == 2
    assert p.is_homogeneous() is None
    assert Polynomial.constant(3, 0).is_homogeneous() == 0
    assert p.principal_part() == q ** 4


def test_augment_and_format():
    q = q_form(3)
    qa = q.augment(1)
    assert qa.dim == 4
    assert qa.evaluate((1, 2, 3, 99)) == q.evaluate((1, 2, 3))
    assert parse(q.format(), 3) == q


def test_shift_integer_coefficients_matches_taylor_shift():
    p = parse("x1^3/2 - 3*x1*x2 + 1/3", 2)
    xi = (Fraction(1, 2), 3)
    nums, den = shift_integer_coefficients(p, xi)
    shifted = p.taylor_shift(xi)
    assert {a: Fraction(v, den) for a, v in nums.items() if v} == dict(shifted.terms)


# ---------------------------------------------------------------------------
# properties
# ---------------------------------------------------------------------------

small = st.integers(min_value=-3, max_value=3)


@st.composite
def polynomials(draw, dim=2, max_deg=4, max_terms=5):
    n = draw(st.integers(min_value=0, max_value=max_terms))
    terms = {}
    for _ in range(n):
        alpha = tuple(draw(st.lists(st.integers(0, max_deg), min_size=dim, max_size=dim)))
        if sum(alpha) > max_deg:
            continue
        terms[alpha] = Fraction(draw(small), draw(st.integers(1, 3)))
    return Polynomial(dim, terms)


points = st.tuples(small, small)


@settings(max_examples=60, deadline=None)
@given(polynomials(), points, points)
def test_taylor_expansion_identity(p, xi, x):
    # P(xi + x) = sum_alpha P^(alpha)(xi) x^alpha / alpha!
    total = Fraction(0)
    for alpha in product(range(p.degree + 1 if not p.is_zero() else 1), repeat=2):
        c = p.derivative(alpha).evaluate(xi)
        if c:
            total += c * x[0] ** alpha[0] * x[1] ** alpha[1] / (math.factorial(alpha[0]) * math.factorial(alpha[1]))
    assert total == p.evaluate((xi[0] + x[0], xi[1] + x[1]))
    assert p.taylor_shift(xi).evaluate(x) == total


@settings(max_examples=60, deadline=None)
@given(polynomials(), points, points)
def test_shift_group_law(p, a, b):
    ab = (a[0] + b[0], a[1] + b[1])
    assert p.taylor_shift(a).taylor_shift(b) == p.taylor_shift(ab)


@settings(max_examples=60, deadline=None)
@given(polynomials(), points, st.integers(-4, 4))
def test_principal_part_scaling(p, x, lam):
    assume(not p.is_zero())
    pm = p.principal_part()
    m = pm.is_homogeneous()
    assert m is not None
    assert pm.evaluate((lam * x[0], lam * x[1])) == Fraction(lam) ** m * pm.evaluate(x)


@settings(max_examples=40, deadline=None)
@given(polynomials(), polynomials())
def test_principal_part_of_product(p, q):
    assume(not p.is_zero() and not q.is_zero())
    assert (p * q).principal_part() == p.principal_part() * q.principal_part()


@settings(max_examples=40, deadline=None)
@given(polynomials(), points, small)
def test_augment_independent_of_new_variable(p, x, s):
    assert p.augment(1).evaluate((x[0], x[1], s)) == p.evaluate(x)
    assert p.augment(1).derivative((0, 0, 1)).is_zero()


@settings(max_examples=60, deadline=None)
@given(polynomials())
def test_format_round_trip(p):
    assert parse(p.format(), 2) == p


@settings(max_examples=40, deadline=None)
@given(polynomials(), polynomials(), points)
def test_ring_homomorphism(p, q, x):
    assert (p + q).evaluate(x) == p.evaluate(x) + q.evaluate(x)
    assert (p * q).evaluate(x) == p.evaluate(x) * q.evaluate(x)


def test_zero_has_no_principal_part():
    with pytest.raises(ValueError):
        Polynomial.constant(2, 0).principal_part()
