from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from critsos.parsing import parse_poly
from critsos.polyring import (
    PolyMatrix, Polynomial, add, differentiate, evaluate, format_rational, monomials_up_to, mul,
    poly_matrix_det, power, scale,
)

from conftest import MARSHALL, MOTZKIN
from oracles import leibniz_det

XYZ = ["x", "y", "z"]


def P(text, names=XYZ):
    return parse_poly(text, names)


# -- strategies -------------------------------------------------------------------

coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)
monos = st.tuples(*[st.integers(0, 3)] * 3)
polys = st.dictionaries(monos, coeffs, max_size=6).map(lambda t: Polynomial(t, 3))
points = st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=5)] * 3)


# -- examples -----------------------------------------------------------------------

def test_motzkin_parses_to_four_terms():
    m = parse_poly(MOTZKIN, ["x", "y"])
    assert len(m.terms) == 4
    assert m.coeff((2, 2)) == -3
    assert m.coeff((0, 0)) == 1


def test_zero_and_identity_parse():
    assert parse_poly("0", ["x"]).terms == {}
    assert parse_poly("(x+1)^2 - x^2 - 2*x", ["x"]) == Polynomial.constant(1, 1)


def test_decimals_are_exact():
    assert P("0.5*x").coeff((1, 0, 0)) == Fraction(1, 2)
    assert P("1e-3").constant_term() == Fraction(1, 1000)


def test_ring_operations():
    p, q = P("x + y"), P("x - y")
    assert mul(p, q) == P("x^2 - y^2")
    assert add(p, q) == P("2*x")
    assert scale(p, Fraction(1, 2)) == P("x/2 + y/2")
    assert power(p, 0) == Polynomial.constant(1, 3)
    assert power(p, 3) == p * p * p


def test_zero_coefficients_are_pruned():
    p = P("x + y") - P("y")
    assert p.terms == {(1, 0, 0): Fraction(1)}
    assert Polynomial({(1, 0, 0): 0}, 3).is_zero()


def test_mismatched_variable_counts_rejected():
    with pytest.raises(ValueError):
        add(P("x"), parse_poly("x", ["x"]))
    with pytest.raises(ValueError):
        mul(P("x"), parse_poly("x", ["x", "y"]))


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        power(P("x"), -1)


def test_derivatives():
    assert differentiate(P("x^4*y^2"), 0) == P("4*x^3*y^2")
    m = parse_poly(MOTZKIN, ["x", "y"])
    assert differentiate(m, 0) == parse_poly("4*x^3*y^2 + 2*x*y^4 - 6*x*y^2", ["x", "y"])
    f = parse_poly(MARSHALL, ["x"])
    assert differentiate(f, 0) == parse_poly("12*x*(x+1)^2", ["x"])


def test_evaluate_examples():
    m = parse_poly(MOTZKIN, ["x", "y"])
    assert evaluate(m, [1, 1]) == 0
    assert evaluate(P("3 + x*y - z^5"), [0, 0, 0]) == 3
    v = evaluate(P("x - y^2 - z^2"), [1, Fraction(1, 2), Fraction(1, 2)])
    assert v == Fraction(1, 2) and isinstance(v, Fraction)
    assert isinstance(evaluate(P("x"), [1.0, 0, 0]), float)
    with pytest.raises(ValueError):
        evaluate(P("x"), [1, 2])


def test_printing_is_graded_and_canonical():
    assert P("1 + z + y^2 - x^3").to_string(XYZ) == "-x^3 + y^2 + z + 1"
    assert str(P("-x")) == "-x"
    assert P("0").to_string(XYZ) == "0"
    assert P("x/3").to_string(XYZ) == "1/3*x"


def test_format_rational():
    assert format_rational(Fraction(-5, 4)) == "-1.25"
    assert format_rational(Fraction(1, 3)) == "1/3"
    assert format_rational(Fraction(7)) == "7"


def test_monomials_up_to_order():
    assert monomials_up_to(3, 1) == [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]


def test_exact_division():
    p, q = P("x^2 - y^2"), P("x + y")
    assert p.exact_div(q) == P("x - y")
    with pytest.raises(ArithmeticError):
        P("x^2 + 1").exact_div(P("x + y"))


# -- determinants -------------------------------------------------------------------

def test_det_examples():
    one = Polynomial.constant(1, 3)
    p = P("x*y + 3")
    assert poly_matrix_det(PolyMatrix.from_rows([[p]])) == p
    M = PolyMatrix.from_rows([[one, one], [one, P("1 + 4*y^2 + 4*z^2")]])
    assert poly_matrix_det(M) == P("4*y^2 + 4*z^2")
    r = [P("x"), P("y + 1"), P("z^2")]
    assert poly_matrix_det(PolyMatrix.from_rows([r, r, [P("1"), P("2"), P("x*z")]])).is_zero()


def test_det_requires_square():
    with pytest.raises(ValueError):
        poly_matrix_det(PolyMatrix(1, 2, [P("x"), P("y")]))


@given(st.integers(1, 5).flatmap(lambda k: st.lists(
    st.dictionaries(monos, st.integers(-3, 3), max_size=3).map(lambda t: Polynomial(t, 3)),
    min_size=k * k, max_size=k * k)))
def test_det_matches_leibniz(entries):
    # size 5 goes through fraction-free elimination, smaller sizes through cofactors
    k = int(round(len(entries) ** 0.5))
    rows = [entries[i * k:(i + 1) * k] for i in range(k)]
    assert poly_matrix_det(PolyMatrix.from_rows(rows)) == leibniz_det(rows)


# -- properties -------------------------------------------------------------------------

@given(polys, polys, points)
def test_evaluation_is_a_ring_homomorphism(p, q, v):
    assert evaluate(p + q, v) == evaluate(p, v) + evaluate(q, v)
    assert evaluate(p * q, v) == evaluate(p, v) * evaluate(q, v)


@given(polys, polys, st.integers(0, 2))
def test_product_rule(p, q, i):
    assert differentiate(p * q, i) == differentiate(p, i) * q + p * differentiate(q, i)


@given(polys)
def test_print_parse_round_trip(p):
    assert parse_poly(p.to_string(XYZ), XYZ) == p


@given(st.dictionaries(st.tuples(*[st.integers(0, 3)] * 3).filter(lambda m: sum(m) <= 3),
                       st.integers(-5, 5), max_size=8).map(lambda t: Polynomial(t, 3)),
       st.tuples(*[st.floats(-1, 1)] * 3), st.integers(0, 2))
def test_derivative_matches_central_difference(p, v, i):
    h = 1e-4
    up = list(v)
    dn = list(v)
    up[i] += h
    dn[i] -= h
    fd = (evaluate(p, up) - evaluate(p, dn)) / (2 * h)
    exact = evaluate(differentiate(p, i), [float(t) for t in v])
    scale_ = 1 + float(p.norm_1())
    assert abs(fd - exact) <= 1e-5 * scale_
