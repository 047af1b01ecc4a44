from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralweyl.kernels import (DiagKernel, DolbeaultModel, ParseError, Poly, RegimeError,
                                format_kernel, parse_kernel, zero_mode_model)


def test_pole_order_parse():
    k = parse_kernel("1/(z1-z2)^2")
    assert k.pole_order(0, 1) == 2
    assert k.n == 2


def test_evaluate_matches_closed_form():
    k = parse_kernel("z1^2*z2/(z1-z2)^3", 2)
    x, y = Fraction(3), Fraction(1, 2)
    assert k.evaluate((x, y)) == x ** 2 * y / (x - y) ** 3


def test_cancellation_is_canonical():
    k = parse_kernel("(z1-z2)^2/(z1-z2)^3", 2)
    assert k == DiagKernel.diff(2, 0, 1, -1)
    assert (DiagKernel.var(2, 0) - DiagKernel.var(2, 1)) * DiagKernel.diff(2, 0, 1, -1) == DiagKernel.const(2, 1)


def test_derivative_of_pole():
    k = DiagKernel.diff(2, 0, 1, -1)
    assert k.deriv(0) == DiagKernel.diff(2, 0, 1, -2).scale(-1)
    assert k.deriv(1) == DiagKernel.diff(2, 0, 1, -2)


def test_three_point_partial_fractions_agree_numerically():
    k = parse_kernel("1/((z1-z2)*(z2-z3)*(z1-z3))", 3)
    pt = (Fraction(2), Fraction(-1, 3), Fraction(5, 7))
    a, b, c = pt
    assert k.evaluate(pt) == 1 / ((a - b) * (b - c) * (a - c))


def test_parse_errors_have_positions():
    with pytest.raises(ParseError) as e:
        parse_kernel("1/(z1-z2))")
    assert "column" in str(e.value)
    with pytest.raises(ParseError):
        parse_kernel("1/(z1 $ z2)")


def test_mixed_regime_rejected():
    a = DiagKernel.const(2, 1)
    b = DiagKernel.const(2, 1.5, regime="float")
    with pytest.raises(RegimeError):
        a + b


exps = st.tuples(st.integers(0, 2), st.integers(0, 2))
coef = st.fractions(min_value=-5, max_value=5, max_denominator=4).filter(bool)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(exps, coef, min_size=1, max_size=4), st.integers(0, 3))
def test_format_parse_round_trip(terms, pole):
    k = DiagKernel(Poly(2, terms)) * DiagKernel.diff(2, 0, 1, -pole)
    assert parse_kernel(format_kernel(k), 2) == k


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(exps, coef, min_size=1, max_size=3), st.integers(0, 3),
       st.dictionaries(exps, coef, min_size=1, max_size=3), st.integers(0, 3))
def test_leibniz_for_deriv(t1, p1, t2, p2):
    a = DiagKernel(Poly(2, t1)) * DiagKernel.diff(2, 0, 1, -p1)
    b = DiagKernel(Poly(2, t2)) * DiagKernel.diff(2, 0, 1, -p2)
    assert (a * b).deriv(0) == a.deriv(0) * b + a * b.deriv(0)


def test_dolbeault_exact_forms_reduce_to_zero():
    model, I1, I2 = zero_mode_model([[1, 0], [0, 2]])
    P = model.sym("P@12")
    x = model.mul(P, model.sym("e1_1@1"))
    assert model.reduce(model.apply_dbar(x)) == {}
    # a closed non-exact top form survives
    top = model.mul(model.sym("e1_1@1"), model.sym("e1_2@2"))
    assert model.reduce(top) == top


def test_dolbeault_graded_leibniz():
    m = DolbeaultModel()
    m.add_symbol("u", 1, closed=True)
    m.add_symbol("g", 0, rule=m.sym("u"))
    m.add_symbol("v", 1, closed=True)
    m.add_symbol("h", 0, rule=m.sym("v"))
    gv = m.mul(m.sym("g"), m.sym("v"))
    # dbar(g v) = u v
    assert m.apply_dbar(gv) == m.mul(m.sym("u"), m.sym("v"))
    vg = m.mul(m.sym("v"), m.sym("g"))
    # dbar(v g) = -v u = u v
    assert m.apply_dbar(vg) == m.mul(m.sym("u"), m.sym("v"))
    assert m.apply_dbar(m.apply_dbar(m.mul(m.sym("g"), m.sym("h")))) == {}
