import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralweyl import checks
from chiralweyl.bv import (BVError, BVPolynomial, HarmonicBackground, bv_bracket, bv_exp,
                           bv_laplacian, check_qme, format_bv, parse_bv)
from chiralweyl.kernels import ParseError

BG = HarmonicBackground([[2, 1, 0], [-1, 1, 3], [1, 0, 1]])


def polys(m=3, odd_min=0, parity=None):
    mono = st.tuples(st.tuples(*[st.integers(0, 2)] * m),
                     st.sets(st.integers(0, m - 1), min_size=odd_min).map(lambda s: tuple(sorted(s))))
    if parity is not None:
        mono = mono.filter(lambda k: len(k[1]) % 2 == parity)
    coeff = st.fractions(min_value=-3, max_value=3, max_denominator=2).filter(bool)
    return st.dictionaries(mono, coeff, min_size=1, max_size=4).map(lambda d: BVPolynomial(m, d))


def test_laplacian_uses_inverse_pairing():
    # Delta(e0_i e1_j) is the (i, j) entry of the inverse pairing, also for non-symmetric pairings
    bg = HarmonicBackground([[1, 2], [0, 1]])
    assert bv_laplacian(parse_bv("e0_1 e1_2"), bg) == BVPolynomial.const(2, -2)
    assert bv_laplacian(parse_bv("e0_2 e1_1"), bg).is_zero()
    assert bv_laplacian(parse_bv("e0_1 e1_1", 2), bg) == BVPolynomial.const(2, 1)


def test_laplacian_on_quadratic_even_power():
    bg = HarmonicBackground([[1]])
    # d/de0 d/de1 (e0^3 e1) = 3 e0^2
    assert bv_laplacian(parse_bv("e0_1^3 e1_1"), bg) == parse_bv("3 e0_1^2")


def test_delta_squared_all_monomials():
    for ev in product(range(3), repeat=3):
        for mask in range(8):
            od = tuple(j for j in range(3) if mask >> j & 1)
            p = BVPolynomial(3, {(ev, od): 1})
            assert bv_laplacian(bv_laplacian(p, BG), BG).is_zero()


@settings(max_examples=60, deadline=None)
@given(polys(parity=0), polys(parity=1), polys())
def test_bracket_is_a_derivation(a, b, c):
    for x, y in ((a, b), (b, a)):
        lhs = bv_bracket(x, y * c, BG)
        rhs = bv_bracket(x, y, BG) * c + (y * bv_bracket(x, c, BG)).scale((-1) ** ((x.parity() + 1) * y.parity()))
        assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(polys(odd_min=2, parity=0))
def test_two_forms_of_master_equation_agree(I):
    r = check_qme(I, BG)
    assert r["agree"]


def test_master_equation_solutions():
    bg = HarmonicBackground([[1, 0], [0, 1]])
    assert check_qme(parse_bv("e1_1 e1_2"), bg)["exp_form"]
    r = check_qme(parse_bv("e0_1 e1_1 e1_2"), bg)
    assert not r["exp_form"] and not r["master_form"]


def test_exp_truncates():
    m = 2
    I = parse_bv("e1_1 e1_2 + e0_1 e1_1", m)
    e = bv_exp(I)
    assert e == BVPolynomial.const(m) + I   # I^2 = 0 here
    with pytest.raises(BVError):
        bv_exp(parse_bv("e0_1 + e1_1"))
    with pytest.raises(BVError):
        bv_exp(parse_bv("1 + e1_1"))


def test_suite():
    r = checks.bv_suite()
    assert r["passed"], r["failures"]
    assert r["details"]["qme_solutions"] > 0


def test_singular_background():
    with pytest.raises(BVError):
        HarmonicBackground([[1, 2], [2, 4]])
    with pytest.raises(BVError):
        bv_laplacian(parse_bv("e0_1 e1_1"), HarmonicBackground([[1, 0], [0, 1]]))


def test_float_background():
    bg = HarmonicBackground([[2.0, 0.0], [0.0, 4.0]])
    out = bv_laplacian(parse_bv("e0_2 e1_2"), bg)
    assert abs(out.constant_term() - 0.25) < 1e-15


@settings(max_examples=80, deadline=None)
@given(polys())
def test_format_parse_round_trip(p):
    assert parse_bv(format_bv(p), p.m) == p


@pytest.mark.parametrize("src", ["", "e2_1", "e0_0", "3 e0_1 e1_1 +", "e0_1 ^ x", "e0_3"])
def test_parse_errors(src):
    with pytest.raises(ParseError):
        parse_bv(src, 2)


def test_odd_symbols_anticommute():
    assert parse_bv("e1_2 e1_1") == parse_bv("-1 e1_1 e1_2")
    assert parse_bv("e1_1 e1_1").is_zero()
