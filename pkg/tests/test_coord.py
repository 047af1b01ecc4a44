import random
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralweyl import checks
from chiralweyl.coord import (CoordError, ModeAlgebra, compose, coordinate_defect, current_coordinate_balance,
                              current_frame_balance, current_state, current_system, decompose_coord,
                              linear_field_identity, r_operator, reconstruct, s_trunc, schwarzian_correction,
                              stress_balance, stress_state_bdg)
from chiralweyl.fock import FockState, basis_upto, beta_gamma

z = sp.symbols("z")
D = 4


def to_sympy(series):
    return sum(sp.Rational(c.numerator, c.denominator) * z ** k for k, c in enumerate(series))


def taylor(expr, n):
    s = sp.series(expr, z, 0, n + 1).removeO()
    return [Fraction(str(s.coeff(z, k))) for k in range(n + 1)]


def sym_schwarzian_over_6(f):
    th = sp.diff(f, z)
    return (sp.diff(th, z, 2) / th - sp.Rational(3, 2) * (sp.diff(th, z) / th) ** 2) / 6


series_st = st.lists(st.fractions(min_value=-2, max_value=2, max_denominator=3), min_size=4, max_size=4).map(
    lambda t: [Fraction(0), Fraction(1)] + t)


def test_schwarzian_of_quadratic():
    f = [Fraction(0), Fraction(1), Fraction(1)]
    # -1/(1+2z)^2
    assert schwarzian_correction(f, D) == [Fraction((-1) ** (k + 1) * (k + 1) * 2 ** k) for k in range(D + 1)]


@settings(max_examples=15, deadline=None)
@given(series_st)
def test_schwarzian_matches_symbolic(f):
    assert schwarzian_correction(f, 3) == taylor(sym_schwarzian_over_6(to_sympy(f)), 3)


@settings(max_examples=40, deadline=None)
@given(series_st, st.fractions(min_value=-3, max_value=3, max_denominator=2).filter(bool))
def test_decompose_then_reconstruct(f, a1):
    f = [f[0], a1] + f[2:]
    assert s_trunc(reconstruct(decompose_coord(f, 5)), 5) == s_trunc(f, 5)


def test_moebius_has_no_schwarzian():
    a, c = Fraction(2), Fraction(-1, 3)
    f = [Fraction(0)] + [a * (-c) ** k for k in range(D + 4)]
    assert not any(schwarzian_correction(f, D))


def test_decompose_rejects_degenerate():
    with pytest.raises(CoordError):
        decompose_coord([1, 1, 0], 3)
    with pytest.raises(CoordError):
        decompose_coord([0, 0, 1], 3)


def test_scaling_acts_by_weight():
    for gs, a, root in ((beta_gamma(Fraction(1)), Fraction(3), None), (beta_gamma(Fraction(1, 2)), Fraction(4), Fraction(2))):
        ma = ModeAlgebra(gs, 2)
        v = decompose_coord([0, a], 3).v
        for m in basis_upto(gs, 2):
            w = gs.mono_weight(m)
            want = a ** -int(w) if root is None else root ** -int(2 * w)
            assert r_operator(ma, v, FockState({m: 1})) == {m: want}


def test_r_reverses_composition():
    gs = beta_gamma(Fraction(1, 2))
    ma = ModeAlgebra(gs, 3)
    f = [Fraction(0), Fraction(4), Fraction(1), Fraction(-1, 2), Fraction(1, 3), Fraction(0), Fraction(2)]
    g = [Fraction(0), Fraction(1, 4), Fraction(-2), Fraction(0), Fraction(1), Fraction(1, 2), Fraction(0)]
    Dc = 5
    vf, vg = decompose_coord(f, Dc).v, decompose_coord(g, Dc).v
    vfg = decompose_coord(compose(f, g, Dc), Dc).v
    for m in ma.basis:
        s = FockState({m: 1})
        assert r_operator(ma, vfg, s) == r_operator(ma, vg, r_operator(ma, vf, s))


@settings(max_examples=8, deadline=None)
@given(series_st)
def test_stress_defect_is_schwarzian(f):
    gs, st_ = stress_state_bdg()
    assert coordinate_defect(gs, st_, f, 3) == schwarzian_correction(f, 3)


@settings(max_examples=8, deadline=None)
@given(series_st)
def test_current_defect_is_half_log_derivative(f):
    gs, cur = current_system(1)
    got = coordinate_defect(gs, current_state(gs, cur, [1]), f, 3)
    th = sp.diff(to_sympy(f), z)
    assert got == taylor(sp.diff(th, z) / (2 * th), 3)


def test_balances_vanish():
    rng = random.Random(1)
    for _ in range(2):
        rho = [Fraction(1)] + [Fraction(rng.randint(-3, 3), rng.randint(1, 4)) for _ in range(10)]
        f = [Fraction(0), Fraction(2)] + [Fraction(rng.randint(-2, 2), rng.randint(1, 3)) for _ in range(8)]
        h = [[Fraction(1)] + [Fraction(rng.randint(-2, 2), 3) for _ in range(10)] for _ in range(2)]
        vs = [[Fraction(2)] + [Fraction(rng.randint(-2, 2), 2) for _ in range(10)] for _ in range(2)]
        nu = [Fraction(1), Fraction(-2)]
        assert not any(stress_balance(rho, f, 3))
        assert not any(current_coordinate_balance(nu, h, rho, f, 3))
        assert not any(current_frame_balance(nu, h, rho, vs, 3))


def test_uncorrected_stress_is_not_invariant():
    rho = [Fraction(1)] * 10
    f = [Fraction(0), Fraction(1), Fraction(1)] + [Fraction(0)] * 8
    gs, st_ = stress_state_bdg()
    assert any(coordinate_defect(gs, st_, f, 3))
    assert not any(stress_balance(rho, f, 3))


def test_linear_field_identity():
    gs = beta_gamma(Fraction(1))
    rho = [Fraction(0), Fraction(1), Fraction(1, 2), Fraction(-1, 3), Fraction(1, 5)]
    for m in basis_upto(gs, 2):
        lhs, rhs = linear_field_identity(gs, rho, Fraction(1, 3), FockState({m: 1}), 2)
        assert lhs == rhs


def test_suite():
    r = checks.coord_suite()
    assert r["passed"], r["failures"]
