from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chiralweyl.fock import (FockState, basis, basis_upto, beta_gamma, format_state, km_current,
                             km_current_state, mixed_system, monomial_state, normal_ordered_product,
                             parse_state, singular_ope, stress_tensor, symplectic_bosons, translation,
                             virasoro, virasoro_commutator_check)
from chiralweyl.kernels import ParseError


def test_linear_ope_is_the_pairing():
    gs = mixed_system()
    a, b = parse_state(gs, "a(-1)|0>"), parse_state(gs, "b(-1)|0>")
    assert singular_ope(gs, a, b) == {0: FockState.vacuum()}
    assert singular_ope(gs, b, a) == {0: FockState.vacuum().scale(-1)}
    c, d = parse_state(gs, "c(-1)|0>"), parse_state(gs, "d(-1)|0>")
    assert singular_ope(gs, c, d) == {0: FockState.vacuum()}
    assert singular_ope(gs, d, c) == {0: FockState.vacuum()}


def test_derivative_field_ope():
    # a(z) db(w) ~ 1/(z-w)^2: the first product of a with b(-2)|0> is |0>
    gs = mixed_system()
    a, db = parse_state(gs, "a(-1)|0>"), parse_state(gs, "b(-2)|0>")
    assert singular_ope(gs, a, db) == {1: FockState.vacuum()}


def test_normal_order_of_free_fields():
    gs = mixed_system()
    out = normal_ordered_product(gs, parse_state(gs, "a(-1)|0>"), parse_state(gs, "b(-2)|0>"))
    assert out == parse_state(gs, "a(-1) b(-2)|0>")


def test_fermions_anticommute():
    gs = mixed_system()
    assert parse_state(gs, "c(-1) d(-2)|0>") == parse_state(gs, "d(-2) c(-1)|0>").scale(-1)
    assert parse_state(gs, "c(-1) c(-1)|0>").is_zero()


def test_translation_is_l_minus_one():
    gs = beta_gamma(Fraction(1, 3))
    for m in basis_upto(gs, 3):
        s = FockState({m: 1})
        assert translation(gs, s) == virasoro(gs, -1, s)


@pytest.mark.parametrize("alpha", [Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(1)])
def test_l0_measures_weight(alpha):
    gs = beta_gamma(alpha)
    for m in basis_upto(gs, 3):
        s = FockState({m: 1})
        assert virasoro(gs, 0, s) == s.scale(gs.mono_weight(m))


@pytest.mark.parametrize("make,c", [
    (lambda: symplectic_bosons(1), Fraction(-1)),
    (lambda: beta_gamma(Fraction(1, 2), odd=True), Fraction(1)),
    (lambda: beta_gamma(Fraction(1)), Fraction(2)),
    (lambda: beta_gamma(Fraction(2, 3)), Fraction(-2, 3)),
    (lambda: beta_gamma(Fraction(1, 3), odd=True), Fraction(2, 3)),
])
def test_central_charge_textbook(make, c):
    # bosonic ghosts of weight l: c = 2(6 l^2 - 6 l + 1); fermionic: the negative
    r = virasoro_commutator_check(make(), level=3, modes=range(-3, 4))
    assert not r["failures"]
    assert r["central_charge"] == c


def test_stress_tensor_ope_has_quartic_pole():
    gs = beta_gamma(Fraction(1))
    T = stress_tensor(gs)
    ope = singular_ope(gs, T, T)
    assert ope[3] == FockState.vacuum().scale(Fraction(2, 2))   # c/2 with c = 2
    assert ope[1] == T.scale(2)
    assert ope[0] == translation(gs, T)


def test_kac_moody_current_level():
    gs = beta_gamma(Fraction(1), rank=2)
    J = km_current_state(gs, 0, 2)
    # J(z) J(w) ~ -1/(z-w)^2 for a bosonic pair
    assert singular_ope(gs, J, J) == {1: FockState.vacuum().scale(-1)}
    e, f = monomial_state(gs, [(0, -1)]), monomial_state(gs, [(2, -1)])
    qe, qf = km_current(gs, 0, 2, 0, e), km_current(gs, 0, 2, 0, f)
    # opposite unit charges on the paired generators
    assert qe == e.scale(qe.terms[((0, -1),)]) and abs(qe.terms[((0, -1),)]) == 1
    assert qf == f.scale(-qe.terms[((0, -1),)])


def test_basis_sizes():
    gs = symplectic_bosons(1)
    # two bosons: coefficients of prod (1-q^n)^-2
    assert [len(basis(gs, n)) for n in range(6)] == [1, 2, 5, 10, 20, 36]
    gs = beta_gamma(Fraction(1, 2), odd=True)
    # two fermions: prod (1+q^n)^2
    assert [len(basis(gs, n)) for n in range(6)] == [1, 2, 3, 6, 9, 14]


def test_parse_errors():
    gs = mixed_system()
    with pytest.raises(ParseError):
        parse_state(gs, "x(-1)|0>")
    with pytest.raises(ParseError):
        parse_state(gs, "a(-1) |0")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("abcd"), st.integers(1, 3)), max_size=4),
       st.fractions(min_value=-3, max_value=3, max_denominator=3).filter(bool))
def test_state_round_trip(word, c):
    gs = mixed_system()
    s = monomial_state(gs, [(g, -k) for g, k in word]).scale(c)
    assert parse_state(gs, format_state(gs, s)) == s
