import random
from fractions import Fraction

import pytest
import sympy as sp

from chiralweyl import checks
from chiralweyl.chiral import ChiralError, ChiralSection, iota_to_c_modes, iota_to_c_wick, mu_chiral, mu_sym, parse_chain
from chiralweyl.fock import mixed_system
from chiralweyl.kernels import DiagKernel
from chiralweyl.wick import (RegularKernel, iterated_mu, normal_ordering_map, present_state,
                             wick_chain_map, wick_exp_regular, wick_exp_singular)


def exchange_oracle(k, l):
    """-(1/k!l!) d_z^k d_w^l 1/(z-w), read off as c/(z-w)^(k+l+1)."""
    z, w = sp.symbols("z w")
    expr = -sp.diff(1 / (z - w), z, k, w, l) / (sp.factorial(k) * sp.factorial(l))
    c = sp.simplify(expr * (z - w) ** (k + l + 1))
    return Fraction(int(c))


@pytest.mark.parametrize("k,l", [(k, l) for k in range(4) for l in range(4)])
def test_exchange_coefficient_against_symbolic(k, l):
    gs = mixed_system()
    V = {(((0, -k - 1),), ((1, -l - 1),)): DiagKernel.const(2, 1)}
    want = DiagKernel.diff(2, 0, 1, -(k + l + 1)).scale(exchange_oracle(k, l))
    for route in (iota_to_c_modes, iota_to_c_wick):
        assert route(gs, V)[((), ())] == want


def test_exchange_suite():
    r = checks.wick_exchange()
    assert r["passed"] and r["cases"] > 100


def test_iota_routes_agree_low_level():
    r = checks.iota_wick(level=2)
    assert r["passed"], r["failures"]


def test_singular_exponential_of_linear_pair():
    gs = mixed_system()
    sec = parse_chain(gs, "a(-1)|0> @z1 * b(-1)|0> @z2")
    want = sec + parse_chain(gs, "|0> @z1 * |0> @z2 / (z1-z2)")
    assert wick_exp_singular(sec) == want


def test_wick_theorem_small():
    r = checks.wick_theorem(seed=2, cases=10)
    assert r["passed"], r["failures"]


def test_regular_exponential_inverts():
    rng = random.Random(6)
    gs = mixed_system()
    for _ in range(5):
        sec = checks.random_section(gs, rng, 2, 2, 2)
        Q = RegularKernel.random(gs, rng, 2)
        neg = RegularKernel(gs, {ab: {mn: -c for mn, c in p.items()} for ab, p in Q.q.items()}, Q.degree)
        assert wick_exp_regular(wick_exp_regular(sec, Q), neg) == sec


def test_chain_map_intertwines_product():
    rng = random.Random(9)
    gs = mixed_system()
    sec = checks.random_section(gs, rng, 2, 2, 2)
    Q = RegularKernel.random(gs, rng, 2)
    assert wick_exp_regular(mu_chiral(sec, method="modes"), Q) == mu_sym(wick_chain_map(sec, Q))


def test_regular_kernel_validation():
    gs = mixed_system()
    with pytest.raises(ChiralError):
        RegularKernel(gs, {(0, 2): {(0, 0): 1}})
    with pytest.raises(ChiralError):
        RegularKernel(gs, {(0, 1): {(1, 0): 1}})
    with pytest.raises(ChiralError):
        RegularKernel(gs, {(0, 0): {(4, 0): 1, (0, 4): 1}}, degree=3)


def test_presentation_reproduces_state():
    gs = mixed_system()
    for mono in (((0, -1), (1, -2)), ((2, -1), (3, -1)), ((0, -3),)):
        pres = present_state(gs, mono)
        target = ChiralSection(gs, 2, {((((0, 1), (), mono),), ()): DiagKernel.const(2, 1)})
        assert iterated_mu(pres) == target


def test_presentation_independence_small():
    r = checks.presentation_independence(seed=3, states=5)
    assert r["passed"], r["failures"]
    assert r["details"]["min_distinct_presentations"] >= 3


def test_bad_presentation_rejected():
    gs = mixed_system()
    mono = ((0, -1), (1, -1))
    target = ChiralSection(gs, 2, {((((0, 1), (), mono),), ()): DiagKernel.const(2, 1)})
    with pytest.raises(ChiralError):
        normal_ordering_map(target, parse_chain(gs, "a(-1)|0> @z1 * b(-1)|0> @z2"))
