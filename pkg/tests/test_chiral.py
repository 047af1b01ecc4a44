import random

import pytest

from chiralweyl import checks
from chiralweyl.chiral import (ChiralSection, d_mu, format_section, jacobi_defect,
                               mu_chiral, parse_chain, permute_points)
from chiralweyl.fock import FockState, mixed_system, symplectic_bosons
from chiralweyl.kernels import DiagKernel, ParseError


def diag(gs, mono, k=1, derivs=()):
    return ChiralSection(gs, 2, {((((0, 1), derivs, mono),), ()): DiagKernel.const(2, k)})


def test_residue_of_a_simple_pole():
    gs = mixed_system()
    vac = ()
    assert mu_chiral(parse_chain(gs, "a(-1)|0> @z1 * b(-1)|0> @z2")) == diag(gs, vac)
    assert mu_chiral(parse_chain(gs, "b(-1)|0> @z1 * a(-1)|0> @z2")) == diag(gs, vac, -1)
    assert mu_chiral(parse_chain(gs, "c(-1)|0> @z1 * d(-1)|0> @z2")) == diag(gs, vac)


def test_no_contraction_no_product():
    gs = mixed_system()
    assert mu_chiral(parse_chain(gs, "a(-1)|0> @z1 * a(-2)|0> @z2 * z1")).is_zero()
    assert mu_chiral(parse_chain(gs, "c(-1)|0> @z1 * c(-1)|0> @z2 * (z1 - z2)")).is_zero()


def test_normal_ordered_product_plus_derivative_term():
    gs = mixed_system()
    got = mu_chiral(parse_chain(gs, "a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)"))
    want = diag(gs, ((0, -1), (1, -1))) + diag(gs, (), derivs=((0, 1),))
    assert got == want


def test_worked_example_suite():
    r = checks.worked_example()
    assert r["passed"], r["failures"]


def test_axioms_small():
    r = checks.chiral_axioms(seed=1, cases=15)
    assert r["passed"], r["failures"]
    assert r["details"]["nonzero_products"] > 5


def test_symplectic_bosons_jacobi():
    rng = random.Random(4)
    gs = symplectic_bosons(1)
    for _ in range(10):
        sec = ChiralSection.from_states(gs, checks.random_kernel(3, rng, 2),
                                        [checks.random_state(gs, rng, 1) for _ in range(3)])
        assert jacobi_defect(sec).is_zero()


def test_d_mu_squares_to_zero():
    rng = random.Random(2)
    gs = mixed_system()
    for _ in range(3):
        assert d_mu(d_mu(checks.random_section(gs, rng, 3, 2, 1))).is_zero()


def test_permutation_is_involutive():
    rng = random.Random(8)
    gs = mixed_system()
    for _ in range(10):
        sec = checks.random_section(gs, rng, 2, 2, 2)
        assert permute_points(permute_points(sec, (1, 0)), (1, 0)) == sec


def test_parse_matches_from_states():
    gs = mixed_system()
    sec = parse_chain(gs, "(a(-1)|0> + 2 b(-2)|0>) @z1 * c(-1)|0> @z2 / (z1-z2)^2 * z1")
    k = DiagKernel.diff(2, 0, 1, -2) * DiagKernel.var(2, 0)
    states = [FockState({((0, -1),): 1, ((1, -2),): 2}), FockState({((2, -1),): 1})]
    assert sec == ChiralSection.from_states(gs, k, states)
    assert "z1" in format_section(sec)


def test_parse_sums_and_signs():
    gs = mixed_system()
    a = parse_chain(gs, "a(-1)|0> @z1 * b(-1)|0> @z2 - a(-1)|0> @z1 * b(-1)|0> @z2")
    assert a.is_zero()


@pytest.mark.parametrize("src", [
    "a(-1)|0> @z1 * b(-1)|0> @z1",
    "a(-1)|0> @z1 / b(-1)|0> @z2",
    "a(-1)|0> @z1 * (z1 -",
])
def test_parse_errors(src):
    with pytest.raises(ParseError):
        parse_chain(mixed_system(), src)
