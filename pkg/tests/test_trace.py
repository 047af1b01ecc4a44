import cmath
import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import integrate

from chiralweyl import checks
from chiralweyl.chiral import parse_chain
from chiralweyl.fock import FockState, basis_upto, mixed_system, monomial_state, symplectic_bosons
from chiralweyl.kernels import DiagKernel
from chiralweyl.trace import (FormalBackend, FormalLieBackend, FormChain, TraceError, bump, d_zbar,
                              dbar_chain, dmu_chain, expect_current, expect_stress_constant_term,
                              formal_chain_map_defect, formal_lie_chain_map_defect, genus0_model,
                              genus1_szego, pv_disc, smooth_mul, theta1, tr_omega, trace_ch,
                              trace_lie, unit_chain)

TAU, U = 0.3 + 1.1j, 0.27 + 0.341j


# ---------------------------------------------------------------- genus zero

def test_unit_chain_has_trace_one():
    k, phi = unit_chain()
    assert tr_omega(k, phi) == 1


def test_dbar_exact_form_integrates_to_zero():
    g = smooth_mul({(2, 1): Fraction(1), (0, 0): Fraction(3)}, bump(1, 0, 2))
    assert tr_omega(DiagKernel.const(1), d_zbar(g, 0)) == 0
    assert tr_omega(DiagKernel.var(1, 0), d_zbar(g, 0)) == 0


def test_smooth_factor_must_vanish_on_boundary():
    with pytest.raises(TraceError):
        tr_omega(DiagKernel.const(1), {(0, 0): Fraction(1)})


def pv_numeric(a, b, m, w):
    """pi^-1 PV int_{|z|<1} z^a zbar^b (z-w)^-m, polar coordinates around w."""
    g = lambda z: z ** a * z.conjugate() ** b
    gw = g(w)

    def radius(phi):
        c = (w.conjugate() * cmath.exp(1j * phi)).real
        return -c + math.sqrt(c * c + 1 - abs(w) ** 2)

    def angular(phi, part):
        e = cmath.exp(1j * phi)
        R = radius(phi)
        if m == 1:
            val = integrate.quad(lambda r: (g(w + r * e) / e).real if part == 0 else (g(w + r * e) / e).imag, 0, R)[0]
            return val
        inner = lambda r: (g(w + r * e) - gw) / r
        re_ = integrate.quad(lambda r: inner(r).real, 0, R)[0]
        im_ = integrate.quad(lambda r: inner(r).imag, 0, R)[0]
        v = (complex(re_, im_) + gw * math.log(R)) * e ** -2
        return v.real if part == 0 else v.imag

    re_ = integrate.quad(lambda p: angular(p, 0), 0, 2 * math.pi, limit=200)[0]
    im_ = integrate.quad(lambda p: angular(p, 1), 0, 2 * math.pi, limit=200)[0]
    return complex(re_, im_) / math.pi


@pytest.mark.parametrize("a,b,m", [(0, 0, 1), (2, 1, 1), (1, 0, 2), (3, 1, 2), (0, 2, 2)])
def test_principal_value_against_quadrature(a, b, m):
    w = 0.3 + 0.2j
    exact = sum(complex(c) * w ** p * w.conjugate() ** q for (p, q), c in pv_disc(a, b, m).items())
    assert abs(exact - pv_numeric(a, b, m, w)) < 1e-7


def test_pv_of_simple_pole_is_minus_wbar():
    assert pv_disc(0, 0, 1) == {(0, 1): Fraction(-1)}


def two_point(src, weight):
    gs = mixed_system()
    phi = smooth_mul(smooth_mul({weight: Fraction(1)}, bump(2, 0, 2)), bump(2, 1, 2))
    return FormChain(parse_chain(gs, src), phi, (0, 1))


def test_two_point_linear_chain_values():
    # values from an independent polar-coordinate computation
    assert trace_ch(two_point("a(-1)|0> @z1 * b(-1)|0> @z2", (1, 0, 0, 0))) == Fraction(1, 18)
    assert trace_ch(two_point("b(-1)|0> @z1 * a(-1)|0> @z2", (1, 0, 0, 0))) == Fraction(-1, 18)
    assert trace_ch(two_point("a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)", (2, 0, 0, 0))) == Fraction(1, 45)
    assert trace_lie(two_point("a(-1)|0> @z1 * b(-1)|0> @z2", (1, 0, 0, 0))) == Fraction(1, 18)


def test_uncontractible_chain_is_zero():
    assert trace_ch(two_point("a(-1)|0> @z1 * a(-1)|0> @z2", (1, 0, 0, 0))) == 0
    assert trace_ch(two_point("a(-1)|0> @z1 * c(-1)|0> @z2", (1, 0, 0, 0))) == 0


def test_lie_trace_rejects_composite_fields():
    with pytest.raises(TraceError):
        trace_lie(two_point("a(-1) b(-1)|0> @z1 * |0> @z2", (1, 0, 0, 0)))


def test_chiral_trace_needs_genus_zero_model():
    m = genus1_szego(TAU, U)
    with pytest.raises(TraceError):
        trace_ch(two_point("a(-1)|0> @z1 * b(-1)|0> @z2", (1, 0, 0, 0)), m)
    assert trace_ch(two_point("a(-1)|0> @z1 * b(-1)|0> @z2", (1, 0, 0, 0)), genus0_model()) == Fraction(1, 18)


def test_genus0_chain_map_single_chain():
    ch = two_point("a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)", (2, 1, 0, 0))
    ch = FormChain(ch.sec, ch.smooth, (0,))
    a = trace_ch(dmu_chain(ch))
    b = sum((trace_ch(c) for c in dbar_chain(ch)), Fraction(0))
    assert a != 0 and a + b == 0


def test_genus0_chain_map_small():
    r = checks.chain_map(seed=4, backend="genus0", cases=6)
    assert r["passed"], r["failures"]


# ---------------------------------------------------------------- formal

def test_formal_chain_map_basis_states():
    gs = symplectic_bosons(1)
    fb = FormalBackend(gs, [[1, 2], [-1, 3]], max_jet=1)
    for mono in basis_upto(gs, 2):
        assert not formal_chain_map_defect(fb, FockState({mono: 1}))


def test_formal_chain_map_symmetric_pairing():
    gs = symplectic_bosons(1)
    fb = FormalBackend(gs, [[2, 0], [0, 1]], max_jet=1)
    assert not formal_chain_map_defect(fb, monomial_state(gs, [(0, -1), (1, -1)]))


def test_formal_lie_chain_map():
    gs = symplectic_bosons(1)
    for n in (1, 2):
        lb = FormalLieBackend(gs, [[1, 2], [-1, 3]], n, max_jet=1)
        M = lb.model
        form = M.mul(M.sym("f"), M.sym("u0"))
        assert not formal_lie_chain_map_defect(lb, [(0, 0)] * n, form)
        assert not formal_lie_chain_map_defect(lb, [(1, 1)] * n, M.sym("f"))


def test_presentation_small():
    r = checks.trace_presentation(seed=2, states=4)
    assert r["passed"], r["failures"]
    assert r["details"]["nonzero"] > 0


# ---------------------------------------------------------------- genus one

def test_theta_against_mpmath():
    q = mpmath.exp(1j * mpmath.pi * TAU)
    for z in (0.1 + 0.2j, U, -0.4 + 0.05j):
        for k in range(4):
            want = complex(mpmath.pi ** k * mpmath.jtheta(1, mpmath.pi * z, q, k))
            assert abs(theta1(z, TAU, 32, k) - want) < 1e-12 * max(1, abs(want))


def laurent(m, k, r=0.1):
    """(1/2 pi i) contour integral of P(z, 0) z^-k-1 on a small circle."""
    f = lambda t: m.kernel(r * cmath.exp(1j * t), 0) * (r * cmath.exp(1j * t)) ** (-k)
    re_ = integrate.quad(lambda t: f(t).real, 0, 2 * math.pi, limit=200)[0]
    im_ = integrate.quad(lambda t: f(t).imag, 0, 2 * math.pi, limit=200)[0]
    return complex(re_, im_) / (2 * math.pi)


def test_szego_laurent_data():
    m = genus1_szego(TAU, U)
    assert abs(laurent(m, -1) - 1) < 1e-10
    assert abs(laurent(m, 0) - m.a0) < 1e-10
    # a1 is the coefficient of (z2 - z1)
    assert abs(laurent(m, 1) + m.a1) < 1e-10


def test_szego_errors():
    with pytest.raises(TraceError):
        genus1_szego(TAU, 0)
    with pytest.raises(TraceError):
        genus1_szego(TAU, 1 + TAU)
    with pytest.raises(TraceError):
        genus1_szego(0.3 - 1j, U)
    m = genus1_szego(TAU, U)
    with pytest.raises(TraceError):
        m.kernel(0.2, 0.2)


def test_expectations_are_constant_integrals():
    m = genus1_szego(TAU, U)
    cur = expect_current(2.0, m, 16)
    assert abs(cur["value"] - 2 * m.a0 * TAU.imag / math.pi) < 1e-12
    st = expect_stress_constant_term(lambda X, Y: np.ones_like(X), m, 16)
    assert abs(st["value"] - m.a1 * TAU.imag / math.pi) < 1e-12
    with pytest.raises(TraceError):
        expect_current(1.0, genus0_model())


def test_metric_term_enters_current():
    m = genus1_szego(TAU, U)
    cur = expect_current(1.0, m, 16, metric_term=m.a0)
    assert abs(cur["value"]) < 1e-12


def test_genus1_suite():
    r = checks.genus1_suite()
    assert r["passed"], r["failures"]
