"""Trace maps: Szegő kernel backends, the integration functional and expectation values.

Three backends are provided.

genus0   The plane chart of P^1 with F = O(-1), where the propagator is the bare
         pole <a,b>/(z1-z2) and there are no zero modes.  Smooth coefficients are
         polynomials in z, zbar supported on the closed unit disc (they must vanish
         on the unit circle), so every regularised integral is an exact rational
         multiple of a power of pi.  tr_omega on n points is pi^{-n} times the
         integral against d^2 z_1 ... d^2 z_n.
genus1   A flat line bundle on C/(Z + tau Z) with the theta-function kernel,
         evaluated numerically.
formal   One-point chains with symbolic harmonic jets, symbolic regular parts of
         the propagator, and the zero-mode rule for dbar of the propagator.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bv import BVPolynomial, HarmonicBackground, bv_laplacian
from .chiral import ChiralSection, d_mu, mono_parity, term_slots_parity
from .fock import FockState, GeneratorSet
from .kernels import DiagKernel, DolbeaultModel
from .wick import (RegularKernel, contract_field, iterated_mu, present_state, wick_chain_map,
                   wick_exp_regular, wick_exp_singular)


class TraceError(ValueError):
    pass


# ================================================================ genus one

def theta1(z, tau, q_terms: int = 32, deriv: int = 0) -> complex:
    """d^k/dz^k of theta_1(z | tau) = 2 sum (-1)^n q^{(n+1/2)^2} sin((2n+1) pi z)."""
    n = np.arange(q_terms)
    w = (2 * n + 1) * np.pi
    amp = 2 * (-1.0) ** n * np.exp(1j * np.pi * tau * (n + 0.5) ** 2)
    phase = w * z + deriv * np.pi / 2
    return complex(np.sum(amp * w ** deriv * np.sin(phase)))


def _near_lattice(x, tau, tol=1e-9):
    t = x.imag / tau.imag
    s = x.real - t * tau.real
    return abs(t - round(t)) < tol and abs(s - round(s)) < tol


def _richardson(f, h, levels=3):
    """Extrapolate f(h) = c0 + c1 h^2 + c2 h^4 + ... to h = 0."""
    table = [f(h / 2 ** k) for k in range(levels)]
    for j in range(1, levels):
        fac = 4 ** j
        table = [(fac * table[i + 1] - table[i]) / (fac - 1) for i in range(len(table) - 1)]
    return table[0]


@dataclass
class SzegoModel:
    backend: str
    tau: complex = 0j
    u: complex = 0j
    q_terms: int = 0
    a0: complex = 0j
    a1: complex = 0j
    a0_fd: complex = 0j
    a1_fd: complex = 0j
    checks: Dict[str, float] = field(default_factory=dict)

    def kernel(self, z1, z2) -> complex:
        """P(z1, z2) = theta1'(0) theta1(z + u) / (theta1(z) theta1(u)), z = z1 - z2."""
        if self.backend == "genus0":
            return 1 / (z1 - z2)
        x = z1 - z2
        if _near_lattice(x, self.tau):
            raise TraceError("kernel evaluated on the diagonal or a lattice translate")
        t, n = self.tau, self.q_terms
        return (theta1(0, t, n, 1) * theta1(x + self.u, t, n)
                / (theta1(x, t, n) * theta1(self.u, t, n)))

    def a0_at(self, z, h=0.05) -> complex:
        """Finite-difference a0 at base point z: even part of P(z + s, z) - 1/s."""
        return _richardson(lambda s: (self.kernel(z + s, z) + self.kernel(z - s, z)) / 2, h)

    def a1_at(self, z, h=0.05) -> complex:
        """Coefficient of (z2 - z1), so minus the odd part of P(z + s, z) - 1/s over s."""
        return -_richardson(lambda s: ((self.kernel(z + s, z) - self.kernel(z - s, z)) / 2 - 1 / s) / s, h)

    def periodicity_error(self, samples=((0.13 + 0.07j, 0.41 - 0.02j), (0.3 + 0.2j, -0.15 + 0.33j))) -> float:
        """Max relative deviation of P(z+1,w) = P(z,w) and P(z+tau,w) = e^{-2 pi i u} P(z,w)."""
        mult = cmath.exp(-2j * cmath.pi * self.u)
        err = 0.0
        for z, w in samples:
            p = self.kernel(z, w)
            err = max(err, abs(self.kernel(z + 1, w) - p) / abs(p),
                      abs(self.kernel(z + self.tau, w) - mult * p) / abs(p))
        return err

    @property
    def area(self) -> float:
        """Area of the fundamental parallelogram (positive orientation)."""
        return self.tau.imag if self.backend == "genus1" else 0.0


def genus1_szego(tau: complex, u: complex, q_terms: int = 32, tol: float = 1e-8) -> SzegoModel:
    tau, u = complex(tau), complex(u)
    if tau.imag <= 0:
        raise TraceError("Im tau must be positive")
    if q_terms < 8:
        raise TraceError("q_terms must be at least 8")
    if _near_lattice(u, tau, 1e-12):
        raise TraceError("u is a lattice point: the bundle has cohomology and no Szego kernel")
    th = [theta1(u, tau, q_terms, k) for k in range(3)]
    d1, d3 = theta1(0, tau, q_terms, 1), theta1(0, tau, q_terms, 3)
    a0 = th[1] / th[0]
    c1 = th[2] / (2 * th[0]) - d3 / (6 * d1)
    m = SzegoModel("genus1", tau, u, q_terms, a0=a0, a1=-c1)
    m.a0_fd = m.a0_at(0.17 + 0.05j)
    m.a1_fd = m.a1_at(0.17 + 0.05j)
    m.checks = {"a0_diff": abs(m.a0 - m.a0_fd), "a1_diff": abs(m.a1 - m.a1_fd)}
    if m.checks["a0_diff"] > tol * max(1.0, abs(a0)):
        raise TraceError(f"a0 extractions disagree by {m.checks['a0_diff']:.3g}")
    return m


def genus0_model() -> SzegoModel:
    return SzegoModel("genus0")


def _grid(model: SzegoModel, n: int):
    s = (np.arange(n) + 0.5) / n
    S, T = np.meshgrid(s, s, indexing="ij")
    return S + T * model.tau.real, T * model.tau.imag


def _quadrature(model: SzegoModel, fn, n: int) -> complex:
    """(1/pi) int f d^2 z over the fundamental domain; midpoint rule, fixed summation order."""
    X, Y = _grid(model, n)
    vals = np.asarray(fn(X, Y), dtype=complex) * np.ones_like(X, dtype=complex)
    total = complex(np.sum(np.sort_complex(vals.ravel())))
    return total * model.area / (n * n) / np.pi


def _as_field(x):
    if callable(x):
        return x
    return lambda X, Y: np.full(X.shape, complex(x))


def _require_acyclic(model: SzegoModel):
    if model.backend != "genus1":
        raise TraceError("expectation values need the genus1 backend")
    if _near_lattice(model.u, model.tau, 1e-12):
        raise TraceError("nonvanishing cohomology")


def expect_current(nu, model: SzegoModel, grid_n: int = 32, metric_term=None) -> dict:
    """(1/pi) int nu (a0 - rho h^{-1} d(h rho^{-1})) over the torus.

    nu and metric_term may be constants or callables of (x, y) arrays.
    """
    _require_acyclic(model)
    nu_f, met = _as_field(nu), _as_field(metric_term if metric_term is not None else 0)

    def integrand(X, Y):
        return nu_f(X, Y) * (model.a0 - met(X, Y))

    v = _quadrature(model, integrand, grid_n)
    coarse = _quadrature(model, integrand, max(1, grid_n // 2))
    return {"backend": "genus1", "value": v, "error_estimate": abs(v - coarse)}


def expect_stress_constant_term(mu, model: SzegoModel, grid_n: int = 32, rho_term=None) -> dict:
    """(1/pi) int mu (a1 - d a0 - (1/3) rho^{-1} d^2 rho); d a0 = 0 for a flat bundle."""
    _require_acyclic(model)
    mu_f, rt = _as_field(mu), _as_field(rho_term if rho_term is not None else 0)

    def integrand(X, Y):
        return mu_f(X, Y) * (model.a1 - rt(X, Y))

    v = _quadrature(model, integrand, grid_n)
    coarse = _quadrature(model, integrand, max(1, grid_n // 2))
    return {"backend": "genus1", "value": v, "error_estimate": abs(v - coarse)}


# ================================================================ genus zero

Smooth = Dict[Tuple[int, ...], Fraction]   # exponents (a_1, b_1, ..., a_n, b_n) of z_i, zbar_i


def _sadd(out: Smooth, key, c):
    v = out.get(key, 0) + c
    if v:
        out[key] = v
    else:
        out.pop(key, None)


def smooth_mul(x: Smooth, y: Smooth) -> Smooth:
    out: Smooth = {}
    for k1, c1 in x.items():
        for k2, c2 in y.items():
            _sadd(out, tuple(a + b for a, b in zip(k1, k2)), c1 * c2)
    return out


def bump(n: int, point: int, order: int = 2) -> Smooth:
    """(1 - z_p zbar_p)^order as a smooth coefficient on n points."""
    out: Smooth = {}
    for k in range(order + 1):
        key = [0] * (2 * n)
        key[2 * point] = key[2 * point + 1] = k
        _sadd(out, tuple(key), Fraction(comb(order, k) * (-1) ** k))
    return out


def d_zbar(x: Smooth, point: int) -> Smooth:
    out: Smooth = {}
    for k, c in x.items():
        b = k[2 * point + 1]
        if b:
            kk = list(k)
            kk[2 * point + 1] -= 1
            _sadd(out, tuple(kk), c * b)
    return out


def d_z(x: Smooth, point: int, times: int = 1) -> Smooth:
    out = dict(x)
    for _ in range(times):
        nxt: Smooth = {}
        for k, c in out.items():
            a = k[2 * point]
            if a:
                kk = list(k)
                kk[2 * point] -= 1
                _sadd(nxt, tuple(kk), c * a)
        out = nxt
    return out


def vanishes_on_circle(x: Smooth, point: int, n: int) -> bool:
    """Restriction to |z_point| = 1 is zero (checked through zbar = 1/z)."""
    out: Dict[tuple, Fraction] = {}
    for k, c in x.items():
        kk = list(k)
        kk[2 * point] -= kk[2 * point + 1]
        kk[2 * point + 1] = 0
        _sadd(out, tuple(kk), c)
    return not out


def disc_moment(a: int, b: int) -> Fraction:
    """pi^{-1} int_{|z|<1} z^a zbar^b d^2 z."""
    return Fraction(1, a + 1) if a == b else Fraction(0)


def pv_disc(a: int, b: int, m: int) -> Dict[Tuple[int, int], Fraction]:
    """pi^{-1} PV int_{|z|<1} z^a zbar^b (z - w)^{-m} d^2 z as {(c, d): coeff} for w^c wbar^d, |w| < 1.

    Stokes with F = zbar^{b+1} z^a / ((b+1)(z-w)^m): the outer circle contributes the
    residue at infinity of z^{a-b-1}(z-w)^{-m}, the excised disc the residue at w.
    """
    if m <= 0:
        out: Dict[Tuple[int, int], Fraction] = {}
        for k in range(-m + 1):
            # (z - w)^{-m} = sum binom(-m, k) z^{-m-k} (-w)^k
            c = comb(-m, k) * (-1) ** k
            mom = disc_moment(a - m - k, b) if a - m - k >= 0 else Fraction(0)
            if mom:
                out[(k, 0)] = out.get((k, 0), 0) + c * mom
        return {k: v for k, v in out.items() if v}
    out = {}
    e = a - b - m
    if e >= 0:
        out[(e, 0)] = Fraction(comb(a - b - 1, e), b + 1)
    if a >= m - 1:
        key = (a - m + 1, b + 1)
        out[key] = out.get(key, 0) - Fraction(comb(a, m - 1), b + 1)
    return {k: v for k, v in out.items() if v}


def integrate_one_point(holo: Dict[int, Fraction], smooth: Smooth) -> Fraction:
    """pi^{-1} int g(z) phi(z, zbar) d^2 z with g = sum holo[k] z^k."""
    tot = Fraction(0)
    for k, c in holo.items():
        for (a, b), s in smooth.items():
            tot += c * s * disc_moment(a + k, b)
    return tot


def integrate_two_point(num: Dict[Tuple[int, int], Fraction], m: int, smooth: Smooth) -> Fraction:
    """pi^{-2} int int num(z1, z2) (z1 - z2)^{-m} phi d^2 z1 d^2 z2, inner z1 integral regularised."""
    tot = Fraction(0)
    for (p1, p2), c in num.items():
        for (a1, b1, a2, b2), s in smooth.items():
            for (e, f), v in pv_disc(a1 + p1, b1, m).items():
                tot += c * s * v * disc_moment(a2 + p2 + e, b2 + f)
    return tot


def tr_omega(kernel: DiagKernel, smooth: Smooth) -> Fraction:
    """Trace of kernel * dz_1...dz_n * phi dzbar_1...dzbar_n (n = 1 or 2) on the genus0 backend."""
    if kernel.singles:
        raise TraceError("poles away from the diagonal are not supported")
    n = kernel.n
    for p in range(n):
        if not vanishes_on_circle(smooth, p, n):
            raise TraceError("smooth coefficient must vanish on the unit circle")
    if n == 1:
        return integrate_one_point({k[0]: c for k, c in kernel.num.terms.items()}, smooth)
    if n == 2:
        m = kernel.poles.get((0, 1), 0)
        return integrate_two_point(dict(kernel.num.terms), m, smooth)
    raise TraceError("multi-point integrals beyond two points are not supported")


def unit_chain() -> Tuple[DiagKernel, Smooth]:
    """One-point omega chain with trace 1: 2 (1 - |z|^2) dz dzbar."""
    return DiagKernel.const(1), {k: 2 * c for k, c in bump(1, 0, 1).items()}


@dataclass
class FormChain:
    """Chiral section tensored with phi * dzbar_{j1} ... (genus0 backend)."""
    sec: ChiralSection
    smooth: Smooth
    dbar: Tuple[int, ...]


def _vacuum_kernel(sec: ChiralSection) -> DiagKernel:
    """Coefficient of the all-vacuum term (no merged points, Dolbeault factor trivial)."""
    tot = None
    for (slots, dol), k in sec.terms.items():
        if all(not s[2] and not s[1] for s in slots):
            tot = k if tot is None else tot + k
    return tot if tot is not None else DiagKernel.zero(sec.n)


def trace_genus0(chain: FormChain) -> Fraction:
    """Tr = tr_omega p e^{P_sing}; the propagator is the bare pole and there are no zero modes."""
    sec = chain.sec
    counts = {len(slots) for slots, _ in sec.terms}
    if not counts:
        return Fraction(0)
    if len(counts) > 1:
        raise TraceError("terms with different slot counts")
    n = counts.pop()
    if len(chain.dbar) != n:
        return Fraction(0)
    if n == 1:
        return _one_point_trace(sec, chain.smooth)
    contracted = wick_exp_singular(decalage(sec))
    sign = _dbar_order_sign(chain.dbar)
    return sign * tr_omega(_vacuum_kernel(contracted), chain.smooth)


def decalage(sec: ChiralSection) -> ChiralSection:
    """s x_1 ... s x_n -> s^n (x_1 ... x_n): sign (-1)^{sum_i (n-1-i)|x_i|}."""
    gs = sec.gs
    out = {}
    for (slots, dol), k in sec.terms.items():
        par = term_slots_parity(gs, slots)
        e = sum((len(slots) - 1 - i) * p for i, p in enumerate(par))
        out[(slots, dol)] = k.scale((-1) ** e)
    return sec.copy_with(out)


def _dbar_order_sign(order: Sequence[int]) -> int:
    s = 1
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            if order[a] > order[b]:
                s = -s
    return s


def _one_point_trace(sec: ChiralSection, smooth1: Smooth) -> Fraction:
    """One-point trace; merged slots pair their transfer derivatives with the smooth coefficient.

    A term (s @ {z1,z2} d1^(k)) with kernel g(z2) pairs as g(z) (d_{z1}^(k) phi)(z, z).
    Here smooth1 is still in two-point variables when the section came from a merge.
    """
    tot = Fraction(0)
    for (slots, dol), k in sec.terms.items():
        (slot,) = slots
        points, derivs, mono = slot
        if mono:
            continue
        if len(points) == 1:
            tot += tr_omega(k, smooth1)
            continue
        phi = dict(smooth1)
        for p, order in derivs:
            phi = {kk: c / factorial(order) for kk, c in d_z(phi, p, order).items()}
        phi1 = restrict_diagonal(phi)
        base = max(points)
        holo = {}
        for key, c in k.num.terms.items():
            if any(e for i, e in enumerate(key) if i != base):
                raise TraceError("merged kernel depends on a non-base variable")
            holo[key[base]] = holo.get(key[base], 0) + c
        tot += integrate_one_point(holo, phi1)
    return tot


def restrict_diagonal(phi: Smooth) -> Smooth:
    """Set every z_i = z (and zbar_i = zbar): n-point coefficient to a one-point one."""
    out: Smooth = {}
    for k, c in phi.items():
        _sadd(out, (sum(k[0::2]), sum(k[1::2])), c)
    return out


def dbar_chain(chain: FormChain) -> List[FormChain]:
    """dbar on the smooth factor; the new dzbar goes in front, slots passed with shifted parity."""
    gs = chain.sec.gs
    n = chain.sec.n
    out = []
    for p in range(n):
        if p in chain.dbar:
            continue
        phi = d_zbar(chain.smooth, p)
        if not phi:
            continue
        # Koszul sign past the slots, per term
        terms = {}
        for (slots, dol), k in chain.sec.terms.items():
            par = sum(term_slots_parity(gs, slots, shifted=True)) % 2
            terms[(slots, dol)] = k.scale((-1) ** par)
        out.append(FormChain(chain.sec.copy_with(terms), phi, (p,) + chain.dbar))
    return out


def dmu_chain(chain: FormChain) -> FormChain:
    return FormChain(d_mu(chain.sec), chain.smooth, chain.dbar)


def chain_map_defect_genus0(chain: FormChain) -> Fraction:
    """Tr(d_mu eta) + Tr(dbar eta) for a two-point chain of Dolbeault degree one."""
    if chain.sec.n != 2 or len(chain.dbar) != 1:
        raise TraceError("expects a two-point chain with one dzbar")
    merged = dmu_chain(chain)
    a = _one_point_trace(merged.sec, merged.smooth)
    b = sum((trace_genus0(c) for c in dbar_chain(chain)), Fraction(0))
    return a + b


# ================================================================ formal backend

class FormalBackend:
    """Symbolic geometry for one-point chains with m harmonic pairs.

    Symbols (all on the single point):
      h0[g,i,k]   <g, d^(k) e0_i>,   degree 0, closed
      h1[g,j,k]   <g, d^(k) e1_j>,   degree 1, closed
      Q[g,k,g',l] regular part of the propagator, degree 0, with
                  dbar Q = sum I1^{ij} h1[g,i,k] h0[g',j,l] + I2^{ij} h0[g,i,k] h1[g',j,l]
      f, df       a test function and its dbar.
    Only even generators are supported.
    """

    def __init__(self, gs: GeneratorSet, pairing, max_jet: int = 3):
        if any(gs.parity):
            raise TraceError("the formal backend supports even generators only")
        self.gs = gs
        self.bg = HarmonicBackground(pairing)
        self.m = self.bg.m
        self.model = DolbeaultModel()
        self.max_jet = max_jet
        G = len(gs.parity)
        for g in range(G):
            for k in range(max_jet + 1):
                for i in range(self.m):
                    self.model.add_symbol(self.h0(g, i, k), 0, closed=True)
                    self.model.add_symbol(self.h1(g, i, k), 1, closed=True)
        for g, k, g2, l in self._q_keys(G):
            self.model.add_symbol(self.q(g, k, g2, l), 0, rule=self._q_rule(g, k, g2, l))
        self.model.add_symbol("df", 1, closed=True)
        self.model.add_symbol("f", 0, rule=self.model.sym("df"))

    @staticmethod
    def h0(g, i, k):
        return f"h0[{g},{i},{k}]"

    @staticmethod
    def h1(g, j, k):
        return f"h1[{g},{j},{k}]"

    @staticmethod
    def q(g, k, g2, l):
        (a, b), (c, d) = sorted([(g, k), (g2, l)])
        return f"Q[{a},{b},{c},{d}]"

    def _q_keys(self, G):
        seen = set()
        for g in range(G):
            for k in range(self.max_jet + 1):
                for g2 in range(G):
                    for l in range(self.max_jet + 1):
                        key = tuple(sorted([(g, k), (g2, l)]))
                        if key not in seen:
                            seen.add(key)
                            yield key[0] + key[1]

    def _q_rule(self, g, k, g2, l):
        M = self.model
        rule: dict = {}
        for i in range(self.m):
            for j in range(self.m):
                c1, c2 = self.bg.I1[i][j], self.bg.I2[i][j]
                if c1:
                    rule = M.add(rule, M.mul(M.sym(self.h1(g, i, k)), M.sym(self.h0(g2, j, l))), c1)
                if c2:
                    rule = M.add(rule, M.mul(M.sym(self.h0(g, i, k)), M.sym(self.h1(g2, j, l))), c2)
        return rule


FormalIntegrand = Dict[Tuple[tuple, tuple], dict]   # BV monomial -> Dolbeault element


def _fi_add(out: FormalIntegrand, key, elem, model, c=1):
    cur = out.get(key, {})
    new = model.add(cur, elem, c)
    if new:
        out[key] = new
    else:
        out.pop(key, None)


def _matchings(items):
    if not items:
        yield []
        return
    a = items[0]
    for idx in range(1, len(items)):
        rest = items[1:idx] + items[idx + 1:]
        for m in _matchings(rest):
            yield [(a, items[idx])] + m


def formal_integrand(fb: FormalBackend, state: FockState) -> FormalIntegrand:
    """p e^{d_e} e^{Q} applied to a one-point state, as BV polynomial with form coefficients."""
    M, m = fb.model, fb.m
    out: FormalIntegrand = {}
    for mono, c in state.terms.items():
        fields = [(g, -mode - 1) for g, mode in mono]
        if any(k > fb.max_jet for _, k in fields):
            raise TraceError("state exceeds the registered jet order")
        idx = list(range(len(fields)))
        for r in range(len(fields) + 1):
            for S in combinations(idx, r):
                rest = [i for i in idx if i not in S]
                if len(rest) % 2:
                    continue
                # expansions of the replaced fields: list of (ev, odd list, dol)
                partial = [((0,) * m, (), M.one(), Fraction(1))]
                for i in S:
                    g, k = fields[i]
                    nxt = []
                    for ev, od, dol, cc in partial:
                        for a in range(m):
                            ev2 = list(ev)
                            ev2[a] += 1
                            nxt.append((tuple(ev2), od, M.mul(dol, M.sym(fb.h0(g, a, k))), cc))
                            # e1_a xi_a: move xi_a left past h1 and the forms collected so far
                            sgn = -((-1) ** M.degree_of(dol))
                            nxt.append((ev, od + (a,), M.mul(dol, M.sym(fb.h1(g, a, k))), cc * sgn))
                    partial = nxt
                for match in _matchings(rest):
                    qprod = M.one()
                    for x, y in match:
                        (g, k), (g2, l) = fields[x], fields[y]
                        qprod = M.mul(qprod, M.sym(fb.q(g, k, g2, l)))
                    for ev, od, dol, cc in partial:
                        if len(set(od)) != len(od):
                            continue
                        sign, od_sorted = _sort_odd(od)
                        elem = M.mul(qprod, dol)
                        _fi_add(out, (ev, od_sorted), elem, M, c * cc * sign)
    return out


def _sort_odd(od):
    seq = list(od)
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    return sign, tuple(seq)


def _times_form(fb: FormalBackend, integ: FormalIntegrand, form: dict) -> FormalIntegrand:
    out: FormalIntegrand = {}
    for key, elem in integ.items():
        _fi_add(out, key, fb.model.mul(form, elem), fb.model)
    return out


def _integrate(fb: FormalBackend, integ: FormalIntegrand) -> FormalIntegrand:
    """tr_omega on one point: keep degree-one forms, reduce modulo dbar-exact ones."""
    M = fb.model
    out: FormalIntegrand = {}
    for key, elem in integ.items():
        top = {mo: c for mo, c in elem.items() if M.mono_degree(mo) == 1}
        red = M.reduce(top)
        if red:
            out[key] = red
    return out


def formal_trace(fb: FormalBackend, state: FockState, form: Optional[dict] = None) -> FormalIntegrand:
    """Tr(state (x) form): BV polynomial whose coefficients are integral classes."""
    form = form if form is not None else fb.model.sym("f")
    return _integrate(fb, _times_form(fb, formal_integrand(fb, state), form))


def formal_laplacian(fb: FormalBackend, integ: FormalIntegrand) -> FormalIntegrand:
    """Delta_BV on the BV part, coefficient-wise."""
    M = fb.model
    out: FormalIntegrand = {}
    symbols = sorted({mo for elem in integ.values() for mo in elem}, key=M._mono_key)
    for mo in symbols:
        p = BVPolynomial(fb.m, {key: elem[mo] for key, elem in integ.items() if mo in elem})
        for key, c in bv_laplacian(p, fb.bg).terms.items():
            _fi_add(out, key, {mo: c}, M)
    return out


def formal_chain_map_defect(fb: FormalBackend, state: FockState, form: Optional[dict] = None) -> FormalIntegrand:
    """Tr(dbar eta) + Delta_BV Tr(eta) for eta = state (x) form; zero when Tr is a chain map to -Delta.

    dbar on a one-point chain passes the shifted slot, so it carries (-1)^{|state| + 1}.
    """
    M = fb.model
    form = form if form is not None else M.sym("f")
    integ = formal_integrand(fb, state)
    par = {mono_parity(fb.gs, mo) for mo in state.terms}
    if len(par) > 1:
        raise TraceError("state must be homogeneous")
    sign = (-1) ** (par.pop() + 1) if par else -1
    d_form = M.apply_dbar(form)
    lhs = _integrate(fb, _times_form(fb, integ, d_form))
    rhs = formal_laplacian(fb, _integrate(fb, _times_form(fb, integ, form)))
    out: FormalIntegrand = {}
    for key, e in lhs.items():
        _fi_add(out, key, e, M, sign)
    for key, e in rhs.items():
        _fi_add(out, key, e, M)
    return _integrate(fb, out)


class FormalLieBackend:
    """Symbols for linear fields at n points: jets of harmonics, propagators
    P between points (dbar P given by the zero-mode rewrite), a test function f
    with dbar f = sum_p df_p, and closed one-forms u_p."""

    def __init__(self, gs: GeneratorSet, pairing, n: int, max_jet: int = 2):
        if any(gs.parity):
            raise TraceError("the formal backend supports even generators only")
        self.gs, self.n, self.max_jet = gs, n, max_jet
        self.bg = HarmonicBackground(pairing)
        self.m = self.bg.m
        M = self.model = DolbeaultModel()
        G = len(gs.parity)
        for p in range(n):
            for g in range(G):
                for k in range(max_jet + 1):
                    for i in range(self.m):
                        M.add_symbol(self.h0(g, i, k, p), 0, closed=True)
                        M.add_symbol(self.h1(g, i, k, p), 1, closed=True)
        for p in range(n):
            for q in range(p + 1, n):
                for g in range(G):
                    for k in range(max_jet + 1):
                        for g2 in range(G):
                            for l in range(max_jet + 1):
                                M.add_symbol(self.prop(g, k, p, g2, l, q), 0,
                                             rule=self._rule(g, k, p, g2, l, q))
        for p in range(n):
            M.add_symbol(f"df{p}", 1, closed=True)
            M.add_symbol(f"u{p}", 1, closed=True)
        df: dict = {}
        for p in range(n):
            df = M.add(df, M.sym(f"df{p}"))
        M.add_symbol("f", 0, rule=df)

    @staticmethod
    def h0(g, i, k, p):
        return f"h0[{g},{i},{k}]@{p}"

    @staticmethod
    def h1(g, j, k, p):
        return f"h1[{g},{j},{k}]@{p}"

    @staticmethod
    def prop(g, k, p, g2, l, q):
        return f"P[{g},{k},{g2},{l}]@{p}{q}"

    def _rule(self, g, k, p, g2, l, q):
        M = self.model
        rule: dict = {}
        for i in range(self.m):
            for j in range(self.m):
                c1, c2 = self.bg.I1[i][j], self.bg.I2[i][j]
                if c1:
                    rule = M.add(rule, M.mul(M.sym(self.h1(g, i, k, p)), M.sym(self.h0(g2, j, l, q))), c1)
                if c2:
                    rule = M.add(rule, M.mul(M.sym(self.h0(g, i, k, p)), M.sym(self.h1(g2, j, l, q))), c2)
        return rule

    def expand(self, fields) -> FormalIntegrand:
        """p e^{d_e} e^{d_P} on linear fields [(gen, jet)] placed at points 0..n-1."""
        if len(fields) != self.n:
            raise TraceError("one linear field per point")
        M, m = self.model, self.m
        out: FormalIntegrand = {}
        idx = list(range(self.n))
        for r in range(self.n + 1):
            for S in combinations(idx, r):
                rest = [i for i in idx if i not in S]
                if len(rest) % 2:
                    continue
                partial = [((0,) * m, (), M.one(), Fraction(1))]
                for p in S:
                    g, k = fields[p]
                    nxt = []
                    for ev, od, dol, cc in partial:
                        for a in range(m):
                            ev2 = list(ev)
                            ev2[a] += 1
                            nxt.append((tuple(ev2), od, M.mul(dol, M.sym(self.h0(g, a, k, p))), cc))
                            sgn = -((-1) ** M.degree_of(dol))
                            nxt.append((ev, od + (a,), M.mul(dol, M.sym(self.h1(g, a, k, p))), cc * sgn))
                    partial = nxt
                for match in _matchings(rest):
                    prod = M.one()
                    for x, y in match:
                        prod = M.mul(prod, M.sym(self.prop(*fields[x], x, *fields[y], y)))
                    for ev, od, dol, cc in partial:
                        if len(set(od)) != len(od):
                            continue
                        sign, od_sorted = _sort_odd(od)
                        _fi_add(out, (ev, od_sorted), M.mul(prod, dol), M, cc * sign)
        return out

    def integrate(self, integ: FormalIntegrand) -> FormalIntegrand:
        M = self.model
        out: FormalIntegrand = {}
        for key, elem in integ.items():
            top = {mo: c for mo, c in elem.items() if M.mono_degree(mo) == self.n}
            red = M.reduce(top)
            if red:
                out[key] = red
        return out


def formal_lie_chain_map_defect(fb: FormalLieBackend, fields, form: dict) -> FormalIntegrand:
    """Tr_Lie(dbar eta) + Delta_BV Tr_Lie(eta) for eta = (linear fields) (x) form.

    dbar passes the n shifted even slots, giving (-1)^n.
    """
    M = fb.model
    integ = fb.expand(fields)
    lhs = fb.integrate(_times_form(fb, integ, M.apply_dbar(form)))
    tr = fb.integrate(_times_form(fb, integ, form))
    out: FormalIntegrand = {}
    for key, e in lhs.items():
        _fi_add(out, key, e, M, (-1) ** fb.n)
    for key, e in formal_laplacian(fb, tr).items():
        _fi_add(out, key, e, M)
    return fb.integrate(out)


# ================================================================ entry points

def _is_lie_chain(sec: ChiralSection) -> bool:
    for (slots, _), _k in sec.terms.items():
        for points, _derivs, mono in slots:
            if len(points) > 1 or len(mono) > 1:
                return False
    return True


def trace_ch(chain, model=None):
    """Tr_ch.  Genus-0 model: scalar (no zero modes).  FormalBackend: (state, form) pair,
    returning a BV polynomial with integral-class coefficients."""
    if isinstance(model, FormalBackend):
        state, form = chain
        return formal_trace(model, state, form)
    if model is not None and model.backend != "genus0":
        raise TraceError(f"trace_ch is not available on the {model.backend} backend")
    if any(len(slots) > 3 for slots, _ in chain.sec.terms):
        raise TraceError("chains are supported on at most three points")
    return trace_genus0(chain)


def trace_lie(chain, model=None):
    """Tr_Lie on chains of linear fields.  With no regular propagator part the
    Lie and chiral contractions coincide, so genus 0 reuses trace_ch."""
    if isinstance(model, FormalLieBackend):
        fields, form = chain
        return model.integrate(_times_form(model, model.expand(fields), form))
    if not _is_lie_chain(chain.sec):
        raise TraceError("trace_lie needs one linear field per point")
    return trace_ch(chain, model)


# ================================================================ presentations

def _project_omega(sec: ChiralSection) -> ChiralSection:
    """p: keep the terms with every linear factor used up."""
    return sec.copy_with({key: k for key, k in sec.terms.items() if all(not s[2] for s in key[0])})


def _d_e(sec: ChiralSection, e, k: int) -> ChiralSection:
    for _ in range(k):
        sec = contract_field(sec, e)
    return sec


def presentation_trace_pair(gs: GeneratorSet, state: FockState, Q: RegularKernel, e, k: int):
    """Both sides of Tr_ch = Tr_Lie on a presentation, before tr_omega.

    Chiral side: p d_e^k e^{Q} of the state at one point.  Lie side: the omega-product of
    p d_e^k e^{P + Q} applied to a two-point linear presentation of the state.
    """
    lhs = ChiralSection(gs, 2)
    rhs = ChiralSection(gs, 2)
    for mono, c in state.terms.items():
        target = ChiralSection(gs, 2, {((((0, 1), (), mono),), ()): DiagKernel.const(2, c)})
        lhs = lhs + _project_omega(_d_e(wick_exp_regular(target, Q), e, k))
        pres = present_state(gs, mono).scale(c)
        rhs = rhs + iterated_mu(_project_omega(wick_chain_map(_d_e(pres, e, k), Q)))
    return lhs, rhs
