"""Wick contractions on chiral sections.

Linear factors are the modes a_(-k-1) of the monomials in each slot.  A
contraction of a_(-k-1) at z_p with b_(-l-1) at z_q by a kernel K produces

    (1/k! l!) d^k_{z_p} d^l_{z_q} K_ab(z_p, z_q).

For the singular propagator K_ab = <a,b>/(z_p - z_q).  A regular kernel Q
carries its own generator-pair coefficients and also contracts factors that
sit at the same point (self-loops), evaluated on the diagonal.
"""
from __future__ import annotations

import random
from fractions import Fraction
from math import comb, factorial
from typing import Dict, Optional, Sequence, Tuple

from .bv import HarmonicBackground
from .chiral import (ChiralError, ChiralSection, _acc, _translate_mono, apply_word,
                     contraction_kernel, mu_chiral)
from .fock import GeneratorSet
from .kernels import DiagKernel, Poly

__all__ = [
    "RegularKernel", "HarmonicBackground", "contract_field", "contract_pair",
    "wick_exp", "wick_exp_singular", "wick_exp_regular", "wick_chain_map",
    "normal_ordering_map", "local_normal_ordering", "present_state",
    "diagonal_pullback", "iterated_mu",
]


class RegularKernel:
    """Q = sum q_{ab;mn} z1^m z2^n e_a (x) e_b, truncated at m + n <= degree."""

    def __init__(self, gs: GeneratorSet, coeffs: Dict[Tuple[int, int], Dict[Tuple[int, int], object]], degree=3):
        self.gs = gs
        self.degree = degree
        self.q: Dict[Tuple[int, int], Dict[Tuple[int, int], Fraction]] = {}
        for (a, b), poly in coeffs.items():
            clean = {mn: Fraction(c) for mn, c in poly.items() if c}
            if not clean:
                continue
            if gs.parity[a] != gs.parity[b]:
                raise ChiralError("regular kernel must be even")
            if any(m + n > degree for m, n in clean):
                raise ChiralError("term above truncation degree")
            self.q[(a, b)] = clean
        for (a, b), poly in self.q.items():
            sgn = -1 if gs.parity[a] and gs.parity[b] else 1
            other = self.q.get((b, a), {})
            for (m, n), c in poly.items():
                if other.get((n, m), 0) != sgn * c:
                    raise ChiralError(f"regular kernel not symmetric at {(a, b, m, n)}")

    @classmethod
    def random(cls, gs: GeneratorSet, rng: random.Random, degree=3, density=0.5):
        coeffs: dict = {}
        m = len(gs)
        for a in range(m):
            for b in range(a, m):
                if gs.parity[a] != gs.parity[b]:
                    continue
                sgn = -1 if gs.parity[a] else 1
                for i in range(degree + 1):
                    for j in range(degree + 1 - i):
                        if a == b and (i > j or (i == j and sgn == -1)):
                            continue
                        if rng.random() > density:
                            continue
                        c = Fraction(rng.randint(-3, 3), rng.choice([1, 2]))
                        coeffs.setdefault((a, b), {})[(i, j)] = c
                        coeffs.setdefault((b, a), {})[(j, i)] = sgn * c
        return cls(gs, coeffs, degree)

    def contraction(self, a, k, b, l, n, p, q) -> Optional[DiagKernel]:
        """(1/k! l!) d^k_1 d^l_2 q_ab at (z_p, z_q); p == q evaluates on the diagonal."""
        poly = self.q.get((a, b))
        if not poly:
            return None
        terms: Dict[Tuple[int, ...], Fraction] = {}
        for (m, nn), c in poly.items():
            if m < k or nn < l:
                continue
            e = [0] * n
            e[p] += m - k
            e[q] += nn - l
            key = tuple(e)
            terms[key] = terms.get(key, 0) + c * comb(m, k) * comb(nn, l)
        out = DiagKernel(Poly(n, terms))
        return None if out.is_zero() else out


# ---------------------------------------------------------- engine

def _factors(slots):
    return [(si, pos, g, n) for si, (_, _, m) in enumerate(slots) for pos, (g, n) in enumerate(m)]


def _contract_term_once(gs, slots, between, self_loop):
    """Single contractions in the word formed by the slot monomials in order."""
    out = []
    facs = _factors(slots)
    pars = [gs.parity[g] for _, _, g, _ in facs]
    for i in range(len(facs)):
        si, pi, x, nx = facs[i]
        for j in range(i + 1, len(facs)):
            sj, pj, y, ny = facs[j]
            if si == sj:
                if self_loop is None:
                    continue
                val = self_loop(x, -nx - 1, y, -ny - 1, max(slots[si][0]))
            else:
                val = between(x, -nx - 1, y, -ny - 1, max(slots[si][0]), max(slots[sj][0]))
            if val is None:
                continue
            sign = -1 if pars[j] and sum(pars[i + 1:j]) % 2 else 1
            new = list(slots)
            for s, p in sorted([(si, pi), (sj, pj)], reverse=True):
                G, D, m = new[s]
                new[s] = (G, D, m[:p] + m[p + 1:])
            out.append((tuple(new), val.scale(sign)))
    return out


def wick_exp(sec: ChiralSection, between, self_loop=None, sign=1) -> ChiralSection:
    """exp(sign * d_K) with d_K the sum of all single contractions."""
    out: dict = {}
    for key, k in sec.terms.items():
        slots, dol = key
        frontier = {slots: k}
        _acc(out, key, k)
        j = 0
        while frontier:
            j += 1
            nxt: dict = {}
            for sl, kk in frontier.items():
                for new, val in _contract_term_once(sec.gs, sl, between, self_loop):
                    _acc(nxt, new, kk * val)
            scale = Fraction(sign ** j, factorial(j))
            for sl, kk in nxt.items():
                _acc(out, (sl, dol), kk.scale(scale))
            frontier = nxt
    return sec.copy_with(out)


def _singular(gs, n, K: Optional[DiagKernel] = None):
    """Between-point contraction with <a,b> K, K a two-variable kernel (default 1/(z1-z2))."""
    def between(x, k, y, l, p, q):
        w = gs.pairing[x][y]
        if not w:
            return None
        if K is None:
            return contraction_kernel(n, p, q, k, l, w)
        base = K.extend(n) if K.n < n else K
        perm = list(range(n))
        # send variable 0 -> p and 1 -> q
        perm = _perm_to(n, {0: p, 1: q})
        kk = base.permute(perm)
        kk = kk.deriv_n(p, k).deriv_n(q, l)
        return kk.scale(Fraction(w, factorial(k) * factorial(l)))
    return between


def _perm_to(n, mapping):
    """A permutation of range(n) extending the given partial mapping."""
    perm = [None] * n
    used = set(mapping.values())
    for s, t in mapping.items():
        perm[s] = t
    free = iter(x for x in range(n) if x not in used)
    for i in range(n):
        if perm[i] is None:
            perm[i] = next(free)
    return perm


def contract_pair(sec: ChiralSection, K, i: int, j: int) -> ChiralSection:
    """One Wick contraction between a linear factor at point i and one at point j.

    K is a two-variable DiagKernel (multiplied by the pairing) or a
    RegularKernel.  i == j means a self-contraction, which needs a regular K.
    """
    gs, n = sec.gs, sec.n
    if i == j and not isinstance(K, RegularKernel):
        raise ChiralError("self-contraction needs a regular kernel")
    if isinstance(K, RegularKernel):
        def raw(x, k, y, l, p, q):
            return K.contraction(x, k, y, l, n, p, q)
    else:
        raw = _singular(gs, n, K)
    a, b = min(i, j), max(i, j)

    def between(x, kk, y, l, p, q):
        return raw(x, kk, y, l, p, q) if {p, q} == {a, b} else None

    def self_loop(x, kk, y, l, p):
        return raw(x, kk, y, l, p, p) if a == b == p else None

    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        for new, c in _contract_term_once(gs, slots, between, self_loop):
            _acc(out, (new, dol), k * c)
    return sec.copy_with(out)


def wick_exp_singular(sec: ChiralSection, K: Optional[DiagKernel] = None) -> ChiralSection:
    """e^{K_sing}: contractions between distinct points only."""
    return wick_exp(sec, _singular(sec.gs, sec.n, K))


def wick_exp_regular(sec: ChiralSection, Q: RegularKernel) -> ChiralSection:
    """e^{Q_reg}: all pairs, self-loops included."""
    n = sec.n
    return wick_exp(sec,
                    lambda x, k, y, l, p, q: Q.contraction(x, k, y, l, n, p, q),
                    lambda x, k, y, l, p: Q.contraction(x, k, y, l, n, p, p))


def wick_chain_map(sec: ChiralSection, Q: Optional[RegularKernel] = None) -> ChiralSection:
    """e^{P_sing + Q_reg}; the two contraction operators commute."""
    out = wick_exp_singular(sec)
    return wick_exp_regular(out, Q) if Q is not None else out


def contract_field(sec: ChiralSection, e: Dict[int, Sequence]) -> ChiralSection:
    """d_e: replace one linear factor a_(-k-1) at z by <a, d^(k) e>(z).

    e maps a generator index to the polynomial coefficients (in z) of its
    component along that generator's pairing partner, i.e. <a, e>(z).
    """
    gs, n = sec.gs, sec.n
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        facs = _factors(slots)
        pars = [gs.parity[g] for _, _, g, _ in facs]
        for idx, (si, pos, g, mode) in enumerate(facs):
            coeffs = e.get(g)
            if not coeffs:
                continue
            kk = -mode - 1
            z = max(slots[si][0])
            terms: Dict[Tuple[int, ...], Fraction] = {}
            for d, c in enumerate(coeffs):
                if d >= kk and c:
                    ex = [0] * n
                    ex[z] = d - kk
                    terms[tuple(ex)] = terms.get(tuple(ex), 0) + Fraction(c) * comb(d, kk)
            val = DiagKernel(Poly(n, terms))
            if val.is_zero():
                continue
            sign = -1 if pars[idx] and sum(pars[:idx]) % 2 else 1
            new = list(slots)
            G, D, m = new[si]
            new[si] = (G, D, m[:pos] + m[pos + 1:])
            _acc(out, (tuple(new), dol), (k * val).scale(sign))
    return sec.copy_with(out)


# ---------------------------------------------------- Sym-side helpers

def diagonal_pullback(sec: ChiralSection) -> ChiralSection:
    """Restrict a pole-free section of singleton slots to z_1 = ... = z_n (commutative product)."""
    gs, n = sec.gs, sec.n
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        if k.poles:
            raise ChiralError("pullback needs a regular kernel")
        kk = k
        for p in range(n - 1):
            kk = kk.identify(p, n - 1)
        word = []
        for G, D, m in slots:
            if D or len(G) != 1:
                raise ChiralError("pullback needs unmerged slots")
            word.extend(m)
        sign, mono = apply_word(gs, word, ())
        if not sign:
            continue
        slot = (tuple(range(n)), (), mono)
        _acc(out, ((slot,), dol), kk.scale(sign))
    return sec.copy_with(out)


def iterated_mu(sec: ChiralSection, method="wick", sym=False) -> ChiralSection:
    """Merge slots left to right: mu(...mu(mu(s1, s2), s3)..., s_n)."""
    cur = sec
    while True:
        lens = {len(slots) for slots, _ in cur.terms}
        if not lens or max(lens) <= 1:
            return cur
        if len(lens) > 1:
            raise ChiralError("terms with different slot counts")
        cur = mu_chiral(cur, 0, 1, method=method, sym=sym)


# ---------------------------------------------- normal ordering map

def local_normal_ordering(sec: ChiralSection, Q: Optional[RegularKernel]) -> ChiralSection:
    """The local form e^{Q_reg} tau(v): self-loops of Q at the point."""
    return sec if Q is None else wick_exp_regular(sec, Q)


def normal_ordering_map(target: ChiralSection, presentation: ChiralSection,
                        Q: Optional[RegularKernel] = None) -> ChiralSection:
    """W^v(v) = iterated mu_Sym of exp(d_P) applied to a linear-field presentation.

    The presentation must reproduce the target under the iterated chiral
    product; P = P_sing + Q_reg contracts factors at distinct points.
    """
    gs = presentation.gs
    for (slots, _), _k in presentation.terms.items():
        for G, D, m in slots:
            if len(m) > 1:
                raise ChiralError("presentation must carry linear fields")
    if iterated_mu(presentation) != target:
        raise ChiralError("presentation does not reproduce the state")
    n = presentation.n
    if Q is None:
        between = _singular(gs, n)
    else:
        sing = _singular(gs, n)

        def between(x, k, y, l, p, q):
            a = sing(x, k, y, l, p, q)
            b = Q.contraction(x, k, y, l, n, p, q)
            if a is None:
                return b
            return a if b is None else a + b
    contracted = wick_exp(presentation, between)
    return iterated_mu(contracted, sym=True)


def right_derivative(sec: ChiralSection, point: int, j: int) -> ChiralSection:
    """Right action of d^(j) along one point on unmerged sections.

    (f a)·d^(j) = (-1)^j sum_u (d^(u) f) T^(j-u) a, everything divided powers.
    """
    gs = sec.gs
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        idx = next(i for i, s in enumerate(slots) if s[0] == (point,))
        G, D, m = slots[idx]
        for u in range(j + 1):
            kd = k.deriv_n(point, u).scale(Fraction((-1) ** j, factorial(u)))
            if kd.is_zero():
                continue
            for m2, c in _translate_mono(gs, m, j - u).items():
                new = list(slots)
                new[idx] = (G, D, m2)
                _acc(out, (tuple(new), dol), kd.scale(c))
    return sec.copy_with(out)


def present_state(gs: GeneratorSet, mono, twist: Optional[DiagKernel] = None,
                  swap: bool = False, _cache=None) -> ChiralSection:
    """Two-point linear-field section whose chiral product is mono (x) 1 at z2.

    The leading term puts one factor at z1 and the rest at z2 over a simple
    pole times ``twist`` (a kernel equal to 1 on the diagonal).  Its product
    differs from the target by terms s (x) d_1^(j) of lower level; each is
    removed using a presentation of s acted on by d_1^(j), since the product
    is D-linear.
    """
    n = 2
    cache = {} if _cache is None else _cache
    key = mono
    if key in cache:
        return cache[key]
    tw = twist or DiagKernel.const(n, 1)
    if len(mono) > 2:
        raise ChiralError("states with more than two factors need more points")
    if len(mono) == 2:
        first, second = (mono[1], mono[0]) if swap else (mono[0], mono[1])
        sign = -1 if swap and gs.parity[mono[0][0]] and gs.parity[mono[1][0]] else 1
        slots = (((0,), (), (first,)), ((1,), (), (second,)))
    else:
        sign = 1
        slots = (((0,), (), ()), ((1,), (), tuple(mono)))
    lead = ChiralSection(gs, n, {(slots, ()): (tw * DiagKernel.diff(n, 0, 1, -1)).scale(sign)})
    target = ChiralSection(gs, n, {((((0, 1), (), tuple(mono)),), ()): DiagKernel.const(n, 1)})
    pres = lead
    resid = iterated_mu(lead) - target
    for (sl, dol), c in resid.terms.items():
        (G, D, m), = sl
        if gs.mono_level(m) >= gs.mono_level(mono):
            raise ChiralError("presentation recursion does not descend")
        sub = present_state(gs, m, twist, swap, cache)
        sub = right_derivative(sub, 0, dict(D).get(0, 0))
        sub = ChiralSection(gs, n, {key2: v * c for key2, v in sub.terms.items()})
        pres = pres - sub
    cache[key] = pres
    return pres
