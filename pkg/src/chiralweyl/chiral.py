"""Chiral envelope at a few marked points.

Sections
--------
A ``ChiralSection`` term is a tuple of *slots* times a kernel coefficient and
an optional Dolbeault monomial.  A slot is ``(points, derivs, monomial)``:
the points that have collided, the normal derivatives (divided powers)
``prod d_i^(k_i)`` over the non-base points, and a Fock monomial sitting at the
base point ``max(points)``.  A singleton slot is an ordinary marked point.

The transfer normal form ``s (x) d_1^(k)`` at base z_2 pairs with a test
function phi as ``s * (1/k!) d^k_{z1} phi |_diag``.  So

    mu_omega( dz1 dz2 / (z1 - z2)^(k+1) ) = 1 (x) d_1^(k)

and the residue of a simple pole is the unit.  Moving the base point uses the
right D-module action on sections, s.d = -(d_w + T) s.

Vacuum-module words
-------------------
A two-point vacuum-module section is ``{(m1, m2): kernel}``: the factor
e/(t - z_p)^(k+1) is stored as the mode e_(-k-1) of the monomial at point p.
Read with ``iota`` it is the word v1 v2 |0>; read with ``c`` it is v1 (x) v2.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import Dict, List, Optional, Sequence, Tuple

from .fock import (FockState, GeneratorSet, Monomial, VAC, _insert,
                   apply_mode_mono, format_state, nth_product, parse_state,
                   state_weight_bound)
from .kernels import (DiagKernel, ParseError, format_kernel, parse_kernel,
                      taylor_along_diagonal)

Slot = Tuple[Tuple[int, ...], Tuple[Tuple[int, int], ...], Monomial]
Dol = Tuple[Tuple[str, int], ...]  # a DolbeaultModel monomial, (symbol, power) pairs


class ChiralError(ValueError):
    pass


# ------------------------------------------------------------ helpers

def slot_base(slot: Slot) -> int:
    return max(slot[0])


def point_slot(p: int, mono: Monomial) -> Slot:
    return ((p,), (), mono)


def mono_parity(gs: GeneratorSet, m: Monomial) -> int:
    return sum(gs.parity[g] for g, _ in m) % 2


def koszul_sort(items: list, key, parity) -> Tuple[int, list]:
    """Stable sort with the Koszul sign of the permutation."""
    items = list(items)
    sign = 1
    for a in range(len(items)):
        for b in range(len(items) - 1 - a):
            if key(items[b]) > key(items[b + 1]):
                if parity(items[b]) and parity(items[b + 1]):
                    sign = -sign
                items[b], items[b + 1] = items[b + 1], items[b]
    return sign, items


def _acc(out: dict, key, val):
    if val is None or val.is_zero():
        return
    cur = out.get(key)
    new = val if cur is None else cur + val
    if new.is_zero():
        out.pop(key, None)
    else:
        out[key] = new


# ------------------------------------------------------------ sections

class ChiralSection:
    """Linear combination of slot configurations with kernel coefficients."""

    def __init__(self, gs: GeneratorSet, n: int, terms=None):
        self.gs = gs
        self.n = n
        self.terms: Dict[Tuple[Tuple[Slot, ...], Dol], DiagKernel] = {}
        for key, k in (terms or {}).items():
            _acc(self.terms, key, k)

    @classmethod
    def from_states(cls, gs, kernel: DiagKernel, states: Sequence[FockState], dol: Dol = ()):
        """kernel * states[0]@z1 (x) states[1]@z2 (x) ... (one slot per point)."""
        n = kernel.n
        if len(states) != n:
            raise ChiralError("one state per point is required")
        combos = [((), Fraction(1))]
        for p, s in enumerate(states):
            combos = [(acc + (point_slot(p, m),), c * cm) for acc, c in combos
                      for m, cm in s.terms.items()]
        out = cls(gs, n)
        for slots, c in combos:
            _acc(out.terms, (slots, tuple(dol)), kernel.scale(c))
        return out

    def copy_with(self, terms):
        return ChiralSection(self.gs, self.n, terms)

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            _acc(out, k, v)
        return self.copy_with(out)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self.copy_with({k: v.scale(c) for k, v in self.terms.items()})

    def __eq__(self, other):
        return isinstance(other, ChiralSection) and self.n == other.n and self.terms == other.terms

    def __repr__(self):
        return f"ChiralSection({format_section(self)})"

    def hodeg(self, model=None):
        """Set of |T| - q over the terms (no de Rham degree in this subsector)."""
        return {len(slots) - (model.mono_degree(dol) if model else 0) for slots, dol in self.terms}


def term_slots_parity(gs, slots, shifted=False):
    return [(mono_parity(gs, s[2]) + (1 if shifted else 0)) % 2 for s in slots]


def canonical_slots(gs, slots: Sequence[Slot], shifted=False) -> Tuple[int, Tuple[Slot, ...]]:
    sign, srt = koszul_sort(list(slots), key=lambda s: min(s[0]),
                            parity=lambda s: (mono_parity(gs, s[2]) + shifted) % 2)
    return sign, tuple(srt)


# ------------------------------------------------------ mode shifts

def shift_series(m: Monomial, order: int) -> List[Dict[Tuple[Tuple[int, int], ...], int]]:
    """Operator word of m with every mode translated by t, as a series in t.

    a_(-k-1) at z + t equals sum_j binom(k+j, j) t^j a_(-k-1-j) at z.
    """
    series: List[dict] = [{(): 1}] + [{} for _ in range(order)]
    for g, n in m:
        k = -n - 1
        new: List[dict] = [{} for _ in range(order + 1)]
        for d, words in enumerate(series):
            for w, c in words.items():
                for j in range(order + 1 - d):
                    nw = w + ((g, n - j),)
                    new[d + j][nw] = new[d + j].get(nw, 0) + c * comb(k + j, j)
        series = new
    return series


def apply_word(gs, word, m: Monomial) -> Tuple[int, Optional[Monomial]]:
    """Creation word (leftmost applied last) acting on monomial m."""
    sign = 1
    for g, n in reversed(word):
        s, m = _insert(gs, g, n, m)
        if not s:
            return 0, None
        sign *= s
    return sign, m


# ------------------------------------------------ contractions (pairs)

def contraction_kernel(n, p, q, k, l, pairing, regime="exact") -> DiagKernel:
    """<a,b> (1/k! l!) d^k_{z_p} d^l_{z_q} 1/(z_p - z_q), in closed form."""
    c = Fraction(factorial(k + l), factorial(k) * factorial(l)) * (-1) ** k * pairing
    return DiagKernel.diff(n, p, q, -(k + l + 1)).scale(c)


def contract_once(gs, m1: Monomial, m2: Monomial, kfun) -> List[Tuple[Monomial, Monomial, object]]:
    """All single contractions between a factor of m1 and a factor of m2.

    kfun(x, k, y, l) gives the coefficient (any ring element supporting
    .scale) for contracting x_(-k-1) of m1 with y_(-l-1) of m2; returns
    None when they do not pair.  The word is m1 m2; the factor of m1 is moved
    to the right end of m1 and the factor of m2 to the left end of m2.
    """
    out = []
    par1 = [gs.parity[g] for g, _ in m1]
    par2 = [gs.parity[g] for g, _ in m2]
    for i, (x, nx) in enumerate(m1):
        s1 = -1 if par1[i] and sum(par1[i + 1:]) % 2 else 1
        for j, (y, ny) in enumerate(m2):
            s2 = -1 if par2[j] and sum(par2[:j]) % 2 else 1
            val = kfun(x, -nx - 1, y, -ny - 1)
            if val is None:
                continue
            out.append((m1[:i] + m1[i + 1:], m2[:j] + m2[j + 1:], val.scale(s1 * s2)))
    return out


def exp_contract_pair(gs, m1: Monomial, m2: Monomial, kfun, sign=1) -> Dict[Tuple[Monomial, Monomial], object]:
    """exp(sign * d_K) on m1 (x) m2: sum_j sign^j/j! (d_K)^j."""
    frontier = {(m1, m2): 1}  # 1 stands for the unit coefficient
    j = 0
    acc_terms = {(m1, m2): 1}
    while frontier:
        j += 1
        nxt: dict = {}
        for (a, b), coeff in frontier.items():
            for a2, b2, val in contract_once(gs, a, b, kfun):
                v = val if coeff == 1 else coeff * val
                cur = nxt.get((a2, b2))
                nxt[(a2, b2)] = v if cur is None else cur + v
        nxt = {k: v for k, v in nxt.items() if not v.is_zero()}
        scale = Fraction(sign ** j, factorial(j))
        for key, v in nxt.items():
            w = v.scale(scale)
            cur = acc_terms.get(key)
            acc_terms[key] = w if cur is None else (w if cur == 1 else cur + w)
        frontier = nxt
    return acc_terms


# --------------------------------------------- c and iota on two points

def _unit(n):
    return DiagKernel.const(n, 1)


def map_c(gs, V: Dict[Tuple[Monomial, Monomial], DiagKernel], p=0, q=1) -> Dict[Tuple[Monomial, Monomial], DiagKernel]:
    """c: exterior product v1 (x) v2 written as vacuum-module words.

    c(v1 (x) v2) = iota(exp(+P_sing)(v1 (x) v2)) with P_sing = <,>/(z_p - z_q).
    """
    out: dict = {}
    for (m1, m2), k in V.items():
        n = k.n

        def kfun(x, kk, y, ll):
            w = gs.pairing[x][y]
            return contraction_kernel(n, p, q, kk, ll, w) if w else None

        for key, c in exp_contract_pair(gs, m1, m2, kfun, +1).items():
            _acc(out, key, k if c == 1 else k * c)
    return out


def iota_to_c_wick(gs, V, p=0, q=1):
    """iota(v1 v2|0>) = c(exp(-P_sing)(v1 (x) v2)), result in exterior coordinates."""
    out: dict = {}
    for (m1, m2), k in V.items():
        n = k.n

        def kfun(x, kk, y, ll):
            w = gs.pairing[x][y]
            return contraction_kernel(n, p, q, kk, ll, w) if w else None

        for key, c in exp_contract_pair(gs, m1, m2, kfun, -1).items():
            _acc(out, key, k if c == 1 else k * c)
    return out


def _expand_at_other(n, p, q, k, m, regime="exact") -> DiagKernel:
    """Coefficient of (t - z_q)^m in 1/(t - z_p)^(k+1)."""
    return DiagKernel.diff(n, p, q, -(k + 1 + m)).scale((-1) ** (k + 1) * comb(k + m, m))


def iota_to_c_modes(gs, V, p=0, q=1):
    """Same map computed in the two-point module V_{z_p} (x) V_{z_q} by modes.

    Each factor x/(t - z_r)^(k+1) acts as x_(-k-1) at z_r and, through its
    Taylor expansion at the other point, as annihilation modes there.
    """
    out: dict = {}
    for (m1, m2), k in V.items():
        n = k.n
        state = {(VAC, VAC): _unit(n)}
        word = [(p, g, md) for g, md in m1] + [(q, g, md) for g, md in m2]
        for r, g, md in reversed(word):
            other = q if r == p else p
            kk = -md - 1
            new: dict = {}
            for (a, b), c in state.items():
                at_r, at_o = (a, b) if r == p else (b, a)
                # creation at its own point
                for mm, cc in apply_mode_mono(gs, g, md, at_r).items():
                    sgn = 1
                    if r == q and gs.parity[g] and mono_parity(gs, a):
                        sgn = -1
                    key = (mm, b) if r == p else (a, mm)
                    _acc(new, key, c.scale(cc * sgn))
                # annihilation at the other point
                for mode_o in range(0, gs.mono_level(at_o)):
                    res = apply_mode_mono(gs, g, mode_o, at_o)
                    if not res:
                        continue
                    coef = _expand_at_other(n, r, other, kk, mode_o)
                    for mm, cc in res.items():
                        sgn = 1
                        if other == q and gs.parity[g] and mono_parity(gs, a):
                            sgn = -1
                        key = (a, mm) if other == q else (mm, b)
                        _acc(new, key, (c * coef).scale(cc * sgn))
            state = new
        for key, c in state.items():
            _acc(out, key, k * c)
    return out


def exchange_coefficient(n, k, l, pairing=1) -> DiagKernel:
    """Closed form for moving a/(t-z1)^(k+1) past b/(t-z2)^(l+1)."""
    c = Fraction(factorial(k + l), factorial(k) * factorial(l)) * (-1) ** (k + 1) * pairing
    return DiagKernel.diff(n, 0, 1, -(k + l + 1)).scale(c)


def iota_inverse_c(gs, W, N: int, p=0, q=1):
    """iota^{-1} c((z_p - z_q)^N W); raises if a pole survives."""
    V = map_c(gs, W, p, q)
    n = next(iter(W.values())).n if W else 2
    f = DiagKernel.diff(n, p, q, N)
    out = {}
    for key, k in V.items():
        kk = k * f
        if kk.pole_order(p, q):
            raise ChiralError(f"N={N} too small: residual pole of order {kk.pole_order(p, q)}")
        _acc(out, key, kk)
    return out


# ------------------------------------------------------ mu_omega

def mu_omega(k: DiagKernel, i: int, j: int) -> Dict[int, DiagKernel]:
    """Transfer normal form {r: coeff of d_i^(r) based at z_j} for the kernel k."""
    N = k.pole_order(i, j)
    if N == 0:
        return {}
    cs = taylor_along_diagonal(k, i, j, N - 1)
    return {N - 1 - a: c for a, c in enumerate(cs) if not c.is_zero()}


def transfer_times_regular(N: int, series: Sequence) -> Dict[int, object]:
    """(1 (x) d^(N-1)) multiplied by a regular G = sum_j g_j t^j:  t^j d^(r) = d^(r-j)."""
    out = {}
    for jdx, g in enumerate(series[:N]):
        r = N - 1 - jdx
        if g is not None and not g.is_zero():
            out[r] = g
    return out


# ------------------------------------------------------ merging slots

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for a in range(total + 1):
        for rest in _compositions(total - a, parts - 1):
            yield (a,) + rest


def _merge_derivs(*ds: Dict[int, int]) -> Tuple[int, Dict[int, int]]:
    """Product of divided powers: d^(a) d^(b) = binom(a+b, a) d^(a+b)."""
    out: Dict[int, int] = {}
    coeff = 1
    for d in ds:
        for pt, k in d.items():
            if k:
                prev = out.get(pt, 0)
                coeff *= comb(prev + k, k)
                out[pt] = prev + k
    return coeff, out


def _slot_from(points, derivs: Dict[int, int], mono) -> Slot:
    return (tuple(sorted(points)), tuple(sorted((p, k) for p, k in derivs.items() if k)), mono)


def _pushforward_power(group, k) -> List[Tuple[Dict[int, int], int]]:
    """(sum_{i in group} d_i)^(k) as divided-power monomials (coefficient 1 each)."""
    g = sorted(group)
    return [(dict(zip(g, comp)), 1) for comp in _compositions(k, len(g))]


def rebase(gs, points, base_old: int, derivs: Dict[int, int], mono: Monomial,
           kernel: DiagKernel) -> List[Tuple[Slot, DiagKernel]]:
    """Rewrite s (x) prod d_i^(k_i) based at base_old with base max(points).

    Uses d_B = D - sum_{i != B} d_i with D the right action s.d = -(d_w + T) s.
    """
    B = max(points)
    if B == base_old:
        return [(_slot_from(points, derivs, mono), kernel)]
    m = derivs.get(B, 0)
    rest = {p: k for p, k in derivs.items() if p != B}
    others = [p for p in points if p != B]
    out: List[Tuple[Slot, DiagKernel]] = []
    # swap variable names base_old <-> B in the kernel (B does not occur)
    perm = list(range(kernel.n))
    perm[base_old], perm[B] = B, base_old
    for j in range(m + 1):
        # D^(j) = (-1)^j sum_u d_w^(u) T^(j-u)
        for u in range(j + 1):
            kd = kernel.deriv_n(base_old, u).scale(Fraction((-1) ** j, factorial(u)))
            if kd.is_zero():
                continue
            st = _translate_mono(gs, mono, j - u)
            for mono2, cs in st.items():
                kk = kd.scale(cs).permute(perm)
                for comp, _ in _pushforward_power(others, m - j):
                    c, d = _merge_derivs(comp, rest)
                    out.append((_slot_from(points, d, mono2), kk.scale(c * (-1) ** (m - j))))
    return out


def _translate_mono(gs, mono, j) -> Dict[Monomial, Fraction]:
    """T^(j) = T^j / j! on a monomial."""
    cur = {mono: Fraction(1)}
    for step in range(1, j + 1):
        nxt: Dict[Monomial, Fraction] = {}
        for m, c in cur.items():
            for idx, (g, n) in enumerate(m):
                word = list(m[:idx]) + [(g, n - 1)] + list(m[idx + 1:])
                s, mm = apply_word(gs, word, VAC)
                if s:
                    v = nxt.get(mm, 0) + c * s * (-n) / step
                    if v:
                        nxt[mm] = v
                    else:
                        nxt.pop(mm, None)
        cur = nxt
    return cur


def _pair_product(gs, m1, m2, kernel, b1, b2, method, sym) -> Dict[int, Dict[Monomial, DiagKernel]]:
    """Transfer-form product of m1 at z_b1 with m2 at z_b2: {r: {mono: kernel}}."""
    n = kernel.n
    P = kernel.pole_order(b1, b2)
    if method == "modes" and not sym:
        return _pair_product_modes(gs, m1, m2, kernel, b1, b2)
    lvl = gs.mono_level(m1) + gs.mono_level(m2)
    N = P + (0 if sym else lvl)
    if N == 0:
        return {}
    if sym:
        V = {(m1, m2): kernel}
    else:
        V = map_c(gs, {(m1, m2): kernel}, b1, b2)
    f = DiagKernel.diff(n, b1, b2, N)
    out: Dict[int, Dict[Monomial, DiagKernel]] = {}
    for (a, b), k in V.items():
        g = k * f
        if g.pole_order(b1, b2):
            raise ChiralError("pole order bound violated")
        kser = taylor_along_diagonal(g, b1, b2, N - 1)
        sser = shift_series(a, N - 1)
        G: List[Dict[Monomial, DiagKernel]] = [dict() for _ in range(N)]
        for x in range(N):
            if kser[x].is_zero():
                continue
            for y in range(N - x):
                for word, cw in sser[y].items():
                    s, mono = apply_word(gs, list(word), b)
                    if s:
                        _acc(G[x + y], mono, kser[x].scale(cw * s))
        for r, gm in transfer_times_regular(N, [_Bag(d) for d in G]).items():
            tgt = out.setdefault(r, {})
            for mono, kk in gm.d.items():
                _acc(tgt, mono, kk)
    return {r: d for r, d in out.items() if d}


class _Bag:
    def __init__(self, d):
        self.d = d

    def is_zero(self):
        return not self.d


def _pair_product_modes(gs, m1, m2, kernel, b1, b2):
    """Oracle: coefficient of t^{-r-1} in kernel(z+t, z) Y(m1, t) m2 via n-th products."""
    P = kernel.pole_order(b1, b2)
    a = FockState({m1: 1})
    b = FockState({m2: 1})
    W = int(state_weight_bound(gs, a) + state_weight_bound(gs, b))
    top = W + P + 1
    kl = taylor_along_diagonal(kernel, b1, b2, top + P)  # kl[x]: coeff of t^(x-P)
    out: Dict[int, Dict[Monomial, DiagKernel]] = {}
    # t^{x-P} * t^{-nn-1} = t^{-r-1}  =>  nn = x - P + r
    for x, kx in enumerate(kl):
        if kx.is_zero():
            continue
        for r in range(0, P + W + 2):
            nn = x - P + r
            if nn > W:
                continue
            prod = nth_product(gs, a, nn, b)
            for mono, c in prod.terms.items():
                _acc(out.setdefault(r, {}), mono, kx.scale(c))
    return {r: d for r, d in out.items() if d}


def mu_slots(gs, X: Slot, Y: Slot, kernel: DiagKernel, method="wick", sym=False) -> List[Tuple[Slot, DiagKernel]]:
    """mu(X (x) Y) for two slots, X first; result based at max of the union."""
    G1, D1, m1 = X
    G2, D2, m2 = Y
    b1, b2 = max(G1), max(G2)
    prod = _pair_product(gs, m1, m2, kernel, b1, b2, method, sym)
    points = tuple(sorted(G1 + G2))
    out: List[Tuple[Slot, DiagKernel]] = []
    d1, d2 = dict(D1), dict(D2)
    for r, monos in prod.items():
        for comp, _ in _pushforward_power(G1, r):
            c, d = _merge_derivs(comp, d1, d2)
            for mono, kk in monos.items():
                out.extend(rebase(gs, points, b2, d, mono, kk.scale(c)))
    return out


def mu_chiral(sec: ChiralSection, i: int = 0, j: int = 1, method="wick", sym=False) -> ChiralSection:
    """Chiral product of slot i (first) with slot j (second) in every term.

    Slots are indexed by their position in each term's canonical slot order.
    The merged slot keeps Koszul signs of the unshifted algebra.
    """
    gs = sec.gs
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        if max(i, j) >= len(slots) or i == j:
            raise ChiralError("invalid merge")
        X, Y = slots[i], slots[j]
        rest = [s for idx, s in enumerate(slots) if idx not in (i, j)]
        sign = _front_sign(gs, slots, i, j, shifted=False)
        for slot, kk in mu_slots(gs, X, Y, k, method, sym):
            s2, canon = canonical_slots(gs, [slot] + rest)
            _acc(out, (canon, dol), kk.scale(sign * s2))
    return sec.copy_with(out)


def _front_sign(gs, slots, i, j, shifted) -> int:
    """Koszul sign for reordering slots to (slot_i, slot_j, rest...)."""
    par = term_slots_parity(gs, slots, shifted)
    order = [i, j] + [x for x in range(len(slots)) if x not in (i, j)]
    sign = 1
    for a in range(len(order)):
        for b in range(a + 1, len(order)):
            if order[a] > order[b] and par[order[a]] and par[order[b]]:
                sign = -sign
    return sign


def d_mu(sec: ChiralSection, method="wick", sym=False) -> ChiralSection:
    """Chevalley differential: sum over pairs of mu[1] with shifted Koszul signs.

    mu[1](sx, sy) = (-1)^|x| s mu(x, y); the merged slot is put in front and
    then sorted with shifted parities.  Dolbeault factors sit to the right.
    """
    gs = sec.gs
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        T = len(slots)
        for i in range(T):
            for j in range(i + 1, T):
                X, Y = slots[i], slots[j]
                rest = [s for idx, s in enumerate(slots) if idx not in (i, j)]
                sign = _front_sign(gs, slots, i, j, shifted=True)
                sign *= (-1) ** mono_parity(gs, X[2])
                for slot, kk in mu_slots(gs, X, Y, k, method, sym):
                    s2, canon = canonical_slots(gs, [slot] + rest, shifted=True)
                    _acc(out, (canon, dol), kk.scale(sign * s2))
    return sec.copy_with(out)


def mu_sym(sec: ChiralSection, i=0, j=1) -> ChiralSection:
    """mu_omega on the kernel tensored with the commutative product of symbols."""
    return mu_chiral(sec, i, j, sym=True)


def apply_dbar_section(sec: ChiralSection, model) -> ChiralSection:
    """dbar on the Dolbeault factor, passing the shifted slots (Koszul sign)."""
    gs = sec.gs
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        par = sum(term_slots_parity(gs, slots, shifted=True)) % 2
        for mono, c in model.apply_dbar({dol: Fraction(1)}).items():
            _acc(out, (slots, mono), k.scale(c * (-1) ** par))
    return sec.copy_with(out)


def permute_points(sec: ChiralSection, perm: Sequence[int]) -> ChiralSection:
    """Relabel point p -> perm[p] (states travel with their points)."""
    gs = sec.gs
    out: dict = {}
    for (slots, dol), k in sec.terms.items():
        new_slots = []
        for G, D, m in slots:
            pts = tuple(perm[p] for p in G)
            new_slots.append((pts, {perm[p]: kk for p, kk in D}, m, max(perm[p] for p in G)))
        kk = k.permute(perm)
        pieces = [((), kk, 1)]
        for pts, D, m, b_old in new_slots:
            nxt = []
            for acc, ker, sg in pieces:
                for slot, ker2 in rebase(gs, pts, b_old, D, m, ker):
                    nxt.append((acc + (slot,), ker2, sg))
            pieces = nxt
        for acc, ker, sg in pieces:
            s2, canon = canonical_slots(gs, list(acc))
            _acc(out, (canon, dol), ker.scale(sg * s2))
    return sec.copy_with(out)


# ------------------------------------------------------------ text form

def format_section(sec: ChiralSection) -> str:
    gs = sec.gs
    if sec.is_zero():
        return "0"
    parts = []
    for (slots, dol), k in sorted(sec.terms.items(), key=lambda kv: repr(kv[0])):
        pieces = [f"({format_kernel(k)})"]
        for G, D, m in slots:
            st = format_state(gs, FockState({m: 1}))
            where = "@" + "".join(f"z{p + 1}" for p in G) if len(G) == 1 else "@{" + ",".join(f"z{p + 1}" for p in G) + "}"
            dd = "".join(f" d{p + 1}^({kk})" for p, kk in D)
            pieces.append(f"({st}) {where}{dd}")
        if dol:
            pieces.append("[" + " ".join(s if p == 1 else f"{s}^{p}" for s, p in dol) + "]")
        parts.append(" * ".join(pieces))
    return " + ".join(parts)


def _split_top(src: str, seps: str):
    """Split at top-level separators; returns [(sep, piece)], sep '' for the first."""
    out, depth, cur, sep = [], 0, "", ""
    i = 0
    while i < len(src):
        ch = src[i]
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if depth == 0 and ch in seps and (cur.strip() or ch not in "+-"):
            out.append((sep, cur))
            sep, cur = ch, ""
        else:
            cur += ch
        i += 1
    out.append((sep, cur))
    return out


def parse_chain(gs: GeneratorSet, src: str, n: Optional[int] = None) -> ChiralSection:
    """Parse ``a(-1)|0> @z1 * b(-1)|0> @z2 / (z1-z2)`` style sums.

    Each term is a product of ``state @zK`` factors (one per point, states in
    parentheses when they carry coefficients or several terms) and kernel
    factors; ``/`` divides by a kernel.
    """
    import re
    pts = [int(x) for x in re.findall(r"@z(\d+)", src)]
    kv = [int(x) for x in re.findall(r"(?<![A-Za-z0-9_])z(\d+)", src)]
    if n is None:
        n = max(pts + kv, default=1)
    total = ChiralSection(gs, n)
    for sign, term in _split_top(src, "+-"):
        if not term.strip():
            raise ParseError("empty term", src, 0)
        kernel = DiagKernel.const(n, -1 if sign == "-" else 1)
        states: Dict[int, FockState] = {}
        for op, piece in _split_top(term, "*/"):
            piece = piece.strip()
            m = re.fullmatch(r"(.*?)\s*@z(\d+)", piece, re.S)
            if m:
                if op == "/":
                    raise ParseError("cannot divide by a state", src, src.find(piece))
                body = m.group(1).strip()
                if body.startswith("(") and body.endswith(")"):
                    body = body[1:-1]
                p = int(m.group(2)) - 1
                if p in states:
                    raise ParseError(f"point z{p + 1} used twice", src, src.find(piece))
                states[p] = parse_state(gs, body)
            else:
                try:
                    kf = parse_kernel(piece, n)
                except ParseError as exc:
                    raise ParseError(str(exc), src, src.find(piece)) from None
                if op == "/":
                    from .kernels import kernel_divide
                    kernel = kernel_divide(kernel, kf)
                else:
                    kernel = kernel * kf
        sts = [states.get(p, FockState.vacuum()) for p in range(n)]
        total = total + ChiralSection.from_states(gs, kernel, sts)
    return total


def jacobi_defect(sec: ChiralSection, method="wick") -> ChiralSection:
    """mu(a, mu(b, c)) - mu(mu(a, b), c) - (-1)^{|a||b|} mu(b, mu(a, c)) on 3-slot terms.

    The Koszul sign of the last term comes out of reordering the slots.
    """
    gs = sec.gs
    out = ChiralSection(gs, sec.n)
    for key, k in sec.terms.items():
        slots = key[0]
        if len(slots) != 3:
            raise ChiralError("Jacobi defect needs three slots")
        one = sec.copy_with({key: k})
        a_bc = mu_chiral(mu_chiral(one, 1, 2, method), 0, 1, method)
        ab_c = mu_chiral(mu_chiral(one, 0, 1, method), 0, 1, method)
        b_ac = mu_chiral(mu_chiral(one, 0, 2, method), 1, 0, method)
        out = out + a_bc - ab_c - b_ac
    return out
