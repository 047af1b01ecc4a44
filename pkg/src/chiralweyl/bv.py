"""BV algebra of zero modes.

Polynomials in even symbols e0_i and odd symbols e1_j.  The Laplacian is
Delta = sum_ij I2^{ij} d/de0_i d/de1_j with I2 the inverse of the pairing
matrix [integral <e1_j, e0_i>]; this is the coefficient that contracting e0_i
against e1_j through dbar P produces.  It lowers the odd count by one.
Odd derivatives act from the left.
"""
from __future__ import annotations

import re
from fractions import Fraction
from math import factorial
from typing import Dict, Tuple

from .kernels import ParseError, RegimeError

Mono = Tuple[Tuple[int, ...], Tuple[int, ...]]  # (even exponents, sorted odd indices)

COND_LIMIT = 1e12


class BVError(ValueError):
    pass


def invert_matrix(M):
    """Exact inverse over Fractions, or numpy inverse with a conditioning guard."""
    rows = [list(r) for r in M]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("matrix must be square")
    floaty = any(isinstance(x, (float, complex)) for r in rows for x in r)
    if floaty:
        if any(isinstance(x, Fraction) for r in rows for x in r):
            raise RegimeError("mixed scalar regimes in matrix")
        import numpy as np
        A = np.array(rows, dtype=complex)
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise ZeroDivisionError(f"pairing matrix ill-conditioned (cond={cond:.3g})")
        return np.linalg.inv(A).tolist()
    A = [[Fraction(x) for x in r] + [Fraction(int(i == k)) for k in range(n)]
         for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [x * inv for x in A[col]]
        for r in range(n):
            if r != col and A[r][col]:
                f = A[r][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
    return [r[n:] for r in A]


class HarmonicBackground:
    """Harmonic symbols e0_i, e1_j with pairing[j][i] = integral <e1_j, e0_i>."""

    def __init__(self, pairing):
        self.pairing = [list(r) for r in pairing]
        self.m = len(self.pairing)
        try:
            self.I2 = invert_matrix(self.pairing)
        except ZeroDivisionError as exc:
            raise BVError(f"singular pairing: {exc}") from None
        self.I1 = [[self.I2[j][i] for j in range(self.m)] for i in range(self.m)]

    def __repr__(self):
        return f"HarmonicBackground(m={self.m})"


def _odd_mul(a: Tuple[int, ...], b: Tuple[int, ...]):
    if set(a) & set(b):
        return 0, ()
    seq = list(a) + list(b)
    sign = 1
    # count inversions
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


class BVPolynomial:
    __slots__ = ("m", "terms")

    def __init__(self, m: int, terms=None):
        self.m = m
        t = {}
        for (ev, od), c in (terms or {}).items():
            ev, od = tuple(ev), tuple(od)
            if len(ev) != m or any(not 0 <= j < m for j in od):
                raise BVError("monomial out of range")
            if len(set(od)) != len(od):
                continue
            sign, od = _odd_mul(od, ())
            if c:
                k = (ev, od)
                v = t.get(k, 0) + sign * (c if isinstance(c, complex) else Fraction(c))
                if v:
                    t[k] = v
                else:
                    t.pop(k, None)
        self.terms: Dict[Mono, object] = t

    @classmethod
    def const(cls, m, c=1):
        return cls(m, {((0,) * m, ()): c})

    @classmethod
    def e0(cls, m, i, c=1):
        ev = [0] * m
        ev[i] = 1
        return cls(m, {(tuple(ev), ()): c})

    @classmethod
    def e1(cls, m, j, c=1):
        return cls(m, {((0,) * m, (j,)): c})

    def _new(self, t):
        p = BVPolynomial.__new__(BVPolynomial)
        p.m, p.terms = self.m, t
        return p

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        if not isinstance(other, BVPolynomial):
            other = BVPolynomial.const(self.m, other)
        t = dict(self.terms)
        for k, c in other.terms.items():
            v = t.get(k, 0) + c
            if v:
                t[k] = v
            else:
                t.pop(k, None)
        return self._new(t)

    __radd__ = __add__

    def __neg__(self):
        return self._new({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if not c:
            return self._new({})
        return self._new({k: v * c for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, BVPolynomial):
            return self.scale(other)
        t: dict = {}
        for (e1, o1), c1 in self.terms.items():
            for (e2, o2), c2 in other.terms.items():
                s, od = _odd_mul(o1, o2)
                if not s:
                    continue
                k = (tuple(a + b for a, b in zip(e1, e2)), od)
                v = t.get(k, 0) + s * c1 * c2
                if v:
                    t[k] = v
                else:
                    t.pop(k, None)
        return self._new(t)

    def __rmul__(self, c):
        return self.scale(c)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = BVPolynomial.const(self.m, other)
        return isinstance(other, BVPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"BVPolynomial({format_bv(self)})"

    def parity(self) -> int:
        ps = {len(od) % 2 for _, od in self.terms}
        if len(ps) > 1:
            raise BVError("inhomogeneous parity")
        return ps.pop() if ps else 0

    def d_even(self, i):
        t = {}
        for (ev, od), c in self.terms.items():
            if ev[i]:
                e = list(ev)
                e[i] -= 1
                t[(tuple(e), od)] = c * ev[i]
        return self._new(t)

    def d_odd(self, j):
        """Left derivative by e1_j."""
        t = {}
        for (ev, od), c in self.terms.items():
            if j in od:
                k = od.index(j)
                t[(ev, od[:k] + od[k + 1:])] = c * (-1) ** k
        return self._new(t)

    def constant_term(self):
        return self.terms.get(((0,) * self.m, ()), 0)


def bv_laplacian(p: BVPolynomial, bg: HarmonicBackground) -> BVPolynomial:
    if bg.m != p.m:
        raise BVError("background size mismatch")
    out = BVPolynomial(p.m)
    for j in range(p.m):
        dj = p.d_odd(j)
        if dj.is_zero():
            continue
        for i in range(p.m):
            c = bg.I2[i][j]
            if c:
                out = out + dj.d_even(i).scale(c)
    return out


def bv_bracket(a: BVPolynomial, b: BVPolynomial, bg: HarmonicBackground) -> BVPolynomial:
    """{a,b} = Delta(ab) - (Delta a) b - (-1)^|a| a Delta b."""
    pa = a.parity()
    return (bv_laplacian(a * b, bg) - bv_laplacian(a, bg) * b
            - (a * bv_laplacian(b, bg)).scale((-1) ** pa))


def bv_exp(I: BVPolynomial, max_power=None) -> BVPolynomial:
    """e^I for nilpotent I (every monomial must contain an odd symbol)."""
    if I.constant_term():
        raise BVError("I has a constant term; e^I does not truncate")
    for (ev, od) in I.terms:
        if not od:
            raise BVError("I is not nilpotent (pure even monomial)")
    cap = max_power if max_power is not None else I.m + 1
    out = BVPolynomial.const(I.m)
    power = BVPolynomial.const(I.m)
    for k in range(1, cap + 2):
        power = power * I
        if power.is_zero():
            return out
        out = out + power.scale(Fraction(1, factorial(k)))
    raise BVError("I is not nilpotent")


def check_qme(I: BVPolynomial, bg: HarmonicBackground) -> dict:
    """Evaluate Delta e^I = 0 and Delta I + 1/2 {I,I} = 0 and compare."""
    eI = bv_exp(I)
    lhs = bv_laplacian(eI, bg)
    master = bv_laplacian(I, bg) + bv_bracket(I, I, bg).scale(Fraction(1, 2))
    a, b = lhs.is_zero(), master.is_zero()
    return {"exp_form": a, "master_form": b, "agree": a == b,
            "delta_exp": lhs, "master": master}


# ------------------------------------------------------------ grammar

_BV_TOK = re.compile(r"\s*(?:(\d+)|e([01])_(\d+)|([-+*/^()]))")


def parse_bv(src: str, m: int = None) -> BVPolynomial:
    """Parse ``3 e0_1 e1_2 - 1/2 e0_1^2 + ...``."""
    toks, pos = [], 0
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        mt = _BV_TOK.match(src, pos)
        if not mt:
            raise ParseError(f"unexpected character {src[pos]!r}", src, pos)
        st = mt.start(mt.lastindex)
        if mt.group(1):
            toks.append(("num", int(mt.group(1)), st))
        elif mt.group(2):
            toks.append(("sym", (int(mt.group(2)), int(mt.group(3))), st))
        else:
            toks.append(("op", mt.group(4), st))
        pos = mt.end()
    toks.append(("end", None, len(src)))
    idx = [t[1][1] for t in toks if t[0] == "sym"]
    if any(i < 1 for i in idx):
        raise ParseError("symbols are numbered from 1", src, 0)
    need = max(idx, default=1)
    if m is None:
        m = need
    elif need > m:
        raise ParseError(f"symbol index {need} exceeds {m}", src, 0)
    i = 0
    total = BVPolynomial(m)
    first = True
    while toks[i][0] != "end":
        sign = 1
        if toks[i][0] == "op" and toks[i][1] in "+-":
            sign = -1 if toks[i][1] == "-" else 1
            i += 1
        elif not first:
            raise ParseError("expected '+' or '-'", src, toks[i][2])
        coeff = Fraction(1)
        if toks[i][0] == "num":
            coeff = Fraction(toks[i][1])
            i += 1
            if toks[i][0] == "op" and toks[i][1] == "/":
                i += 1
                if toks[i][0] != "num":
                    raise ParseError("expected denominator", src, toks[i][2])
                coeff /= toks[i][1]
                i += 1
        term = BVPolynomial.const(m, sign * coeff)
        got = toks[i - 1][0] == "num" if i else False
        while toks[i][0] in ("sym",) or (toks[i][0] == "op" and toks[i][1] == "*"):
            if toks[i][0] == "op":
                i += 1
                continue
            kind, k = toks[i][1]
            i += 1
            power = 1
            if toks[i][0] == "op" and toks[i][1] == "^":
                i += 1
                if toks[i][0] != "num":
                    raise ParseError("expected exponent", src, toks[i][2])
                power = toks[i][1]
                i += 1
            f = BVPolynomial.e0(m, k - 1) if kind == 0 else BVPolynomial.e1(m, k - 1)
            for _ in range(power):
                term = term * f
            got = True
        if not got:
            raise ParseError("expected a term", src, toks[i][2])
        total = total + term
        first = False
    if first:
        raise ParseError("empty polynomial", src, 0)
    return total


def format_bv(p: BVPolynomial) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for (ev, od) in sorted(p.terms, key=lambda k: (-(sum(k[0]) + len(k[1])), tuple(-x for x in k[0]), k[1])):
        c = p.terms[(ev, od)]
        syms = []
        for i, e in enumerate(ev):
            if e:
                syms.append(f"e0_{i + 1}" + (f"^{e}" if e > 1 else ""))
        syms += [f"e1_{j + 1}" for j in od]
        mono = " ".join(syms)
        neg = isinstance(c, Fraction) and c < 0
        a = -c if neg else c
        cs = str(a) if isinstance(a, Fraction) else repr(a)
        body = mono if (a == 1 and mono) else (f"{cs} {mono}" if mono else cs)
        parts.append(("-" if neg else "+", body))
    s = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sg, b in parts[1:]:
        s += f" {sg} {b}"
    return s
