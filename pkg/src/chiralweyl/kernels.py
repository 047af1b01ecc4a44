"""Rational kernels with poles on diagonals, and a finite Dolbeault model.

A ``DiagKernel`` is ``num / (prod (z_i - z_j)^N_ij * prod z_i^M_i)`` with a
polynomial numerator.  Denominators are kept factored so cancellation is exact
and the canonical form (no common factor left) makes equality decidable.

Variables are 0-based internally; the text grammar uses ``z1 .. zn``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Dict, List, Optional, Tuple


class RegimeError(TypeError):
    """Exact and floating scalars were mixed."""


class KernelError(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, msg, src="", pos=0):
        line = src.count("\n", 0, pos) + 1
        col = pos - (src.rfind("\n", 0, pos) + 1) + 1
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line, self.col = line, col


EXACT, FLOAT = "exact", "float"


def regime_of(x) -> str:
    if isinstance(x, (int, Fraction)):
        return EXACT
    if isinstance(x, (float, complex)):
        return FLOAT
    raise RegimeError(f"not a scalar: {x!r}")


def to_scalar(x, regime=EXACT):
    r = regime_of(x)
    if regime == EXACT:
        if r != EXACT:
            raise RegimeError("float value in exact regime")
        return Fraction(x)
    if r != FLOAT and not isinstance(x, int):
        raise RegimeError("rational value in float regime")
    return complex(x)


# ---------------------------------------------------------------- polynomials

class Poly:
    """Sparse polynomial in n variables: {exponent tuple: coefficient}."""

    __slots__ = ("n", "terms", "regime")

    def __init__(self, n: int, terms=None, regime=EXACT):
        self.n = n
        self.regime = regime
        t = {}
        for e, c in (terms or {}).items():
            if len(e) != n:
                raise KernelError("exponent length mismatch")
            c = to_scalar(c, regime)
            if c != 0:
                t[tuple(e)] = c
        self.terms = t

    @classmethod
    def _raw(cls, n, terms, regime):
        p = cls.__new__(cls)
        p.n, p.terms, p.regime = n, terms, regime
        return p

    @classmethod
    def const(cls, n, c, regime=EXACT):
        return cls(n, {(0,) * n: c}, regime)

    @classmethod
    def var(cls, n, i, regime=EXACT):
        e = [0] * n
        e[i] = 1
        return cls(n, {tuple(e): 1}, regime)

    def _check(self, other):
        if self.n != other.n:
            raise KernelError("point-count mismatch")
        if self.regime != other.regime:
            raise RegimeError("mixed scalar regimes")

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        self._check(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            v = t.get(e, 0) + c
            if v:
                t[e] = v
            else:
                t.pop(e, None)
        return Poly._raw(self.n, t, self.regime)

    def __neg__(self):
        return Poly._raw(self.n, {e: -c for e, c in self.terms.items()}, self.regime)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = to_scalar(c, self.regime)
        if c == 0:
            return Poly._raw(self.n, {}, self.regime)
        return Poly._raw(self.n, {e: v * c for e, v in self.terms.items()}, self.regime)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        t: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                v = t.get(e, 0) + c1 * c2
                if v:
                    t[e] = v
                else:
                    t.pop(e, None)
        return Poly._raw(self.n, t, self.regime)

    def __pow__(self, k: int):
        r = Poly.const(self.n, 1, self.regime)
        b = self
        while k:
            if k & 1:
                r = r * b
            b = b * b
            k >>= 1
        return r

    def __eq__(self, other):
        return isinstance(other, Poly) and self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        return f"Poly({format_poly(self)})"

    def degree(self, i=None):
        if not self.terms:
            return -1
        if i is None:
            return max(sum(e) for e in self.terms)
        return max(e[i] for e in self.terms)

    def deriv(self, i):
        t = {}
        for e, c in self.terms.items():
            if e[i]:
                f = list(e)
                f[i] -= 1
                t[tuple(f)] = c * e[i]
        return Poly._raw(self.n, t, self.regime)

    def extend(self, m):
        """Same polynomial with m extra (unused) variables appended."""
        return Poly._raw(self.n + m, {e + (0,) * m: c for e, c in self.terms.items()}, self.regime)

    def substitute(self, i, p: "Poly"):
        """Replace variable i by the polynomial p (same n)."""
        out = Poly._raw(self.n, {}, self.regime)
        powers = {0: Poly.const(self.n, 1, self.regime)}
        by_power: Dict[int, dict] = {}
        for e, c in self.terms.items():
            f = list(e)
            k = f[i]
            f[i] = 0
            by_power.setdefault(k, {})[tuple(f)] = c
        for k in sorted(by_power):
            if k not in powers:
                powers[k] = p ** k
            out = out + Poly._raw(self.n, by_power[k], self.regime) * powers[k]
        return out

    def coeffs_in(self, i) -> Dict[int, "Poly"]:
        """Split by the exponent of variable i."""
        out: Dict[int, dict] = {}
        for e, c in self.terms.items():
            f = list(e)
            k = f[i]
            f[i] = 0
            out.setdefault(k, {})[tuple(f)] = c
        return {k: Poly._raw(self.n, t, self.regime) for k, t in out.items()}

    def evaluate(self, point):
        total = 0
        for e, c in self.terms.items():
            v = c
            for x, k in zip(point, e):
                if k:
                    v = v * x ** k
            total = total + v
        return total

    def permute(self, perm):
        """Rename variable i -> perm[i]."""
        t = {}
        for e, c in self.terms.items():
            f = [0] * self.n
            for i, k in enumerate(e):
                f[perm[i]] += k
            t[tuple(f)] = c
        return Poly._raw(self.n, t, self.regime)

    def divide_diff(self, a, b) -> Optional["Poly"]:
        """Exact quotient by (z_a - z_b), or None if it does not divide."""
        cs = self.coeffs_in(a)
        if not cs:
            return self
        d = max(cs)
        zb = Poly.var(self.n, b, self.regime)
        zero = Poly._raw(self.n, {}, self.regime)
        q = [zero] * d
        carry = zero
        for k in range(d, 0, -1):
            carry = cs.get(k, zero) + (zb * carry if k < d else zero)
            q[k - 1] = carry
        rem = cs.get(0, zero) + zb * carry if d > 0 else cs.get(0, zero)
        if not rem.is_zero():
            return None
        out = zero
        za = Poly.var(self.n, a, self.regime)
        for k, c in enumerate(q):
            out = out + c * za ** k
        return out

    def divide_var(self, i) -> Optional["Poly"]:
        t = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                return None
            f = list(e)
            f[i] -= 1
            t[tuple(f)] = c
        return Poly._raw(self.n, t, self.regime)

    def variables(self):
        return {i for e in self.terms for i, k in enumerate(e) if k}


def _fmt_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(c)


def format_poly(p: Poly, names=None) -> str:
    if not p.terms:
        return "0"
    names = names or [f"z{i + 1}" for i in range(p.n)]
    parts = []
    for e in sorted(p.terms, key=lambda e: (-sum(e), tuple(-k for k in e))):
        c = p.terms[e]
        mono = "*".join(
            names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k)
        neg = p.regime == EXACT and c < 0
        a = -c if neg else c
        if not mono:
            body = _fmt_coeff(a)
        elif a == 1:
            body = mono
        else:
            body = f"{_fmt_coeff(a)}*{mono}"
        parts.append(("-" if neg else "+", body))
    s = parts[0][1] if parts[0][0] == "+" else "-" + parts[0][1]
    for sign, body in parts[1:]:
        s += f" {sign} {body}"
    return s


# ------------------------------------------------------------------- kernels

def _pair(i, j):
    return (i, j) if i < j else (j, i)


class DiagKernel:
    """num / (prod_{i<j} (z_i - z_j)^poles[i,j] * prod_i z_i^singles[i]), canonical."""

    __slots__ = ("n", "num", "poles", "singles", "_hash")

    def __init__(self, num: Poly, poles=None, singles=None, canonical=False):
        self.n = num.n
        self.num = num
        self.poles = {k: v for k, v in (poles or {}).items() if v}
        self.singles = {k: v for k, v in (singles or {}).items() if v}
        for (i, j), v in self.poles.items():
            if not (0 <= i < j < self.n) or v < 0:
                raise KernelError(f"bad pole entry {(i, j)}: {v}")
        self._hash = None
        if not canonical:
            self._canonicalize()

    # construction
    @classmethod
    def const(cls, n, c=1, regime=EXACT):
        return cls(Poly.const(n, c, regime), canonical=True)

    @classmethod
    def zero(cls, n, regime=EXACT):
        return cls(Poly(n, {}, regime), canonical=True)

    @classmethod
    def var(cls, n, i, regime=EXACT):
        return cls(Poly.var(n, i, regime), canonical=True)

    @classmethod
    def diff(cls, n, i, j, power=1, regime=EXACT):
        """(z_i - z_j)^power, power may be negative."""
        if power >= 0:
            zi, zj = Poly.var(n, i, regime), Poly.var(n, j, regime)
            return cls((zi - zj) ** power)
        sign = 1 if i < j or (-power) % 2 == 0 else -1
        return cls(Poly.const(n, sign, regime), {_pair(i, j): -power})

    @property
    def regime(self):
        return self.num.regime

    def _canonicalize(self):
        num = self.num
        if num.is_zero():
            self.poles, self.singles = {}, {}
            return
        for key in list(self.poles):
            i, j = key
            while self.poles[key] > 0:
                q = num.divide_diff(i, j)
                if q is None:
                    break
                num = q
                self.poles[key] -= 1
            if not self.poles[key]:
                del self.poles[key]
        for i in list(self.singles):
            while self.singles[i] > 0:
                q = num.divide_var(i)
                if q is None:
                    break
                num = q
                self.singles[i] -= 1
            if not self.singles[i]:
                del self.singles[i]
        self.num = num

    def canonical(self):
        return DiagKernel(self.num, dict(self.poles), dict(self.singles))

    def is_zero(self):
        return self.num.is_zero()

    def pole_order(self, i, j):
        return self.poles.get(_pair(i, j), 0)

    def is_polynomial(self):
        return not self.poles and not self.singles

    def denominator(self) -> Poly:
        n, r = self.n, self.regime
        d = Poly.const(n, 1, r)
        for (i, j), v in self.poles.items():
            d = d * (Poly.var(n, i, r) - Poly.var(n, j, r)) ** v
        for i, v in self.singles.items():
            d = d * Poly.var(n, i, r) ** v
        return d

    def _to_common(self, poles, singles) -> Poly:
        """Numerator over the (larger) denominator given by poles/singles."""
        n, r = self.n, self.regime
        num = self.num
        for key, v in poles.items():
            extra = v - self.poles.get(key, 0)
            if extra:
                i, j = key
                num = num * (Poly.var(n, i, r) - Poly.var(n, j, r)) ** extra
        for i, v in singles.items():
            extra = v - self.singles.get(i, 0)
            if extra:
                num = num * Poly.var(n, i, r) ** extra
        return num

    def _check(self, other):
        if not isinstance(other, DiagKernel):
            raise TypeError("expected DiagKernel")
        if self.n != other.n:
            raise KernelError("point-count mismatch")
        if self.regime != other.regime:
            raise RegimeError("mixed scalar regimes")

    def __add__(self, other):
        if not isinstance(other, DiagKernel):
            other = DiagKernel.const(self.n, other, self.regime)
        self._check(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        poles = {k: max(self.poles.get(k, 0), other.poles.get(k, 0))
                 for k in set(self.poles) | set(other.poles)}
        singles = {k: max(self.singles.get(k, 0), other.singles.get(k, 0))
                   for k in set(self.singles) | set(other.singles)}
        num = self._to_common(poles, singles) + other._to_common(poles, singles)
        return DiagKernel(num, poles, singles)

    __radd__ = __add__

    def __neg__(self):
        return DiagKernel(-self.num, dict(self.poles), dict(self.singles), canonical=True)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if c == 0:
            return DiagKernel.zero(self.n, self.regime)
        return DiagKernel(self.num.scale(c), dict(self.poles), dict(self.singles), canonical=True)

    def __mul__(self, other):
        if not isinstance(other, DiagKernel):
            return self.scale(other)
        return kernel_mul(self, other)

    def __rmul__(self, c):
        return self.scale(c)

    def __eq__(self, other):
        if not isinstance(other, DiagKernel):
            if isinstance(other, (int, Fraction, complex, float)):
                return self == DiagKernel.const(self.n, other, self.regime)
            return NotImplemented
        return (self.n == other.n and self.num == other.num
                and self.poles == other.poles and self.singles == other.singles)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num, frozenset(self.poles.items()),
                               frozenset(self.singles.items())))
        return self._hash

    def __repr__(self):
        return f"DiagKernel({format_kernel(self)})"

    def __str__(self):
        return format_kernel(self)

    def deriv(self, i):
        """d/dz_i, quotient rule on the factored denominator."""
        n, r = self.n, self.regime
        factors = []  # (poly L, power, dL/dz_i)
        for (a, b), v in self.poles.items():
            if i in (a, b):
                L = Poly.var(n, a, r) - Poly.var(n, b, r)
                factors.append((L, v, 1 if i == a else -1))
        if i in self.singles:
            factors.append((Poly.var(n, i, r), self.singles[i], 1))
        if not factors:
            return DiagKernel(self.num.deriv(i), dict(self.poles), dict(self.singles))
        allL = Poly.const(n, 1, r)
        for L, _, _ in factors:
            allL = allL * L
        num = self.num.deriv(i) * allL
        for k, (L, v, dl) in enumerate(factors):
            rest = Poly.const(n, 1, r)
            for m, (L2, _, _) in enumerate(factors):
                if m != k:
                    rest = rest * L2
            num = num - self.num * rest.scale(v * dl)
        poles = dict(self.poles)
        singles = dict(self.singles)
        for key in poles:
            if i in key:
                poles[key] += 1
        if i in singles:
            singles[i] += 1
        return DiagKernel(num, poles, singles)

    def deriv_n(self, i, k):
        out = self
        for _ in range(k):
            out = out.deriv(i)
        return out

    def permute(self, perm):
        """Relabel z_i -> z_{perm[i]}."""
        num = self.num.permute(perm)
        poles = {}
        for (i, j), v in self.poles.items():
            a, b = perm[i], perm[j]
            if a > b and v % 2:
                num = -num
            poles[_pair(a, b)] = v
        singles = {perm[i]: v for i, v in self.singles.items()}
        return DiagKernel(num, poles, singles, canonical=True)

    def identify(self, i, j):
        """Set z_i = z_j (requires no pole along (i,j))."""
        if self.pole_order(i, j):
            raise KernelError("cannot restrict across a pole")
        zj = Poly.var(self.n, j, self.regime)
        num = self.num.substitute(i, zj)
        out = DiagKernel(num, {}, {})
        res = DiagKernel.const(self.n, 1, self.regime)
        for (a, b), v in self.poles.items():
            a2, b2 = (j if a == i else a), (j if b == i else b)
            res = res * DiagKernel.diff(self.n, a2, b2, -v, self.regime)
        for a, v in self.singles.items():
            a2 = j if a == i else a
            res = res * DiagKernel(Poly.const(self.n, 1, self.regime), {}, {a2: v})
        return out * res

    def extend(self, m):
        return DiagKernel(self.num.extend(m), dict(self.poles), dict(self.singles), canonical=True)

    def variables(self):
        v = set(self.num.variables())
        for k in self.poles:
            v |= set(k)
        v |= set(self.singles)
        return v

    def evaluate(self, point):
        d = self.denominator().evaluate(point)
        return self.num.evaluate(point) / d if self.regime == FLOAT else Fraction(self.num.evaluate(point)) / d


def kernel_mul(a: DiagKernel, b: DiagKernel) -> DiagKernel:
    a._check(b)
    if a.is_zero() or b.is_zero():
        return DiagKernel.zero(a.n, a.regime)
    poles = dict(a.poles)
    for k, v in b.poles.items():
        poles[k] = poles.get(k, 0) + v
    singles = dict(a.singles)
    for k, v in b.singles.items():
        singles[k] = singles.get(k, 0) + v
    return DiagKernel(a.num * b.num, poles, singles)


def _inverse_power_series(n, regime, base_pair, sign, power, order, single=None):
    """Series in t of 1/(L + sign*t)^power, L = z_a - z_b (or z_a), as kernels."""
    out = []
    for m in range(order + 1):
        c = comb(power + m - 1, m) * (-1) ** m * sign ** m
        if single is not None:
            k = DiagKernel(Poly.const(n, c, regime), {}, {single: power + m})
        else:
            a, b = base_pair
            k = DiagKernel.diff(n, a, b, -(power + m), regime).scale(c)
        out.append(k)
    return out


def taylor_along_diagonal(k: DiagKernel, i: int, j: int, order: int) -> List[DiagKernel]:
    """Coefficients c_0..c_order of (z_i - z_j)^N k expanded in t = z_i - z_j.

    N is the pole order of k along (i, j).  Coefficients are kernels in which
    z_i no longer occurs (it has been set to z_j).
    """
    if i == j:
        raise KernelError("need two distinct points")
    n, r = k.n, k.regime
    if k.is_zero():
        return [DiagKernel.zero(n, r) for _ in range(order + 1)]
    N = k.pole_order(i, j)
    sign_n = 1 if i < j or N % 2 == 0 else -1
    # numerator with z_i -> z_j + t, t an extra variable at index n
    num = k.num.extend(1)
    t = Poly.var(n + 1, n, r)
    num = num.substitute(i, Poly.var(n + 1, j, r) + t)
    by_t = num.coeffs_in(n)
    zero = DiagKernel.zero(n, r)
    num_series = []
    for m in range(order + 1):
        p = by_t.get(m)
        if p is None:
            num_series.append(zero)
        else:
            num_series.append(DiagKernel(Poly._raw(n, {e[:n]: c for e, c in p.terms.items()}, r),
                                         canonical=True))
    # remaining denominators; factors without z_i are kept as a common kernel
    series = [DiagKernel.const(n, sign_n, r)] + [zero] * order
    rest_poles = {}
    rest_singles = {}
    for (a, b), v in k.poles.items():
        if (a, b) == _pair(i, j):
            continue
        if a == i:
            s = _inverse_power_series(n, r, (j, b), 1, v, order)
        elif b == i:
            s = _inverse_power_series(n, r, (a, j), -1, v, order)
        else:
            rest_poles[(a, b)] = v
            continue
        series = _series_mul(series, s, order)
    for a, v in k.singles.items():
        if a == i:
            s = _inverse_power_series(n, r, None, 1, v, order, single=j)
            series = _series_mul(series, s, order)
        else:
            rest_singles[a] = v
    common = DiagKernel(Poly.const(n, 1, r), rest_poles, rest_singles, canonical=True)
    out = _series_mul(num_series, series, order)
    return [c * common for c in out]


def _series_mul(a, b, order):
    out = []
    for m in range(order + 1):
        acc = None
        for p in range(m + 1):
            if a[p].is_zero() or b[m - p].is_zero():
                continue
            term = a[p] * b[m - p]
            acc = term if acc is None else acc + term
        out.append(acc if acc is not None else DiagKernel.zero(a[0].n, a[0].regime))
    return out


def residue(k: DiagKernel, i: int, j: int) -> DiagKernel:
    """Coefficient of (z_i - z_j)^{-1}, with z_i identified with z_j."""
    N = k.pole_order(i, j)
    if N == 0:
        return DiagKernel.zero(k.n, k.regime)
    return taylor_along_diagonal(k, i, j, N - 1)[N - 1]


def laurent_along_diagonal(k: DiagKernel, i: int, j: int, lo: int, hi: int) -> Dict[int, DiagKernel]:
    """{m: coefficient of (z_i - z_j)^m} for lo <= m <= hi."""
    N = k.pole_order(i, j)
    if hi + N < 0:
        return {}
    cs = taylor_along_diagonal(k, i, j, hi + N)
    return {m: cs[m + N] for m in range(max(lo, -N), hi + 1) if not cs[m + N].is_zero()}


# ------------------------------------------------------------ text grammar

def format_kernel(k: DiagKernel) -> str:
    num = format_poly(k.num)
    if k.is_polynomial():
        return num
    dens = []
    for (i, j), v in sorted(k.poles.items()):
        f = f"(z{i + 1}-z{j + 1})"
        dens.append(f if v == 1 else f"{f}^{v}")
    for i, v in sorted(k.singles.items()):
        dens.append(f"z{i + 1}" if v == 1 else f"z{i + 1}^{v}")
    den = "*".join(dens)
    if len(dens) > 1:
        den = f"({den})"
    if len(k.num.terms) > 1 or num.startswith("-"):
        num = f"({num})"
    return f"{num}/{den}"


_TOKEN = re.compile(r"\s*(?:(\d+)|z(\d+)|([-+*/^()]))")


def _tokenize(src):
    pos, out = 0, []
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos:].lstrip()[:1]!r}", src,
                             len(src) - len(src[pos:].lstrip()))
        start = m.start(m.lastindex)
        if m.group(1) is not None:
            out.append(("num", int(m.group(1)), start))
        elif m.group(2) is not None:
            out.append(("var", int(m.group(2)), start))
        else:
            out.append(("op", m.group(3), start))
        pos = m.end()
    out.append(("end", None, len(src)))
    return out


def _factor_out(num: Poly):
    """Write num as c * prod (z_i - z_j)^e * prod z_i^f, or None."""
    poles, singles = {}, {}
    n = num.n
    for a, b in combinations(range(n), 2):
        while True:
            q = num.divide_diff(a, b)
            if q is None:
                break
            num = q
            poles[(a, b)] = poles.get((a, b), 0) + 1
    for i in range(n):
        while True:
            q = num.divide_var(i)
            if q is None:
                break
            num = q
            singles[i] = singles.get(i, 0) + 1
    if len(num.terms) != 1 or any(sum(e) for e in num.terms):
        return None
    return next(iter(num.terms.values())), poles, singles


def kernel_divide(x: DiagKernel, d: DiagKernel) -> DiagKernel:
    """x / d; d's numerator must be a product of diagonal and coordinate factors."""
    if d.is_zero():
        raise ZeroDivisionError("division by zero kernel")
    f = _factor_out(d.num)
    if f is None:
        raise KernelError("denominator is not a product of (z_i-z_j) and z_i factors")
    c, poles, singles = f
    inv = DiagKernel(d.denominator().scale(1 / c if d.regime == FLOAT else Fraction(1) / c),
                     poles, singles)
    return x * inv


def parse_kernel(src: str, n: Optional[int] = None) -> DiagKernel:
    toks = _tokenize(src)
    used = [t[1] for t in toks if t[0] == "var"]
    if any(v < 1 for v in used):
        raise ParseError("variables are numbered from z1", src, 0)
    nv = max(used, default=1)
    if n is None:
        n = nv
    elif nv > n:
        raise ParseError(f"variable z{nv} exceeds point count {n}", src, 0)
    pos = [0]

    def peek():
        return toks[pos[0]]

    def take(op=None):
        t = toks[pos[0]]
        if op is not None and (t[0] != "op" or t[1] != op):
            raise ParseError(f"expected {op!r}", src, t[2])
        pos[0] += 1
        return t

    def expr():
        v = term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            w = term()
            v = v + w if op == "+" else v - w
        return v

    def term():
        v = unary()
        while peek()[0] == "op" and peek()[1] in "*/":
            op = take()[1]
            w = unary()
            v = v * w if op == "*" else kernel_divide(v, w)
        return v

    def unary():
        if peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            v = unary()
            return -v if op == "-" else v
        return power()

    def power():
        v = atom()
        if peek()[0] == "op" and peek()[1] == "^":
            take()
            neg = False
            if peek()[0] == "op" and peek()[1] == "-":
                take()
                neg = True
            t = take()
            if t[0] != "num":
                raise ParseError("exponent must be an integer", src, t[2])
            e = t[1]
            r = DiagKernel.const(n, 1)
            for _ in range(e):
                r = r * v
            v = kernel_divide(DiagKernel.const(n, 1), r) if neg else r
        return v

    def atom():
        t = take()
        if t[0] == "num":
            return DiagKernel.const(n, t[1])
        if t[0] == "var":
            return DiagKernel.var(n, t[1] - 1)
        if t[0] == "op" and t[1] == "(":
            v = expr()
            take(")")
            return v
        raise ParseError("unexpected token" if t[0] != "end" else "unexpected end of input",
                         src, t[2])

    try:
        out = expr()
    except KernelError as exc:
        raise ParseError(str(exc), src, 0) from None
    if peek()[0] != "end":
        raise ParseError("trailing input", src, peek()[2])
    return out


# ------------------------------------------------------------ Dolbeault model

class DolbeaultModel:
    """Finite graded-commutative model for antiholomorphic forms.

    Symbols carry degree 0 (even) or 1 (odd).  ``dbar`` is the derivation that
    sends each registered symbol to its rule and kills symbols declared closed.
    Elements are dicts {monomial: coeff}; a monomial is a sorted tuple of
    (symbol, power) with odd powers at most one.

    Sign convention: dbar acts from the left, d(xy) = d(x) y + (-1)^|x| x d(y).
    """

    def __init__(self):
        self.degree: Dict[str, int] = {}
        self.order: Dict[str, int] = {}
        self.rules: Dict[str, dict] = {}
        self.closed: set = set()

    def add_symbol(self, name, degree, rule=None, closed=False):
        if name in self.degree:
            if self.degree[name] != degree:
                raise KernelError(f"symbol {name} re-registered with another degree")
        else:
            self.degree[name] = degree
            self.order[name] = len(self.order)
        if rule is not None:
            self.rules[name] = rule
        if closed:
            self.closed.add(name)
        return name

    def sym(self, name, coeff=1):
        return {((name, 1),): Fraction(coeff)}

    def one(self):
        return {(): Fraction(1)}

    def mono_degree(self, m):
        return sum(self.degree[s] * p for s, p in m)

    def mono_mul(self, m1, m2):
        """Product of two monomials: (sign, monomial) or (0, None)."""
        seq = [(s, p) for s, p in m1] + [(s, p) for s, p in m2]
        # bubble into order, tracking odd transpositions
        sign = 1
        items = list(seq)
        for a in range(len(items)):
            for b in range(len(items) - 1 - a):
                x, y = items[b], items[b + 1]
                if self.order[x[0]] > self.order[y[0]]:
                    if self.degree[x[0]] * x[1] % 2 and self.degree[y[0]] * y[1] % 2:
                        sign = -sign
                    items[b], items[b + 1] = y, x
        merged: List[Tuple[str, int]] = []
        for s, p in items:
            if merged and merged[-1][0] == s:
                if self.degree[s] % 2:
                    return 0, None
                merged[-1] = (s, merged[-1][1] + p)
            else:
                merged.append((s, p))
        return sign, tuple(merged)

    def mul(self, x, y):
        out: dict = {}
        for m1, c1 in x.items():
            for m2, c2 in y.items():
                s, m = self.mono_mul(m1, m2)
                if s:
                    v = out.get(m, 0) + s * c1 * c2
                    if v:
                        out[m] = v
                    else:
                        out.pop(m, None)
        return out

    @staticmethod
    def add(x, y, c=1):
        out = dict(x)
        for m, v in y.items():
            w = out.get(m, 0) + c * v
            if w:
                out[m] = w
            else:
                out.pop(m, None)
        return out

    def apply_dbar(self, x):
        out: dict = {}
        for m, c in x.items():
            prefix: tuple = ()
            for k, (s, p) in enumerate(m):
                if s in self.rules:
                    ds = self.rules[s]
                elif s in self.closed:
                    ds = None
                else:
                    raise KernelError(f"unregistered non-holomorphic symbol {s!r}")
                if ds:
                    # d(s^p) = p s^{p-1} ds   (s even when p > 1)
                    lead = {prefix: Fraction((-1) ** self.mono_degree(prefix))}
                    rest_s = ((s, p - 1),) if p > 1 else ()
                    term = self.mul(lead, {rest_s: Fraction(p)})
                    term = self.mul(term, ds)
                    term = self.mul(term, {tuple(m[k + 1:]): Fraction(1)})
                    out = self.add(out, term, c)
                prefix = prefix + ((s, p),)
        return out

    def degree_of(self, x):
        ds = {self.mono_degree(m) for m in x}
        if len(ds) > 1:
            raise KernelError("inhomogeneous element")
        return ds.pop() if ds else 0

    def _preimage_candidates(self, monos):
        """Monomials m with some monomial of dbar(m) in the given set (closure)."""
        inverse = []  # (rule monomial, symbol)
        for s, rule in self.rules.items():
            for rm in rule:
                inverse.append((rm, s))
        seen_targets = set(monos)
        frontier = list(monos)
        cands = set()
        while frontier:
            u = frontier.pop()
            ud = dict(u)
            for rm, s in inverse:
                if all(ud.get(a, 0) >= b for a, b in rm):
                    rest = dict(ud)
                    for a, b in rm:
                        rest[a] -= b
                    rest_m = tuple((a, b) for a, b in sorted(rest.items(), key=lambda kv: self.order[kv[0]]) if b)
                    sg, m = self.mono_mul(rest_m, ((s, 1),))
                    if sg and m not in cands:
                        cands.add(m)
                        for v in self.apply_dbar({m: Fraction(1)}):
                            if v not in seen_targets:
                                seen_targets.add(v)
                                frontier.append(v)
        return sorted(cands, key=self._mono_key)

    def _mono_key(self, m):
        return tuple((self.order[s], p) for s, p in m)

    def reduce(self, x):
        """Canonical representative of x modulo dbar-exact elements."""
        x = {m: Fraction(c) for m, c in x.items() if c}
        if not x:
            return {}
        cands = self._preimage_candidates(list(x))
        rows = [self.apply_dbar({m: Fraction(1)}) for m in cands]
        pivots: Dict[tuple, dict] = {}
        for row in rows:
            row = _eliminate(row, pivots, self._mono_key)
            if row:
                p = max(row, key=self._mono_key)
                inv = 1 / row[p]
                row = {m: c * inv for m, c in row.items()}
                for q in list(pivots):
                    if p in pivots[q]:
                        pivots[q] = self.add(pivots[q], row, -pivots[q][p])
                pivots[p] = row
        return _eliminate(x, pivots, self._mono_key)

    def is_exact(self, x):
        return not self.reduce(x)

    def integral(self, x):
        """Integral class: top-degree element modulo exact ones (canonical dict)."""
        return self.reduce(x)


def _eliminate(row, pivots, key):
    row = dict(row)
    changed = True
    while changed:
        changed = False
        for p in sorted((m for m in row if m in pivots), key=key, reverse=True):
            c = row.get(p)
            if c:
                prow = pivots[p]
                for m, v in prow.items():
                    w = row.get(m, 0) - c * v
                    if w:
                        row[m] = w
                    else:
                        row.pop(m, None)
                changed = True
                break
    return row


def zero_mode_model(pairing, points=(1, 2)):
    """Model with a propagator symbol whose dbar is the harmonic projector.

    pairing[j][i] = integral <e1_j, e0_i>; I2 = pairing^{-1}, I1 = I2^T.
    dbar P = sum I1^{ij} e1_i(p) e0_j(q) + sum I2^{ij} e0_i(p) e1_j(q).
    """
    from .bv import invert_matrix
    I2 = invert_matrix(pairing)
    m = len(I2)
    I1 = [[I2[j][i] for j in range(m)] for i in range(m)]
    p, q = points
    model = DolbeaultModel()
    for pt in points:
        for i in range(m):
            model.add_symbol(f"e0_{i + 1}@{pt}", 0, closed=True)
            model.add_symbol(f"e1_{i + 1}@{pt}", 1, closed=True)
    rule: dict = {}
    for i in range(m):
        for j in range(m):
            if I1[i][j]:
                rule = model.add(rule, model.mul(model.sym(f"e1_{i + 1}@{p}"),
                                                 model.sym(f"e0_{j + 1}@{q}")), I1[i][j])
            if I2[i][j]:
                rule = model.add(rule, model.mul(model.sym(f"e0_{i + 1}@{p}"),
                                                 model.sym(f"e1_{j + 1}@{q}")), I2[i][j])
    model.add_symbol(f"P@{p}{q}", 0, rule=rule)
    return model, I1, I2
