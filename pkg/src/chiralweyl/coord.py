"""Coordinate and gauge changes on truncated Fock spaces.

A coordinate change f(z) = a1 z + a2 z^2 + ... is factored as

    f = exp(sum_{i>0} v_i z^{i+1} d_z) v0^{z d_z} z

and acts on states through R(f) = exp(-sum v_i L_i) v0^{-L0}.  Since L_i
(i > 0) lowers the level, the exponential is a finite sum on each level.

Scalars in this module may be Fractions or ``TSeries`` (truncated power
series in an auxiliary variable), which lets the same code produce the
y-dependence of R(rho_y) needed by the defect checks.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Dict, List, Sequence

from .fock import (FockState, GeneratorSet, Monomial, basis_upto, beta_gamma, km_current,
                   km_current_state, monomial_state, translation, virasoro)


class CoordError(ValueError):
    pass


# ------------------------------------------------------------ series

def s_trunc(a, D):
    a = list(a)[:D + 1]
    return a + [Fraction(0)] * (D + 1 - len(a))


def s_mul(a, b, D):
    out = [Fraction(0)] * (D + 1)
    for i, x in enumerate(a[:D + 1]):
        if x:
            for j, y in enumerate(b[:D + 1 - i]):
                out[i + j] += x * y
    return out


def s_inv(a, D):
    if not a or a[0] == 0:
        raise CoordError("series not invertible")
    out = [Fraction(0)] * (D + 1)
    out[0] = 1 / Fraction(a[0])
    for n in range(1, D + 1):
        acc = sum((a[k] * out[n - k] for k in range(1, min(n, len(a) - 1) + 1)), Fraction(0))
        out[n] = -acc * out[0]
    return out


def s_deriv(a):
    return [k * a[k] for k in range(1, len(a))] or [Fraction(0)]


def s_compose(a, b, D):
    """a(b(z)) with b(0) = 0."""
    if b and b[0]:
        raise CoordError("inner series must vanish at 0")
    out = [Fraction(0)] * (D + 1)
    power = s_trunc([1], D)
    for c in a[:D + 1]:
        if c:
            out = [x + c * y for x, y in zip(out, power)]
        power = s_mul(power, b, D)
    return out


def s_log1p(u, D):
    """log(1 + u) with u(0) = 0."""
    out = [Fraction(0)] * (D + 1)
    power = s_trunc([1], D)
    for k in range(1, D + 1):
        power = s_mul(power, u, D)
        out = [x + Fraction((-1) ** (k + 1), k) * y for x, y in zip(out, power)]
    return out


def s_sqrt(a, D):
    """Square root with a(0) a rational square."""
    a0 = Fraction(a[0])
    r0 = _rational_sqrt(a0)
    u = [Fraction(0)] + [Fraction(x) / a0 for x in a[1:D + 1]]
    out = [Fraction(0)] * (D + 1)
    power = s_trunc([1], D)
    coef = Fraction(1)
    for k in range(D + 1):
        out = [x + coef * y for x, y in zip(out, power)]
        coef = coef * (Fraction(1, 2) - k) / (k + 1)
        power = s_mul(power, u, D)
    return [r0 * x for x in out]


def _rational_sqrt(q: Fraction) -> Fraction:
    from math import isqrt
    q = Fraction(q)
    if q < 0:
        raise CoordError("negative square")
    n, d = isqrt(q.numerator), isqrt(q.denominator)
    if n * n != q.numerator or d * d != q.denominator:
        raise CoordError(f"{q} is not a rational square")
    return Fraction(n, d)


class TSeries:
    """Truncated power series in y with rational coefficients (a scalar ring)."""

    __slots__ = ("c", "D")

    def __init__(self, coeffs, D):
        self.D = D
        self.c = s_trunc([Fraction(x) for x in coeffs], D)

    @classmethod
    def lift(cls, x, D):
        return x if isinstance(x, TSeries) else cls([x], D)

    def _o(self, other):
        return TSeries.lift(other, self.D)

    def __add__(self, other):
        o = self._o(other)
        return TSeries([x + y for x, y in zip(self.c, o.c)], self.D)

    __radd__ = __add__

    def __neg__(self):
        return TSeries([-x for x in self.c], self.D)

    def __sub__(self, other):
        return self + (-self._o(other))

    def __rsub__(self, other):
        return self._o(other) - self

    def __mul__(self, other):
        o = self._o(other)
        return TSeries(s_mul(self.c, o.c, self.D), self.D)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._o(other)
        return TSeries(s_mul(self.c, s_inv(o.c, self.D), self.D), self.D)

    def __rtruediv__(self, other):
        return self._o(other) / self

    def __pow__(self, k):
        k = Fraction(k)
        if k.denominator == 1:
            e = int(k)
            base = self if e >= 0 else 1 / self
            out = TSeries([1], self.D)
            for _ in range(abs(e)):
                out = out * base
            return out
        if k.denominator == 2:
            root = TSeries(s_sqrt(self.c, self.D), self.D)
            return root ** int(2 * k)
        raise CoordError("only integer and half-integer powers")

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = TSeries([other], self.D)
        return isinstance(other, TSeries) and self.c == other.c

    def __bool__(self):
        return any(self.c)

    def __repr__(self):
        return f"TSeries({self.c})"


def _power(x, h):
    """x^h for rational h with denominator <= 2."""
    h = Fraction(h)
    if isinstance(x, TSeries):
        return x ** h
    x = Fraction(x)
    if h.denominator == 1:
        return x ** int(h)
    if h.denominator == 2:
        if x <= 0:
            raise CoordError("half-integer power needs a positive base")
        return _rational_sqrt(x) ** int(2 * h)
    raise CoordError("weights must have denominator <= 2")


# ------------------------------------------------------ coordinate data

@dataclass
class CoordChange:
    series: List[Fraction]   # coefficients of z^0, z^1, ...; index 0 is 0
    v: List[Fraction]        # v0, v1, ..., v_{D-1}
    D: int


def flow_apply(v: Sequence, g, D):
    """exp(sum_{i>0} v_i z^{i+1} d_z) applied to the series g."""
    field = [Fraction(0)] * (D + 1)
    for i, vi in enumerate(v):
        if i > 0 and i + 1 <= D:
            field[i + 1] = Fraction(vi)
    out = s_trunc(g, D)
    term = s_trunc(g, D)
    for k in range(1, D + 1):
        term = s_mul(field, s_deriv(term) + [Fraction(0)], D)
        term = [x / k for x in term]
        if not any(term):
            break
        out = [x + y for x, y in zip(out, term)]
    return out


def reconstruct(c: CoordChange):
    return flow_apply(c.v, [Fraction(0), c.v[0]], c.D)


def decompose_coord(f: Sequence, D: int) -> CoordChange:
    """Solve for v0, v1, ... so that the flow reproduces f to degree D."""
    f = s_trunc([Fraction(x) for x in f], D)
    if f[0]:
        raise CoordError("coordinate change must fix 0")
    if D < 1 or f[1] == 0:
        raise CoordError("a1 must be nonzero")
    v = [f[1]] + [Fraction(0)] * (D - 1)
    for i in range(1, D):
        got = flow_apply(v, [Fraction(0), v[0]], D)
        # v_i enters degree i+1 linearly with coefficient v0
        v[i] = (f[i + 1] - got[i + 1]) / v[0]
    return CoordChange(f, v, D)


# ------------------------------------------------------ mode algebra

class ModeAlgebra:
    """Matrices of L_n (and optional currents) on the basis up to a level."""

    def __init__(self, gs: GeneratorSet, level: int):
        self.gs = gs
        self.level = level
        self.basis = basis_upto(gs, level)
        self._L: Dict[int, Dict[Monomial, FockState]] = {}
        self._weights: Dict[Monomial, Fraction] = {}

    def L(self, n: int, m: Monomial) -> FockState:
        tab = self._L.setdefault(n, {})
        if m not in tab:
            tab[m] = virasoro(self.gs, n, FockState({m: 1}))
        return tab[m]

    def weight(self, m: Monomial) -> Fraction:
        if m not in self._weights:
            img = self.L(0, m)
            h = img.coefficient(m)
            if img != FockState({m: h}):
                raise CoordError("basis monomial is not an L0 eigenvector")
            self._weights[m] = h
        return self._weights[m]


Vec = Dict[Monomial, object]


def _vadd(a: Vec, b: Vec, c=1) -> Vec:
    out = dict(a)
    for m, x in b.items():
        y = out.get(m, 0) + c * x
        if (isinstance(y, TSeries) and not y) or (not isinstance(y, TSeries) and y == 0):
            out.pop(m, None)
        else:
            out[m] = y
    return out


def _apply_op(v: Vec, op) -> Vec:
    out: Vec = {}
    for m, x in v.items():
        for m2, c in op(m).terms.items():
            out = _vadd(out, {m2: x * c})
    return out


def to_vec(s: FockState) -> Vec:
    return dict(s.terms)


def r_operator(ma: ModeAlgebra, v: Sequence, s, inverse=False) -> Vec:
    """R(f) = exp(-sum v_i L_i) v0^{-L0}; inverse gives v0^{L0} exp(sum v_i L_i)."""
    vec = to_vec(s) if isinstance(s, FockState) else dict(s)
    v0 = v[0]
    if (not isinstance(v0, TSeries)) and v0 == 0:
        raise CoordError("v0 must be invertible")
    sgn = 1 if inverse else -1

    def exp_part(x: Vec) -> Vec:
        out, term = dict(x), dict(x)
        k = 0
        while term:
            k += 1
            nxt: Vec = {}
            for i in range(1, len(v)):
                if (isinstance(v[i], TSeries) and not v[i]) or (not isinstance(v[i], TSeries) and v[i] == 0):
                    continue
                nxt = _vadd(nxt, _apply_op(term, lambda m, i=i: ma.L(i, m)), sgn * v[i])
            term = {m: c * Fraction(1, k) for m, c in nxt.items()}
            out = _vadd(out, term)
        return out

    def scale_part(x: Vec) -> Vec:
        e = 1 if inverse else -1
        return {m: c * _power(v0, e * ma.weight(m)) for m, c in x.items()}

    return scale_part(exp_part(vec)) if inverse else exp_part(scale_part(vec))


def compose(f, g, D):
    """(f o g)(z)."""
    return s_compose(s_trunc(f, D), s_trunc(g, D), D)


# ------------------------------------------------------------ defects

def schwarzian_correction(f: Sequence, D: int) -> List[Fraction]:
    """(1/6) theta''/theta - (1/4)(theta'/theta)^2 with theta = f'."""
    th = s_deriv(s_trunc(f, D + 3))
    inv = s_inv(th, D)
    r1 = s_mul(s_deriv(th), inv, D)
    r2 = s_mul(s_deriv(s_deriv(th)), inv, D)
    sq = s_mul(r1, r1, D)
    return [Fraction(1, 6) * a - Fraction(1, 4) * b for a, b in zip(r2, sq)]


def shifted_coordinate(rho: Sequence, y: TSeries, D: int) -> List[TSeries]:
    """rho_y(t) = rho(y + t) - rho(y) as t-coefficients that are series in y."""
    out = []
    for k in range(D + 1):
        # coefficient of t^k: rho^{(k)}(y)/k!
        dk = list(rho)
        for _ in range(k):
            dk = s_deriv(dk)
        val = TSeries([0], y.D)
        for j, c in enumerate(dk):
            val = val + (y ** j) * Fraction(c, factorial(k))
        out.append(val)
    out[0] = TSeries([0], y.D)
    return out


def decompose_generic(f: List, D: int) -> List:
    """decompose_coord over any scalar ring (f[1] invertible)."""
    v0 = f[1]
    v = [v0] + [0 * v0 for _ in range(D - 1)]
    for i in range(1, D):
        got = _flow_generic(v, D)
        v[i] = (f[i + 1] - got[i + 1]) / v0
    return v


def _flow_generic(v, D):
    zero = 0 * v[0]
    g = [zero, v[0]] + [zero] * (D - 1)
    out, term = list(g), list(g)
    for k in range(1, D + 1):
        dterm = [j * term[j] for j in range(1, D + 1)] + [zero]
        new = [zero] * (D + 1)
        for i in range(1, len(v)):
            for p in range(D + 1 - (i + 1)):
                new[p + i + 1] = new[p + i + 1] + v[i] * dterm[p]
        term = [x * Fraction(1, k) for x in new]
        out = [a + b for a, b in zip(out, term)]
    return out


def stress_state_bdg():
    """beta d gamma in the system with beta of weight 1 and gamma of weight 0."""
    gs = beta_gamma(Fraction(1))
    return gs, monomial_state(gs, [(0, -1), (1, -2)])


def vacuum_coefficient(vec: Vec):
    return vec.get((), 0)


def _y(D):
    return TSeries([0, 1], D)


def coordinate_defect(gs, state: FockState, f: Sequence, D: int, level: int = 2) -> List[Fraction]:
    """Vacuum part of R(f_y)^{-1} state as a series in y (the anomalous term of w = f(z))."""
    fy = shifted_coordinate(f, _y(D), D + 2)
    v = decompose_generic(fy, D + 2)
    ma = ModeAlgebra(gs, level)
    out = vacuum_coefficient(r_operator(ma, v, state, inverse=True))
    return TSeries.lift(out, D).c


def log_shift_coefficients(sigma: Sequence, y: TSeries, D: int) -> List[TSeries]:
    """g_n(y) with log sigma(y + t) = sum g_n(y) t^n, up to the constant g_0."""
    vals = []
    for k in range(D + 1):
        dk = list(sigma)
        for _ in range(k):
            dk = s_deriv(dk)
        val = TSeries([0], y.D)
        for j, c in enumerate(dk):
            val = val + (y ** j) * Fraction(c, factorial(k))
        vals.append(val)
    zero = TSeries([0], y.D)
    u = [zero] + [x / vals[0] for x in vals[1:]]
    out = [zero] * (D + 1)
    power = [TSeries([1], y.D)] + [zero] * D
    for k in range(1, D + 1):
        nxt = [zero] * (D + 1)
        for i, a in enumerate(power):
            for j, b in enumerate(u):
                if i + j <= D:
                    nxt[i + j] = nxt[i + j] + a * b
        power = nxt
        out = [o + p * Fraction((-1) ** (k + 1), k) for o, p in zip(out, power)]
    return out


def r_gauge(gs, currents: Sequence, coeffs: Sequence, s, inverse=False, max_order=12) -> Vec:
    """exp(-sum_i sum_n g^i_n J_{i,n}) on a state; the inverse flips the sign.

    ``currents`` lists (up, down) generator pairs, ``coeffs`` the matching g^i_n.
    """
    vec = to_vec(s) if isinstance(s, FockState) else dict(s)
    sgn = 1 if inverse else -1
    out, term = dict(vec), dict(vec)
    k = 0
    while term:
        k += 1
        if k > max_order:
            raise CoordError("gauge exponential did not terminate")
        nxt: Vec = {}
        for (up, down), g in zip(currents, coeffs):
            for n, gn in enumerate(g):
                if not gn:
                    continue
                op = (lambda m, n=n, up=up, down=down:
                      km_current(gs, up, down, n, FockState({m: 1})))
                nxt = _vadd(nxt, _apply_op(term, op), sgn * gn)
        term = {m: c * Fraction(1, k) for m, c in nxt.items()}
        out = _vadd(out, term)
    return out


def current_system(rank: int):
    """beta of weight 1 (index i) paired with gamma of weight 0 (index rank + i)."""
    gs = beta_gamma(Fraction(1), rank)
    return gs, [(i, rank + i) for i in range(rank)]


def current_state(gs, currents, nu: Sequence) -> FockState:
    out = FockState({})
    for (up, down), x in zip(currents, nu):
        out = out + km_current_state(gs, up, down).scale(Fraction(x))
    return out


def frame_defect(nu: Sequence, varsigma: Sequence[Sequence], D: int) -> List[Fraction]:
    """Vacuum part of the frame change on sum nu_i :beta_i gamma^i:, a series in y.

    varsigma lists the diagonal entries of the holomorphic transition function.
    The gamma components transform by varsigma^{-1}, so R(sigma)^{-1} with
    sigma = varsigma^{-1} is exp(-sum g_n J_n), g_n the coefficients of log varsigma.
    """
    gs, currents = current_system(len(nu))
    y = _y(D)
    coeffs = []
    for sg in varsigma:
        g = log_shift_coefficients(sg, y, D + 1)
        g[0] = TSeries([0], D)  # J_0 commutes with the abelian currents
        coeffs.append(g)
    out = vacuum_coefficient(r_gauge(gs, currents, coeffs, current_state(gs, currents, nu)))
    return TSeries.lift(out, D).c


# ---------------------------------------------------- metric corrections
#
# Registered transformation laws for the local metric data (holomorphic parts):
#   w = f(z), theta = f':  rho -> theta^{1/2} rho in the stress correction,
#                          rho -> theta^{-1/2} rho in the current correction,
#                          h unchanged;
#   frame e -> varsigma e: h_i -> varsigma_i h_i, rho unchanged.

def _dlog(a, D):
    return s_mul(s_deriv(s_trunc(a, D + 1)), s_inv(a, D), D)


def _sub(a, b):
    return [x - y for x, y in zip(a, b)]


def current_correction(nu: Sequence, h: Sequence[Sequence], rho: Sequence, D: int) -> List[Fraction]:
    """tr(nu rho h^{-1} d(h rho^{-1})) for diagonal nu and h."""
    out = [Fraction(0)] * (D + 1)
    drho = _dlog(rho, D)
    for x, hi in zip(nu, h):
        out = [o + Fraction(x) * c for o, c in zip(out, _sub(_dlog(hi, D), drho))]
    return out


def stress_correction(rho: Sequence, D: int) -> List[Fraction]:
    """(1/3) rho^{-1} d^2 rho."""
    r = s_trunc(rho, D + 2)
    return [Fraction(1, 3) * x for x in s_mul(s_deriv(s_deriv(r)), s_inv(r, D), D)]


def _theta_power(rho, f, D, sign):
    th = s_deriv(s_trunc(f, D + 3))
    # constant factors drop out of every logarithmic derivative
    th = [x / th[0] for x in th]
    root = s_sqrt(th, D + 2)
    if sign < 0:
        root = s_inv(root, D + 2)
    return s_mul(root, s_trunc(rho, D + 2), D + 2)


def stress_correction_shift(rho, f, D):
    """Change of (1/3) rho^{-1} d^2 rho dz^2 under w = f(z), expressed in dz^2."""
    th = s_deriv(s_trunc(f, D + 3))
    g = _theta_power(rho, f, D + 1, 1)
    # theta^2 (theta^{-1} d)^2 g / g = g''/g - (theta'/theta) g'/g
    gi = s_inv(g, D)
    g1 = s_mul(s_deriv(g), gi, D)
    g2 = s_mul(s_deriv(s_deriv(g)), gi, D)
    r = s_mul(s_deriv(th), s_inv(th, D), D)
    new = [Fraction(1, 3) * (a - b) for a, b in zip(g2, s_mul(r, g1, D))]
    return _sub(new, stress_correction(rho, D))


def stress_balance(rho, f, D) -> List[Fraction]:
    """Total change of beta d gamma - (1/3) rho^{-1} d^2 rho; zero when well defined."""
    gs, st = stress_state_bdg()
    return _sub(coordinate_defect(gs, st, f, D), stress_correction_shift(rho, f, D))


def current_coordinate_balance(nu, h, rho, f, D) -> List[Fraction]:
    """Total change of J_nu under w = f(z)."""
    gs, currents = current_system(len(nu))
    defect = coordinate_defect(gs, current_state(gs, currents, nu), f, D)
    new = current_correction(nu, h, _theta_power(rho, f, D, -1), D)
    return _sub(defect, _sub(new, current_correction(nu, h, rho, D)))


def current_frame_balance(nu, h, rho, varsigma, D) -> List[Fraction]:
    """Total change of J_nu under a diagonal frame change."""
    defect = frame_defect(nu, varsigma, D)
    h2 = [s_mul(s_trunc(a, D + 2), s_trunc(b, D + 2), D + 2) for a, b in zip(varsigma, h)]
    return _sub(defect, _sub(current_correction(nu, h2, rho, D), current_correction(nu, h, rho, D)))


def corrected_current(nu, h, rho, D):
    """J_nu = sum nu_i :beta_i gamma^i: - tr(nu rho h^{-1} d(h rho^{-1})), as (state, correction)."""
    gs, currents = current_system(len(nu))
    return current_state(gs, currents, nu), [-x for x in current_correction(nu, h, rho, D)]


# --------------------------------------------- linear-field compatibility

def linear_field_identity(gs, rho: Sequence, z0, state: FockState, level: int):
    """Both sides of rho'(z)(d_w + L_{-1}) R(rho_z)^{-1} v = R(rho_z)^{-1} L_{-1} v at z = z0.

    The z-dependence is carried by first-order series in (z - z0).
    """
    y = TSeries([z0, 1], 1)
    D = level + 2
    f = shifted_coordinate(rho, y, D)
    v = decompose_generic(f, D)
    ma = ModeAlgebra(gs, level + 1)
    Rv = r_operator(ma, v, state, inverse=True)
    deriv = {m: c.c[1] for m, c in Rv.items() if c.c[1]}
    rho1 = f[1].c[0]
    TRv: Vec = {}
    for m, c in Rv.items():
        for m2, x in translation(gs, FockState({m: 1})).terms.items():
            TRv = _vadd(TRv, {m2: c.c[0] * x})
    lhs = _vadd(deriv, {m: rho1 * c for m, c in TRv.items()})
    rhs_state = translation(gs, state)
    rhs = r_operator(ma, v, rhs_state, inverse=True)
    rhs = {m: c.c[0] for m, c in rhs.items() if c.c[0]}
    lhs = {m: c for m, c in lhs.items() if c}
    return lhs, rhs
