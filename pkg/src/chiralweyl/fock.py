"""Super Fock space of free symplectic generators.

Modes use vertex-algebra indexing a_(n); the field is a(z) = sum a_(n) z^{-n-1}
and [a_(m), b_(n)] = <a,b> delta_{m+n+1,0} (graded commutator).

A monomial is a tuple of (generator index, mode) with every mode <= -1,
sorted by generator index and then mode descending, read left to right as
the operator word applied to |0>.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .kernels import ParseError

Monomial = Tuple[Tuple[int, int], ...]
VAC: Monomial = ()


class FockError(ValueError):
    pass


def gbinom(m: int, j: int) -> int:
    """Binomial coefficient for any integer m and j >= 0."""
    if j < 0:
        return 0
    num = 1
    for k in range(j):
        num *= m - k
    den = 1
    for k in range(2, j + 1):
        den *= k
    return num // den


class GeneratorSet:
    """Generators (name, parity, weight) with a graded-antisymmetric pairing."""

    def __init__(self, generators: Sequence[Tuple[str, int, object]], pairing):
        self.names = [g[0] for g in generators]
        self.parity = [int(g[1]) % 2 for g in generators]
        self.weight = [Fraction(g[2]) for g in generators]
        self.pairing = [[Fraction(x) for x in row] for row in pairing]
        self.index = {n: i for i, n in enumerate(self.names)}
        if len(self.index) != len(self.names):
            raise FockError("duplicate generator names")
        for n in self.names:
            if not re.fullmatch(r"[A-Za-z][A-Za-z0-9_]*", n) or re.fullmatch(r"z\d+", n):
                raise FockError(f"bad generator name {n!r}")
        self._validate()

    def _validate(self):
        m = len(self.names)
        if len(self.pairing) != m or any(len(r) != m for r in self.pairing):
            raise FockError("pairing matrix has the wrong shape")
        for a in range(m):
            if not (0 <= self.weight[a] <= 1):
                raise FockError("weights must lie in [0, 1]")
            for b in range(m):
                p = self.pairing[a][b]
                sign = -1 if self.parity[a] * self.parity[b] == 0 else 1
                if p != sign * self.pairing[b][a]:
                    raise FockError("pairing is not graded antisymmetric")
                if p and self.weight[a] + self.weight[b] != 1:
                    raise FockError("pairing couples weights that do not sum to 1")
                if p and self.parity[a] != self.parity[b]:
                    raise FockError("pairing mixes parities")
        from .bv import invert_matrix
        try:
            invert_matrix(self.pairing)
        except ZeroDivisionError:
            raise FockError("pairing is degenerate") from None

    def __len__(self):
        return len(self.names)

    def __repr__(self):
        return f"GeneratorSet({self.names})"

    def gen(self, g) -> int:
        if isinstance(g, int):
            if not 0 <= g < len(self.names):
                raise FockError(f"unknown generator index {g}")
            return g
        if g not in self.index:
            raise FockError(f"unknown generator {g!r}")
        return self.index[g]

    def pair(self, a: int, b: int) -> Fraction:
        return self.pairing[a][b]

    def partners(self, a: int) -> List[int]:
        return [b for b in range(len(self.names)) if self.pairing[a][b]]

    def mono_parity(self, m: Monomial) -> int:
        return sum(self.parity[g] for g, _ in m) % 2

    def mono_level(self, m: Monomial) -> int:
        return -sum(n for _, n in m)

    def mono_weight(self, m: Monomial) -> Fraction:
        return sum((Fraction(-n - 1) + self.weight[g] for g, n in m), Fraction(0))

    def key(self):
        return (tuple(self.names), tuple(self.parity), tuple(self.weight),
                tuple(tuple(r) for r in self.pairing))


def symplectic_bosons(m: int = 1) -> GeneratorSet:
    """2m even generators of weight 1/2, <e_{2k-1}, e_{2k}> = 1."""
    names = [f"e{i + 1}" for i in range(2 * m)]
    P = [[0] * (2 * m) for _ in range(2 * m)]
    for k in range(m):
        P[2 * k][2 * k + 1] = 1
        P[2 * k + 1][2 * k] = -1
    return GeneratorSet([(n, 0, Fraction(1, 2)) for n in names], P)


def beta_gamma(alpha=Fraction(1, 2), rank: int = 1, odd: bool = False) -> GeneratorSet:
    """Generators e_i of weight alpha and duals f_i of weight 1 - alpha.

    Pairing <e_i, f_j> = delta_ij; for odd generators the pairing is symmetric.
    """
    alpha = Fraction(alpha)
    par = 1 if odd else 0
    gens, m = [], 2 * rank
    for i in range(rank):
        gens.append((f"{'b' if odd else 'e'}{i + 1}", par, alpha))
    for i in range(rank):
        gens.append((f"{'c' if odd else 'f'}{i + 1}", par, 1 - alpha))
    P = [[0] * m for _ in range(m)]
    for i in range(rank):
        P[i][rank + i] = 1
        P[rank + i][i] = 1 if odd else -1
    return GeneratorSet(gens, P)


def mixed_system() -> GeneratorSet:
    """One symplectic boson pair plus one odd bc pair (weights 1/2)."""
    gens = [("a", 0, Fraction(1, 2)), ("b", 0, Fraction(1, 2)),
            ("c", 1, Fraction(1, 2)), ("d", 1, Fraction(1, 2))]
    P = [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]
    return GeneratorSet(gens, P)


# --------------------------------------------------------------- states

class FockState:
    """Finite combination of canonical monomials applied to the vacuum."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        t = {}
        for m, c in (terms or {}).items():
            if c:
                t[tuple(m)] = Fraction(c) if not isinstance(c, Fraction) else c
        self.terms: Dict[Monomial, Fraction] = t

    @classmethod
    def vacuum(cls, c=1):
        return cls({VAC: c})

    @classmethod
    def zero(cls):
        return cls()

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        t = dict(self.terms)
        for m, c in other.terms.items():
            v = t.get(m, 0) + c
            if v:
                t[m] = v
            else:
                t.pop(m, None)
        s = FockState.__new__(FockState)
        s.terms = t
        return s

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        if not c:
            return FockState()
        s = FockState.__new__(FockState)
        s.terms = {m: v * c for m, v in self.terms.items()}
        return s

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        return isinstance(other, FockState) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"FockState({self.terms})"

    def coefficient(self, m: Monomial):
        return self.terms.get(tuple(m), Fraction(0))

    def max_level(self):
        return max((-sum(n for _, n in m) for m in self.terms), default=0)


def _insert(gs: GeneratorSet, g: int, n: int, m: Monomial):
    """Apply creation operator g_(n) to monomial m: (sign, monomial) or (0, None)."""
    key = (g, -n)
    pos = 0
    while pos < len(m) and (m[pos][0], -m[pos][1]) < key:
        pos += 1
    if pos < len(m) and m[pos] == (g, n) and gs.parity[g]:
        return 0, None
    sign = 1
    if gs.parity[g]:
        if sum(gs.parity[h] for h, _ in m[:pos]) % 2:
            sign = -1
    return sign, m[:pos] + ((g, n),) + m[pos:]


def apply_mode_mono(gs: GeneratorSet, g: int, n: int, m: Monomial) -> Dict[Monomial, Fraction]:
    if n <= -1:
        s, out = _insert(gs, g, n, m)
        return {out: Fraction(s)} if s else {}
    res: Dict[Monomial, Fraction] = {}
    par = 0
    for k, (h, mode) in enumerate(m):
        if mode == -n - 1:
            p = gs.pairing[g][h]
            if p:
                sign = -1 if (gs.parity[g] and par) else 1
                rest = m[:k] + m[k + 1:]
                res[rest] = res.get(rest, 0) + sign * p
        par ^= gs.parity[h]
    return {k: v for k, v in res.items() if v}


def apply_mode(gs: GeneratorSet, s: FockState, g, n: int) -> FockState:
    """g_(n) acting on s."""
    g = gs.gen(g)
    out: Dict[Monomial, Fraction] = {}
    for m, c in s.terms.items():
        for m2, c2 in apply_mode_mono(gs, g, n, m).items():
            v = out.get(m2, 0) + c * c2
            if v:
                out[m2] = v
            else:
                out.pop(m2, None)
    r = FockState.__new__(FockState)
    r.terms = out
    return r


def monomial_state(gs: GeneratorSet, word: Iterable[Tuple[object, int]]) -> FockState:
    """Apply the operator word (leftmost applied last) to the vacuum."""
    s = FockState.vacuum()
    for g, n in reversed(list(word)):
        s = apply_mode(gs, s, g, n)
    return s


# ------------------------------------------------------------ n-th products

_NTH_CACHE: dict = {}


def _nth_mono(gs: GeneratorSet, a: Monomial, n: int, b: Monomial) -> Dict[Monomial, Fraction]:
    """a_(n) b for monomials, via the Borcherds recursion on the first factor of a."""
    ck = (gs.key(), a, n, b)
    hit = _NTH_CACHE.get(ck)
    if hit is not None:
        return hit
    if not a:
        out = {b: Fraction(1)} if n == -1 else {}
        _NTH_CACHE[ck] = out
        return out
    if gs.mono_weight(a) + gs.mono_weight(b) - n - 1 < 0:
        _NTH_CACHE[ck] = {}
        return {}
    (x, m), rest = a[0], a[1:]
    px, prest = gs.parity[x], gs.mono_parity(rest)
    out: Dict[Monomial, Fraction] = {}

    def acc(d, c):
        for k, v in d.items():
            w = out.get(k, 0) + c * v
            if w:
                out[k] = w
            else:
                out.pop(k, None)

    wa, wb = gs.mono_weight(rest), gs.mono_weight(b)
    jmax = max(int(wa + wb - 1 - n), gs.mono_level(b) - 1, 0)
    ksign = -((-1) ** (m % 2)) * (-1 if px and prest else 1)
    for j in range(jmax + 1):
        cb = gbinom(m, j) * (-1) ** j
        if not cb:
            continue
        inner = _nth_mono(gs, rest, n + j, b)
        for mono, c in inner.items():
            acc(apply_mode_mono(gs, x, m - j, mono), cb * c)
        xb = apply_mode_mono(gs, x, j, b)
        for mono, c in xb.items():
            acc(_nth_mono(gs, rest, m + n - j, mono), cb * ksign * c)
    _NTH_CACHE[ck] = out
    return out


def nth_product(gs: GeneratorSet, a: FockState, n: int, b: FockState) -> FockState:
    """The vertex-algebra product a_(n) b."""
    out: Dict[Monomial, Fraction] = {}
    for ma, ca in a.terms.items():
        for mb, cb in b.terms.items():
            for m, c in _nth_mono(gs, ma, n, mb).items():
                v = out.get(m, 0) + ca * cb * c
                if v:
                    out[m] = v
                else:
                    out.pop(m, None)
    r = FockState.__new__(FockState)
    r.terms = out
    return r


def state_parity(gs: GeneratorSet, s: FockState) -> int:
    ps = {gs.mono_parity(m) for m in s.terms}
    if len(ps) > 1:
        raise FockError("state of mixed parity")
    return ps.pop() if ps else 0


def state_weight_bound(gs: GeneratorSet, s: FockState) -> Fraction:
    return max((gs.mono_weight(m) for m in s.terms), default=Fraction(0))


def singular_ope(gs: GeneratorSet, a: FockState, b: FockState) -> Dict[int, FockState]:
    """{n: a_(n) b} for all n >= 0 with a nonzero result."""
    top = int(state_weight_bound(gs, a) + state_weight_bound(gs, b))
    out = {}
    for n in range(0, top + 1):
        r = nth_product(gs, a, n, b)
        if not r.is_zero():
            out[n] = r
    return out


def normal_ordered_product(gs: GeneratorSet, s1: FockState, s2: FockState) -> FockState:
    """:s1 s2: = s1_(-1) s2, the regular coincidence limit of s1(z) s2(w)."""
    return nth_product(gs, s1, -1, s2)


def translation(gs: GeneratorSet, s: FockState) -> FockState:
    """T = L_{-1}: the derivation with T a_(n) = -n a_(n-1) on creation modes."""
    out = FockState()
    for m, c in s.terms.items():
        for k, (g, n) in enumerate(m):
            word = list(m)
            word[k] = (g, n - 1)
            out = out + monomial_state(gs, word).scale(c * -n)
    return out


# ---------------------------------------------------- conformal structure

def stress_tensor(gs: GeneratorSet) -> FockState:
    """T from the free-field formulas.

    For a pair (e, f) with <f, e> = 1 and weights (alpha, 1 - alpha):
        T += (1 - alpha) :de f: - alpha :e df:
    For the weight-1/2 sector with form w_ab = <e_a, e_b>:
        T += 1/2 sum_ab W^{ab} :e_a de_b:,  W^{ab} = (-1)^|a| (w^{-1})_{ba}.
    Pair orientation and W were fixed by demanding L0 e = wt(e) e.
    """
    from .bv import invert_matrix
    m = len(gs)
    T = FockState()
    done = set()
    half = [a for a in range(m) if gs.weight[a] == Fraction(1, 2)]
    for a in range(m):
        for b in gs.partners(a):
            if (a, b) in done or a in half:
                continue
            if gs.weight[a] > gs.weight[b] or (gs.weight[a] == gs.weight[b] and a > b):
                continue
            done.add((a, b))
            done.add((b, a))
            alpha = gs.weight[a]
            p = gs.pair(b, a)
            # normalized so that <f, e> = 1; this orientation gives L0 e = alpha e
            w1 = monomial_state(gs, [(a, -2), (b, -1)])
            w2 = monomial_state(gs, [(a, -1), (b, -2)])
            T = T + (w1.scale((1 - alpha)) - w2.scale(alpha)).scale(Fraction(1) / p)
    if half:
        sub = [[gs.pairing[a][b] for b in half] for a in half]
        inv = invert_matrix(sub)
        for ia, a in enumerate(half):
            for ib, b in enumerate(half):
                c = inv[ib][ia] * (-1) ** gs.parity[a]
                if c:
                    T = T + monomial_state(gs, [(a, -1), (b, -2)]).scale(Fraction(1, 2) * c)
    return T


def virasoro(gs: GeneratorSet, n: int, s: FockState, T: Optional[FockState] = None) -> FockState:
    """L_n s = T_(n+1) s."""
    if T is None:
        T = stress_tensor(gs)
    return nth_product(gs, T, n + 1, s)


def virasoro_commutator_check(gs: GeneratorSet, level: int = 4, modes=range(-3, 4)) -> dict:
    """Compare [L_m, L_n] with (m - n) L_{m+n} + C (m^3 - m) delta_{m+n,0} on basis states.

    C is read off from the first nonzero central defect and then checked
    everywhere else; it is reported, not presumed.
    """
    T = stress_tensor(gs)
    central = None
    checked = 0
    failures = []
    for mono in basis_upto(gs, level):
        s = FockState({mono: 1})
        Ls = {n: virasoro(gs, n, s, T) for n in modes}
        for m in modes:
            for n in modes:
                if m >= n:
                    continue
                lhs = virasoro(gs, m, Ls[n], T) - virasoro(gs, n, Ls[m], T)
                defect = lhs - virasoro(gs, m + n, s, T).scale(m - n)
                checked += 1
                if m + n != 0 or m ** 3 == m:
                    if not defect.is_zero():
                        failures.append((mono, m, n))
                    continue
                ratio = defect.terms.get(mono, Fraction(0)) / (m ** 3 - m)
                if central is None:
                    central = ratio
                if not (defect - s.scale(central * (m ** 3 - m))).is_zero():
                    failures.append((mono, m, n))
    return {"central": central, "central_charge": None if central is None else 12 * central,
            "checked": checked, "failures": failures}


def km_current_state(gs: GeneratorSet, up, down) -> FockState:
    """J = :up down: with up of weight 1 - alpha and down of weight alpha."""
    u, d = gs.gen(up), gs.gen(down)
    if gs.weight[u] + gs.weight[d] != 1:
        raise FockError("current indices are not from paired sectors")
    if not gs.partners(u) or not gs.partners(d):
        raise FockError("current indices are not from paired sectors")
    return monomial_state(gs, [(u, -1), (d, -1)])


def km_current(gs: GeneratorSet, up, down, n: int, s: FockState) -> FockState:
    """(J^up_down)_n s; J has weight 1 so J_n = J_(n)."""
    return nth_product(gs, km_current_state(gs, up, down), n, s)


# ------------------------------------------------------------ bases

def partitions_of(level: int, max_part: Optional[int] = None):
    if max_part is None:
        max_part = level
    if level == 0:
        yield ()
        return
    for p in range(min(level, max_part), 0, -1):
        for rest in partitions_of(level - p, p):
            yield (p,) + rest


def basis(gs: GeneratorSet, level: int) -> List[Monomial]:
    """Canonical monomials of exactly the given level (sum of -modes)."""
    m = len(gs)
    out: List[Monomial] = []

    def rec(g, remaining, acc):
        if g == m:
            if remaining == 0:
                out.append(tuple(acc))
            return
        for used in range(remaining + 1):
            for part in _parts_for(g, used):
                rec(g + 1, remaining - used, acc + [(g, -p) for p in reversed(part)])

    def _parts_for(g, used):
        if used == 0:
            return [()]
        res = []
        for part in partitions_of(used):
            if gs.parity[g] and len(set(part)) != len(part):
                continue
            res.append(part)
        return res

    rec(0, level, [])
    return sorted(out, key=lambda mono: [(a, -b) for a, b in mono])


def basis_upto(gs: GeneratorSet, level: int) -> List[Monomial]:
    out = []
    for l in range(level + 1):
        out.extend(basis(gs, l))
    return out


# ------------------------------------------------------------ text grammar

_STATE_TOK = re.compile(r"\s*(?:(\|0>)|(\d+)|([A-Za-z][A-Za-z0-9_]*)\s*\(\s*(-?\d+)\s*\)|([-+*/]))")


def parse_state(gs: GeneratorSet, src: str) -> FockState:
    """Parse e.g. ``3/2 a(-2) b(-1) |0> - b(-1)|0>``."""
    pos = 0
    toks = []
    while True:
        while pos < len(src) and src[pos].isspace():
            pos += 1
        if pos >= len(src):
            break
        m = _STATE_TOK.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", src, pos)
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("vac", None, start))
        elif m.group(2):
            toks.append(("num", int(m.group(2)), start))
        elif m.group(3):
            name = m.group(3)
            if name not in gs.index:
                raise ParseError(f"unknown generator {name!r}", src, start)
            toks.append(("mode", (gs.index[name], int(m.group(4))), start))
        else:
            toks.append(("op", m.group(5), start))
        pos = m.end()
    toks.append(("end", None, len(src)))
    i = 0
    total = FockState()
    sign = 1
    first = True
    while toks[i][0] != "end":
        t = toks[i]
        if t[0] == "op" and t[1] in "+-":
            sign = -1 if t[1] == "-" else 1
            i += 1
        elif not first:
            raise ParseError("expected '+' or '-'", src, t[2])
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
            if toks[i][0] == "op" and toks[i][1] == "*":
                i += 1
        word = []
        while toks[i][0] == "mode":
            word.append(toks[i][1])
            i += 1
        if toks[i][0] != "vac":
            raise ParseError("expected '|0>'", src, toks[i][2])
        i += 1
        total = total + monomial_state(gs, word).scale(sign * coeff)
        sign, first = 1, False
    if first:
        raise ParseError("empty state", src, 0)
    return total


def format_monomial(gs: GeneratorSet, m: Monomial) -> str:
    return " ".join(f"{gs.names[g]}({n})" for g, n in m)


def format_state(gs: GeneratorSet, s: FockState) -> str:
    if s.is_zero():
        return "0|0>"
    parts = []
    for m in sorted(s.terms, key=lambda mono: (-len(mono), [(a, -b) for a, b in mono])):
        c = s.terms[m]
        mono = format_monomial(gs, m)
        body = (mono + " |0>") if mono else "|0>"
        a = abs(c)
        coef = "" if a == 1 else (f"{a.numerator}/{a.denominator} " if a.denominator != 1 else f"{a.numerator} ")
        parts.append(("-" if c < 0 else "+", coef + body))
    s0 = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    for sg, body in parts[1:]:
        s0 += f" {sg} {body}"
    return s0
