"""The quotient Hopf algebroids E(n) = (M, M[tau_0..tau_n]/(tau_i^2 - rho tau_{i+1}, tau_n^2))
and two independent Ext calculators for them.

* ``cobar``: the reduced cobar complex, assembled from the right unit
  eta_R(tau) = tau + rho tau_0 and primitive coproducts.  Exponential in s, so
  only practical at low filtration.
* ``koszul``: the complex k^M[tau] (x) F_2[v_0..v_n] with
  d(tau^t) = sum over set bits i of t of rho^{2^{i+1}-1} tau^{t-2^i} v_i,
  which is the linear part of eta_R.  It has the size of the E1 page and is
  the default oracle.  The two are cross-checked against each other in tests.

Tridegrees use (s, stem, w); the internal degree of a cobar element is
stem + s in the first coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .milnor import DEFAULT_PRIMES, BaseField, BiDegree, KTheory, ktheory
from .pages import kernel_combos, parse_height, rank_of, reduce_vec, rref

BASIS_LIMIT = 250_000


class WindowTooSmall(RuntimeError):
    pass


@dataclass(frozen=True)
class TriDegree:
    s: int
    d: BiDegree

    @property
    def key(self):
        return (self.s, self.d.m, self.d.w)


@dataclass(frozen=True)
class EnPresentation:
    n: int
    capped: bool
    field: BaseField
    generators: tuple  # (name, internal m, w)
    relations: tuple  # strings
    right_unit: str
    validity_stem: int | None

    def __str__(self):
        gens = ", ".join(g[0] for g in self.generators)
        return f"E({'inf:' if self.capped else ''}{self.n}) over {self.field}: [{gens}] / ({'; '.join(self.relations)})"


def en_presentation(n, fld: BaseField) -> EnPresentation:
    top, capped = parse_height(n)
    gens = tuple((f"tau_{i}", 1 << i, (1 << i) - 1) for i in range(top + 1))
    rels = []
    kt = ktheory(fld)
    rho_zero = not kt.rho
    for i in range(top):
        rels.append(f"tau_{i}^2 = 0" if rho_zero else f"tau_{i}^2 = rho tau_{i + 1}")
    if not capped:
        rels.append(f"tau_{top}^2 = 0")
    unit = "eta_R(tau) = tau" if rho_zero else "eta_R(tau) = tau + rho tau_0"
    return EnPresentation(top, capped, fld, gens, tuple(rels), unit,
                          (1 << (top + 1)) - 2 if capped else None)


# --------------------------------------------------------------------------
# Koszul complex


class Koszul:
    """k^M[tau, v_0..v_n] with the linearized right-unit differential."""

    def __init__(self, fld: BaseField, n, primes=DEFAULT_PRIMES):
        self.field = fld
        self.n, self.capped = parse_height(n)
        self.kt: KTheory = ktheory(fld, tuple(sorted(primes)) if fld.tag == "Q" else ())
        self.rho_pows = [self.kt.rho_power((1 << (i + 1)) - 1) for i in range(self.n + 1)]
        self._basis: dict = {}
        self._d: dict = {}

    def basis(self, key) -> tuple[list, dict]:
        hit = self._basis.get(key)
        if hit is None:
            s, m, w = key
            monos = []
            if s >= 0 and m >= 0:
                for e in _exponents(s, self.n + 1, m):
                    vstem = sum(x * ((1 << i) - 1) for i, x in enumerate(e))
                    t = m - vstem
                    for sym in self.kt.basis(vstem - t - w):
                        monos.append((sym, t, e))
            hit = (monos, {mo: i for i, mo in enumerate(monos)})
            self._basis[key] = hit
        return hit

    def d(self, key) -> list[int]:
        """Rows: image of each basis element of key as a bitset over (s+1, m-1, w)."""
        hit = self._d.get(key)
        if hit is None:
            s, m, w = key
            monos, _ = self.basis(key)
            _, tidx = self.basis((s + 1, m - 1, w))
            hit = []
            for sym, t, e in monos:
                row = 0
                for i in range(self.n + 1):
                    if not (t >> i & 1):
                        continue
                    e2 = tuple(x + (j == i) for j, x in enumerate(e))
                    for c in self.kt.mul(frozenset({sym}), self.rho_pows[i]):
                        row ^= 1 << tidx[(c, t - (1 << i), e2)]
                hit.append(row)
            self._d[key] = hit
        return hit

    def homology(self, key) -> tuple[int, list]:
        s, m, w = key
        monos, _ = self.basis(key)
        if not monos:
            return 0, []
        out_rows = self.d(key)
        kernel = kernel_combos(out_rows)
        incoming = [r for r in self.d((s - 1, m + 1, w)) if r] if s >= 1 else []
        bpiv = rref(incoming)
        reps = rref(reduce_vec(v, bpiv) for v in kernel)
        return len(reps), [[monos[b] for b in _bits(reps[p])] for p in sorted(reps, reverse=True)]


def _bits(v):
    while v:
        low = v & -v
        yield low.bit_length() - 1
        v ^= low


def _exponents(s, nv, budget):
    def rec(i, left, budget):
        if i == 0:
            yield (left,)
            return
        weight = (1 << i) - 1
        for ei in range(min(left, budget // weight), -1, -1):
            for rest in rec(i - 1, left - ei, budget - ei * weight):
                yield rest + (ei,)
    if s >= 0 and budget >= 0:
        yield from rec(nv - 1, s, budget)


# --------------------------------------------------------------------------
# reduced cobar complex


class Cobar:
    """Reduced cobar complex of E(n).  Gamma-monomials are exponent tuples
    (a_0..a_n), squarefree except at the top index under the cap."""

    def __init__(self, fld: BaseField, n, primes=DEFAULT_PRIMES):
        self.field = fld
        self.n, self.capped = parse_height(n)
        self.kt = ktheory(fld, tuple(sorted(primes)) if fld.tag == "Q" else ())
        self._basis: dict = {}
        self._gammas = None

    # Gamma arithmetic ---------------------------------------------------
    def normalize(self, a: list) -> tuple[int, tuple] | None:
        """Apply tau_i^2 -> rho tau_{i+1}; returns (rho power, monomial) or None for zero."""
        a = list(a)
        rho = 0
        for i in range(len(a)):
            if self.capped and i == self.n:
                break
            while a[i] >= 2:
                if i == self.n:
                    return None
                a[i] -= 2
                a[i + 1] += 1
                rho += 1
        return rho, tuple(a)

    def tau0_power(self, j: int):
        a = [0] * (self.n + 1)
        a[0] = j
        return self.normalize(a)

    def gamma_degree(self, g: tuple) -> tuple[int, int]:
        """(internal m, w) of a Gamma monomial."""
        return (sum(x << i for i, x in enumerate(g)), sum(x * ((1 << i) - 1) for i, x in enumerate(g)))

    def reduced_gammas(self, m_budget: int) -> list:
        """Nonzero Gamma monomials of internal m-degree <= budget."""
        out = []

        def rec(i, acc, budget):
            if i > self.n:
                if any(acc):
                    out.append(tuple(acc))
                return
            cap = budget >> i if (self.capped and i == self.n) else min(1, budget >> i)
            for x in range(cap + 1):
                rec(i + 1, acc + [x], budget - (x << i))

        rec(0, [], m_budget)
        return out

    def eta_r(self, sym: str, t: int) -> list:
        """eta_R(sym tau^t) minus sym tau^t as a list of (sym', t', gamma)."""
        out = []
        j = t
        while j:
            # j runs over nonzero submasks of t
            res = self.tau0_power(j)
            if res is not None:
                rho_extra, g = res
                coeff = self.kt.mul(frozenset({sym}), self.kt.rho_power(j + rho_extra))
                for c in coeff:
                    out.append((c, t - j, g))
            j = (j - 1) & t
        return out

    def reduced_coproduct(self, g: tuple) -> list:
        """Pairs (u, g - u) with u, g - u nonzero and odd multinomial coefficient."""
        ranges = [range(x + 1) for x in g]
        out = []

        def rec(i, acc):
            if i == len(g):
                u = tuple(acc)
                if any(u) and u != g:
                    out.append((u, tuple(x - y for x, y in zip(g, u))))
                return
            for y in ranges[i]:
                if (g[i] & y) == y:  # binom(g_i, y) odd
                    rec(i + 1, acc + [y])

        rec(0, [])
        return out

    # complex ------------------------------------------------------------
    def basis(self, key) -> tuple[list, dict]:
        hit = self._basis.get(key)
        if hit is not None:
            return hit
        s, m, w = key
        m_int = m + s
        out = []
        if s >= 0 and m_int >= 0:
            gammas = self.reduced_gammas(m_int)
            degs = {g: self.gamma_degree(g) for g in gammas}

            def rec(k, acc, mb, wb):
                if k == s:
                    t = m_int - mb
                    if t < 0:
                        return
                    sdeg = wb - t - w
                    for sym in self.kt.basis(sdeg):
                        out.append((sym, t, tuple(acc)))
                    if len(out) > BASIS_LIMIT:
                        raise WindowTooSmall(f"cobar basis at {key} exceeds {BASIS_LIMIT}")
                    return
                for g in gammas:
                    gm, gw = degs[g]
                    if mb + gm <= m_int:
                        rec(k + 1, acc + [g], mb + gm, wb + gw)

            rec(0, [], 0, 0)
        hit = (out, {b: i for i, b in enumerate(out)})
        self._basis[key] = hit
        return hit

    def d(self, key) -> list[int]:
        s, m, w = key
        src, _ = self.basis(key)
        _, tidx = self.basis((s + 1, m - 1, w))
        rows = []
        for sym, t, gs in src:
            row = 0
            for c, t2, g in self.eta_r(sym, t):
                row ^= 1 << tidx[(c, t2, (g,) + gs)]
            for i, g in enumerate(gs):
                for u, rest in self.reduced_coproduct(g):
                    row ^= 1 << tidx[(sym, t, gs[:i] + (u, rest) + gs[i + 1:])]
            rows.append(row)
        return rows

    def homology(self, key) -> tuple[int, list]:
        s, m, w = key
        src, _ = self.basis(key)
        if not src:
            return 0, []
        kernel = kernel_combos(self.d(key))
        incoming = [r for r in self.d((s - 1, m + 1, w)) if r] if s >= 1 else []
        bpiv = rref(incoming)
        reps = rref(reduce_vec(v, bpiv) for v in kernel)
        return len(reps), [[src[b] for b in _bits(reps[p])] for p in sorted(reps, reverse=True)]


@lru_cache(maxsize=64)
def _koszul(fld, n, primes):
    return Koszul(fld, n, primes)


@lru_cache(maxsize=16)
def _cobar(fld, n, primes):
    return Cobar(fld, n, primes)


def _prime_key(fld, primes):
    return tuple(sorted(primes)) if fld.tag == "Q" else ()


def cobar_slice(fld: BaseField, n, t: TriDegree, primes=DEFAULT_PRIMES):
    """The cobar differentials into, out of, and after the slice at t."""
    cx = _cobar(fld, n, _prime_key(fld, primes))
    s, m, w = t.key
    keys = [(s - 1, m + 1, w), (s, m, w), (s + 1, m - 1, w)]
    mats = [cx.d(k) if k[0] >= 0 else [] for k in keys]
    bases = [cx.basis(k)[0] if k[0] >= 0 else [] for k in keys] + [cx.basis((s + 2, m - 2, w))[0]]
    return mats, bases


def ext_oracle(fld: BaseField, n, t: TriDegree, primes=DEFAULT_PRIMES, method: str = "koszul"):
    """(dimension, representative cocycles) of Ext over E(n) at t."""
    key = t.key if isinstance(t, TriDegree) else tuple(t)
    if method == "koszul":
        return _koszul(fld, n, _prime_key(fld, primes)).homology(key)
    if method == "cobar":
        return _cobar(fld, n, _prime_key(fld, primes)).homology(key)
    raise ValueError(f"unknown method {method!r}")


def ext_dim(fld: BaseField, n, key, primes=DEFAULT_PRIMES, method: str = "koszul") -> int:
    return ext_oracle(fld, n, key, primes, method)[0]


def square_is_zero(fld: BaseField, n, key, primes=DEFAULT_PRIMES, method="cobar") -> bool:
    cx = (_cobar if method == "cobar" else _koszul)(fld, n, _prime_key(fld, primes))
    s, m, w = key
    first = cx.d(key)
    second = cx.d((s + 1, m - 1, w))
    for row in first:
        acc = 0
        for b in _bits(row):
            acc ^= second[b]
        if acc:
            return False
    return True
