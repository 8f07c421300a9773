"""Differential rule tables for the rho-Bockstein and motivic Adams spectral
sequences over each base field, and the closed-form Ext presentations with
their rewriting systems."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from . import arith
from .milnor import DEFAULT_PRIMES, BaseField, KTheory, ktheory

# A monomial of the E1 page is a triple (symbol name, tau exponent, v exponents).
Mono = tuple  # (str, int, tuple[int, ...])


def mono_degree(kt: KTheory, mono: Mono) -> tuple[int, int, int]:
    """(s, stem, w) of a monomial."""
    sym, t, e = mono
    s = sum(e)
    vstem = sum(ei * ((1 << i) - 1) for i, ei in enumerate(e))
    return s, t + vstem, vstem - t - kt.degree(sym)


def render_mono(mono: Mono, symbol_first: bool = True) -> str:
    sym, t, e = mono
    parts = [] if sym == "1" else [sym]
    if t:
        parts.append("tau" if t == 1 else f"tau^{t}")
    for i, ei in enumerate(e):
        if ei:
            parts.append(f"v{i}" if ei == 1 else f"v{i}^{ei}")
    return " ".join(parts) if parts else "1"


@dataclass(frozen=True)
class DifferentialRule:
    """One differential d_r on monomials sym * tau^t * v^E with nu2(t) = i.

    ``source_symbol`` None means the rule applies to every symbol and the
    target coefficient is ``sym * coefficient``; otherwise only that symbol
    fires and it is replaced by ``coefficient``.
    """

    kind: str  # "bss" or "mass"
    r: int
    i: int
    family: str
    coefficient: frozenset
    tau_drop: int
    v_shift: tuple
    source_symbol: str | None = None

    def applies(self, mono: Mono) -> bool:
        sym, t, _ = mono
        if t == 0 or arith.nu2(t) != self.i:
            return False
        return self.source_symbol is None or sym == self.source_symbol

    def image(self, mono: Mono, kt: KTheory) -> list:
        sym, t, e = mono
        if self.source_symbol is None:
            coeff = kt.mul(frozenset({sym}), self.coefficient)
        else:
            coeff = self.coefficient
        e2 = tuple(a + b for a, b in zip(e, self.v_shift))
        return [(c, t - self.tau_drop, e2) for c in coeff]

    def shift(self, kt: KTheory) -> tuple[int, int, int]:
        """Tridegree change (ds, dstem, dw) of this rule."""
        return (self.r if self.kind == "mass" else 1, -1, 0)

    def describe(self, kt: KTheory) -> str:
        src_sym = self.source_symbol or "1"
        src = render_mono((src_sym, 1 << self.i, (0,) * len(self.v_shift)))
        tgt_sym = kt.render(self.coefficient)
        tgt = render_mono(("1", (1 << self.i) - self.tau_drop, self.v_shift))
        if " + " in tgt_sym:
            tgt_sym = f"({tgt_sym})"
        tgt = tgt_sym if tgt == "1" else (tgt if tgt_sym == "1" else f"{tgt_sym} {tgt}")
        return f"d_{self.r}({src}) = {tgt}"


def check_degree_law(rule: DifferentialRule, kt: KTheory, sym: str | None = None) -> None:
    """Source and target of ``rule`` must differ by (ds, -1, 0) in (s, stem, w)."""
    sym = sym or rule.source_symbol or "1"
    src = (sym, 1 << rule.i, (0,) * len(rule.v_shift))
    ds, dm, dw = rule.shift(kt)
    s, m, w = mono_degree(kt, src)
    for tgt in rule.image(src, kt):
        if mono_degree(kt, tgt) != (s + ds, m + dm, w + dw):
            raise AssertionError(f"{rule.describe(kt)} violates the degree law")


def _unit_vector(n: int, i: int, k: int = 1) -> tuple:
    return tuple(k if j == i else 0 for j in range(n + 1))


def bss_pages(fld: BaseField, n: int) -> list[int]:
    return [rule.r for rule in bss_rules(fld, n)]


@lru_cache(maxsize=None)
def _bss_rules(fld: BaseField, n: int) -> tuple:
    kt = ktheory(fld)
    out = []
    for i in range(n + 1):
        r = (1 << (i + 1)) - 1
        coeff = kt.rho_power(r)
        if not coeff:
            break
        rule = DifferentialRule("bss", r, i, f"bss{i}", coeff, 1 << i, _unit_vector(n, i))
        check_degree_law(rule, kt)
        out.append(rule)
    return tuple(out)


def bss_rules(fld: BaseField, n: int) -> list[DifferentialRule]:
    """d_{2^{i+1}-1}(tau^{2^i}) = rho^{2^{i+1}-1} v_i for the i where that power of rho is nonzero."""
    return list(_bss_rules(fld, n))


@dataclass(frozen=True)
class MassFamily:
    """d_{offset+i}(sym tau^{2^i k}) for i >= i_min, shared coefficient."""

    name: str
    offset: int
    i_min: int
    coefficient: frozenset
    source_symbol: str | None = None

    def rule(self, n: int, i: int) -> DifferentialRule:
        r = self.offset + i
        return DifferentialRule("mass", r, i, self.name, self.coefficient, 1,
                                _unit_vector(n, 0, r), self.source_symbol)

    def page_range(self, i_max: int) -> range:
        return range(self.offset + self.i_min, self.offset + i_max + 1)


# Candidate coefficients z of the Q_2 family; "xy" stands for the sum x + y.
Z_VARIANTS = {"x": frozenset({"x"}), "y": frozenset({"y"}), "xy": frozenset({"x", "y"})}
# Global symbols localizing to each candidate at the 2-adic place (x = [2], y = [5]).
GLOBAL_Z_LIFTS = {"x": frozenset({"[2]"}), "y": frozenset({"[5]"}), "xy": frozenset({"[2]", "[5]"})}


def mass_families(fld: BaseField, primes=DEFAULT_PRIMES, z: str = "x") -> list[MassFamily]:
    tag = fld.tag
    if tag in ("C", "R"):
        return []
    if tag == "Qp":
        p = fld.p
        if p % 4 == 1:
            return [MassFamily(f"Q{p}", arith.epsilon(p), 0, frozenset({"u"}))]
        return [MassFamily(f"Q{p}", arith.lam(p) - 1, 1, frozenset({"rho"}))]
    if tag == "Q2":
        return [MassFamily("Q2", 2, 1, Z_VARIANTS[z])]
    if z not in GLOBAL_Z_LIFTS:
        raise ValueError(f"unknown z variant {z!r}")
    lift = GLOBAL_Z_LIFTS[z]
    if any(int(name[1:-1]) not in primes for name in lift):
        raise ValueError(f"the z={z} table needs the primes of {sorted(lift)} in the window")
    fams = [MassFamily("unit", 2, 1, lift, "1")]
    for p in sorted(primes):
        if p == 2:
            continue
        target = frozenset({f"a_{p}", "rho^2"})
        if p % 4 == 1:
            fams.append(MassFamily(f"[{p}]", arith.epsilon(p), 0, target, f"[{p}]"))
        else:
            fams.append(MassFamily(f"[{p}]", arith.lam(p) - 1, 1, target, f"[{p}]"))
    return fams


def _family_order(name: str):
    digits = "".join(ch for ch in name if ch.isdigit())
    return (int(digits) if digits else 0, name)


def mass_rules(fld: BaseField, n: int, primes=DEFAULT_PRIMES, i_max: int = 5, z: str = "x") -> list[DifferentialRule]:
    """All MASS rules with tau-valuation i <= i_max, sorted by page."""
    kt = ktheory(fld, tuple(sorted(primes)) if fld.tag == "Q" else ())
    out = []
    for fam in mass_families(fld, primes, z):
        for i in range(fam.i_min, i_max + 1):
            rule = fam.rule(n, i)
            check_degree_law(rule, kt)
            out.append(rule)
    out.sort(key=lambda rule: (rule.r, _family_order(rule.family), rule.i))
    return out


def mass_rules_at(fld: BaseField, n: int, r: int, primes=DEFAULT_PRIMES, z: str = "x") -> list[DifferentialRule]:
    out = []
    for fam in mass_families(fld, primes, z):
        i = r - fam.offset
        if i >= fam.i_min:
            out.append(fam.rule(n, i))
    return out


def mass_pages(fld: BaseField, primes=DEFAULT_PRIMES, i_max: int = 5) -> list[int]:
    pages = set()
    for fam in mass_families(fld, primes):
        pages.update(fam.page_range(i_max))
    return sorted(pages)


def rules_to_json(fld: BaseField, n: int, primes=DEFAULT_PRIMES, i_max: int = 5, z: str = "x") -> dict:
    kt = ktheory(fld, tuple(sorted(primes)) if fld.tag == "Q" else ())
    def entry(rule):
        return {"kind": rule.kind, "r": rule.r, "i": rule.i, "family": rule.family,
                "rule": rule.describe(kt)}
    return {"field": str(fld), "n": n,
            "bss": [entry(r) for r in bss_rules(fld, n)],
            "mass": [entry(r) for r in mass_rules(fld, n, primes, i_max, z)]}


# --------------------------------------------------------------------------
# closed-form Ext presentations
#
# The Koszul-type complex computing Ext is F2[rho]-linear, so it splits along
# any decomposition of k^M into cyclic F2[rho]-modules.  A summand of infinite
# rho-height behaves like the real case; a summand of height h <= 3 only sees
# the d1 Bockstein.


@dataclass(frozen=True)
class RhoSummand:
    """Cyclic F2[rho]-submodule of k^M generated by ``generator``.

    ``generator`` is a sum of basis names; ``height`` is the number of nonzero
    rho-multiples (None for a free module)."""

    generator: frozenset
    degree: int
    height: int | None

    @property
    def name(self) -> str:
        return "+".join(sorted(self.generator))


def rho_summands(fld: BaseField, primes=DEFAULT_PRIMES) -> list[RhoSummand]:
    tag = fld.tag
    one = frozenset({"1"})
    if tag == "C":
        return [RhoSummand(one, 0, 1)]
    if tag == "R":
        return [RhoSummand(one, 0, None)]
    if tag == "Q2":
        return [RhoSummand(one, 0, 3), RhoSummand(frozenset({"x"}), 1, 1),
                RhoSummand(frozenset({"y"}), 1, 1)]
    if tag == "Qp":
        if fld.p % 4 == 1:
            return [RhoSummand(frozenset({g}), d, 1) for g, d in (("1", 0), ("u", 1), ("p", 1), ("up", 2))]
        return [RhoSummand(one, 0, 2), RhoSummand(frozenset({"p"}), 1, 2)]
    out = [RhoSummand(one, 0, None), RhoSummand(frozenset({"[2]"}), 1, 1)]
    for p in sorted(primes):
        if p == 2:
            continue
        if p % 4 == 1:
            out.append(RhoSummand(frozenset({f"[{p}]"}), 1, 1))
            out.append(RhoSummand(frozenset({f"a_{p}", "rho^2"}), 2, 1))
        else:
            # rho [p] = a_p + rho^2 and rho (a_p + rho^2) = 0
            out.append(RhoSummand(frozenset({f"[{p}]"}), 1, 2))
    return out


def check_rho_summands(fld: BaseField, primes=DEFAULT_PRIMES, max_degree: int = 6) -> None:
    """Assert the summands have the stated heights and together span k^M."""
    kt = ktheory(fld, tuple(sorted(primes)) if fld.tag == "Q" else ())
    spans: dict[int, list] = {}
    for summ in rho_summands(fld, primes):
        x = summ.generator
        k = 0
        while x and summ.degree + k <= max_degree:
            spans.setdefault(summ.degree + k, []).append(x)
            x = kt.mul(x, kt.rho)
            k += 1
        if summ.height is not None:
            if k != summ.height and summ.degree + k <= max_degree:
                raise AssertionError(f"{summ.name}: height {k}, expected {summ.height}")
    for deg in range(max_degree + 1):
        basis = kt.basis(deg)
        vecs = [sum(1 << basis.index(b) for b in x) for x in spans.get(deg, [])]
        from .pages import rank_of
        if len(vecs) != len(basis) or rank_of(vecs) != len(basis):
            raise AssertionError(f"summands do not form a basis in degree {deg}")


# A word of the real-type presentation: (rho exponent, exponent of the
# periodicity generator tau^{2^{n+1}}, sorted tuple of (i, j) for the factors
# v_i(j)).
Word = tuple


class RealRewriting:
    """F2[rho, tau^{2^{n+1}}, v_i(j)] modulo
        rho^{2^{i+1}-1} v_i(j) = 0,
        v_i(j) v_k(l) = v_i(j + 2^{k-i} l) v_k(0)   (i <= k, l >= 1),
        v_i(j) = tau^{2^{n+1}} v_i(j - 2^{n-i})      (j >= 2^{n-i}),
    oriented left to right.  Without ``capped`` the last relation is used;
    under the infinite-height cap the periodicity generator is dropped.

    Termination: the first rule shortens words, the second lowers the vector
    of decorated-factor counts read from the top index down (lexicographic),
    and the third keeps that vector from growing while lowering the total
    decoration.
    """

    def __init__(self, n: int, capped: bool = False):
        self.n = n
        self.capped = capped

    def rho_bound(self, i: int) -> int:
        return (1 << (i + 1)) - 1

    def period(self, i: int) -> int | None:
        return None if self.capped else 1 << (self.n - i)

    # -- rewriting -------------------------------------------------------
    def redexes(self, word: Word) -> list:
        """All one-step rewrites of ``word`` as (rule name, result or None)."""
        a, q, fac = word
        out = []
        for pos, (i, j) in enumerate(fac):
            if a >= self.rho_bound(i):
                out.append(("nilpotence", None))
                break
        for x in range(len(fac)):
            for y in range(len(fac)):
                if x == y:
                    continue
                (i, j), (k, l) = fac[x], fac[y]
                if l < 1 or i > k or (i == k and (j < l or x > y and j == l)):
                    continue
                rest = [f for z, f in enumerate(fac) if z not in (x, y)]
                rest += [(i, j + (l << (k - i))), (k, 0)]
                out.append(("transfer", (a, q, tuple(sorted(rest)))))
        if not self.capped:
            for x, (i, j) in enumerate(fac):
                per = self.period(i)
                if j >= per:
                    rest = list(fac)
                    rest[x] = (i, j - per)
                    out.append(("periodicity", (a, q + 1, tuple(sorted(rest)))))
        return out

    def reduce(self, word: Word) -> Word | None:
        """Normal form, or None for zero.  Periodicity is applied last."""
        order = {"nilpotence": 0, "transfer": 1, "periodicity": 2}
        while word is not None:
            steps = self.redexes(word)
            if not steps:
                return word
            steps.sort(key=lambda st: order[st[0]])
            word = steps[0][1]
        return None

    def is_normal(self, word: Word) -> bool:
        return not self.redexes(word)

    def multiply(self, x: Word, y: Word) -> Word | None:
        return self.reduce((x[0] + y[0], x[1] + y[1], tuple(sorted(x[2] + y[2]))))

    # -- critical pairs ----------------------------------------------------
    def _lhs_instances(self, j_bound: int):
        gens = [(i, j) for i in range(self.n + 1) for j in range(j_bound + 1)]
        out = []
        for i, j in gens:
            out.append((self.rho_bound(i), ((i, j),)))
            if not self.capped and j >= self.period(i):
                out.append((0, ((i, j),)))
        for x, (i, j) in enumerate(gens):
            for k, l in gens:
                if l >= 1 and (i < k or (i == k and j >= l)):
                    out.append((0, tuple(sorted([(i, j), (k, l)]))))
        return out

    def critical_pairs(self, j_bound: int | None = None):
        """Yield overlap words of two left-hand sides sharing a generator."""
        if j_bound is None:
            j_bound = (1 << self.n) + 1
        lhs = self._lhs_instances(j_bound)
        by_gen: dict = {}
        for idx, (_, fac) in enumerate(lhs):
            for g in set(fac):
                by_gen.setdefault(g, []).append(idx)
        seen = set()
        for idxs in by_gen.values():
            for x in idxs:
                for y in idxs:
                    if y <= x:
                        continue
                    (a1, f1), (a2, f2) = lhs[x], lhs[y]
                    merged = _multiset_lcm(f1, f2)
                    word = (max(a1, a2), 0, merged)
                    if word not in seen:
                        seen.add(word)
                        yield word

    def check_confluence(self, j_bound: int | None = None) -> int:
        """Every one-step rewrite of every critical overlap has the same normal
        form.  Returns the number of overlaps checked."""
        count = 0
        for word in self.critical_pairs(j_bound):
            results = {self.reduce(nxt) for _, nxt in self.redexes(word)}
            if len(results) > 1:
                raise AssertionError(f"critical pair at {word} is not joinable: {results}")
            count += 1
        return count

    # -- normal forms by tridegree --------------------------------------------
    def word_degree(self, word: Word) -> tuple[int, int, int]:
        a, q, fac = word
        T = q << (self.n + 1)
        s = len(fac)
        stem, w = T, -T - a
        for i, j in fac:
            deco = j << (i + 1)
            stem += deco + (1 << i) - 1
            w += (1 << i) - 1 - deco
        return s, stem, w

    def normal_forms(self, key) -> list[Word]:
        s, m, w = key
        out = []
        for e in _exponent_vectors(s, self.n + 1, m):
            vstem = sum(x * ((1 << i) - 1) for i, x in enumerate(e))
            tt = m - vstem
            facs = [(i, 0) for i, x in enumerate(e) for _ in range(x)]
            if not facs:
                step = None if self.capped else 1 << (self.n + 1)
                if tt and (step is None or tt % step):
                    continue
                a = -tt - w
                word = (a, 0 if step is None else tt // step, ())
                if a >= 0:
                    out.append(word)
                continue
            i0 = facs[0][0]
            unit = 1 << (i0 + 1)
            if tt % unit:
                continue
            deco = tt // unit
            if self.capped:
                q, j = 0, deco
            else:
                q, j = divmod(deco, self.period(i0))
            a = vstem - tt - w
            word = (a, q, tuple(sorted([(i0, j)] + facs[1:])))
            if a >= 0 and self.is_normal(word):
                out.append(word)
        return out

    def dim(self, key) -> int:
        return len(self.normal_forms(key))

    def render(self, word: Word | None) -> str:
        if word is None:
            return "0"
        a, q, fac = word
        parts = []
        if a:
            parts.append("rho" if a == 1 else f"rho^{a}")
        if q:
            T = 1 << (self.n + 1)
            parts.append(f"tau^{T}" if q == 1 else f"tau^{T * q}")
        parts.extend(_render_factors(fac))
        return " ".join(parts) if parts else "1"

    def paper_name(self, word: Word | None) -> str:
        """Like ``render`` but with rho v_i(j) written w_i(j)."""
        if word is None or not word[0] or not word[2]:
            return self.render(word)
        a, q, fac = word
        head = fac[0]
        rest = list(fac[1:])
        parts = []
        if a > 1:
            parts.append("rho" if a == 2 else f"rho^{a - 1}")
        if q:
            T = 1 << (self.n + 1)
            parts.append(f"tau^{T}" if q == 1 else f"tau^{T * q}")
        parts.append(f"w{head[0]}({head[1]})")
        parts.extend(_render_factors(rest))
        return " ".join(parts)

    def from_e1(self, mono: Mono) -> Word | None:
        """Word of rho^a tau^t v^E, decorating the lowest v_i present."""
        sym, t, e = mono
        a = 0 if sym == "1" else (1 if sym == "rho" else int(sym.split("^")[1]))
        fac = [(i, 0) for i, x in enumerate(e) for _ in range(x)]
        if not fac:
            T = 1 << (self.n + 1)
            if self.capped and t or t % T:
                raise ValueError(f"{render_mono(mono)} is not in the presentation")
            return self.reduce((a, t // T, ()))
        unit = 1 << (fac[0][0] + 1)
        if t % unit:
            raise ValueError(f"{render_mono(mono)} is not in the presentation")
        fac[0] = (fac[0][0], t // unit)
        return self.reduce((a, 0, tuple(sorted(fac))))

    def to_e1(self, word: Word) -> Mono:
        """The E1 monomial representing a word: v_i(j) -> tau^{2^{i+1} j} v_i."""
        a, q, fac = word
        t = q << (self.n + 1)
        e = [0] * (self.n + 1)
        for i, j in fac:
            t += j << (i + 1)
            e[i] += 1
        sym = "1" if a == 0 else ("rho" if a == 1 else f"rho^{a}")
        return (sym, t, tuple(e))


def _render_factors(fac) -> list[str]:
    from collections import Counter
    out = []
    for (i, j), k in sorted(Counter(fac).items()):
        base = f"v{i}" if j == 0 else f"v{i}({j})"
        out.append(base if k == 1 else f"{base}^{k}")
    return out


def _multiset_lcm(f1: tuple, f2: tuple) -> tuple:
    from collections import Counter
    c1, c2 = Counter(f1), Counter(f2)
    return tuple(sorted((c1 | c2).elements()))


def _exponent_vectors(s: int, nv: int, stem_budget: int):
    """Exponent vectors over v_0..v_{nv-1} with total s and v-stem <= budget."""
    def rec(i, left, budget):
        if i == nv - 1:
            if left * ((1 << i) - 1) <= budget:
                yield (left,)
            return
        step = (1 << i) - 1
        for x in range(left + 1):
            if x * step > budget:
                break
            for rest in rec(i + 1, left - x, budget - x * step):
                yield (x,) + rest
    if nv == 0:
        return
    yield from rec(0, s, stem_budget)


def real_to_complex(word: Word, n: int) -> tuple | None:
    """Image of a real-type word under rho -> 0: a monomial (t, E) of F2[tau, v]."""
    a, q, fac = word
    if a:
        return None
    t = q << (n + 1)
    e = [0] * (n + 1)
    for i, j in fac:
        t += j << (i + 1)
        e[i] += 1
    return t, tuple(e)


def check_real_to_complex(n: int, j_bound: int | None = None) -> int:
    """The comparison map kills or preserves every relation, so it is a well
    defined ring map.  Returns the number of relations checked."""
    system = RealRewriting(n)
    count = 0
    for a, fac in system._lhs_instances(j_bound if j_bound is not None else (1 << n) + 1):
        lhs = (a, 0, fac)
        for _, rhs in system.redexes(lhs):
            left = real_to_complex(lhs, n)
            right = None if rhs is None else real_to_complex(rhs, n)
            if left != right:
                raise AssertionError(f"relation {lhs} -> {rhs} not preserved")
            count += 1
    return count


@dataclass
class ExtPresentation:
    """Ext over E(n) as a sum over rho-summands of k^M."""

    field: BaseField
    n: int
    capped: bool
    summands: list
    real: RealRewriting

    def _finite_forms(self, summ: RhoSummand, key) -> list[Mono]:
        s, m, w = key
        h = summ.height
        if h > 3:
            raise NotImplementedError("rho-height between 4 and infinity does not occur")
        out = []
        for e in _exponent_vectors(s, self.n + 1, m):
            vstem = sum(x * ((1 << i) - 1) for i, x in enumerate(e))
            t = m - vstem
            a = vstem - t - w
            if not 0 <= a < h:
                continue
            if h == 1:
                ok = True
            elif t % 2 == 0:
                ok = e[0] == 0 or a == 0
            else:
                ok = a == h - 1
            if ok:
                out.append((a, t, e))
        return out

    def normal_forms(self, key) -> list[str]:
        s, m, w = key
        names = []
        for summ in self.summands:
            shifted = (s, m, w + summ.degree)
            gen = "" if summ.name == "1" else (f"({summ.name})" if "+" in summ.name else summ.name)
            if summ.height is None:
                for word in self.real.normal_forms(shifted):
                    body = self.real.render(word)
                    names.append(body if not gen else (gen if body == "1" else f"{gen} {body}"))
            else:
                for a, t, e in self._finite_forms(summ, shifted):
                    rho = "" if a == 0 else ("rho" if a == 1 else f"rho^{a}")
                    body = render_mono(("1", t, e))
                    parts = [x for x in (gen, rho, "" if body == "1" else body) if x]
                    names.append(" ".join(parts) if parts else "1")
        return names

    def dim(self, key) -> int:
        s, m, w = key
        if self.capped and m > (1 << (self.n + 1)) - 2:
            raise ValueError(f"stem {m} beyond the cap validity stem")
        total = 0
        for summ in self.summands:
            shifted = (s, m, w + summ.degree)
            if summ.height is None:
                total += self.real.dim(shifted)
            else:
                total += len(self._finite_forms(summ, shifted))
        return total


def ext_en_presentation(fld: BaseField, n, primes=DEFAULT_PRIMES) -> ExtPresentation:
    from .pages import parse_height
    height, capped = parse_height(n)
    return ExtPresentation(fld, height, capped, rho_summands(fld, primes), RealRewriting(height, capped))
