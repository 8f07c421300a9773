"""Closed-form homotopy groups of BP<n> over the supported base fields, with
named generators, plus the MGL splitting, K-theory and ko comparisons."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

from . import arith
from .milnor import DEFAULT_PRIMES, BaseField, BiDegree, C, R, Q
from .pages import AbelianGroup2, parse_height
from .rules import RealRewriting, render_mono

Z2 = 0  # order tag of a 2-adic integer summand


@dataclass(frozen=True)
class GroupQuery:
    field: BaseField
    n: object
    d: BiDegree
    primes: tuple = DEFAULT_PRIMES


@dataclass(frozen=True)
class Summand:
    order: int  # 0 for Z_2, else a power of two
    generator: str
    provenance: str

    def shifted(self, vname: str, provenance: str | None = None) -> "Summand":
        gen = self.generator if vname == "1" else (vname if self.generator == "1" else f"{self.generator} {vname}")
        return Summand(self.order, gen, provenance or self.provenance)


@dataclass
class GroupReport:
    bidegree: BiDegree
    summands: list = dc_field(default_factory=list)

    @property
    def group(self) -> AbelianGroup2:
        return group_of(self.summands)

    def to_json(self) -> dict:
        ordered = sorted(self.summands, key=lambda x: (x.order != Z2, x.order, x.provenance, x.generator))
        g = self.group
        return {"bidegree": {"m": self.bidegree.m, "w": self.bidegree.w},
                "z2_rank": g.z2_rank, "orders": list(g.finite_orders),
                "generators": [_order_text(x.order) + " " + x.generator for x in ordered],
                "provenance": [x.provenance for x in ordered]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def __str__(self):
        return str(self.group)


def _order_text(order: int) -> str:
    return "Z2" if order == Z2 else f"Z/{order}"


def group_of(summands) -> AbelianGroup2:
    return AbelianGroup2(tuple(x.order for x in summands if x.order != Z2),
                         sum(1 for x in summands if x.order == Z2))


def _bideg(d) -> BiDegree:
    if isinstance(d, BiDegree):
        return d
    return BiDegree(*d)


def _v_monomials(n: int, budget: int, lowest: int = 1):
    """Exponent vectors over v_lowest..v_n (as length n+1 tuples) with v-stem <= budget."""
    def rec(i, left):
        if i > n:
            yield ()
            return
        step = (1 << i) - 1
        k = 0
        while k * step <= left:
            for rest in rec(i + 1, left - k * step):
                yield (k,) + rest
            k += 1
            if step == 0:
                break
    if budget < 0:
        return
    for tail in rec(lowest, budget):
        e = (0,) * lowest + tail
        yield e, sum(x * ((1 << i) - 1) for i, x in enumerate(e))


def _vname(e) -> str:
    return render_mono(("1", 0, e))


def _tensor_v(base, n: int, m: int, w: int, provenance=None) -> list[Summand]:
    """Sum over v_1..v_n monomials of base(m - |v|, w - |v|), suffixed by the monomial."""
    out = []
    for e, vstem in _v_monomials(n, m):
        for summ in base(m - vstem, w - vstem):
            out.append(summ.shifted(_vname(e), provenance))
    return out


def _check_cap(n, m: int) -> tuple[int, bool]:
    height, capped = parse_height(n)
    if capped and m > (1 << (height + 1)) - 2:
        raise ValueError(f"stem {m} is beyond the validity stem of the cap at height {height}")
    return height, capped


# --------------------------------------------------------------------------
# local coefficient tables


def mz2_q2_summands(m: int, w: int) -> list[Summand]:
    prov = "MZ2(Q2)"
    if m == 0 and w == 0:
        return [Summand(Z2, "1", prov)]
    if m == 0 and w == -1:
        return [Summand(Z2, "x", prov), Summand(Z2, "y", prov), Summand(2, "rho", prov)]
    if m == 0 and w == -2:
        return [Summand(2, "rho^2", prov)]
    if m >= 1 and w == -(m + 1):
        tau = f"tau^{m}" if m > 1 else "tau"
        if m % 2 == 0:
            return [Summand(Z2, f"x {tau}", prov), Summand(2, f"rho {tau}", prov)]
        return [Summand(Z2, f"y {tau}", prov), Summand(1 << (2 + arith.nu2(m + 1)), f"x {tau}", prov)]
    if m >= 1 and w == -(m + 2):
        tau = f"tau^{m}" if m > 1 else "tau"
        if m % 2 == 0:
            return [Summand(2, f"rho^2 {tau}", prov)]
        return [Summand(1 << (2 + arith.nu2(m + 1)), f"rho^2 {tau}", prov)]
    return []


def mz2_q2(d) -> AbelianGroup2:
    """2-complete motivic cohomology of Q_2 in bidegree m + w alpha."""
    d = _bideg(d)
    return group_of(mz2_q2_summands(d.m, d.w))


def _tau(t: int) -> str:
    return "" if t == 0 else ("tau" if t == 1 else f"tau^{t}")


def _join(*parts) -> str:
    out = " ".join(x for x in parts if x)
    return out or "1"


def mz2_qp_summands(p: int, m: int, w: int) -> list[Summand]:
    """2-complete motivic cohomology of Q_p, p odd."""
    prov = f"MZ2(Q{p})"
    if m < 0:
        return []
    if m == 0 and w == 0:
        return [Summand(Z2, "1", prov)]
    out = []
    if p % 4 == 1:
        eps = arith.epsilon(p)
        if m == 0 and w == -1:
            out.append(Summand(Z2, "p", prov))
        if w == -1 - m:
            out.append(Summand(1 << (eps + arith.nu2(m + 1)), _join("u", _tau(m)), prov))
        if w == -2 - m:
            out.append(Summand(1 << (eps + arith.nu2(m + 1)), _join("up", _tau(m)), prov))
        return out
    lam = arith.lam(p)
    if m == 0 and w == -1:
        out.append(Summand(Z2, "p", prov))
    for sym, ww in (("rho", -1 - m), ("p^2", -2 - m)):
        if w != ww:
            continue
        if m % 2 == 0:
            out.append(Summand(2, _join(sym, _tau(m)), prov))
        else:
            out.append(Summand(1 << (lam - 1 + arith.nu2(m + 1)), _join(sym, _tau(m)), prov))
    return out


# --------------------------------------------------------------------------
# global coefficient parts over Q


def _a_p_part(p: int, m: int, w: int) -> list[Summand]:
    prov = f"A_{p}"
    gen = f"(a_{p}+rho^2)"
    if m == 0 and w == -1:
        return [Summand(Z2, f"[{p}]", prov)]
    if m >= 0 and w == -2 - m:
        if m % 2 == 0:
            return [Summand(2, _join(gen, _tau(m)), prov)]
        return [Summand(1 << (arith.lam(p) - 1 + arith.nu2(m + 1)), _join(gen, _tau(m)), prov)]
    return []


def _b_p_part(p: int, m: int, w: int) -> list[Summand]:
    prov = f"B_{p}"
    if m == 0 and w == -1:
        return [Summand(Z2, f"[{p}]", prov)]
    if m >= 0 and w == -2 - m:
        return [Summand(1 << (arith.epsilon(p) + arith.nu2(m + 1)), _join(f"(a_{p}+rho^2)", _tau(m)), prov)]
    return []


def _t_order(n: int, capped: bool, j: int, e) -> int:
    """Order of t_j v^E in C'''(n); j odd."""
    nu = arith.nu2(j + 1)
    lowest = next((i for i, x in enumerate(e) if x), None)
    if lowest is not None and 1 <= lowest <= nu - 1:
        return 1 << (2 + nu)
    if not capped and (j + 1) % (1 << (n + 1)) == 0:
        return 1 << (2 + nu)
    return 1 << (3 + nu)


def _c_triple_part(n: int, capped: bool, m: int, w: int) -> list[Summand]:
    out = []
    for e, vstem in _v_monomials(n, m):
        j = m - vstem
        if j < 0 or w - vstem != -1 - j:
            continue
        prov = "C''" if not any(e) else "C'''"
        name = _join(f"t_{j}", "" if not any(e) else _vname(e))
        order = Z2 if j % 2 == 0 else _t_order(n, capped, j, e)
        out.append(Summand(order, name, prov))
    return out


def _c_prime_part(n: int, capped: bool, m: int, w: int) -> list[Summand]:
    system = RealRewriting(n, capped)
    out = []
    for e, vstem in _v_monomials(n, m):
        T = m - vstem
        a = vstem - T - w
        if a < 0:
            continue
        if a == 0:
            if T == 0:
                out.append(Summand(Z2, _vname(e), "C'"))
            continue
        if _real_valid(n, capped, a, T, e):
            word = system.from_e1((_rho(a), T, e))
            out.append(Summand(2, system.paper_name(word), "C'"))
    return out


def _rho(a: int) -> str:
    return "1" if a == 0 else ("rho" if a == 1 else f"rho^{a}")


def _real_valid(n: int, capped: bool, a: int, T: int, e) -> bool:
    """rho^a tau^T v^E (no v_0) is a nonzero E_infinity class over R."""
    lowest = next((i for i, x in enumerate(e) if x), None)
    if lowest is None:
        return T == 0 if capped else T % (1 << (n + 1)) == 0
    return T % (1 << (lowest + 1)) == 0 and a < (1 << (lowest + 1)) - 1


def abc_groups(n, d, primes=DEFAULT_PRIMES) -> dict:
    """The A, B and C parts of pi_{m + w alpha} BP<n> over Q as summand lists."""
    d = _bideg(d)
    height, capped = _check_cap(n, d.m)
    m, w = d.m, d.w
    parts = {"A": [], "B": [], "C": []}
    if m < 0:
        return parts
    for p in sorted(primes):
        if p == 2:
            continue
        if p % 4 == 3:
            parts["A"].extend(_tensor_v(lambda a, b, p=p: _a_p_part(p, a, b), height, m, w))
        else:
            parts["B"].extend(_tensor_v(lambda a, b, p=p: _b_p_part(p, a, b), height, m, w))
    parts["C"].extend(_c_prime_part(height, capped, m, w))
    parts["C"].extend(_c_triple_part(height, capped, m, w))
    return parts


# --------------------------------------------------------------------------
# pi_* BP<n>


def _complex_summands(n: int, m: int, w: int) -> list[Summand]:
    out = []
    for e, vstem in _v_monomials(n, m):
        t = m - vstem
        if w == vstem - t:
            out.append(Summand(Z2, render_mono(("1", t, e)), "Z2[tau,v]"))
    return out


def _real_summands(n: int, capped: bool, m: int, w: int) -> list[Summand]:
    system = RealRewriting(n, capped)
    out = []
    for e, vstem in _v_monomials(n, m):
        T = m - vstem
        a = vstem - T - w
        if a < 0:
            continue
        if a == 0:
            if T % 2:
                continue
            bottom = e if _real_valid(n, capped, 0, T, e) else (1,) + e[1:]
            word = system.from_e1(("1", T, bottom))
            out.append(Summand(Z2, system.render(word), "v0-tower"))
        elif _real_valid(n, capped, a, T, e):
            word = system.from_e1((_rho(a), T, e))
            out.append(Summand(2, system.paper_name(word), "rho-multiple"))
    return out


def pi_bpn_summands(fld: BaseField, n, d, primes=DEFAULT_PRIMES) -> list[Summand]:
    d = _bideg(d)
    height, capped = _check_cap(n, d.m)
    m, w = d.m, d.w
    if m < 0:
        return []
    tag = fld.tag
    if tag == "C":
        return _complex_summands(height, m, w)
    if tag == "R":
        return _real_summands(height, capped, m, w)
    if tag == "Q2":
        return _tensor_v(mz2_q2_summands, height, m, w)
    if tag == "Qp":
        return _tensor_v(lambda a, b: mz2_qp_summands(fld.p, a, b), height, m, w)
    parts = abc_groups(n, d, primes)
    return parts["A"] + parts["B"] + parts["C"]


def pi_bpn(q: GroupQuery) -> GroupReport:
    d = _bideg(q.d)
    return GroupReport(d, pi_bpn_summands(q.field, q.n, d, q.primes))


# --------------------------------------------------------------------------
# MGL, K-theory, ko


def _is_mersenne(k: int) -> bool:
    return (k + 1) & k == 0


@lru_cache(maxsize=None)
def admissible_partitions(total: int, largest: int | None = None) -> tuple:
    """Partitions of ``total`` with no part of the form 2^j - 1."""
    if largest is None:
        largest = total
    if total == 0:
        return ((),)
    out = []
    for part in range(min(total, largest), 1, -1):
        if _is_mersenne(part):
            continue
        for rest in admissible_partitions(total - part, part):
            out.append((part,) + rest)
    return tuple(out)


def pi_mgl(fld: BaseField, d, degree_cap: int = 16, primes=DEFAULT_PRIMES) -> GroupReport:
    """MGL as a sum of shifted copies of BP indexed by admissible monomials x_I."""
    d = _bideg(d)
    if d.m > degree_cap:
        raise ValueError(f"stem {d.m} exceeds the degree cap {degree_cap}")
    report = GroupReport(d)
    if d.m < 0:
        return report
    cap = max(1, (d.m + 2).bit_length() - 1)
    while (1 << (cap + 1)) - 2 < d.m:
        cap += 1
    height = f"inf:{cap}"
    for k in range(d.m + 1):
        for part in admissible_partitions(k):
            xname = "1" if not part else " ".join(f"x{i}" for i in part)
            for summ in pi_bpn_summands(fld, height, BiDegree(d.m - k, d.w - k), primes):
                report.summands.append(summ.shifted(xname, f"BP.{xname}"))
    return report


class NotStable(RuntimeError):
    pass


def ktheory(fld: BaseField, m: int, primes=DEFAULT_PRIMES, probes: int = 4) -> GroupReport:
    """Stable value of pi_{(m+k) + k alpha} BP<1> under v_1 multiplication."""
    if m < 0:
        raise ValueError("K-theory is queried in nonnegative degrees")
    start = m + 2
    seen = []
    for k in range(start, start + probes):
        summ = pi_bpn_summands(fld, 1, BiDegree(m + k, k), primes)
        seen.append((k, group_of(summ), summ))
    groups = {str(g) for _, g, _ in seen}
    if len(groups) != 1:
        raise NotStable(f"no stable value for K_{m}: probed k={[k for k, _, _ in seen]} -> {sorted(groups)}")
    k, _, summ = seen[0]
    return GroupReport(BiDegree(m, 0), [Summand(x.order, _strip_v1(x.generator), x.provenance) for x in summ])


def _strip_v1(name: str) -> str:
    return " ".join(p for p in name.split() if not p.startswith("v1")) or "1"


def ko_groups(m: int) -> AbelianGroup2:
    """pi_m ko from its presentation Z2[eta, alpha, beta]/(2 eta, eta^3, eta alpha, alpha^2 - 4 beta)."""
    if m < 0:
        return AbelianGroup2()
    r = m % 8
    if r in (0, 4):
        return AbelianGroup2((), 1)
    if r in (1, 2):
        return AbelianGroup2((2,))
    return AbelianGroup2()


# generator images as words of the real presentation at height 1
KO_GENERATORS = {
    "eta": (1, 0, ((1, 0),)),
    "alpha": (0, 0, ((0, 1), (1, 0), (1, 0))),
    "beta": (0, 1, ((1, 0),) * 4),
}


def _ko_monomial(m: int):
    """The ko basis monomial in degree m as exponents (eta, alpha, beta), or None."""
    c, r = divmod(m, 8)
    return {0: (0, 0, c), 1: (1, 0, c), 2: (2, 0, c), 4: (0, 1, c)}.get(r)


@dataclass
class KoReport:
    rows: list
    relations: dict

    @property
    def ok(self) -> bool:
        return all(row["ok"] for row in self.rows) and all(self.relations.values())

    def to_json(self) -> dict:
        return {"ok": self.ok, "rows": self.rows, "relations": self.relations}


def ko_compare(m_max: int = 16, engine_check: bool = True) -> KoReport:
    system = RealRewriting(1)

    def power(word_exps):
        e, a, b = word_exps
        acc = (0, 0, ())
        for name, k in (("eta", e), ("alpha", a), ("beta", b)):
            for _ in range(k):
                acc = system.multiply(acc, KO_GENERATORS[name]) if acc is not None else None
        return acc

    v0 = (0, 0, ((0, 0),))
    two_eta = system.multiply(v0, KO_GENERATORS["eta"])
    eta_cubed = power((3, 0, 0))
    eta_alpha = power((1, 1, 0))
    alpha_sq = power((0, 2, 0))
    four_beta = system.multiply((0, 0, ((0, 0), (0, 0))), KO_GENERATORS["beta"])
    relations = {"2 eta = 0": two_eta is None, "eta^3 = 0": eta_cubed is None,
                 "eta alpha = 0": eta_alpha is None, "alpha^2 = 4 beta": alpha_sq == four_beta}
    engine = None
    if engine_check:
        from .pages import Engine, towers_group
        engine = Engine(R, 1)
    rows = []
    for m in range(m_max + 1):
        closed = pi_bpn_summands(R, 1, BiDegree(m, 0))
        expected = ko_groups(m)
        mono = _ko_monomial(m)
        image = power(mono) if mono else None
        gens = [x.generator for x in closed]
        image_name = system.paper_name(image) if image is not None else None
        ok = group_of(closed) == expected and (image_name in gens if image_name else not gens)
        row = {"m": m, "ko": str(expected), "bp1": str(group_of(closed)), "image": image_name, "ok": ok}
        if engine is not None:
            eng_group = towers_group(engine, m, 0)
            row["engine"] = str(eng_group)
            row["ok"] = ok and eng_group == expected
        rows.append(row)
    return KoReport(rows, relations)
