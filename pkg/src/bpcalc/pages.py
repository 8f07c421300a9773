"""Tri-graded spectral-sequence machinery over F_2.

Slices are indexed by (s, stem, w).  A slice of the E1 page has a basis of
monomials sym * tau^t * v^E; vectors are Python ints used as bitsets over that
basis.  Later pages are subquotients Z/B stored in reduced echelon form, so
every class has a canonical label: the leading monomial of its reduced
representative (lowest rho-filtration first).

The engine is lazy: a slice at a given stage is computed on demand from the
previous stage at that slice and at its two differential partners.  Because
every query is resolved through its full dependency cone, no window edge ever
truncates a differential.  Above the v0-periodic height of a column, slices
are transported along multiplication by v0 instead of recomputed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Iterable

from . import arith
from .milnor import DEFAULT_PRIMES, BaseField, KTheory, ktheory
from .rules import DifferentialRule, bss_rules, mass_families, render_mono

Key = tuple  # (s, stem, w)


class RuleMismatchError(RuntimeError):
    """A rule produced a target that is not a cycle on its page."""


class SquareNonzeroError(RuntimeError):
    """d o d did not vanish."""


# --------------------------------------------------------------------------
# GF(2) helpers


def reduce_vec(v: int, piv: dict) -> int:
    for p, w in piv.items():
        if v >> p & 1:
            v ^= w
    return v


def rref(vectors: Iterable[int], piv: dict | None = None) -> dict:
    """Reduced echelon form keyed by leading bit; every stored vector is free
    of the other pivots."""
    piv = dict(piv or {})
    for v in vectors:
        v = reduce_vec(v, piv)
        if not v:
            continue
        p = v.bit_length() - 1
        for q, w in list(piv.items()):
            if w >> p & 1:
                piv[q] = w ^ v
        piv[p] = v
    return piv


def kernel_combos(images: list[int]) -> list[int]:
    """Bitmasks of index combinations whose images XOR to zero."""
    piv: dict[int, tuple[int, int]] = {}
    out = []
    for j, img in enumerate(images):
        comb = 1 << j
        while img:
            p = img.bit_length() - 1
            hit = piv.get(p)
            if hit is None:
                piv[p] = (img, comb)
                break
            img ^= hit[0]
            comb ^= hit[1]
        if not img:
            out.append(comb)
    return out


def rank_of(rows: Iterable[int]) -> int:
    return len(rref(rows))


def bits(v: int):
    while v:
        low = v & -v
        yield low.bit_length() - 1
        v ^= low


# --------------------------------------------------------------------------
# slices and states


class Slice:
    """E1 basis of one tridegree.  Index 0 is the least leading monomial."""

    __slots__ = ("key", "monos", "index")

    def __init__(self, key: Key, monos: list):
        self.key = key
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}

    def __len__(self):
        return len(self.monos)

    def vector(self, monos: Iterable) -> int:
        v = 0
        for m in monos:
            v ^= 1 << self.index[m]
        return v

    def support(self, v: int) -> list:
        return [self.monos[i] for i in bits(v)]


class State:
    """Subquotient Z/B of an E1 slice."""

    __slots__ = ("key", "bpiv", "cpiv", "labels", "vecs")

    def __init__(self, key: Key, bpiv: dict, cpiv: dict):
        self.key = key
        self.bpiv = bpiv
        self.cpiv = cpiv
        self.labels = sorted(cpiv, reverse=True)
        self.vecs = [cpiv[p] for p in self.labels]

    @classmethod
    def full(cls, key: Key, size: int) -> "State":
        return cls(key, {}, {i: 1 << i for i in range(size)})

    @classmethod
    def build(cls, key: Key, cycles: Iterable[int], boundaries: Iterable[int]) -> "State":
        bpiv = rref(boundaries)
        rest = [reduce_vec(v, bpiv) for v in cycles]
        return cls(key, bpiv, rref(rest))

    @property
    def dim(self) -> int:
        return len(self.labels)

    def coords(self, v: int) -> int:
        """Coordinates (bitmask over basis positions) of a cycle; raises if v is no cycle."""
        v = reduce_vec(v, self.bpiv)
        c = 0
        rem = v
        for j, p in enumerate(self.labels):
            if v >> p & 1:
                c |= 1 << j
                rem ^= self.vecs[j]
        if rem:
            raise RuleMismatchError(f"vector is not a cycle at {self.key}")
        return c

    def is_cycle(self, v: int) -> bool:
        return not reduce_vec(reduce_vec(v, self.bpiv), self.cpiv)

    def is_boundary(self, v: int) -> bool:
        return not reduce_vec(v, self.bpiv)

    def from_coords(self, c: int) -> int:
        v = 0
        for j in bits(c):
            v ^= self.vecs[j]
        return v

    def moved(self, key: Key) -> "State":
        st = object.__new__(State)
        st.key, st.bpiv, st.cpiv, st.labels, st.vecs = key, self.bpiv, self.cpiv, self.labels, self.vecs
        return st


@dataclass
class Stage:
    kind: str  # "bss" or "mass"
    r: int
    rules: list = dc_field(default_factory=list)

    def ds(self) -> int:
        return 1 if self.kind == "bss" else self.r


# --------------------------------------------------------------------------
# the engine


def _v_exponents(s: int, nv: int, budget: int):
    """Exponent vectors (e_0..e_{nv-1}) with sum s and sum e_i (2^i - 1) <= budget."""
    def rec(i, left, budget):
        if i == 0:
            yield (left,)
            return
        weight = (1 << i) - 1
        top = min(left, budget // weight)
        for ei in range(top, -1, -1):
            for rest in rec(i - 1, left - ei, budget - ei * weight):
                yield rest + (ei,)
    if s < 0 or budget < 0:
        return
    yield from rec(nv - 1, s, budget)


def parse_height(n) -> tuple[int, bool]:
    """Height as (N, capped).  'inf:N' drops the tau_N^2 = 0 relation."""
    if isinstance(n, str):
        if n.startswith("inf:"):
            return int(n[4:]), True
        return int(n), False
    return int(n), False


class Engine:
    """Lazy rho-BSS followed by the MASS for one field and height."""

    def __init__(self, fld: BaseField, n, primes=DEFAULT_PRIMES, mass: bool = True,
                 z: str = "x", stages: list | None = None, i_max: int = 7,
                 check_square: bool = False):
        self.field = fld
        self.n, self.capped = parse_height(n)
        self.height = n
        self.primes = tuple(sorted(primes)) if fld.tag == "Q" else ()
        self.kt: KTheory = ktheory(fld, self.primes)
        self.nv = self.n + 1
        self.z = z
        self.i_max = i_max
        self.check_square = check_square
        if stages is None:
            stages = self.default_stages(mass)
        self.stages: list[Stage] = stages
        self.n_bss = sum(1 for st in stages if st.kind == "bss")
        self._slices: dict = {}
        self._states: dict = {}
        self._fires: dict = {}
        self._theta: dict = {}
        self._pcol: dict = {}
        self._diff_cache: dict = {}
        self.differential_hook: Callable | None = None

    # -- configuration -----------------------------------------------
    def default_stages(self, mass: bool) -> list[Stage]:
        stages = []
        for rule in bss_rules(self.field, self.n) if not self.capped else self._capped_bss():
            stages.append(Stage("bss", rule.r, [rule]))
        if mass:
            pages: dict[int, list] = {}
            for fam in mass_families(self.field, self.primes, self.z):
                for i in range(fam.i_min, self.i_max + 1):
                    rule = fam.rule(self.n, i)
                    pages.setdefault(rule.r, []).append(rule)
            for r in sorted(pages):
                stages.append(Stage("mass", r, pages[r]))
        return stages

    def _capped_bss(self):
        # under the cap every tau_i, i <= N, has its Bockstein; there is no top relation
        return bss_rules(self.field, self.n)

    def validity_stem(self) -> int | None:
        """Largest stem computed faithfully under an infinite-height cap."""
        return (1 << (self.n + 1)) - 2 if self.capped else None

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def stage_index(self, kind: str, r=None) -> int:
        """Index of the state just before page r of the given kind (E_r)."""
        if kind == "bss":
            if r is None or r == "inf":
                return self.n_bss
            for k, st in enumerate(self.stages[: self.n_bss]):
                if st.r >= r:
                    return k
            return self.n_bss
        if r is None or r == "inf":
            return self.n_stages
        for k in range(self.n_bss, self.n_stages):
            if self.stages[k].r >= r:
                return k
        return self.n_stages

    # -- E1 ----------------------------------------------------------
    def mono_key(self, mono) -> tuple:
        sym, t, e = mono
        return (self.kt.order_key(sym), t, tuple(-x for x in e))

    def slice(self, key: Key) -> Slice:
        sl = self._slices.get(key)
        if sl is None:
            sl = Slice(key, self._enumerate(key))
            self._slices[key] = sl
        return sl

    def _enumerate(self, key: Key) -> list:
        s, m, w = key
        out = []
        if s < 0 or m < 0:
            return out
        for e in _v_exponents(s, self.nv, m):
            vstem = sum(ei * ((1 << i) - 1) for i, ei in enumerate(e))
            t = m - vstem
            k = vstem - t - w
            for sym in self.kt.basis(k):
                out.append((sym, t, e))
        out.sort(key=self.mono_key, reverse=True)
        return out

    def mono_tridegree(self, mono) -> Key:
        sym, t, e = mono
        vstem = sum(ei * ((1 << i) - 1) for i, ei in enumerate(e))
        return (sum(e), t + vstem, vstem - t - self.kt.degree(sym))

    # -- firing predicates ---------------------------------------------
    def mono_fires(self, sym: str, t: int, k: int) -> bool:
        hit = self._fires.get((sym, t, k))
        if hit is None:
            hit = self._mono_fires(sym, t, k)
            self._fires[(sym, t, k)] = hit
        return hit

    def _mono_fires(self, sym: str, t: int, k: int) -> bool:
        if self.differential_hook is not None and self.stages[k].kind == "mass":
            return self.differential_hook.fires(sym, t, self.stages[k].r)
        probe = (sym, t, (0,) * self.nv)
        for rule in self.stages[k].rules:
            if rule.applies(probe) and rule.image(probe, self.kt):
                return True
        return False

    def slice_fires(self, key: Key, k: int) -> bool:
        return any(self.mono_fires(sym, t, k) for sym, t, _ in self.slice(key).monos)

    def column_fires(self, col: tuple, k: int) -> bool:
        """Whether stage k can act on any slice of column (stem, w)."""
        m, w = col
        return any(self.mono_fires(sym, t, k) for sym, t, _ in self._column_free(col))

    def _column_free(self, col) -> list:
        hit = self._pcol.get(col)
        if hit is None:
            m, w = col
            hit = []
            if m >= 0:
                top = m  # sum e_i (2^i - 1) <= m bounds the v0-free exponents
                for s in range(0, m + 1):
                    found = False
                    for e in _v_exponents(s, self.nv, m):
                        if e[0]:
                            continue
                        found = True
                        vstem = sum(ei * ((1 << i) - 1) for i, ei in enumerate(e))
                        t = m - vstem
                        kdeg = vstem - t - w
                        for sym in self.kt.basis(kdeg):
                            hit.append((sym, t, e))
                    if not found and s > 0:
                        break
            self._pcol[col] = hit
        return hit

    def periodic_height(self, col: tuple, k: int) -> int:
        """theta_k(col): for s - 1 >= theta, stage-k slices at s are v0 times those at s - 1."""
        key = (col, k)
        hit = self._theta.get(key)
        if hit is not None:
            return hit
        if k == 0:
            free = self._column_free(col)
            hit = max((sum(e) for _, _, e in free), default=-1)
        else:
            st = self.stages[k - 1]
            hit = self.periodic_height(col, k - 1)
            m, w = col
            ds = st.ds()
            if self.column_fires(col, k - 1):
                hit = max(hit, self.periodic_height((m - 1, w), k - 1) - ds)
            if m + 1 >= 0 and self.column_fires((m + 1, w), k - 1):
                hit = max(hit, self.periodic_height((m + 1, w), k - 1) + ds)
        self._theta[key] = hit
        return hit

    # -- states --------------------------------------------------------
    def target_key(self, key: Key, k: int) -> Key:
        s, m, w = key
        return (s + self.stages[k].ds(), m - 1, w)

    def source_key(self, key: Key, k: int) -> Key:
        s, m, w = key
        return (s - self.stages[k].ds(), m + 1, w)

    def state(self, key: Key, k: int | None = None) -> State:
        if k is None:
            k = self.n_stages
        hit = self._states.get((key, k))
        if hit is not None:
            return hit
        st = self._compute_state(key, k)
        self._states[(key, k)] = st
        return st

    def _compute_state(self, key: Key, k: int) -> State:
        s, m, w = key
        sl = self.slice(key)
        if not len(sl):
            return State.full(key, 0)
        if s >= 1 and s - 1 >= self.periodic_height((m, w), k):
            assert len(self.slice((s - 1, m, w))) == len(sl)
            return self.state((s - 1, m, w), k).moved(key)
        if k == 0:
            return State.full(key, len(sl))
        prev = self.state(key, k - 1)
        src = self.source_key(key, k - 1)
        out_fires = self.slice_fires(key, k - 1)
        in_fires = src[0] >= 0 and self.slice_fires(src, k - 1)
        if not out_fires and not in_fires:
            return prev
        cycles = list(prev.bpiv.values())
        if out_fires and prev.dim:
            tgt = self.state(self.target_key(key, k - 1), k - 1)
            images = [tgt.coords(v) for v in self.differential(key, k - 1)]
            for comb in kernel_combos(images):
                cycles.append(prev.from_coords(comb))
        else:
            cycles.extend(prev.vecs)
        boundaries = list(prev.bpiv.values())
        if in_fires:
            boundaries.extend(t for t in self.differential(src, k - 1) if t)
        return State.build(key, cycles, boundaries)

    def differential(self, key: Key, k: int) -> list[int]:
        """E1 vectors at the target slice: images of the basis of state (key, k)."""
        hit = self._diff_cache.get((key, k))
        if hit is not None:
            return hit
        st = self.state(key, k)
        tkey = self.target_key(key, k)
        if self.differential_hook is not None and self.stages[k].kind == "mass":
            out = self.differential_hook.differential(self, key, k, st)
        else:
            sl = self.slice(key)
            tsl = self.slice(tkey)
            rules = self.stages[k].rules
            per_mono: dict[int, int] = {}
            out = []
            for v in st.vecs:
                img = 0
                for b in bits(v):
                    if b not in per_mono:
                        mono = sl.monos[b]
                        acc = 0
                        for rule in rules:
                            if rule.applies(mono):
                                for tm in rule.image(mono, self.kt):
                                    acc ^= 1 << tsl.index[tm]
                        per_mono[b] = acc
                    img ^= per_mono[b]
                out.append(img)
        tstate = self.state(tkey, k)
        for img in out:
            if not tstate.is_cycle(img):
                raise RuleMismatchError(
                    f"stage {self.stages[k].kind} d_{self.stages[k].r}: target at {tkey} is not a cycle")
        if self.check_square:
            self._check_square(key, k, out)
        self._diff_cache[(key, k)] = out
        return out

    def _check_square(self, key, k, images):
        tkey = self.target_key(key, k)
        tstate = self.state(tkey, k)
        if not tstate.dim:
            return
        ttkey = self.target_key(tkey, k)
        dd = self.differential(tkey, k)
        ttstate = self.state(ttkey, k)
        for img in images:
            c = tstate.coords(img)
            acc = 0
            for j in bits(c):
                acc ^= dd[j]
            if acc and not ttstate.is_boundary(acc) and ttstate.coords(acc):
                raise SquareNonzeroError(f"d^2 != 0 from {key} at stage {k}")

    # -- queries -------------------------------------------------------
    def dim(self, key: Key, k: int | None = None) -> int:
        return self.state(key, k).dim

    def bss_einf(self, key: Key) -> State:
        return self.state(key, self.n_bss)

    def image_coords(self, key: Key, k: int) -> list[int]:
        """Differential of stage k as coordinate masks in the target state."""
        st = self.state(key, k)
        if not st.dim or not self.slice_fires(key, k):
            return [0] * st.dim
        tgt = self.state(self.target_key(key, k), k)
        return [tgt.coords(v) for v in self.differential(key, k)]

    def label(self, key: Key, k: int, j: int):
        st = self.state(key, k)
        return self.slice(key).monos[st.labels[j]]

    def v_multiply(self, key: Key, i: int, vec: int) -> tuple[Key, int]:
        """Multiply an E1 vector by v_i."""
        s, m, w = key
        step = (1 << i) - 1
        tkey = (s + 1, m + step, w + step)
        sl, tsl = self.slice(key), self.slice(tkey)
        out = 0
        for b in bits(vec):
            sym, t, e = sl.monos[b]
            e2 = tuple(x + (1 if j == i else 0) for j, x in enumerate(e))
            out ^= 1 << tsl.index[(sym, t, e2)]
        return tkey, out

    def sym_multiply(self, key: Key, coeff: frozenset, tau: int, vec: int) -> tuple[Key, int]:
        """Multiply an E1 vector by coeff * tau^tau."""
        sl = self.slice(key)
        if not coeff:
            raise ValueError("zero multiplier")
        d = self.kt.degree(next(iter(coeff)))
        s, m, w = key
        tkey = (s, m + tau, w - tau - d)
        tsl = self.slice(tkey)
        out = 0
        for b in bits(vec):
            sym, t, e = sl.monos[b]
            for c in self.kt.mul(frozenset({sym}), coeff):
                out ^= 1 << tsl.index[(c, t + tau, e)]
        return tkey, out


# --------------------------------------------------------------------------
# v0 towers to abelian groups


@dataclass(frozen=True)
class AbelianGroup2:
    finite_orders: tuple = ()
    z2_rank: int = 0

    def __post_init__(self):
        object.__setattr__(self, "finite_orders", tuple(sorted(self.finite_orders)))
        for o in self.finite_orders:
            if o < 2 or o & (o - 1):
                raise ValueError(f"bad cyclic order {o}")

    def __add__(self, other: "AbelianGroup2") -> "AbelianGroup2":
        return AbelianGroup2(self.finite_orders + other.finite_orders, self.z2_rank + other.z2_rank)

    @property
    def is_zero(self) -> bool:
        return not self.finite_orders and not self.z2_rank

    def __str__(self):
        parts = []
        if self.z2_rank:
            parts.append("Z2" if self.z2_rank == 1 else f"Z2^{self.z2_rank}")
        for o in self.finite_orders:
            parts.append(f"Z/{o}")
        return " + ".join(parts) if parts else "0"

    def to_json(self) -> dict:
        return {"z2_rank": self.z2_rank, "orders": list(self.finite_orders)}


ZERO = AbelianGroup2()


def column_towers(engine: Engine, m: int, w: int, k: int | None = None) -> tuple[list, int]:
    """Bars (start, end) of the v0-persistence module of column (m, w) at state k.
    ``end`` is None for infinite towers.  Returns (bars, top filtration)."""
    if k is None:
        k = engine.n_stages
    top = max(engine.periodic_height((m, w), k) + 1, 0)
    dims = [engine.state((s, m, w), k).dim for s in range(top + 1)]
    maps = []
    for s in range(top):
        src = engine.state((s, m, w), k)
        tgt = engine.state((s + 1, m, w), k)
        rows = []
        for v in src.vecs:
            _, img = engine.v_multiply((s, m, w), 0, v)
            rows.append(tgt.coords(img))
        maps.append(rows)

    @lru_cache(maxsize=None)
    def rank(a: int, b: int) -> int:
        if a < 0 or b > top:
            return 0
        if a == b:
            return dims[a]
        return rank_of(_compose(maps, a, b, dims))

    bars = []
    for a in range(top + 1):
        for b in range(a, top + 1):
            cnt = rank(a, b) - rank(a - 1, b) - rank(a, b + 1) + rank(a - 1, b + 1)
            for _ in range(cnt):
                bars.append((a, None if b == top else b))
    return bars, top


def _compose(maps, a, b, dims) -> list[int]:
    """Rows of the composite v0^{b-a}: V_a -> V_b (as masks over V_b)."""
    rows = [1 << j for j in range(dims[a])]
    for s in range(a, b):
        nxt = []
        for r in rows:
            acc = 0
            for j in bits(r):
                acc ^= maps[s][j]
            nxt.append(acc)
        rows = nxt
    return rows


def towers_group(engine: Engine, m: int, w: int, k: int | None = None) -> AbelianGroup2:
    bars, _ = column_towers(engine, m, w, k)
    orders, rank = [], 0
    for a, b in bars:
        if b is None:
            rank += 1
        else:
            orders.append(1 << (b - a + 1))
    return AbelianGroup2(tuple(orders), rank)


# --------------------------------------------------------------------------
# page snapshots (public API)


@dataclass(frozen=True)
class Window:
    m_min: int = 0
    m_max: int = 12
    w_min: int = -13
    w_max: int = 4
    s_max: int = 14
    primes: tuple = DEFAULT_PRIMES
    tau_cap: int | None = None
    n: object = 1

    def __post_init__(self):
        if self.m_min > self.m_max or self.w_min > self.w_max or self.s_max < 0:
            raise ValueError("empty or inverted window")
        if self.tau_cap is not None and self.tau_cap < self.m_max:
            raise ValueError("tau_cap must cover m_max")

    def keys(self):
        for s in range(self.s_max + 1):
            for m in range(self.m_min, self.m_max + 1):
                for w in range(self.w_min, self.w_max + 1):
                    yield (s, m, w)


@dataclass
class Page:
    engine: Engine
    stage: int
    kind: str
    window: Window
    boundary_flags: frozenset = frozenset()

    @property
    def field(self) -> BaseField:
        return self.engine.field

    @property
    def r(self):
        last = self.last_stage()
        return self.engine.stages[self.stage].r if self.stage < last else "inf"

    def last_stage(self) -> int:
        return self.engine.n_bss if self.kind == "rhoBSS" else self.engine.n_stages

    def slices(self) -> dict:
        out = {}
        for key in self.window.keys():
            st = self.engine.state(key, self.stage)
            if st.dim:
                out[key] = st
        return out

    def basis_labels(self, key: Key) -> list:
        st = self.engine.state(key, self.stage)
        sl = self.engine.slice(key)
        return [sl.monos[p] for p in st.labels]

    def dim(self, key: Key) -> int:
        return self.engine.state(key, self.stage).dim

    def render_label(self, mono) -> str:
        return label_name(self.engine, mono, collapsed=self.stage >= self.engine.n_bss)

    def to_json(self) -> dict:
        slices = []
        eng = self.engine
        has_d = self.stage < self.last_stage()
        for key, st in sorted(self.slices().items()):
            entry = {"s": key[0], "m": key[1], "w": key[2],
                     "basis": [self.render_label(mono) for mono in self.basis_labels(key)], "d": []}
            if has_d:
                tkey = eng.target_key(key, self.stage)
                tgt = eng.state(tkey, self.stage)
                tsl = eng.slice(tkey)
                for j, c in enumerate(eng.image_coords(key, self.stage)):
                    if c:
                        entry["d"].append({
                            "from": entry["basis"][j],
                            "to": [self.render_label(tsl.monos[tgt.labels[q]]) for q in bits(c)]})
            slices.append(entry)
        return {"r": self.r, "kind": self.kind, "field": str(self.field), "slices": slices}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def label_name(engine: Engine, mono, collapsed: bool = True) -> str:
    """Render a basis label, renaming tau^{2^{i+1} j} v_i as v_i(j) (and rho tau^{..} v_i
    as w_i(j)) on pages past the rho-BSS over R and Q."""
    sym, t, e = mono
    if not collapsed or engine.field.tag not in ("R", "Q") or not any(e) or t == 0:
        return render_mono(mono)
    i0 = next(i for i, x in enumerate(e) if x)
    step = 1 << (i0 + 1)
    if t % step:
        return render_mono(mono)
    j = t // step
    rest = tuple(x - (1 if i == i0 else 0) for i, x in enumerate(e))
    tail = render_mono(("1", 0, rest))
    head = f"v{i0}({j})"
    prefix = "" if sym == "1" else sym
    if sym == "rho":
        head, prefix = f"w{i0}({j})", ""
    elif sym.startswith("rho^"):
        a = int(sym[4:])
        head, prefix = f"w{i0}({j})", ("rho" if a == 2 else f"rho^{a - 1}")
    parts = [x for x in (prefix, head, "" if tail == "1" else tail) if x]
    return " ".join(parts)


def initialize_e1(fld: BaseField, n, window: Window, kind: str = "rhoBSS", **engine_args) -> Page:
    eng = Engine(fld, n, window.primes, **engine_args)
    vs = eng.validity_stem()
    if vs is not None and window.m_max > vs:
        raise ValueError(f"window m_max={window.m_max} exceeds the cap validity stem {vs}")
    if kind == "rhoBSS":
        return Page(eng, 0, kind, window)
    if kind == "MASS":
        return Page(eng, eng.n_bss, kind, window)
    raise ValueError(f"unknown kind {kind!r}")


@dataclass
class Differential:
    page: Page
    rules: list
    matrices: dict  # key -> list of target coordinate masks


def leibniz_extend(page: Page, rules: list[DifferentialRule]) -> Differential:
    eng = page.engine
    if page.stage >= page.last_stage():
        raise ValueError("no further differentials on this page")
    stage = eng.stages[page.stage]
    for rule in rules:
        if rule.r != stage.r:
            raise ValueError(f"rule on page {rule.r} applied to page {stage.r}")
    if list(rules) != list(stage.rules):
        eng = _with_stage_rules(eng, page.stage, rules)
        page = Page(eng, page.stage, page.kind, page.window, page.boundary_flags)
    mats = {}
    for key in page.window.keys():
        if eng.state(key, page.stage).dim:
            mats[key] = eng.image_coords(key, page.stage)
    return Differential(page, list(rules), mats)


def _with_stage_rules(eng: Engine, k: int, rules) -> Engine:
    stages = [Stage(st.kind, st.r, list(rules) if j == k else st.rules) for j, st in enumerate(eng.stages)]
    return Engine(eng.field, eng.height, eng.primes or DEFAULT_PRIMES, stages=stages, z=eng.z,
                  i_max=eng.i_max)


def turn_page(page: Page, differential: Differential) -> Page:
    eng = differential.page.engine
    if differential.page.stage != page.stage:
        raise ValueError("differential belongs to another page")
    old = eng.check_square
    eng.check_square = True
    try:
        for key in differential.matrices:
            eng.differential(key, page.stage)
    finally:
        eng.check_square = old
    return Page(eng, page.stage + 1, page.kind, page.window, page.boundary_flags)


def run_to_infinity(page: Page) -> Page:
    return Page(page.engine, page.last_stage(), page.kind, page.window, page.boundary_flags)


def towers_to_groups(einfty: Page, d) -> AbelianGroup2:
    m, w = (d.m, d.w) if hasattr(d, "m") else d
    if (m, w) in einfty.boundary_flags:
        raise ValueError("indeterminate: bidegree is boundary-flagged")
    vs = einfty.engine.validity_stem()
    if vs is not None and m > vs:
        raise ValueError("indeterminate: beyond the cap validity stem")
    return towers_group(einfty.engine, m, w, einfty.stage)
