"""The Hasse map from spectral-sequence pages over Q to pages over its
completions: injectivity checks, naturality checks, the least-energy
predictor, and a discovery mode that derives the global MASS differentials
from the local ones."""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

from .milnor import DEFAULT_PRIMES, Place, Q, default_places, localize_name
from .pages import Engine, RuleMismatchError, Stage, Window, bits, kernel_combos, label_name, rank_of
from .rules import mass_families, mass_rules

Key = tuple


class NoGlobalLift(RuntimeError):
    """A local differential tuple has no preimage under the Hasse map."""


class AmbiguousLift(RuntimeError):
    """The Hasse map is not injective on a target slice, so a lift is not unique."""


@dataclass
class PageElement:
    """An element of an E_r page, held as an E1 representative."""

    engine: Engine
    key: Key
    stage: int
    vector: int

    def coords(self) -> int:
        return self.engine.state(self.key, self.stage).coords(self.vector)

    def is_zero(self) -> bool:
        return self.coords() == 0

    def labels(self) -> list[str]:
        st = self.engine.state(self.key, self.stage)
        sl = self.engine.slice(self.key)
        collapsed = self.stage >= self.engine.n_bss
        return [label_name(self.engine, sl.monos[st.labels[j]], collapsed) for j in bits(self.coords())]

    def __str__(self):
        names = self.labels()
        return " + ".join(names) if names else "0"


def element(engine: Engine, mono, stage: int | None = None) -> PageElement:
    """The page element represented by one E1 monomial."""
    key = engine.mono_tridegree(mono)
    if stage is None:
        stage = engine.n_bss
    return PageElement(engine, key, stage, engine.slice(key).vector([mono]))


def _mass_page(engine: Engine, k: int):
    return engine.stages[k].r if k < engine.n_stages else "inf"


class HasseMap:
    """Localization from one global engine to engines over the completions."""

    def __init__(self, global_engine: Engine, places=None, z: str | None = None):
        if global_engine.field != Q:
            raise ValueError("the Hasse map starts over Q")
        self.glob = global_engine
        if places is None:
            places = default_places(global_engine.primes)
        self.places = sorted((Place.of(v) for v in places), key=lambda p: p.sort_key)
        zz = z or global_engine.z
        self.local: dict = {}
        for place in self.places:
            fld = place.completion()
            self.local[place] = Engine(fld, global_engine.height, mass=True,
                                       z=zz if fld.tag == "Q2" else "x", i_max=global_engine.i_max)
        self._pages: dict = {}
        self._matrix: dict = {}

    # -- page bookkeeping ------------------------------------------------
    def local_stage(self, place: Place, k: int) -> int:
        """Local state index showing the same page as global state k."""
        hit = self._pages.get((place, k))
        if hit is None:
            eng, loc = self.glob, self.local[place]
            if k < eng.n_bss:
                hit = loc.stage_index("bss", eng.stages[k].r)
            else:
                hit = loc.stage_index("mass", _mass_page(eng, k))
            self._pages[(place, k)] = hit
        return hit

    def local_differential_stage(self, place: Place, r) -> int | None:
        """Local stage index whose differential is d_r, if the local run has one."""
        loc = self.local[place]
        for k in range(loc.n_bss, loc.n_stages):
            if loc.stages[k].r == r:
                return k
        return None

    # -- maps ------------------------------------------------------------
    def localize_vector(self, key: Key, vec: int, place: Place) -> int:
        sl = self.glob.slice(key)
        loc = self.local[place]
        lsl = loc.slice(key)
        out = 0
        for b in bits(vec):
            sym, t, e = sl.monos[b]
            for c in localize_name(sym, place):
                out ^= 1 << lsl.index[(c, t, e)]
        return out

    def component(self, x: PageElement, place) -> PageElement:
        place = Place.of(place)
        if place not in self.local:
            raise ValueError(f"place {place} is not in this Hasse map")
        return PageElement(self.local[place], x.key, self.local_stage(place, x.stage),
                           self.localize_vector(x.key, x.vector, place))

    def offsets(self, key: Key, k: int) -> list[int]:
        out, acc = [], 0
        for place in self.places:
            out.append(acc)
            acc += self.local[place].state(key, self.local_stage(place, k)).dim
        return out

    def local_coords(self, key: Key, k: int, vec: int) -> int:
        """Concatenated local coordinates of a global E1 cycle."""
        total = 0
        for place, off in zip(self.places, self.offsets(key, k)):
            loc_state = self.local[place].state(key, self.local_stage(place, k))
            total |= loc_state.coords(self.localize_vector(key, vec, place)) << off
        return total

    def matrix(self, key: Key, k: int) -> list[int]:
        """Columns: images of the global basis of state (key, k)."""
        hit = self._matrix.get((key, k))
        if hit is None:
            st = self.glob.state(key, k)
            hit = [self.local_coords(key, k, v) for v in st.vecs]
            self._matrix[(key, k)] = hit
        return hit

    def lift(self, key: Key, k: int, target: int) -> int:
        """Global E1 vector whose Hasse image has concatenated coordinates ``target``."""
        cols = self.matrix(key, k)
        if rank_of(cols) != len(cols):
            raise AmbiguousLift(f"Hasse map not injective at {key}, page {_mass_page(self.glob, k)}")
        combo = _solve(cols, target)
        if combo is None:
            raise NoGlobalLift(f"local differential tuple at {key} has no global lift")
        return self.glob.state(key, k).from_coords(combo)

    def local_d(self, key: Key, k: int, vec: int) -> tuple[Key, int]:
        """Concatenated local coordinates of the d_r images of a global cycle's localizations."""
        r = _mass_page(self.glob, k)
        tkey = self.glob.target_key(key, k)
        total = 0
        for place, off in zip(self.places, self.offsets(tkey, k)):
            kl = self.local_differential_stage(place, r)
            if kl is None or kl != self.local_stage(place, k):
                continue
            loc = self.local[place]
            st = loc.state(key, kl)
            c = st.coords(self.localize_vector(key, vec, place))
            if not c:
                continue
            images = loc.differential(key, kl)
            img = 0
            for j in bits(c):
                img ^= images[j]
            total |= loc.state(tkey, kl).coords(img) << off
        return tkey, total


def _solve(columns: list[int], target: int) -> int | None:
    """A set of columns (as a bitmask) summing to target, or None."""
    piv: dict = {}
    for j, col in enumerate(columns):
        v, combo = col, 1 << j
        while v:
            top = v.bit_length() - 1
            if top not in piv:
                piv[top] = (v, combo)
                break
            pv, pc = piv[top]
            v ^= pv
            combo ^= pc
    v, combo = target, 0
    while v:
        top = v.bit_length() - 1
        if top not in piv:
            return None
        pv, pc = piv[top]
        v ^= pv
        combo ^= pc
    return combo


_MAPS: dict = {}


def hasse_map(global_engine: Engine, places=None) -> HasseMap:
    key = (id(global_engine), None if places is None else tuple(sorted(str(Place.of(p)) for p in places)))
    hit = _MAPS.get(key)
    if hit is None or hit.glob is not global_engine:
        hit = HasseMap(global_engine, places)
        _MAPS[key] = hit
    return hit


def hasse_component(x: PageElement, place, hmap: HasseMap | None = None) -> PageElement:
    """Image of a global page element in the page of the completion at ``place``."""
    hmap = hmap or hasse_map(x.engine)
    return hmap.component(x, place)


# --------------------------------------------------------------------------
# injectivity and naturality


@dataclass
class HasseReport:
    r: object
    window: Window
    places: list
    kernel_witnesses: list = dc_field(default_factory=list)
    checked_slices: int = 0

    @property
    def passed(self) -> bool:
        return not self.kernel_witnesses

    def to_json(self) -> dict:
        return {"r": self.r, "status": "PASS" if self.passed else "FAILED",
                "places": [str(p) for p in self.places], "checked_slices": self.checked_slices,
                "kernel_witnesses": self.kernel_witnesses}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def global_stage(engine: Engine, r) -> int:
    """State index of the MASS page E_r (r = 'inf' for E_infinity)."""
    if r in (None, "inf", float("inf")):
        return engine.n_stages
    if r < 2:
        raise ValueError("MASS pages start at E_2")
    return engine.stage_index("mass", r)


def check_injectivity(r, window: Window | None = None, places=None, n=1,
                      engine: Engine | None = None) -> HasseReport:
    window = window or Window()
    if engine is None:
        engine = Engine(Q, n, window.primes)
    hmap = hasse_map(engine, places)
    k = global_stage(engine, r)
    report = HasseReport(r, window, list(hmap.places))
    for key in window.keys():
        st = engine.state(key, k)
        if not st.dim:
            continue
        report.checked_slices += 1
        cols = hmap.matrix(key, k)
        if rank_of(cols) == len(cols):
            continue
        sl = engine.slice(key)
        for combo in kernel_combos(cols):
            names = [label_name(engine, sl.monos[st.labels[j]]) for j in bits(combo)]
            report.kernel_witnesses.append({"s": key[0], "m": key[1], "w": key[2],
                                            "class": " + ".join(names)})
    return report


def check_naturality(engine: Engine, window: Window, places=None, stages=None) -> list[dict]:
    """Slices where localizing a global differential disagrees with the local one."""
    hmap = hasse_map(engine, places)
    if stages is None:
        stages = range(engine.n_bss, engine.n_stages)
    failures = []
    for k in stages:
        for key in window.keys():
            st = engine.state(key, k)
            if not st.dim:
                continue
            tkey = engine.target_key(key, k)
            tstate = engine.state(tkey, k)
            images = engine.differential(key, k) if engine.slice_fires(key, k) else [0] * st.dim
            for vec, img in zip(st.vecs, images):
                _, local_img = hmap.local_d(key, k, vec)
                try:
                    glob_img = hmap.local_coords(tkey, k, img) if tstate.dim else 0
                except RuleMismatchError:
                    glob_img = None
                if glob_img != local_img:
                    failures.append({"page": engine.stages[k].r, "s": key[0], "m": key[1], "w": key[2]})
    return failures


# --------------------------------------------------------------------------
# least energy and discovery


@dataclass
class Prediction:
    r: object
    source: PageElement
    target: PageElement | None

    @property
    def permanent(self) -> bool:
        return self.target is None

    def __str__(self):
        if self.target is None:
            return f"{self.source}: permanent cycle in window"
        return f"d_{self.r}({self.source}) = {self.target}"


def least_energy(x: PageElement, hmap: HasseMap | None = None, r_max: int | None = None) -> Prediction:
    """First page on which some localization of x supports a differential, and
    the global lift of the tuple of local targets."""
    eng = x.engine
    hmap = hmap or hasse_map(eng)
    k = max(x.stage, eng.n_bss)
    while k < eng.n_stages:
        r = eng.stages[k].r
        if r_max is not None and r > r_max:
            break
        st = eng.state(x.key, k)
        if not st.is_cycle(x.vector):
            raise ValueError(f"{x} does not survive to E_{r}")
        if st.is_boundary(x.vector) or not st.coords(x.vector):
            break
        tkey, tup = hmap.local_d(x.key, k, x.vector)
        if tup:
            y = hmap.lift(tkey, k, tup)
            return Prediction(r, PageElement(eng, x.key, k, x.vector), PageElement(eng, tkey, k, y))
        k += 1
    return Prediction(None, x, None)


class DiscoveryHook:
    """Engine hook producing every global MASS differential by least energy."""

    def __init__(self, hmap: HasseMap):
        self.hmap = hmap
        self._fires: dict = {}

    def fires(self, sym: str, t: int, r: int) -> bool:
        key = (sym, t, r)
        hit = self._fires.get(key)
        if hit is None:
            hit = False
            for place in self.hmap.places:
                kl = self.hmap.local_differential_stage(place, r)
                if kl is None:
                    continue
                loc = self.hmap.local[place]
                if any(loc.mono_fires(c, t, kl) for c in localize_name(sym, place)):
                    hit = True
                    break
            self._fires[key] = hit
        return hit

    def differential(self, engine: Engine, key: Key, k: int, state) -> list[int]:
        out = []
        for vec in state.vecs:
            tkey, tup = self.hmap.local_d(key, k, vec)
            out.append(self.hmap.lift(tkey, k, tup) if tup else 0)
        return out


def discovery_engine(n, primes=DEFAULT_PRIMES, i_max: int = 7) -> Engine:
    """A Q engine whose MASS differentials come only from the local runs."""
    probe = Engine(Q, n, primes, mass=False, i_max=i_max)
    hmap = HasseMap(probe)
    pages = set()
    for loc in hmap.local.values():
        pages.update(st.r for st in loc.stages if st.kind == "mass")
    stages = list(probe.stages) + [Stage("mass", r, []) for r in sorted(pages)]
    eng = Engine(Q, n, primes, stages=stages, i_max=i_max)
    hmap.glob = eng
    hmap._pages.clear()
    eng.differential_hook = DiscoveryHook(hmap)
    _MAPS[(id(eng), None)] = hmap
    return eng


def family_sources(engine: Engine, window: Window):
    """Canonical E2 sources of the global families: [p] tau^{2^i} and tau^{2^i} v0."""
    gens = ["1"] + [f"[{p}]" for p in engine.primes if p != 2]
    for g in gens:
        i = 0
        while (1 << i) <= window.m_max:
            e = (1,) + (0,) * engine.n if g == "1" else (0,) * (engine.n + 1)
            yield g, i, (g, 1 << i, e)
            i += 1


def family_table(engine: Engine, window: Window | None = None) -> list[dict]:
    """For each canonical family source, the first differential it supports."""
    window = window or Window()
    out = []
    for g, i, mono in family_sources(engine, window):
        x = element(engine, mono)
        st = engine.state(x.key, engine.n_bss)
        if not st.is_cycle(x.vector) or st.is_boundary(x.vector):
            continue
        entry = {"family": "unit" if g == "1" else g, "i": i, "source": str(x), "r": None, "target": []}
        for k in range(engine.n_bss, engine.n_stages):
            st = engine.state(x.key, k)
            if not st.is_cycle(x.vector) or st.is_boundary(x.vector):
                break
            c = st.coords(x.vector)
            images = engine.image_coords(x.key, k)
            t = 0
            for j in bits(c):
                t ^= images[j]
            if t:
                tkey = engine.target_key(x.key, k)
                tst = engine.state(tkey, k)
                entry["r"] = engine.stages[k].r
                entry["target"] = [label_name(engine, engine.slice(tkey).monos[tst.labels[q]]) for q in bits(t)]
                break
        out.append(entry)
    return out


def family_table_json(n, primes=DEFAULT_PRIMES, window: Window | None = None, discover: bool = False) -> str:
    window = window or Window(primes=tuple(primes))
    eng = discovery_engine(n, primes) if discover else Engine(Q, n, primes)
    return json.dumps({"n": str(n), "primes": list(primes), "table": family_table(eng, window)},
                      indent=1, sort_keys=True) + "\n"


def table_families(table: list[dict]) -> set:
    return {(e["family"], e["i"], e["r"]) for e in table if e["r"] is not None}


def stored_families(n: int, primes=DEFAULT_PRIMES, window: Window | None = None) -> set:
    """(family, i, r) of the rule table restricted to sources inside the window."""
    window = window or Window(primes=tuple(primes))
    out = set()
    for rule in mass_rules(Q, n, primes, i_max=(window.m_max).bit_length()):
        if (1 << rule.i) <= window.m_max:
            out.add((rule.family, rule.i, rule.r))
    return out


# --------------------------------------------------------------------------
# the choice of z over Q_2


def rule_compatibility(n, primes=DEFAULT_PRIMES, z: str = "x", m_max: int = 8) -> list[dict]:
    """Compare each global family rule, applied to its canonical source, with the
    local differentials at every place.  Returns the mismatches."""
    base = Engine(Q, n, primes, mass=False)
    hmap = HasseMap(base, z=z)
    mismatches = []
    for fam in mass_families(Q, primes, z):
        for i in range(fam.i_min, m_max.bit_length()):
            if (1 << i) > m_max:
                break
            rule = fam.rule(base.n, i)
            src_sym = fam.source_symbol
            e = (1,) + (0,) * base.n if src_sym == "1" else (0,) * (base.n + 1)
            mono = (src_sym, 1 << i, e)
            key = base.mono_tridegree(mono)
            kg = base.n_bss
            if not base.state(key, kg).is_cycle(base.slice(key).vector([mono])):
                continue
            images = rule.image(mono, base.kt)
            tkey = base.mono_tridegree(images[0]) if images else None
            for place in hmap.places:
                loc = hmap.local[place]
                lvec = hmap.localize_vector(key, base.slice(key).vector([mono]), place)
                kl = loc.stage_index("mass", rule.r)
                lst = loc.state(key, kl)
                if not lst.is_cycle(lvec):
                    mismatches.append({"rule": rule.describe(base.kt), "place": str(place), "reason": "source"})
                    continue
                c = lst.coords(lvec)
                local_img = 0
                if c and kl < loc.n_stages and loc.stages[kl].r == rule.r:
                    imgs = loc.differential(key, kl)
                    for j in bits(c):
                        local_img ^= imgs[j]
                tgt_state = loc.state(tkey, kl)
                gvec = 0
                lsl = loc.slice(tkey)
                for sym, t, ee in images:
                    for cc in localize_name(sym, place):
                        gvec ^= 1 << lsl.index[(cc, t, ee)]
                if not tgt_state.is_cycle(gvec):
                    mismatches.append({"rule": rule.describe(base.kt), "place": str(place), "reason": "target"})
                    continue
                if tgt_state.coords(gvec) != tgt_state.coords(local_img):
                    mismatches.append({"rule": rule.describe(base.kt), "place": str(place), "reason": "value"})
    return mismatches


@dataclass
class ZTableReport:
    survival: dict
    mismatches: dict

    @property
    def passed(self) -> bool:
        ok_x = not self.mismatches["x"]
        fails = all(any(mm["place"] == "5" for mm in self.mismatches[z]) for z in ("y", "xy"))
        return all(self.survival.values()) and ok_x and fails

    def to_json(self) -> dict:
        return {"passed": self.passed, "survival": self.survival,
                "mismatch_places": {z: sorted({mm["place"] for mm in v}, key=str) for z, v in self.mismatches.items()}}


def verify_z_tables(n=2, primes=DEFAULT_PRIMES, m_max: int = 8) -> ZTableReport:
    """tau^{2^i} v0 survives to E_{2+i} over Q (i = 1, 2), the table with z = x is
    Hasse compatible, and the tables with z = y or z = x + y are not at place 5."""
    if 2 not in primes or 5 not in primes:
        raise ValueError("the check needs the places 2 and 5")
    if m_max < 4:
        raise ValueError("the check needs stems up to 4")
    eng = Engine(Q, n, primes)
    survival = {}
    for i in (1, 2):
        x = element(eng, ("1", 1 << i, (1,) + (0,) * eng.n))
        k = eng.stage_index("mass", 2 + i)
        st = eng.state(x.key, k)
        survival[f"tau^{1 << i} v0"] = st.is_cycle(x.vector) and not st.is_boundary(x.vector) \
            and bool(st.coords(x.vector))
    mismatches = {z: rule_compatibility(n, primes, z, m_max) for z in ("x", "y", "xy")}
    return ZTableReport(survival, mismatches)


def compare_runs(n, window: Window | None = None, primes=DEFAULT_PRIMES) -> list[dict]:
    """Every MASS page of the discovery run against the rule-table run, slice by
    slice.  Returns the differing (page, slice) entries; empty means identical."""
    from .pages import Page
    window = window or Window(primes=tuple(primes))
    stored = Engine(Q, n, primes)
    found = discovery_engine(n, primes)
    pages = sorted({st.r for st in found.stages[found.n_bss:]} | {st.r for st in stored.stages[stored.n_bss:]})
    diffs = []
    for r in pages + ["inf"]:
        ka = stored.n_stages if r == "inf" else stored.stage_index("mass", r)
        kb = found.n_stages if r == "inf" else found.stage_index("mass", r)
        a = Page(stored, ka, "MASS", window).to_json()["slices"]
        b = Page(found, kb, "MASS", window).to_json()["slices"]
        if r != "inf":
            ra = stored.stages[ka].r if ka < stored.n_stages else None
            rb = found.stages[kb].r if kb < found.n_stages else None
            if ra != r:
                a = [dict(x, d=[]) for x in a]
            if rb != r:
                b = [dict(x, d=[]) for x in b]
        if a != b:
            index = {(x["s"], x["m"], x["w"]): x for x in a}
            for x in b:
                y = index.get((x["s"], x["m"], x["w"]))
                if y != x:
                    diffs.append({"page": r, "slice": [x["s"], x["m"], x["w"]], "stored": y, "found": x})
            if len(a) != len(b):
                diffs.append({"page": r, "slice": None, "stored": len(a), "found": len(b)})
    return diffs
