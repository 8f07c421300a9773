"""Deterministic SVG charts of spectral-sequence pages and a structural census
of their contents (glyphs, rho bars, arrows, v-segments) for golden testing.

Classes are plotted at (stem, weight); the filtration s is not an axis.
Only generators of the F2[v_0..v_n]-module structure are drawn, with a glyph
encoding which v_i annihilate them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from xml.sax.saxutils import escape

from .milnor import _a_prime, _bracket_prime
from .pages import Engine, Page, bits, label_name, rref

FREE = "free"            # F2[v0..vn]
V0_TOWER = "v0-tower"    # v0 F2[v0..vn]: generator already divisible by v0
TRUNCATED = "v0^r"       # F2[v0..vn]/v0^r
# "dot" + k slashes: F2[v0..vn]/(v0..vk)


@dataclass(frozen=True)
class ChartStyle:
    x_range: tuple | None = None   # plotted stem range, defaults to the page window
    y_range: tuple | None = None   # plotted weight range
    scale: int = 36
    margin: int = 40
    rho_bars: bool = True
    v_segments: bool = True
    dashed: bool = True
    arrows: bool = True
    all_mass: bool = False         # draw every later MASS differential on the same chart
    fan: float = 0.16              # horizontal offset between classes sharing a point
    panel: str | None = None       # over Q: "p3", "p1" or "two" (2 and the real place)


@dataclass(frozen=True)
class Glyph:
    key: tuple
    label: str
    kind: str
    slashes: int = 0
    order: int | None = None

    @property
    def point(self) -> tuple:
        return self.key[1], self.key[2]

    @property
    def type_name(self) -> str:
        if self.kind == "dot":
            return "dot" + "\\" * self.slashes
        if self.kind == TRUNCATED:
            return f"circle/v0^{self.order}"
        return self.kind


@dataclass
class ChartData:
    glyphs: list = dc_field(default_factory=list)
    bars: list = dc_field(default_factory=list)       # (point, point)
    arrows: list = dc_field(default_factory=list)     # (point, point, r)
    segments: list = dc_field(default_factory=list)   # (point, point, dashed)


PANELS = ("p3", "p1", "two")


def panel_of(sym: str) -> str:
    """Which figure panel of a Q chart a coefficient symbol belongs to."""
    p = _bracket_prime(sym) or _a_prime(sym)
    if p is None or p == 2:
        return "two"
    return "p3" if p % 4 == 3 else "p1"


def _mono_point(engine: Engine, mono) -> tuple:
    s, m, w = engine.mono_tridegree(mono)
    return m, w


def _v_image_span(engine: Engine, key, k: int) -> dict:
    """RREF (over state coordinates) of all v_i-multiples landing in ``key``."""
    s, m, w = key
    tgt = engine.state(key, k)
    rows = []
    for i in range(engine.nv):
        step = (1 << i) - 1
        src_key = (s - 1, m - step, w - step)
        if src_key[0] < 0 or src_key[1] < 0:
            continue
        src = engine.state(src_key, k)
        for v in src.vecs:
            _, img = engine.v_multiply(src_key, i, v)
            rows.append(tgt.coords(img))
    return rref(rows)


def generators(engine: Engine, key, k: int) -> list[int]:
    """Basis positions of state (key, k) spanning a complement of the v-multiples."""
    st = engine.state(key, k)
    piv = _v_image_span(engine, key, k)
    return [j for j in range(st.dim) if j not in piv]


def _times_v(engine: Engine, key, k: int, i: int, vec: int) -> tuple:
    tkey, img = engine.v_multiply(key, i, vec)
    st = engine.state(tkey, k)
    return tkey, img, st.coords(img)


def classify(engine: Engine, key, k: int, j: int) -> Glyph:
    st = engine.state(key, k)
    vec = st.vecs[j]
    mono = engine.slice(key).monos[st.labels[j]]
    collapsed = k >= engine.n_bss
    label = label_name(engine, mono, collapsed)
    if mono[2][0] >= 1:
        return Glyph(key, label, V0_TOWER)
    _, img, c = _times_v(engine, key, k, 0, vec)
    if c:
        top = engine.periodic_height((key[1], key[2]), k) + 1
        cur_key, cur, r = key, vec, 0
        while cur_key[0] <= top:
            cur_key, cur, c = _times_v(engine, cur_key, k, 0, cur)
            r += 1
            if not c:
                return Glyph(key, label, TRUNCATED, order=r)
            cur = engine.state(cur_key, k).from_coords(c)
        return Glyph(key, label, FREE)
    slashes = 0
    for i in range(1, engine.nv):
        if _times_v(engine, key, k, i, vec)[2]:
            break
        slashes += 1
    return Glyph(key, label, "dot", slashes)


def _base_point(engine: Engine, mono) -> tuple:
    """Point of the monomial with all v_i (i >= 1) removed."""
    sym, t, e = mono
    return _mono_point(engine, (sym, t, (e[0],) + (0,) * (len(e) - 1)))


def chart_data(page: Page, style: ChartStyle | None = None) -> ChartData:
    style = style or ChartStyle()
    eng, k = page.engine, page.stage
    data = ChartData()
    gen_keys = []
    for key in sorted(page.window.keys()):
        st = eng.state(key, k)
        if not st.dim:
            continue
        for j in generators(eng, key, k):
            if style.panel is not None:
                sym = eng.label(key, k, j)[0]
                if panel_of(sym) != style.panel:
                    continue
            data.glyphs.append(classify(eng, key, k, j))
            gen_keys.append((key, j))
    rho = eng.kt.rho
    if style.rho_bars and rho:
        for key, j in gen_keys:
            vec = eng.state(key, k).vecs[j]
            tkey, img = eng.sym_multiply(key, rho, 0, vec)
            if eng.state(tkey, k).coords(img):
                data.bars.append(((key[1], key[2]), (tkey[1], tkey[2])))
    stages = [k] if k < page.last_stage() else []
    if style.all_mass and page.kind == "MASS":
        stages = list(range(k, page.last_stage()))
    if style.arrows:
        for kk in stages:
            r = eng.stages[kk].r
            for key, j in gen_keys:
                st = eng.state(key, kk)
                vec = eng.state(key, k).vecs[j]
                if not st.is_cycle(vec) or st.is_boundary(vec) or not eng.slice_fires(key, kk):
                    continue
                c = st.coords(vec)
                if not c:
                    continue
                images = eng.image_coords(key, kk)
                t = 0
                for q in bits(c):
                    t ^= images[q]
                if not t:
                    continue
                tkey = eng.target_key(key, kk)
                data.arrows.append(((key[1], key[2]), (tkey[1], tkey[2]), r))
                if style.v_segments:
                    tst = eng.state(tkey, kk)
                    tsl = eng.slice(tkey)
                    for q in bits(t):
                        mono = tsl.monos[tst.labels[q]]
                        if any(mono[2][1:]):
                            data.segments.append((_base_point(eng, mono), (tkey[1], tkey[2]), False))
    if style.dashed and k >= eng.n_bss and eng.field.tag in ("R", "Q"):
        data.segments.extend(_dashed_links(page, gen_keys))
    data.segments = sorted(set(data.segments))
    data.arrows.sort()
    data.bars.sort()
    return data


def _dashed_links(page: Page, gen_keys) -> list:
    """v_i v0(j) = v0 v_i(j / 2^i) for j even: dashed slope-1 links."""
    eng, k = page.engine, page.stage
    out = []
    for key, j in gen_keys:
        st = eng.state(key, k)
        sym, t, e = eng.slice(key).monos[st.labels[j]]
        if sym != "1" or sum(e) != 1 or e[0] != 1 or t % 4:
            continue
        jj = t // 2
        for i in range(1, eng.nv):
            if jj % (1 << i):
                break
            other = ("1", t, tuple(1 if q == i else 0 for q in range(eng.nv)))
            okey = eng.mono_tridegree(other)
            ost = eng.state(okey, k)
            ovec = eng.slice(okey).vector([other])
            if ost.is_cycle(ovec) and ost.coords(ovec):
                out.append(((key[1], key[2]), (okey[1], okey[2]), True))
    return out


# --------------------------------------------------------------------------
# SVG


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def render(page: Page, style: ChartStyle | None = None) -> str:
    style = style or ChartStyle()
    data = chart_data(page, style)
    win = page.window
    x0, x1 = style.x_range or (win.m_min, win.m_max)
    y0, y1 = style.y_range or (win.w_min, win.w_max)
    sc, mg = style.scale, style.margin
    width = (x1 - x0) * sc + 2 * mg
    height = (y1 - y0) * sc + 2 * mg

    def px(x):
        return mg + (x - x0) * sc

    def py(y):
        return mg + (y1 - y) * sc

    inside = lambda p: x0 <= p[0] <= x1 and y0 <= p[1] <= y1
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<title>{escape(str(page.field))} {escape(page.kind)} E_{page.r}</title>',
           '<defs><marker id="head" markerWidth="8" markerHeight="8" refX="7" refY="4" orient="auto">'
           '<path d="M0,0 L8,4 L0,8 z" fill="black"/></marker></defs>',
           '<g id="axes" stroke="#bbb" stroke-width="0.5">']
    for x in range(x0, x1 + 1):
        out.append(f'<line x1="{_fmt(px(x))}" y1="{_fmt(py(y1))}" x2="{_fmt(px(x))}" y2="{_fmt(py(y0))}"/>')
    for y in range(y0, y1 + 1):
        out.append(f'<line x1="{_fmt(px(x0))}" y1="{_fmt(py(y))}" x2="{_fmt(px(x1))}" y2="{_fmt(py(y))}"/>')
    out.append("</g>")
    out.append('<g id="axis-labels" font-size="9" fill="#555">')
    for x in range(x0, x1 + 1):
        out.append(f'<text x="{_fmt(px(x) - 3)}" y="{_fmt(py(y0) + 14)}">{x}</text>')
    for y in range(y0, y1 + 1):
        out.append(f'<text x="{_fmt(px(x0) - 22)}" y="{_fmt(py(y) + 3)}">{y}</text>')
    out.append("</g>")

    # fan classes sharing a point by filtration
    at_point: dict = {}
    for g in sorted(data.glyphs, key=lambda g: (g.point, g.key[0], g.label)):
        at_point.setdefault(g.point, []).append(g)
    offsets = {}
    for point, gs in at_point.items():
        for idx, g in enumerate(gs):
            offsets[(g.key, g.label)] = (idx - (len(gs) - 1) / 2) * style.fan

    out.append('<g id="rho" stroke="black" stroke-width="1.2">')
    for a, b in data.bars:
        if inside(a) and inside(b):
            out.append(f'<line x1="{_fmt(px(a[0]))}" y1="{_fmt(py(a[1]))}" x2="{_fmt(px(b[0]))}" y2="{_fmt(py(b[1]))}"/>')
    out.append("</g>")
    out.append('<g id="v" stroke="#246" stroke-width="1">')
    for a, b, dashed in data.segments:
        if inside(a) and inside(b):
            dash = ' stroke-dasharray="4,3"' if dashed else ""
            out.append(f'<line x1="{_fmt(px(a[0]))}" y1="{_fmt(py(a[1]))}" x2="{_fmt(px(b[0]))}" '
                       f'y2="{_fmt(py(b[1]))}"{dash}/>')
    out.append("</g>")
    out.append('<g id="differentials" stroke="#a00" stroke-width="1" fill="none">')
    for a, b, r in data.arrows:
        if inside(a) and inside(b):
            out.append(f'<line x1="{_fmt(px(a[0]) - 6)}" y1="{_fmt(py(a[1]))}" x2="{_fmt(px(b[0]) + 7)}" '
                       f'y2="{_fmt(py(b[1]))}" marker-end="url(#head)"/>')
            out.append(f'<text x="{_fmt((px(a[0]) + px(b[0])) / 2)}" y="{_fmt(py(a[1]) - 4)}" '
                       f'font-size="8" fill="#a00" stroke="none">{r}</text>')
    out.append("</g>")
    out.append('<g id="classes">')
    for g in sorted(data.glyphs, key=lambda g: (g.point, g.key[0], g.label)):
        if not inside(g.point):
            continue
        cx = px(g.point[0] + offsets[(g.key, g.label)])
        cy = py(g.point[1])
        out.append(_glyph_svg(g, cx, cy))
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _glyph_svg(g: Glyph, cx: float, cy: float) -> str:
    tip = f"<title>{escape(g.label)} (s={g.key[0]})</title>"
    c = f'cx="{_fmt(cx)}" cy="{_fmt(cy)}"'
    if g.kind == FREE:
        body = f'<circle {c} r="4.5" fill="white" stroke="black"/>'
    elif g.kind == V0_TOWER:
        body = (f'<circle {c} r="4.5" fill="white" stroke="black"/>'
                f'<circle {c} r="2" fill="black"/>')
    elif g.kind == TRUNCATED:
        body = (f'<circle {c} r="4.5" fill="white" stroke="black"/>'
                f'<text x="{_fmt(cx + 5)}" y="{_fmt(cy + 9)}" font-size="7">/v0^{g.order}</text>')
    else:
        body = f'<circle {c} r="3.5" fill="black"/>'
        for q in range(g.slashes):
            x = cx + 4 + 3 * q
            body += f'<line x1="{_fmt(x)}" y1="{_fmt(cy - 8)}" x2="{_fmt(x + 3)}" y2="{_fmt(cy - 3)}" stroke="black"/>'
    return f'<g class="{escape(g.type_name)}">{tip}{body}</g>'


# --------------------------------------------------------------------------
# census


def structural_census(page: Page, region: tuple | None = None, style: ChartStyle | None = None) -> dict:
    """Counts of glyph types, rho bars, arrows (by page) and v-segments inside a
    plotted region (x0, x1, y0, y1); the whole window by default."""
    data = chart_data(page, style)
    win = page.window
    x0, x1, y0, y1 = region or (win.m_min, win.m_max, win.w_min, win.w_max)
    inside = lambda p: x0 <= p[0] <= x1 and y0 <= p[1] <= y1
    glyphs: dict = {}
    for g in data.glyphs:
        if inside(g.point):
            glyphs[g.type_name] = glyphs.get(g.type_name, 0) + 1
    arrows: dict = {}
    for a, b, r in data.arrows:
        if inside(a) and inside(b):
            arrows[str(r)] = arrows.get(str(r), 0) + 1
    return {
        "field": str(page.field), "kind": page.kind, "page": str(page.r),
        "region": [x0, x1, y0, y1],
        "glyphs": dict(sorted(glyphs.items())),
        "rho_bars": sum(1 for a, b in data.bars if inside(a) and inside(b)),
        "arrows": dict(sorted(arrows.items(), key=lambda kv: int(kv[0]))),
        "v_segments": sum(1 for a, b, d in data.segments if not d and inside(a) and inside(b)),
        "dashed": sum(1 for a, b, d in data.segments if d and inside(a) and inside(b)),
    }


def census_json(page: Page, region: tuple | None = None) -> str:
    return json.dumps(structural_census(page, region), indent=1, sort_keys=True) + "\n"
