import json
from pathlib import Path

import pytest

from bpcalc.charts import ChartStyle, census_json, chart_data, panel_of, render, structural_census
from bpcalc.milnor import C, Q, Q2, R, Qp
from bpcalc.pages import Engine, Page, Window
from bpcalc.suite import REAL_PAGES, REAL_WINDOW, real_census

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def real3():
    return Engine(R, 3)


def real_page(eng, r, window=REAL_WINDOW):
    return Page(eng, eng.stage_index("bss", r), "rhoBSS", window)


def test_real_e1_landmarks(real3):
    data = chart_data(real_page(real3, 1))
    at = {g.point: g.type_name for g in data.glyphs if g.label in ("1", "tau")}
    assert at == {(0, 0): "free", (1, -1): "free"}
    assert ((1, -1), (0, -1), 1) in data.arrows


def test_real_e1_arrow_count(real3):
    # module generators on E1 are rho^a tau^t; exactly the odd t support d1
    win = REAL_WINDOW
    expected = 0
    for t in range(1, win.m_max + 1, 2):
        for a in range(0, 40):
            w = -t - a
            if win.w_min <= w <= win.w_max and t - 1 >= win.m_min:
                expected += 1
    census = structural_census(real_page(real3, 1))
    assert census["arrows"] == {"1": expected}


def test_arrows_move_one_stem_left(real3):
    for r in (1, 3, 7):
        for a, b, _ in chart_data(real_page(real3, r)).arrows:
            assert (b[0] - a[0], b[1] - a[1]) == (-1, 0)


def test_q2_e3_has_only_i1_family():
    eng = Engine(Q2, 2)
    page = Page(eng, eng.stage_index("mass", 3), "MASS", Window(0, 10, -12, 4, 10))
    census = structural_census(page)
    assert set(census["arrows"]) == {"3"}
    for a, _, _ in chart_data(page).arrows:
        # sources are tau^{2 odd} times symbols, which sit at stems 2 mod 4
        assert a[0] % 4 == 2


@pytest.mark.parametrize("fld", [R, Q2, Qp(5), Q])
def test_e_infinity_has_no_arrows(fld):
    eng = Engine(fld, 1)
    page = Page(eng, eng.n_stages, "MASS", Window(0, 6, -8, 3, 6))
    assert structural_census(page)["arrows"] == {}


def test_rationals_p3_panel():
    eng = Engine(Q, 3)
    page = Page(eng, eng.stage_index("mass", 2), "MASS", Window(0, 8, -10, 2, 8))
    glyphs = chart_data(page, ChartStyle(panel="p3")).glyphs
    assert glyphs and all(panel_of(g.label.split()[0]) == "p3" for g in glyphs)
    three = sorted(g.point for g in glyphs if g.label.startswith("[3]"))
    assert three[0] == (0, -1)
    # tau-multiplication strings have slope -1
    assert all(m + w == -1 for m, w in three)
    assert len(three) >= 3


def test_panel_of():
    assert panel_of("[3]") == panel_of("a_7") == "p3"
    assert panel_of("[5]") == panel_of("a_13") == "p1"
    assert panel_of("1") == panel_of("rho^2") == panel_of("[2]") == "two"


def test_empty_page_has_axes_only():
    page = Page(Engine(C, 1), 0, "rhoBSS", Window(0, 2, 3, 4, 2))
    svg = render(page)
    assert svg.startswith("<svg") and '<g id="axes"' in svg
    assert '<g id="classes">\n</g>' in svg
    assert "<circle" not in svg


def test_render_is_deterministic(real3):
    page = real_page(real3, 3)
    first = render(page)
    assert first == render(page)
    assert first == render(real_page(Engine(R, 3), 3))


def test_fanned_classes_carry_tooltips():
    eng = Engine(Q, 1)
    svg = render(Page(eng, eng.n_bss, "MASS", Window(0, 4, -5, 1, 4)))
    assert "<title>" in svg and "s=" in svg


def test_interior_is_window_independent(real3):
    region = (1, 5, -7, 0)
    small = structural_census(real_page(real3, 3, Window(0, 6, -9, 2, 8)), region)
    big = structural_census(real_page(real3, 3, Window(0, 10, -14, 4, 12)), region)
    small.pop("region"), big.pop("region")
    assert small == big


@pytest.mark.parametrize("r", REAL_PAGES)
def test_real_census_goldens(r):
    assert (GOLDEN / f"census_R_n3_E{r}.json").read_text() == real_census(r)


def test_census_json_shape(real3):
    doc = json.loads(census_json(real_page(real3, 1)))
    assert set(doc) == {"field", "kind", "page", "region", "glyphs", "rho_bars", "arrows", "v_segments", "dashed"}
    assert doc["page"] == "1" and doc["kind"] == "rhoBSS"


def test_collapsed_real_page_has_dashed_links(real3):
    page = Page(real3, real3.n_bss, "MASS", Window(0, 16, -4, 16, 8))
    census = structural_census(page)
    assert census["dashed"] > 0
