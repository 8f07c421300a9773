import json

import pytest
from hypothesis import given, settings, strategies as st

from bpcalc.cobar import ext_dim
from bpcalc.milnor import DEFAULT_PRIMES, C, Q, Q2, R, Qp, ktheory
from bpcalc.pages import Engine, Window
from bpcalc.rules import (RealRewriting, bss_pages, bss_rules, check_degree_law, check_real_to_complex,
                          check_rho_summands, ext_en_presentation, mass_rules, mass_rules_at, rules_to_json)

from conftest import ALL_FIELDS


def kt_of(fld):
    return ktheory(fld, DEFAULT_PRIMES if fld.tag == "Q" else ())


def described(fld, rules):
    kt = kt_of(fld)
    return [r.describe(kt) for r in rules]


def test_bss_pages():
    assert bss_pages(R, 3) == [1, 3, 7, 15]
    assert bss_pages(Q, 2) == [1, 3, 7]
    assert bss_rules(Qp(5), 3) == []
    assert bss_rules(C, 3) == []
    assert described(Q2, bss_rules(Q2, 3)) == ["d_1(tau) = rho v0"]
    assert described(Qp(7), bss_rules(Qp(7), 2)) == ["d_1(tau) = rho v0"]


def test_mass_empty_over_complex_and_reals():
    assert mass_rules(C, 2) == [] and mass_rules(R, 2) == []


def test_local_mass_examples():
    assert described(Qp(5), mass_rules_at(Qp(5), 0, 2)) == ["d_2(tau) = u v0^2"]
    assert described(Q2, mass_rules_at(Q2, 1, 3)) == ["d_3(tau^2) = x tau v0^3"]
    # lambda(3) = 3: the pattern starts at tau^2 on page 3
    assert described(Qp(3), mass_rules_at(Qp(3), 1, 2)) == []
    assert described(Qp(3), mass_rules_at(Qp(3), 1, 3)) == ["d_3(tau^2) = rho tau v0^3"]


def test_global_mass_examples():
    got = set(described(Q, mass_rules(Q, 1, i_max=2)))
    assert "d_2([5] tau) = (rho^2 + a_5) v0^2" in got
    assert "d_3([3] tau^2) = (rho^2 + a_3) tau v0^3" in got
    assert "d_4(tau^4) = [2] tau^3 v0^4" in got


def test_d4_on_v0_2(engines):
    eng = engines(Q, 1)
    k = eng.stage_index("mass", 4)
    key = (1, 4, -4)  # tau^4 v0 = v0(2)
    labels = [eng.label(key, k, j) for j in range(eng.dim(key, k))]
    j = labels.index(("1", 4, (1, 0)))
    img = eng.differential(key, k)[j]
    assert eng.slice(eng.target_key(key, k)).support(img) == [("[2]", 3, (5, 0))]


def test_tau16_fires_on_page_six_at_height_four():
    eng = Engine(Q, 4)
    k = eng.stage_index("mass", 6)
    key = (1, 16, -16)
    labels = [eng.label(key, k, j) for j in range(eng.dim(key, k))]
    j = labels.index(("1", 16, (1, 0, 0, 0, 0)))
    img = eng.differential(key, k)[j]
    assert eng.slice(eng.target_key(key, k)).support(img) == [("[2]", 15, (7, 0, 0, 0, 0))]


@pytest.mark.parametrize("fld", ALL_FIELDS)
def test_degree_law_for_every_symbol(fld):
    kt = kt_of(fld)
    rules = bss_rules(fld, 3) + mass_rules(fld, 3, i_max=4)
    for rule in rules:
        syms = [rule.source_symbol] if rule.source_symbol else [s for d in range(4) for s in kt.basis(d)]
        for sym in syms:
            check_degree_law(rule, kt, sym)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
@pytest.mark.parametrize("capped", [False, True])
def test_confluence(n, capped):
    assert RealRewriting(n, capped).check_confluence() > 0


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_real_to_complex_is_ring_map(n):
    assert check_real_to_complex(n) > 0


def test_real_rewriting_facts():
    rw = RealRewriting(1)
    # v0(1) v1(0)^2 is already normal
    word = (0, 0, ((0, 1), (1, 0), (1, 0)))
    assert rw.is_normal(word)
    # v0(1) v1(1) v1(0) rewrites to tau^4 v0(1) v1^2
    assert rw.reduce((0, 0, ((0, 1), (1, 0), (1, 1)))) == (0, 1, ((0, 1), (1, 0), (1, 0)))
    assert rw.render((0, 1, ((0, 1), (1, 0), (1, 0)))) == "tau^4 v0(1) v1^2"
    # rho^3 v1(j) = 0 and rho^2 v1(j) survives
    assert rw.reduce((3, 0, ((1, 0),))) is None
    assert rw.reduce((2, 0, ((1, 0),))) == (2, 0, ((1, 0),))
    assert rw.paper_name((2, 0, ((1, 0),))) == "rho w1(0)"
    # v1 has period 1 at height 1
    assert rw.reduce((0, 0, ((1, 2),))) == (0, 2, ((1, 0),))


@settings(max_examples=50, deadline=None)
@given(a=st.integers(0, 6), facs=st.lists(st.tuples(st.integers(0, 2), st.integers(0, 6)), max_size=3))
def test_rewriting_preserves_degree(a, facs):
    rw = RealRewriting(2)
    word = (a, 0, tuple(sorted(facs)))
    nf = rw.reduce(word)
    if nf is not None:
        assert rw.is_normal(nf)
        assert rw.word_degree(nf) == rw.word_degree(word)


def test_q7_rho_tau_v0():
    # rho tau v0 at (1, 1, -2) survives over Q_7
    pres = ext_en_presentation(Qp(7), 1)
    assert pres.dim((1, 1, -2)) == 1
    assert ext_dim(Qp(7), 1, (1, 1, -2)) == 1
    assert ext_dim(Qp(7), 1, (1, 1, -2), method="cobar") == 1


@pytest.mark.parametrize("fld", ALL_FIELDS)
def test_rho_summands_span(fld):
    check_rho_summands(fld)


@pytest.mark.parametrize("fld", [C, R, Q2, Qp(3), Qp(5), Q])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_presentation_matches_koszul(fld, n):
    pres = ext_en_presentation(fld, n)
    for key in Window(0, 8, -9, 4, 5).keys():
        assert pres.dim(key) == ext_dim(fld, n, key), key


def test_presentation_matches_engine_large_window(engines):
    eng = engines(R, 3)
    pres = ext_en_presentation(R, 3)
    for key in Window(0, 16, -17, 17, 4).keys():
        assert pres.dim(key) == eng.dim(key, eng.n_bss), key


def test_capped_presentation_refuses_high_stems():
    pres = ext_en_presentation(R, "inf:2")
    with pytest.raises(ValueError):
        pres.dim((0, 7, 0))


def test_rules_json_round_trip():
    doc = rules_to_json(Q, 1, i_max=2)
    assert json.loads(json.dumps(doc)) == doc
    assert doc["bss"][0]["rule"] == "d_1(tau) = rho v0"
    assert all(e["r"] >= 2 for e in doc["mass"])


def test_unknown_z_variant():
    with pytest.raises(ValueError):
        mass_rules(Q, 1, z="w")
