import itertools

import pytest
from hypothesis import given, settings, strategies as st

from bpcalc.cobar import TriDegree, cobar_slice, en_presentation, ext_dim, ext_oracle, square_is_zero
from bpcalc.milnor import C, Q, Q2, R, BiDegree, Qp

from conftest import ALL_FIELDS


def test_presentation_real_n0():
    pres = en_presentation(0, R)
    assert [g[0] for g in pres.generators] == ["tau_0"]
    assert pres.relations == ("tau_0^2 = 0",)
    assert pres.right_unit == "eta_R(tau) = tau + rho tau_0"


def test_presentation_complex_has_no_rho():
    pres = en_presentation(1, C)
    assert pres.relations == ("tau_0^2 = 0", "tau_1^2 = 0")
    assert pres.right_unit == "eta_R(tau) = tau"


def test_presentation_rationals():
    pres = en_presentation(2, Q)
    assert set(pres.relations) == {"tau_0^2 = rho tau_1", "tau_1^2 = rho tau_2", "tau_2^2 = 0"}


def test_presentation_capped_drops_top_relation():
    pres = en_presentation("inf:3", R)
    assert len(pres.generators) == 4
    assert all(not r.startswith("tau_3^2") for r in pres.relations)
    assert pres.validity_stem == 14


def test_generator_bidegrees():
    pres = en_presentation(3, R)
    assert [g[1:] for g in pres.generators] == [(1, 0), (2, 1), (4, 3), (8, 7)]


@pytest.mark.parametrize("method", ["koszul", "cobar"])
def test_ext_examples(method):
    assert ext_dim(C, 1, (0, 1, -1), method=method) == 1  # tau
    assert ext_dim(R, 0, (0, 1, -1), method=method) == 0  # d tau = rho v0
    assert ext_dim(C, 1, (1, 1, 1), method=method) == 1  # v1
    assert ext_dim(Qp(5), 0, (2, 0, 0), method=method) == 1  # v0^2


def test_v1_representative_is_tau1():
    dim, reps = ext_oracle(C, 1, TriDegree(1, BiDegree(1, 1)), method="cobar")
    assert dim == 1
    assert reps == [[("1", 0, ((0, 1),))]]


def test_rho_cube_kills_v1_over_reals():
    # rho^k v1 sits at (1, 1, 1 - k); rho^3 v1 = 0
    dims = [ext_dim(R, 1, (1, 1, 1 - k)) for k in range(5)]
    assert dims == [1, 1, 1, 0, 0]


def test_slice_shapes_compose():
    mats, bases = cobar_slice(R, 1, TriDegree(1, BiDegree(2, 0)))
    assert len(bases) == 4
    d_in, d_mid, d_out = mats
    assert len(d_in) == len(bases[0])
    assert len(d_mid) == len(bases[1])
    assert len(d_out) == len(bases[2])


def _free_count(n, key):
    """Monomials tau^a v_0^e0 ... v_n^en in the given (s, stem, w)."""
    s, m, w = key
    total = 0
    for exps in itertools.product(range(s + 1), repeat=n + 1):
        if sum(exps) != s:
            continue
        vm = sum(e * ((1 << i) - 1) for i, e in enumerate(exps))
        a = m - vm
        if a >= 0 and vm - a == w:
            total += 1
    return total


@pytest.mark.parametrize("n", [0, 1, 2])
def test_complex_matches_polynomial_count(n):
    for s in range(7):
        for m in range(11):
            for w in range(-m, m + 1):
                assert ext_dim(C, n, (s, m, w)) == _free_count(n, (s, m, w)), (n, s, m, w)


keys = st.tuples(st.integers(0, 3), st.integers(0, 6), st.integers(-7, 5))


@settings(max_examples=60, deadline=None)
@given(fld=st.sampled_from([C, R, Q2, Qp(3), Qp(5)]), n=st.integers(0, 2), key=keys)
def test_square_is_zero(fld, n, key):
    assert square_is_zero(fld, n, key, method="cobar")
    assert square_is_zero(fld, n, key, method="koszul")


@settings(max_examples=60, deadline=None)
@given(fld=st.sampled_from(ALL_FIELDS), n=st.integers(0, 2), key=keys)
def test_koszul_agrees_with_cobar(fld, n, key):
    assert ext_dim(fld, n, key, method="koszul") == ext_dim(fld, n, key, method="cobar")


def test_unknown_method():
    with pytest.raises(ValueError):
        ext_dim(R, 0, (0, 0, 0), method="resolution")
