import json

import pytest
from hypothesis import given, settings, strategies as st
from sympy.functions.combinatorial.numbers import partition

from bpcalc import closedform as cf
from bpcalc.arith import epsilon, lam, nu2
from bpcalc.milnor import DEFAULT_PRIMES, BiDegree, C, Q, Q2, R, Qp
from bpcalc.pages import AbelianGroup2, towers_group


def pi(fld, n, m, w, primes=DEFAULT_PRIMES):
    return cf.pi_bpn(cf.GroupQuery(fld, n, BiDegree(m, w), primes))


def gens(report):
    return report.to_json()["generators"]


def test_complex_v1_squared():
    r = pi(C, 1, 2, 2)
    assert r.group == AbelianGroup2((), 1)
    assert gens(r) == ["Z2 v1^2"]


def test_real_alpha_class():
    r = pi(R, 1, 4, 0)
    assert r.group == AbelianGroup2((), 1)
    assert gens(r) == ["Z2 v0(1) v1^2"]


def test_rationals_t1_order():
    # 3 + nu2(2) = 4
    r = pi(Q, 1, 1, -2)
    assert r.group == AbelianGroup2((16,), 0)
    assert gens(r) == ["Z/16 t_1"]


def test_rationals_b5_component():
    r = pi(Q, 0, 1, -3)
    b5 = [x for x in r.summands if x.provenance == "B_5"]
    assert [x.order for x in b5] == [1 << (epsilon(5) + nu2(2))] == [8]


def test_abc_minus_alpha():
    parts = cf.abc_groups(1, (0, -1))
    for p in (3, 7, 11):
        assert any(x.provenance == f"A_{p}" and x.order == cf.Z2 for x in parts["A"])
    for p in (5, 13):
        assert any(x.provenance == f"B_{p}" and x.order == cf.Z2 for x in parts["B"])


def test_abc_a3_torsion():
    a3 = [x for x in cf.abc_groups(1, (3, -5))["A"] if x.provenance == "A_3"]
    assert [x.order for x in a3] == [1 << (lam(3) - 1 + nu2(4))] == [16]


def test_c_prime_rho_torsion():
    # w1(0) = rho v1 survives one more rho, then rho^2 w1(0) = 0
    names = lambda m, w: [x.generator for x in cf.abc_groups(1, (m, w))["C"] if x.provenance == "C'"]
    assert names(1, 0) == ["w1(0)"]
    assert names(1, -1) == ["rho w1(0)"]
    assert names(1, -2) == []


def test_mz2_q2_table():
    assert cf.mz2_q2((0, -1)) == AbelianGroup2((2,), 2)
    for m in (1, 3, 5, 7):
        assert cf.mz2_q2((m, -(m + 1))) == AbelianGroup2((1 << (2 + nu2(m + 1)),), 1)
    assert cf.mz2_q2((1, 0)).is_zero
    assert cf.mz2_q2((0, 0)) == AbelianGroup2((), 1)


def test_mgl_examples():
    assert cf.pi_mgl(C, (2, 2)).group == AbelianGroup2((), 2)
    assert cf.pi_mgl(C, (0, 0)).group == AbelianGroup2((), 1)
    assert cf.pi_mgl(R, (-1, 0)).group.is_zero
    with pytest.raises(ValueError):
        cf.pi_mgl(C, (20, 20))


@pytest.mark.parametrize("k", range(0, 13))
def test_mgl_over_complex_counts_partitions(k):
    # in degree k(1 + alpha) the rank over C is the number of partitions of k
    assert cf.pi_mgl(C, (k, k)).group.z2_rank == partition(k)


def test_admissible_partitions_avoid_mersenne():
    for total in range(12):
        for part in cf.admissible_partitions(total):
            assert sum(part) == total
            assert all((x + 1) & x for x in part)


def test_ktheory_examples():
    assert cf.ktheory(C, 4).group == AbelianGroup2((), 1)
    assert cf.ktheory(R, 1).group == AbelianGroup2((2,), 0)
    assert 16 in cf.ktheory(Q, 3).group.finite_orders
    with pytest.raises(ValueError):
        cf.ktheory(C, -1)


@pytest.mark.parametrize("m", [2, 4, 6])
def test_ktheory_grows_with_primes(m):
    small = cf.ktheory(Q, m, primes=(2, 3, 5, 7)).group
    large = cf.ktheory(Q, m, primes=(2, 3, 5, 7, 11, 13, 17)).group
    assert len(large.finite_orders) > len(small.finite_orders)
    assert set(small.finite_orders) <= set(large.finite_orders)


def test_ko_compare():
    report = cf.ko_compare()
    assert report.ok
    assert all(report.relations.values())
    by_m = {row["m"]: row for row in report.rows}
    assert by_m[8]["bp1"] == "Z2" and by_m[8]["image"] == "tau^4 v1^4"
    assert by_m[3]["bp1"] == "0"
    assert by_m[4]["image"] == "v0(1) v1^2"


def test_cap_bound():
    with pytest.raises(ValueError):
        pi(R, "inf:2", 7, 0)
    assert pi(R, "inf:2", 6, 6).group.z2_rank >= 1


def test_report_json_schema():
    doc = json.loads(pi(Q, 1, 0, -1).dumps())
    assert set(doc) == {"bidegree", "z2_rank", "orders", "generators", "provenance"}
    assert doc["bidegree"] == {"m": 0, "w": -1}
    assert len(doc["generators"]) == len(doc["provenance"]) == doc["z2_rank"] + len(doc["orders"])


@pytest.mark.parametrize("fld,n", [(Q, 0), (Q, 1), (Q2, 0), (Q2, 1), (Qp(3), 1), (Qp(5), 1), (Qp(7), 0), (R, 2), (C, 2)])
def test_closed_form_matches_engine(engines, fld, n):
    eng = engines(fld, n)
    for m in range(0, 8):
        for w in range(-m - 4, m + 2):
            assert pi(fld, n, m, w).group == towers_group(eng, m, w), (m, w)


@settings(max_examples=40, deadline=None)
@given(m=st.integers(0, 12), w=st.integers(-14, 0))
def test_local_tables_vanish_off_lines(m, w):
    for fld in (Q2, Qp(5), Qp(7)):
        g = pi(fld, 0, m, w).group
        if m >= 1 and w not in (-(m + 1), -(m + 2)):
            assert g.is_zero
