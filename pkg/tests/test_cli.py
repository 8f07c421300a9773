import json

import pytest

from bpcalc.cli import main

SMALL = ["--mmax", "4", "--wmin", "-5", "--wmax", "2", "--smax", "4"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("field", ["C", "R", "Q2"])
def test_ext_agrees(capsys, field):
    code, out, _ = run(capsys, "ext", "--field", field, "--n", "1", *SMALL, "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["mismatches"] == 0 and doc["rows"]


def test_ext_text(capsys):
    code, out, _ = run(capsys, "ext", "--field", "C", "--n", "1", *SMALL)
    assert code == 0
    assert out.rstrip().endswith("0 mismatches")


def test_run_is_reproducible(capsys):
    args = ("run", "--field", "Qp:5", "--n", "0", *SMALL, "--format", "json")
    first = run(capsys, *args)[1]
    second = run(capsys, *args)[1]
    assert first == second
    pages = json.loads(first)
    # the rho-BSS collapses over Q_5, so the only rho page is E_inf
    assert (pages[0]["kind"], pages[0]["r"]) == ("rhoBSS", "inf")
    assert [p["r"] for p in pages[1:3]] == [2, 3]
    assert pages[-1]["r"] == "inf"


def test_run_rules(capsys):
    code, out, _ = run(capsys, "run", "--field", "R", "--n", "3", "--rules")
    assert code == 0
    doc = json.loads(out)
    assert [e["r"] for e in doc["bss"]] == [1, 3, 7, 15]


def test_run_svg(capsys, tmp_path):
    code, out, _ = run(capsys, "run", "--field", "R", "--n", "1", *SMALL, "--format", "svg",
                       "--out", str(tmp_path))
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert "rhoBSS_E1.svg" in names and "MASS_Einf.svg" in names


def test_pi_check(capsys):
    code, out, _ = run(capsys, "pi", "--field", "Q", "--n", "1", "--mmax", "3", "--wmin", "-5",
                       "--wmax", "0", "--check", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert rows and all(r["agrees"] for r in rows)


def test_pi_beyond_cap_is_an_error(capsys):
    code, _, err = run(capsys, "pi", "--field", "R", "--n", "inf:2", "--mmax", "9")
    assert code == 2 and "error" in err


def test_k(capsys):
    code, out, _ = run(capsys, "k", "--field", "R", "--mmax", "3")
    assert code == 0
    assert out.splitlines()[1] == "K_1: Z/2"


def test_mgl(capsys):
    code, out, _ = run(capsys, "mgl", "--field", "C", "--mmax", "2", "--wmin", "0", "--wmax", "2",
                       "--format", "json")
    assert code == 0
    ranks = {(r["bidegree"]["m"], r["bidegree"]["w"]): r["z2_rank"] for r in json.loads(out)}
    assert ranks[(2, 2)] == 2


def test_verify_vacuous(capsys):
    code, out, _ = run(capsys, "verify", "--mmin", "3", "--mmax", "2")
    assert code == 0
    assert out.startswith("PASS (vacuous)")


def test_verify_one_criterion(capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "4")
    assert code == 0
    assert out.splitlines()[0].startswith("criterion 4: PASS")


def test_verify_mutated_table_fails(capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "5", "--mutate-z", "y", "--format", "json")
    assert code == 1
    assert "FAIL" in out


def test_chart_svg_and_census(capsys):
    code, svg, _ = run(capsys, "chart", "--field", "R", "--n", "1", *SMALL, "--page", "1")
    assert code == 0 and svg.startswith("<svg")
    code, census, _ = run(capsys, "chart", "--field", "R", "--n", "1", *SMALL, "--page", "1", "--census")
    assert code == 0
    assert json.loads(census)["arrows"]


def test_golden(capsys, tmp_path):
    code, out, _ = run(capsys, "golden", str(tmp_path))
    assert code == 0
    assert (tmp_path / "census_R_n3_E1.json").exists()
    assert (tmp_path / "q_families_n3.json").exists()


def test_bad_field():
    with pytest.raises(SystemExit) as info:
        main(["ext", "--field", "Qp:9"])
    assert info.value.code == 2
