import filecmp
from xml.etree import ElementTree

import pytest

from capexlab.features import FeatureConfig, Fixed, ModelProfile
from capexlab.harness import (
    VARIANTS,
    Cell,
    ComparisonReport,
    MissingCellsError,
    finding_checks,
    read_comparison,
    resolve_profile,
    run_matrix,
    summary_svg,
    write_comparison,
)
from capexlab.heuristic import ESParams
from capexlab.instances import peak_bound, seasonal_two_region

SMALL_ES = ESParams(mu=2, lam=4, generations=4)


@pytest.fixture(scope="module")
def small():
    return seasonal_two_region(24)


@pytest.fixture(scope="module")
def report(small):
    return run_matrix(small, ["I", "III"], ["ref", "ref+availability", "ref+myopic"], SMALL_ES, seed=1)


def test_two_profiles_use_case_one(small):
    rep = run_matrix(small, ["I"], ["ref", "ref+availability"])
    assert set(rep.cells) == {("I", "ref"), ("I", "ref+availability")}
    assert all(c.status == "Optimal" for c in rep.cells.values())
    devs = rep.deviations()
    assert {(r, t) for _, r, t, _ in devs} == {(r, t) for r in ("R1", "R2") for t in ("coal", "ocgt")}
    assert all(0.0 <= v <= 1.0 for *_, v in devs)


def test_identical_profiles_have_zero_deviation(small):
    twin = ModelProfile("twin", VARIANTS["ref"].features)
    rep = run_matrix(small, ["I", "II"], ["ref", twin])
    assert rep.deviations()
    assert all(v == 0.0 for *_, v in rep.deviations())


def test_failing_cell_is_isolated(small):
    broken = ModelProfile("broken", FeatureConfig(e2p_policy=Fixed({"flywheel": 1.0})))
    rep = run_matrix(small, ["II"], ["ref", broken])
    bad = rep.cell("II", "broken")
    assert bad.status == "error" and "flywheel" in bad.message and bad.result is None
    good = rep.cell("II", "ref")
    alone = run_matrix(small, ["II"], ["ref"]).cell("II", "ref")
    assert good.status == "Optimal" and good.fitness == alone.fitness
    assert all(p == "ref" for *_, p, _, _ in rep.expansion_rows())


def test_non_participating_profile_is_skipped(small):
    rep = run_matrix(small, ["I", "III"], ["isaar-like", "ref"])
    assert rep.cell("I", "isaar-like").status == "skipped"
    assert rep.cell("III", "isaar-like").status == "Optimal"


def test_one_row_per_region_tech_profile(report):
    rows = [r for r in report.expansion_rows() if r[0] == "I"]
    keys = [(r, t, p) for _, r, t, p, _, _ in rows]
    assert len(keys) == len(set(keys)) == 2 * 2 * 3


def test_heuristic_cells_bounded_by_lp(report):
    for c in report.cells.values():
        if c.status == "Heuristic":
            assert c.lp_bound is not None
            assert c.fitness >= c.lp_bound * (1 - 1e-6)


def test_report_files_reproducible(small, report, tmp_path):
    again = run_matrix(small, ["I", "III"], ["ref", "ref+availability", "ref+myopic"], SMALL_ES, seed=1)
    a, b = write_comparison(report, tmp_path / "a"), write_comparison(again, tmp_path / "b")

    def same(cmp):
        assert cmp.left_only == cmp.right_only == [] and cmp.diff_files == [] and cmp.funny_files == []
        for sub in cmp.subdirs.values():
            same(sub)

    same(filecmp.dircmp(a, b))


def test_report_round_trip(report, tmp_path):
    back = read_comparison(write_comparison(report, tmp_path / "r"))
    assert back.profile_names == report.profile_names
    assert back.roles == report.roles
    assert back.deviations() == report.deviations()
    assert back.cost_rows() == report.cost_rows()
    for key, c in report.cells.items():
        assert back.cells[key].status == c.status and back.cells[key].lp_bound == c.lp_bound


def test_summary_svg_is_xml(report):
    root = ElementTree.fromstring(summary_svg(report))
    assert root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}rect")) > 3


def test_findings_need_cells(report):
    with pytest.raises(MissingCellsError):
        finding_checks(report)
    checks = finding_checks(report, require_all=False)
    assert [c.id for c in checks] == ["F1", "F4"]
    assert checks[0].line().startswith("F1 ")


def test_availability_finding_on_peak_bound():
    sc = peak_bound(0.948)
    rep = run_matrix(sc, ["I"], ["ref", "ref+availability"])
    (f1,) = finding_checks(rep, require_all=False)
    assert f1.passed
    assert f1.measured["ratio"] == pytest.approx(1 / 0.948, rel=1e-6)


def test_run_matrix_argument_checks(small):
    with pytest.raises(ValueError):
        run_matrix(small, [], ["ref"])
    with pytest.raises(ValueError):
        run_matrix(small, ["I"], [])
    with pytest.raises(ValueError, match="distinct"):
        run_matrix(small, ["I"], ["ref", "ref"])
    with pytest.raises(KeyError):
        resolve_profile("nope")


def test_cell_status_helpers():
    c = Cell("I", "p", "error", message="boom")
    assert not c.ok and c.fitness != c.fitness
    rep = ComparisonReport("s", ["I"], [VARIANTS["ref"]], {("I", "ref"): c})
    assert rep.expansion_rows() == [] and rep.deviations() == []
