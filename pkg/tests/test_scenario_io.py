import filecmp
from pathlib import Path

import numpy as np
import pytest
import yaml

from capexlab.features import profile_preset
from capexlab.formulation import build_lp, extract_result
from capexlab.heuristic import ESParams, evolve_capacities
from capexlab.instances import example_path, seasonal_two_region
from capexlab.metrics import season_calendar, seasonal_shares
from capexlab.model import validate_scenario
from capexlab.results import Capacities, SystemResult
from capexlab.scenario_io import (
    SCHEMA,
    ScenarioFileError,
    ScenarioValidationError,
    SeriesParseError,
    load_scenario,
    read_result,
    read_series_csv,
    save_scenario,
    write_result,
)
from capexlab.solver import solve
from capexlab.synthetic import DemandShape, RegionShape, SyntheticSpec, VREShape, generate_synthetic
from capexlab.usecases import use_case_template


def test_bundled_example_loads():
    sc = load_scenario(example_path())
    assert validate_scenario(sc) == []
    assert sc.region_ids == ["R1", "R2"] and sc.hours == 168
    assert sc == seasonal_two_region(168)


def write_csv(path: Path, rows):
    path.write_text("hour,region,value\n" + "".join(f"{h},{r},{v}\n" for h, r, v in rows))


def test_non_contiguous_hours(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, [(0, "A", 1.0), (1, "A", 2.0), (3, "A", 4.0)])
    with pytest.raises(SeriesParseError, match=r"d\.csv:4: non-contiguous hours"):
        read_series_csv(p)


def test_series_parse_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("t,region,value\n0,A,1\n")
    with pytest.raises(SeriesParseError, match="header"):
        read_series_csv(p)
    write_csv(p, [(0, "A", "abc")])
    with pytest.raises(SeriesParseError, match="not a number"):
        read_series_csv(p)
    write_csv(p, [(0, "A", 1.0)])
    with pytest.raises(SeriesParseError, match="horizon is 2"):
        read_series_csv(p, hours=2)
    with pytest.raises(ScenarioFileError, match="cannot open"):
        read_series_csv(tmp_path / "missing.csv")


def test_missing_vre_profile_fails_validation(tmp_path):
    path = save_scenario(seasonal_two_region(48), tmp_path / "scenario.yaml")
    cfg = yaml.safe_load(path.read_text())
    del cfg["series"]["profiles"]["wind"]
    path.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ScenarioValidationError) as err:
        load_scenario(path)
    assert any("no matching vre_profile" in v.rule for v in err.value.violations)


def test_bad_schema_and_keys(tmp_path):
    path = save_scenario(seasonal_two_region(24), tmp_path / "scenario.yaml")
    cfg = yaml.safe_load(path.read_text())
    cfg["dispatchables"][0]["colour"] = "grey"
    path.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ScenarioFileError, match="unknown keys"):
        load_scenario(path)
    cfg["schema"] = "other/9"
    path.write_text(yaml.safe_dump(cfg))
    with pytest.raises(ScenarioFileError, match=SCHEMA):
        load_scenario(path)
    path.write_text("a: [1,\n")
    with pytest.raises(ScenarioFileError, match="YAML error"):
        load_scenario(path)


def test_scenario_round_trip(tmp_path):
    sc = seasonal_two_region(48)
    back = load_scenario(save_scenario(sc, tmp_path / "s" / "scenario.yaml"))
    assert back == sc
    assert back.operating_weight == sc.operating_weight


def assert_results_equal(a: SystemResult, b: SystemResult):
    assert a.hours == b.hours and a.backend == b.backend and a.status == b.status
    for name in ("generation", "storage_energy", "storage_charge", "storage_discharge", "lines"):
        assert getattr(a.capacity, name) == getattr(b.capacity, name)
        assert getattr(a.expansion, name) == getattr(b.expansion, name)
    for name in ("generation", "vre_used", "curtailment", "charge", "discharge", "level", "flow",
                 "unserved", "demand"):
        da, db = getattr(a, name), getattr(b, name)
        assert da.keys() == db.keys(), name
        for k in da:
            assert np.array_equal(da[k], db[k]), (name, k)
    assert a.line_ends == b.line_ends
    assert a.costs == b.costs
    assert a.costs.variable_detail == b.costs.variable_detail
    assert a.objective == b.objective or (np.isnan(a.objective) and np.isnan(b.objective))


def lp_result(sc, uc="IV", profile="remix-like"):
    f = profile_preset(profile).features
    lp, index = build_lp(sc, use_case_template(uc, sc), f)
    return extract_result(solve(lp), index, sc)


def test_result_round_trip_lp(tmp_path):
    res = lp_result(seasonal_two_region(24))
    write_result(res, tmp_path / "r")
    assert_results_equal(read_result(tmp_path / "r"), res)


def test_result_round_trip_heuristic(tmp_path):
    sc = seasonal_two_region(24)
    f = profile_preset("genesys2-like").features
    _, res = evolve_capacities(sc, use_case_template("III", sc), f, ESParams(mu=2, lam=4, generations=3))
    write_result(res, tmp_path / "h")
    back = read_result(tmp_path / "h")
    assert_results_equal(back, res)
    assert back.meta["fitness_trace"] == res.meta["fitness_trace"]


def test_result_write_is_byte_stable(tmp_path):
    res = lp_result(seasonal_two_region(24), uc="II", profile="dieter-like")
    write_result(res, tmp_path / "a")
    write_result(read_result(tmp_path / "a"), tmp_path / "b")
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert cmp.left_only == cmp.right_only == cmp.diff_files == []


def test_empty_result_is_header_only(tmp_path):
    empty = SystemResult(hours=0, capacity=Capacities(), expansion=Capacities())
    d = write_result(empty, tmp_path / "e")
    csvs = sorted(Path(d).glob("*.csv"))
    assert csvs
    for p in csvs:
        lines = p.read_text().splitlines()
        if p.name == "costs.csv":
            continue
        assert len(lines) == 1, p.name
    assert (Path(d) / "capacity.csv").read_text() == "region,technology,capacity_mw,energy_mwh,charge_mw\n"
    assert (Path(d) / "transmission.csv").read_text().startswith("line,from,to,expansion_mw")
    back = read_result(d)
    assert back.capacity.generation == {} and back.flow == {}


# synthetic generation


def test_synthetic_same_seed_identical():
    shape = RegionShape(DemandShape(noise=4.0), VREShape(pv_capacity=50.0, wind_capacity=80.0))
    spec = SyntheticSpec(regions=3, hours=72, seed=9, topology="ring", shapes=(shape,))
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a == b
    assert a != generate_synthetic(SyntheticSpec(regions=3, hours=72, seed=10, topology="ring", shapes=(shape,)))
    # regions draw from separate streams
    assert not np.array_equal(a.regions[0].demand, a.regions[1].demand)


def test_synthetic_flat_series_without_noise():
    shape = RegionShape(DemandShape(100.0, 0.0, 0.0, 0.0),
                        VREShape(pv_capacity=0.0, wind_capacity=10.0, wind_seasonal=0.0, wind_sigma=0.0))
    sc = generate_synthetic(SyntheticSpec(regions=2, hours=48, shapes=(shape,)))
    for r in sc.regions:
        assert np.all(r.demand == 100.0)
        assert np.all(r.vre_profile["wind"] == r.vre_profile["wind"][0])


def test_synthetic_winter_bias():
    shape = RegionShape(DemandShape(100.0, 10.0, 20.0, 2.0))
    sc = generate_synthetic(SyntheticSpec(regions=1, hours=24 * 28, shapes=(shape,), seed=3))
    summer, winter = seasonal_shares(sc.regions[0].demand, season_calendar(sc.hours))
    assert summer < 0.5 < winter


def test_synthetic_profiles_are_capacity_factors():
    sc = generate_synthetic(SyntheticSpec(regions=4, hours=96, topology="complete", seed=1))
    assert validate_scenario(sc) == []
    assert len(sc.lines) == 6
    for r in sc.regions:
        for p in r.vre_profile.values():
            assert p.min() >= 0.0 and p.max() <= 1.0


@pytest.mark.parametrize(
    "kw",
    [{"hours": 12}, {"topology": "mesh"}, {"shapes": (RegionShape(DemandShape(daily_amplitude=-1.0)),)}],
)
def test_synthetic_spec_validated(kw):
    with pytest.raises(ValueError):
        SyntheticSpec(**kw)


@pytest.mark.parametrize("topology,edges", [("path", 3), ("ring", 4), ("star", 3), ("complete", 6)])
def test_topologies(topology, edges):
    sc = generate_synthetic(SyntheticSpec(regions=4, hours=24, topology=topology))
    assert len(sc.lines) == edges
