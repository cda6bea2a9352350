"""Scenario files (YAML config plus long-format CSV series) and result CSVs.

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np
import yaml

from .model import (
    DispatchableTech,
    Region,
    ScenarioModel,
    StorageTech,
    TransmissionLine,
    Violation,
    validate_scenario,
)
from .results import Capacities, CostBreakdown, SystemResult

SCHEMA = "capexlab-scenario/1"
RESULT_SCHEMA = "capexlab-result/1"


class ScenarioFileError(ValueError):
    """Malformed scenario config or series file; message carries file and line."""


class SeriesParseError(ScenarioFileError):
    pass


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        super().__init__("scenario failed validation:\n  " + "\n  ".join(map(str, violations)))


def fmt(x: float) -> str:
    return repr(float(x))


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise SeriesParseError(f"{where}: not a number: {text!r}") from None


# ----------------------------------------------------------------- series


def read_series_csv(path: Path, hours: int | None = None) -> dict[str, np.ndarray]:
    """Read ``hour,region,value`` into one array per region.

    Hours must be contiguous from 0 within every region.
    """
    path = Path(path)
    out: dict[str, list[float]] = {}
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise ScenarioFileError(f"{path}: cannot open series file ({e.strerror})") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["hour", "region", "value"]:
            raise SeriesParseError(f"{path}:1: expected header 'hour,region,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            where = f"{path}:{lineno}"
            if len(row) != 3:
                raise SeriesParseError(f"{where}: expected 3 fields, got {len(row)}")
            try:
                hour = int(row[0])
            except ValueError:
                raise SeriesParseError(f"{where}: hour is not an integer: {row[0]!r}") from None
            region = row[1].strip()
            vals = out.setdefault(region, [])
            if hour != len(vals):
                raise SeriesParseError(
                    f"{where}: non-contiguous hours for region {region!r}: expected {len(vals)}, got {hour}"
                )
            vals.append(_parse_float(row[2], where))
    result = {r: np.array(v, dtype=float) for r, v in out.items()}
    if hours is not None:
        for r, v in result.items():
            if len(v) != hours:
                raise SeriesParseError(f"{path}: region {r!r} has {len(v)} hours, horizon is {hours}")
    return result


def write_series_csv(path: Path, series: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", "region", "value"])
        for region, values in series.items():
            for t, v in enumerate(values):
                w.writerow([t, region, fmt(v)])


# --------------------------------------------------------------- scenarios


def _tech(cls, d: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ScenarioFileError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as e:
        raise ScenarioFileError(f"{where}: {e}") from None


def load_scenario(path, validate: bool = True) -> ScenarioModel:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioFileError(f"{path}: cannot read scenario ({e.strerror})") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ScenarioFileError(f"{path}{line}: YAML error: {e}") from None
    if not isinstance(cfg, dict):
        raise ScenarioFileError(f"{path}: top level must be a mapping")
    if cfg.get("schema") != SCHEMA:
        raise ScenarioFileError(f"{path}: schema must be {SCHEMA!r}, got {cfg.get('schema')!r}")
    for key in ("name", "hours", "regions", "series"):
        if key not in cfg:
            raise ScenarioFileError(f"{path}: missing key {key!r}")
    hours = int(cfg["hours"])
    base = path.parent
    spec = cfg["series"]
    demand = read_series_csv(base / spec["demand"], hours)
    profiles = {tech: read_series_csv(base / f, hours) for tech, f in (spec.get("profiles") or {}).items()}

    regions = []
    for i, rd in enumerate(cfg["regions"]):
        where = f"{path}: regions[{i}]"
        rid = str(rd.get("id", ""))
        if not rid:
            raise ScenarioFileError(f"{where}: missing id")
        if rid not in demand:
            raise ScenarioFileError(f"{where}: no demand series for region {rid!r}")
        prof = {tech: s[rid] for tech, s in profiles.items() if rid in s}
        regions.append(Region(
            rid,
            demand[rid],
            {k: float(v) for k, v in (rd.get("vre_capacity") or {}).items()},
            prof,
            {k: float(v) for k, v in (rd.get("preinstalled") or {}).items()},
            {k: float(v) for k, v in (rd.get("preinstalled_energy") or {}).items()},
        ))
    disp = tuple(_tech(DispatchableTech, d, f"{path}: dispatchables[{i}]") for i, d in enumerate(cfg.get("dispatchables") or []))
    stor = tuple(_tech(StorageTech, d, f"{path}: storages[{i}]") for i, d in enumerate(cfg.get("storages") or []))
    lines = tuple(_tech(TransmissionLine, d, f"{path}: lines[{i}]") for i, d in enumerate(cfg.get("lines") or []))
    scenario = ScenarioModel(
        str(cfg["name"]), hours, tuple(regions), disp, stor, lines,
        slack_penalty=float(cfg.get("slack_penalty", 10_000.0)),
        operating_weight=cfg.get("operating_weight"),
    )
    if validate:
        violations = validate_scenario(scenario)
        if violations:
            raise ScenarioValidationError(violations)
    return scenario


def _clean(d: dict) -> dict:
    return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in d.items()}


def save_scenario(scenario: ScenarioModel, path) -> Path:
    """Write ``path`` (YAML) with ``demand.csv`` and ``profile_<tech>.csv`` beside it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(path.parent / "demand.csv", {r.id: r.demand for r in scenario.regions})
    profiles = {}
    for tech in scenario.vre_techs:
        fname = f"profile_{tech}.csv"
        write_series_csv(
            path.parent / fname,
            {r.id: r.vre_profile[tech] for r in scenario.regions if tech in r.vre_profile},
        )
        profiles[tech] = fname
    cfg = {
        "schema": SCHEMA,
        "name": scenario.name,
        "hours": scenario.hours,
        "slack_penalty": float(scenario.slack_penalty),
        "operating_weight": float(scenario.operating_weight),
        "series": {"demand": "demand.csv", "profiles": profiles},
        "regions": [
            {
                "id": r.id,
                "vre_capacity": {k: float(v) for k, v in r.vre_capacity.items()},
                "preinstalled": {k: float(v) for k, v in r.preinstalled.items()},
                "preinstalled_energy": {k: float(v) for k, v in r.preinstalled_energy.items()},
            }
            for r in scenario.regions
        ],
        "dispatchables": [_clean(asdict(t)) for t in scenario.dispatchables],
        "storages": [_clean(asdict(s)) for s in scenario.storages],
        "lines": [_clean(asdict(ln)) for ln in scenario.lines],
    }
    path.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return path


# ----------------------------------------------------------------- results

HOURLY = ("generation", "vre_used", "curtailment", "charge", "discharge", "level")
CAP_HEADER = ["region", "technology", "capacity_mw", "energy_mwh", "charge_mw"]


def _writer(path: Path):
    try:
        fh = open(path, "w", newline="")
    except OSError as e:
        raise OSError(f"{path}: cannot write ({e.strerror})") from e
    return fh, csv.writer(fh, lineterminator="\n")


def _write_caps(path: Path, caps: Capacities) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(CAP_HEADER)
        for (r, t), v in caps.generation.items():
            w.writerow([r, t, fmt(v), "", ""])
        for (r, s), e in caps.storage_energy.items():
            w.writerow([r, s, fmt(caps.storage_discharge.get((r, s), 0.0)), fmt(e),
                        fmt(caps.storage_charge.get((r, s), 0.0))])


def _read_caps(path: Path) -> Capacities:
    caps = Capacities()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["region"], row["technology"])
            if row["energy_mwh"] == "":
                caps.generation[key] = float(row["capacity_mw"])
            else:
                caps.storage_discharge[key] = float(row["capacity_mw"])
                caps.storage_energy[key] = float(row["energy_mwh"])
                caps.storage_charge[key] = float(row["charge_mw"])
    return caps


def _write_hourly(path: Path, data: dict) -> None:
    fh, w = _writer(path)
    with fh:
        w.writerow(["hour", "region", "technology", "value"])
        for (r, tech), values in data.items():
            for t, v in enumerate(values):
                w.writerow([t, r, tech, fmt(v)])


def _read_hourly(path: Path) -> dict:
    acc: dict[tuple, list[float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            acc.setdefault((row["region"], row["technology"]), []).append(float(row["value"]))
    return {k: np.array(v) for k, v in acc.items()}


def write_result(result: SystemResult, directory) -> Path:
    """Write every result quantity as CSV (plus ``result.yaml`` for scalars)."""
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"{d}: cannot create result directory ({e.strerror})") from e
    _write_caps(d / "capacity.csv", result.capacity)
    _write_caps(d / "expansion.csv", result.expansion)
    fh, w = _writer(d / "transmission.csv")
    with fh:
        w.writerow(["line", "from", "to", "expansion_mw", "capacity_mw"])
        for lid, cap in result.capacity.lines.items():
            a, b = result.line_ends.get(lid, ("", ""))
            w.writerow([lid, a, b, fmt(result.expansion.lines.get(lid, 0.0)), fmt(cap)])
    for name in HOURLY:
        _write_hourly(d / f"{name}.csv", getattr(result, name))
    for name in ("unserved", "demand"):
        fh, w = _writer(d / f"{name}.csv")
        with fh:
            w.writerow(["hour", "region", "value"])
            for r, values in getattr(result, name).items():
                for t, v in enumerate(values):
                    w.writerow([t, r, fmt(v)])
    fh, w = _writer(d / "flow.csv")
    with fh:
        w.writerow(["hour", "line", "value"])
        for lid, values in result.flow.items():
            for t, v in enumerate(values):
                w.writerow([t, lid, fmt(v)])
    fh, w = _writer(d / "costs.csv")
    with fh:
        w.writerow(["component", "value"])
        c = result.costs
        for k, v in [("invest_annuity", c.invest_annuity), ("opex_fix", c.opex_fix),
                     ("opex_variable", c.opex_variable)]:
            w.writerow([k, fmt(v)])
        for k, v in c.variable_detail.items():
            w.writerow([f"variable.{k}", fmt(v)])
        w.writerow(["expansion_cost", fmt(c.expansion_cost)])
        w.writerow(["system_cost", fmt(c.system_cost)])
    trace = result.meta.get("fitness_trace")
    if trace is not None:
        fh, w = _writer(d / "fitness_trace.csv")
        with fh:
            w.writerow(["generation", "best_fitness"])
            for g, f in enumerate(trace):
                w.writerow([g, fmt(f)])
    meta = {k: v for k, v in result.meta.items() if k != "fitness_trace"}
    scalars = {
        "schema": RESULT_SCHEMA,
        "hours": result.hours,
        "backend": result.backend,
        "status": result.status,
        "objective": fmt(result.objective),
        "meta": meta,
    }
    (d / "result.yaml").write_text(yaml.safe_dump(scalars, sort_keys=True))
    return d


def read_result(directory) -> SystemResult:
    d = Path(directory)
    scalars = yaml.safe_load((d / "result.yaml").read_text())
    if scalars.get("schema") != RESULT_SCHEMA:
        raise ScenarioFileError(f"{d / 'result.yaml'}: unexpected schema {scalars.get('schema')!r}")
    res = SystemResult(
        hours=int(scalars["hours"]),
        capacity=_read_caps(d / "capacity.csv"),
        expansion=_read_caps(d / "expansion.csv"),
        backend=scalars["backend"],
        status=scalars["status"],
        objective=float(scalars["objective"]),
        meta=dict(scalars.get("meta") or {}),
    )
    with open(d / "transmission.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            res.capacity.lines[row["line"]] = float(row["capacity_mw"])
            res.expansion.lines[row["line"]] = float(row["expansion_mw"])
            res.line_ends[row["line"]] = (row["from"], row["to"])
    for name in HOURLY:
        getattr(res, name).update(_read_hourly(d / f"{name}.csv"))
    for name in ("unserved", "demand"):
        acc: dict[str, list[float]] = {}
        with open(d / f"{name}.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                acc.setdefault(row["region"], []).append(float(row["value"]))
        getattr(res, name).update({k: np.array(v) for k, v in acc.items()})
    acc = {}
    with open(d / "flow.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            acc.setdefault(row["line"], []).append(float(row["value"]))
    res.flow.update({k: np.array(v) for k, v in acc.items()})
    parts, detail = {}, {}
    with open(d / "costs.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["component"].startswith("variable."):
                detail[row["component"][len("variable."):]] = float(row["value"])
            else:
                parts[row["component"]] = float(row["value"])
    if parts:
        res.costs = CostBreakdown(parts["invest_annuity"], parts["opex_fix"], parts["opex_variable"], detail)
    trace_path = d / "fitness_trace.csv"
    if trace_path.exists():
        with open(trace_path, newline="") as fh:
            res.meta["fitness_trace"] = [float(r["best_fitness"]) for r in csv.DictReader(fh)]
    return res


def write_table(path, header: list[str], rows) -> None:
    fh, w = _writer(Path(path))
    with fh:
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) and math.isfinite(v) else v for v in row])
