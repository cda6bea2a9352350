"""Profile x use-case comparison runs, deviation tables and finding checks."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .features import (
    E2M2_CHARGE_RATIO,
    E2M2_E2P,
    PRESETS,
    Backend,
    FeatureConfig,
    Fixed,
    FixedFraction,
    Foresight,
    ModelProfile,
    TransmissionModel,
    ZeroStartFreeEnd,
)
from .formulation import build_lp, extract_result
from .heuristic import ESParams, evolve_capacities
from .lp import Status
from .metrics import deviation, herfindahl
from .model import ScenarioModel
from .results import SystemResult
from .scenario_io import fmt, read_result, write_result
from .solver import solve
from .usecases import use_case_template

REPORT_SCHEMA = "capexlab-comparison/1"

# Reference feature set; each variant flips exactly one feature relative to it.
REFERENCE = FeatureConfig(
    availability_enabled=False,
    load_change_costs_enabled=False,
    transmission_model=TransmissionModel.NTC,
    transmission_expansion=True,
)

VARIANTS: dict[str, ModelProfile] = {
    "ref": ModelProfile("ref", REFERENCE),
    "ref+availability": ModelProfile("ref+availability", REFERENCE.with_(availability_enabled=True)),
    "ref+fixed-e2p": ModelProfile(
        "ref+fixed-e2p",
        REFERENCE.with_(e2p_policy=Fixed(E2M2_E2P), charge_discharge_ratio=Fixed(E2M2_CHARGE_RATIO)),
    ),
    "ref+boundary50": ModelProfile("ref+boundary50", REFERENCE.with_(storage_boundary=FixedFraction(0.5))),
    "ref+zero-start": ModelProfile("ref+zero-start", REFERENCE.with_(storage_boundary=ZeroStartFreeEnd())),
    "ref+myopic": ModelProfile(
        "ref+myopic",
        REFERENCE.with_(storage_boundary=ZeroStartFreeEnd(), foresight=Foresight.MYOPIC),
        backend=Backend.HEURISTIC,
    ),
    "ref+dclf": ModelProfile("ref+dclf", REFERENCE.with_(transmission_model=TransmissionModel.DCLF)),
}

FINDING_IDS = ("F1", "F2", "F3", "F4", "F5", "F6")


class MissingCellsError(KeyError):
    pass


def resolve_profile(p) -> ModelProfile:
    if isinstance(p, ModelProfile):
        return p
    if p in VARIANTS:
        return VARIANTS[p]
    if p in PRESETS:
        return PRESETS[p]
    raise KeyError(f"unknown profile {p!r}; choose from {sorted(VARIANTS) + sorted(PRESETS)}")


@dataclass
class Cell:
    use_case: str
    profile: str
    status: str  # Optimal, Infeasible, ..., skipped, error
    result: SystemResult | None = None
    message: str = ""
    # heuristic cells: LP optimum of the same features under full foresight
    lp_bound: float | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None and self.status in ("Optimal", "Heuristic")

    @property
    def fitness(self) -> float:
        return self.result.costs.system_cost if self.result is not None else float("nan")


@dataclass
class ComparisonReport:
    scenario: str
    use_cases: list[str]
    profiles: list[ModelProfile]
    cells: dict[tuple[str, str], Cell] = field(default_factory=dict)
    # technology id -> base / peak / short / long
    roles: dict[str, str] = field(default_factory=dict)

    @property
    def profile_names(self) -> list[str]:
        return [p.name for p in self.profiles]

    def cell(self, use_case: str, profile: str) -> Cell:
        return self.cells[(use_case, profile)]

    def expansion_rows(self) -> list[tuple]:
        """(use_case, region, technology, profile, expansion_mw, energy_mwh) for solved cells."""
        rows = []
        for uc in self.use_cases:
            for p in self.profile_names:
                c = self.cells[(uc, p)]
                if not c.ok:
                    continue
                exp = c.result.expansion
                for (r, t), v in exp.generation.items():
                    rows.append((uc, r, t, p, v, ""))
                for (r, s), e in exp.storage_energy.items():
                    rows.append((uc, r, s, p, exp.storage_discharge.get((r, s), 0.0), e))
                for lid, v in exp.lines.items():
                    rows.append((uc, lid, "transmission", p, v, ""))
        return rows

    def deviations(self) -> list[tuple[str, str, str, float]]:
        """Deviation per (use case, region, technology) over participating solved profiles.

        Storage is compared on energy capacity, everything else on MW.
        """
        groups: dict[tuple[str, str, str], dict[str, float]] = {}
        for uc, r, t, p, mw, mwh in self.expansion_rows():
            groups.setdefault((uc, r, t), {})[p] = mwh if mwh != "" else mw
        out = []
        for (uc, r, t), vals in groups.items():
            if len(vals) >= 2:
                out.append((uc, r, t, deviation({k: max(v, 0.0) for k, v in vals.items()})))
        return out

    def cost_rows(self) -> list[tuple]:
        rows = []
        for uc in self.use_cases:
            for p in self.profile_names:
                c = self.cells[(uc, p)]
                if c.ok:
                    rows += [(uc, p, k, v) for k, v in c.result.costs.as_rows()]
        return rows


def _run_cell(scenario: ScenarioModel, uc_id: str, profile: ModelProfile, es_params: ESParams, seed: int,
              lp_bound: bool) -> Cell:
    if not profile.participates(uc_id):
        return Cell(uc_id, profile.name, "skipped", message="profile does not take part in this use case")
    try:
        use_case = use_case_template(uc_id, scenario)
        if profile.backend is Backend.LP:
            lp, index = build_lp(scenario, use_case, profile.features)
            sol = solve(lp)
            if sol.status is not Status.OPTIMAL:
                return Cell(uc_id, profile.name, sol.status.value, message=f"LP ended {sol.status.value}")
            res = extract_result(sol, index, scenario)
            return Cell(uc_id, profile.name, "Optimal", res)
        cand, res = evolve_capacities(scenario, use_case, profile.features, es_params, seed)
        res.status = "Heuristic"
        bound = None
        if lp_bound:
            full = profile.features.with_(foresight=Foresight.FULL)
            lp, index = build_lp(scenario, use_case, full)
            sol = solve(lp)
            if sol.status is Status.OPTIMAL:
                bound = sol.objective
        return Cell(uc_id, profile.name, "Heuristic", res, lp_bound=bound)
    except Exception as e:  # one failing cell must not abort the matrix
        return Cell(uc_id, profile.name, "error", message=f"{type(e).__name__}: {e}")


def _pool_size(n: int, workers: int | None) -> int:
    cap = os.environ.get("CAPEXLAB_THREADS")
    size = workers or (int(cap) if cap and cap.isdigit() else 1)
    if cap and cap.isdigit():
        size = min(size, int(cap))
    return max(1, min(size, n))


def run_matrix(
    scenario: ScenarioModel,
    use_cases: Sequence[str],
    profiles: Sequence,
    es_params: ESParams = ESParams(),
    seed: int = 0,
    workers: int | None = None,
    lp_bound: bool = True,
) -> ComparisonReport:
    if not use_cases:
        raise ValueError("run_matrix needs at least one use case")
    if not profiles:
        raise ValueError("run_matrix needs at least one profile")
    profs = [resolve_profile(p) for p in profiles]
    names = [p.name for p in profs]
    if len(set(names)) != len(names):
        raise ValueError(f"profiles must be distinct, got {names}")
    jobs = [(uc, p) for uc in use_cases for p in profs]
    size = _pool_size(len(jobs), workers)
    if size == 1:
        cells = [_run_cell(scenario, uc, p, es_params, seed, lp_bound) for uc, p in jobs]
    else:
        with ThreadPoolExecutor(size) as pool:
            cells = list(pool.map(lambda j: _run_cell(scenario, j[0], j[1], es_params, seed, lp_bound), jobs))
    roles = {t.id: t.role for t in scenario.dispatchables} | {s.id: s.role for s in scenario.storages}
    report = ComparisonReport(scenario.name, list(use_cases), profs, roles=roles)
    for c in cells:
        report.cells[(c.use_case, c.profile)] = c
    return report


# ---------------------------------------------------------------- findings


@dataclass(frozen=True)
class FindingCheck:
    id: str
    passed: bool
    measured: dict
    description: str = ""

    def line(self) -> str:
        vals = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.measured.items())
        return f"{self.id} {'PASS' if self.passed else 'FAIL'} {self.description} [{vals}]"


def _need(report: ComparisonReport, uc: str, *profiles: str) -> list[SystemResult]:
    out = []
    for p in profiles:
        c = report.cells.get((uc, p))
        if c is None or not c.ok:
            raise MissingCellsError(f"finding needs a solved cell ({uc}, {p})")
        out.append(c.result)
    return out


def _by_role(result: SystemResult, roles: dict[str, str], role: str, what: str) -> float:
    exp = result.expansion
    src = exp.generation if what == "gen" else exp.storage_energy
    return float(sum(v for (_, t), v in src.items() if roles.get(t) == role))


def finding_checks(
    report: ComparisonReport,
    roles: dict[str, str] | None = None,
    hhi_margin: float = 0.0,
    require_all: bool = True,
) -> list[FindingCheck]:
    """Directional checks of the six mechanisms on a report.

    ``roles`` overrides the technology roles stored in the report. ``hhi_margin`` is the amount by which the myopic
    concentration must exceed the LP one.
    """
    checks = []
    rl = report.roles if roles is None else roles

    def attempt(fid, fn):
        try:
            checks.append(fn())
        except MissingCellsError:
            if require_all:
                raise

    def f1():
        on, off = _need(report, "I", "ref+availability", "ref")
        peak_on, peak_off = _by_role(on, rl, "peak", "gen"), _by_role(off, rl, "peak", "gen")
        base_on, base_off = _by_role(on, rl, "base", "gen"), _by_role(off, rl, "base", "gen")
        total_on, total_off = peak_on + base_on, peak_off + base_off
        return FindingCheck("F1", total_on > total_off, {
            "dispatchable_on": total_on, "dispatchable_off": total_off,
            "ratio": total_on / total_off if total_off else float("inf"),
            "peak_on": peak_on, "peak_off": peak_off,
        }, "limited availability needs more dispatchable capacity")

    def share(res, rl):
        b = _by_role(res, rl, "short", "sto")
        lg = _by_role(res, rl, "long", "sto")
        return b / (b + lg) if b + lg > 0 else 0.0

    def f2():
        fixed, free = _need(report, "II", "ref+fixed-e2p", "ref")
        s_fixed, s_free = share(fixed, rl), share(free, rl)
        return FindingCheck("F2", s_fixed > s_free, {"short_share_fixed": s_fixed, "short_share_free": s_free},
                            "fixed E2P shifts storage energy to short duration")

    def f3():
        b50, ref = _need(report, "II", "ref+boundary50", "ref")
        c50, cref = _by_role(b50, rl, "long", "sto"), _by_role(ref, rl, "long", "sto")
        obj50, objref = b50.costs.system_cost, ref.costs.system_cost
        return FindingCheck("F3", c50 >= cref - 1e-6 and obj50 >= objref * (1 - 1e-9), {
            "long_energy_boundary50": c50, "long_energy_ref": cref,
            "cost_boundary50": obj50, "cost_ref": objref,
        }, "50% boundary levels keep long-duration capacity from shrinking")

    def f4():
        my, lp = _need(report, "III", "ref+myopic", "ref")
        bat_my, bat_lp = _by_role(my, rl, "short", "sto"), _by_role(lp, rl, "short", "sto")
        base_my, base_lp = _by_role(my, rl, "base", "gen"), _by_role(lp, rl, "base", "gen")
        return FindingCheck("F4", bat_my <= bat_lp + 1e-9 and base_my >= base_lp - 1e-9, {
            "battery_myopic": bat_my, "battery_lp": bat_lp, "base_myopic": base_my, "base_lp": base_lp,
        }, "myopic dispatch favours base plants over storage")

    def f5():
        dc, ntc = _need(report, "IV", "ref+dclf", "ref")
        e_dc, e_ntc = dc.expansion.total_lines(), ntc.expansion.total_lines()
        return FindingCheck("F5", e_dc >= e_ntc - 1e-7 * max(1.0, e_ntc), {
            "lines_dclf": e_dc, "lines_ntc": e_ntc,
        }, "DC load flow expands at least as much grid as NTC")

    def f6():
        my, lp = _need(report, "IV", "ref+myopic", "ref")
        h_my, h_lp = herfindahl(my.expansion.lines.values()), herfindahl(lp.expansion.lines.values())
        return FindingCheck("F6", h_my > h_lp + hhi_margin, {
            "hhi_myopic": h_my, "hhi_lp": h_lp, "margin": hhi_margin,
        }, "myopic grid expansion concentrates on fewer lines")

    for fid, fn in zip(FINDING_IDS, (f1, f2, f3, f4, f5, f6)):
        attempt(fid, fn)
    return checks


# ------------------------------------------------------------------ output


def _profile_rows(report: ComparisonReport) -> list[dict]:
    return [p.to_dict() for p in report.profiles]


def write_comparison(report: ComparisonReport, directory) -> Path:
    """CSV tables, one result directory per solved cell, and an SVG summary."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema": REPORT_SCHEMA,
        "scenario": report.scenario,
        "use_cases": list(report.use_cases),
        "profiles": _profile_rows(report),
        "roles": dict(report.roles),
    }
    (d / "report.yaml").write_text(yaml.safe_dump(meta, sort_keys=False))
    with open(d / "cells.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["use_case", "profile", "status", "system_cost", "lp_bound", "message"])
        for uc in report.use_cases:
            for p in report.profile_names:
                c = report.cells[(uc, p)]
                w.writerow([uc, p, c.status, fmt(c.fitness) if c.ok else "",
                            "" if c.lp_bound is None else fmt(c.lp_bound), c.message])
                if c.ok:
                    write_result(c.result, d / "cells" / uc / p)
    with open(d / "expansion.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["use_case", "region", "technology", "profile", "expansion_mw", "energy_mwh"])
        for uc, r, t, p, mw, mwh in report.expansion_rows():
            w.writerow([uc, r, t, p, fmt(mw), "" if mwh == "" else fmt(mwh)])
    with open(d / "deviation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["use_case", "region", "technology", "deviation"])
        for uc, r, t, v in report.deviations():
            w.writerow([uc, r, t, fmt(v)])
    with open(d / "costs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["use_case", "profile", "component", "value"])
        for uc, p, k, v in report.cost_rows():
            w.writerow([uc, p, k, fmt(v)])
    checks = finding_checks(report, require_all=False)
    write_findings(checks, d / "findings.csv")
    (d / "summary.svg").write_text(summary_svg(report))
    return d


def write_findings(checks: Iterable[FindingCheck], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["finding", "passed", "measured"])
        for c in checks:
            measured = ";".join(f"{k}={fmt(v) if isinstance(v, float) else v}" for k, v in c.measured.items())
            w.writerow([c.id, "true" if c.passed else "false", measured])


def read_comparison(directory) -> ComparisonReport:
    d = Path(directory)
    meta = yaml.safe_load((d / "report.yaml").read_text())
    if meta.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"{d / 'report.yaml'}: not a comparison report")
    profiles = [ModelProfile.from_dict(p) for p in meta["profiles"]]
    report = ComparisonReport(meta["scenario"], list(meta["use_cases"]), profiles,
                              roles=dict(meta.get("roles") or {}))
    with open(d / "cells.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            uc, p = row["use_case"], row["profile"]
            res = None
            cell_dir = d / "cells" / uc / p
            if cell_dir.exists():
                res = read_result(cell_dir)
            bound = float(row["lp_bound"]) if row["lp_bound"] else None
            report.cells[(uc, p)] = Cell(uc, p, row["status"], res, row["message"], bound)
    return report


# --------------------------------------------------------------------- svg

_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c")


def summary_svg(report: ComparisonReport) -> str:
    """Grouped bars of total expansion per technology and profile, one panel per use case."""
    panels = []
    for uc in report.use_cases:
        totals: dict[str, dict[str, float]] = {}
        for u, _, t, p, mw, mwh in report.expansion_rows():
            if u != uc:
                continue
            totals.setdefault(t, {}).setdefault(p, 0.0)
            totals[t][p] += mwh if mwh != "" else mw
        panels.append((uc, totals))
    width, panel_h, left, top = 760, 230, 70, 30
    height = top + panel_h * max(len(panels), 1) + 40
    names = report.profile_names
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{left}" y="18" font-size="13">Expansion per profile ({report.scenario}); '
        f'storage in MWh, plants and lines in MW</text>',
    ]
    for k, name in enumerate(names):
        x = left + k * 95
        out.append(f'<rect x="{x}" y="{height - 22}" width="10" height="10" fill="{_PALETTE[k % len(_PALETTE)]}"/>')
        out.append(f'<text x="{x + 14}" y="{height - 13}">{name}</text>')
    for i, (uc, totals) in enumerate(panels):
        y0 = top + i * panel_h
        plot_h = panel_h - 60
        base_y = y0 + 20 + plot_h
        out.append(f'<text x="10" y="{y0 + 14}" font-size="12">Use case {uc}</text>')
        out.append(f'<line x1="{left}" y1="{base_y}" x2="{width - 20}" y2="{base_y}" stroke="#333"/>')
        techs = list(totals)
        if not techs:
            out.append(f'<text x="{left + 10}" y="{base_y - 10}">no solved cells</text>')
            continue
        vmax = max((v for t in techs for v in totals[t].values()), default=0.0) or 1.0
        group_w = (width - 20 - left) / len(techs)
        bar_w = max(min(group_w * 0.8 / max(len(names), 1), 30), 2)
        for g, t in enumerate(techs):
            gx = left + g * group_w + group_w * 0.1
            for k, p in enumerate(names):
                v = totals[t].get(p)
                if v is None:
                    continue
                h = plot_h * max(v, 0.0) / vmax
                out.append(
                    f'<rect x="{gx + k * bar_w:.2f}" y="{base_y - h:.2f}" width="{bar_w:.2f}" height="{h:.2f}" '
                    f'fill="{_PALETTE[k % len(_PALETTE)]}"><title>{p} {t}: {v:.4g}</title></rect>'
                )
            out.append(f'<text x="{gx:.2f}" y="{base_y + 14}">{t}</text>')
        out.append(f'<text x="{left - 5}" y="{y0 + 24}" text-anchor="end">{vmax:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
