"""Regional characteristic ratios, cost decomposition and inter-model deviation."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import FeatureConfig
from .model import ScenarioModel
from .results import CostBreakdown, SystemResult

SUMMER, WINTER = "summer", "winter"


class ZeroDemandError(ValueError):
    """Raised when a ratio over hourly demand meets an hour with zero demand."""


@dataclass(frozen=True)
class RegionCharacteristics:
    pv_demand_ratio: float
    wind_demand_ratio: float
    summer_share: float
    winter_share: float


def vre_demand_ratio(capacity: float, profile, demand) -> float:
    """Mean over hours of capacity * profile_t / demand_t."""
    profile = np.asarray(profile, dtype=float)
    demand = np.asarray(demand, dtype=float)
    if profile.shape != demand.shape:
        raise ValueError(f"profile and demand lengths differ: {profile.shape} vs {demand.shape}")
    zero = np.flatnonzero(demand == 0)
    if len(zero):
        raise ZeroDemandError(f"demand is zero at hour {int(zero[0])}; ratio undefined")
    return float(np.mean(capacity * profile / demand))


def season_calendar(hours: int, year: int = 2019) -> np.ndarray:
    """Season label per hour.

    A full calendar year uses summer = 21 Mar to 20 Sep; any other horizon
    treats its first and last quarter as winter and the middle half as summer.
    """
    if hours in (8760, 8784):
        if hours == 8784 and year % 4:
            year = 2020
        start = dt.date(year, 1, 1)
        s0 = (dt.date(year, 3, 21) - start).days * 24
        s1 = (dt.date(year, 9, 21) - start).days * 24
        idx = np.arange(hours)
        return np.where((idx >= s0) & (idx < s1), SUMMER, WINTER)
    idx = np.arange(hours)
    return np.where((idx >= hours / 4) & (idx < 3 * hours / 4), SUMMER, WINTER)


def seasonal_shares(demand, calendar: Sequence[str]) -> tuple[float, float]:
    demand = np.asarray(demand, dtype=float)
    calendar = np.asarray(calendar)
    if calendar.shape != demand.shape:
        raise ValueError("calendar must label every hour of the demand series")
    total = demand.sum()
    if total == 0:
        raise ZeroDemandError("all-zero demand has no seasonal shares")
    summer = float(demand[calendar == SUMMER].sum() / total)
    return summer, 1.0 - summer


def region_characteristics(
    scenario: ScenarioModel,
    region_id: str,
    pv_techs: Iterable[str] | None = None,
    wind_techs: Iterable[str] | None = None,
) -> RegionCharacteristics:
    region = scenario.region(region_id)
    techs = list(region.vre_capacity)
    pv_techs = [t for t in techs if t.startswith("pv")] if pv_techs is None else list(pv_techs)
    wind_techs = [t for t in techs if t.startswith("wind")] if wind_techs is None else list(wind_techs)
    pv = sum(vre_demand_ratio(region.vre_capacity[t], region.vre_profile[t], region.demand) for t in pv_techs)
    wind = sum(vre_demand_ratio(region.vre_capacity[t], region.vre_profile[t], region.demand) for t in wind_techs)
    summer, winter = seasonal_shares(region.demand, season_calendar(scenario.hours))
    return RegionCharacteristics(float(pv), float(wind), summer, winter)


def deviation(expansions: Mapping[str, float]) -> float:
    """(max - min) / max across models; 0 when every model expands nothing."""
    vals = list(expansions.values())
    if len(vals) < 2:
        raise ValueError("deviation needs at least two model results")
    if any(v < 0 for v in vals):
        raise ValueError("expansions must be >= 0")
    hi, lo = max(vals), min(vals)
    if hi == 0:
        return 0.0
    return (hi - lo) / hi


def herfindahl(values: Iterable[float]) -> float:
    """Concentration of a nonnegative allocation; 0 for an all-zero one."""
    v = np.asarray(list(values), dtype=float)
    total = v.sum()
    if total <= 0:
        return 0.0
    share = v / total
    return float(np.sum(share * share))


def cost_breakdown(
    result: SystemResult,
    scenario: ScenarioModel,
    features: FeatureConfig,
    regions: Iterable[str] | None = None,
) -> CostBreakdown:
    """Recompute annual costs from primal quantities of ``result``.

    Restricting to ``regions`` drops lines unless both ends are included.
    """
    keep = set(result.regions if regions is None else regions)
    w = scenario.operating_weight
    invest = 0.0
    fix = 0.0
    exp = result.expansion
    for (r, tid), mw in exp.generation.items():
        if r not in keep:
            continue
        t = scenario.dispatchable(tid)
        invest += t.annuity * t.invest_cost * mw
        fix += t.fixed_om * mw
    for (r, sid), mwh in exp.storage_energy.items():
        if r not in keep:
            continue
        s = scenario.storage(sid)
        invest += s.annuity * s.energy_invest_cost * mwh
        fix += s.energy_fixed_om * mwh
    for (r, sid), mw in exp.storage_charge.items():
        if r not in keep:
            continue
        s = scenario.storage(sid)
        invest += s.annuity * s.charge_invest_cost * mw
        fix += s.charge_fixed_om * mw
    for (r, sid), mw in exp.storage_discharge.items():
        if r not in keep:
            continue
        s = scenario.storage(sid)
        invest += s.annuity * s.discharge_invest_cost * mw
        fix += s.discharge_fixed_om * mw
    for lid, mw in exp.lines.items():
        a, b = result.line_ends.get(lid, (None, None))
        if a in keep and b in keep:
            ln = scenario.line(lid)
            invest += ln.annuity * ln.expansion_cost * mw

    gen_cost = 0.0
    ramp_cost = 0.0
    for (r, tid), g in result.generation.items():
        if r not in keep:
            continue
        t = scenario.dispatchable(tid)
        gen_cost += t.var_cost * float(np.sum(g))
        if features.load_change_costs_enabled and t.load_change_cost > 0 and len(g) > 1:
            ramp_cost += t.load_change_cost * float(np.sum(np.abs(np.diff(g))))
    storage_cost = 0.0
    for (r, sid), d in result.discharge.items():
        if r not in keep:
            continue
        storage_cost += scenario.storage(sid).var_cost_discharge * float(np.sum(d))
    slack_cost = 0.0
    for r, u in result.unserved.items():
        if r in keep:
            slack_cost += scenario.slack_penalty * float(np.sum(u))
    detail = {
        "generation": w * gen_cost,
        "storage": w * storage_cost,
        "load_change": w * ramp_cost,
        "slack": w * slack_cost,
    }
    variable = detail["generation"] + detail["storage"] + detail["load_change"] + detail["slack"]
    return CostBreakdown(invest, fix, variable, detail)


def characteristics_rows(scenario: ScenarioModel) -> list[tuple[str, str, float]]:
    rows = []
    for r in scenario.region_ids:
        ch = region_characteristics(scenario, r)
        rows += [
            (r, "pv_demand_ratio", ch.pv_demand_ratio),
            (r, "wind_demand_ratio", ch.wind_demand_ratio),
            (r, "summer_share", ch.summer_share),
            (r, "winter_share", ch.winter_share),
        ]
    return rows
