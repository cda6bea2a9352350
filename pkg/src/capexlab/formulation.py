"""Translate (scenario, use case, features) into a sparse LP and back.

Capacity columns hold endogenous expansion on top of preinstalled capacity,
so the objective carries only expansion costs. Technologies that are fixed in
the use case get no capacity column; their limits become column bounds.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .features import (
    FeatureConfig,
    Fixed,
    FixedFraction,
    Foresight,
    FreeBoundary,
    FreeEqual,
    TransmissionModel,
    ZeroStartFreeEnd,
)
from .lp import EQ, LE, LPBuilder, LPInstance, LPSolution, Status
from .metrics import cost_breakdown
from .model import ScenarioModel, validate_scenario
from .results import Capacities, SystemResult
from .usecases import UseCase, effective_features

INF = np.inf

KINDS = (
    "capacity_gen",
    "capacity_storage_energy",
    "capacity_storage_charge",
    "capacity_storage_discharge",
    "capacity_line_expansion",
    "generation",
    "vre_used",
    "charge",
    "discharge",
    "storage_level",
    "flow",
    "angle",
    "ramp_up",
    "ramp_down",
    "slack_unserved",
)


class FormulationError(ValueError):
    pass


@dataclass
class VariableIndex:
    """Semantic key ``(kind, owner, tech, hour)`` to column, plus capacity bookkeeping."""

    keys: list[tuple] = field(default_factory=list)
    _pos: dict[tuple, int] = field(default_factory=dict, repr=False)
    features: FeatureConfig | None = None
    use_case: UseCase | None = None
    # (region, tech) -> (preinstalled or fixed MW, expansion column or None)
    gen_caps: dict = field(default_factory=dict)
    # (region, tech) -> {"energy"|"charge"|"discharge": (pre, column or None)}
    storage_caps: dict = field(default_factory=dict)
    # line id -> (existing MW, expansion column or None)
    line_caps: dict = field(default_factory=dict)

    def add(self, key: tuple) -> int:
        if key in self._pos:
            raise KeyError(f"duplicate variable key {key}")
        self._pos[key] = len(self.keys)
        self.keys.append(key)
        return self._pos[key]

    def __getitem__(self, key: tuple) -> int:
        return self._pos[key]

    def __contains__(self, key) -> bool:
        return key in self._pos

    def __len__(self) -> int:
        return len(self.keys)

    def get(self, key, default=None):
        return self._pos.get(key, default)

    def count(self, kind: str) -> int:
        return sum(1 for k in self.keys if k[0] == kind)

    def hourly(self, kind: str, owner: str, tech: str | None, hours: range) -> np.ndarray:
        return np.array([self._pos[(kind, owner, tech, t)] for t in hours], dtype=np.int64)


def _name(key: tuple) -> str:
    kind, owner, tech, hour = key
    parts = [p for p in (owner, tech) if p is not None]
    if hour is not None:
        parts.append(str(hour))
    return f"{kind}[{','.join(parts)}]"


def _components(regions: list[str], lines) -> list[list[str]]:
    adj: dict[str, set[str]] = {r: set() for r in regions}
    for ln in lines:
        adj[ln.from_region].add(ln.to_region)
        adj[ln.to_region].add(ln.from_region)
    seen: set[str] = set()
    comps = []
    for r in sorted(regions):
        if r in seen or not adj[r]:
            continue
        comp, queue = [], deque([r])
        seen.add(r)
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in sorted(adj[u]):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def check_features(scenario: ScenarioModel, features: FeatureConfig) -> None:
    if features.foresight is Foresight.MYOPIC:
        raise FormulationError("myopic foresight is only available with the heuristic backend")
    if features.transmission_model is TransmissionModel.DCLF:
        missing = [ln.id for ln in scenario.lines if ln.susceptance is None]
        if missing:
            raise FormulationError(f"DCLF needs susceptance on every line; missing on {missing}")
    storage_ids = {s.id for s in scenario.storages}
    for label, policy in (("E2P", features.e2p_policy), ("charge/discharge", features.charge_discharge_ratio)):
        if isinstance(policy, Fixed):
            absent = sorted(set(policy.values) - storage_ids)
            if absent:
                raise FormulationError(f"fixed {label} ratio given for unknown storage {absent}")
            if any(v <= 0 for v in policy.values.values()):
                raise FormulationError(f"fixed {label} ratios must be > 0")


def build_lp(
    scenario: ScenarioModel, use_case: UseCase, features: FeatureConfig
) -> tuple[LPInstance, VariableIndex]:
    violations = validate_scenario(scenario)
    if violations:
        raise FormulationError("invalid scenario: " + "; ".join(map(str, violations)))
    features = effective_features(features, use_case)
    check_features(scenario, features)

    T = scenario.hours
    w = scenario.operating_weight
    hours = range(T)
    lp = LPBuilder()
    index = VariableIndex(features=features, use_case=use_case)

    def var(key, lb=0.0, ub=INF, cost=0.0) -> int:
        j = lp.add_var(_name(key), lb, ub, cost)
        index.add(key)
        return j

    def avail(tech) -> float:
        return tech.availability if features.availability_enabled else 1.0

    techs = use_case.techs
    balance = {r.id: [[] for _ in hours] for r in scenario.regions}

    for region in scenario.regions:
        r = region.id
        terms = balance[r]

        for v, cap in region.vre_capacity.items():
            if cap <= 0:
                continue
            pot = cap * region.vre_profile[v]
            for t in hours:
                j = var(("vre_used", r, v, t), 0.0, float(pot[t]))
                terms[t].append((j, 1.0))

        for g in scenario.dispatchables:
            if g.id not in techs:
                continue
            a = avail(g)
            if use_case.is_expandable(g.id):
                pre = region.preinstalled.get(g.id, 0.0)
                cap = var(("capacity_gen", r, g.id, None), cost=g.annuity * g.invest_cost + g.fixed_om)
            else:
                pre = use_case.fixed_capacity.get((r, g.id), region.preinstalled.get(g.id, 0.0))
                cap = None
            index.gen_caps[(r, g.id)] = (pre, cap)
            gen = []
            for t in hours:
                j = var(("generation", r, g.id, t), 0.0, a * pre if cap is None else INF, w * g.var_cost)
                if cap is not None:
                    lp.add_row([(j, 1.0), (cap, -a)], LE, a * pre, f"gen_cap[{r},{g.id},{t}]")
                terms[t].append((j, 1.0))
                gen.append(j)
            if features.load_change_costs_enabled and g.load_change_cost > 0:
                # hour 0 is compared against itself, so ramping starts at hour 1
                for t in range(1, T):
                    up = var(("ramp_up", r, g.id, t), cost=w * g.load_change_cost)
                    dn = var(("ramp_down", r, g.id, t), cost=w * g.load_change_cost)
                    lp.add_row(
                        [(up, 1.0), (dn, -1.0), (gen[t], -1.0), (gen[t - 1], 1.0)],
                        EQ, 0.0, f"ramp[{r},{g.id},{t}]",
                    )

        for s in scenario.storages:
            if s.id not in techs:
                continue
            a = avail(s)
            lim = a / s.discharge_eff if features.level_limit_discharge_eff else a
            pre_p = region.preinstalled.get(s.id, 0.0)
            pre_e = region.preinstalled_energy.get(s.id, 0.0)
            if use_case.is_expandable(s.id):
                ann = s.annuity
                cap_e = var(("capacity_storage_energy", r, s.id, None), cost=ann * s.energy_invest_cost + s.energy_fixed_om)
                cap_c = var(("capacity_storage_charge", r, s.id, None), cost=ann * s.charge_invest_cost + s.charge_fixed_om)
                cap_d = var(("capacity_storage_discharge", r, s.id, None), cost=ann * s.discharge_invest_cost + s.discharge_fixed_om)
                h = features.e2p_policy.get(s.id) if isinstance(features.e2p_policy, Fixed) else None
                if h is not None:
                    lp.add_row([(cap_e, 1.0), (cap_d, -h)], EQ, h * pre_p - pre_e, f"e2p[{r},{s.id}]")
                rho = (
                    features.charge_discharge_ratio.get(s.id)
                    if isinstance(features.charge_discharge_ratio, Fixed)
                    else None
                )
                if rho is not None:
                    lp.add_row([(cap_c, 1.0), (cap_d, -rho)], EQ, rho * pre_p - pre_p, f"cd_ratio[{r},{s.id}]")
            else:
                cap_e = cap_c = cap_d = None
            index.storage_caps[(r, s.id)] = {
                "energy": (pre_e, cap_e),
                "charge": (pre_p, cap_c),
                "discharge": (pre_p, cap_d),
            }
            levels = []
            for t in range(T + 1):
                j = var(("storage_level", r, s.id, t), 0.0, lim * pre_e if cap_e is None else INF)
                if cap_e is not None:
                    lp.add_row([(j, 1.0), (cap_e, -lim)], LE, lim * pre_e, f"level_cap[{r},{s.id},{t}]")
                levels.append(j)
            for t in hours:
                ch = var(("charge", r, s.id, t), 0.0, pre_p if cap_c is None else INF)
                dis = var(("discharge", r, s.id, t), 0.0, pre_p if cap_d is None else INF, w * s.var_cost_discharge)
                if cap_c is not None:
                    lp.add_row([(ch, 1.0), (cap_c, -1.0)], LE, pre_p, f"charge_cap[{r},{s.id},{t}]")
                if cap_d is not None:
                    lp.add_row([(dis, 1.0), (cap_d, -1.0)], LE, pre_p, f"discharge_cap[{r},{s.id},{t}]")
                lp.add_row(
                    [(levels[t + 1], 1.0), (levels[t], -1.0), (ch, -s.charge_eff), (dis, 1.0 / s.discharge_eff)],
                    EQ, 0.0, f"dynamics[{r},{s.id},{t}]",
                )
                terms[t].append((dis, 1.0))
                terms[t].append((ch, -1.0))
            policy = features.storage_boundary
            if isinstance(policy, FixedFraction):
                f = policy.fraction
                for end, j in (("start", levels[0]), ("end", levels[T])):
                    row = [(j, 1.0)] + ([(cap_e, -f)] if cap_e is not None else [])
                    lp.add_row(row, EQ, f * pre_e, f"boundary_{end}[{r},{s.id}]")
            elif isinstance(policy, FreeEqual):
                lp.add_row([(levels[0], 1.0), (levels[T], -1.0)], EQ, 0.0, f"boundary_cycle[{r},{s.id}]")
            elif isinstance(policy, ZeroStartFreeEnd):
                lp.set_bounds(levels[0], 0.0, 0.0)
            elif not isinstance(policy, FreeBoundary):
                raise FormulationError(f"unknown storage boundary policy {policy!r}")

    tm = features.transmission_model
    if tm is not TransmissionModel.NONE and scenario.lines:
        line_cap = {}
        for ln in scenario.lines:
            capx = None
            if features.transmission_expansion and use_case.lines_expandable and ln.expandable:
                capx = var(("capacity_line_expansion", ln.id, None, None), cost=ln.annuity * ln.expansion_cost)
            index.line_caps[ln.id] = (ln.existing_capacity, capx)
            line_cap[ln.id] = capx
        if tm is TransmissionModel.NTC:
            for ln in scenario.lines:
                cap0, capx = ln.existing_capacity, line_cap[ln.id]
                for t in hours:
                    if capx is None:
                        f = var(("flow", ln.id, None, t), -cap0, cap0)
                    else:
                        f = var(("flow", ln.id, None, t), -INF, INF)
                        lp.add_row([(f, 1.0), (capx, -1.0)], LE, cap0, f"flow_max[{ln.id},{t}]")
                        lp.add_row([(f, -1.0), (capx, -1.0)], LE, cap0, f"flow_min[{ln.id},{t}]")
                    balance[ln.to_region][t].append((f, 1.0))
                    balance[ln.from_region][t].append((f, -1.0))
        else:
            refs = {comp[0] for comp in _components(scenario.region_ids, scenario.lines)}
            touched = sorted({ln.from_region for ln in scenario.lines} | {ln.to_region for ln in scenario.lines})
            angle = {}
            for r in touched:
                for t in hours:
                    bound = 0.0 if r in refs else INF
                    angle[(r, t)] = var(("angle", r, None, t), -bound, bound)
            for ln in scenario.lines:
                B = ln.susceptance
                cap0, capx = ln.existing_capacity, line_cap[ln.id]
                for t in hours:
                    af, at = angle[(ln.from_region, t)], angle[(ln.to_region, t)]
                    extra = [(capx, -1.0)] if capx is not None else []
                    lp.add_row([(af, B), (at, -B)] + extra, LE, cap0, f"flow_max[{ln.id},{t}]")
                    lp.add_row([(af, -B), (at, B)] + extra, LE, cap0, f"flow_min[{ln.id},{t}]")
                    balance[ln.to_region][t] += [(af, B), (at, -B)]
                    balance[ln.from_region][t] += [(af, -B), (at, B)]

    for region in scenario.regions:
        r = region.id
        for t in hours:
            u = var(("slack_unserved", r, None, t), cost=w * scenario.slack_penalty)
            balance[r][t].append((u, 1.0))
            lp.add_row(balance[r][t], EQ, float(region.demand[t]), f"balance[{r},{t}]")

    return lp.build(), index


def extract_result(
    solution: LPSolution, index: VariableIndex, scenario: ScenarioModel
) -> SystemResult:
    if solution.status is not Status.OPTIMAL:
        raise FormulationError(f"cannot extract a result from a {solution.status.value} LP")
    x = solution.x
    T = scenario.hours
    hours = range(T)
    features = index.features

    def hourly(kind, owner, tech, rng=hours) -> np.ndarray:
        return np.maximum(x[index.hourly(kind, owner, tech, rng)], 0.0) + 0.0

    def value(col) -> float:
        return 0.0 if col is None else max(float(x[col]), 0.0) + 0.0

    cap, exp = Capacities(), Capacities()
    out = SystemResult(hours=T, capacity=cap, expansion=exp, backend="lp")
    for region in scenario.regions:
        r = region.id
        out.demand[r] = np.array(region.demand, dtype=float)
        for v, vcap in region.vre_capacity.items():
            if vcap <= 0:
                continue
            used = hourly("vre_used", r, v)
            out.vre_used[(r, v)] = used
            out.curtailment[(r, v)] = np.maximum(region.vre_potential(v) - used, 0.0)
        out.unserved[r] = hourly("slack_unserved", r, None)

    for key, (pre, col) in index.gen_caps.items():
        r, g = key
        exp.generation[key] = value(col)
        cap.generation[key] = pre + exp.generation[key]
        out.generation[key] = hourly("generation", r, g)

    for key, parts in index.storage_caps.items():
        r, s = key
        for name, target_cap, target_exp in (
            ("energy", cap.storage_energy, exp.storage_energy),
            ("charge", cap.storage_charge, exp.storage_charge),
            ("discharge", cap.storage_discharge, exp.storage_discharge),
        ):
            pre, col = parts[name]
            target_exp[key] = value(col)
            target_cap[key] = pre + target_exp[key]
        out.charge[key] = hourly("charge", r, s)
        out.discharge[key] = hourly("discharge", r, s)
        out.level[key] = hourly("storage_level", r, s, range(T + 1))

    for ln in scenario.lines:
        if ln.id not in index.line_caps:
            continue
        existing, col = index.line_caps[ln.id]
        exp.lines[ln.id] = value(col)
        cap.lines[ln.id] = existing + exp.lines[ln.id]
        out.line_ends[ln.id] = (ln.from_region, ln.to_region)
        if features.transmission_model is TransmissionModel.NTC:
            out.flow[ln.id] = x[index.hourly("flow", ln.id, None, hours)].copy()
        else:
            af = x[index.hourly("angle", ln.from_region, None, hours)]
            at = x[index.hourly("angle", ln.to_region, None, hours)]
            out.flow[ln.id] = ln.susceptance * (af - at)

    out.costs = cost_breakdown(out, scenario, features)
    out.objective = solution.objective
    out.meta["iterations"] = solution.iterations
    out.meta["features"] = features.to_dict()
    return out
