"""Myopic pre-ordered dispatch and an evolutionary search over capacities.

Each hour is settled before the next one is looked at. The dispatch order is
local VRE, storage charging from surplus, exports of surplus, local storage
discharge, imports, local merit order and finally unserved energy.
"""

from __future__ import annotations

import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureConfig, Fixed, TransmissionModel, ZeroStartFreeEnd
from .metrics import cost_breakdown
from .model import ScenarioModel, TransmissionLine, validate_scenario
from .results import Capacities, SystemResult
from .usecases import UseCase, effective_features

EPS = 1e-12


class HeuristicConfigError(ValueError):
    pass


# ---------------------------------------------------------------- network


def _adjacency(network) -> dict[str, set[str]]:
    if isinstance(network, ScenarioModel):
        adj = {r: set() for r in network.region_ids}
        edges = [(ln.from_region, ln.to_region) for ln in network.lines]
    elif isinstance(network, dict):
        return {k: set(v) for k, v in network.items()}
    else:
        adj = {}
        edges = []
        for e in network:
            a, b = (e.from_region, e.to_region) if isinstance(e, TransmissionLine) else e
            edges.append((a, b))
    for a, b in edges:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return adj


def _bfs(adj: dict[str, set[str]], source: str) -> tuple[dict[str, int], dict[str, str]]:
    dist, parent = {source: 0}, {}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in sorted(adj[u]):
            if v not in dist:
                dist[v] = dist[u] + 1
                parent[v] = u
                queue.append(v)
    return dist, parent


def rank_neighbors(network, region: str) -> list[str]:
    """Other regions by hop distance, ties broken by id; unreachable ones are left out.

    ``network`` is a scenario, an iterable of lines or region pairs, or an
    adjacency mapping.
    """
    adj = _adjacency(network)
    if region not in adj:
        raise KeyError(f"region {region!r} is not in the network")
    dist, _ = _bfs(adj, region)
    return sorted((r for r in dist if r != region), key=lambda r: (dist[r], r))


@dataclass
class _Grid:
    """Line residuals along shortest-hop paths; flow sign follows from -> to."""

    lines: dict[tuple[str, str], tuple[str, int]]  # (a, b) -> (line id, +1 / -1)
    cap: dict[str, float]
    paths: dict[tuple[str, str], list[str]]
    ranks: dict[str, list[str]]
    flow: dict[str, float] = field(default_factory=dict)

    @classmethod
    def build(cls, scenario: ScenarioModel, capacity: dict[str, float]):
        lines = {}
        adj = {r: set() for r in scenario.region_ids}
        for ln in scenario.lines:
            if ln.id not in capacity:
                continue
            # parallel lines between one pair: keep the first, lexically
            lines.setdefault((ln.from_region, ln.to_region), (ln.id, 1))
            lines.setdefault((ln.to_region, ln.from_region), (ln.id, -1))
            adj[ln.from_region].add(ln.to_region)
            adj[ln.to_region].add(ln.from_region)
        paths = {}
        for src in adj:
            _, parent = _bfs(adj, src)
            for dst in parent:
                node, path = dst, [dst]
                while node != src:
                    node = parent[node]
                    path.append(node)
                paths[(src, dst)] = path[::-1]
        ranks = {r: rank_neighbors(adj, r) for r in adj}
        return cls(lines, dict(capacity), paths, ranks)

    def reset(self):
        self.flow = {lid: 0.0 for lid in self.cap}

    def headroom(self, path: list[str]) -> float:
        room = np.inf
        for a, b in zip(path, path[1:]):
            lid, sign = self.lines[(a, b)]
            room = min(room, self.cap[lid] - sign * self.flow[lid])
        return max(room, 0.0)

    def push(self, path: list[str], amount: float) -> None:
        for a, b in zip(path, path[1:]):
            lid, sign = self.lines[(a, b)]
            self.flow[lid] += sign * amount


# --------------------------------------------------------------- dispatch


def _check_features(scenario: ScenarioModel, features: FeatureConfig) -> None:
    if not isinstance(features.storage_boundary, ZeroStartFreeEnd):
        raise HeuristicConfigError("myopic dispatch starts storage empty; use ZeroStartFreeEnd")
    if features.transmission_model is TransmissionModel.DCLF:
        raise HeuristicConfigError("myopic dispatch routes power as transport flows; DCLF is unsupported")


def _default_expansion(scenario: ScenarioModel, capacities: Capacities) -> Capacities:
    exp = Capacities()
    for (r, t), v in capacities.generation.items():
        exp.generation[(r, t)] = max(v - scenario.region(r).preinstalled.get(t, 0.0), 0.0)
    for (r, s), v in capacities.storage_energy.items():
        exp.storage_energy[(r, s)] = max(v - scenario.region(r).preinstalled_energy.get(s, 0.0), 0.0)
    for src, dst in (
        (capacities.storage_charge, exp.storage_charge),
        (capacities.storage_discharge, exp.storage_discharge),
    ):
        for (r, s), v in src.items():
            dst[(r, s)] = max(v - scenario.region(r).preinstalled.get(s, 0.0), 0.0)
    for lid, v in capacities.lines.items():
        exp.lines[lid] = max(v - scenario.line(lid).existing_capacity, 0.0)
    return exp


def dispatch_myopic(
    scenario: ScenarioModel,
    capacities: Capacities,
    features: FeatureConfig,
    expansion: Capacities | None = None,
) -> SystemResult:
    """Hour-by-hour rule-based operation of the given installed capacities.

    Technologies absent from ``capacities`` do not exist. ``expansion`` is the
    endogenous part used for costs; by default capacity above preinstalled.
    """
    _check_features(scenario, features)
    T = scenario.hours
    regions = scenario.region_ids
    use_lines = features.transmission_model is TransmissionModel.NTC
    line_caps = {lid: c for lid, c in capacities.lines.items()} if use_lines else {}
    grid = _Grid.build(scenario, line_caps)

    def avail(tech) -> float:
        return tech.availability if features.availability_enabled else 1.0

    # per region: merit order of (key, derated capacity, var_cost)
    plants = {r: [] for r in regions}
    for (r, tid), cap in capacities.generation.items():
        g = scenario.dispatchable(tid)
        plants[r].append(((r, tid), avail(g) * cap, g.var_cost))
    for r in regions:
        plants[r].sort(key=lambda p: (p[2], p[0][1]))

    stores = {r: [] for r in regions}
    for (r, sid), energy in capacities.storage_energy.items():
        s = scenario.storage(sid)
        lim = avail(s) / s.discharge_eff if features.level_limit_discharge_eff else avail(s)
        stores[r].append({
            "key": (r, sid), "spec": s, "emax": lim * energy,
            "pc": capacities.storage_charge.get((r, sid), 0.0),
            "pd": capacities.storage_discharge.get((r, sid), 0.0),
        })
    charge_order = {r: sorted(stores[r], key=lambda d: (-d["spec"].round_trip_eff, d["key"][1])) for r in regions}
    discharge_order = {r: sorted(stores[r], key=lambda d: (d["spec"].var_cost_discharge, d["key"][1])) for r in regions}

    vre = {r: {v: scenario.region(r).vre_potential(v) for v, c in scenario.region(r).vre_capacity.items() if c > 0}
           for r in regions}
    demand = {r: np.asarray(scenario.region(r).demand, dtype=float) for r in regions}

    gen = {p[0]: np.zeros(T) for r in regions for p in plants[r]}
    ch = {d["key"]: np.zeros(T) for r in regions for d in stores[r]}
    dis = {d["key"]: np.zeros(T) for r in regions for d in stores[r]}
    level = {d["key"]: np.zeros(T + 1) for r in regions for d in stores[r]}
    state = {d["key"]: 0.0 for r in regions for d in stores[r]}  # level_0 = 0
    flows = {lid: np.zeros(T) for lid in line_caps}
    unserved = {r: np.zeros(T) for r in regions}
    curtail_total = {r: np.zeros(T) for r in regions}
    pot_total = {r: sum(vre[r].values()) if vre[r] else np.zeros(T) for r in regions}

    for t in range(T):
        grid.reset()
        surplus, deficit = {}, {}
        charged = set()
        # (1) local VRE
        for r in regions:
            pot = float(pot_total[r][t])
            d = float(demand[r][t])
            used = min(pot, d)
            surplus[r], deficit[r] = pot - used, d - used
        # (2) surplus into local storage, best round trip first
        for r in regions:
            for st in charge_order[r]:
                if surplus[r] <= EPS:
                    break
                s, key = st["spec"], st["key"]
                room = min(st["pc"], max(st["emax"] - state[key], 0.0) / s.charge_eff)
                amt = min(surplus[r], room)
                if amt > EPS:
                    ch[key][t] = amt
                    state[key] += s.charge_eff * amt
                    surplus[r] -= amt
                    charged.add(key)
        # (3) export surplus to deficit regions, nearest first
        if line_caps:
            for src in regions:
                for dst in grid.ranks.get(src, []):
                    if surplus[src] <= EPS:
                        break
                    if deficit[dst] <= EPS:
                        continue
                    path = grid.paths[(src, dst)]
                    if any(deficit[x] > EPS for x in path[1:-1]):
                        continue
                    amt = min(surplus[src], deficit[dst], grid.headroom(path))
                    if amt > EPS:
                        grid.push(path, amt)
                        surplus[src] -= amt
                        deficit[dst] -= amt
        # (4) local storage discharge, cheapest first
        for r in regions:
            for st in discharge_order[r]:
                if deficit[r] <= EPS:
                    break
                s, key = st["spec"], st["key"]
                amt = min(deficit[r], st["pd"], state[key] * s.discharge_eff)
                if amt > EPS:
                    dis[key][t] += amt
                    state[key] = max(state[key] - amt / s.discharge_eff, 0.0)
                    deficit[r] -= amt
        # (5) imports from balanced regions: their leftover VRE, then idle storage
        if line_caps:
            for dst in regions:
                for src in grid.ranks.get(dst, []):
                    if deficit[dst] <= EPS:
                        break
                    if deficit[src] > EPS:
                        continue
                    path = grid.paths[(src, dst)]
                    if any(deficit[x] > EPS for x in path[1:-1]):
                        continue
                    room = grid.headroom(path)
                    amt = min(surplus[src], deficit[dst], room)
                    if amt > EPS:
                        grid.push(path, amt)
                        surplus[src] -= amt
                        deficit[dst] -= amt
                        room -= amt
                    for st in discharge_order[src]:
                        if deficit[dst] <= EPS or room <= EPS:
                            break
                        s, key = st["spec"], st["key"]
                        if key in charged:
                            continue
                        spare = st["pd"] - dis[key][t]
                        amt = min(deficit[dst], room, spare, state[key] * s.discharge_eff)
                        if amt > EPS:
                            grid.push(path, amt)
                            dis[key][t] += amt
                            state[key] = max(state[key] - amt / s.discharge_eff, 0.0)
                            deficit[dst] -= amt
                            room -= amt
        # (6) merit order, (7) unserved
        for r in regions:
            for key, cap, _ in plants[r]:
                if deficit[r] <= EPS:
                    break
                amt = min(deficit[r], cap)
                gen[key][t] = amt
                deficit[r] -= amt
            unserved[r][t] = max(deficit[r], 0.0)
            curtail_total[r][t] = max(surplus[r], 0.0)
        for key in state:
            level[key][t + 1] = state[key]
        for lid, f in grid.flow.items():
            flows[lid][t] = f

    result = SystemResult(
        hours=T,
        capacity=capacities,
        expansion=expansion if expansion is not None else _default_expansion(scenario, capacities),
        backend="heuristic",
    )
    for r in regions:
        result.demand[r] = demand[r].copy()
        result.unserved[r] = unserved[r]
        pot = pot_total[r]
        for v, p in vre[r].items():
            # split curtailment over VRE techs by their share of the potential
            share = np.divide(p, pot, out=np.zeros(T), where=pot > 0)
            cur = curtail_total[r] * share
            result.curtailment[(r, v)] = cur
            result.vre_used[(r, v)] = np.maximum(p - cur, 0.0)
    result.generation.update(gen)
    result.charge.update(ch)
    result.discharge.update(dis)
    result.level.update(level)
    for ln in scenario.lines:
        if ln.id in flows:
            result.flow[ln.id] = flows[ln.id]
            result.line_ends[ln.id] = (ln.from_region, ln.to_region)
    result.costs = cost_breakdown(result, scenario, features)
    result.objective = result.costs.system_cost
    return result


# --------------------------------------------------------------- evolution


@dataclass(frozen=True)
class ESParams:
    mu: int = 4
    lam: int = 16
    generations: int = 40
    sigma0: float = 0.25  # initial step, relative to each gene's scale
    init_spread: float = 1.5  # initial genes drawn from U[0, init_spread] * scale
    workers: int = 1

    def __post_init__(self):
        for name in ("mu", "lam", "generations", "workers"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"ES parameter {name} must be >= 1")
        if self.sigma0 <= 0 or self.init_spread <= 0:
            raise ValueError("sigma0 and init_spread must be > 0")


@dataclass
class CandidateCapacities:
    """Expandable capacity genes; ``x`` is in physical units (MW, MWh)."""

    names: list[tuple]
    x: np.ndarray
    fitness: float = float("inf")

    def as_dict(self) -> dict[tuple, float]:
        return {k: float(v) for k, v in zip(self.names, self.x)}


@dataclass
class _Genome:
    names: list[tuple]
    scale: np.ndarray
    scenario: ScenarioModel
    use_case: UseCase
    features: FeatureConfig

    @classmethod
    def build(cls, scenario: ScenarioModel, use_case: UseCase, features: FeatureConfig):
        names, scale = [], []
        e2p = features.e2p_policy if isinstance(features.e2p_policy, Fixed) else None
        cdr = features.charge_discharge_ratio if isinstance(features.charge_discharge_ratio, Fixed) else None
        for region in scenario.regions:
            r = region.id
            peak = float(max(np.max(region.demand), 1.0))
            resid = float(max(np.max(region.residual_load()), 0.1 * peak))
            for g in scenario.dispatchables:
                if use_case.is_expandable(g.id):
                    names.append(("gen", r, g.id))
                    scale.append(resid)
            for s in scenario.storages:
                if not use_case.is_expandable(s.id):
                    continue
                names.append(("discharge", r, s.id))
                scale.append(0.5 * peak)
                if e2p is None or e2p.get(s.id) is None:
                    hours = 6.0 if s.role == "short" else scenario.hours / 4
                    names.append(("energy", r, s.id))
                    scale.append(0.5 * peak * hours)
                if cdr is None or cdr.get(s.id) is None:
                    names.append(("charge", r, s.id))
                    scale.append(0.5 * peak)
        if (
            use_case.lines_expandable
            and features.transmission_expansion
            and features.transmission_model is TransmissionModel.NTC
        ):
            for ln in scenario.lines:
                if ln.expandable:
                    names.append(("line", ln.id, None))
                    scale.append(max(ln.existing_capacity, 0.25 * max(float(np.max(r.demand)) for r in scenario.regions)))
        return cls(names, np.asarray(scale, dtype=float), scenario, use_case, features)

    def decode(self, x: np.ndarray) -> tuple[Capacities, Capacities]:
        sc, uc, f = self.scenario, self.use_case, self.features
        genes = dict(zip(self.names, x))
        cap, exp = Capacities(), Capacities()
        for region in sc.regions:
            r = region.id
            for g in sc.dispatchables:
                if g.id not in uc.techs:
                    continue
                if uc.is_expandable(g.id):
                    e = float(genes[("gen", r, g.id)])
                    pre = region.preinstalled.get(g.id, 0.0)
                else:
                    e = 0.0
                    pre = uc.fixed_capacity.get((r, g.id), region.preinstalled.get(g.id, 0.0))
                exp.generation[(r, g.id)] = e
                cap.generation[(r, g.id)] = pre + e
            for s in sc.storages:
                if s.id not in uc.techs:
                    continue
                pre_p = region.preinstalled.get(s.id, 0.0)
                pre_e = region.preinstalled_energy.get(s.id, 0.0)
                if uc.is_expandable(s.id):
                    d = float(genes[("discharge", r, s.id)])
                    if ("energy", r, s.id) in genes:
                        e = float(genes[("energy", r, s.id)])
                    else:
                        e = max(f.e2p_policy.get(s.id) * (pre_p + d) - pre_e, 0.0)
                    if ("charge", r, s.id) in genes:
                        c = float(genes[("charge", r, s.id)])
                    else:
                        c = max(f.charge_discharge_ratio.get(s.id) * (pre_p + d) - pre_p, 0.0)
                else:
                    d = e = c = 0.0
                exp.storage_energy[(r, s.id)] = e
                exp.storage_charge[(r, s.id)] = c
                exp.storage_discharge[(r, s.id)] = d
                cap.storage_energy[(r, s.id)] = pre_e + e
                cap.storage_charge[(r, s.id)] = pre_p + c
                cap.storage_discharge[(r, s.id)] = pre_p + d
        if f.transmission_model is TransmissionModel.NTC:
            for ln in sc.lines:
                e = float(genes.get(("line", ln.id, None), 0.0))
                exp.lines[ln.id] = e
                cap.lines[ln.id] = ln.existing_capacity + e
        return cap, exp


def _threads(requested: int) -> int:
    cap = os.environ.get("CAPEXLAB_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            pass
    return max(1, requested)


def evolve_capacities(
    scenario: ScenarioModel,
    use_case: UseCase,
    features: FeatureConfig,
    es_params: ESParams = ESParams(),
    seed: int = 0,
) -> tuple[CandidateCapacities, SystemResult]:
    """(mu + lambda) evolution strategy with self-adaptive step sizes.

    Fitness is the annual system cost of the myopic dispatch, unserved energy
    priced at the slack penalty. Offspring of generation g draw from
    ``SeedSequence([seed, g])`` spawned per offspring index, so results do not
    depend on the number of worker threads.
    """
    violations = validate_scenario(scenario)
    if violations:
        raise HeuristicConfigError("invalid scenario: " + "; ".join(map(str, violations)))
    features = effective_features(features, use_case)
    _check_features(scenario, features)
    genome = _Genome.build(scenario, use_case, features)
    n = len(genome.names)
    mu, lam = es_params.mu, es_params.lam

    def evaluate(z: np.ndarray) -> tuple[float, SystemResult]:
        cap, exp = genome.decode(z * genome.scale)
        res = dispatch_myopic(scenario, cap, features, exp)
        return res.costs.system_cost, res

    tau = 1.0 / np.sqrt(2.0 * np.sqrt(max(n, 1)))
    tau_global = 1.0 / np.sqrt(2.0 * max(n, 1))

    init_rngs = [np.random.default_rng(s) for s in np.random.SeedSequence([seed, 0]).spawn(mu)]
    parents = []
    for k, rng in enumerate(init_rngs):
        # the first parent starts from zero expansion so the search always
        # contains the do-nothing design
        z = np.zeros(n) if k == 0 else rng.uniform(0.0, es_params.init_spread, n)
        parents.append((z, np.full(n, es_params.sigma0)))

    workers = _threads(es_params.workers)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None

    def run_all(zs):
        if pool is None:
            return [evaluate(z) for z in zs]
        return list(pool.map(evaluate, zs))

    try:
        evals = run_all([p[0] for p in parents])
        population = [(f, i, z, s, r) for i, ((z, s), (f, r)) in enumerate(zip(parents, evals))]
        population.sort(key=lambda p: (p[0], p[1]))
        trace = [population[0][0]]
        serial = len(population)
        for g in range(1, es_params.generations + 1):
            rngs = [np.random.default_rng(s) for s in np.random.SeedSequence([seed, g]).spawn(lam)]
            children = []
            for rng in rngs:
                _, _, z, s, _ = population[int(rng.integers(len(population)))]
                s_new = s * np.exp(tau_global * rng.standard_normal() + tau * rng.standard_normal(n))
                z_new = np.maximum(z + s_new * rng.standard_normal(n), 0.0)
                children.append((z_new, s_new))
            evals = run_all([c[0] for c in children])
            for (z, s), (f, r) in zip(children, evals):
                population.append((f, serial, z, s, r))
                serial += 1
            population.sort(key=lambda p: (p[0], p[1]))
            population = population[:mu]
            trace.append(population[0][0])
    finally:
        if pool is not None:
            pool.shutdown()

    best_f, _, best_z, _, best_res = population[0]
    cand = CandidateCapacities(list(genome.names), best_z * genome.scale, best_f)
    best_res.meta["fitness_trace"] = trace
    best_res.meta["es_params"] = {
        "mu": mu, "lam": lam, "generations": es_params.generations,
        "sigma0": es_params.sigma0, "seed": seed,
    }
    best_res.meta["features"] = features.to_dict()
    return cand, best_res


def fitness_trace_rows(result: SystemResult) -> list[tuple[int, float]]:
    return list(enumerate(result.meta.get("fitness_trace", [])))


def capacities_from(
    generation: dict | None = None,
    storage: dict | None = None,
    lines: dict | None = None,
) -> Capacities:
    """Convenience builder: ``storage`` maps (region, tech) -> (energy, charge, discharge)."""
    cap = Capacities(generation=dict(generation or {}), lines=dict(lines or {}))
    for key, (e, c, d) in (storage or {}).items():
        cap.storage_energy[key] = e
        cap.storage_charge[key] = c
        cap.storage_discharge[key] = d
    return cap

