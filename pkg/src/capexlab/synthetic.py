"""Seeded synthetic scenarios shaped like the stylized use cases.

Series follow the horizon fraction rather than a calendar: the first and last
quarter of the horizon are winter-like, the middle half summer-like.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DispatchableTech,
    Region,
    ScenarioModel,
    StorageTech,
    TransmissionLine,
)

TOPOLOGIES = ("path", "ring", "star", "complete")


@dataclass(frozen=True)
class DemandShape:
    """Demand in MW: base + daily swing + winter bias + gaussian noise."""

    base: float = 100.0
    daily_amplitude: float = 15.0
    seasonal_amplitude: float = 10.0
    noise: float = 0.0


@dataclass(frozen=True)
class VREShape:
    pv_capacity: float = 0.0
    pv_peak: float = 0.85
    pv_seasonal: float = 0.4  # relative summer boost of the diurnal bell
    wind_capacity: float = 0.0
    wind_mean: float = 0.3
    wind_seasonal: float = 0.1  # added in winter, removed in summer
    wind_sigma: float = 0.15
    wind_autocorr: float = 0.9


@dataclass(frozen=True)
class RegionShape:
    demand: DemandShape = DemandShape()
    vre: VREShape = VREShape()


def default_dispatchables() -> tuple[DispatchableTech, ...]:
    return (
        DispatchableTech("coal", 1_600_000, 30_000, 35.0, availability=0.912,
                         lifetime=40, interest_rate=0.05, load_change_cost=3.0, role="base"),
        DispatchableTech("ocgt", 450_000, 10_000, 110.0, availability=0.948,
                         lifetime=30, interest_rate=0.05, load_change_cost=0.5, role="peak"),
    )


def default_storages() -> tuple[StorageTech, ...]:
    return (
        StorageTech("battery", 150_000, 40_000, 40_000, charge_eff=0.95, discharge_eff=0.95,
                    availability=0.97, lifetime=15, interest_rate=0.05, role="short"),
        StorageTech("cavern", 5_000, 500_000, 450_000, charge_eff=0.7, discharge_eff=0.6,
                    availability=0.95, lifetime=30, interest_rate=0.05, role="long"),
    )


@dataclass(frozen=True)
class SyntheticSpec:
    regions: int = 2
    hours: int = 168
    seed: int = 0
    # one shape for all regions, or one per region
    shapes: tuple[RegionShape, ...] = (RegionShape(),)
    topology: str = "path"
    line_capacity: float | tuple[float, ...] = 20.0
    susceptance: float | tuple[float, ...] = 1.0
    line_expansion_cost: float = 250_000.0
    dispatchables: tuple[DispatchableTech, ...] = field(default_factory=default_dispatchables)
    storages: tuple[StorageTech, ...] = field(default_factory=default_storages)
    name: str = "synthetic"

    def __post_init__(self):
        if self.hours < 24:
            raise ValueError("synthetic horizon needs at least 24 hours")
        if self.regions < 1:
            raise ValueError("need at least one region")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; choose from {TOPOLOGIES}")
        if len(self.shapes) not in (1, self.regions):
            raise ValueError("shapes must hold one entry or one per region")
        for s in self.shapes:
            d, v = s.demand, s.vre
            if d.base <= 0:
                raise ValueError("demand base must be > 0")
            amps = (d.daily_amplitude, d.seasonal_amplitude, d.noise, v.pv_seasonal,
                    v.wind_seasonal, v.wind_sigma, v.pv_capacity, v.wind_capacity)
            if min(amps) < 0:
                raise ValueError("amplitudes and capacities must be >= 0")
            if not 0 <= v.wind_autocorr < 1:
                raise ValueError("wind_autocorr must lie in [0, 1)")

    def shape(self, i: int) -> RegionShape:
        return self.shapes[0] if len(self.shapes) == 1 else self.shapes[i]


def region_ids(n: int) -> list[str]:
    return [f"R{i + 1}" for i in range(n)]


def topology_edges(n: int, topology: str) -> list[tuple[int, int]]:
    if topology == "path":
        return [(i, i + 1) for i in range(n - 1)]
    if topology == "ring":
        edges = [(i, i + 1) for i in range(n - 1)]
        return edges + [(n - 1, 0)] if n > 2 else edges
    if topology == "star":
        return [(0, i) for i in range(1, n)]
    if topology == "complete":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    raise ValueError(f"unknown topology {topology!r}")


def _season(hours: int) -> np.ndarray:
    # +1 at the horizon ends (winter), -1 in the middle (summer)
    return np.cos(2 * np.pi * np.arange(hours) / hours)


def demand_series(shape: DemandShape, hours: int, rng: np.random.Generator) -> np.ndarray:
    h = np.arange(hours) % 24
    daily = -np.cos(2 * np.pi * (h - 1) / 24)  # trough at night, peak late afternoon
    d = shape.base + shape.daily_amplitude * daily + shape.seasonal_amplitude * _season(hours)
    if shape.noise > 0:
        d = d + rng.normal(0.0, shape.noise, hours)
    return np.maximum(d, 1e-3 * shape.base)


def pv_series(shape: VREShape, hours: int) -> np.ndarray:
    h = np.arange(hours) % 24
    bell = np.clip(np.sin(np.pi * (h - 6) / 12), 0.0, None) ** 1.5
    seasonal = 1.0 - shape.pv_seasonal * _season(hours)
    return np.clip(shape.pv_peak * bell * seasonal / (1.0 + shape.pv_seasonal), 0.0, 1.0)


def wind_series(shape: VREShape, hours: int, rng: np.random.Generator) -> np.ndarray:
    phi = shape.wind_autocorr
    eps = rng.normal(0.0, 1.0, hours)
    x = np.empty(hours)
    x[0] = eps[0]
    scale = np.sqrt(1 - phi * phi)
    for t in range(1, hours):
        x[t] = phi * x[t - 1] + scale * eps[t]
    cf = shape.wind_mean + shape.wind_seasonal * _season(hours) + shape.wind_sigma * x
    return np.clip(cf, 0.0, 1.0)


def generate_synthetic(spec: SyntheticSpec) -> ScenarioModel:
    ids = region_ids(spec.regions)
    streams = np.random.SeedSequence(spec.seed).spawn(spec.regions)
    regions = []
    for i, rid in enumerate(ids):
        rng = np.random.default_rng(streams[i])
        shape = spec.shape(i)
        demand = demand_series(shape.demand, spec.hours, rng)
        wind = wind_series(shape.vre, spec.hours, rng)
        caps, profiles = {}, {}
        if shape.vre.pv_capacity > 0:
            caps["pv"], profiles["pv"] = shape.vre.pv_capacity, pv_series(shape.vre, spec.hours)
        if shape.vre.wind_capacity > 0:
            caps["wind"], profiles["wind"] = shape.vre.wind_capacity, wind
        regions.append(Region(rid, demand, caps, profiles))

    edges = topology_edges(spec.regions, spec.topology)
    caps = _per_edge(spec.line_capacity, len(edges), "line_capacity")
    sus = _per_edge(spec.susceptance, len(edges), "susceptance")
    lines = tuple(
        TransmissionLine(f"{ids[a]}-{ids[b]}", ids[a], ids[b], caps[k],
                         expansion_cost=spec.line_expansion_cost, susceptance=sus[k])
        for k, (a, b) in enumerate(edges)
    )
    return ScenarioModel(spec.name, spec.hours, tuple(regions), spec.dispatchables, spec.storages, lines)


def _per_edge(value, n: int, label: str) -> list[float]:
    if np.isscalar(value):
        return [float(value)] * n
    if len(value) != n:
        raise ValueError(f"{label} needs {n} entries, got {len(value)}")
    return [float(v) for v in value]
