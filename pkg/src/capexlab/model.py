"""Harmonized scenario model: regions, technologies, series and lines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

import numpy as np

HOURS_PER_YEAR = 8760.0


def series(values) -> np.ndarray:
    """Read-only float copy of an hourly series."""
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


def _frozen_map(m) -> Mapping:
    return MappingProxyType(dict(m or {}))


def annuity_factor(interest_rate: float, lifetime: float) -> float:
    """Capital recovery factor i(1+i)^L / ((1+i)^L - 1); 1/L when i == 0."""
    if lifetime < 1:
        raise ValueError(f"lifetime must be >= 1 year, got {lifetime}")
    if interest_rate < 0:
        raise ValueError(f"interest rate must be >= 0, got {interest_rate}")
    if interest_rate == 0:
        return 1.0 / lifetime
    # i / (1 - (1+i)^-L), with expm1/log1p so tiny rates keep full precision
    return interest_rate / -math.expm1(-lifetime * math.log1p(interest_rate))


@dataclass(frozen=True)
class DispatchableTech:
    id: str
    invest_cost: float
    fixed_om: float
    var_cost: float
    availability: float = 1.0
    lifetime: float = 30.0
    interest_rate: float = 0.0
    load_change_cost: float = 0.0
    role: str = "base"

    @property
    def annuity(self) -> float:
        return annuity_factor(self.interest_rate, self.lifetime)


@dataclass(frozen=True)
class StorageTech:
    id: str
    energy_invest_cost: float
    charge_invest_cost: float
    discharge_invest_cost: float
    charge_eff: float = 1.0
    discharge_eff: float = 1.0
    energy_fixed_om: float = 0.0
    charge_fixed_om: float = 0.0
    discharge_fixed_om: float = 0.0
    availability: float = 1.0
    var_cost_discharge: float = 0.0
    lifetime: float = 20.0
    interest_rate: float = 0.0
    role: str = "short"

    @property
    def annuity(self) -> float:
        return annuity_factor(self.interest_rate, self.lifetime)

    @property
    def round_trip_eff(self) -> float:
        return self.charge_eff * self.discharge_eff


@dataclass(frozen=True)
class Region:
    id: str
    demand: np.ndarray
    vre_capacity: Mapping[str, float] = field(default_factory=dict)
    vre_profile: Mapping[str, np.ndarray] = field(default_factory=dict)
    # MW for dispatchables and storage power (charge and discharge alike)
    preinstalled: Mapping[str, float] = field(default_factory=dict)
    preinstalled_energy: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "demand", series(self.demand))
        object.__setattr__(self, "vre_capacity", _frozen_map(self.vre_capacity))
        object.__setattr__(
            self,
            "vre_profile",
            _frozen_map({k: series(v) for k, v in dict(self.vre_profile).items()}),
        )
        object.__setattr__(self, "preinstalled", _frozen_map(self.preinstalled))
        object.__setattr__(self, "preinstalled_energy", _frozen_map(self.preinstalled_energy))

    def vre_potential(self, tech: str) -> np.ndarray:
        return self.vre_capacity.get(tech, 0.0) * self.vre_profile[tech]

    def total_vre_potential(self) -> np.ndarray:
        total = np.zeros(len(self.demand))
        for tech, cap in self.vre_capacity.items():
            if tech in self.vre_profile:
                total = total + cap * self.vre_profile[tech]
        return total

    def residual_load(self) -> np.ndarray:
        return self.demand - self.total_vre_potential()

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.demand, other.demand)
            and dict(self.vre_capacity) == dict(other.vre_capacity)
            and self.vre_profile.keys() == other.vre_profile.keys()
            and all(np.array_equal(self.vre_profile[k], other.vre_profile[k]) for k in self.vre_profile)
            and dict(self.preinstalled) == dict(other.preinstalled)
            and dict(self.preinstalled_energy) == dict(other.preinstalled_energy)
        )

    __hash__ = None


@dataclass(frozen=True)
class TransmissionLine:
    id: str
    from_region: str
    to_region: str
    existing_capacity: float
    expansion_cost: float = 0.0
    susceptance: float | None = None
    expandable: bool = True
    lifetime: float = 40.0
    interest_rate: float = 0.0

    @property
    def annuity(self) -> float:
        return annuity_factor(self.interest_rate, self.lifetime)


@dataclass(frozen=True)
class ScenarioModel:
    """Single harmonized input consumed by every backend.

    ``operating_weight`` scales hourly operating costs to a year; it defaults
    to 8760 / hours so a short synthetic horizon stands in for a full year.
    """

    name: str
    hours: int
    regions: tuple[Region, ...]
    dispatchables: tuple[DispatchableTech, ...] = ()
    storages: tuple[StorageTech, ...] = ()
    lines: tuple[TransmissionLine, ...] = ()
    slack_penalty: float = 10_000.0
    operating_weight: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "dispatchables", tuple(self.dispatchables))
        object.__setattr__(self, "storages", tuple(self.storages))
        object.__setattr__(self, "lines", tuple(self.lines))
        if self.operating_weight is None:
            object.__setattr__(self, "operating_weight", HOURS_PER_YEAR / self.hours)

    @property
    def region_ids(self) -> list[str]:
        return [r.id for r in self.regions]

    def region(self, rid: str) -> Region:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(f"unknown region {rid!r}")

    def dispatchable(self, tid: str) -> DispatchableTech:
        for t in self.dispatchables:
            if t.id == tid:
                return t
        raise KeyError(f"unknown dispatchable technology {tid!r}")

    def storage(self, tid: str) -> StorageTech:
        for t in self.storages:
            if t.id == tid:
                return t
        raise KeyError(f"unknown storage technology {tid!r}")

    def line(self, lid: str) -> TransmissionLine:
        for ln in self.lines:
            if ln.id == lid:
                return ln
        raise KeyError(f"unknown line {lid!r}")

    @property
    def tech_ids(self) -> set[str]:
        return {t.id for t in self.dispatchables} | {t.id for t in self.storages}

    @property
    def vre_techs(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.regions:
            for k in r.vre_capacity:
                seen.setdefault(k)
        return list(seen)

    def replace(self, **changes) -> "ScenarioModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}"


def validate_scenario(scenario: ScenarioModel) -> list[Violation]:
    """Check every structural invariant; violations are returned, not raised."""
    out: list[Violation] = []
    T = scenario.hours

    def bad(entity, rule):
        out.append(Violation(entity, rule))

    if T < 1:
        bad("scenario", f"hours must be >= 1, got {T}")
    if scenario.slack_penalty <= 0:
        bad("scenario", "slack_penalty must be > 0")
    ids = scenario.region_ids
    if len(set(ids)) != len(ids):
        bad("scenario", "duplicate region ids")
    tech_ids = [t.id for t in scenario.dispatchables] + [t.id for t in scenario.storages]
    if len(set(tech_ids)) != len(tech_ids):
        bad("scenario", "duplicate technology ids")

    for r in scenario.regions:
        ent = f"region {r.id}"
        if len(r.demand) != T:
            bad(f"{ent} demand", f"length {len(r.demand)} != horizon {T}")
        if not np.all(np.isfinite(r.demand)):
            bad(f"{ent} demand", "non-finite value")
        elif np.any(r.demand < 0):
            bad(f"{ent} demand", "value < 0")
        for tech, cap in r.vre_capacity.items():
            if cap < 0:
                bad(f"{ent} vre_capacity {tech}", "capacity < 0")
            if tech not in r.vre_profile:
                bad(f"{ent} vre_capacity {tech}", "no matching vre_profile")
        for tech, prof in r.vre_profile.items():
            sname = f"{ent} vre_profile {tech}"
            if len(prof) != T:
                bad(sname, f"length {len(prof)} != horizon {T}")
            if not np.all(np.isfinite(prof)):
                bad(sname, "non-finite value")
            elif np.any(prof < 0) or np.any(prof > 1):
                bad(sname, "capacity factor outside [0, 1]")
        for tech, cap in list(r.preinstalled.items()) + list(r.preinstalled_energy.items()):
            if cap < 0:
                bad(f"{ent} preinstalled {tech}", "capacity < 0")
            if tech not in scenario.tech_ids:
                bad(f"{ent} preinstalled {tech}", "unknown technology")

    for t in scenario.dispatchables:
        ent = f"dispatchable {t.id}"
        if t.invest_cost < 0:
            bad(ent, "invest_cost < 0")
        if t.fixed_om < 0 or t.var_cost < 0 or t.load_change_cost < 0:
            bad(ent, "cost < 0")
        if not 0 < t.availability <= 1:
            bad(ent, "availability outside (0, 1]")
        if t.lifetime < 1:
            bad(ent, "lifetime < 1")
        if t.interest_rate < 0:
            bad(ent, "interest_rate < 0")

    for s in scenario.storages:
        ent = f"storage {s.id}"
        costs = (
            s.energy_invest_cost, s.charge_invest_cost, s.discharge_invest_cost,
            s.energy_fixed_om, s.charge_fixed_om, s.discharge_fixed_om, s.var_cost_discharge,
        )
        if any(c < 0 for c in costs):
            bad(ent, "cost < 0")
        if not (0 < s.charge_eff <= 1 and 0 < s.discharge_eff <= 1):
            bad(ent, "efficiency outside (0, 1]")
        if not 0 < s.availability <= 1:
            bad(ent, "availability outside (0, 1]")
        if s.lifetime < 1:
            bad(ent, "lifetime < 1")
        if s.interest_rate < 0:
            bad(ent, "interest_rate < 0")

    line_ids = [ln.id for ln in scenario.lines]
    if len(set(line_ids)) != len(line_ids):
        bad("scenario", "duplicate line ids")
    for ln in scenario.lines:
        ent = f"line {ln.id}"
        if ln.from_region == ln.to_region:
            bad(ent, "from_region == to_region")
        for end in (ln.from_region, ln.to_region):
            if end not in ids:
                bad(ent, f"unknown region {end!r}")
        if ln.existing_capacity < 0:
            bad(ent, "existing_capacity < 0")
        if ln.expansion_cost < 0:
            bad(ent, "expansion_cost < 0")
        if ln.susceptance is not None and not ln.susceptance > 0:
            bad(ent, "susceptance must be > 0")
        if ln.lifetime < 1:
            bad(ent, "lifetime < 1")
    return out
