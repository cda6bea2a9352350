"""Common output schema of both backends."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Key = tuple[str, str]


@dataclass(frozen=True)
class CostBreakdown:
    """Annual system cost split; expansion terms cover endogenous capacity only."""

    invest_annuity: float = 0.0
    opex_fix: float = 0.0
    opex_variable: float = 0.0
    # opex_variable split: generation, storage, load_change, slack
    variable_detail: dict = field(default_factory=dict, compare=False)

    @property
    def expansion_cost(self) -> float:
        return self.invest_annuity + self.opex_fix

    @property
    def system_cost(self) -> float:
        return self.expansion_cost + self.opex_variable

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        detail = dict(self.variable_detail)
        for k, v in other.variable_detail.items():
            detail[k] = detail.get(k, 0.0) + v
        return CostBreakdown(
            self.invest_annuity + other.invest_annuity,
            self.opex_fix + other.opex_fix,
            self.opex_variable + other.opex_variable,
            detail,
        )

    def as_rows(self) -> list[tuple[str, float]]:
        rows = [
            ("invest_annuity", self.invest_annuity),
            ("opex_fix", self.opex_fix),
            ("opex_variable", self.opex_variable),
            ("expansion_cost", self.expansion_cost),
            ("system_cost", self.system_cost),
        ]
        rows += [(f"variable.{k}", v) for k, v in sorted(self.variable_detail.items())]
        return rows


@dataclass
class Capacities:
    """Installed (or expanded) capacities keyed by (region, tech) or line id."""

    generation: dict[Key, float] = field(default_factory=dict)
    storage_energy: dict[Key, float] = field(default_factory=dict)
    storage_charge: dict[Key, float] = field(default_factory=dict)
    storage_discharge: dict[Key, float] = field(default_factory=dict)
    lines: dict[str, float] = field(default_factory=dict)

    def total(self, tech: str) -> float:
        """Sum over regions: MW for dispatchables, MWh for storage energy."""
        if any(k[1] == tech for k in self.generation):
            return float(sum(v for k, v in self.generation.items() if k[1] == tech))
        return float(sum(v for k, v in self.storage_energy.items() if k[1] == tech))

    def total_lines(self) -> float:
        return float(sum(self.lines.values()))


@dataclass
class SystemResult:
    hours: int
    capacity: Capacities
    expansion: Capacities
    generation: dict[Key, np.ndarray] = field(default_factory=dict)
    vre_used: dict[Key, np.ndarray] = field(default_factory=dict)
    curtailment: dict[Key, np.ndarray] = field(default_factory=dict)
    charge: dict[Key, np.ndarray] = field(default_factory=dict)
    discharge: dict[Key, np.ndarray] = field(default_factory=dict)
    # end-of-hour levels; index 0 is the boundary state before hour 1
    level: dict[Key, np.ndarray] = field(default_factory=dict)
    flow: dict[str, np.ndarray] = field(default_factory=dict)
    unserved: dict[str, np.ndarray] = field(default_factory=dict)
    demand: dict[str, np.ndarray] = field(default_factory=dict)
    line_ends: dict[str, tuple[str, str]] = field(default_factory=dict)
    costs: CostBreakdown = field(default_factory=CostBreakdown)
    backend: str = "lp"
    status: str = "Optimal"
    objective: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def regions(self) -> list[str]:
        return list(self.demand)

    def _sum(self, d: dict, region: str) -> np.ndarray:
        total = np.zeros(self.hours)
        for (r, _), v in d.items():
            if r == region:
                total = total + v
        return total

    def imports(self, region: str) -> np.ndarray:
        total = np.zeros(self.hours)
        for lid, f in self.flow.items():
            a, b = self.line_ends[lid]
            if b == region:
                total = total + np.maximum(f, 0.0)
            elif a == region:
                total = total + np.maximum(-f, 0.0)
        return total

    def exports(self, region: str) -> np.ndarray:
        total = np.zeros(self.hours)
        for lid, f in self.flow.items():
            a, b = self.line_ends[lid]
            if a == region:
                total = total + np.maximum(f, 0.0)
            elif b == region:
                total = total + np.maximum(-f, 0.0)
        return total

    def balance_residual(self, region: str) -> np.ndarray:
        """Supply minus demand per hour; zero for a consistent result."""
        supply = (
            self._sum(self.vre_used, region)
            + self._sum(self.generation, region)
            + self._sum(self.discharge, region)
            - self._sum(self.charge, region)
            + self.imports(region)
            - self.exports(region)
            + self.unserved.get(region, np.zeros(self.hours))
        )
        return supply - self.demand[region]

    def total_unserved(self) -> float:
        return float(sum(v.sum() for v in self.unserved.values()))

    def total_curtailment(self) -> float:
        return float(sum(v.sum() for v in self.curtailment.values()))
