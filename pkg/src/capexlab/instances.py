"""Small bundled instances used by the acceptance checks and the CLI demo.

The compressed horizon stands in for a year, so the seasonal swing happens
within days. Cavern energy is priced higher than in full-year studies to keep
the energy-to-power trade-off of a real seasonal store at this scale.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .model import DispatchableTech, Region, ScenarioModel
from .synthetic import (
    DemandShape,
    RegionShape,
    SyntheticSpec,
    VREShape,
    default_dispatchables,
    generate_synthetic,
)


def seasonal_two_region(hours: int = 168, seed: int = 7) -> ScenarioModel:
    """PV-heavy R1 next to wind-heavy R2, both winter-peaking."""
    spec = SyntheticSpec(
        regions=2,
        hours=hours,
        seed=seed,
        shapes=(
            RegionShape(DemandShape(100, 15, 20, 3), VREShape(pv_capacity=260, wind_capacity=60)),
            RegionShape(DemandShape(80, 10, 15, 3),
                        VREShape(pv_capacity=60, wind_capacity=200, wind_seasonal=0.15)),
        ),
        line_capacity=15.0,
        name=f"seasonal-2r-{hours}h",
    )
    return generate_synthetic(spec)


def asymmetric_ring(hours: int = 48, seed: int = 11) -> ScenarioModel:
    """Three regions on a ring; R1 holds the cheap surplus, lines differ in susceptance.

    Under DC load flow the direct R1-R3 link carries only its susceptance
    share of an R1 -> R3 transfer, the rest loops through R2.
    """
    spec = SyntheticSpec(
        regions=3,
        hours=hours,
        seed=seed,
        shapes=(
            RegionShape(DemandShape(60, 8, 5, 2), VREShape(wind_capacity=320, wind_mean=0.45, wind_sigma=0.2)),
            RegionShape(DemandShape(70, 10, 5, 2), VREShape(pv_capacity=40)),
            RegionShape(DemandShape(90, 12, 5, 2), VREShape(pv_capacity=30)),
        ),
        topology="ring",
        line_capacity=(25.0, 10.0, 10.0),  # R1-R2, R2-R3, R3-R1
        susceptance=(1.0, 4.0, 0.5),
        line_expansion_cost=120_000.0,
        name=f"ring-3r-{hours}h",
    )
    return generate_synthetic(spec)


def peak_bound(availability: float, peak: float = 100.0, hours: int = 24) -> ScenarioModel:
    """One region, one peak plant, a single demand spike and no VRE.

    The spike makes the installed capacity bind: capacity * availability = peak.
    """
    demand = np.full(hours, 0.4 * peak)
    demand[hours // 2] = peak
    region = Region("R1", demand)
    ocgt = default_dispatchables()[1]
    tech = DispatchableTech(
        ocgt.id, ocgt.invest_cost, ocgt.fixed_om, ocgt.var_cost,
        availability=availability, lifetime=ocgt.lifetime, interest_rate=ocgt.interest_rate, role="peak",
    )
    return ScenarioModel(f"peak-bound-a{availability}", hours, (region,), (tech,))


def flat_demand(demand: float = 50.0, hours: int = 24) -> ScenarioModel:
    tech = default_dispatchables()[0]
    return ScenarioModel("flat", hours, (Region("R1", np.full(hours, demand)),), (tech,))


def example_path() -> Path:
    """Path of the bundled 2-region example config inside the package."""
    return Path(str(resources.files("capexlab") / "data" / "example" / "scenario.yaml"))


BUNDLED = {
    "seasonal-2r": seasonal_two_region,
    "ring-3r": asymmetric_ring,
}


def bundled(name: str) -> ScenarioModel:
    try:
        return BUNDLED[name]()
    except KeyError:
        raise KeyError(f"unknown bundled instance {name!r}; choose from {sorted(BUNDLED)}") from None

