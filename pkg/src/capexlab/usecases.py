"""Use cases I to IV as templates over any scenario.

Technologies are picked by role: dispatchables tagged ``base`` / ``peak``,
storages tagged ``short`` / ``long``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .features import FeatureConfig, TransmissionModel
from .model import ScenarioModel

TRANSMISSION = "transmission"


@dataclass(frozen=True)
class UseCase:
    id: str
    expandable: frozenset[str]
    fixed: frozenset[str] = frozenset()
    transmission: bool = False
    # (region, tech) -> MW for fixed technologies; falls back to preinstalled
    fixed_capacity: Mapping[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "expandable", frozenset(self.expandable))
        object.__setattr__(self, "fixed", frozenset(self.fixed))
        object.__setattr__(self, "fixed_capacity", dict(self.fixed_capacity))
        overlap = self.expandable & self.fixed
        if overlap:
            raise ValueError(f"use case {self.id}: {sorted(overlap)} both expandable and fixed")
        if self.transmission and self.id in ("I", "II", "III"):
            raise ValueError(f"use case {self.id} cannot enable transmission")

    @property
    def techs(self) -> frozenset[str]:
        return (self.expandable | self.fixed) - {TRANSMISSION}

    @property
    def lines_expandable(self) -> bool:
        return TRANSMISSION in self.expandable

    def is_expandable(self, tech: str) -> bool:
        return tech in self.expandable


def _by_role(scenario: ScenarioModel, role: str) -> list[str]:
    ids = [t.id for t in scenario.dispatchables if t.role == role]
    ids += [s.id for s in scenario.storages if s.role == role]
    return ids


def residual_peak(scenario: ScenarioModel) -> dict[str, float]:
    """Per-region peak of demand minus VRE potential (floored at zero)."""
    return {r.id: float(max(np.max(r.residual_load(), initial=0.0), 0.0)) for r in scenario.regions}


def use_case_template(uc_id: str, scenario: ScenarioModel) -> UseCase:
    base = _by_role(scenario, "base")
    peak = _by_role(scenario, "peak")
    short = _by_role(scenario, "short")
    long_ = _by_role(scenario, "long")
    if uc_id == "I":
        return UseCase("I", frozenset(base + peak))
    if uc_id == "II":
        peaks = residual_peak(scenario)
        fixed_cap = {(r, p): peaks[r] for r in peaks for p in peak[:1]}
        return UseCase("II", frozenset(short + long_), frozenset(peak[:1]), fixed_capacity=fixed_cap)
    if uc_id == "III":
        return UseCase("III", frozenset(base + short))
    if uc_id == "IV":
        return UseCase("IV", frozenset(base + [TRANSMISSION]), transmission=True)
    raise ValueError(f"unknown use case {uc_id!r}")


def effective_features(features: FeatureConfig, use_case: UseCase) -> FeatureConfig:
    """Transmission is switched off outside use cases that allow exchange."""
    if use_case.transmission:
        if not use_case.lines_expandable and features.transmission_expansion:
            return features.with_(transmission_expansion=False)
        return features
    if features.transmission_model is TransmissionModel.NONE and not features.transmission_expansion:
        return features
    return features.with_(transmission_model=TransmissionModel.NONE, transmission_expansion=False)
