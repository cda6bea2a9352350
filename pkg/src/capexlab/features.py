"""Feature toggles that distinguish model profiles, and the bundled presets."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping

USE_CASES = ("I", "II", "III", "IV")


@dataclass(frozen=True)
class FixedFraction:
    """Start and end level pinned to ``fraction`` of the (optimized) energy capacity."""

    fraction: float = 0.5


@dataclass(frozen=True)
class FreeEqual:
    """Start level optimized; end level must equal it."""


@dataclass(frozen=True)
class ZeroStartFreeEnd:
    """Start level zero; end level optimized."""


@dataclass(frozen=True)
class FreeBoundary:
    """Start and end levels optimized independently (the loosest policy)."""


StorageBoundary = FixedFraction | FreeEqual | ZeroStartFreeEnd | FreeBoundary


@dataclass(frozen=True)
class Free:
    pass


@dataclass(frozen=True)
class Fixed:
    """Per-technology fixed ratio, keyed by storage technology id."""

    values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def get(self, tech: str) -> float | None:
        return self.values.get(tech)


RatioPolicy = Free | Fixed


class TransmissionModel(str, enum.Enum):
    NONE = "none"
    NTC = "ntc"
    DCLF = "dclf"


class Foresight(str, enum.Enum):
    FULL = "full"
    MYOPIC = "myopic"


class Backend(str, enum.Enum):
    LP = "lp"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class FeatureConfig:
    availability_enabled: bool = False
    load_change_costs_enabled: bool = False
    storage_boundary: StorageBoundary = FreeEqual()
    e2p_policy: RatioPolicy = Free()
    charge_discharge_ratio: RatioPolicy = Free()
    transmission_model: TransmissionModel = TransmissionModel.NTC
    transmission_expansion: bool = True
    foresight: Foresight = Foresight.FULL
    # storage level limit divided by discharge efficiency (stored-energy basis)
    level_limit_discharge_eff: bool = False

    def with_(self, **changes) -> "FeatureConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "availability_enabled": self.availability_enabled,
            "load_change_costs_enabled": self.load_change_costs_enabled,
            "storage_boundary": _boundary_to_dict(self.storage_boundary),
            "e2p_policy": _ratio_to_dict(self.e2p_policy),
            "charge_discharge_ratio": _ratio_to_dict(self.charge_discharge_ratio),
            "transmission_model": self.transmission_model.value,
            "transmission_expansion": self.transmission_expansion,
            "foresight": self.foresight.value,
            "level_limit_discharge_eff": self.level_limit_discharge_eff,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureConfig":
        base = cls()
        return cls(
            availability_enabled=bool(d.get("availability_enabled", base.availability_enabled)),
            load_change_costs_enabled=bool(
                d.get("load_change_costs_enabled", base.load_change_costs_enabled)
            ),
            storage_boundary=_boundary_from_dict(d["storage_boundary"])
            if "storage_boundary" in d
            else base.storage_boundary,
            e2p_policy=_ratio_from_dict(d["e2p_policy"]) if "e2p_policy" in d else base.e2p_policy,
            charge_discharge_ratio=_ratio_from_dict(d["charge_discharge_ratio"])
            if "charge_discharge_ratio" in d
            else base.charge_discharge_ratio,
            transmission_model=TransmissionModel(
                d.get("transmission_model", base.transmission_model.value)
            ),
            transmission_expansion=bool(
                d.get("transmission_expansion", base.transmission_expansion)
            ),
            foresight=Foresight(d.get("foresight", base.foresight.value)),
            level_limit_discharge_eff=bool(
                d.get("level_limit_discharge_eff", base.level_limit_discharge_eff)
            ),
        )


_BOUNDARY_KINDS = {
    "fixed_fraction": FixedFraction,
    "free_equal": FreeEqual,
    "zero_start_free_end": ZeroStartFreeEnd,
    "free": FreeBoundary,
}


def _boundary_to_dict(b) -> dict:
    if isinstance(b, FixedFraction):
        return {"kind": "fixed_fraction", "fraction": b.fraction}
    for kind, klass in _BOUNDARY_KINDS.items():
        if type(b) is klass:
            return {"kind": kind}
    raise TypeError(f"not a storage boundary policy: {b!r}")


def _boundary_from_dict(d) -> StorageBoundary:
    kind = d["kind"]
    if kind not in _BOUNDARY_KINDS:
        raise ValueError(f"unknown storage boundary {kind!r}")
    if kind == "fixed_fraction":
        return FixedFraction(float(d.get("fraction", 0.5)))
    return _BOUNDARY_KINDS[kind]()


def _ratio_to_dict(p) -> dict:
    if isinstance(p, Fixed):
        return {"kind": "fixed", "values": dict(p.values)}
    return {"kind": "free"}


def _ratio_from_dict(d) -> RatioPolicy:
    if d["kind"] == "fixed":
        return Fixed({k: float(v) for k, v in d["values"].items()})
    if d["kind"] == "free":
        return Free()
    raise ValueError(f"unknown ratio policy {d['kind']!r}")


@dataclass(frozen=True)
class ModelProfile:
    name: str
    features: FeatureConfig
    backend: Backend = Backend.LP
    use_cases: tuple[str, ...] = USE_CASES

    def __post_init__(self):
        object.__setattr__(self, "use_cases", tuple(self.use_cases))
        if self.features.foresight is Foresight.MYOPIC and self.backend is not Backend.HEURISTIC:
            raise ValueError(f"profile {self.name}: myopic foresight needs the heuristic backend")

    def participates(self, use_case_id: str) -> bool:
        return use_case_id in self.use_cases

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "backend": self.backend.value,
            "use_cases": list(self.use_cases),
            "features": self.features.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelProfile":
        return cls(
            name=d["name"],
            features=FeatureConfig.from_dict(d["features"]),
            backend=Backend(d.get("backend", "lp")),
            use_cases=tuple(d.get("use_cases", USE_CASES)),
        )


# Fixed E2P hours (4 h battery, 400 h cavern) and a 1:1 charge/discharge
# power ratio for the long-duration store.
E2M2_E2P = {"battery": 4.0, "cavern": 400.0}
E2M2_CHARGE_RATIO = {"cavern": 1.0}

PRESETS: dict[str, ModelProfile] = {
    "dieter-like": ModelProfile(
        "dieter-like",
        FeatureConfig(
            availability_enabled=True,
            load_change_costs_enabled=True,
            storage_boundary=FixedFraction(0.5),
            transmission_model=TransmissionModel.NTC,
            transmission_expansion=True,
        ),
    ),
    "e2m2-like": ModelProfile(
        "e2m2-like",
        FeatureConfig(
            availability_enabled=True,
            storage_boundary=FreeEqual(),
            e2p_policy=Fixed(E2M2_E2P),
            charge_discharge_ratio=Fixed(E2M2_CHARGE_RATIO),
            transmission_model=TransmissionModel.NONE,
            transmission_expansion=False,
        ),
        use_cases=("I", "II", "III"),
    ),
    "genesys2-like": ModelProfile(
        "genesys2-like",
        FeatureConfig(
            availability_enabled=False,
            storage_boundary=ZeroStartFreeEnd(),
            transmission_model=TransmissionModel.NTC,
            transmission_expansion=True,
            foresight=Foresight.MYOPIC,
        ),
        backend=Backend.HEURISTIC,
    ),
    "isaar-like": ModelProfile(
        "isaar-like",
        FeatureConfig(
            availability_enabled=False,
            storage_boundary=ZeroStartFreeEnd(),
            transmission_model=TransmissionModel.NONE,
            transmission_expansion=False,
        ),
        use_cases=("III",),
    ),
    "oemof-like": ModelProfile(
        "oemof-like",
        FeatureConfig(
            availability_enabled=False,
            storage_boundary=FreeEqual(),
            transmission_model=TransmissionModel.NTC,
            transmission_expansion=False,
        ),
    ),
    "remix-like": ModelProfile(
        "remix-like",
        FeatureConfig(
            availability_enabled=True,
            load_change_costs_enabled=True,
            storage_boundary=FreeEqual(),
            transmission_model=TransmissionModel.DCLF,
            transmission_expansion=True,
            level_limit_discharge_eff=True,
        ),
    ),
}


def profile_preset(name: str) -> ModelProfile:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown profile preset {name!r}; choose from {sorted(PRESETS)}") from None
