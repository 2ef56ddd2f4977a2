# [Purpose] Electrical data model of the hub grid: per-unit bases, cables, pi-sections, buses, transformers
# [Comment] All types are frozen; a topology change produces a new Network

import math
from enum import Enum
from typing import Dict, Iterable, List, Optional

# [Library] Pydantic - Data validation library using Python type hints
# [Source] https://docs.pydantic.dev/
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BusType(str, Enum):
    SLACK = "slack"
    PV = "PV"
    PQ = "PQ"


class QuantityKind(str, Enum):
    VOLTAGE = "voltage"
    CURRENT = "current"
    POWER = "power"
    IMPEDANCE = "impedance"
    ADMITTANCE = "admittance"


class PerUnitBase(BaseModel):
    """
    [Purpose] System-wide per-unit base with one AC voltage base per voltage zone
    [Fields]
    - s_base: three-phase base power (MVA)
    - v_base_ac: line-line base voltage per zone (kV)
    - f_base: base frequency (Hz); omega_base = 2*pi*f_base
    """

    model_config = ConfigDict(frozen=True)

    s_base: float = Field(1000.0, description="Base power (MVA)")
    v_base_ac: Dict[str, float] = Field(
        default_factory=lambda: {"hv": 220.0, "mv": 66.0},
        description="Line-line base voltage per voltage zone (kV)",
    )
    f_base: float = Field(50.0, description="Base frequency (Hz)")

    @field_validator("s_base", "f_base")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @field_validator("v_base_ac")
    @classmethod
    def _zones_positive(cls, zones: Dict[str, float]):
        if not zones:
            raise ValueError("at least one voltage zone is required")
        for zone, v in zones.items():
            if not v > 0:
                raise ValueError(f"base voltage of zone '{zone}' must be > 0, got {v}")
        return zones

    @property
    def omega_base(self) -> float:
        return 2.0 * math.pi * self.f_base

    def v_base(self, zone: str) -> float:
        if zone not in self.v_base_ac:
            raise ValueError(f"unknown voltage zone '{zone}' (known: {', '.join(sorted(self.v_base_ac))})")
        return self.v_base_ac[zone]

    def z_base(self, zone: str) -> float:
        """[Returns] Base impedance of the zone in ohm (kV^2 / MVA)"""
        return self.v_base(zone) ** 2 / self.s_base

    def i_base(self, zone: str) -> float:
        """[Returns] Base current of the zone in kA"""
        return self.s_base / (math.sqrt(3.0) * self.v_base(zone))

    def zone_for_voltage(self, v_kv: float) -> str:
        """[Purpose] Finds the zone whose base voltage equals a rated voltage"""
        for zone, v in self.v_base_ac.items():
            if math.isclose(v, v_kv, rel_tol=1e-9):
                return zone
        raise ValueError(f"no voltage zone with base {v_kv} kV")


class CableSpec(BaseModel):
    """
    [Purpose] Datasheet of one three-core AC export cable
    [Comment] l_per_km defaults to a typical 220 kV XLPE value; r_ac_per_km overrides r_dc in dynamic runs
    """

    model_config = ConfigDict(frozen=True)

    name: str = "220kV-630mm2"
    v_rated: float = Field(220.0, description="Rated line-line voltage (kV)")
    s_rated: float = Field(400.0, description="Rated power (MVA)")
    i_rated: float = Field(1.05, description="Rated current (kA)")
    conductor_area: float = Field(630.0, description="Conductor cross-section (mm2)")
    conductor_diameter: float = Field(28.3, description="Conductor diameter (mm)")
    r_dc_per_km: float = Field(29.5, description="DC resistance (mOhm/km)")
    c_per_km: float = Field(0.2, description="Charging capacitance (uF/km)")
    l_per_km: float = Field(0.38, description="Series inductance (mH/km)")
    r_ac_per_km: Optional[float] = Field(None, description="AC resistance at operating frequency (mOhm/km)")

    @field_validator(
        "v_rated", "s_rated", "i_rated", "conductor_area", "conductor_diameter",
        "r_dc_per_km", "c_per_km", "l_per_km",
    )
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @field_validator("r_ac_per_km")
    @classmethod
    def _ac_positive(cls, v: Optional[float]):
        if v is not None and not v > 0:
            raise ValueError(f"r_ac_per_km must be > 0, got {v}")
        return v

    @model_validator(mode="after")
    def _rating_consistent(self):
        # [Comment] i * sqrt(3) * v must reproduce s within 5%
        s_from_i = self.i_rated * math.sqrt(3.0) * self.v_rated
        if abs(s_from_i - self.s_rated) > 0.05 * self.s_rated:
            raise ValueError(
                f"cable '{self.name}': i_rated*sqrt(3)*v_rated = {s_from_i:.1f} MVA "
                f"differs from s_rated = {self.s_rated} MVA by more than 5%"
            )
        return self

    @property
    def r_series_per_km(self) -> float:
        """[Returns] Resistance used for the series branch (mOhm/km)"""
        return self.r_ac_per_km if self.r_ac_per_km is not None else self.r_dc_per_km


# [Comment] Datasheet cables of the two collection voltages
CABLE_220KV = CableSpec()
CABLE_66KV = CableSpec(name="66kV-630mm2", v_rated=66.0, s_rated=120.0)


class PiSection(BaseModel):
    """
    [Purpose] One pi-equivalent section; r and x are at the base frequency
    [Fields]
    - group: name of the cable this section belongs to (branch trips remove a whole group)
    """

    model_config = ConfigDict(frozen=True)

    from_bus: str
    to_bus: str
    r: float = Field(..., description="Series resistance (pu)")
    x: float = Field(..., description="Series reactance at f_base (pu)")
    b_half: float = Field(..., description="Half shunt susceptance at f_base, each end (pu)")
    group: str = ""

    @field_validator("r", "b_half")
    @classmethod
    def _non_negative(cls, v: float, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _non_zero_impedance(self):
        if self.r == 0 and self.x == 0:
            raise ValueError(f"section {self.from_bus}-{self.to_bus} has zero series impedance")
        if self.from_bus == self.to_bus:
            raise ValueError(f"section starts and ends at bus '{self.from_bus}'")
        return self


class Transformer(BaseModel):
    """[Purpose] Two-winding transformer: series leakage impedance plus ideal off-nominal ratio at from_bus"""

    model_config = ConfigDict(frozen=True)

    name: str
    from_bus: str
    to_bus: str
    r: float = Field(0.0, description="Winding resistance (pu, system base)")
    x: float = Field(..., description="Leakage reactance at f_base (pu, system base)")
    ratio: float = Field(1.0, description="Off-nominal ratio t (pu)")

    @field_validator("r")
    @classmethod
    def _r_non_negative(cls, v: float):
        if v < 0:
            raise ValueError(f"transformer resistance must be >= 0, got {v}")
        return v

    @field_validator("x", "ratio")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"transformer {info.field_name} must be > 0, got {v}")
        return v


class Bus(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    zone: str = "hv"
    type: BusType = BusType.PQ
    # [Comment] Shunt susceptance of converter filter capacitors (pu at f_base)
    b_shunt: float = 0.0


class DeviceAttachment(BaseModel):
    """[Purpose] Point where a dynamic device meets the network"""

    model_config = ConfigDict(frozen=True)

    device: str
    bus: str
    kind: str


class Network(BaseModel):
    """
    [Purpose] Immutable electrical topology shared by power flow and both simulation modes
    [Comment] validate_network in grid_model checks connectivity and slack assignment
    """

    model_config = ConfigDict(frozen=True)

    base: PerUnitBase = Field(default_factory=PerUnitBase)
    buses: List[Bus]
    branches: List[PiSection] = Field(default_factory=list)
    transformers: List[Transformer] = Field(default_factory=list)
    attachments: List[DeviceAttachment] = Field(default_factory=list)

    @model_validator(mode="after")
    def _endpoints_exist(self):
        ids = [b.id for b in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("bus ids must be unique")
        known = set(ids)
        missing = []
        for br in list(self.branches) + list(self.transformers):
            for end in (br.from_bus, br.to_bus):
                if end not in known:
                    missing.append(end)
        for att in self.attachments:
            if att.bus not in known:
                missing.append(att.bus)
        if missing:
            raise ValueError(f"unknown bus ids referenced: {', '.join(sorted(set(missing)))}")
        for bus in self.buses:
            if bus.zone not in self.base.v_base_ac:
                raise ValueError(f"bus '{bus.id}' is in unknown voltage zone '{bus.zone}'")
        return self

    @property
    def bus_ids(self) -> List[str]:
        return [b.id for b in self.buses]

    def bus_index(self) -> Dict[str, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def slack_buses(self) -> List[str]:
        return [b.id for b in self.buses if b.type == BusType.SLACK]

    def branch_groups(self) -> List[str]:
        groups = [br.group for br in self.branches if br.group]
        return list(dict.fromkeys(groups)) + [t.name for t in self.transformers]

    def attachment(self, device: str) -> DeviceAttachment:
        for att in self.attachments:
            if att.device == device:
                return att
        raise KeyError(f"no device '{device}' attached to the network")

    def without_branches(self, names: Iterable[str]) -> "Network":
        """[Purpose] Copy of the network with the named cables (section groups) or transformers removed"""
        drop = set(names)
        unknown = drop - set(self.branch_groups())
        if unknown:
            raise KeyError(f"unknown branch(es): {', '.join(sorted(unknown))}")
        return self.model_copy(update={
            "branches": [br for br in self.branches if br.group not in drop],
            "transformers": [t for t in self.transformers if t.name not in drop],
        })

    def without_devices(self, devices: Iterable[str]) -> "Network":
        drop = set(devices)
        return self.model_copy(update={
            "attachments": [a for a in self.attachments if a.device not in drop],
        })


class OperatingPoint(BaseModel):
    """
    [Purpose] Converged steady state used to initialize dynamic runs
    [Fields]
    - voltages: per-bus complex voltage as (magnitude pu, angle rad)
    - injections: per-device complex power injection as (P pu, Q pu), system base
    - bus_injections: per-bus net injection (P pu, Q pu) including the slack
    """

    bus_ids: List[str]
    v_mag: List[float]
    v_ang: List[float]
    injections: Dict[str, List[float]] = Field(default_factory=dict)
    bus_p: List[float] = Field(default_factory=list)
    bus_q: List[float] = Field(default_factory=list)
    mismatch: float = 0.0
    iterations: int = 0
    frequency: float = 50.0

    def voltage(self, bus: str) -> complex:
        k = self.bus_ids.index(bus)
        return complex(self.v_mag[k] * math.cos(self.v_ang[k]), self.v_mag[k] * math.sin(self.v_ang[k]))

    def complex_voltages(self) -> List[complex]:
        return [complex(m * math.cos(a), m * math.sin(a)) for m, a in zip(self.v_mag, self.v_ang)]

    def injection(self, device: str) -> complex:
        p, q = self.injections[device]
        return complex(p, q)
