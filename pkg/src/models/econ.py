# [Purpose] Techno-economic records: conductor, transformer designs, grid options and cost breakdowns
# [Comment] Money in million euro (MEUR), masses in tonne, lengths in km unless a field says otherwise

import math
from typing import Literal

# [Library] Pydantic - Data validation library using Python type hints
# [Source] https://docs.pydantic.dev/
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.units import EnergyPrice, Length, MoneyPerLength, Power, PowerDensity, ApparentPower

MU_0 = 4e-7 * math.pi
LOW_FREQUENCY = 50.0 / 3.0


def is_low_frequency(f: float) -> bool:
    """[Purpose] Accepts 16.67 as written in tables as well as the exact 50/3"""
    return abs(f - LOW_FREQUENCY) < 0.01


class ConductorModel(BaseModel):
    """
    [Purpose] Solid cylindrical conductor used by the skin-effect model
    [Fields]
    - area: cross-section (mm2)
    - radius: mm
    - resistivity: ohm m, back-computed from the datasheet DC resistance
    - permeability: H/m
    """

    model_config = ConfigDict(frozen=True)

    area: float
    radius: float
    resistivity: float
    permeability: float = MU_0

    @field_validator("area", "radius", "resistivity", "permeability")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @property
    def r_dc_per_km(self) -> float:
        """[Returns] DC resistance in mOhm/km: rho / A, with A in m2 and ohm/m scaled to mOhm/km"""
        return self.resistivity / (self.area * 1e-6) * 1e6


class TransformerDesignSpec(BaseModel):
    """[Purpose] Design parameters of one core-type transformer (voltages line-line)"""

    model_config = ConfigDict(frozen=True)

    name: str = ""
    v_primary: float = Field(..., description="kV")
    v_secondary: float = Field(..., description="kV")
    s_rated: float = Field(..., description="MVA")
    f: float = Field(..., description="Hz")
    b_max: float = Field(..., description="T")
    j_max: float = Field(..., description="A/mm2")
    dv_max: float = Field(..., description="V per turn")

    @field_validator("v_primary", "v_secondary", "s_rated", "f", "b_max", "j_max", "dv_max")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v


class TransformerDesign(BaseModel):
    """
    [Purpose] Active-material result of transformer_design
    [Comment] cost = 7 EUR/kg copper + 3 EUR/kg steel; tonne * EUR/kg is kEUR, hence the 1e-3
    """

    model_config = ConfigDict(frozen=True)

    spec: TransformerDesignSpec
    core_area: float = Field(..., description="m2")
    turns_primary: int
    turns_secondary: int
    conductor_area_primary: float = Field(..., description="mm2")
    conductor_area_secondary: float = Field(..., description="mm2")
    window_side: float = Field(..., description="m")
    core_diameter: float = Field(..., description="m")
    mass_steel: float = Field(..., description="tonne")
    mass_copper: float = Field(..., description="tonne")
    cost: float = Field(..., description="MEUR")

    @model_validator(mode="after")
    def _cost_consistent(self):
        expected = (7.0 * self.mass_copper + 3.0 * self.mass_steel) * 1e-3
        if abs(self.cost - expected) > 1e-9 * max(1.0, expected):
            raise ValueError(f"cost {self.cost} MEUR does not match material prices ({expected} MEUR)")
        return self

    @property
    def mass(self) -> float:
        return self.mass_steel + self.mass_copper


class GridOption(BaseModel):
    """[Purpose] One collection-grid alternative: voltage x frequency, for a wind farm at a distance"""

    model_config = ConfigDict(frozen=True)

    voltage: Literal[66, 220] = 220
    frequency: float = 50.0
    power: float = Field(400.0, description="Wind farm power (MW)")
    distance: float = Field(0.0, description="km")

    @field_validator("frequency")
    @classmethod
    def _frequency(cls, v: float):
        if is_low_frequency(v):
            return LOW_FREQUENCY
        if v == 50.0:
            return v
        raise ValueError(f"frequency must be 16.67 Hz or 50 Hz, got {v}")

    @field_validator("power")
    @classmethod
    def _power(cls, v: float):
        if not v > 0:
            raise ValueError(f"power must be > 0, got {v}")
        return v

    @field_validator("distance")
    @classmethod
    def _distance(cls, v: float):
        if v < 0:
            raise ValueError(f"distance must be >= 0, got {v}")
        return v

    @property
    def label(self) -> str:
        f = "16.67Hz" if is_low_frequency(self.frequency) else "50Hz"
        return f"{self.voltage}kV_{f}"


class CostBreakdown(BaseModel):
    """[Purpose] Itemized 20-year cost of ownership of one grid option (MEUR)"""

    model_config = ConfigDict(frozen=True)

    option: str = ""
    distance: float = 0.0
    transformers: float
    platform: float
    cables_supply: float
    cables_install: float
    losses_20yr: float
    financing: float
    total: float

    @model_validator(mode="after")
    def _sum_and_sign(self):
        parts = (
            self.transformers, self.platform, self.cables_supply,
            self.cables_install, self.losses_20yr, self.financing,
        )
        if any(p < 0 for p in parts):
            raise ValueError("cost components must be >= 0")
        if abs(sum(parts) - self.total) > 1e-9 * max(1.0, abs(self.total)):
            raise ValueError(f"total {self.total} differs from the sum of components {sum(parts)}")
        return self


class TcoAssumptions(BaseModel):
    """
    [Purpose] The [tco] table: economic and electrical assumptions of the cost model
    [Comment] data_source "published" uses tabulated transformer costs and cable resistances at rated current;
              "model" derives both from the physical models with equal cable sharing at power_factor
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    power: Power = Field(400.0, description="Wind farm power (MW)")
    turbines: int = 40
    turbine_rating: ApparentPower = 10.0
    utilization: float = 0.5
    energy_price: EnergyPrice = 30.0
    years: int = 20
    interest_rate: float = Field(0.02, description="Fraction per year")
    install_cost: MoneyPerLength = 0.345
    cable_cost_66: MoneyPerLength = 0.72
    cable_cost_220: MoneyPerLength = 1.31
    power_factor: float = 0.95
    data_source: Literal["published", "model"] = "published"
    distance: Length = Field(20.0, description="Distance used by a single tco evaluation (km)")
    sweep_max: Length = 100.0
    sweep_step: Length = 1.0
    density: PowerDensity = Field(6.0, description="Wind power density for the area study (W/m2)")

    @field_validator("utilization", "power_factor")
    @classmethod
    def _fraction(cls, v: float, info):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{info.field_name} must be within [0, 1], got {v}")
        return v

    @field_validator("years", "turbines")
    @classmethod
    def _count(cls, v: int, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("interest_rate", "energy_price", "install_cost", "cable_cost_66", "cable_cost_220", "distance")
    @classmethod
    def _non_negative(cls, v: float, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {v}")
        return v

    @field_validator("power", "turbine_rating", "sweep_max", "sweep_step", "density")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v
