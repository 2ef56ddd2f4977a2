# [Purpose] Pydantic schema of the run configuration document
# [Source] TOML file with [network], [devices], [scenario], [solver] and [tco] tables
# [Comment] Dimensioned keys carry a unit ("25 km", "100 us"); per-unit gains and counts are bare numbers

from typing import List

# [Library] Pydantic - Data validation library using Python type hints
# [Source] https://docs.pydantic.dev/
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.models.devices import DevicesSection
from src.models.econ import TcoAssumptions
from src.models.simulation import ScenarioConfig
from src.utils.units import (
    ApparentPower,
    CapacitancePerLength,
    Frequency,
    InductancePerLength,
    Length,
    Power,
    ResistancePerLength,
    Time,
    Voltage,
)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class NetworkSection(Section):
    """
    [Purpose] The [network] table: hub topology and per-unit base
    [Comment] Farm k is connected by cables_per_farm parallel cables of farm_distances[k-1]
    """

    # [Field] Per-unit base
    s_base: ApparentPower = Field(1000.0, description="Base power (MVA)")
    f_base: Frequency = Field(50.0, description="Base and operating frequency (Hz)")
    v_hub: Voltage = Field(220.0, description="Hub AC voltage (kV)")

    # [Field] Wind farms and export cables
    farm_distances: List[Length] = Field(
        default_factory=lambda: [10.0, 12.5, 15.0, 20.0, 25.0],
        description="Cable length of each wind farm (km)",
    )
    farm_power: Power = Field(800.0, description="Active power order of each wind farm (MW)")
    farm_rating: ApparentPower = Field(800.0, description="Rating of each wind farm (MVA); 700 is the alternative")
    cables_per_farm: int = 2
    section_length: Length = Field(10.0, description="Maximum length of one pi-section (km)")
    cable_voltage: Voltage = 220.0
    cable_r_per_km: ResistancePerLength = 29.5
    cable_c_per_km: CapacitancePerLength = 0.2
    cable_l_per_km: InductancePerLength = 0.38

    # [Field] HVDC links (one offshore converter each)
    n_links: int = 5

    @field_validator("farm_distances")
    @classmethod
    def _distances(cls, v: List[float]):
        if not v:
            raise ValueError("at least one wind farm is required")
        if any(d <= 0 for d in v):
            raise ValueError("farm distances must be > 0 km")
        return v

    @field_validator("cables_per_farm", "n_links")
    @classmethod
    def _count(cls, v: int, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v

    @field_validator("s_base", "f_base", "v_hub", "section_length", "farm_rating",
                     "cable_r_per_km", "cable_c_per_km", "cable_l_per_km")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @model_validator(mode="after")
    def _farm_within_rating(self):
        if self.farm_power < 0:
            raise ValueError(f"farm_power must be >= 0, got {self.farm_power}")
        if self.farm_power > self.farm_rating:
            raise ValueError(
                f"farm_power ({self.farm_power} MW) exceeds farm_rating ({self.farm_rating} MVA) at unity power factor"
            )
        if self.cable_voltage != self.v_hub:
            raise ValueError(f"cable_voltage ({self.cable_voltage} kV) must equal v_hub ({self.v_hub} kV)")
        return self


class SolverSection(Section):
    """[Purpose] The [solver] table: step sizes, Newton tolerances and analysis thresholds"""

    dt_emt: Time = Field(1e-4, description="EMT-mode step (s)")
    dt_phasor: Time = Field(5e-3, description="Phasor-mode step (s)")
    newton_tol: float = 1e-10
    newton_max_iter: int = 20
    pf_tol: float = 1e-8
    linearize_eps: float = 1e-6
    mismatch_eps: float = Field(0.01, description="Negligible EMT/phasor difference (pu)")
    band_v: float = Field(0.01, description="Voltage settling band (pu)")
    band_f: Frequency = Field(0.02, description="Frequency settling band (Hz)")
    emt_record_stride: int = Field(1, description="Record every n-th EMT step")
    parallel: bool = Field(False, description="Run both modes of 'compare' in worker processes")

    @field_validator("dt_emt", "dt_phasor", "newton_tol", "pf_tol", "linearize_eps",
                     "mismatch_eps", "band_v", "band_f")
    @classmethod
    def _positive(cls, v: float, info):
        if not v > 0:
            raise ValueError(f"{info.field_name} must be > 0, got {v}")
        return v

    @field_validator("newton_max_iter", "emt_record_stride")
    @classmethod
    def _count(cls, v: int, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1, got {v}")
        return v


class RunConfig(Section):
    """
    [Purpose] Complete, validated run configuration
    [Usage]
    from src.services.config_io import parse_config
    cfg = parse_config(open("configs/zero_inertia_s2.toml").read())
    """

    network: NetworkSection = Field(default_factory=NetworkSection)
    devices: DevicesSection = Field(default_factory=DevicesSection)
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    solver: SolverSection = Field(default_factory=SolverSection)
    tco: TcoAssumptions = Field(default_factory=TcoAssumptions)

    @model_validator(mode="after")
    def _cross_references(self):
        n_links = self.network.n_links
        n_farms = len(self.network.farm_distances)
        if self.scenario.link > n_links:
            raise ValueError(f"scenario.link = {self.scenario.link} but only {n_links} HVDC links exist")
        if self.scenario.farm is not None:
            farms = {f"wf{k}" for k in range(1, n_farms + 1)}
            if self.scenario.farm not in farms:
                raise ValueError(f"scenario.farm '{self.scenario.farm}' is not one of {sorted(farms)}")
        if len(self.devices.central.alpha) != n_links:
            raise ValueError(
                f"devices.central.alpha has {len(self.devices.central.alpha)} entries, expected {n_links}"
            )
        return self
