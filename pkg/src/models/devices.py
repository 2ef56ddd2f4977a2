# [Purpose] Parameter records of every dynamic device on the hub grid
# [Comment] Per-unit values are on the device's own rating unless a field says otherwise
# [Comment] The same records are the [devices.*] tables of the run configuration

from typing import List

# [Library] Pydantic - Data validation library using Python type hints
# [Source] https://docs.pydantic.dev/
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.units import AngularRate, ApparentPower, Frequency, Time, Voltage


class DeviceParams(BaseModel):
    """[Purpose] Base for device tables: unknown keys are rejected, records are immutable"""

    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_positive(v: float, name: str) -> float:
    if not v > 0:
        raise ValueError(f"{name} must be > 0, got {v}")
    return v


class GridFormingParams(DeviceParams):
    """
    [Purpose] Grid-forming offshore converter (power-synchronization droop with virtual impedance)
    [Comment] droop_mp = 0.005 is the calibrated default; 0.01 doubles the steady frequency offsets
    """

    rating: ApparentPower = Field(1100.0, description="Converter rating (MVA)")
    droop_mp: float = Field(0.005, description="P-f droop (pu frequency per pu power)")
    tau_p: Time = Field(0.01, description="Power measurement filter (s)")
    v_ref: float = Field(1.0, description="Voltage magnitude setpoint (pu)")
    r_v: float = Field(0.05, description="Virtual resistance (pu)")
    x_v: float = Field(0.1, description="Virtual reactance (pu)")
    alpha_v: AngularRate = Field(50.0, description="Corner of the virtual-impedance high-pass (rad/s)")
    l_f: float = Field(0.15, description="Filter inductance (pu)")
    r_f: float = Field(0.005, description="Filter resistance (pu)")
    c_f: float = Field(0.05, description="Filter capacitance as susceptance at nominal frequency (pu)")
    i_max: float = Field(1.1, description="Current limit (pu)")
    q_droop: bool = Field(False, description="Enable the optional Q-V droop on the voltage setpoint")
    n_q: float = Field(0.05, description="Q-V droop gain (pu voltage per pu reactive power)")
    transformer_x: float = Field(0.12, description="Converter transformer leakage reactance (pu)")
    transformer_r: float = Field(0.002, description="Converter transformer resistance (pu)")

    @field_validator("rating", "droop_mp", "tau_p", "v_ref", "alpha_v", "l_f", "c_f", "transformer_x")
    @classmethod
    def _positive(cls, v: float, info):
        return _check_positive(v, info.field_name)

    @field_validator("r_v", "x_v", "r_f", "n_q", "transformer_r")
    @classmethod
    def _non_negative(cls, v: float, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {v}")
        return v

    @field_validator("i_max")
    @classmethod
    def _limit_at_least_rated(cls, v: float):
        if v < 1.0:
            raise ValueError(f"i_max must be >= 1 pu, got {v}")
        return v


class GridFollowingParams(DeviceParams):
    """
    [Purpose] Grid-following offshore converter: PLL, P-f and Q-V droops, dq current loop, active damping
    [Comment] PLL and current-loop gains are derived from the bandwidths below
    """

    rating: ApparentPower = Field(1100.0, description="Converter rating (MVA)")
    k_f: float = Field(5.0, description="P-f droop (pu power per pu frequency)")
    k_v: float = Field(5.0, description="Q-V droop (pu reactive power per pu voltage)")
    v_ref: float = Field(1.0, description="Voltage setpoint of the Q-V droop (pu)")
    pll_bandwidth: Frequency = Field(20.0, description="PLL natural frequency (Hz)")
    pll_damping: float = Field(0.707, description="PLL damping ratio")
    current_bandwidth: Frequency = Field(400.0, description="Inner current loop bandwidth (Hz)")
    l_f: float = Field(0.15, description="Filter inductance (pu)")
    r_f: float = Field(0.005, description="Filter resistance (pu)")
    c_f: float = Field(0.05, description="Terminal capacitor as susceptance at nominal frequency (pu)")
    g_ad: float = Field(0.5, description="Active damping conductance on the high-passed voltage (pu)")
    omega_ad: AngularRate = Field(50.0, description="Active damping filter corner (rad/s)")
    i_max: float = Field(1.1, description="Current limit (pu)")
    tau_phasor: Time = Field(0.01, description="Current lag of the phasor-mode model (s)")
    lock_threshold: float = Field(0.1, description="Voltage below which the PLL is flagged as unlocked (pu)")
    transformer_x: float = Field(0.12, description="Converter transformer leakage reactance (pu)")
    transformer_r: float = Field(0.002, description="Converter transformer resistance (pu)")

    @field_validator(
        "rating", "pll_bandwidth", "pll_damping", "current_bandwidth", "l_f", "c_f",
        "omega_ad", "tau_phasor", "transformer_x", "v_ref",
    )
    @classmethod
    def _positive(cls, v: float, info):
        return _check_positive(v, info.field_name)

    @field_validator("k_f", "k_v", "r_f", "g_ad", "transformer_r", "lock_threshold")
    @classmethod
    def _non_negative(cls, v: float, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {v}")
        return v

    @field_validator("i_max")
    @classmethod
    def _limit_at_least_rated(cls, v: float):
        if v < 1.0:
            raise ValueError(f"i_max must be >= 1 pu, got {v}")
        return v


class CondenserParams(DeviceParams):
    """
    [Purpose] Synchronous condenser: two-axis transient model, swing equation and static AVR
    [Comment] The step-up transformer reactance x_t is lumped into the stator path
    """

    count: int = Field(2, description="Number of condensers at the hub (low-inertia topology)")
    rating: ApparentPower = Field(350.0, description="Machine rating (MVA)")
    h: Time = Field(2.0, description="Inertia constant (s)")
    d: float = Field(0.0, description="Damping (pu torque per pu speed)")
    x_d: float = 1.8
    x_d_t: float = Field(0.3, description="d-axis transient reactance, also used for the q axis (pu)")
    x_q: float = 1.0
    t_d0: Time = Field(7.0, description="d-axis open-circuit transient time constant (s)")
    t_q0: Time = Field(0.5, description="q-axis open-circuit transient time constant (s)")
    x_t: float = Field(0.15, description="Step-up transformer reactance (pu)")
    r_a: float = Field(0.005, description="Stator plus transformer resistance (pu)")
    k_a: float = Field(200.0, description="AVR gain")
    t_a: Time = Field(0.05, description="AVR time constant (s)")
    efd_max: float = 5.0
    efd_min: float = -5.0

    @field_validator("count")
    @classmethod
    def _count(cls, v: int):
        if v < 1:
            raise ValueError(f"count must be >= 1, got {v}")
        return v

    @field_validator("h")
    @classmethod
    def _inertia_range(cls, v: float):
        if not 0.1 <= v <= 20.0:
            raise ValueError(f"h must be within [0.1, 20] s, got {v}")
        return v

    @field_validator("rating", "x_d", "x_d_t", "x_q", "t_d0", "t_q0", "k_a", "t_a")
    @classmethod
    def _positive(cls, v: float, info):
        return _check_positive(v, info.field_name)

    @field_validator("d", "x_t", "r_a")
    @classmethod
    def _non_negative(cls, v: float, info):
        if v < 0:
            raise ValueError(f"{info.field_name} must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _reactance_order(self):
        if not self.x_d > self.x_d_t:
            raise ValueError("x_d must exceed x_d_t")
        if not self.x_q >= self.x_d_t:
            raise ValueError("x_q must be >= x_d_t")
        if not self.efd_max > self.efd_min:
            raise ValueError("efd_max must exceed efd_min")
        return self


class HvdcParams(DeviceParams):
    """
    [Purpose] Point-to-point HVDC link: two DC capacitors, one RL line, onshore DC-voltage PI
    [Comment] DC quantities are per unit of v_dc_base and the link rating
    """

    rating: ApparentPower = Field(1100.0, description="Link rating (MVA)")
    v_dc_base: Voltage = Field(640.0, description="Pole-to-pole DC voltage base (kV)")
    h_dc: Time = Field(0.05, description="Stored energy of each terminal capacitor over rating (s)")
    l_dc: Time = Field(3.4e-4, description="DC line inductance as a time constant (pu s)")
    r_dc: float = Field(0.005, description="DC line resistance (pu)")
    k_p: float = Field(4.2, description="Onshore DC-voltage controller proportional gain")
    k_i: float = Field(90.0, description="Onshore DC-voltage controller integral gain (1/s)")
    v_trip: float = Field(0.5, description="DC undervoltage trip level (pu)")

    @field_validator("rating", "v_dc_base", "h_dc", "l_dc", "k_p", "k_i", "v_trip")
    @classmethod
    def _positive(cls, v: float, info):
        return _check_positive(v, info.field_name)

    @field_validator("r_dc")
    @classmethod
    def _non_negative(cls, v: float):
        if v < 0:
            raise ValueError(f"r_dc must be >= 0, got {v}")
        return v


class OnshoreParams(DeviceParams):
    """[Purpose] Onshore AC area behind each HVDC link: aggregated inertia with a droop governor"""

    rating: ApparentPower = Field(10000.0, description="Area rating (MVA)")
    h: Time = Field(5.0, description="Area inertia constant (s)")
    r_droop: float = Field(0.05, description="Governor droop (pu frequency per pu power)")
    t_g: Time = Field(0.5, description="Governor time constant (s)")
    x_th: float = Field(0.1, description="Thevenin reactance at the onshore converter (pu, reported only)")

    @field_validator("rating", "h", "r_droop", "t_g")
    @classmethod
    def _positive(cls, v: float, info):
        return _check_positive(v, info.field_name)


class WindFarmParams(DeviceParams):
    """[Purpose] Wind-farm equivalent: unity power factor current injection with a first-order lag"""

    tau_w: Time = Field(0.02, description="Current-injection lag (s)")

    @field_validator("tau_w")
    @classmethod
    def _positive(cls, v: float):
        return _check_positive(v, "tau_w")


class CentralParams(DeviceParams):
    """[Purpose] Centralized frequency controller acting on the condenser speed (low-inertia topology)"""

    enabled: bool = True
    k_c: float = Field(30.0, description="Integral gain (pu power per pu speed per second, system base)")
    alpha: List[float] = Field(
        default_factory=lambda: [0.2] * 5,
        description="Participation factor of each converter",
    )

    @field_validator("k_c")
    @classmethod
    def _gain(cls, v: float):
        if v < 0:
            raise ValueError(f"k_c must be >= 0, got {v}")
        return v

    @field_validator("alpha")
    @classmethod
    def _participation(cls, alpha: List[float]):
        if not alpha:
            raise ValueError("alpha needs at least one participation factor")
        if any(a < 0 for a in alpha):
            raise ValueError("participation factors must be >= 0")
        if abs(sum(alpha) - 1.0) > 1e-9:
            raise ValueError(f"participation factors must sum to 1, got {sum(alpha)}")
        return alpha


class DevicesSection(DeviceParams):
    """[Purpose] The [devices] table: one sub-table per device family"""

    gfm: GridFormingParams = Field(default_factory=GridFormingParams)
    gfl: GridFollowingParams = Field(default_factory=GridFollowingParams)
    sc: CondenserParams = Field(default_factory=CondenserParams)
    hvdc: HvdcParams = Field(default_factory=HvdcParams)
    onshore: OnshoreParams = Field(default_factory=OnshoreParams)
    windfarm: WindFarmParams = Field(default_factory=WindFarmParams)
    central: CentralParams = Field(default_factory=CentralParams)
