# [Purpose] Types exchanged by the simulation engine and the scenario lab
# [Comment] Trace holds numpy arrays; everything else is plain validated data

from enum import Enum
from typing import Any, Dict, List, Literal, Optional

# [Library] NumPy - arrays backing trace channels
# [Source] https://numpy.org/
import numpy as np

# [Library] Pydantic - Data validation library using Python type hints
# [Source] https://docs.pydantic.dev/
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.units import Power, Time

SCENARIO_IDS = ("s1-power-request", "s2-converter-trip", "s3-windfarm-trip")


class EventKind(str, Enum):
    SETPOINT_STEP = "setpoint-step"
    DEVICE_TRIP = "device-trip"
    BRANCH_TRIP = "branch-trip"
    LOAD_STEP = "load-step"


class Event(BaseModel):
    """
    [Purpose] Disturbance applied at a step boundary
    [Fields]
    - setpoint-step: device, field, delta
    - device-trip: device
    - branch-trip: branch (a cable name or transformer name)
    - load-step: device (an onshore area), delta in pu of the system base
    """

    model_config = ConfigDict(frozen=True)

    time: float
    kind: EventKind
    device: Optional[str] = None
    field: Optional[str] = None
    delta: float = 0.0
    branch: Optional[str] = None

    @field_validator("time")
    @classmethod
    def _non_negative_time(cls, v: float):
        if v < 0:
            raise ValueError(f"event time must be >= 0, got {v}")
        return v

    @model_validator(mode="after")
    def _target_given(self):
        if self.kind == EventKind.SETPOINT_STEP and not (self.device and self.field):
            raise ValueError("setpoint-step needs device and field")
        if self.kind in (EventKind.DEVICE_TRIP, EventKind.LOAD_STEP) and not self.device:
            raise ValueError(f"{self.kind.value} needs a device")
        if self.kind == EventKind.BRANCH_TRIP and not self.branch:
            raise ValueError("branch-trip needs a branch")
        return self

    def describe(self) -> str:
        if self.kind == EventKind.SETPOINT_STEP:
            return f"setpoint-step {self.device}.{self.field} {self.delta:+g}"
        if self.kind == EventKind.LOAD_STEP:
            return f"load-step {self.device} {self.delta:+g}"
        if self.kind == EventKind.BRANCH_TRIP:
            return f"branch-trip {self.branch}"
        return f"device-trip {self.device}"


class EventMarker(BaseModel):
    model_config = ConfigDict(frozen=True)

    time: float
    description: str


class Trace(BaseModel):
    """
    [Purpose] Uniformly sampled named time series produced by one run
    [Fields]
    - time: sample instants (s), strictly increasing
    - channels: name -> samples, same length as time
    - events: applied events, recorded at the step boundary where they took effect
    - metadata: scenario id, mode, inertia, counters of non-fatal flags
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    time: np.ndarray
    channels: Dict[str, np.ndarray]
    events: List[EventMarker] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self):
        time = np.asarray(self.time, dtype=float)
        if time.ndim != 1:
            raise ValueError("time grid must be one-dimensional")
        if time.size > 1 and not np.all(np.diff(time) > 0):
            raise ValueError("time grid must be strictly increasing")
        for name, samples in self.channels.items():
            if np.asarray(samples).shape != time.shape:
                raise ValueError(f"channel '{name}' has {np.asarray(samples).size} samples, time has {time.size}")
        return self

    @property
    def channel_names(self) -> List[str]:
        return list(self.channels)

    def __len__(self) -> int:
        return int(np.asarray(self.time).size)


class ScenarioConfig(BaseModel):
    """
    [Purpose] The [scenario] table: which experiment to run and in which fidelity
    [Comment] Device overrides live in the [devices] table of the same run configuration
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: Literal["s1-power-request", "s2-converter-trip", "s3-windfarm-trip", "none"] = "s2-converter-trip"
    inertia: Literal["zero", "low"] = "zero"
    mode: Literal["emt", "phasor", "both"] = "phasor"
    t_event: Time = Field(0.5, description="Disturbance time (s)")
    t_end: Time = Field(5.0, description="End of simulation (s)")
    link: int = Field(1, description="HVDC link of the power request or converter trip (1-based)")
    farm: Optional[str] = Field(None, description="Wind farm to trip; the furthest farm when omitted")
    request: Power = Field(200.0, description="Power requested by the onshore area of the link (MW)")
    load_step: bool = Field(True, description="Apply the matching onshore load step in s1")

    @field_validator("link")
    @classmethod
    def _link(cls, v: int):
        if v < 1:
            raise ValueError(f"link must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def _window(self):
        if not self.t_event >= 0:
            raise ValueError(f"t_event must be >= 0, got {self.t_event}")
        if not self.t_event < self.t_end:
            raise ValueError(f"t_event ({self.t_event} s) must be before t_end ({self.t_end} s)")
        return self


class MetricReport(BaseModel):
    """
    [Purpose] Secure-operation criteria evaluated on the post-event window of one trace
    [Comment] settling_times is None for a channel that never settles; its name is then in unsettled
    """

    scenario: str = ""
    mode: str = ""
    inertia: str = ""
    max_dv_hub: float = 0.0
    max_df_offshore_hz: float = 0.0
    settling_times: Dict[str, Optional[float]] = Field(default_factory=dict)
    unsettled: List[str] = Field(default_factory=list)
    max_dpdt_onshore: Dict[str, float] = Field(default_factory=dict)
    onshore_nadirs_hz: Dict[str, float] = Field(default_factory=dict)
    converter_dp: Dict[str, float] = Field(default_factory=dict)
    overshoot: Dict[str, float] = Field(default_factory=dict)
    max_current_ratio: float = 0.0


class ChannelMismatch(BaseModel):
    rms: float
    max: float
    time_to_negligible: float


class MismatchReport(BaseModel):
    """[Purpose] EMT versus phasor differences per shared channel, times measured from the event"""

    scenario: str = ""
    inertia: str = ""
    epsilon: float
    t_event: float
    channels: Dict[str, ChannelMismatch] = Field(default_factory=dict)


class ModeInfo(BaseModel):
    eigenvalue: complex
    frequency_hz: float
    damping: float
    reference: bool = False


class ModeMatch(BaseModel):
    """[Purpose] A phasor-mode eigenvalue and its nearest EMT-mode eigenvalue"""

    phasor: complex
    emt: Optional[complex] = None
    relative_error: float
    matched: bool


class LinearizationReport(BaseModel):
    """
    [Purpose] Small-signal view of an equilibrium
    [Fields]
    - modes: eigenvalues with frequency (Hz) and damping ratio
    - stable: every non-reference eigenvalue has a negative real part
    - sensitivity: largest relative eigenvalue change when the perturbation is halved
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    a_matrix: np.ndarray
    modes: List[ModeInfo]
    stable: bool
    sensitivity: float
    epsilon: float
    warnings: List[str] = Field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.modes])


class PropagationReport(BaseModel):
    """
    [Purpose] Onshore impact of one scenario under both inertia topologies
    [Fields]
    - max_dpdt: largest |dP/dt| of power delivered onshore (pu/s) per inertia topology
    - nadirs_hz: largest onshore frequency deviation per topology and area (signed, Hz)
    - delivered: change of total onshore delivery between pre-event and final sample (pu)
    - overshoot: largest overshoot of delivered power beyond its final change (pu)
    - ratio: zero-inertia max_dpdt over low-inertia max_dpdt (inf when the latter is zero)
    """

    scenario: str = ""
    max_dpdt: Dict[str, float] = Field(default_factory=dict)
    nadirs_hz: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    delivered: Dict[str, float] = Field(default_factory=dict)
    overshoot: Dict[str, float] = Field(default_factory=dict)
    ratio: float = 0.0
    low_inertia_gentler: bool = True


class AcceptanceCheck(BaseModel):
    name: str
    status: Literal["PASS", "FAIL", "WARNING"]
    details: str = ""
