# [Purpose] Dynamic device models of the hub grid
# [Comment] Each module exposes a pure *_derivatives function and the DeviceModel class the engine assembles

from src.services.devices.base import DeviceModel, clamp_current
from src.services.devices.central import (
    CentralController,
    central_controller_step,
    central_derivatives,
    live_participation,
)
from src.services.devices.condenser import SynchronousCondenser, avr_command, sc_derivatives
from src.services.devices.gfl import GridFollowingVsc, gfl_derivatives
from src.services.devices.gfm import GridFormingVsc, gfm_derivatives
from src.services.devices.hvdc import HvdcLink, hvdc_derivatives, hvdc_steady_state
from src.services.devices.onshore import OnshoreEquivalent, onshore_derivatives
from src.services.devices.windfarm import WindFarmEq, windfarm_derivatives

__all__ = [
    "DeviceModel",
    "clamp_current",
    "CentralController",
    "central_controller_step",
    "live_participation",
    "central_derivatives",
    "SynchronousCondenser",
    "avr_command",
    "sc_derivatives",
    "GridFollowingVsc",
    "gfl_derivatives",
    "GridFormingVsc",
    "gfm_derivatives",
    "HvdcLink",
    "hvdc_derivatives",
    "hvdc_steady_state",
    "OnshoreEquivalent",
    "onshore_derivatives",
    "WindFarmEq",
    "windfarm_derivatives",
]
