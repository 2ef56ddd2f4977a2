# [Purpose] Onshore AC area behind an HVDC link: aggregated inertia with a first-order droop governor
# [Comment] Own base is the area rating; dp is the extra power its machines must supply

from typing import Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import OnshoreParams
from src.services.devices.base import DeviceModel, Signals

STATES = ("dw", "p_gov")


def onshore_derivatives(x: np.ndarray, dp: float, params: OnshoreParams) -> Tuple[np.ndarray, float]:
    """
    [Purpose] 2H d(dw)/dt = p_gov - dp; T_g dp_gov/dt = -dw / R - p_gov
    [Returns] (dx/dt, frequency deviation dw in pu); steady state dw = -R dp
    """
    dw, p_gov = x
    return np.array([
        (p_gov - dp) / (2.0 * params.h),
        (-dw / params.r_droop - p_gov) / params.t_g,
    ]), float(dw)


class OnshoreEquivalent(DeviceModel):
    """
    [Purpose] Area k: its machines cover the load step minus the change of HVDC infeed
    [Comment] setpoints["load"] is the load step on the system base
    """

    kind = "onshore"

    def __init__(self, name: str, link: int, link_rating: float, params: OnshoreParams, s_base: float,
                 omega_base: float, mode: str):
        super().__init__(name, None, params.rating, s_base, omega_base, mode)
        self.params = params
        self.link = link
        self.link_scale = link_rating / s_base
        self.p_infeed0 = 0.0

    @property
    def state_names(self) -> Tuple[str, ...]:
        return STATES

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        self.p_infeed0 = signals.get(f"p_out:{self.link}", 0.0)
        self.setpoints = {"load": 0.0}
        return np.zeros(2)

    def power_deficit(self, signals: Signals) -> float:
        """[Returns] Extra power the area's machines must supply, own base"""
        infeed = (signals.get(f"p_out:{self.link}", 0.0) - self.p_infeed0) * self.link_scale
        return (self.setpoints["load"] - infeed) / self.scale

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        dx, _ = onshore_derivatives(x, self.power_deficit(signals), self.params)
        return dx

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        return {"dw": float(x[0]), "deficit": self.power_deficit(signals) * self.scale}
