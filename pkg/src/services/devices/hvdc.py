# [Purpose] Point-to-point HVDC link between an offshore converter and its onshore area
# [Comment] Two terminal capacitors (tau_c = 2 h_dc), one RL line, onshore PI on the DC voltage
# [Comment] tau_c dv_off/dt = p_in / v_off - i; l_dc di/dt = v_off - v_on - r_dc i; tau_c dv_on/dt = i - p_out / v_on

import math
from typing import NamedTuple, Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import HvdcParams
from src.services.devices.base import DeviceModel, Signals

STATES = ("v_off", "i_dc", "v_on", "z")

# [Comment] Divisor floor for a discharged capacitor; the undervoltage trip acts long before
V_DC_FLOOR = 1e-3


class HvdcOutput(NamedTuple):
    p_out: float        # power delivered to the onshore area, link base
    v_off: float
    v_on: float
    undervoltage: bool


def hvdc_derivatives(x: np.ndarray, p_in: float, params: HvdcParams) -> Tuple[np.ndarray, HvdcOutput]:
    """
    [Purpose] DC-side dynamics for offshore power p_in (link base)
    [Returns] (dx/dt, HvdcOutput); undervoltage is set when either terminal is below v_trip
    """
    v_off, i, v_on, z = x
    tau_c = 2.0 * params.h_dc
    error = v_on - 1.0
    p_out = params.k_p * error + z
    dx = np.array([
        (p_in / max(v_off, V_DC_FLOOR) - i) / tau_c,
        (v_off - v_on - params.r_dc * i) / params.l_dc,
        (i - p_out / max(v_on, V_DC_FLOOR)) / tau_c,
        params.k_i * error,
    ])
    undervoltage = min(v_off, v_on) < params.v_trip
    return dx, HvdcOutput(p_out, v_off, v_on, undervoltage)


def hvdc_steady_state(p_in: float, params: HvdcParams) -> np.ndarray:
    """
    [Purpose] Equilibrium with the onshore terminal at 1 pu
    [Comment] p_in = i v_off = i + r_dc i^2, solved for the line current
    """
    r = params.r_dc
    if r == 0:
        i = p_in
    else:
        disc = 1.0 + 4.0 * r * p_in
        if disc < 0:
            raise ValueError(f"no DC equilibrium for p_in = {p_in} pu")
        i = (math.sqrt(disc) - 1.0) / (2.0 * r)
    return np.array([1.0 + r * i, i, 1.0, i])


class HvdcLink(DeviceModel):
    """[Purpose] HVDC link k; reads its converter's DC power and publishes the onshore delivery"""

    kind = "hvdc"

    def __init__(self, name: str, link: int, params: HvdcParams, s_base: float, omega_base: float, mode: str):
        super().__init__(name, None, params.rating, s_base, omega_base, mode)
        self.params = params
        self.link = link

    @property
    def state_names(self) -> Tuple[str, ...]:
        return STATES

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        x = hvdc_steady_state(signals.get(f"p_dc:{self.link}", 0.0), self.params)
        signals[f"p_out:{self.link}"] = float(x[3])
        return x

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        dx, out = hvdc_derivatives(x, signals.get(f"p_dc:{self.link}", 0.0), self.params)
        signals[f"p_out:{self.link}"] = out.p_out
        return dx

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        _, out = hvdc_derivatives(x, signals.get(f"p_dc:{self.link}", 0.0), self.params)
        return {
            "v_off": out.v_off,
            "v_on": out.v_on,
            "p_out": out.p_out * self.scale,
            "undervoltage": float(out.undervoltage),
        }
