# [Purpose] Wind-farm equivalent: unity power factor current source with a first-order lag
# [Comment] The order and the current are on the system base

from typing import Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import WindFarmParams
from src.services.devices.base import DeviceModel, Signals, as_complex, floor_voltage
from src.utils.errors import InitializationError

STATES = ("i_d", "i_q")


def windfarm_derivatives(x: np.ndarray, v: complex, p_order: float, tau_w: float) -> Tuple[np.ndarray, complex]:
    """
    [Purpose] tau_w di/dt = P v / |v|^2 - i, the current that delivers P at unity power factor
    [Returns] (dx/dt, injected current)
    """
    i = as_complex(x, 0)
    v_eff = floor_voltage(v)
    target = p_order * v_eff / abs(v_eff) ** 2
    di = (target - i) / tau_w
    return np.array([di.real, di.imag]), i


class WindFarmEq(DeviceModel):
    """[Purpose] Aggregated wind farm behind its export cables"""

    kind = "windfarm"

    def __init__(self, name: str, bus: str, rating: float, params: WindFarmParams, s_base: float,
                 omega_base: float, mode: str):
        super().__init__(name, bus, rating, s_base, omega_base, mode)
        self.params = params

    @property
    def state_names(self) -> Tuple[str, ...]:
        return STATES

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        if s.real > self.scale * (1.0 + 1e-12):
            raise InitializationError(f"{self.name}: order {s.real:.3f} pu exceeds the farm rating {self.scale:.3f} pu")
        self.setpoints = {"p_order": s.real}
        i = (s / v).conjugate()
        return np.array([i.real, i.imag])

    def source_current(self, x: np.ndarray, signals: Signals) -> complex:
        return as_complex(x, 0)

    def injection(self, x: np.ndarray, v: complex, signals: Signals) -> complex:
        return as_complex(x, 0)

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        dx, _ = windfarm_derivatives(x, v, self.setpoints["p_order"], self.params.tau_w)
        return dx

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        s = v * as_complex(x, 0).conjugate()
        return {"p": s.real, "q": s.imag}
