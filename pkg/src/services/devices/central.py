# [Purpose] Centralized frequency controller of the low-inertia hub
# [Comment] Integrates the condenser speed deviation and splits the correction over the converters by alpha
# [Comment] State and corrections are on the system base; converters receive them on their own rating
# [Why] A tripped converter cannot act on its share, so the live converters split the whole correction

from typing import Collection, List, Sequence, Set, Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import CentralParams
from src.services.devices.base import DeviceModel, Signals, mean_condenser_speed


def central_controller_step(
    z: float, dw_sc: float, dt: float, k_c: float, alpha: Sequence[float]
) -> Tuple[float, List[float]]:
    """
    [Purpose] Advances the integral state over dt for a speed deviation held constant over the interval
    [Returns] (new total correction, per-converter corrections alpha_i * total)
    [Usage] central_controller_step(0.0, 0.01, 1.0, 2.0, [0.5, 0.3, 0.2]) -> (0.02, [0.01, 0.006, 0.004])
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    z_new = z + k_c * dw_sc * dt
    return z_new, [a * z_new for a in alpha]


def central_derivatives(z: float, dw_sc: float, k_c: float) -> float:
    """[Purpose] Continuous form dz/dt = K_c dw_sc used inside the integrator"""
    return k_c * dw_sc


def live_participation(alpha: Sequence[float], converters: Sequence[str], tripped: Collection[str]) -> List[float]:
    """
    [Purpose] Participation factors rescaled over the converters still in service
    [Returns] 0 for tripped converters; the others scaled to keep the original sum (all 0 when none is left)
    [Usage] live_participation([0.5, 0.3, 0.2], ["conv1", "conv2", "conv3"], {"conv1"}) -> [0.0, 0.6, 0.4]
    """
    kept = [0.0 if name in tripped else a for a, name in zip(alpha, converters)]
    remaining = sum(kept)
    if remaining == 0:
        return [0.0] * len(kept)
    return [a * sum(alpha) / remaining for a in kept]


class CentralController(DeviceModel):
    """
    [Purpose] Publishes dp_c:<converter> for every converter in `converters` (own base of each)
    [Comment] A converter trip moves its share to the converters still in service
    """

    kind = "central"

    def __init__(self, name: str, params: CentralParams, converters: Sequence[str], converter_rating: float,
                 s_base: float, omega_base: float, mode: str):
        super().__init__(name, None, s_base, s_base, omega_base, mode)
        if len(params.alpha) != len(converters):
            raise ValueError(f"{len(params.alpha)} participation factors for {len(converters)} converters")
        self.params = params
        self.converters = list(converters)
        self.converter_scale = converter_rating / s_base
        self.alpha = list(params.alpha)
        self.tripped: Set[str] = set()

    @property
    def state_names(self) -> Tuple[str, ...]:
        return ("z",)

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        return np.zeros(1)

    def corrections(self, z: float) -> List[float]:
        """[Returns] Per-converter corrections on the converter rating"""
        return [a * z / self.converter_scale for a in self.alpha]

    def peer_tripped(self, name: str) -> None:
        if name in self.converters:
            self.tripped.add(name)
            self.alpha = live_participation(self.params.alpha, self.converters, self.tripped)

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        for name, dp in zip(self.converters, self.corrections(x[0])):
            signals[f"dp_c:{name}"] = dp
        if not self.params.enabled:
            return np.zeros(1)
        return np.array([central_derivatives(x[0], mean_condenser_speed(signals), self.params.k_c)])

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        return {"z": float(x[0])}
