# [Purpose] Synchronous condenser: two-axis transient model, swing equation without prime mover, static AVR
# [Comment] Rotor frame quantities x_r = x e^(-j delta); the q axis leads the d axis by 90 degrees
# [Comment] The step-up transformer is lumped into the stator path: E' - v = (r_a + j (x'_d + x_t)) i

import cmath
import math
from typing import NamedTuple, Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import CondenserParams
from src.services.devices.base import DeviceModel, Signals, as_complex
from src.utils.errors import InitializationError

PHASOR_STATES = ("delta", "dw", "eq_t", "ed_t", "efd")
EMT_STATES = PHASOR_STATES + ("i_d", "i_q")


class ScOutput(NamedTuple):
    i: complex          # stator current injected at the hub, own base
    p_e: float          # air-gap power, own base
    q: float            # reactive power injected at the bus, own base
    dw: float
    field_limited: bool


def avr_command(k_a: float, error: float, efd_min: float, efd_max: float) -> Tuple[float, bool]:
    """
    [Purpose] Steady field-voltage demand K_a * error clipped to the exciter ceiling and floor
    [Usage] avr_command(200, 0.05, -5, 5) -> (5.0, True)
    """
    demand = k_a * error
    if demand > efd_max:
        return efd_max, True
    if demand < efd_min:
        return efd_min, True
    return demand, False


def sc_impedance(params: CondenserParams) -> complex:
    return complex(params.r_a, params.x_d_t + params.x_t)


def sc_derivatives(
    x: np.ndarray,
    v: complex,
    params: CondenserParams,
    v_ref: float,
    mode: str,
    omega_base: float,
) -> Tuple[np.ndarray, ScOutput]:
    """
    [Purpose] Swing, transient flux and exciter dynamics of one condenser
    [Parameters]
    - x: PHASOR_STATES, plus the stator current (EMT_STATES) in EMT mode
    - v: hub voltage (pu, network frame)
    - v_ref: AVR voltage reference (pu)
    [Returns] (dx/dt, ScOutput); swing 2H d(dw)/dt = -P_e - D dw
    [Comment] The exciter lags the field demand clipped to its ceiling and floor; field_limited is raised while clipped
    [Why] A frozen integrator at the limit makes dx/dt jump there, and the implicit step may then have no solution
    """
    delta, dw, eq_t, ed_t, efd = x[:5]
    z = sc_impedance(params)
    rotation = cmath.exp(1j * delta)
    e_t = complex(ed_t, eq_t) * rotation

    if mode == "phasor":
        i = (e_t - v) / z
        fast = []
    else:
        i = as_complex(x, 5)
        di = omega_base / z.imag * (e_t - v - z * i)
        fast = [di.real, di.imag]

    i_r = i * rotation.conjugate()
    p_e = (e_t * i.conjugate()).real

    d_eq = (efd - eq_t - (params.x_d - params.x_d_t) * i_r.real) / params.t_d0
    d_ed = (-ed_t + (params.x_q - params.x_d_t) * i_r.imag) / params.t_q0
    demand, field_limited = avr_command(params.k_a, v_ref - abs(v), params.efd_min, params.efd_max)
    d_efd = (demand - efd) / params.t_a

    dx = np.array([
        omega_base * dw,
        (-p_e - params.d * dw) / (2.0 * params.h),
        d_eq,
        d_ed,
        d_efd,
        *fast,
    ])
    return dx, ScOutput(i, p_e, (v * i.conjugate()).imag, dw, field_limited)


def sc_equilibrium(v: complex, i: complex, params: CondenserParams) -> Tuple[np.ndarray, float]:
    """
    [Purpose] Rotor angle, transient voltages and field voltage that hold terminal current i at voltage v
    [Returns] (phasor-mode state, AVR reference)
    """
    r = params.r_a
    e_q = v + complex(r, params.x_q + params.x_t) * i
    delta = cmath.phase(e_q) - math.pi / 2.0
    back = cmath.exp(-1j * delta)
    i_r = i * back
    e_t = (v + sc_impedance(params) * i) * back
    efd = e_t.imag + (params.x_d - params.x_d_t) * i_r.real
    v_ref = abs(v) + efd / params.k_a
    return np.array([delta, 0.0, e_t.imag, e_t.real, efd]), v_ref


class SynchronousCondenser(DeviceModel):
    """[Purpose] Condenser at the hub: a voltage behind transient impedance in phasor mode"""

    kind = "sc"

    def __init__(self, name: str, bus: str, params: CondenserParams, s_base: float, omega_base: float, mode: str):
        super().__init__(name, bus, params.rating, s_base, omega_base, mode)
        self.params = params
        self.z = sc_impedance(params)

    @property
    def state_names(self) -> Tuple[str, ...]:
        return EMT_STATES if self.mode == "emt" else PHASOR_STATES

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        i = (s / self.scale / v).conjugate()
        x, v_ref = sc_equilibrium(v, i, self.params)
        if not self.params.efd_min < x[4] < self.params.efd_max:
            raise InitializationError(f"{self.name}: field voltage {x[4]:.3f} pu is outside the exciter limits")
        self.setpoints = {"v_ref": v_ref}
        if self.mode == "emt":
            x = np.concatenate([x, [i.real, i.imag]])
        return x

    def _internal_voltage(self, x: np.ndarray) -> complex:
        return complex(x[3], x[2]) * cmath.exp(1j * x[0])

    def norton_admittance(self) -> complex:
        return self.scale / self.z if self.mode == "phasor" else 0j

    def source_current(self, x: np.ndarray, signals: Signals) -> complex:
        return self.scale * self._internal_voltage(x) / self.z

    def injection(self, x: np.ndarray, v: complex, signals: Signals) -> complex:
        if self.mode == "phasor":
            return self.scale * (self._internal_voltage(x) - v) / self.z
        return self.scale * as_complex(x, 5)

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        dx, _ = sc_derivatives(x, v, self.params, self.setpoints["v_ref"], self.mode, self.omega_base)
        signals["dw_sc_sum"] = signals.get("dw_sc_sum", 0.0) + x[1]
        signals["n_sc"] = signals.get("n_sc", 0.0) + 1.0
        return dx

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        _, out = sc_derivatives(x, v, self.params, self.setpoints["v_ref"], self.mode, self.omega_base)
        s = v * out.i.conjugate()
        return {
            "p": s.real * self.scale,
            "q": s.imag * self.scale,
            "omega": 1.0 + out.dw,
            "field_limited": float(out.field_limited),
        }
