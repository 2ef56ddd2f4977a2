# [Purpose] Grid-following offshore converter: SRF-PLL, P-f and Q-V droops, dq current loop with active damping
# [Comment] P_ref is the power exported to the DC link; Q_ref is reactive power injected into the AC grid (own base)
# [Comment] P_ref = P0 + dP_c + K_f (omega - 1), Q_ref = Q0 + K_v (V* - |v|)
# [Why] The PLL frequency is the only frequency a grid-following converter can see

import cmath
import math
from typing import Mapping, NamedTuple, Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import GridFollowingParams
from src.services.devices.base import (
    DeviceModel,
    Signals,
    as_complex,
    clamp_current,
    floor_voltage,
    mean_condenser_speed,
)
from src.utils.errors import InitializationError

EMT_STATES = ("theta", "x_pll", "v_lp_d", "v_lp_q", "xi_d", "xi_q", "i_d", "i_q")
PHASOR_STATES = ("i_d", "i_q")


class GflGains(NamedTuple):
    k_p_pll: float
    k_i_pll: float
    k_p_cc: float
    k_i_cc: float


def gfl_gains(params: GridFollowingParams, omega_base: float) -> GflGains:
    """
    [Purpose] PLL and current-loop gains from the configured bandwidths
    [Comment] PLL: s^2 + 2 zeta w_n s + w_n^2 at 1 pu voltage; current loop: internal-model tuning at alpha_c
    """
    w_n = 2.0 * math.pi * params.pll_bandwidth
    alpha_c = 2.0 * math.pi * params.current_bandwidth
    return GflGains(
        k_p_pll=2.0 * params.pll_damping * w_n / omega_base,
        k_i_pll=w_n**2 / omega_base,
        k_p_cc=alpha_c * params.l_f / omega_base,
        k_i_cc=alpha_c * params.r_f,
    )


class GflOutput(NamedTuple):
    i: complex          # current injected at the bus, own base
    p_ref: float
    q_ref: float
    p: float            # active power injected at the bus, own base
    q: float
    p_dc: float         # power drawn into the DC link, own base
    omega: float        # measured frequency (PLL in EMT, condenser speed in phasor mode)
    saturated: bool
    unlocked: bool


def _references(params: GridFollowingParams, setpoints: Mapping[str, float], omega: float, v_mag: float):
    p_ref = setpoints["p0"] + setpoints.get("dp_c", 0.0) + params.k_f * (omega - 1.0)
    q_ref = setpoints["q0"] + params.k_v * (params.v_ref - v_mag)
    return p_ref, q_ref


def gfl_derivatives(
    x: np.ndarray,
    v: complex,
    params: GridFollowingParams,
    setpoints: Mapping[str, float],
    mode: str,
    omega_base: float,
    omega_meas: float = 1.0,
) -> Tuple[np.ndarray, GflOutput]:
    """
    [Purpose] State derivatives and current command of one grid-following converter
    [Parameters]
    - x: EMT_STATES or PHASOR_STATES
    - v: converter bus voltage (pu, network frame)
    - setpoints: p0, q0 and the central correction dp_c (own base)
    - omega_meas: frequency fed to the P-f droop in phasor mode (the PLL is not modelled there)
    [Returns] (dx/dt, GflOutput)
    [Errors] ValueError for non-finite inputs
    """
    if not (np.all(np.isfinite(x)) and cmath.isfinite(v)):
        raise ValueError("grid-following converter received a non-finite state or voltage")
    z_f = complex(params.r_f, params.l_f)
    unlocked = abs(v) < params.lock_threshold

    if mode == "phasor":
        i = as_complex(x, 0)
        p_ref, q_ref = _references(params, setpoints, omega_meas, abs(v))
        target = (complex(-p_ref, q_ref) / floor_voltage(v)).conjugate()
        target, saturated = clamp_current(target, params.i_max)
        di = (target - i) / params.tau_phasor
        e = v + z_f * i
        s = v * i.conjugate()
        dx = np.array([di.real, di.imag])
        return dx, GflOutput(i, p_ref, q_ref, s.real, s.imag, -(e * i.conjugate()).real, omega_meas,
                             saturated, unlocked)

    g = gfl_gains(params, omega_base)
    theta, x_pll = x[0], x[1]
    v_lp = as_complex(x, 2)
    xi = as_complex(x, 4)
    i = as_complex(x, 6)
    rotation = cmath.exp(1j * theta)
    v_pll = v * rotation.conjugate()
    i_pll = i * rotation.conjugate()

    omega = 1.0 + g.k_p_pll * v_pll.imag + x_pll
    p_ref, q_ref = _references(params, setpoints, omega, abs(v_lp))
    v_d = max(v_lp.real, params.lock_threshold)
    i_ref = complex(-p_ref, -q_ref) / v_d - params.g_ad * (v_pll - v_lp)
    i_cmd, saturated = clamp_current(i_ref, params.i_max)

    error = i_cmd - i_pll
    e_pll = v_pll + 1j * params.l_f * i_pll + g.k_p_cc * error + xi
    e = e_pll * rotation

    dv_lp = params.omega_ad * (v_pll - v_lp)
    dxi = g.k_i_cc * error
    di = omega_base / params.l_f * (e - v - z_f * i)
    dx = np.array([
        omega_base * (omega - 1.0),
        g.k_i_pll * v_pll.imag,
        dv_lp.real, dv_lp.imag,
        dxi.real, dxi.imag,
        di.real, di.imag,
    ])
    s = v * i.conjugate()
    return dx, GflOutput(i, p_ref, q_ref, s.real, s.imag, -(e * i.conjugate()).real, omega, saturated, unlocked)


class GridFollowingVsc(DeviceModel):
    """[Purpose] Grid-following converter feeding HVDC link `link`; a current source in phasor mode"""

    kind = "gfl"

    def __init__(self, name: str, bus: str, link: int, params: GridFollowingParams, s_base: float,
                 omega_base: float, mode: str):
        super().__init__(name, bus, params.rating, s_base, omega_base, mode)
        self.params = params
        self.link = link
        self.z_f = complex(params.r_f, params.l_f)

    @property
    def state_names(self) -> Tuple[str, ...]:
        return EMT_STATES if self.mode == "emt" else PHASOR_STATES

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        s_own = s / self.scale
        i = (s_own / v).conjugate()
        if abs(i) > self.params.i_max:
            raise InitializationError(
                f"{self.name}: initial current {abs(i):.3f} pu exceeds i_max {self.params.i_max} pu"
            )
        self.setpoints = {
            "p0": -s_own.real,
            "q0": s_own.imag - self.params.k_v * (self.params.v_ref - abs(v)),
            "dp_c": 0.0,
        }
        e = v + self.z_f * i
        signals[f"p_dc:{self.link}"] = -(e * i.conjugate()).real
        if self.mode == "phasor":
            return np.array([i.real, i.imag])
        theta = cmath.phase(v)
        i_pll = i * cmath.exp(-1j * theta)
        xi = self.params.r_f * i_pll
        return np.array([theta, 0.0, abs(v), 0.0, xi.real, xi.imag, i.real, i.imag])

    def source_current(self, x: np.ndarray, signals: Signals) -> complex:
        return self.scale * as_complex(x, 0)

    def injection(self, x: np.ndarray, v: complex, signals: Signals) -> complex:
        return self.scale * as_complex(x, len(self.state_names) - 2)

    def _evaluate(self, x: np.ndarray, v: complex, signals: Signals) -> Tuple[np.ndarray, GflOutput]:
        setpoints = dict(self.setpoints)
        setpoints["dp_c"] = setpoints.get("dp_c", 0.0) + signals.get(f"dp_c:{self.name}", 0.0)
        omega_meas = 1.0 + mean_condenser_speed(signals)
        return gfl_derivatives(x, v, self.params, setpoints, self.mode, self.omega_base, omega_meas)

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        dx, out = self._evaluate(x, v, signals)
        signals[f"p_dc:{self.link}"] = out.p_dc
        return dx

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> dict:
        _, out = self._evaluate(x, v, signals)
        return {
            "p_export": -out.p * self.scale,
            "q": out.q * self.scale,
            "omega": out.omega,
            "current_ratio": abs(out.i) / self.params.i_max,
            "saturated": float(out.saturated),
            "unlocked": float(out.unlocked),
        }
