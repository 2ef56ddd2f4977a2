# [Purpose] Grid-forming offshore converter: power-synchronization droop with a transient virtual impedance
# [Comment] omega = 1 + m_p (P* - P_f), dtheta/dt = omega_b (omega - 1), e = V* - Z_v (i - i_lp) in the converter frame
# [Comment] P* and P_f are active power injected at the converter bus on the converter rating
# [Comment] The filter current is limited to i_max; a limited converter holds e = v + z_f i_cmd
# [Why] Clamping the current the setpoint voltage drives keeps the voltage command continuous across the limit

import cmath
from typing import Mapping, NamedTuple, Optional, Tuple

# [Library] NumPy - state and derivative vectors
# [Source] https://numpy.org/
import numpy as np

from src.models.devices import GridFormingParams
from src.services.devices.base import DeviceModel, Signals, as_complex, clamp_current
from src.utils.errors import InitializationError


class GfmOutput(NamedTuple):
    e: complex          # converter voltage, network frame (pu)
    i: complex          # filter current injected at the bus, own base (pu)
    p: float            # active power injected at the bus, own base
    q: float            # reactive power injected at the bus, own base
    p_dc: float         # power drawn from the AC side into the DC link, own base
    omega: float        # converter frequency (pu)
    saturated: bool


def gfm_state_names(mode: str, q_droop: bool = False) -> Tuple[str, ...]:
    names = ["theta", "p_f"]
    if q_droop:
        names.append("q_f")
    if mode == "emt":
        names += ["i_lp_d", "i_lp_q", "i_d", "i_q"]
    return tuple(names)


def gfm_derivatives(
    x: np.ndarray,
    v: complex,
    params: GridFormingParams,
    setpoints: Mapping[str, float],
    mode: str,
    omega_base: float,
    i_limited: Optional[complex] = None,
) -> Tuple[np.ndarray, GfmOutput]:
    """
    [Purpose] State derivatives and voltage command of one grid-forming converter
    [Parameters]
    - x: states in gfm_state_names(mode, params.q_droop) order
    - v: voltage of the converter bus (pu, network frame)
    - setpoints: p_ref, q_ref, v_ref on the converter rating
    - mode: "emt" integrates the filter current and the virtual-impedance low-pass;
            "phasor" treats the converter as V* at angle theta behind the filter impedance
    - i_limited: phasor mode only, the limited current the network solve delivered (own base)
    [Returns] (dx/dt, GfmOutput)
    [Errors] ValueError for non-finite inputs
    [Comment] The current the voltage setpoint would drive through the filter is clamped to i_max along its angle;
              the converter voltage follows as e = v + z_f i_cmd, which equals the setpoint voltage below the limit
    """
    if not (np.all(np.isfinite(x)) and cmath.isfinite(v)):
        raise ValueError("grid-forming converter received a non-finite state or voltage")

    theta, p_f = x[0], x[1]
    k = 2
    v_set = setpoints["v_ref"]
    if params.q_droop:
        q_f = x[k]
        k += 1
        v_set -= params.n_q * (q_f - setpoints["q_ref"])

    rotation = cmath.exp(1j * theta)
    omega = 1.0 + params.droop_mp * (setpoints["p_ref"] - p_f)
    z_f = complex(params.r_f, params.l_f)

    if mode == "phasor":
        if i_limited is None:
            i, saturated = clamp_current((v_set * rotation - v) / z_f, params.i_max)
        else:
            i, saturated = i_limited, True
        e = v + z_f * i
        fast = []
    else:
        i_lp = as_complex(x, k)
        i = as_complex(x, k + 2)
        i_conv = i * rotation.conjugate()
        e_set = (v_set - complex(params.r_v, params.x_v) * (i_conv - i_lp)) * rotation
        i_cmd, saturated = clamp_current((e_set - v) / z_f, params.i_max)
        e = v + z_f * i_cmd
        di_lp = params.alpha_v * (i_conv - i_lp)
        di = omega_base / params.l_f * (e - v - z_f * i)
        fast = [di_lp.real, di_lp.imag, di.real, di.imag]

    s = v * i.conjugate()
    p_dc = -(e * i.conjugate()).real
    dx = [omega_base * (omega - 1.0), (s.real - p_f) / params.tau_p]
    if params.q_droop:
        dx.append((s.imag - q_f) / params.tau_p)
    dx += fast
    return np.array(dx), GfmOutput(e, i, s.real, s.imag, p_dc, omega, saturated)


class GridFormingVsc(DeviceModel):
    """
    [Purpose] Grid-forming converter feeding HVDC link `link` from its converter bus
    [Comment] In phasor mode a Norton source; once its Norton current passes i_max the network solve
              replaces it by a current source at the limit and publishes i_lim_d/i_lim_q:<name>
    """

    kind = "gfm"

    def __init__(self, name: str, bus: str, link: int, params: GridFormingParams, s_base: float,
                 omega_base: float, mode: str):
        super().__init__(name, bus, params.rating, s_base, omega_base, mode)
        self.params = params
        self.link = link
        self.z_f = complex(params.r_f, params.l_f)
        self._names = gfm_state_names(mode, params.q_droop)

    @property
    def state_names(self) -> Tuple[str, ...]:
        return self._names

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        s_own = s / self.scale
        i = (s_own / v).conjugate()
        if abs(i) > self.params.i_max:
            raise InitializationError(
                f"{self.name}: initial current {abs(i):.3f} pu exceeds i_max {self.params.i_max} pu"
            )
        e = v + self.z_f * i
        theta = cmath.phase(e)
        self.setpoints = {"p_ref": s_own.real, "q_ref": s_own.imag, "v_ref": abs(e)}
        x = [theta, s_own.real]
        if self.params.q_droop:
            x.append(s_own.imag)
        if self.mode == "emt":
            i_conv = i * cmath.exp(-1j * theta)
            x += [i_conv.real, i_conv.imag, i.real, i.imag]
        signals[f"p_dc:{self.link}"] = -(e * i.conjugate()).real
        return np.array(x, dtype=float)

    def norton_admittance(self) -> complex:
        return self.scale / self.z_f if self.mode == "phasor" else 0j

    def _phasor_source(self, x: np.ndarray) -> complex:
        v_set = self.setpoints["v_ref"]
        if self.params.q_droop:
            v_set -= self.params.n_q * (x[2] - self.setpoints["q_ref"])
        return v_set * cmath.exp(1j * x[0])

    def _published_limit(self, signals: Signals) -> Optional[complex]:
        key = f"i_lim_d:{self.name}"
        if key not in signals:
            return None
        return complex(signals[key], signals[f"i_lim_q:{self.name}"])

    def source_current(self, x: np.ndarray, signals: Signals) -> complex:
        return self.scale * self._phasor_source(x) / self.z_f

    def limited_current(self, x: np.ndarray, v: complex) -> Optional[complex]:
        i, saturated = clamp_current((self._phasor_source(x) - v) / self.z_f, self.params.i_max)
        return self.scale * i if saturated else None

    def injection(self, x: np.ndarray, v: complex, signals: Signals) -> complex:
        if self.mode == "phasor":
            limited = self._published_limit(signals)
            if limited is not None:
                return self.scale * limited
            return self.scale * (self._phasor_source(x) - v) / self.z_f
        return self.scale * as_complex(x, len(self._names) - 2)

    def _evaluate(self, x: np.ndarray, v: complex, signals: Signals) -> Tuple[np.ndarray, GfmOutput]:
        limited = self._published_limit(signals) if self.mode == "phasor" else None
        return gfm_derivatives(x, v, self.params, self.setpoints, self.mode, self.omega_base, limited)

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
        }
