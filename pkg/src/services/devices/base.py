# [Purpose] Common interface of the dynamic devices assembled by the simulation engine
# [Comment] Device states and setpoints are on the device's own rating; network quantities on the system base
# [Comment] Complex dq values: real part = d axis, imaginary part = q axis, current injected into the network

import cmath
from abc import ABC, abstractmethod
from typing import ClassVar, Dict, Optional, Tuple

# [Library] NumPy - state slices and derivative vectors
# [Source] https://numpy.org/
import numpy as np

# [Comment] Signals exchanged between devices during one derivative evaluation
Signals = Dict[str, float]

# [Comment] Voltage magnitude used in place of a collapsed one when dividing by |v|
V_FLOOR = 0.05


def clamp_current(i: complex, i_max: float) -> Tuple[complex, bool]:
    """
    [Purpose] Circular current limit that keeps the angle of the demanded current
    [Returns] (limited current, True when the demand exceeded i_max)
    [Usage] clamp_current(1.5 + 0j, 1.2) -> (1.2 + 0j, True)
    """
    magnitude = abs(i)
    if magnitude > i_max:
        return i * (i_max / magnitude), True
    return i, False


def as_complex(x: np.ndarray, k: int) -> complex:
    return complex(x[k], x[k + 1])


def mean_condenser_speed(signals: Signals) -> float:
    """[Returns] Mean speed deviation of the live condensers (0 without condensers)"""
    n = signals.get("n_sc", 0.0)
    return signals.get("dw_sc_sum", 0.0) / n if n else 0.0


def floor_voltage(v: complex) -> complex:
    """[Purpose] Same angle as v with magnitude at least V_FLOOR (angle 0 for v = 0)"""
    magnitude = abs(v)
    if magnitude >= V_FLOOR:
        return v
    angle = cmath.phase(v) if magnitude > 0 else 0.0
    return cmath.rect(V_FLOOR, angle)


class DeviceModel(ABC):
    """
    [Purpose] One dynamic device: its state names, equilibrium, network interface and derivatives
    [Fields]
    - name: device id, equal to its attachment id in the Network
    - bus: attachment bus, None for devices without a network terminal
    - scale: rating / system base, converts own-base currents and powers to the system base
    - setpoints: values that events may step (own base)
    - live: False once the device is tripped; its states are then frozen
    [Comment] In phasor mode a device is a Norton source: norton_admittance() plus source_current(x).
              A device with a current limit turns into a current source at limited_current(x, v).
              In EMT mode it injects injection(x, v), computed from its own current states.
    """

    kind: ClassVar[str] = ""

    def __init__(self, name: str, bus: Optional[str], rating: float, s_base: float, omega_base: float, mode: str):
        if mode not in ("emt", "phasor"):
            raise ValueError(f"mode must be 'emt' or 'phasor', got {mode!r}")
        self.name = name
        self.bus = bus
        self.rating = rating
        self.scale = rating / s_base
        self.omega_base = omega_base
        self.mode = mode
        self.setpoints: Dict[str, float] = {}
        self.live = True

    @property
    @abstractmethod
    def state_names(self) -> Tuple[str, ...]:
        """[Returns] Names of the real-valued states in layout order"""

    @property
    def n_states(self) -> int:
        return len(self.state_names)

    @abstractmethod
    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        """
        [Purpose] Equilibrium state for terminal voltage v and injection s (system base)
        [Comment] Sets the setpoints that make the state a fixed point
        [Errors] InitializationError when no equilibrium exists
        """

    def norton_admittance(self) -> complex:
        """[Returns] Admittance of the device behind its terminal in phasor mode (system base)"""
        return 0j

    def source_current(self, x: np.ndarray, signals: Signals) -> complex:
        """[Returns] Norton or current-source current of the phasor network solve (system base)"""
        return 0j

    def limited_current(self, x: np.ndarray, v: complex) -> Optional[complex]:
        """
        [Purpose] Phasor mode: the current at the device limit when its Norton current at bus voltage v exceeds it
        [Returns] Limited current (system base), None while the device is within its limit
        """
        return None

    def injection(self, x: np.ndarray, v: complex, signals: Signals) -> complex:
        """[Returns] Current injected at the terminal bus for bus voltage v (system base)"""
        return 0j

    @abstractmethod
    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        """
        [Returns] dx/dt for the device's own states
        [Comment] Also writes the outputs later devices read (speeds, corrections, DC power) into signals;
                  the engine evaluates condensers, central controller, sources, converters, links, areas in that order
        """

    def observe(self, x: np.ndarray, v: complex, signals: Signals) -> Dict[str, float]:
        """[Returns] Named outputs for trace channels and flag counters (after derivatives filled signals)"""
        return {}

    def trip(self) -> None:
        self.live = False

    def peer_tripped(self, name: str) -> None:
        """[Purpose] Called on every live device after device `name` trips"""

    def __repr__(self) -> str:
        state = "live" if self.live else "tripped"
        return f"{type(self).__name__}({self.name!r}, bus={self.bus!r}, {self.mode}, {state})"
