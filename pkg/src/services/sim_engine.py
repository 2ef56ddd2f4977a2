# [Purpose] Simulation engine: state assembly, network solution in both fidelities, trapezoidal integration,
#           event handling, linearization and mode matching
# [Comment] EMT mode carries every bus voltage and branch current as dq states rotating at the base frequency;
#           phasor mode solves the network algebraically at every derivative evaluation
# [Comment] Current leaves the from bus of a branch as i / t and enters its to bus as i

import math
from typing import Callable, Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple, Union

# [Library] NumPy - state vectors, incidence matrices, complex network arithmetic
# [Source] https://numpy.org/
import numpy as np

# [Library] SciPy - LU factorization of the network and iteration matrices, eigenvalues, graph components
# [Source] https://docs.scipy.org/doc/scipy/reference/linalg.html
from scipy.linalg import eigvals, lu_factor, lu_solve
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.models.grid import Network
from src.models.simulation import (
    Event,
    EventKind,
    EventMarker,
    LinearizationReport,
    ModeInfo,
    ModeMatch,
    Trace,
)
from src.services.devices.base import DeviceModel, Signals
from src.utils.errors import NetworkError, SimulationError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# [Comment] Devices are evaluated in this order; later kinds read signals written by earlier ones
EVAL_ORDER = ("sc", "central", "windfarm", "gfm", "gfl", "hvdc", "onshore")
CONVERTER_KINDS = ("gfm", "gfl")

DERIVATIVE_TOL = 1e-8
FLAG_NAMES = ("saturated", "unlocked", "field_limited")
SUBSTEPS = 8
# [Comment] More chord-Newton iterations than this marks the cached iteration matrix as stale
REFRESH_ITERATIONS = 5
SENSITIVITY_TOL = 1e-3

Function = Callable[[np.ndarray], np.ndarray]
LuFactors = Tuple[np.ndarray, np.ndarray]


def unpack_complex(values: np.ndarray) -> np.ndarray:
    return values[0::2] + 1j * values[1::2]


def pack_complex(z: np.ndarray, out: np.ndarray) -> None:
    out[0::2] = z.real
    out[1::2] = z.imag


# =====================================================
# Network arrays
# =====================================================

class BranchArrays(NamedTuple):
    """
    [Purpose] Pi-sections and transformers flattened into parallel arrays
    [Fields]
    - names: "<cable>:<section>" for pi-sections, the transformer name for transformers
    - groups: unit removed by a branch trip (cable name or transformer name)
    """

    names: Tuple[str, ...]
    groups: Tuple[str, ...]
    from_idx: np.ndarray
    to_idx: np.ndarray
    z: np.ndarray
    ratio: np.ndarray
    b_half: np.ndarray


class EmtNetwork(NamedTuple):
    incidence: np.ndarray
    from_idx: np.ndarray
    to_idx: np.ndarray
    z: np.ndarray
    ratio: np.ndarray
    b_node: np.ndarray
    live_bus: np.ndarray
    live_branch: np.ndarray


def branch_arrays(network: Network) -> BranchArrays:
    idx = network.bus_index()
    names, groups, rows = [], [], []
    counters: Dict[str, int] = {}
    for br in network.branches:
        group = br.group or f"{br.from_bus}-{br.to_bus}"
        counters[group] = counters.get(group, 0) + 1
        names.append(f"{group}:{counters[group]}")
        groups.append(group)
        rows.append((idx[br.from_bus], idx[br.to_bus], complex(br.r, br.x), 1.0, br.b_half))
    for tr in network.transformers:
        names.append(tr.name)
        groups.append(tr.name)
        rows.append((idx[tr.from_bus], idx[tr.to_bus], complex(tr.r, tr.x), tr.ratio, 0.0))
    if not rows:
        empty_i, empty_f = np.zeros(0, dtype=int), np.zeros(0)
        return BranchArrays((), (), empty_i, empty_i, np.zeros(0, dtype=complex), empty_f, empty_f)
    f, t, z, ratio, b_half = zip(*rows)
    return BranchArrays(
        tuple(names), tuple(groups),
        np.array(f, dtype=int), np.array(t, dtype=int),
        np.array(z, dtype=complex), np.array(ratio, dtype=float), np.array(b_half, dtype=float),
    )


def emt_network(
    branches: BranchArrays, bus_shunt: np.ndarray, live_branch: np.ndarray, live_bus: np.ndarray
) -> EmtNetwork:
    """[Purpose] Masked incidence matrix and nodal capacitances of the live part of the network"""
    n_bus, n_br = bus_shunt.size, branches.z.size
    incidence = np.zeros((n_bus, n_br), dtype=complex)
    cols = np.where(live_branch)[0]
    incidence[branches.from_idx[cols], cols] = -1.0 / branches.ratio[cols]
    incidence[branches.to_idx[cols], cols] = 1.0
    b_node = bus_shunt.astype(float).copy()
    np.add.at(b_node, branches.from_idx[cols], branches.b_half[cols])
    np.add.at(b_node, branches.to_idx[cols], branches.b_half[cols])
    return EmtNetwork(
        incidence, branches.from_idx, branches.to_idx, branches.z, branches.ratio, b_node,
        live_bus.copy(), live_branch.copy(),
    )


def network_admittance(branches: BranchArrays, bus_shunt: np.ndarray, live_branch: np.ndarray) -> np.ndarray:
    """[Purpose] Bus admittance matrix of the live branches at the base frequency"""
    y_bus = np.diag(1j * bus_shunt.astype(complex))
    k = np.where(live_branch)[0]
    f, t = branches.from_idx[k], branches.to_idx[k]
    y = 1.0 / branches.z[k]
    ratio = branches.ratio[k]
    ysh = 1j * branches.b_half[k]
    np.add.at(y_bus, (f, f), y / ratio**2 + ysh)
    np.add.at(y_bus, (t, t), y + ysh)
    np.add.at(y_bus, (f, t), -y / ratio)
    np.add.at(y_bus, (t, f), -y / ratio)
    return y_bus


def emt_network_derivatives(
    v: np.ndarray, i_branch: np.ndarray, i_device: np.ndarray, net: EmtNetwork, omega_base: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    [Purpose] Dynamic-phasor network equations in the synchronously rotating frame
    [Parameters]
    - v: bus voltages, i_branch: series currents (from -> to), i_device: device currents injected per bus
    [Returns] (dv/dt, di/dt); dead buses and branches get zero derivatives
    [Comment] (b / w_b) dv/dt = i_dev + C i_br - j b v and (x / w_b) di/dt = v_f / t - v_t - (r + j x) i
    """
    dv = np.zeros_like(v, dtype=complex)
    live = net.live_bus
    i_node = i_device + net.incidence @ i_branch
    dv[live] = omega_base / net.b_node[live] * (i_node[live] - 1j * net.b_node[live] * v[live])

    drive = v[net.from_idx] / net.ratio - v[net.to_idx] - net.z * i_branch
    di = np.where(net.live_branch, omega_base / net.z.imag * drive, 0.0)
    return dv, di


# =====================================================
# Assembled system
# =====================================================

class SimSystem:
    """
    [Purpose] Network plus devices with one flat state vector
    [Fields]
    - layout: "<device>.<state>", "bus.<id>.v_d|v_q", "branch.<name>.i_d|i_q" -> index
    - live_bus: buses connected to the hub through live branches
    - diagnostics: islanding and other non-fatal topology messages
    [Comment] Device objects hold setpoints and trip flags, so one SimSystem serves one run at a time
    """

    def __init__(
        self,
        network: Network,
        devices: Sequence[DeviceModel],
        mode: str,
        dt: float,
        newton_tol: float = 1e-10,
        newton_max_iter: int = 20,
        scenario: str = "",
        inertia: str = "",
    ):
        if mode not in ("emt", "phasor"):
            raise ValueError(f"mode must be 'emt' or 'phasor', got {mode!r}")
        if not dt > 0:
            raise ValueError(f"dt must be > 0, got {dt}")
        for dev in devices:
            if dev.mode != mode:
                raise ValueError(f"device {dev.name} was built for {dev.mode} mode, system is {mode}")
            if dev.kind not in EVAL_ORDER:
                raise ValueError(f"device {dev.name} has unknown kind {dev.kind!r}")

        self.network = network
        self.mode = mode
        self.dt = dt
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.scenario = scenario
        self.inertia = inertia
        self.omega_base = network.base.omega_base
        self.f_base = network.base.f_base

        self.devices: List[DeviceModel] = sorted(devices, key=lambda d: EVAL_ORDER.index(d.kind))
        self.by_name: Dict[str, DeviceModel] = {}
        for dev in self.devices:
            if dev.name in self.by_name:
                raise ValueError(f"duplicate device name {dev.name!r}")
            if dev.bus is not None and dev.bus not in network.bus_index():
                raise NetworkError(f"device {dev.name} attached to unknown bus '{dev.bus}'")
            self.by_name[dev.name] = dev

        slack = network.slack_buses()
        if len(slack) != 1:
            raise NetworkError(f"expected exactly one hub (slack) bus, found {len(slack)}")
        self.hub = slack[0]
        self.bus_ids = network.bus_ids
        self.bus_index = network.bus_index()
        self.branches = branch_arrays(network)
        self.bus_shunt = np.array([b.b_shunt for b in network.buses], dtype=float)
        if mode == "emt" and np.any(self.branches.z.imag <= 0):
            bad = [n for n, z in zip(self.branches.names, self.branches.z) if z.imag <= 0]
            raise NetworkError(f"EMT mode needs a positive series reactance on every branch: {', '.join(bad)}")

        self.layout: Dict[str, int] = {}
        self.slices: Dict[str, slice] = {}
        offset = 0
        for dev in self.devices:
            for k, state in enumerate(dev.state_names):
                self.layout[f"{dev.name}.{state}"] = offset + k
            self.slices[dev.name] = slice(offset, offset + dev.n_states)
            offset += dev.n_states
        self.v_slice = slice(offset, offset)
        self.i_slice = slice(offset, offset)
        if mode == "emt":
            for bus in self.bus_ids:
                self.layout[f"bus.{bus}.v_d"] = offset
                self.layout[f"bus.{bus}.v_q"] = offset + 1
                offset += 2
            self.v_slice = slice(self.v_slice.start, offset)
            for name in self.branches.names:
                self.layout[f"branch.{name}.i_d"] = offset
                self.layout[f"branch.{name}.i_q"] = offset + 1
                offset += 2
            self.i_slice = slice(self.v_slice.stop, offset)
        self.n_states = offset

        self.live_branch = np.ones(len(self.branches.names), dtype=bool)
        self.live_bus = np.ones(len(self.bus_ids), dtype=bool)
        self.diagnostics: List[str] = []
        self._islanded: List[str] = []
        self._lu_cache: Optional[Tuple[float, LuFactors]] = None
        self._y_lu: Optional[LuFactors] = None
        self._y_aug: Optional[np.ndarray] = None
        self._limited_lu: Dict[FrozenSet[str], LuFactors] = {}
        self._live_idx = np.arange(len(self.bus_ids))
        self.emt: Optional[EmtNetwork] = None
        self.refresh_topology()

    # -------------------------------------------------
    # Topology
    # -------------------------------------------------

    def _connected_to_hub(self) -> np.ndarray:
        n = len(self.bus_ids)
        k = np.where(self.live_branch)[0]
        graph = coo_matrix(
            (np.ones(k.size), (self.branches.from_idx[k], self.branches.to_idx[k])), shape=(n, n)
        )
        _, labels = connected_components(graph, directed=False)
        return labels == labels[self.bus_index[self.hub]]

    def refresh_topology(self) -> None:
        """
        [Purpose] Recomputes live buses and the network operator after a trip
        [Errors] NetworkError for a live bus without capacitance (EMT) or a singular admittance (phasor)
        """
        self.live_bus = self._connected_to_hub()
        islanded = [bus for bus, live in zip(self.bus_ids, self.live_bus) if not live]
        new = [bus for bus in islanded if bus not in self._islanded]
        if new:
            message = f"islanded bus(es) excluded from the network solve: {', '.join(new)}"
            logger.warning(f"⚠️ {message}")
            self.diagnostics.append(message)
        self._islanded = islanded
        self._lu_cache = None
        self._limited_lu = {}

        if self.mode == "emt":
            self.emt = emt_network(self.branches, self.bus_shunt, self.live_branch, self.live_bus)
            bare = [self.bus_ids[k] for k in np.where(self.live_bus & (self.emt.b_node <= 0))[0]]
            if bare:
                raise NetworkError(f"bus(es) without shunt capacitance cannot carry EMT voltage states: {', '.join(bare)}")
            return

        y_bus = network_admittance(self.branches, self.bus_shunt, self.live_branch)
        for dev in self.devices:
            if dev.live and dev.bus is not None:
                y_bus[self.bus_index[dev.bus], self.bus_index[dev.bus]] += dev.norton_admittance()
        self._live_idx = np.where(self.live_bus)[0]
        self._y_aug = y_bus[np.ix_(self._live_idx, self._live_idx)]
        self._y_lu = _factorize_admittance(self._y_aug)

    def active_mask(self) -> np.ndarray:
        """[Returns] True for states that still evolve (live devices, live buses and branches)"""
        mask = np.zeros(self.n_states, dtype=bool)
        for dev in self.devices:
            if dev.live:
                mask[self.slices[dev.name]] = True
        if self.mode == "emt":
            mask[self.v_slice] = np.repeat(self.live_bus, 2)
            mask[self.i_slice] = np.repeat(self.live_branch, 2)
        return mask

    # -------------------------------------------------
    # Evaluation
    # -------------------------------------------------

    def device(self, name: str) -> DeviceModel:
        try:
            return self.by_name[name]
        except KeyError:
            raise SimulationError(f"unknown device '{name}'", scenario=self.scenario, mode=self.mode) from None

    def terminal_voltage(self, dev: DeviceModel, v: np.ndarray) -> complex:
        return complex(v[self.bus_index[dev.bus]]) if dev.bus is not None else 0j

    def bus_voltages(self, x: np.ndarray, signals: Optional[Signals] = None) -> np.ndarray:
        if self.mode == "emt":
            return np.where(self.live_bus, unpack_complex(x[self.v_slice]), 0j)
        return solve_phasor_network(self, x, signals)

    def admittance_lu(self, limited: FrozenSet[str]) -> LuFactors:
        """[Returns] Factorized augmented admittance without the Norton admittance of the limited devices"""
        if not limited:
            return self._y_lu
        if limited not in self._limited_lu:
            y = self._y_aug.copy()
            position = {bus: k for k, bus in enumerate(self._live_idx)}
            for name in limited:
                dev = self.by_name[name]
                k = position[self.bus_index[dev.bus]]
                y[k, k] -= dev.norton_admittance()
            self._limited_lu[limited] = _factorize_admittance(y)
        return self._limited_lu[limited]

    def evaluate(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, Signals]:
        """[Returns] (dx/dt, bus voltages, signals written by the devices)"""
        signals: Signals = {}
        v = self.bus_voltages(x, signals)
        dx = np.zeros(self.n_states)
        i_device = np.zeros(len(self.bus_ids), dtype=complex)
        for dev in self.devices:
            if not dev.live:
                continue
            sl = self.slices[dev.name]
            v_term = self.terminal_voltage(dev, v)
            dx[sl] = dev.derivatives(x[sl], v_term, signals)
            if self.mode == "emt" and dev.bus is not None:
                i_device[self.bus_index[dev.bus]] += dev.injection(x[sl], v_term, signals)
        if self.mode == "emt":
            dv, di = emt_network_derivatives(v, unpack_complex(x[self.i_slice]), i_device, self.emt, self.omega_base)
            pack_complex(dv, dx[self.v_slice])
            pack_complex(di, dx[self.i_slice])
        return dx, v, signals

    def derivatives(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)[0]

    def observe(self, x: np.ndarray) -> Tuple[np.ndarray, Dict[str, Dict[str, float]]]:
        """[Returns] (bus voltages, per live device its named outputs)"""
        _, v, signals = self.evaluate(x)
        outputs = {}
        for dev in self.devices:
            if dev.live:
                outputs[dev.name] = dev.observe(x[self.slices[dev.name]], self.terminal_voltage(dev, v), signals)
        return v, outputs

    def channels(self, v: np.ndarray, outputs: Dict[str, Dict[str, float]]) -> Dict[str, float]:
        """
        [Purpose] Trace channels of one sample
        [Comment] Powers on the system base; offshore frequency from the condensers when the hub has any,
                  otherwise from the grid-forming converters
        """
        row = {"v_hub_pu": float(abs(v[self.bus_index[self.hub]]))}
        condensers = [d for d in self.devices if d.kind == "sc"]
        source = condensers or [d for d in self.devices if d.kind == "gfm"]
        omegas = [outputs[d.name]["omega"] for d in source if "omega" in outputs.get(d.name, {})]
        row["f_offshore_hz"] = self.f_base * (float(np.mean(omegas)) if omegas else 1.0)

        for dev in self.devices:
            out = outputs.get(dev.name, {})
            if dev.kind in CONVERTER_KINDS:
                row[f"p_conv{dev.link}_pu"] = out.get("p_export", 0.0)
                row[f"q_conv{dev.link}_pu"] = out.get("q", 0.0)
            elif dev.kind == "hvdc":
                row[f"vdc_off{dev.link}_pu"] = out.get("v_off", 0.0)
                row[f"vdc_on{dev.link}_pu"] = out.get("v_on", 0.0)
                row[f"p_on{dev.link}_pu"] = out.get("p_out", 0.0)
            elif dev.kind == "onshore":
                row[f"df_on{dev.link}_hz"] = self.f_base * out.get("dw", 0.0)
            elif dev.kind == "windfarm":
                row[f"p_{dev.name}_pu"] = out.get("p", 0.0)
            elif dev.kind == "sc":
                row[f"p_{dev.name}_pu"] = out.get("p", 0.0)
                row[f"q_{dev.name}_pu"] = out.get("q", 0.0)
                row[f"f_{dev.name}_hz"] = self.f_base * out.get("omega", 1.0) if dev.live else 0.0
        return row

    # -------------------------------------------------
    # Events
    # -------------------------------------------------

    def check_event(self, event: Event) -> None:
        """[Errors] SimulationError when the event's target does not exist"""
        if event.kind == EventKind.BRANCH_TRIP:
            if event.branch not in self.branches.groups:
                raise SimulationError(f"unknown branch '{event.branch}'", scenario=self.scenario, mode=self.mode)
            return
        dev = self.device(event.device)
        if event.kind == EventKind.SETPOINT_STEP and event.field not in dev.setpoints:
            raise SimulationError(
                f"device {dev.name} has no setpoint '{event.field}' (has: {', '.join(dev.setpoints) or 'none'})",
                scenario=self.scenario, mode=self.mode,
            )
        if event.kind == EventKind.LOAD_STEP and dev.kind != "onshore":
            raise SimulationError(f"load-step needs an onshore area, {dev.name} is {dev.kind}",
                                  scenario=self.scenario, mode=self.mode)

    def apply_event(self, event: Event, x: np.ndarray) -> np.ndarray:
        """
        [Purpose] Applies one event at a step boundary
        [Returns] State vector with dead network states zeroed
        """
        self.check_event(event)
        x = x.copy()
        if event.kind == EventKind.SETPOINT_STEP:
            self.by_name[event.device].setpoints[event.field] += event.delta
        elif event.kind == EventKind.LOAD_STEP:
            self.by_name[event.device].setpoints["load"] += event.delta
        elif event.kind == EventKind.DEVICE_TRIP:
            self.by_name[event.device].trip()
            for dev in self.devices:
                if dev.live:
                    dev.peer_tripped(event.device)
            self.refresh_topology()
        else:
            for k, group in enumerate(self.branches.groups):
                if group == event.branch:
                    self.live_branch[k] = False
            self.refresh_topology()
            if self.mode == "emt":
                v = unpack_complex(x[self.v_slice])
                i = unpack_complex(x[self.i_slice])
                pack_complex(np.where(self.live_bus, v, 0j), x[self.v_slice])
                pack_complex(np.where(self.live_branch, i, 0j), x[self.i_slice])
        # [Comment] The next step factorizes I - dt/2 J at the post-event state
        self.invalidate()
        logger.info(f"Event applied: {event.describe()}")
        return x

    # -------------------------------------------------
    # Newton support
    # -------------------------------------------------

    def jacobian(self, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
        return finite_difference_jacobian(self.derivatives, x, eps, columns=np.where(self.active_mask())[0])

    def iteration_lu(self, x: np.ndarray, dt: float, refresh: bool = False) -> LuFactors:
        """[Purpose] Cached factorization of I - dt/2 J, rebuilt on events, on request or for a new dt"""
        if refresh or self._lu_cache is None or self._lu_cache[0] != dt:
            self._lu_cache = (dt, iteration_matrix(self.jacobian(x), dt))
        return self._lu_cache[1]

    def invalidate(self) -> None:
        self._lu_cache = None


def assemble_system(
    network: Network,
    devices: Sequence[DeviceModel],
    mode: str,
    dt: float,
    **solver,
) -> SimSystem:
    """
    [Purpose] Builds the SimSystem and its state layout
    [Usage] assemble_system(network, devices, "phasor", 5e-3, newton_tol=1e-10)
    """
    system = SimSystem(network, devices, mode, dt, **solver)
    logger.debug(f"Assembled {mode} system: {len(system.devices)} devices, {system.n_states} states")
    return system


def _factorize_admittance(y: np.ndarray) -> LuFactors:
    lu, piv = lu_factor(y, check_finite=False)
    if np.any(np.abs(np.diag(lu)) < 1e-14):
        raise NetworkError("augmented admittance matrix is singular")
    return lu, piv


def solve_phasor_network(system: SimSystem, x: np.ndarray, signals: Optional[Signals] = None) -> np.ndarray:
    """
    [Purpose] Bus voltages of the algebraic network for the device sources in state x
    [Comment] Uses the augmented admittance factorized at the last topology change; islanded buses are 0.
              A device whose Norton current passes its limit is re-solved as a current source at the limit,
              repeated until no further device saturates; the limited currents are written to signals
              as i_lim_d:<device> and i_lim_q:<device> on the device rating
    """
    attached = [
        dev for dev in system.devices
        if dev.live and dev.bus is not None and system.live_bus[system.bus_index[dev.bus]]
    ]
    sources = {dev.name: dev.source_current(x[system.slices[dev.name]], {}) for dev in attached}
    limited: Dict[str, complex] = {}
    v = np.zeros(len(system.bus_ids), dtype=complex)
    while True:
        currents = np.zeros(len(system.bus_ids), dtype=complex)
        for dev in attached:
            currents[system.bus_index[dev.bus]] += limited.get(dev.name, sources[dev.name])
        lu = system.admittance_lu(frozenset(limited))
        v[system._live_idx] = lu_solve(lu, currents[system._live_idx], check_finite=False)
        added = {}
        for dev in attached:
            if dev.name not in limited:
                i_limit = dev.limited_current(x[system.slices[dev.name]], complex(v[system.bus_index[dev.bus]]))
                if i_limit is not None:
                    added[dev.name] = i_limit
        if not added:
            break
        limited.update(added)

    if signals is not None:
        for name, i in limited.items():
            i_own = i / system.by_name[name].scale
            signals[f"i_lim_d:{name}"] = i_own.real
            signals[f"i_lim_q:{name}"] = i_own.imag
    return v


# =====================================================
# Integrator
# =====================================================

def finite_difference_jacobian(
    fun: Function, x: np.ndarray, eps: float = 1e-6, columns: Optional[Sequence[int]] = None
) -> np.ndarray:
    """
    [Purpose] Central-difference Jacobian with step eps * max(1, |x_j|)
    [Comment] Columns not listed stay zero
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.zeros((n, n))
    for j in (range(n) if columns is None else columns):
        h = eps * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (fun(xp) - fun(xm)) / (2.0 * h)
    return jac


def iteration_matrix(jac: np.ndarray, dt: float) -> LuFactors:
    n = jac.shape[0]
    return lu_factor(np.eye(n) - 0.5 * dt * jac, check_finite=False)


def trapezoidal_step(
    fun: Function,
    x: np.ndarray,
    dt: float,
    lu: LuFactors,
    tol: float = 1e-10,
    max_iter: int = 20,
    f_x: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, int, bool]:
    """
    [Purpose] One implicit trapezoidal step solved by chord Newton with a fixed iteration matrix
    [Returns] (next state, iterations used, converged)
    [Usage] for dx/dt = lam x one step multiplies x by (1 + lam dt / 2) / (1 - lam dt / 2)
    """
    f0 = fun(x) if f_x is None else f_x
    x_new = x + dt * f0
    for iteration in range(1, max_iter + 1):
        residual = x_new - x - 0.5 * dt * (f0 + fun(x_new))
        delta = lu_solve(lu, -residual, check_finite=False)
        x_new = x_new + delta
        if not np.all(np.isfinite(x_new)):
            return x_new, iteration, False
        if np.max(np.abs(delta), initial=0.0) < tol:
            return x_new, iteration, True
    return x_new, max_iter, False


def step(system: SimSystem, x: np.ndarray, t: float, dt: Optional[float] = None) -> np.ndarray:
    """
    [Purpose] Advances the system by dt (the system step when omitted)
    [Comment] A failed step is retried with a fresh iteration matrix, then as SUBSTEPS steps of dt / SUBSTEPS
    [Errors] SimulationError when the sub-steps also fail
    """
    dt = system.dt if dt is None else dt
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    tol, max_iter = system.newton_tol, system.newton_max_iter
    f_x = system.derivatives(x)

    x_new, iterations, ok = trapezoidal_step(system.derivatives, x, dt, system.iteration_lu(x, dt), tol, max_iter, f_x)
    if ok:
        if iterations > REFRESH_ITERATIONS:
            system.invalidate()
        return x_new

    x_new, iterations, ok = trapezoidal_step(
        system.derivatives, x, dt, system.iteration_lu(x, dt, refresh=True), tol, max_iter, f_x
    )
    if ok:
        return x_new

    h = dt / SUBSTEPS
    logger.warning(f"⚠️ Newton failed at t={t:.6f} s, retrying with {SUBSTEPS} sub-steps")
    x_sub = x
    for k in range(SUBSTEPS):
        lu = iteration_matrix(system.jacobian(x_sub), h)
        x_sub, iterations, ok = trapezoidal_step(system.derivatives, x_sub, h, lu, tol, max_iter)
        if not ok:
            raise SimulationError(
                f"Newton iteration did not converge within {max_iter} iterations after dt/{SUBSTEPS} retry",
                time=t + k * h, scenario=system.scenario, mode=system.mode,
            )
    system.invalidate()
    return x_sub


def run(
    system: SimSystem,
    x0: np.ndarray,
    events: Sequence[Event],
    t_end: float,
    record_stride: int = 1,
) -> Trace:
    """
    [Purpose] Fixed-step integration from x0 to t_end with events at step boundaries
    [Parameters]
    - events: applied at the boundary nearest their time, recorded at that boundary
    - record_stride: keep every n-th step in the trace
    [Returns] Trace; metadata counts non-fatal flags and lists diagnostics
    [Errors] SimulationError for unknown event targets, Newton failure or a non-finite state
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be >= 1, got {record_stride}")
    for event in events:
        system.check_event(event)

    dt = system.dt
    n_steps = int(round(t_end / dt))
    schedule: Dict[int, List[Event]] = {}
    for event in sorted(events, key=lambda e: e.time):
        n = int(round(event.time / dt))
        if n >= n_steps:
            logger.warning(f"⚠️ Event '{event.describe()}' at {event.time} s is beyond t_end and is ignored")
            continue
        schedule.setdefault(n, []).append(event)

    x = np.array(x0, dtype=float)
    if x.size != system.n_states:
        raise ValueError(f"initial state has {x.size} entries, system has {system.n_states}")
    times: List[float] = []
    rows: List[Dict[str, float]] = []
    markers: List[EventMarker] = []
    flags = {name: 0 for name in FLAG_NAMES}
    max_ratio = 0.0

    def record(n: int, v: np.ndarray, outputs: Dict[str, Dict[str, float]]):
        times.append(n * dt)
        rows.append(system.channels(v, outputs))

    v, outputs = system.observe(x)
    record(0, v, outputs)
    logger.info(f"Running {system.mode} simulation to {t_end} s ({n_steps} steps of {dt:g} s)")

    for n in range(n_steps):
        for event in schedule.pop(n, []):
            x = system.apply_event(event, x)
            markers.append(EventMarker(time=n * dt, description=event.describe()))

        x = step(system, x, n * dt)
        if not np.all(np.isfinite(x)):
            raise SimulationError("state became non-finite", time=(n + 1) * dt, scenario=system.scenario,
                                  mode=system.mode)

        v, outputs = system.observe(x)
        for name, out in outputs.items():
            for flag in FLAG_NAMES:
                if out.get(flag):
                    flags[flag] += 1
            max_ratio = max(max_ratio, out.get("current_ratio", 0.0))
            if out.get("undervoltage") and n + 1 < n_steps:
                _schedule_converter_trip(system, system.by_name[name], n + 1, schedule)

        if (n + 1) % record_stride == 0:
            record(n + 1, v, outputs)

    for flag, count in flags.items():
        if count:
            logger.warning(f"⚠️ {flag} flag raised on {count} device-steps")
    names = list(rows[0])
    channels = {name: np.array([row.get(name, 0.0) for row in rows]) for name in names}
    logger.info(f"✓ Simulation finished: {len(times)} samples, {len(markers)} events")
    return Trace(
        time=np.array(times),
        channels=channels,
        events=markers,
        metadata={
            "scenario": system.scenario,
            "mode": system.mode,
            "inertia": system.inertia,
            "dt": dt,
            "flags": flags,
            "max_current_ratio": max_ratio,
            "diagnostics": list(system.diagnostics),
        },
    )


def _schedule_converter_trip(system: SimSystem, link_dev: DeviceModel, n: int, schedule: Dict[int, List[Event]]):
    """[Purpose] DC undervoltage on a link trips its offshore converter at the next boundary"""
    for dev in system.devices:
        if dev.kind in CONVERTER_KINDS and dev.link == link_dev.link and dev.live:
            pending = schedule.setdefault(n, [])
            if not any(e.kind == EventKind.DEVICE_TRIP and e.device == dev.name for e in pending):
                logger.warning(f"⚠️ DC undervoltage on {link_dev.name}: tripping {dev.name}")
                pending.append(Event(time=n * system.dt, kind=EventKind.DEVICE_TRIP, device=dev.name))


# =====================================================
# Small-signal analysis
# =====================================================

def _reference_index(eigenvalues: np.ndarray) -> Optional[int]:
    """[Returns] Index of the rotational-symmetry eigenvalue, None when no eigenvalue is numerically zero"""
    if eigenvalues.size == 0:
        return None
    magnitude = np.abs(eigenvalues)
    k = int(np.argmin(magnitude))
    return k if magnitude[k] < 1e-6 * max(1.0, float(magnitude.max())) else None


def _mode_info(eigenvalue: complex, reference: bool) -> ModeInfo:
    magnitude = abs(eigenvalue)
    return ModeInfo(
        eigenvalue=complex(eigenvalue),
        frequency_hz=abs(eigenvalue.imag) / (2.0 * math.pi),
        damping=-eigenvalue.real / magnitude if magnitude > 0 else 0.0,
        reference=reference,
    )


def linearize(
    system: SimSystem, x_eq: np.ndarray, eps: float = 1e-6, tol: float = DERIVATIVE_TOL
) -> LinearizationReport:
    """
    [Purpose] State matrix of the live states by central differences, with eigenvalues and damping ratios
    [Comment] The eigenvalue change when eps is halved is reported as sensitivity (relative, floored at 1 rad/s)
    [Errors] SimulationError when x_eq is not an equilibrium
    """
    x_eq = np.asarray(x_eq, dtype=float)
    residual = float(np.max(np.abs(system.derivatives(x_eq)), initial=0.0))
    if residual > tol:
        raise SimulationError(
            f"linearization needs an equilibrium, derivative norm is {residual:.2e} (limit {tol:.0e})",
            scenario=system.scenario, mode=system.mode,
        )
    active = np.where(system.active_mask())[0]

    def reduced(z: np.ndarray) -> np.ndarray:
        full = x_eq.copy()
        full[active] = z
        return system.derivatives(full)[active]

    a_matrix = finite_difference_jacobian(reduced, x_eq[active], eps)
    eigenvalues = eigvals(a_matrix)
    halved = eigvals(finite_difference_jacobian(reduced, x_eq[active], eps / 2.0))
    ref = _reference_index(eigenvalues)

    sensitivity = 0.0
    for k, lam in enumerate(eigenvalues):
        if k == ref:
            continue
        change = float(np.min(np.abs(halved - lam))) / max(abs(lam), 1.0)
        sensitivity = max(sensitivity, change)
    warnings: List[str] = []
    if sensitivity > SENSITIVITY_TOL:
        message = f"eigenvalues move by {sensitivity:.1e} (relative) when the perturbation is halved"
        logger.warning(f"⚠️ {message}")
        warnings.append(message)

    modes = [_mode_info(lam, k == ref) for k, lam in enumerate(eigenvalues)]
    order = sorted(range(len(modes)), key=lambda k: (-modes[k].eigenvalue.real, abs(modes[k].eigenvalue.imag)))
    modes = [modes[k] for k in order]
    stable = all(m.eigenvalue.real < 0 for m in modes if not m.reference)
    logger.info(
        f"{'✓' if stable else '⚠️'} Linearized {system.mode} system: {len(modes)} modes, "
        f"{'stable' if stable else 'UNSTABLE'}"
    )
    return LinearizationReport(
        a_matrix=a_matrix, modes=modes, stable=stable, sensitivity=sensitivity, epsilon=eps, warnings=warnings,
    )


def _spectrum(source: Union[LinearizationReport, Sequence[complex], np.ndarray]) -> np.ndarray:
    if isinstance(source, LinearizationReport):
        return np.array([m.eigenvalue for m in source.modes if not m.reference], dtype=complex)
    return np.asarray(source, dtype=complex)


def match_modes(
    emt: Union[LinearizationReport, Sequence[complex], np.ndarray],
    phasor: Union[LinearizationReport, Sequence[complex], np.ndarray],
    tol: float = 0.05,
    max_abs: Optional[float] = None,
) -> List[ModeMatch]:
    """
    [Purpose] Pairs every phasor-mode eigenvalue (|lambda| <= max_abs when given) with the nearest EMT one
    [Returns] One ModeMatch per phasor eigenvalue; matched when |lambda_emt - lambda_phasor| <= tol |lambda_phasor|
    """
    emt_eigs = _spectrum(emt)
    matches: List[ModeMatch] = []
    for lam in _spectrum(phasor):
        if abs(lam) == 0 or (max_abs is not None and abs(lam) > max_abs):
            continue
        if emt_eigs.size == 0:
            matches.append(ModeMatch(phasor=complex(lam), emt=None, relative_error=math.inf, matched=False))
            continue
        k = int(np.argmin(np.abs(emt_eigs - lam)))
        error = float(abs(emt_eigs[k] - lam) / abs(lam))
        matches.append(ModeMatch(phasor=complex(lam), emt=complex(emt_eigs[k]), relative_error=error,
                                 matched=error <= tol))
    return matches
