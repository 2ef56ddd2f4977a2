# [Purpose] Turns a run configuration into an initialized SimSystem for one mode and one inertia topology
# [Comment] Device names: wf<k>, conv<k>, hvdc<k>, on<k>, sc<k>, central

from typing import Dict, List, NamedTuple, Optional

# [Library] NumPy - initial state vector assembly
# [Source] https://numpy.org/
import numpy as np

from src.models.grid import Network, OperatingPoint
from src.models.schemas import RunConfig
from src.services.devices import (
    CentralController,
    DeviceModel,
    GridFollowingVsc,
    GridFormingVsc,
    HvdcLink,
    OnshoreEquivalent,
    SynchronousCondenser,
    WindFarmEq,
)
from src.services.devices.base import Signals
from src.services.grid_model import balance_injections, build_hub_network
from src.services.sim_engine import (
    DERIVATIVE_TOL,
    SimSystem,
    assemble_system,
    network_admittance,
    pack_complex,
)
from src.utils.errors import InitializationError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# [Comment] Residual above which the initial state is rejected rather than reported
INIT_REJECT_TOL = 1e-4


class BuiltSystem(NamedTuple):
    system: SimSystem
    x0: np.ndarray
    operating_point: OperatingPoint
    residual: float


def hub_network(config: RunConfig, inertia: str) -> Network:
    devices = config.devices
    converter = devices.gfm if inertia == "zero" else devices.gfl
    return build_hub_network(
        config.network,
        inertia=inertia,
        converter_transformer_x=converter.transformer_x,
        converter_transformer_r=converter.transformer_r,
        converter_rating=converter.rating,
        converter_filter_b=converter.c_f,
        sc_count=devices.sc.count,
    )


def build_devices(config: RunConfig, network: Network, mode: str, inertia: str) -> List[DeviceModel]:
    """[Purpose] One device object per network attachment plus the DC links, onshore areas and central controller"""
    params = config.devices
    s_base = network.base.s_base
    omega_base = network.base.omega_base
    n_links = config.network.n_links
    devices: List[DeviceModel] = []

    for att in network.attachments:
        if att.kind == "windfarm":
            devices.append(WindFarmEq(att.device, att.bus, config.network.farm_rating, params.windfarm,
                                      s_base, omega_base, mode))
        elif att.kind == "gfm":
            link = int(att.device.removeprefix("conv"))
            devices.append(GridFormingVsc(att.device, att.bus, link, params.gfm, s_base, omega_base, mode))
        elif att.kind == "gfl":
            link = int(att.device.removeprefix("conv"))
            devices.append(GridFollowingVsc(att.device, att.bus, link, params.gfl, s_base, omega_base, mode))
        elif att.kind == "sc":
            devices.append(SynchronousCondenser(att.device, att.bus, params.sc, s_base, omega_base, mode))

    for k in range(1, n_links + 1):
        devices.append(HvdcLink(f"hvdc{k}", k, params.hvdc, s_base, omega_base, mode))
        devices.append(OnshoreEquivalent(f"on{k}", k, params.hvdc.rating, params.onshore, s_base, omega_base, mode))

    if inertia == "low":
        converters = [f"conv{k}" for k in range(1, n_links + 1)]
        devices.append(CentralController("central", params.central, converters, params.gfl.rating,
                                         s_base, omega_base, mode))
    return devices


def operating_point(config: RunConfig, network: Network, inertia: str) -> OperatingPoint:
    """
    [Purpose] Distributed-slack steady state of the hub
    [Comment] Converters share active power; reactive power goes to the converters (zero inertia)
              or to the condensers (low inertia), which also carry their own resistive losses
    """
    s_base = network.base.s_base
    kinds: Dict[str, List[str]] = {}
    for att in network.attachments:
        kinds.setdefault(att.kind, []).append(att.device)
    fixed = {farm: complex(config.network.farm_power / s_base, 0.0) for farm in kinds.get("windfarm", [])}
    converters = kinds.get("gfm", []) + kinds.get("gfl", [])
    if inertia == "zero":
        return balance_injections(network, fixed, converters, converters)
    sc = config.devices.sc
    r_system = sc.r_a / (sc.rating / s_base)
    condensers = kinds.get("sc", [])
    return balance_injections(network, fixed, converters, condensers,
                              loss_resistance={d: r_system for d in condensers})


def init_devices(system: SimSystem, op: OperatingPoint) -> np.ndarray:
    """
    [Purpose] Equilibrium state of every device and, in EMT mode, of the network
    [Comment] Bus voltages are recomputed from the device currents through the admittance matrix, so the
              network equations hold to roundoff in both modes
    [Errors] InitializationError when a device has no equilibrium or the residual is far above tolerance
    """
    idx = system.bus_index
    currents = np.zeros(len(system.bus_ids), dtype=complex)
    device_current: Dict[str, complex] = {}
    for dev in system.devices:
        if dev.bus is None:
            continue
        if dev.name not in op.injections:
            raise InitializationError(f"operating point has no injection for {dev.name}")
        v = op.voltage(dev.bus)
        i = (op.injection(dev.name) / v).conjugate()
        device_current[dev.name] = i
        currents[idx[dev.bus]] += i

    y_bus = network_admittance(system.branches, system.bus_shunt, np.ones(len(system.branches.names), dtype=bool))
    v_star = np.linalg.solve(y_bus, currents)

    x0 = np.zeros(system.n_states)
    signals: Signals = {}
    for dev in system.devices:
        sl = system.slices[dev.name]
        if dev.bus is None:
            x0[sl] = dev.initialize(0j, 0j, signals)
            continue
        v = complex(v_star[idx[dev.bus]])
        i = device_current[dev.name]
        x0[sl] = dev.initialize(v, v * i.conjugate(), signals)

    if system.mode == "emt":
        arrays = system.branches
        i_branch = (v_star[arrays.from_idx] / arrays.ratio - v_star[arrays.to_idx]) / arrays.z
        pack_complex(v_star, x0[system.v_slice])
        pack_complex(i_branch, x0[system.i_slice])
    return x0


def initial_residual(system: SimSystem, x0: np.ndarray) -> float:
    return float(np.max(np.abs(system.derivatives(x0)), initial=0.0))


def build_system(
    config: RunConfig,
    mode: str,
    inertia: Optional[str] = None,
    scenario: str = "",
) -> BuiltSystem:
    """
    [Purpose] Network, devices, operating point and initial state for one mode
    [Parameters]
    - mode: "emt" or "phasor"
    - inertia: "zero" or "low"; the [scenario] table's value when omitted
    [Returns] BuiltSystem with the residual max-norm of the initial derivatives
    [Errors] NetworkError, PowerFlowError, InitializationError
    [Usage] built = build_system(RunConfig(), "phasor", "zero")
    """
    inertia = inertia or config.scenario.inertia
    network = hub_network(config, inertia)
    devices = build_devices(config, network, mode, inertia)
    dt = config.solver.dt_emt if mode == "emt" else config.solver.dt_phasor
    system = assemble_system(
        network, devices, mode, dt,
        newton_tol=config.solver.newton_tol,
        newton_max_iter=config.solver.newton_max_iter,
        scenario=scenario,
        inertia=inertia,
    )
    op = operating_point(config, network, inertia)
    x0 = init_devices(system, op)
    residual = initial_residual(system, x0)
    if residual > INIT_REJECT_TOL:
        raise InitializationError(f"initial state is not an equilibrium: derivative norm {residual:.2e}")
    if residual > DERIVATIVE_TOL:
        logger.warning(f"⚠️ Initial derivative norm {residual:.2e} is above {DERIVATIVE_TOL:.0e}")
    else:
        logger.info(f"✓ {mode} system initialized ({inertia} inertia, {system.n_states} states, "
                    f"residual {residual:.1e})")
    return BuiltSystem(system, x0, op, residual)
