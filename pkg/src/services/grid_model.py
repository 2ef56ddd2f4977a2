# [Purpose] Grid-model services: per-unit conversion, pi-chains, hub topology, admittance and power flow
# [Comment] Complex numbers carry dq quantities: real part = d axis, imaginary part = q axis
# [Comment] Power is S = V * conj(I) with I injected into the network

import math
from typing import Dict, Iterable, List, Optional, Sequence

# [Library] NumPy - vectorized admittance assembly and Newton updates
# [Source] https://numpy.org/
import numpy as np

# [Library] SciPy - connected components of the branch graph
# [Source] https://docs.scipy.org/doc/scipy/reference/sparse.csgraph.html
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.models.grid import (
    Bus,
    BusType,
    CableSpec,
    DeviceAttachment,
    Network,
    OperatingPoint,
    PerUnitBase,
    PiSection,
    QuantityKind,
    Transformer,
)
from src.models.schemas import NetworkSection
from src.utils.errors import NetworkError, PowerFlowError
from src.utils.logger import get_logger

logger = get_logger(__name__)

HUB_BUS = "hub"


def _base_value(base: PerUnitBase, kind: QuantityKind, zone: str) -> float:
    kind = QuantityKind(kind)
    if kind == QuantityKind.VOLTAGE:
        return base.v_base(zone)
    if kind == QuantityKind.CURRENT:
        return base.i_base(zone)
    if kind == QuantityKind.POWER:
        return base.s_base
    if kind == QuantityKind.IMPEDANCE:
        return base.z_base(zone)
    return 1.0 / base.z_base(zone)


def to_pu(value, base: PerUnitBase, kind, zone: str = "hv"):
    """
    [Purpose] Physical quantity to per unit
    [Parameters]
    - value: kV, kA, MW/MVA/MVAr, ohm or siemens (scalars, complex numbers and arrays)
    - kind: voltage | current | power | impedance | admittance
    - zone: voltage zone whose base applies (ignored for power)
    [Errors] ValueError for an unknown voltage zone
    """
    return value / _base_value(base, kind, zone)


def from_pu(value, base: PerUnitBase, kind, zone: str = "hv"):
    """[Purpose] Inverse of to_pu for the same kind and zone"""
    return value * _base_value(base, kind, zone)


def cable_per_km_pu(spec: CableSpec, base: PerUnitBase):
    """[Returns] (r, x, b) per km in pu at base.f_base, in the zone of the cable's rated voltage"""
    zone = base.zone_for_voltage(spec.v_rated)
    z_b = base.z_base(zone)
    r = spec.r_series_per_km * 1e-3 / z_b
    x = base.omega_base * spec.l_per_km * 1e-3 / z_b
    b = base.omega_base * spec.c_per_km * 1e-6 * z_b
    return r, x, b


def default_section_count(length: float, section_length: float = 10.0) -> int:
    """[Purpose] ceil(length / section_length), at least one section"""
    return max(1, math.ceil(length / section_length - 1e-12))


def build_pi_chain(
    spec: CableSpec,
    length: float,
    n_sections: int,
    base: PerUnitBase,
    from_bus: str = "a",
    to_bus: str = "b",
    name: str = "cable",
) -> List[PiSection]:
    """
    [Purpose] Splits a cable into n identical pi-sections
    [Returns] Sections chained from_bus -> name_n1 -> ... -> to_bus; totals equal the lumped cable
    [Errors] ValueError for non-positive length or section count
    """
    if not length > 0:
        raise ValueError(f"cable length must be > 0 km, got {length}")
    if n_sections < 1:
        raise ValueError(f"n_sections must be >= 1, got {n_sections}")

    r_km, x_km, b_km = cable_per_km_pu(spec, base)
    seg = length / n_sections
    nodes = [from_bus] + [f"{name}_n{k}" for k in range(1, n_sections)] + [to_bus]
    return [
        PiSection(
            from_bus=nodes[k],
            to_bus=nodes[k + 1],
            r=r_km * seg,
            x=x_km * seg,
            b_half=b_km * seg / 2.0,
            group=name,
        )
        for k in range(n_sections)
    ]


def build_hub_network(
    net: NetworkSection,
    inertia: str = "zero",
    converter_transformer_x: float = 0.12,
    converter_transformer_r: float = 0.002,
    converter_rating: float = 1100.0,
    converter_filter_b: float = 0.05,
    converter_kind: Optional[str] = None,
    sc_count: int = 2,
) -> Network:
    """
    [Purpose] Builds the hub topology: slack hub bus, wind farms on parallel cables, converter buses on transformers
    [Parameters]
    - net: the [network] table
    - inertia: "zero" (grid-forming converters) or "low" (grid-following converters plus condensers at the hub)
    - converter_transformer_x/_r, converter_filter_b: pu on converter_rating (MVA)
    [Returns] Network with attachments wf<k>, conv<k> and, in the low-inertia topology, sc<k>
    """
    base = PerUnitBase(s_base=net.s_base, f_base=net.f_base, v_base_ac={"hv": net.v_hub, "mv": 66.0})
    spec = CableSpec(
        name=f"{net.cable_voltage:g}kV",
        v_rated=net.cable_voltage,
        s_rated=400.0 if net.cable_voltage == 220.0 else 1.05 * math.sqrt(3.0) * net.cable_voltage,
        r_dc_per_km=net.cable_r_per_km,
        c_per_km=net.cable_c_per_km,
        l_per_km=net.cable_l_per_km,
    )
    zone = base.zone_for_voltage(spec.v_rated)
    scale = converter_rating / net.s_base
    kind = converter_kind or ("gfm" if inertia == "zero" else "gfl")

    buses = [Bus(id=HUB_BUS, zone="hv", type=BusType.SLACK)]
    branches: List[PiSection] = []
    transformers: List[Transformer] = []
    attachments: List[DeviceAttachment] = []

    for k, distance in enumerate(net.farm_distances, start=1):
        farm = f"wf{k}"
        buses.append(Bus(id=farm, zone=zone))
        n_sec = default_section_count(distance, net.section_length)
        for j in range(1, net.cables_per_farm + 1):
            name = f"{farm}_c{j}"
            chain = build_pi_chain(spec, distance, n_sec, base, from_bus=farm, to_bus=HUB_BUS, name=name)
            buses.extend(Bus(id=f"{name}_n{m}", zone=zone) for m in range(1, n_sec))
            branches.extend(chain)
        attachments.append(DeviceAttachment(device=farm, bus=farm, kind="windfarm"))

    for k in range(1, net.n_links + 1):
        conv = f"conv{k}"
        buses.append(Bus(id=conv, zone="hv", b_shunt=converter_filter_b * scale))
        transformers.append(Transformer(
            name=f"tr{k}",
            from_bus=HUB_BUS,
            to_bus=conv,
            r=converter_transformer_r / scale,
            x=converter_transformer_x / scale,
        ))
        attachments.append(DeviceAttachment(device=conv, bus=conv, kind=kind))

    if inertia == "low":
        for k in range(1, sc_count + 1):
            attachments.append(DeviceAttachment(device=f"sc{k}", bus=HUB_BUS, kind="sc"))

    network = Network(
        base=base, buses=buses, branches=branches, transformers=transformers, attachments=attachments,
    )
    logger.debug(
        f"Hub network: {len(network.buses)} buses, {len(branches)} pi-sections, {len(transformers)} transformers"
    )
    return network


def islands(network: Network) -> List[List[str]]:
    """[Returns] Bus ids grouped by connected component of the branch graph"""
    idx = network.bus_index()
    n = len(network.buses)
    rows, cols = [], []
    for br in list(network.branches) + list(network.transformers):
        rows.append(idx[br.from_bus])
        cols.append(idx[br.to_bus])
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    groups: List[List[str]] = [[] for _ in range(count)]
    for bus, label in zip(network.bus_ids, labels):
        groups[label].append(bus)
    return groups


def validate_network(network: Network) -> List[str]:
    """
    [Purpose] Collects every topology problem instead of stopping at the first
    [Returns] Empty list for a valid network
    """
    problems: List[str] = []
    known = set(network.bus_ids)
    for br in network.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                problems.append(f"section {br.group or '?'} references unknown bus '{end}'")
        if br.r < 0 or br.b_half < 0:
            problems.append(f"section {br.from_bus}-{br.to_bus} has negative r or b")
    for tr in network.transformers:
        if not tr.x > 0:
            problems.append(f"transformer {tr.name} needs a positive reactance")
    slack = set(network.slack_buses())
    for group in islands(network):
        n_slack = len(slack.intersection(group))
        if n_slack != 1:
            head = ", ".join(group[:4]) + (" ..." if len(group) > 4 else "")
            problems.append(f"island [{head}] has {n_slack} slack buses, expected exactly 1")
    return problems


def assemble_admittance(network: Network, f: Optional[float] = None) -> np.ndarray:
    """
    [Purpose] Dense complex bus admittance matrix at frequency f
    [Comment] Reactances and susceptances are stored at f_base and scale with f / f_base
    [Errors] NetworkError when a bus has neither a branch nor a shunt (singular row)
    """
    f = network.base.f_base if f is None else f
    if not f > 0:
        raise ValueError(f"frequency must be > 0, got {f}")
    ratio = f / network.base.f_base
    idx = network.bus_index()
    n = len(idx)
    y_bus = np.zeros((n, n), dtype=complex)

    for br in network.branches:
        i, k = idx[br.from_bus], idx[br.to_bus]
        y = 1.0 / complex(br.r, br.x * ratio)
        ysh = 1j * br.b_half * ratio
        y_bus[i, i] += y + ysh
        y_bus[k, k] += y + ysh
        y_bus[i, k] -= y
        y_bus[k, i] -= y

    for tr in network.transformers:
        i, k = idx[tr.from_bus], idx[tr.to_bus]
        y = 1.0 / complex(tr.r, tr.x * ratio)
        t = tr.ratio
        y_bus[i, i] += y / t**2
        y_bus[k, k] += y
        y_bus[i, k] -= y / t
        y_bus[k, i] -= y / t

    for bus in network.buses:
        if bus.b_shunt:
            y_bus[idx[bus.id], idx[bus.id]] += 1j * bus.b_shunt * ratio

    empty = [network.buses[k].id for k in range(n) if not np.any(y_bus[k])]
    if empty:
        raise NetworkError(f"buses without branch or shunt make the admittance matrix singular: {', '.join(empty)}")
    return y_bus


def _bus_injection_vector(network: Network, injections: Dict[str, complex]) -> np.ndarray:
    idx = network.bus_index()
    s = np.zeros(len(idx), dtype=complex)
    for bus, value in injections.items():
        if bus not in idx:
            raise NetworkError(f"injection at unknown bus '{bus}'")
        s[idx[bus]] += value
    return s


def power_flow(
    network: Network,
    injections: Dict[str, complex],
    pv_setpoints: Optional[Dict[str, float]] = None,
    slack_voltage: complex = 1.0 + 0.0j,
    tol: float = 1e-8,
    max_iter: int = 50,
    f: Optional[float] = None,
) -> OperatingPoint:
    """
    [Purpose] Newton-Raphson power flow in polar coordinates with flat start
    [Parameters]
    - injections: per-bus net complex power injection P + jQ (pu); the slack entry is ignored
    - pv_setpoints: voltage magnitude of PV buses (pu); Q of those buses is solved
    - tol: max-norm of the P/Q mismatch (pu)
    [Returns] OperatingPoint with bus voltages and the net injection of every bus (slack included)
    [Errors] NetworkError for an invalid topology, PowerFlowError for divergence or a singular Jacobian
    """
    problems = validate_network(network)
    if problems:
        raise NetworkError("; ".join(problems))

    y_bus = assemble_admittance(network, f)
    idx = network.bus_index()
    n = len(idx)
    s_spec = _bus_injection_vector(network, injections)
    pv_setpoints = pv_setpoints or {}

    types = [b.type for b in network.buses]
    for bus in pv_setpoints:
        types[idx[bus]] = BusType.PV
    slack = np.array([t == BusType.SLACK for t in types])
    pv = np.array([t == BusType.PV for t in types])
    pq = ~slack & ~pv
    p_rows = np.where(~slack)[0]
    q_rows = np.where(pq)[0]

    v_mag = np.ones(n)
    v_ang = np.zeros(n)
    v_mag[slack] = abs(slack_voltage)
    v_ang[slack] = np.angle(slack_voltage)
    for bus, vm in pv_setpoints.items():
        v_mag[idx[bus]] = vm

    mismatch = float("inf")
    for iteration in range(max_iter + 1):
        v = v_mag * np.exp(1j * v_ang)
        i_inj = y_bus @ v
        s_calc = v * np.conj(i_inj)
        ds = s_spec - s_calc
        f_vec = np.concatenate([ds.real[p_rows], ds.imag[q_rows]])
        mismatch = float(np.max(np.abs(f_vec))) if f_vec.size else 0.0
        if not np.isfinite(mismatch):
            raise PowerFlowError("non-finite mismatch, injections are likely infeasible", iteration, mismatch)
        if mismatch < tol:
            break
        if iteration == max_iter:
            raise PowerFlowError("power flow did not converge", iteration, mismatch)

        # [Comment] Complex derivatives dS/dVa and dS/dVm (polar form)
        diag_v = np.diag(v)
        diag_i = np.diag(i_inj)
        diag_vn = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - y_bus @ diag_v)
        ds_dvm = diag_v @ np.conj(y_bus @ diag_vn) + np.conj(diag_i) @ diag_vn
        jac = np.block([
            [ds_dva.real[np.ix_(p_rows, p_rows)], ds_dvm.real[np.ix_(p_rows, q_rows)]],
            [ds_dva.imag[np.ix_(q_rows, p_rows)], ds_dvm.imag[np.ix_(q_rows, q_rows)]],
        ])
        try:
            dx = np.linalg.solve(jac, f_vec)
        except np.linalg.LinAlgError:
            raise PowerFlowError("singular Jacobian (voltage collapse region)", iteration, mismatch)
        v_ang[p_rows] += dx[: p_rows.size]
        v_mag[q_rows] += dx[p_rows.size:]
        if np.any(v_mag[q_rows] <= 0.05):
            raise PowerFlowError("voltage collapsed below 0.05 pu, injections are infeasible", iteration + 1, mismatch)

    v = v_mag * np.exp(1j * v_ang)
    s_bus = v * np.conj(y_bus @ v)
    logger.debug(f"Power flow converged in {iteration} iterations, mismatch {mismatch:.2e} pu")
    return OperatingPoint(
        bus_ids=network.bus_ids,
        v_mag=v_mag.tolist(),
        v_ang=v_ang.tolist(),
        bus_p=s_bus.real.tolist(),
        bus_q=s_bus.imag.tolist(),
        mismatch=mismatch,
        iterations=iteration,
        frequency=network.base.f_base if f is None else f,
    )


def power_flow_residual(network: Network, op: OperatingPoint, f: Optional[float] = None) -> np.ndarray:
    """[Purpose] Independent check: S_bus - V * conj(Y V) for every bus (zero at a solution)"""
    y_bus = assemble_admittance(network, f)
    v = np.array(op.complex_voltages())
    s_bus = np.array(op.bus_p) + 1j * np.array(op.bus_q)
    return s_bus - v * np.conj(y_bus @ v)


def balance_injections(
    network: Network,
    fixed: Dict[str, complex],
    p_participants: Sequence[str],
    q_participants: Sequence[str],
    loss_resistance: Optional[Dict[str, float]] = None,
    tol: float = 1e-10,
    max_outer: int = 50,
    pf_tol: float = 1e-12,
) -> OperatingPoint:
    """
    [Purpose] Distributed-slack initialization of the device injections
    [Parameters]
    - fixed: per-device injections that stay as given (wind farms)
    - p_participants: devices that share the active power the slack would carry, equally
    - q_participants: devices that share the slack's reactive power, equally
    - loss_resistance: devices (condensers) whose active power is held at -r |i|^2 (system-base r)
    [Returns] OperatingPoint whose slack injection is below tol and whose injections map has every device
    [Errors] PowerFlowError when the outer loop does not converge
    """
    loss_resistance = loss_resistance or {}
    devices: Dict[str, complex] = {d: complex(s) for d, s in fixed.items()}
    for d in list(p_participants) + list(q_participants):
        devices.setdefault(d, 0j)
    slack_bus = network.slack_buses()[0]
    slack_index = network.bus_index()[slack_bus]

    residual = complex("inf")
    op: Optional[OperatingPoint] = None
    for outer in range(1, max_outer + 1):
        by_bus: Dict[str, complex] = {}
        for device, s in devices.items():
            bus = network.attachment(device).bus
            by_bus[bus] = by_bus.get(bus, 0j) + s
        op = power_flow(network, by_bus, tol=pf_tol)
        s_slack = complex(op.bus_p[slack_index], op.bus_q[slack_index])
        residual = s_slack - by_bus.get(slack_bus, 0j)
        loss_targets = {}
        for d, r in loss_resistance.items():
            v = op.voltage(network.attachment(d).bus)
            loss_targets[d] = -r * abs(devices[d]) ** 2 / abs(v) ** 2
        loss_error = max((abs(devices[d].real - p) for d, p in loss_targets.items()), default=0.0)
        if abs(residual) < tol and loss_error < tol:
            break
        if p_participants:
            share = residual.real / len(p_participants)
            for d in p_participants:
                devices[d] += share
        if q_participants:
            share = residual.imag / len(q_participants)
            for d in q_participants:
                devices[d] += 1j * share
        for d, p in loss_targets.items():
            devices[d] = complex(p, devices[d].imag)
    else:
        raise PowerFlowError("distributed slack did not converge", max_outer, abs(residual))

    logger.info(f"✓ Operating point balanced in {outer} outer iterations (slack residual {abs(residual):.1e} pu)")
    return op.model_copy(update={"injections": {d: [s.real, s.imag] for d, s in devices.items()}})


def device_currents(network: Network, op: OperatingPoint, y_bus: Optional[np.ndarray] = None) -> Dict[str, complex]:
    """
    [Purpose] Exact injected current of every device from I = Y V, split among devices sharing a bus
    [Comment] The split is by conj(S_device) / conj(S_bus); a bus with zero net injection gives zero currents
    """
    y_bus = assemble_admittance(network) if y_bus is None else y_bus
    v = np.array(op.complex_voltages())
    i_bus = y_bus @ v
    idx = network.bus_index()
    s_by_bus: Dict[str, complex] = {}
    for device in op.injections:
        bus = network.attachment(device).bus
        s_by_bus[bus] = s_by_bus.get(bus, 0j) + op.injection(device)
    currents: Dict[str, complex] = {}
    for device in op.injections:
        bus = network.attachment(device).bus
        s_total = s_by_bus[bus]
        if abs(s_total) == 0.0:
            currents[device] = 0j
        else:
            currents[device] = complex(i_bus[idx[bus]]) * np.conj(op.injection(device)) / np.conj(s_total)
    return currents


def total_charging(network: Network, groups: Iterable[str], f: Optional[float] = None, v: float = 1.0) -> float:
    """[Returns] Reactive power generated by the shunts of the named cables at voltage v (pu)"""
    ratio = (network.base.f_base if f is None else f) / network.base.f_base
    wanted = set(groups)
    return sum(2.0 * br.b_half * ratio * v**2 for br in network.branches if br.group in wanted)
