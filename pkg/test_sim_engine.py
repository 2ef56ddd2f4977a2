"""
[Purpose] Tests of the simulation engine: integrator, network equations, events, linearization
"""

import math
from typing import Tuple

import numpy as np
import pytest
from scipy.linalg import eigvals

from src.models.grid import Bus, BusType, Network, PiSection
from src.models.schemas import RunConfig
from src.models.simulation import Event, EventKind
from src.services.devices.base import DeviceModel, Signals
from src.services.sim_engine import (
    SimSystem,
    branch_arrays,
    emt_network,
    emt_network_derivatives,
    finite_difference_jacobian,
    iteration_matrix,
    linearize,
    match_modes,
    network_admittance,
    pack_complex,
    run,
    step,
    trapezoidal_step,
    unpack_complex,
)
from src.services.system_builder import build_system
from src.utils.errors import SimulationError

OMEGA_B = 2.0 * math.pi * 50.0


def _integrate(fun, x0: np.ndarray, dt: float, t_end: float) -> np.ndarray:
    lu = iteration_matrix(finite_difference_jacobian(fun, x0), dt)
    x = x0
    for _ in range(int(round(t_end / dt))):
        x, _, ok = trapezoidal_step(fun, x, dt, lu, tol=1e-13)
        assert ok
    return x


# ---------------------------------------------------------------- integrator

@pytest.mark.parametrize("lam,dt", [(-3.0, 0.1), (-50.0, 1e-3), (2.0, 0.01), (-1e6, 5e-3)])
def test_trapezoidal_amplification(lam, dt):
    fun = lambda x: lam * x  # noqa: E731
    lu = iteration_matrix(np.array([[lam]]), dt)
    x1, _, ok = trapezoidal_step(fun, np.array([1.0]), dt, lu)
    assert ok
    assert x1[0] == pytest.approx((1 + lam * dt / 2) / (1 - lam * dt / 2), rel=1e-12)


@pytest.mark.parametrize("dt", [1e-4, 1e-2, 1.0, 100.0])
def test_trapezoidal_is_a_stable(dt):
    a = np.array([[-0.5, -300.0], [300.0, -0.5]])
    fun = lambda x: a @ x  # noqa: E731
    x1, _, ok = trapezoidal_step(fun, np.array([1.0, 0.0]), dt, iteration_matrix(a, dt))
    assert ok
    assert np.linalg.norm(x1) < 1.0


def test_trapezoidal_second_order_on_oscillator():
    w = 2.0 * math.pi * 5.25
    a = np.array([[0.0, 1.0], [-w * w, 0.0]])
    fun = lambda x: a @ x  # noqa: E731
    x0 = np.array([1.0, 0.0])
    errors = []
    for dt in (1e-3, 5e-4):
        x = _integrate(fun, x0, dt, 1.0)
        errors.append(abs(x[0] - math.cos(w * 1.0)))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.1)


def test_trapezoidal_reports_non_finite_state():
    lu = iteration_matrix(np.eye(1), 0.1)
    _, _, ok = trapezoidal_step(lambda x: np.full_like(x, np.nan), np.array([1.0]), 0.1, lu)
    assert not ok


# ---------------------------------------------------------------- EMT network

def _two_bus(b: float = 0.2, x: float = 0.1, r: float = 0.0) -> Network:
    return Network(
        buses=[Bus(id="a", type=BusType.SLACK, b_shunt=b), Bus(id="b", b_shunt=b)],
        branches=[PiSection(from_bus="a", to_bus="b", r=r, x=x, b_half=0.0, group="ab")],
    )


def _emt_of(network: Network):
    arrays = branch_arrays(network)
    shunt = np.array([bus.b_shunt for bus in network.buses])
    live_branch = np.ones(len(arrays.names), dtype=bool)
    live_bus = np.ones(len(network.buses), dtype=bool)
    return arrays, shunt, emt_network(arrays, shunt, live_branch, live_bus)


def test_emt_network_at_rest():
    network = _two_bus()
    _, _, net = _emt_of(network)
    dv, di = emt_network_derivatives(np.zeros(2, complex), np.zeros(1, complex), np.zeros(2, complex), net, OMEGA_B)
    assert np.all(dv == 0) and np.all(di == 0)


def test_emt_network_reproduces_admittance_solution():
    network = Network(
        buses=[
            Bus(id="a", type=BusType.SLACK, b_shunt=0.3),
            Bus(id="b", b_shunt=0.5),
            Bus(id="c", b_shunt=0.4),
        ],
        branches=[
            PiSection(from_bus="a", to_bus="b", r=0.01, x=0.1, b_half=0.05, group="ab"),
            PiSection(from_bus="b", to_bus="c", r=0.02, x=0.15, b_half=0.05, group="bc"),
        ],
    )
    arrays, shunt, net = _emt_of(network)
    v = np.array([1.0 + 0.0j, 0.98 - 0.05j, 1.02 + 0.03j])
    i_dev = network_admittance(arrays, shunt, np.ones(2, bool)) @ v
    i_br = (v[arrays.from_idx] / arrays.ratio - v[arrays.to_idx]) / arrays.z
    dv, di = emt_network_derivatives(v, i_br, i_dev, net, OMEGA_B)
    assert max(np.max(np.abs(dv)), np.max(np.abs(di))) < 1e-10


def test_emt_network_with_transformer_ratio(zero_inertia_network):
    arrays = branch_arrays(zero_inertia_network)
    shunt = np.array([bus.b_shunt for bus in zero_inertia_network.buses])
    n = shunt.size
    net = emt_network(arrays, shunt, np.ones(len(arrays.names), bool), np.ones(n, bool))
    rng = np.random.default_rng(7)
    v = (1.0 + 0.02 * rng.standard_normal(n)) * np.exp(0.05j * rng.standard_normal(n))
    i_dev = network_admittance(arrays, shunt, np.ones(len(arrays.names), bool)) @ v
    i_br = (v[arrays.from_idx] / arrays.ratio - v[arrays.to_idx]) / arrays.z
    dv, di = emt_network_derivatives(v, i_br, i_dev, net, OMEGA_B)
    assert max(np.max(np.abs(dv)), np.max(np.abs(di))) < 1e-8


def test_lc_resonance_is_offset_by_base_frequency():
    b, x = 0.2, 0.1
    network = _two_bus(b=b, x=x)
    _, _, net = _emt_of(network)

    def fun(z):
        v = unpack_complex(z[:4])
        i = unpack_complex(z[4:])
        dv, di = emt_network_derivatives(v, i, np.zeros(2, complex), net, OMEGA_B)
        out = np.zeros(6)
        pack_complex(dv, out[:4])
        pack_complex(di, out[4:])
        return out

    eigenvalues = eigvals(finite_difference_jacobian(fun, np.zeros(6)))
    w_lc = OMEGA_B / math.sqrt(x * b / 2.0)
    assert np.max(np.abs(eigenvalues.real)) < 1e-6 * w_lc
    freqs = np.abs(eigenvalues.imag)
    for expected in (w_lc - OMEGA_B, w_lc + OMEGA_B, OMEGA_B):
        assert np.min(np.abs(freqs - expected)) < 1e-6 * expected


# ---------------------------------------------------------------- assembled system

class SwingDroop(DeviceModel):
    """Single machine against a stiff source: 2H d(dw)/dt = P0 - dw / R - P_max sin(delta) - D dw"""

    kind = "central"

    def __init__(self, p0=0.5, p_max=1.5, h=3.0, d=1.0, r=0.05):
        super().__init__("machine", None, 1000.0, 1000.0, OMEGA_B, "phasor")
        self.p0, self.p_max, self.h, self.d, self.r = p0, p_max, h, d, r

    @property
    def state_names(self) -> Tuple[str, ...]:
        return ("delta", "dw")

    def initialize(self, v: complex, s: complex, signals: Signals) -> np.ndarray:
        return np.array([math.asin(self.p0 / self.p_max), 0.0])

    def derivatives(self, x: np.ndarray, v: complex, signals: Signals) -> np.ndarray:
        delta, dw = x
        acc = (self.p0 - dw / self.r - self.p_max * math.sin(delta) - self.d * dw) / (2 * self.h)
        return np.array([OMEGA_B * dw, acc])


def _swing_system() -> Tuple[SimSystem, np.ndarray, SwingDroop]:
    network = Network(buses=[Bus(id="hub", type=BusType.SLACK, b_shunt=1.0)])
    machine = SwingDroop()
    system = SimSystem(network, [machine], "phasor", 0.01)
    return system, machine.initialize(0j, 0j, {}), machine


def test_swing_droop_eigenvalues_match_quadratic():
    system, x0, m = _swing_system()
    report = linearize(system, x0)
    k_sync = m.p_max * math.cos(x0[0])
    damping = (m.d + 1.0 / m.r) / (2 * m.h)
    expected = np.roots([1.0, damping, OMEGA_B * k_sync / (2 * m.h)])
    found = report.eigenvalues
    assert len(found) == 2
    for lam in expected:
        assert np.min(np.abs(found - lam)) < 1e-6 * abs(lam)
    assert report.stable
    assert not any(mode.reference for mode in report.modes)
    assert report.sensitivity < 1e-3


def test_linearize_rejects_non_equilibrium():
    system, x0, _ = _swing_system()
    with pytest.raises(SimulationError, match="equilibrium"):
        linearize(system, x0 + np.array([0.1, 0.0]))


def test_layout_is_a_bijection():
    built = build_system(RunConfig(), "emt", "zero")
    indices = sorted(built.system.layout.values())
    assert indices == list(range(built.system.n_states))
    assert any(name.startswith("bus.") for name in built.system.layout)
    assert any(name.startswith("branch.") for name in built.system.layout)


def test_phasor_layout_has_no_network_states():
    system = build_system(RunConfig(), "phasor", "zero").system
    assert not any(name.startswith(("bus.", "branch.")) for name in system.layout)


def test_step_keeps_phasor_equilibrium():
    built = build_system(RunConfig(), "phasor", "zero")
    x1 = step(built.system, built.x0, 0.0)
    assert np.max(np.abs(x1 - built.x0)) < 1e-9


def test_phasor_power_balance():
    built = build_system(RunConfig(), "phasor", "low")
    system, x = built.system, built.x0
    v = system.bus_voltages(x)
    s_devices = sum(
        system.terminal_voltage(dev, v) * np.conj(dev.injection(x[system.slices[dev.name]], system.terminal_voltage(dev, v), {}))
        for dev in system.devices if dev.bus is not None
    )
    y_bus = network_admittance(system.branches, system.bus_shunt, system.live_branch)
    s_network = np.sum(v * np.conj(y_bus @ v))
    assert abs(s_devices.real - s_network.real) < 1e-6


def test_phasor_solve_holds_overloaded_converter_at_its_limit():
    built = build_system(RunConfig(), "phasor", "zero")
    system, x = built.system, built.x0.copy()
    x[system.layout["conv1.theta"]] += 0.8
    signals: Signals = {}
    v = system.bus_voltages(x, signals)
    assert "i_lim_d:conv1" in signals

    y_bus = network_admittance(system.branches, system.bus_shunt, system.live_branch)
    injected = np.zeros(len(system.bus_ids), dtype=complex)
    for dev in system.devices:
        if dev.bus is not None:
            v_term = system.terminal_voltage(dev, v)
            injected[system.bus_index[dev.bus]] += dev.injection(x[system.slices[dev.name]], v_term, signals)
    assert np.max(np.abs(y_bus @ v - injected)) < 1e-9

    _, outputs = system.observe(x)
    assert outputs["conv1"]["current_ratio"] == pytest.approx(1.0, abs=1e-9)
    assert outputs["conv1"]["saturated"] == 1.0
    assert outputs["conv2"]["saturated"] == 0.0


def test_delivered_power_balances_generation_after_windfarm_trip():
    built = build_system(RunConfig(), "phasor", "zero")
    system, x = built.system, built.x0
    for event in (
        Event(time=0.0, kind=EventKind.DEVICE_TRIP, device="wf5"),
        Event(time=0.0, kind=EventKind.BRANCH_TRIP, branch="wf5_c1"),
        Event(time=0.0, kind=EventKind.BRANCH_TRIP, branch="wf5_c2"),
    ):
        x = system.apply_event(event, x)
    for n in range(1000):
        x = step(system, x, n * system.dt)

    v, outputs = system.observe(x)
    generated = sum(outputs[f"wf{k}"]["p"] for k in range(1, 5))
    delivered = sum(outputs[f"hvdc{k}"]["p_out"] for k in range(1, 6))
    y_bus = network_admittance(system.branches, system.bus_shunt, system.live_branch)
    ac_losses = float(np.real(np.vdot(v, y_bus @ v)))
    filter_losses = dc_losses = 0.0
    for k in range(1, 6):
        conv, link = system.device(f"conv{k}"), system.device(f"hvdc{k}")
        i_conv = outputs[f"conv{k}"]["current_ratio"] * conv.params.i_max
        filter_losses += conv.params.r_f * i_conv ** 2 * conv.scale
        i_dc = x[system.layout[f"hvdc{k}.i_dc"]]
        dc_losses += link.params.r_dc * i_dc ** 2 * link.scale
    assert delivered == pytest.approx(generated - ac_losses - filter_losses - dc_losses, abs=1e-3)
    assert outputs["wf1"]["p"] > 0.0


# ---------------------------------------------------------------- runs and events

def test_equilibrium_hold_without_events():
    built = build_system(RunConfig(), "phasor", "zero")
    trace = run(built.system, built.x0, [], 1.0)
    assert len(trace) == 201
    for name, samples in trace.channels.items():
        assert np.ptp(samples) < 1e-6, name


def test_converter_trip_zeroes_its_channel():
    built = build_system(RunConfig(), "phasor", "zero")
    event = Event(time=0.1, kind=EventKind.DEVICE_TRIP, device="conv1")
    trace = run(built.system, built.x0, [event], 0.5)
    after = trace.time > 0.1 + 1e-12
    assert np.all(trace.channels["p_conv1_pu"][after] == 0.0)
    assert trace.channels["p_conv2_pu"][-1] > trace.channels["p_conv2_pu"][0]
    assert [m.description for m in trace.events] == ["device-trip conv1"]


def test_events_snap_to_step_boundary():
    built = build_system(RunConfig(), "phasor", "zero")
    event = Event(time=0.1012, kind=EventKind.SETPOINT_STEP, device="conv2", field="p_ref", delta=-0.01)
    trace = run(built.system, built.x0, [event], 0.2)
    assert trace.events[0].time == pytest.approx(0.1, abs=1e-15)


def test_unknown_event_target():
    built = build_system(RunConfig(), "phasor", "zero")
    with pytest.raises(SimulationError, match="unknown device"):
        run(built.system, built.x0, [Event(time=0.1, kind=EventKind.DEVICE_TRIP, device="conv9")], 0.2)
    with pytest.raises(SimulationError, match="unknown branch"):
        run(built.system, built.x0, [Event(time=0.1, kind=EventKind.BRANCH_TRIP, branch="wf9_c1")], 0.2)
    with pytest.raises(SimulationError, match="no setpoint"):
        run(built.system, built.x0,
            [Event(time=0.1, kind=EventKind.SETPOINT_STEP, device="conv1", field="p0", delta=0.1)], 0.2)


def test_islanded_farm_is_reported():
    built = build_system(RunConfig(), "phasor", "zero")
    events = [
        Event(time=0.1, kind=EventKind.DEVICE_TRIP, device="wf5"),
        Event(time=0.1, kind=EventKind.BRANCH_TRIP, branch="wf5_c1"),
        Event(time=0.1, kind=EventKind.BRANCH_TRIP, branch="wf5_c2"),
    ]
    trace = run(built.system, built.x0, events, 0.3)
    assert any("islanded" in message for message in trace.metadata["diagnostics"])
    assert np.all(trace.channels["p_wf5_pu"][trace.time > 0.1 + 1e-12] == 0.0)
    assert not built.system.live_bus[built.system.bus_index["wf5"]]


def test_runs_are_deterministic():
    event = Event(time=0.05, kind=EventKind.DEVICE_TRIP, device="conv1")
    traces = []
    for _ in range(2):
        built = build_system(RunConfig(), "phasor", "low")
        traces.append(run(built.system, built.x0, [event], 0.3))
    for name in traces[0].channels:
        assert np.array_equal(traces[0].channels[name], traces[1].channels[name])


# ---------------------------------------------------------------- mode matching

def test_match_modes():
    emt = [-1.0 + 10.0j, -1.0 - 10.0j, -100.0, -2000.0 + 5000.0j]
    matches = match_modes(emt, [-1.02 + 10.0j, -50.0, -3000.0], tol=0.05, max_abs=200.0)
    assert len(matches) == 2
    assert matches[0].matched and matches[0].emt == -1.0 + 10.0j
    assert matches[0].relative_error == pytest.approx(0.02 / abs(-1.02 + 10.0j), rel=1e-9)
    assert not matches[1].matched


@pytest.mark.slow
def test_default_emt_system_is_stable_and_contains_phasor_slow_modes():
    cfg = RunConfig()
    emt = build_system(cfg, "emt", "zero")
    phasor = build_system(cfg, "phasor", "zero")
    emt_report = linearize(emt.system, emt.x0)
    phasor_report = linearize(phasor.system, phasor.x0)
    assert emt_report.stable
    assert sum(mode.reference for mode in emt_report.modes) == 1
    matches = match_modes(emt_report, phasor_report, tol=0.05, max_abs=20.0)
    assert matches
    assert all(m.matched for m in matches)


@pytest.mark.slow
def test_emt_equilibrium_hold():
    built = build_system(RunConfig(), "emt", "zero")
    trace = run(built.system, built.x0, [], 0.05)
    for name, samples in trace.channels.items():
        assert np.ptp(samples) < 1e-6, name
