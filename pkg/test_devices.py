"""
[Purpose] Tests of the device models: equilibria, droop and limit arithmetic, controller responses
"""

import cmath
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from src.models.devices import (
    CentralParams,
    CondenserParams,
    GridFollowingParams,
    GridFormingParams,
    HvdcParams,
    OnshoreParams,
    WindFarmParams,
)
from src.models.schemas import NetworkSection, RunConfig
from src.services.devices import (
    CentralController,
    GridFollowingVsc,
    GridFormingVsc,
    HvdcLink,
    OnshoreEquivalent,
    SynchronousCondenser,
    WindFarmEq,
    avr_command,
    central_controller_step,
    live_participation,
    clamp_current,
    gfl_derivatives,
    gfm_derivatives,
    hvdc_derivatives,
    hvdc_steady_state,
    onshore_derivatives,
    sc_derivatives,
    windfarm_derivatives,
)
from src.services.system_builder import build_system
from src.utils.errors import InitializationError

S_BASE = 1000.0
OMEGA_B = 2.0 * math.pi * 50.0
V_BUS = cmath.rect(1.01, 0.08)


# ---------------------------------------------------------------- current limit

def test_clamp_boundary():
    i, flag = clamp_current(1.5 + 0j, 1.2)
    assert abs(i) == pytest.approx(1.2, rel=1e-15)
    assert flag


def test_clamp_keeps_angle():
    demand = complex(0.9, 1.2)
    i, flag = clamp_current(demand, 1.2)
    assert flag
    assert cmath.phase(i) == pytest.approx(cmath.phase(demand), abs=1e-15)


def test_clamp_passes_small_current():
    assert clamp_current(0.3 - 0.4j, 1.1) == (0.3 - 0.4j, False)


# ---------------------------------------------------------------- grid-forming converter

@pytest.mark.parametrize("mode", ["phasor", "emt"])
@pytest.mark.parametrize("q_droop", [False, True])
def test_gfm_equilibrium(mode, q_droop):
    dev = GridFormingVsc("conv1", "conv1", 1, GridFormingParams(q_droop=q_droop), S_BASE, OMEGA_B, mode)
    signals = {}
    x = dev.initialize(V_BUS, complex(-0.8, 0.05), signals)
    assert np.max(np.abs(dev.derivatives(x, V_BUS, signals))) < 1e-8
    assert signals["p_dc:1"] > 0


def test_gfm_droop_step():
    params = GridFormingParams(droop_mp=0.01)
    setpoints = {"p_ref": 0.5 + 0.2, "q_ref": 0.0, "v_ref": 1.0}
    _, out = gfm_derivatives(np.array([0.0, 0.5]), 0.95 + 0j, params, setpoints, "phasor", OMEGA_B)
    assert out.omega - 1.0 == pytest.approx(0.002, rel=1e-12)


def test_gfm_phasor_current_is_held_at_limit():
    params = GridFormingParams(i_max=1.2)
    setpoints = {"p_ref": 0.0, "q_ref": 0.0, "v_ref": 1.0}
    v = 0.6 + 0.1j
    _, out = gfm_derivatives(np.array([0.0, 0.0]), v, params, setpoints, "phasor", OMEGA_B)
    demand = (1.0 - v) / complex(params.r_f, params.l_f)
    assert out.saturated
    assert abs(out.i) == pytest.approx(1.2, rel=1e-12)
    assert cmath.phase(out.i) == pytest.approx(cmath.phase(demand), abs=1e-12)
    assert out.e == pytest.approx(v + complex(params.r_f, params.l_f) * out.i, abs=1e-12)


def test_gfm_phasor_uses_network_limited_current():
    dev = GridFormingVsc("conv1", "conv1", 1, GridFormingParams(i_max=1.2), S_BASE, OMEGA_B, "phasor")
    x = dev.initialize(1.0 + 0j, complex(-0.8, 0.0), {})
    assert dev.limited_current(x, 1.0 + 0j) is None
    i_limit = dev.limited_current(x, 0.5 + 0j)
    assert abs(i_limit) == pytest.approx(1.2 * dev.scale, rel=1e-12)
    own = i_limit / dev.scale
    signals = {"i_lim_d:conv1": own.real, "i_lim_q:conv1": own.imag}
    assert dev.injection(x, 0.5 + 0j, signals) == pytest.approx(i_limit, abs=1e-12)
    out = dev.observe(x, 0.5 + 0j, signals)
    assert out["current_ratio"] == pytest.approx(1.0, rel=1e-12)
    assert out["saturated"] == 1.0


def test_gfm_emt_current_settles_at_limit():
    params = GridFormingParams(i_max=1.2)
    setpoints = {"p_ref": 0.0, "q_ref": 0.0, "v_ref": 1.0}
    z_f = complex(params.r_f, params.l_f)
    v = 0.5 + 0j
    i_cmd, _ = clamp_current((1.0 - v) / z_f, params.i_max)
    # [Comment] Low-pass state equal to the converter-frame current: no transient virtual-impedance drop
    x = np.array([0.0, 0.0, i_cmd.real, i_cmd.imag, i_cmd.real, i_cmd.imag])
    dx, out = gfm_derivatives(x, v, params, setpoints, "emt", OMEGA_B)
    assert out.saturated
    assert abs(out.i) == pytest.approx(1.2, rel=1e-12)
    assert np.max(np.abs(dx[2:])) < 1e-9


def test_gfm_emt_current_moves_toward_limit():
    params = GridFormingParams(i_max=1.2)
    setpoints = {"p_ref": 0.0, "q_ref": 0.0, "v_ref": 1.0}
    x = np.array([0.0, 0.0, 1.5, 0.0, 1.5, 0.0])
    dx, out = gfm_derivatives(x, 1.0 - 0.4j, params, setpoints, "emt", OMEGA_B)
    assert out.saturated
    di = complex(dx[4], dx[5])
    # [Comment] di/dt = omega_b / l_f * z_f (i_cmd - i) points from the state current toward the command
    i_cmd = out.i + di * params.l_f / (OMEGA_B * complex(params.r_f, params.l_f))
    assert abs(i_cmd) == pytest.approx(1.2, rel=1e-9)


def test_gfm_rejects_nan():
    setpoints = {"p_ref": 0.0, "q_ref": 0.0, "v_ref": 1.0}
    with pytest.raises(ValueError, match="non-finite"):
        gfm_derivatives(np.array([float("nan"), 0.0]), 1.0 + 0j, GridFormingParams(), setpoints, "phasor", OMEGA_B)


def test_gfm_initial_current_beyond_limit():
    dev = GridFormingVsc("conv1", "conv1", 1, GridFormingParams(), S_BASE, OMEGA_B, "phasor")
    with pytest.raises(InitializationError, match="i_max"):
        dev.initialize(1.0 + 0j, complex(-1.2 * 1.1 * 1.1, 0.0), {})


# ---------------------------------------------------------------- grid-following converter

@pytest.mark.parametrize("mode", ["phasor", "emt"])
def test_gfl_equilibrium(mode):
    dev = GridFollowingVsc("conv1", "conv1", 1, GridFollowingParams(), S_BASE, OMEGA_B, mode)
    signals = {}
    x = dev.initialize(V_BUS, complex(-0.7, 0.1), signals)
    assert np.max(np.abs(dev.derivatives(x, V_BUS, signals))) < 1e-8
    if mode == "emt":
        v_pll = V_BUS * cmath.exp(-1j * x[0])
        assert abs(v_pll.imag) < 1e-8


def test_gfl_frequency_droop():
    params = GridFollowingParams(k_f=5.0)
    setpoints = {"p0": 0.6, "q0": 0.0, "dp_c": 0.0}
    x = np.array([-0.6, 0.0])
    _, out = gfl_derivatives(x, 1.0 + 0j, params, setpoints, "phasor", OMEGA_B, omega_meas=1.01)
    assert out.p_ref - 0.6 == pytest.approx(0.05, rel=1e-12)


def test_gfl_central_correction_adds_to_reference():
    params = GridFollowingParams()
    _, out = gfl_derivatives(np.zeros(2), 1.0 + 0j, params, {"p0": 0.6, "q0": 0.0, "dp_c": 0.03}, "phasor", OMEGA_B)
    assert out.p_ref == pytest.approx(0.63, rel=1e-12)


def test_gfl_unlocked_below_threshold():
    params = GridFollowingParams()
    _, out = gfl_derivatives(np.zeros(2), 0.05 + 0j, params, {"p0": 0.0, "q0": 0.0}, "phasor", OMEGA_B)
    assert out.unlocked


def test_gfl_current_never_exceeds_limit():
    params = GridFollowingParams(i_max=1.1)
    dev = GridFollowingVsc("conv1", "conv1", 1, params, S_BASE, OMEGA_B, "phasor")
    dev.initialize(1.0 + 0j, complex(-0.5, 0.0), {})
    setpoints = dict(dev.setpoints, p0=3.0)
    dx, out = gfl_derivatives(np.zeros(2), 0.5 + 0j, params, setpoints, "phasor", OMEGA_B)
    target = complex(dx[0], dx[1]) * params.tau_phasor
    assert abs(target) <= params.i_max + 1e-12
    assert out.saturated


def test_pll_tracks_frequency_offset_without_error():
    params = GridFollowingParams()
    dev = GridFollowingVsc("conv1", "conv1", 1, params, S_BASE, OMEGA_B, "emt")
    x0 = dev.initialize(1.0 + 0j, complex(-0.5, 0.0), {})
    dw = 0.1 / 50.0

    def bus_voltage(t):
        return cmath.exp(1j * OMEGA_B * dw * t)

    def rhs(t, x):
        return gfl_derivatives(x, bus_voltage(t), params, dev.setpoints, "emt", OMEGA_B)[0]

    sol = solve_ivp(rhs, (0.0, 0.5), x0, method="Radau", rtol=1e-9, atol=1e-11)
    assert sol.success
    x_end = sol.y[:, -1]
    _, out = gfl_derivatives(x_end, bus_voltage(0.5), params, dev.setpoints, "emt", OMEGA_B)
    assert out.omega == pytest.approx(1.0 + dw, abs=1e-6)
    phase_error = cmath.phase(bus_voltage(0.5) * cmath.exp(-1j * x_end[0]))
    assert abs(phase_error) < 1e-5


# ---------------------------------------------------------------- synchronous condenser

def test_condenser_swing_arithmetic():
    params = CondenserParams(h=2.0, d=0.0)
    x = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.1])
    dx, out = sc_derivatives(x, 1.0 + 0j, params, 1.0, "emt", OMEGA_B)
    assert out.p_e == pytest.approx(0.1, rel=1e-12)
    assert dx[1] == pytest.approx(-0.025, rel=1e-12)


def test_condenser_at_rest_has_zero_acceleration():
    params = CondenserParams()
    x = np.array([0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0])
    dx, _ = sc_derivatives(x, 1.0 + 0j, params, 1.0, "emt", OMEGA_B)
    assert dx[1] == 0.0


def test_avr_ceiling():
    assert avr_command(200.0, 0.05, -5.0, 5.0) == (5.0, True)
    efd, limited = avr_command(200.0, 0.01, -5.0, 5.0)
    assert efd == pytest.approx(2.0, rel=1e-12)
    assert not limited


@pytest.mark.parametrize("efd,rate", [(4.99, 0.2), (5.0, 0.0), (5.01, -0.2)])
def test_exciter_lags_toward_clipped_demand(efd, rate):
    params = CondenserParams()
    x = np.array([0.0, 0.0, 1.0, 0.0, efd, 0.0, 0.0])
    dx, out = sc_derivatives(x, 0.9 + 0j, params, 1.0, "emt", OMEGA_B)
    assert dx[4] == pytest.approx(rate, abs=1e-12)
    assert out.field_limited


@pytest.mark.parametrize("mode", ["phasor", "emt"])
def test_condenser_equilibrium(mode):
    dev = SynchronousCondenser("sc1", "hub", CondenserParams(), S_BASE, OMEGA_B, mode)
    # [Comment] Own-base injection whose active part is exactly the resistive loss
    q, p = 0.3, 0.0
    for _ in range(30):
        p = -dev.params.r_a * (p * p + q * q) / abs(V_BUS) ** 2
    signals = {}
    x = dev.initialize(V_BUS, complex(p, q) * dev.scale, signals)
    assert np.max(np.abs(dev.derivatives(x, V_BUS, signals))) < 1e-8
    assert x[1] == 0.0
    assert signals["n_sc"] == 1.0


# ---------------------------------------------------------------- HVDC link

@pytest.mark.parametrize("p_in", [0.0, 0.3, 0.727])
def test_hvdc_balanced_steady_state(p_in):
    params = HvdcParams()
    x = hvdc_steady_state(p_in, params)
    dx, out = hvdc_derivatives(x, p_in, params)
    assert np.max(np.abs(dx)) < 1e-12
    assert p_in - out.p_out == pytest.approx(params.r_dc * x[1] ** 2, abs=1e-12)
    assert out.v_on == 1.0


def test_hvdc_idle_link_is_constant():
    dx, out = hvdc_derivatives(np.array([1.0, 0.0, 1.0, 0.0]), 0.0, HvdcParams())
    assert np.all(dx == 0.0)
    assert out.p_out == 0.0


def test_hvdc_step_returns_to_nominal_voltage():
    params = HvdcParams()
    x0 = hvdc_steady_state(0.5, params)
    sol = solve_ivp(lambda t, x: hvdc_derivatives(x, 0.7, params)[0], (0.0, 3.0), x0,
                    method="Radau", rtol=1e-9, atol=1e-12, dense_output=True)
    assert sol.success
    peak = max(sol.sol(t)[0] for t in np.linspace(0.0, 0.5, 501))
    assert peak > 1.0
    assert sol.y[2, -1] == pytest.approx(1.0, abs=1e-4)


def test_hvdc_undervoltage_flag():
    _, out = hvdc_derivatives(np.array([0.45, 0.0, 1.0, 0.0]), 0.0, HvdcParams())
    assert out.undervoltage


def test_hvdc_device_publishes_delivery():
    link = HvdcLink("hvdc1", 1, HvdcParams(), S_BASE, OMEGA_B, "phasor")
    signals = {"p_dc:1": 0.6}
    x = link.initialize(0j, 0j, signals)
    assert signals["p_out:1"] == pytest.approx(x[1], rel=1e-15)
    assert np.max(np.abs(link.derivatives(x, 0j, signals))) < 1e-12


# ---------------------------------------------------------------- onshore area

def test_onshore_zero_deficit_is_constant():
    dx, dw = onshore_derivatives(np.zeros(2), 0.0, OnshoreParams())
    assert np.all(dx == 0.0)
    assert dw == 0.0


def test_onshore_droop_steady_state():
    params = OnshoreParams(r_droop=0.05)
    dx, _ = onshore_derivatives(np.array([-0.005, 0.1]), 0.1, params)
    assert np.max(np.abs(dx)) < 1e-15
    sol = solve_ivp(lambda t, x: onshore_derivatives(x, 0.1, params)[0], (0.0, 60.0), np.zeros(2),
                    rtol=1e-9, atol=1e-12)
    assert sol.y[0, -1] == pytest.approx(-0.005, abs=1e-6)


def test_onshore_nadir_deepens_with_lower_inertia():
    nadirs = []
    for h in (8.0, 5.0, 2.0):
        params = OnshoreParams(h=h)
        sol = solve_ivp(lambda t, x: onshore_derivatives(x, 0.1, params)[0], (0.0, 20.0), np.zeros(2),
                        max_step=0.01, rtol=1e-9, atol=1e-12)
        nadirs.append(sol.y[0].min())
    assert nadirs[0] > nadirs[1] > nadirs[2]


def test_onshore_deficit_from_load_and_infeed():
    area = OnshoreEquivalent("on1", 1, 1100.0, OnshoreParams(), S_BASE, OMEGA_B, "phasor")
    area.initialize(0j, 0j, {"p_out:1": 0.7})
    area.setpoints["load"] = 0.2
    # [Comment] Infeed up by 0.1 pu of the link rating = 0.11 pu of the system base
    deficit = area.power_deficit({"p_out:1": 0.8})
    assert deficit == pytest.approx((0.2 - 0.11) / 10.0, rel=1e-12)


# ---------------------------------------------------------------- wind farm

def test_windfarm_equilibrium_at_unity_power_factor():
    farm = WindFarmEq("wf1", "wf1", 800.0, WindFarmParams(), S_BASE, OMEGA_B, "phasor")
    x = farm.initialize(V_BUS, complex(0.8, 0.0), {})
    assert np.max(np.abs(farm.derivatives(x, V_BUS, {}))) < 1e-12
    assert farm.observe(x, V_BUS, {})["q"] == pytest.approx(0.0, abs=1e-12)


def test_windfarm_first_order_response():
    params = WindFarmParams(tau_w=0.02)
    dx, _ = windfarm_derivatives(np.zeros(2), 1.0 + 0j, 0.5, params.tau_w)
    assert dx[0] == pytest.approx(0.5 / 0.02, rel=1e-12)


def test_windfarm_order_above_rating():
    farm = WindFarmEq("wf1", "wf1", 700.0, WindFarmParams(), S_BASE, OMEGA_B, "phasor")
    with pytest.raises(InitializationError, match="rating"):
        farm.initialize(1.0 + 0j, complex(0.8, 0.0), {})


# ---------------------------------------------------------------- central controller

def test_central_zero_history():
    z, corrections = central_controller_step(0.0, 0.0, 1.0, 30.0, [0.2] * 5)
    assert z == 0.0
    assert corrections == [0.0] * 5


def test_central_integral_arithmetic():
    z, corrections = central_controller_step(0.0, 0.01, 1.0, 2.0, [0.5, 0.3, 0.2])
    assert z == pytest.approx(0.02, rel=1e-12)
    assert corrections == pytest.approx([0.01, 0.006, 0.004], rel=1e-12)


@pytest.mark.parametrize("z", [0.013, -0.4, 1.7])
def test_central_split_is_proportional(z):
    alpha = [0.5, 0.3, 0.2]
    ctrl = CentralController("central", CentralParams(alpha=alpha), ["conv1", "conv2", "conv3"], 1100.0,
                             S_BASE, OMEGA_B, "phasor")
    signals = {}
    ctrl.derivatives(np.array([z]), 0j, signals)
    values = [signals[f"dp_c:conv{k}"] for k in (1, 2, 3)]
    assert values[0] / values[2] == pytest.approx(2.5, rel=1e-12)
    assert values[1] / values[2] == pytest.approx(1.5, rel=1e-12)


def test_central_integrates_condenser_speed():
    ctrl = CentralController("central", CentralParams(k_c=30.0), [f"conv{k}" for k in range(1, 6)], 1100.0,
                             S_BASE, OMEGA_B, "phasor")
    dx = ctrl.derivatives(np.zeros(1), 0j, {"dw_sc_sum": 0.002, "n_sc": 2.0})
    assert dx[0] == pytest.approx(30.0 * 0.001, rel=1e-12)


def test_live_participation_moves_tripped_share():
    alpha = live_participation([0.5, 0.3, 0.2], ["conv1", "conv2", "conv3"], {"conv1"})
    assert alpha == pytest.approx([0.0, 0.6, 0.4], rel=1e-12)
    assert live_participation([0.5, 0.5], ["conv1", "conv2"], {"conv1", "conv2"}) == [0.0, 0.0]


def test_central_correction_goes_to_converters_in_service():
    names = [f"conv{k}" for k in range(1, 6)]
    ctrl = CentralController("central", CentralParams(alpha=[0.2] * 5), names, 1100.0, S_BASE, OMEGA_B, "phasor")
    ctrl.peer_tripped("conv1")
    ctrl.peer_tripped("sc1")
    signals = {}
    ctrl.derivatives(np.array([0.44]), 0j, signals)
    assert signals["dp_c:conv1"] == 0.0
    shares = [signals[f"dp_c:{name}"] for name in names[1:]]
    assert shares == pytest.approx([0.1] * 4, rel=1e-12)
    assert sum(shares) * 1.1 == pytest.approx(0.44, rel=1e-12)


# ---------------------------------------------------------------- full-system initialization

@pytest.mark.parametrize("mode", ["phasor", "emt"])
@pytest.mark.parametrize("inertia", ["zero", "low"])
def test_initialized_system_is_an_equilibrium(mode, inertia):
    built = build_system(RunConfig(), mode, inertia)
    assert built.residual < 1e-8


def test_low_inertia_condensers_carry_only_losses():
    built = build_system(RunConfig(), "phasor", "low")
    system, x0 = built.system, built.x0
    for name in ("sc1", "sc2"):
        assert x0[system.layout[f"{name}.dw"]] == 0.0
        p = built.operating_point.injection(name).real
        assert -1e-2 < p <= 0.0


def test_wind_beyond_converter_rating_cannot_initialize():
    network = NetworkSection(farm_power=1320.0, farm_rating=1400.0)
    with pytest.raises(InitializationError):
        build_system(RunConfig(network=network), "phasor", "zero")
