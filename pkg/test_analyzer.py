"""
[Purpose] Tests of the trace analysis: metrics, EMT/phasor mismatch, onshore propagation and acceptance checks
[Comment] Synthetic traces keep these tests independent of the simulator
"""

import math

import numpy as np
import pytest

from src.models.simulation import MetricReport, MismatchReport, ChannelMismatch, PropagationReport, Trace
from src.services.analyzer import (
    acceptance_summary,
    compute_metrics,
    droop_share,
    mismatch,
    overshoot,
    propagation_report,
    report_to_dataframe,
    resample_mean,
    settling_time,
    time_to_negligible,
)
from src.utils.errors import ChannelError, MismatchError


def _trace(time, scenario="s2-converter-trip", inertia="zero", mode="phasor", t_event=0.5, **channels) -> Trace:
    time = np.asarray(time, dtype=float)
    base = {"v_hub_pu": np.ones_like(time), "f_offshore_hz": np.full_like(time, 50.0)}
    base.update({name: np.asarray(values, dtype=float) for name, values in channels.items()})
    return Trace(time=time, channels=base,
                 metadata={"scenario": scenario, "inertia": inertia, "mode": mode, "t_event": t_event})


def _step(time, t0, before, after, tau=0.0):
    values = np.full_like(time, before, dtype=float)
    post = time > t0
    if tau > 0:
        values[post] = after + (before - after) * np.exp(-(time[post] - t0) / tau)
    else:
        values[post] = after
    return values


TIME = np.round(np.arange(0.0, 2.0 + 1e-9, 0.005), 10)


# ---------------------------------------------------------------- metrics

def test_flat_trace_has_zero_metrics():
    report = compute_metrics(_trace(TIME, p_conv1_pu=np.full_like(TIME, 0.8), p_on1_pu=np.full_like(TIME, 0.79)))
    assert report.max_dv_hub == 0.0
    assert report.max_df_offshore_hz == 0.0
    assert all(t == 0.0 for t in report.settling_times.values())
    assert report.unsettled == []
    assert report.max_dpdt_onshore == {"p_on1_pu": 0.0}
    assert report.converter_dp == {"p_conv1_pu": 0.0}


def test_deviations_are_measured_from_pre_event_sample():
    f = 50.0 + _step(TIME, 0.5, 0.0, 0.03) - 0.05 * np.exp(-(TIME - 0.5) / 0.05) * (TIME > 0.5)
    v = _step(TIME, 0.5, 1.0, 0.99)
    report = compute_metrics(_trace(TIME, f_offshore_hz=f, v_hub_pu=v))
    assert report.max_dv_hub == pytest.approx(0.01)
    assert report.max_df_offshore_hz == pytest.approx(max(np.abs(f - 50.0)))


def test_missing_channel_raises():
    trace = Trace(time=TIME, channels={"v_hub_pu": np.ones_like(TIME)})
    with pytest.raises(ChannelError, match="f_offshore_hz"):
        compute_metrics(trace, 0.5)


def test_event_outside_trace_raises():
    with pytest.raises(ValueError, match="outside the trace"):
        compute_metrics(_trace(TIME), 3.0)


def test_settling_time_of_first_order_response():
    t = TIME[TIME >= 0.5] - 0.5
    values = 1.0 - 0.1 * np.exp(-t / 0.1)
    settle, settled = settling_time(t, values, 0.01)
    # |v - v_end| <= 0.01 once 0.1 exp(-t/0.1) <= 0.01 (v_end is within 1e-9 of 1)
    assert settled
    assert settle == pytest.approx(0.1 * math.log(10.0), abs=0.006)


def test_late_band_entry_is_unsettled():
    f = 50.0 + 0.5 * np.sin(2 * np.pi * 2.0 * TIME) * np.exp(-(TIME - 0.5) * 0.5) * (TIME > 0.5)
    report = compute_metrics(_trace(TIME, f_offshore_hz=f))
    assert "f_offshore_hz" in report.unsettled
    assert report.settling_times["f_offshore_hz"] is None


def test_onshore_rate_nadir_overshoot_and_converter_dp():
    p_on = _step(TIME, 0.5, 0.8, 0.96, tau=0.2)
    p_on[(TIME > 0.5) & (TIME < 0.8)] += 0.05 * np.sin(np.pi * (TIME[(TIME > 0.5) & (TIME < 0.8)] - 0.5) / 0.3)
    df_on = -0.1 * np.sin(np.pi * np.clip(TIME - 0.5, 0, 1)) * (TIME > 0.5)
    report = compute_metrics(_trace(TIME, p_on1_pu=p_on, df_on1_hz=df_on,
                                    p_conv1_pu=_step(TIME, 0.5, 0.8, 0.96), p_conv2_pu=_step(TIME, 0.5, 0.8, 0.76)))
    assert report.converter_dp["p_conv1_pu"] == pytest.approx(0.16)
    assert report.converter_dp["p_conv2_pu"] == pytest.approx(-0.04)
    assert report.onshore_nadirs_hz["df_on1_hz"] == pytest.approx(-0.1, abs=1e-4)
    assert report.max_dpdt_onshore["p_on1_pu"] == pytest.approx(np.max(np.abs(np.diff(p_on) / 0.005)))
    assert report.overshoot["p_on1_pu"] == pytest.approx(0.0)


def test_overshoot_beyond_final_change():
    values = np.array([0.0, 0.1, 0.25, 0.22, 0.2, 0.2])
    assert overshoot(values, 0.0) == pytest.approx(0.05)
    assert overshoot(-values, 0.0) == pytest.approx(0.05)
    assert overshoot(np.zeros(4), 0.0) == 0.0


# ---------------------------------------------------------------- EMT versus phasor

def test_trace_compared_with_itself_is_zero():
    trace = _trace(TIME, p_conv1_pu=_step(TIME, 0.5, 0.8, 1.0, tau=0.05))
    report = mismatch(trace, trace, 0.01)
    for channel in report.channels.values():
        assert channel.rms == 0.0
        assert channel.max == 0.0
        assert channel.time_to_negligible == 0.0


def test_resample_mean_averages_each_phasor_step():
    emt_time = np.round(np.arange(0.0, 0.02 + 1e-12, 1e-3), 12)
    grid = np.array([0.0, 0.005, 0.01, 0.015, 0.02])
    out = resample_mean(emt_time, emt_time * 1000.0, grid)
    # (t_{k-1}, t_k] holds samples 1..5, 6..10, ...
    assert out == pytest.approx([0.0, 3.0, 8.0, 13.0, 18.0])


def test_emt_ripple_averages_out():
    emt_time = np.round(np.arange(0.0, 2.0 + 1e-9, 1e-4), 10)
    ripple = 0.2 * np.sin(2 * np.pi * 200.0 * emt_time)
    emt = _trace(emt_time, mode="emt", p_conv1_pu=0.8 + ripple)
    phasor = _trace(TIME, p_conv1_pu=np.full_like(TIME, 0.8))
    report = mismatch(emt, phasor, 0.01)
    assert report.channels["p_conv1_pu"].max < 1e-6


def test_time_to_negligible_is_monotone_in_epsilon():
    t = TIME[TIME >= 0.5]
    difference = 0.3 * np.exp(-(t - 0.5) / 0.02) * np.cos(2 * np.pi * 10 * t)
    times = [time_to_negligible(t, difference, eps, 0.5) for eps in (0.1, 0.03, 0.01, 0.003, 0.001)]
    assert times == sorted(times)
    assert times[2] <= 0.1


def test_never_negligible_difference_is_infinite():
    t = TIME[TIME >= 0.5]
    assert time_to_negligible(t, np.full_like(t, 0.5), 0.01, 0.5) == math.inf


def test_mismatch_rejects_different_scenarios():
    a = _trace(TIME, scenario="s1-power-request")
    b = _trace(TIME, scenario="s2-converter-trip")
    with pytest.raises(MismatchError, match="scenario"):
        mismatch(a, b)


def test_mismatch_reports_delayed_emt_response():
    phasor = _trace(TIME, p_conv2_pu=_step(TIME, 0.5, 0.8, 1.0, tau=0.01))
    emt_time = np.round(np.arange(0.0, 2.0 + 1e-9, 1e-4), 10)
    emt = _trace(emt_time, mode="emt", p_conv2_pu=_step(emt_time, 0.5, 0.8, 1.0, tau=0.03))
    report = mismatch(emt, phasor, 0.01)
    channel = report.channels["p_conv2_pu"]
    assert channel.max > 0.05
    assert 0.05 < channel.time_to_negligible < 0.2
    assert report.channels["v_hub_pu"].max == 0.0


# ---------------------------------------------------------------- propagation

def _onshore(inertia: str, tau: float, scenario="s2-converter-trip") -> Trace:
    return _trace(TIME, scenario=scenario, inertia=inertia,
                  p_on1_pu=_step(TIME, 0.5, 0.79, 0.0, tau=tau),
                  p_on2_pu=_step(TIME, 0.5, 0.79, 0.99, tau=tau),
                  df_on1_hz=_step(TIME, 0.5, 0.0, -0.02, tau=tau))


def test_propagation_is_gentler_with_inertia():
    report = propagation_report({"zero": _onshore("zero", 0.005), "low": _onshore("low", 0.1)})
    assert report.low_inertia_gentler
    assert report.ratio > 2.0
    assert report.delivered["zero"] == pytest.approx(-0.59, abs=1e-3)
    assert report.nadirs_hz["low"]["df_on1_hz"] == pytest.approx(-0.02, abs=1e-3)


def test_propagation_without_event_has_zero_rates():
    flat = {k: _trace(TIME, scenario="none", inertia=k, p_on1_pu=np.full_like(TIME, 0.8)) for k in ("zero", "low")}
    report = propagation_report(flat)
    assert report.max_dpdt == {"zero": 0.0, "low": 0.0}
    assert report.ratio == 0.0


def test_propagation_rejects_mislabelled_trace():
    with pytest.raises(MismatchError, match="inertia"):
        propagation_report({"zero": _onshore("low", 0.1), "low": _onshore("low", 0.1)})
    with pytest.raises(MismatchError):
        propagation_report({"zero": _onshore("zero", 0.1)})


# ---------------------------------------------------------------- acceptance

def test_droop_share_oracle():
    assert droop_share(0.2, [0.005] * 5) == pytest.approx([0.04] * 5)
    assert droop_share(0.3, [0.01, 0.005]) == pytest.approx([0.1, 0.2])
    with pytest.raises(ValueError):
        droop_share(0.1, [])


def test_acceptance_summary_statuses():
    metrics = [
        MetricReport(scenario="s2-converter-trip", mode="phasor", inertia="zero", max_df_offshore_hz=0.045,
                     converter_dp={"p_conv1_pu": -0.8, "p_conv2_pu": 0.2, "p_conv3_pu": 0.2005}),
        MetricReport(scenario="s2-converter-trip", mode="phasor", inertia="low", max_df_offshore_hz=0.3,
                     unsettled=["f_offshore_hz"]),
    ]
    mismatches = [
        MismatchReport(scenario="s2-converter-trip", inertia="zero", epsilon=0.01, t_event=0.5,
                       channels={"p_conv2_pu": ChannelMismatch(rms=0.01, max=0.1, time_to_negligible=0.06)}),
        MismatchReport(scenario="s2-converter-trip", inertia="low", epsilon=0.01, t_event=0.5,
                       channels={"p_conv2_pu": ChannelMismatch(rms=0.01, max=0.1, time_to_negligible=0.21)}),
    ]
    propagation = [PropagationReport(scenario="s2-converter-trip", ratio=4.0, low_inertia_gentler=True)]
    checks = {c.name: c.status for c in acceptance_summary(metrics, mismatches, propagation)}

    assert checks["Frequency deviation (s2-converter-trip zero-inertia phasor)"] == "PASS"
    assert checks["Droop sharing (s2-converter-trip zero-inertia phasor)"] == "PASS"
    assert checks["Frequency nadir (s2-converter-trip low-inertia phasor)"] == "FAIL"
    assert checks["Settling (s2-converter-trip low-inertia phasor)"] == "WARNING"
    assert checks["EMT/phasor mismatch (s2-converter-trip zero-inertia)"] == "PASS"
    assert checks["EMT/phasor mismatch (s2-converter-trip low-inertia)"] == "PASS"
    assert checks["Mismatch ordering (s2-converter-trip)"] == "PASS"
    assert checks["Onshore propagation (s2-converter-trip)"] == "PASS"


def test_report_to_dataframe_flattens_channel_metrics():
    report = MetricReport(scenario="s1-power-request", mode="phasor", inertia="zero",
                          converter_dp={"p_conv1_pu": 0.16}, settling_times={"v_hub_pu": 0.0})
    frame = report_to_dataframe([report])
    assert len(frame) == 1
    assert frame.loc[0, "converter_dp:p_conv1_pu"] == pytest.approx(0.16)
    assert frame.loc[0, "scenario"] == "s1-power-request"
