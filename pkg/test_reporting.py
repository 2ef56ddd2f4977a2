"""
[Purpose] Tests of trace files, the techno-economic report and the scenario report bundle
"""

import math

import numpy as np
import pandas as pd
import pytest

from src.models.econ import TcoAssumptions
from src.models.simulation import (
    AcceptanceCheck,
    ChannelMismatch,
    EventMarker,
    MetricReport,
    MismatchReport,
    Trace,
)
from src.services.reporting import (
    emit_report,
    emit_scenario_report,
    emit_tco_report,
    events_path,
    markdown_table,
    read_trace,
    platform_frame,
    write_trace,
)


def _trace() -> Trace:
    time = np.arange(0.0, 0.05, 0.005)
    return Trace(
        time=time,
        channels={"v_hub_pu": 1.0 + np.sin(time) / 3.0, "f_offshore_hz": 50.0 - time / 7.0},
        events=[EventMarker(time=0.02, description="device-trip conv1")],
    )


def test_trace_round_trip_is_exact(tmp_path):
    trace = _trace()
    path = write_trace(trace, tmp_path / "run.csv")
    assert path.read_text().splitlines()[0] == "time_s,v_hub_pu,f_offshore_hz"
    assert events_path(path).exists()

    back = read_trace(path)
    np.testing.assert_array_equal(back.time, trace.time)
    for name, values in trace.channels.items():
        np.testing.assert_array_equal(back.channels[name], values)
    assert back.events == trace.events
    assert back.metadata["source"] == str(path)


def test_empty_trace_writes_header_only(tmp_path):
    trace = Trace(time=np.array([]), channels={"v_hub_pu": np.array([])})
    path = write_trace(trace, tmp_path / "empty.csv")
    assert path.read_text() == "time_s,v_hub_pu\n"


def test_same_trace_gives_identical_bytes(tmp_path):
    first = write_trace(_trace(), tmp_path / "a.csv").read_bytes()
    second = write_trace(_trace(), tmp_path / "b.csv").read_bytes()
    assert first == second


def test_read_trace_requires_time_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,v\n0,1\n")
    with pytest.raises(ValueError):
        read_trace(path)


def test_markdown_table_formats_special_values():
    frame = pd.DataFrame({"name": ["a", "b"], "value": [1.23456, math.inf], "other": [math.nan, None]})
    lines = markdown_table(frame, 2).splitlines()
    assert lines[0] == "| name | value | other |"
    assert lines[2] == "| a | 1.23 | - |"
    assert lines[3] == "| b | inf | - |"


def test_platform_totals_match_published():
    frame = platform_frame().set_index("frequency")
    assert frame.loc["50Hz", "total"] == pytest.approx(38.56)
    assert frame.loc["16.67Hz", "total"] == pytest.approx(115.68)
    assert (frame["total"] == frame["published total"]).all()


def test_tco_report_bundle(tmp_path):
    files = emit_tco_report(tmp_path, TcoAssumptions())
    assert set(files) == {"power_transfer", "sweep", "markdown"}

    costs = pd.read_csv(files["sweep"])
    assert costs.shape == (101, 5)
    assert costs["length_km"].iloc[-1] == 100.0
    transfer = pd.read_csv(files["power_transfer"])
    assert transfer["length_km"].iloc[-1] == 900.0

    text = files["markdown"].read_text()
    assert "## Cable resistances, annual losses and related costs" in text
    assert "| 50.0Hz |" in text
    assert "506.000" in text
    assert "### data source: published" in text
    assert "### data source: model" in text


def test_tco_report_states_loss_loading_per_source(tmp_path):
    text = emit_tco_report(tmp_path, TcoAssumptions())["markdown"].read_text()
    published, model = text.split("### data source: model")
    published = published.split("### data source: published")[1]
    assert "- loss loading: rated cable current of 1.05 kA in every option" in published
    assert "- 66 kV low-frequency crossover within 20-40 km: yes" in published
    assert "- loss loading: farm power shared by the parallel cables" in model
    assert "- 66 kV low-frequency crossover within 20-40 km: no" in model


def test_tco_report_pdf(tmp_path):
    files = emit_tco_report(tmp_path, TcoAssumptions(), pdf=True)
    assert files["pdf"].read_bytes().startswith(b"%PDF")


def _reports():
    metrics = MetricReport(scenario="s2-converter-trip", mode="phasor", inertia="zero",
                           max_dv_hub=0.01, max_df_offshore_hz=0.05,
                           converter_dp={"p_conv2_pu": 0.05}, settling_times={"v_hub_pu": None},
                           unsettled=["v_hub_pu"])
    report = MismatchReport(scenario="s2-converter-trip", inertia="zero", epsilon=0.01, t_event=0.5,
                            channels={"p_conv2_pu": ChannelMismatch(rms=0.002, max=0.01, time_to_negligible=0.04)})
    check = AcceptanceCheck(name="Frequency deviation (s2-converter-trip zero-inertia phasor)",
                            status="PASS", details="0.050 Hz")
    return metrics, report, check


def test_scenario_report_bundle(tmp_path):
    metrics, report, check = _reports()
    files = emit_scenario_report(tmp_path, metrics=[metrics], mismatches=[report], checks=[check])
    assert set(files) == {"metrics", "mismatch", "markdown"}

    frame = pd.read_csv(files["metrics"])
    assert frame.loc[0, "converter_dp:p_conv2_pu"] == pytest.approx(0.05)
    mismatch = pd.read_csv(files["mismatch"])
    assert list(mismatch["channel"]) == ["p_conv2_pu"]

    text = files["markdown"].read_text()
    assert "## EMT versus phasor (epsilon 0.01 pu)" in text
    assert "| Frequency deviation (s2-converter-trip zero-inertia phasor) | PASS | 0.050 Hz |" in text


def test_emit_report_needs_inputs(tmp_path):
    with pytest.raises(ValueError):
        emit_report(tmp_path)


def test_emit_report_combines_parts(tmp_path):
    metrics, _, _ = _reports()
    files = emit_report(tmp_path, tco_assumptions=TcoAssumptions(), metrics=[metrics])
    assert {"tco_markdown", "tco_sweep", "metrics", "markdown"} <= set(files)
