# [Purpose] Secure-operation metrics, EMT/phasor mismatch and onshore propagation analysis of traces
# [Comment] Every function here is a pure function of traces; nothing is simulated

import math
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Tuple

# [Library] NumPy - window selection, resampling and finite differences on trace channels
# [Source] https://numpy.org/
import numpy as np

from src.models.simulation import (
    AcceptanceCheck,
    ChannelMismatch,
    MetricReport,
    MismatchReport,
    PropagationReport,
    Trace,
)
from src.utils.errors import ChannelError, MismatchError
from src.utils.logger import get_logger

# [Optional] pandas - only needed for report_to_dataframe
if TYPE_CHECKING:
    import pandas as pd

logger = get_logger(__name__)

# [Comment] Part of the post-event window at the end of which a last band entry counts as unsettled
UNSETTLED_TAIL = 0.1
# [Comment] Acceptance anchors of the secure-operation criteria
ZERO_INERTIA_DF_MAX_HZ = 0.07
LOW_INERTIA_DF_BAND_HZ = (0.5, 2.0)
NEGLIGIBLE_WITHIN_S = {"zero": 0.1, "low": 0.3}
DROOP_SHARING_TOL = 0.01
TRIP_SCENARIOS = ("s2-converter-trip", "s3-windfarm-trip")


# =====================================================
# Trace helpers
# =====================================================

def require_channels(trace: Trace, names: Iterable[str]) -> None:
    missing = [name for name in names if name not in trace.channels]
    if missing:
        raise ChannelError(f"trace has no channel(s) {', '.join(missing)} (has: {', '.join(trace.channels)})")


def channels_like(trace: Trace, prefix: str, suffix: str) -> List[str]:
    """[Returns] Channel names with the given prefix and suffix, e.g. p_conv*_pu, in trace order"""
    return [name for name in trace.channels if name.startswith(prefix) and name.endswith(suffix)]


def event_index(time: np.ndarray, t_event: float) -> int:
    """
    [Purpose] Index of the last sample at or before t_event; the post-event window starts there
    [Comment] The sample at t_event is recorded before the event is applied, so it is the pre-event value
    [Errors] ValueError when t_event lies outside the trace
    """
    time = np.asarray(time, dtype=float)
    if time.size == 0:
        raise ValueError("trace is empty")
    if t_event < time[0] or t_event > time[-1]:
        raise ValueError(f"t_event = {t_event} s is outside the trace ({time[0]} to {time[-1]} s)")
    return max(int(np.searchsorted(time, t_event, side="right")) - 1, 0)


def settling_time(time: np.ndarray, values: np.ndarray, band: float) -> Tuple[float, bool]:
    """
    [Purpose] Time from the window start of the final entry into +-band around the final value
    [Returns] (settling time, settled); settled is False when that entry falls in the last tenth of the window
    [Usage] settling_time(t, v, 0.01) on the post-event slice of a channel
    """
    if values.size <= 1:
        return 0.0, True
    outside = np.abs(values - values[-1]) > band
    if not outside.any():
        return 0.0, True
    last = int(np.where(outside)[0][-1])
    settle = float(time[last + 1] - time[0])
    window = float(time[-1] - time[0])
    return settle, settle < (1.0 - UNSETTLED_TAIL) * window


def max_rate(time: np.ndarray, values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values) / np.diff(time))))


def peak_deviation(values: np.ndarray, reference: float) -> float:
    """[Returns] The signed deviation of largest magnitude from reference"""
    deviation = values - reference
    if deviation.size == 0:
        return 0.0
    return float(deviation[int(np.argmax(np.abs(deviation)))])


def overshoot(values: np.ndarray, reference: float, tol: float = 1e-6) -> float:
    """[Returns] How far the response goes beyond its final change (pu, >= 0); 0 without a final change"""
    final = values[-1] - reference
    if abs(final) <= tol:
        return 0.0
    excursion = np.max((values - reference) * math.copysign(1.0, final))
    return max(float(excursion - abs(final)), 0.0)


# =====================================================
# Metrics
# =====================================================

def compute_metrics(
    trace: Trace,
    t_event: Optional[float] = None,
    band_v: float = 0.01,
    band_f: float = 0.02,
) -> MetricReport:
    """
    [Purpose] Secure-operation criteria on the post-event window of one trace
    [Parameters]
    - t_event: disturbance time; the trace metadata's t_event when omitted
    - band_v: voltage settling band (pu); band_f: frequency settling band (Hz)
    [Returns] MetricReport; deviations are relative to the last pre-event sample
    [Errors] ChannelError when v_hub_pu or f_offshore_hz is missing
    """
    require_channels(trace, ("v_hub_pu", "f_offshore_hz"))
    if t_event is None:
        t_event = float(trace.metadata.get("t_event", 0.0))
    pre = event_index(trace.time, t_event)
    time = np.asarray(trace.time, dtype=float)[pre:]

    def post(name: str) -> np.ndarray:
        return np.asarray(trace.channels[name], dtype=float)[pre:]

    def before(name: str) -> float:
        return float(trace.channels[name][pre])

    report = MetricReport(
        scenario=str(trace.metadata.get("scenario", "")),
        mode=str(trace.metadata.get("mode", "")),
        inertia=str(trace.metadata.get("inertia", "")),
        max_dv_hub=float(np.max(np.abs(post("v_hub_pu") - before("v_hub_pu")))),
        max_df_offshore_hz=float(np.max(np.abs(post("f_offshore_hz") - before("f_offshore_hz")))),
        max_current_ratio=float(trace.metadata.get("max_current_ratio", 0.0)),
    )

    bands = {"v_hub_pu": band_v, "f_offshore_hz": band_f}
    bands.update({name: band_v for name in channels_like(trace, "p_conv", "_pu")})
    for name, band in bands.items():
        settle, settled = settling_time(time, post(name), band)
        report.settling_times[name] = settle if settled else None
        if not settled:
            report.unsettled.append(name)
            logger.warning(f"⚠️ {name} has not settled within ±{band:g} by the end of the run")

    for name in channels_like(trace, "p_conv", "_pu"):
        report.converter_dp[name] = float(post(name)[-1] - before(name))
    for name in channels_like(trace, "p_on", "_pu"):
        report.max_dpdt_onshore[name] = max_rate(np.asarray(trace.time)[pre:], np.asarray(trace.channels[name])[pre:])
        report.overshoot[name] = overshoot(post(name), before(name))
    for name in channels_like(trace, "df_on", "_hz"):
        report.onshore_nadirs_hz[name] = peak_deviation(post(name), before(name))

    logger.info(
        f"✓ Metrics {report.scenario or 'trace'} ({report.mode}, {report.inertia}): "
        f"max |dV| {report.max_dv_hub:.4f} pu, max |df| {report.max_df_offshore_hz:.4f} Hz"
    )
    return report


# =====================================================
# EMT versus phasor
# =====================================================

def resample_mean(time: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """
    [Purpose] Mean of the samples in (grid[k-1], grid[k]] for every grid point
    [Comment] grid[0] takes the sample nearest to it; empty intervals are linearly interpolated
    """
    time = np.asarray(time, dtype=float)
    values = np.asarray(values, dtype=float)
    bins = np.searchsorted(grid, time, side="left")
    inside = bins < grid.size
    counts = np.bincount(bins[inside], minlength=grid.size).astype(float)
    sums = np.bincount(bins[inside], weights=values[inside], minlength=grid.size)
    out = np.full(grid.size, np.nan)
    filled = counts > 0
    out[filled] = sums[filled] / counts[filled]
    out[0] = values[int(np.argmin(np.abs(time - grid[0])))]
    gaps = np.isnan(out)
    if gaps.any():
        out[gaps] = np.interp(grid[gaps], time, values)
    return out


def time_to_negligible(time: np.ndarray, difference: np.ndarray, epsilon: float, t_event: float) -> float:
    """
    [Purpose] First time after the event from which |difference| stays below epsilon
    [Returns] Seconds from the event; inf when the last sample is still above epsilon
    """
    above = np.abs(difference) >= epsilon
    if not above.any():
        return 0.0
    last = int(np.where(above)[0][-1])
    if last + 1 >= time.size:
        return math.inf
    return max(float(time[last + 1] - t_event), 0.0)


def _check_comparable(a: Trace, b: Trace, keys: Sequence[str]) -> None:
    for key in keys:
        va, vb = a.metadata.get(key), b.metadata.get(key)
        if va is not None and vb is not None and va != vb:
            raise MismatchError(f"traces differ in {key}: '{va}' vs '{vb}'")


def mismatch(
    emt: Trace,
    phasor: Trace,
    epsilon: float = 0.01,
    t_event: Optional[float] = None,
) -> MismatchReport:
    """
    [Purpose] Per-channel difference between an EMT trace and a phasor trace of the same run
    [Comment] The EMT trace is averaged over each phasor step; only channels present in both are compared,
              on the post-event samples of the common time range
    [Errors] MismatchError when scenario or inertia metadata differ or nothing is shared
    [Usage] report = mismatch(emt, phasor, epsilon=0.01)
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    _check_comparable(emt, phasor, ("scenario", "inertia", "t_event"))
    if t_event is None:
        t_event = float(phasor.metadata.get("t_event", emt.metadata.get("t_event", 0.0)))

    emt_time = np.asarray(emt.time, dtype=float)
    grid = np.asarray(phasor.time, dtype=float)
    common = grid <= emt_time[-1] + 1e-12
    grid = grid[common]
    shared = [name for name in phasor.channels if name in emt.channels]
    if not shared or grid.size == 0:
        raise MismatchError("traces share no channels or no time range")

    start = event_index(grid, t_event)
    report = MismatchReport(
        scenario=str(phasor.metadata.get("scenario", "")),
        inertia=str(phasor.metadata.get("inertia", "")),
        epsilon=epsilon,
        t_event=t_event,
    )
    for name in shared:
        resampled = resample_mean(emt_time, emt.channels[name], grid)
        difference = (resampled - np.asarray(phasor.channels[name], dtype=float)[common])[start:]
        report.channels[name] = ChannelMismatch(
            rms=float(np.sqrt(np.mean(difference ** 2))),
            max=float(np.max(np.abs(difference))),
            time_to_negligible=time_to_negligible(grid[start:], difference, epsilon, t_event),
        )
    logger.info(f"✓ Mismatch computed on {len(shared)} channels (epsilon {epsilon:g})")
    return report


def power_negligible_time(report: MismatchReport) -> float:
    """[Returns] Largest time-to-negligible over the converter active-power channels"""
    times = [m.time_to_negligible for name, m in report.channels.items() if name.startswith("p_conv")]
    return max(times, default=0.0)


# =====================================================
# Onshore propagation
# =====================================================

def propagation_report(traces: Dict[str, Trace], t_event: Optional[float] = None) -> PropagationReport:
    """
    [Purpose] Compares how strongly one disturbance reaches the onshore areas in both topologies
    [Parameters]
    - traces: {"zero": trace, "low": trace} of the same scenario
    [Returns] PropagationReport; low_inertia_gentler is False when a trip scenario propagates faster
              through the low-inertia hub
    [Errors] MismatchError for missing topologies, different scenarios or wrongly labelled traces
    """
    if set(traces) != {"zero", "low"}:
        raise MismatchError(f"propagation needs 'zero' and 'low' traces, got {sorted(traces)}")
    _check_comparable(traces["zero"], traces["low"], ("scenario", "t_event"))
    for inertia, trace in traces.items():
        labelled = trace.metadata.get("inertia")
        if labelled is not None and labelled != inertia:
            raise MismatchError(f"trace given as '{inertia}' inertia was run with '{labelled}' inertia")

    scenario = str(traces["zero"].metadata.get("scenario", ""))
    report = PropagationReport(scenario=scenario)
    for inertia, trace in traces.items():
        t0 = float(trace.metadata.get("t_event", 0.0)) if t_event is None else t_event
        pre = event_index(trace.time, t0)
        time = np.asarray(trace.time, dtype=float)
        links = channels_like(trace, "p_on", "_pu")
        require_channels(trace, links or ["p_on1_pu"])
        rates = [max_rate(time[pre:], np.asarray(trace.channels[name])[pre:]) for name in links]
        report.max_dpdt[inertia] = max(rates, default=0.0)
        total = np.sum([np.asarray(trace.channels[name], dtype=float) for name in links], axis=0)
        report.delivered[inertia] = float(total[-1] - total[pre])
        report.overshoot[inertia] = max(
            (overshoot(np.asarray(trace.channels[name])[pre:], float(trace.channels[name][pre])) for name in links),
            default=0.0,
        )
        report.nadirs_hz[inertia] = {
            name: peak_deviation(np.asarray(trace.channels[name])[pre:], float(trace.channels[name][pre]))
            for name in channels_like(trace, "df_on", "_hz")
        }

    zero, low = report.max_dpdt["zero"], report.max_dpdt["low"]
    report.ratio = zero / low if low > 0 else (math.inf if zero > 0 else 0.0)
    if scenario in TRIP_SCENARIOS:
        report.low_inertia_gentler = low < zero
        if not report.low_inertia_gentler:
            logger.warning(f"⚠️ {scenario}: low-inertia |dP/dt| {low:.3g} is not below zero-inertia {zero:.3g}")
    logger.info(f"✓ Propagation {scenario}: max |dP/dt| zero {zero:.3g} pu/s, low {low:.3g} pu/s")
    return report


# =====================================================
# Acceptance checks
# =====================================================

def droop_share(total: float, droops: Sequence[float]) -> List[float]:
    """
    [Purpose] Steady-state split of a power imbalance between droop-controlled units
    [Comment] Shares are inversely proportional to the droop; equal droops share equally
    [Usage] droop_share(0.2, [0.005] * 5) -> [0.04] * 5
    """
    if not droops or any(m <= 0 for m in droops):
        raise ValueError("droops must be a non-empty list of positive values")
    weights = [1.0 / m for m in droops]
    return [total * w / sum(weights) for w in weights]


def _sharing_spread(values: Sequence[float]) -> float:
    mean = float(np.mean(values))
    if abs(mean) < 1e-6:
        return 0.0
    return float(np.max(np.abs(np.asarray(values) - mean)) / abs(mean))


def acceptance_summary(
    metrics: Sequence[MetricReport] = (),
    mismatches: Sequence[MismatchReport] = (),
    propagation: Sequence[PropagationReport] = (),
    event_link: int = 1,
) -> List[AcceptanceCheck]:
    """
    [Purpose] Named PASS/FAIL/WARNING checks of the secure-operation criteria over a set of reports
    [Parameters]
    - event_link: link whose converter is stepped or tripped; excluded from the droop-sharing check
    [Returns] List of AcceptanceCheck in the order the reports were given
    """
    checks: List[AcceptanceCheck] = []
    event_channel = f"p_conv{event_link}_pu"

    for m in metrics:
        label = f"{m.scenario} {m.inertia}-inertia {m.mode}"
        if m.inertia == "zero":
            ok = m.max_df_offshore_hz < ZERO_INERTIA_DF_MAX_HZ
            checks.append(AcceptanceCheck(
                name=f"Frequency deviation ({label})",
                status="PASS" if ok else "FAIL",
                details=f"max |df| {m.max_df_offshore_hz:.4f} Hz, limit {ZERO_INERTIA_DF_MAX_HZ} Hz",
            ))
        elif m.scenario in TRIP_SCENARIOS:
            lo, hi = LOW_INERTIA_DF_BAND_HZ
            ok = lo <= m.max_df_offshore_hz <= hi
            checks.append(AcceptanceCheck(
                name=f"Frequency nadir ({label})",
                status="PASS" if ok else "FAIL",
                details=f"max |df| {m.max_df_offshore_hz:.3f} Hz, band [{lo}, {hi}] Hz",
            ))

        survivors = [dp for name, dp in m.converter_dp.items() if name != event_channel]
        if m.scenario in ("s1-power-request", "s2-converter-trip") and len(survivors) > 1:
            spread = _sharing_spread(survivors)
            checks.append(AcceptanceCheck(
                name=f"Droop sharing ({label})",
                status="PASS" if spread <= DROOP_SHARING_TOL else "FAIL",
                details=f"converter dP spread {spread:.2%} of the mean",
            ))

        if m.unsettled:
            checks.append(AcceptanceCheck(
                name=f"Settling ({label})", status="WARNING",
                details=f"unsettled: {', '.join(m.unsettled)}",
            ))
        if m.max_current_ratio > 1.0:
            checks.append(AcceptanceCheck(
                name=f"Current limit ({label})", status="WARNING",
                details=f"peak converter current {m.max_current_ratio:.2f} of its limit",
            ))

    for r in mismatches:
        negligible = power_negligible_time(r)
        limit = NEGLIGIBLE_WITHIN_S.get(r.inertia)
        if limit is None or r.scenario != "s2-converter-trip":
            status = "PASS" if math.isfinite(negligible) else "WARNING"
        else:
            status = "PASS" if negligible <= limit else "FAIL"
        checks.append(AcceptanceCheck(
            name=f"EMT/phasor mismatch ({r.scenario} {r.inertia}-inertia)",
            status=status,
            details=f"active power negligible (< {r.epsilon:g} pu) after {negligible:.3f} s",
        ))

    by_inertia = {(r.scenario, r.inertia): power_negligible_time(r) for r in mismatches}
    for scenario in {r.scenario for r in mismatches}:
        zero, low = by_inertia.get((scenario, "zero")), by_inertia.get((scenario, "low"))
        if scenario == "s2-converter-trip" and zero is not None and low is not None:
            checks.append(AcceptanceCheck(
                name=f"Mismatch ordering ({scenario})",
                status="PASS" if low > zero else "FAIL",
                details=f"low-inertia {low:.3f} s vs zero-inertia {zero:.3f} s",
            ))

    for p in propagation:
        if p.scenario in TRIP_SCENARIOS:
            checks.append(AcceptanceCheck(
                name=f"Onshore propagation ({p.scenario})",
                status="PASS" if p.low_inertia_gentler else "FAIL",
                details=f"zero/low max |dP/dt| ratio {p.ratio:.2f}",
            ))

    failed = sum(1 for c in checks if c.status == "FAIL")
    warned = sum(1 for c in checks if c.status == "WARNING")
    logger.info(f"Acceptance checks complete - Passed: {len(checks) - failed - warned}, "
                f"Failed: {failed}, Warnings: {warned}")
    return checks


def report_to_dataframe(reports: Sequence[MetricReport]) -> "pd.DataFrame":
    """
    [Purpose] One row per metric report, for CSV emission
    [Comment] Dictionary-valued metrics are flattened to "<metric>:<channel>" columns
    """
    # [Library] pandas is imported lazily
    import pandas as pd

    rows = []
    for report in reports:
        row = {
            "scenario": report.scenario,
            "mode": report.mode,
            "inertia": report.inertia,
            "max_dv_hub_pu": report.max_dv_hub,
            "max_df_offshore_hz": report.max_df_offshore_hz,
            "max_current_ratio": report.max_current_ratio,
        }
        for metric in ("settling_times", "max_dpdt_onshore", "onshore_nadirs_hz", "converter_dp", "overshoot"):
            for channel, value in getattr(report, metric).items():
                row[f"{metric}:{channel}"] = value
        rows.append(row)
    return pd.DataFrame(rows)
