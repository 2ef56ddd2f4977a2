# [Purpose] Trace CSV files and the markdown + CSV report bundle
# [Comment] Output depends only on its inputs, so identical runs give byte-identical files

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

# [Library] NumPy - trace arrays
# [Source] https://numpy.org/
import numpy as np

# [Library] pandas - CSV writing/reading and report tables
# [Source] https://pandas.pydata.org/
import pandas as pd

from src.models.econ import TcoAssumptions
from src.models.simulation import (
    AcceptanceCheck,
    EventMarker,
    MetricReport,
    MismatchReport,
    PropagationReport,
    Trace,
)
from src.services.analyzer import report_to_dataframe
from src.services.tco import (
    LOSS_LOADING,
    PLATFORM_COST,
    all_options,
    crossover_distances,
    power_transfer_sweep,
    tco,
    tco_sweep,
)
from src.services.techno_econ import PUBLISHED_CABLE_LOSSES, transformer_report, cable_loss_pipeline
from src.utils.logger import get_logger

logger = get_logger(__name__)

PathLike = Union[str, Path]

# [Comment] 17 significant digits reproduce every double exactly on read-back
FLOAT_FORMAT = "%.17g"
# [Comment] Published platform totals (MEUR)
PUBLISHED_PLATFORM_TOTALS = {"50Hz": 38.56, "16.67Hz": 115.68}


# =====================================================
# Traces
# =====================================================

def events_path(path: PathLike) -> Path:
    """[Returns] Sidecar path of a trace: run.csv -> run.events.csv"""
    path = Path(path)
    return path.with_name(f"{path.stem}.events.csv")


def write_trace(trace: Trace, path: PathLike) -> Path:
    """
    [Purpose] Writes a trace as CSV with header time_s,<channel>... and its event markers as a sidecar
    [Returns] Path of the trace file
    [Errors] OSError when the location is not writable
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = {"time_s": np.asarray(trace.time, dtype=float)}
    columns.update({name: np.asarray(values, dtype=float) for name, values in trace.channels.items()})
    pd.DataFrame(columns).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    events = pd.DataFrame(
        {"time_s": [m.time for m in trace.events], "description": [m.description for m in trace.events]}
    )
    events.to_csv(events_path(path), index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"✓ Trace written to {path} ({len(trace)} samples, {len(trace.channels)} channels)")
    return path


def read_trace(path: PathLike) -> Trace:
    """
    [Purpose] Reads a trace written by write_trace, with its events sidecar when present
    [Errors] FileNotFoundError, ValueError for a file without the time_s column
    """
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    if "time_s" not in frame.columns:
        raise ValueError(f"{path} has no time_s column")
    channels = {name: frame[name].to_numpy(dtype=float) for name in frame.columns if name != "time_s"}
    markers: List[EventMarker] = []
    sidecar = events_path(path)
    if sidecar.exists():
        events = pd.read_csv(sidecar, float_precision="round_trip", keep_default_na=False)
        markers = [EventMarker(time=float(row.time_s), description=str(row.description))
                   for row in events.itertuples(index=False)]
    return Trace(time=frame["time_s"].to_numpy(dtype=float), channels=channels, events=markers,
                 metadata={"source": str(path)})


# =====================================================
# Markdown helpers
# =====================================================

def _cell(value, digits: int) -> str:
    if isinstance(value, (float, np.floating)):
        if math.isinf(value):
            return "inf"
        if math.isnan(value):
            return "-"
        return f"{value:.{digits}f}"
    if value is None:
        return "-"
    return str(value)


def markdown_table(frame: pd.DataFrame, digits: int = 2) -> str:
    """[Purpose] GitHub-style markdown table of a DataFrame (index is not written)"""
    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    rows = ["| " + " | ".join(_cell(v, digits) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *rows])


# =====================================================
# Techno-economic report
# =====================================================

def transformer_section() -> str:
    frame = transformer_report()[[
        "design", "mass_16hz_t", "published_mass_16hz_t", "mass_50hz_t", "published_mass_50hz_t", "mass_ratio",
        "cost_16hz_meur", "published_cost_16hz_meur", "cost_50hz_meur", "published_cost_50hz_meur",
    ]]
    return "## Transformer active-material mass and cost\n\n" + markdown_table(frame, 2)


def cable_loss_section(assumptions: TcoAssumptions) -> str:
    computed = cable_loss_pipeline(utilization=assumptions.utilization, years=assumptions.years,
                               price=assumptions.energy_price)
    rows = []
    for label, row in computed.iterrows():
        published = PUBLISHED_CABLE_LOSSES[label]
        rows.append({
            "column": label,
            "R_ac (mOhm/km)": row["resistance"],
            "full-load loss (kW/km)": row["full_load_loss"],
            "published full-load loss": published["full_load_loss"],
            "annual loss (MWh/km)": row["annual_loss"],
            "published annual loss": published["annual_loss"],
            "20-year cost (MEUR/km)": row["loss_cost"],
            "published 20-year cost": published["loss_cost"],
        })
    return "## Cable resistances, annual losses and related costs\n\n" + markdown_table(pd.DataFrame(rows), 3)


def platform_frame() -> pd.DataFrame:
    rows = []
    for label, items in PLATFORM_COST.items():
        total = round(sum(items.values()), 9)
        rows.append({"frequency": label, **items, "total": total, "published total": PUBLISHED_PLATFORM_TOTALS[label]})
    return pd.DataFrame(rows)


def tco_frame(assumptions: TcoAssumptions) -> pd.DataFrame:
    rows = []
    for option in all_options(assumptions.power):
        cost = tco(option.model_copy(update={"distance": assumptions.distance}), assumptions)
        rows.append(cost.model_dump())
    return pd.DataFrame(rows)


def crossover_section(assumptions: TcoAssumptions, sweep: pd.DataFrame) -> str:
    lines = ["## Cost crossovers", ""]
    other = "model" if assumptions.data_source == "published" else "published"
    other_sweep = tco_sweep(sweep["length_km"].to_numpy(), assumptions=assumptions.model_copy(
        update={"data_source": other}))
    for source, frame in ((assumptions.data_source, sweep), (other, other_sweep)):
        crossovers = crossover_distances(frame)
        in_band = any(20.0 <= p <= 40.0 for p in crossovers.get("66kV_16.67Hz vs 66kV_50Hz", []))
        lines.append(f"### data source: {source}")
        lines.append("")
        lines.append(f"- loss loading: {LOSS_LOADING[source]}")
        lines.append(f"- 66 kV low-frequency crossover within 20-40 km: {'yes' if in_band else 'no'}")
        for pair, points in crossovers.items():
            shown = ", ".join(f"{p:.1f} km" for p in points) or "none"
            lines.append(f"- {pair}: {shown}")
        lines.append("")
    return "\n".join(lines).rstrip()


def emit_tco_report(
    out_dir: PathLike,
    assumptions: Optional[TcoAssumptions] = None,
    pdf: bool = False,
) -> Dict[str, Path]:
    """
    [Purpose] Techno-economic report: markdown tables next to the published values, plot-ready CSVs
    [Returns] {"markdown": ..., "power_transfer": ..., "sweep": ..., "pdf": ...} paths of the written files
    [Usage] emit_tco_report("results/tco", TcoAssumptions(), pdf=True)
    """
    a = assumptions or TcoAssumptions()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    transfer = power_transfer_sweep()
    distances = np.arange(0.0, 100.0 + 0.5, 1.0)
    costs = tco_sweep(distances, assumptions=a)
    files = {"power_transfer": out / "power_transfer_sweep.csv", "sweep": out / "tco_sweep.csv"}
    transfer.to_csv(files["power_transfer"], index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    costs.to_csv(files["sweep"], index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    sections = [
        "# Techno-economic comparison of collection-grid options",
        f"Wind farm {a.power:g} MW, {a.years} years, interest {a.interest_rate:.1%}, "
        f"energy price {a.energy_price:g} EUR/MWh, data source `{a.data_source}`.",
        transformer_section(),
        cable_loss_section(a),
        "## Offshore AC platform (MEUR)\n\n" + markdown_table(platform_frame(), 2),
        f"## Cost of ownership at {a.distance:g} km (MEUR)\n\n" + markdown_table(tco_frame(a), 2),
        crossover_section(a, costs),
    ]
    files["markdown"] = out / "tco_report.md"
    files["markdown"].write_text("\n\n".join(sections) + "\n", encoding="utf-8")

    if pdf:
        from src.services.pdf_report import build_report_pdf

        files["pdf"] = build_report_pdf(out / "tco_report.pdf", "Techno-economic comparison", sections[1:])
    logger.info(f"✓ Techno-economic report written to {out}")
    return files


# =====================================================
# Scenario report
# =====================================================

def _mismatch_frame(reports: Sequence[MismatchReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        for channel, m in r.channels.items():
            rows.append({"scenario": r.scenario, "inertia": r.inertia, "channel": channel,
                         "rms_pu": m.rms, "max_pu": m.max, "time_to_negligible_s": m.time_to_negligible})
    return pd.DataFrame(rows, columns=["scenario", "inertia", "channel", "rms_pu", "max_pu", "time_to_negligible_s"])


def _propagation_frame(reports: Sequence[PropagationReport]) -> pd.DataFrame:
    rows = []
    for r in reports:
        for inertia in ("zero", "low"):
            nadirs = r.nadirs_hz.get(inertia, {})
            rows.append({
                "scenario": r.scenario, "inertia": inertia,
                "max_dpdt_pu_s": r.max_dpdt.get(inertia, 0.0),
                "delivered_change_pu": r.delivered.get(inertia, 0.0),
                "overshoot_pu": r.overshoot.get(inertia, 0.0),
                "worst_onshore_df_hz": max(nadirs.values(), key=abs, default=0.0),
            })
    return pd.DataFrame(rows)


def emit_scenario_report(
    out_dir: PathLike,
    metrics: Sequence[MetricReport] = (),
    mismatches: Sequence[MismatchReport] = (),
    propagation: Sequence[PropagationReport] = (),
    checks: Sequence[AcceptanceCheck] = (),
) -> Dict[str, Path]:
    """[Purpose] Markdown summary plus CSV tables of metric, mismatch and propagation reports"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: Dict[str, Path] = {}
    sections = ["# Scenario report"]

    if metrics:
        frame = report_to_dataframe(metrics)
        files["metrics"] = out / "metrics.csv"
        frame.to_csv(files["metrics"], index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        summary = frame[["scenario", "mode", "inertia", "max_dv_hub_pu", "max_df_offshore_hz", "max_current_ratio"]]
        sections.append("## Secure-operation metrics\n\n" + markdown_table(summary, 4))
    if mismatches:
        frame = _mismatch_frame(mismatches)
        files["mismatch"] = out / "mismatch.csv"
        frame.to_csv(files["mismatch"], index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        sections.append(f"## EMT versus phasor (epsilon {mismatches[0].epsilon:g} pu)\n\n" + markdown_table(frame, 4))
    if propagation:
        frame = _propagation_frame(propagation)
        files["propagation"] = out / "propagation.csv"
        frame.to_csv(files["propagation"], index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        sections.append("## Onshore propagation\n\n" + markdown_table(frame, 4))
    if checks:
        frame = pd.DataFrame([c.model_dump() for c in checks])
        sections.append("## Acceptance checks\n\n" + markdown_table(frame))

    files["markdown"] = out / "scenario_report.md"
    files["markdown"].write_text("\n\n".join(sections) + "\n", encoding="utf-8")
    logger.info(f"✓ Scenario report written to {out}")
    return files


def emit_report(
    out_dir: PathLike,
    tco_assumptions: Optional[TcoAssumptions] = None,
    metrics: Sequence[MetricReport] = (),
    mismatches: Sequence[MismatchReport] = (),
    propagation: Sequence[PropagationReport] = (),
    checks: Sequence[AcceptanceCheck] = (),
    pdf: bool = False,
) -> Dict[str, Path]:
    """
    [Purpose] Writes whichever report parts have inputs
    [Errors] ValueError when neither techno-economic assumptions nor scenario reports are given
    """
    if tco_assumptions is None and not (metrics or mismatches or propagation):
        raise ValueError("emit_report needs techno-economic assumptions or scenario reports")
    files: Dict[str, Path] = {}
    if tco_assumptions is not None:
        files.update({f"tco_{k}": v for k, v in emit_tco_report(out_dir, tco_assumptions, pdf).items()})
    if metrics or mismatches or propagation:
        files.update(emit_scenario_report(out_dir, metrics, mismatches, propagation, checks))
    return files

