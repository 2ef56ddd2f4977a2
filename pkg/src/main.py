# [Purpose] Command-line entry point of the offshore wind hub grid studio
# [Usage] python -m src.main <command> [options]; see `python -m src.main --help`
# [Comment] Exit codes: 0 success, 1 runtime failure, 2 configuration or argument error

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

# [Library] pandas - tables printed to standard output
# [Source] https://pandas.pydata.org/
import pandas as pd

from src.config import settings
from src.models.schemas import RunConfig
from src.services.analyzer import acceptance_summary, compute_metrics, mismatch
from src.services.config_io import annotated_defaults, load_config
from src.services.reporting import emit_scenario_report, emit_tco_report, markdown_table, write_trace
from src.services.scenarios import run_scenario
from src.services.sim_engine import linearize
from src.services.system_builder import build_system, hub_network, operating_point
from src.services.tco import all_options, tco
from src.utils.errors import ConfigError, HubGridError
from src.utils.logger import get_logger, log_exception, set_global_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2


def _config(args: argparse.Namespace) -> RunConfig:
    return load_config(args.config) if args.config else RunConfig()


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if args.out else Path(settings.OUTPUT_DIR)


def _inertia(args: argparse.Namespace, config: RunConfig) -> str:
    return getattr(args, "inertia", None) or config.scenario.inertia


# =====================================================
# Commands
# =====================================================

def cmd_tco(args: argparse.Namespace) -> int:
    """[Purpose] Cost of ownership of the four grid options, or the full report with --sweep"""
    assumptions = _config(args).tco
    if args.distance is not None:
        assumptions = assumptions.model_copy(update={"distance": args.distance})
    if args.power is not None:
        assumptions = assumptions.model_copy(update={"power": args.power})

    if args.sweep:
        files = emit_tco_report(_out_dir(args), assumptions, pdf=args.pdf)
        for name, path in sorted(files.items()):
            print(f"{name}: {path}")
        return EXIT_OK

    rows = [tco(option.model_copy(update={"distance": assumptions.distance}), assumptions).model_dump()
            for option in all_options(assumptions.power)]
    print(markdown_table(pd.DataFrame(rows), 2))
    return EXIT_OK


def cmd_powerflow(args: argparse.Namespace) -> int:
    """[Purpose] Distributed-slack steady state of the hub: bus voltages and device injections"""
    config = _config(args)
    inertia = _inertia(args, config)
    op = operating_point(config, hub_network(config, inertia), inertia)
    buses = pd.DataFrame({
        "bus": op.bus_ids,
        "v_pu": op.v_mag,
        "angle_deg": [math.degrees(a) for a in op.v_ang],
    })
    devices = pd.DataFrame([
        {"device": name, "p_pu": pq[0], "q_pu": pq[1]} for name, pq in sorted(op.injections.items())
    ])
    print(f"# Power flow ({inertia} inertia, {op.iterations} iterations, mismatch {op.mismatch:.1e} pu)\n")
    print(markdown_table(buses, 5))
    print()
    print(markdown_table(devices, 5))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    """[Purpose] Runs the configured scenario in one mode and writes its trace and metrics"""
    config = _config(args)
    inertia = _inertia(args, config)
    mode = args.mode or config.scenario.mode
    if mode == "both":
        mode = "phasor"
    trace = run_scenario(config, mode=mode, inertia=inertia)
    out = _out_dir(args)
    stem = f"{config.scenario.name}_{inertia}_{mode}"
    path = write_trace(trace, out / f"{stem}.csv")
    metrics = compute_metrics(trace, config.scenario.t_event, config.solver.band_v, config.solver.band_f)
    emit_scenario_report(out, metrics=[metrics], checks=acceptance_summary([metrics], event_link=config.scenario.link))
    print(f"trace: {path}")
    print(f"max |dV_hub| = {metrics.max_dv_hub:.5f} pu, max |df| = {metrics.max_df_offshore_hz:.5f} Hz")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    """[Purpose] Runs both fidelities of the configured scenario and reports their mismatch"""
    config = _config(args)
    inertia = _inertia(args, config)
    emt, phasor = run_scenario(config, mode="both", inertia=inertia)
    out = _out_dir(args)
    stem = f"{config.scenario.name}_{inertia}"
    write_trace(emt, out / f"{stem}_emt.csv")
    write_trace(phasor, out / f"{stem}_phasor.csv")

    t_event = config.scenario.t_event
    solver = config.solver
    metrics = [compute_metrics(trace, t_event, solver.band_v, solver.band_f) for trace in (emt, phasor)]
    report = mismatch(emt, phasor, solver.mismatch_eps, t_event)
    checks = acceptance_summary(metrics, [report], event_link=config.scenario.link)
    files = emit_scenario_report(out, metrics=metrics, mismatches=[report], checks=checks)
    print(f"report: {files['markdown']}")
    for name, m in report.channels.items():
        print(f"{name}: rms {m.rms:.2e}, max {m.max:.2e}, negligible after {m.time_to_negligible:.3f} s")
    return EXIT_OK


def cmd_linearize(args: argparse.Namespace) -> int:
    """[Purpose] Eigenvalues of the initialized system"""
    config = _config(args)
    inertia = _inertia(args, config)
    mode = args.mode or "phasor"
    built = build_system(config, mode, inertia)
    report = linearize(built.system, built.x0, config.solver.linearize_eps)
    modes = pd.DataFrame([
        {"real": m.eigenvalue.real, "imag": m.eigenvalue.imag, "frequency_hz": m.frequency_hz,
         "damping": m.damping, "reference": m.reference}
        for m in report.modes
    ])
    print(f"# Modes ({mode}, {inertia} inertia): {'stable' if report.stable else 'UNSTABLE'}, "
          f"sensitivity {report.sensitivity:.1e}\n")
    print(markdown_table(modes, 4))
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def cmd_print_defaults(args: argparse.Namespace) -> int:
    sys.stdout.write(annotated_defaults())
    return EXIT_OK


# =====================================================
# Parser
# =====================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hubgrid", description=settings.APP_DESCRIPTION)
    parser.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tco", help="techno-economic comparison of the grid options")
    p.add_argument("--config", help="run configuration (its [tco] table is used)")
    p.add_argument("--distance", type=float, help="distance in km")
    p.add_argument("--power", type=float, help="wind farm power in MW")
    p.add_argument("--sweep", action="store_true", help="write the sweep CSVs and the markdown report")
    p.add_argument("--pdf", action="store_true", help="also render the report to PDF (with --sweep)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_tco)

    p = sub.add_parser("powerflow", help="steady state of the hub grid")
    p.add_argument("--config")
    p.add_argument("--inertia", choices=("zero", "low"))
    p.set_defaults(func=cmd_powerflow)

    p = sub.add_parser("simulate", help="run the configured scenario in one mode")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("emt", "phasor"))
    p.add_argument("--inertia", choices=("zero", "low"))
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both modes and report the EMT/phasor mismatch")
    p.add_argument("--config")
    p.add_argument("--inertia", choices=("zero", "low"))
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("linearize", help="eigenvalues of the initialized system")
    p.add_argument("--config")
    p.add_argument("--mode", choices=("emt", "phasor"))
    p.add_argument("--inertia", choices=("zero", "low"))
    p.set_defaults(func=cmd_linearize)

    p = sub.add_parser("print-defaults", help="write the annotated default configuration")
    p.set_defaults(func=cmd_print_defaults)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    [Purpose] Parses arguments, runs one command and maps errors to exit codes
    [Returns] 0 on success, 1 on a runtime failure, 2 on invalid configuration or arguments
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    set_global_level(args.log_level)
    try:
        return args.func(args)
    except ConfigError as exc:
        for message in exc.messages:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_INVALID
    except HubGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        log_exception(logger, exc, f"while running '{args.command}'")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
