# [Purpose] Scenario catalog and runner of the scenario lab
# [Comment] Stable identifiers: s1-power-request, s2-converter-trip, s3-windfarm-trip

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple, Union

from src.models.schemas import RunConfig
from src.models.simulation import Event, EventKind, Trace
from src.services.sim_engine import run
from src.services.system_builder import build_system
from src.utils.errors import InitializationError, SimulationError
from src.utils.logger import get_logger, log_function_call

logger = get_logger(__name__)

ScenarioResult = Union[Trace, Tuple[Trace, Trace]]


def furthest_farm(config: RunConfig) -> str:
    """[Returns] Name of the wind farm with the longest cable (the first one on ties)"""
    distances = config.network.farm_distances
    k = max(range(len(distances)), key=lambda j: distances[j])
    return f"wf{k + 1}"


def power_request_events(config: RunConfig, inertia: str) -> List[Event]:
    """
    [Purpose] Onshore area of one link asks for `request` MW more from the hub
    [Comment] Grid-forming converters take it as a lower injection reference, grid-following ones
              as a higher export order; the matching onshore load step follows when load_step is set
    """
    sc = config.scenario
    link = sc.link
    if inertia == "zero":
        rating = config.devices.gfm.rating
        events = [Event(time=sc.t_event, kind=EventKind.SETPOINT_STEP, device=f"conv{link}",
                        field="p_ref", delta=-sc.request / rating)]
    else:
        rating = config.devices.gfl.rating
        events = [Event(time=sc.t_event, kind=EventKind.SETPOINT_STEP, device=f"conv{link}",
                        field="p0", delta=sc.request / rating)]
    if sc.load_step:
        events.append(Event(time=sc.t_event, kind=EventKind.LOAD_STEP, device=f"on{link}",
                            delta=sc.request / config.network.s_base))
    return events


def converter_trip_events(config: RunConfig, inertia: str) -> List[Event]:
    sc = config.scenario
    return [Event(time=sc.t_event, kind=EventKind.DEVICE_TRIP, device=f"conv{sc.link}")]


def windfarm_trip_events(config: RunConfig, inertia: str) -> List[Event]:
    """[Purpose] Disconnects one wind farm together with all of its export cables"""
    sc = config.scenario
    farm = sc.farm or furthest_farm(config)
    events = [Event(time=sc.t_event, kind=EventKind.DEVICE_TRIP, device=farm)]
    for j in range(1, config.network.cables_per_farm + 1):
        events.append(Event(time=sc.t_event, kind=EventKind.BRANCH_TRIP, branch=f"{farm}_c{j}"))
    return events


SCENARIOS: Dict[str, Callable[[RunConfig, str], List[Event]]] = {
    "s1-power-request": power_request_events,
    "s2-converter-trip": converter_trip_events,
    "s3-windfarm-trip": windfarm_trip_events,
    "none": lambda config, inertia: [],
}


def scenario_events(config: RunConfig, inertia: Optional[str] = None) -> List[Event]:
    """[Errors] KeyError for a scenario name outside the catalog"""
    name = config.scenario.name
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario '{name}' (known: {', '.join(SCENARIOS)})")
    return SCENARIOS[name](config, inertia or config.scenario.inertia)


def run_mode(config: RunConfig, mode: str, inertia: Optional[str] = None) -> Trace:
    """
    [Purpose] Builds, initializes and runs one fidelity of the configured scenario
    [Errors] InitializationError or SimulationError, with scenario id, mode and inertia in the message
    """
    inertia = inertia or config.scenario.inertia
    name = config.scenario.name
    try:
        built = build_system(config, mode, inertia, scenario=name)
    except InitializationError as exc:
        raise InitializationError(f"{name} ({mode}, {inertia} inertia): {exc}") from exc
    stride = config.solver.emt_record_stride if mode == "emt" else 1
    trace = run(built.system, built.x0, scenario_events(config, inertia), config.scenario.t_end, stride)
    trace.metadata["t_event"] = config.scenario.t_event
    trace.metadata["init_residual"] = built.residual
    return trace


def _run_mode_job(args: Tuple[RunConfig, str, str]) -> Trace:
    config, mode, inertia = args
    return run_mode(config, mode, inertia)


@log_function_call(logger)
def run_scenario(
    config: RunConfig,
    mode: Optional[str] = None,
    inertia: Optional[str] = None,
    parallel: Optional[bool] = None,
) -> ScenarioResult:
    """
    [Purpose] Runs the [scenario] table of a configuration
    [Parameters]
    - mode: "emt", "phasor" or "both"; the configured mode when omitted
    - parallel: run the two modes of "both" in worker processes (solver.parallel when omitted)
    [Returns] One Trace, or (emt, phasor) for mode "both"
    [Usage]
    emt, phasor = run_scenario(cfg, mode="both")
    """
    mode = mode or config.scenario.mode
    inertia = inertia or config.scenario.inertia
    parallel = config.solver.parallel if parallel is None else parallel
    logger.info(f"Scenario {config.scenario.name}: {inertia} inertia, mode {mode}")

    if mode != "both":
        return run_mode(config, mode, inertia)
    if not parallel:
        return run_mode(config, "emt", inertia), run_mode(config, "phasor", inertia)

    jobs = [(config, "emt", inertia), (config, "phasor", inertia)]
    with ProcessPoolExecutor(max_workers=2) as pool:
        emt, phasor = pool.map(_run_mode_job, jobs)
    return emt, phasor


def run_both_inertias(config: RunConfig, mode: str = "phasor") -> Dict[str, Trace]:
    """[Purpose] Same scenario under both topologies, input of propagation_report"""
    traces: Dict[str, Trace] = {}
    for inertia in ("zero", "low"):
        result = run_scenario(config, mode=mode, inertia=inertia)
        if isinstance(result, tuple):
            raise SimulationError("run_both_inertias needs a single mode", scenario=config.scenario.name)
        traces[inertia] = result
    return traces
