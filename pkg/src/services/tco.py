# [Purpose] 20-year total cost of ownership of the four collection-grid options and distance sweeps
# [Comment] Capital costs are financed by an annuity; the cost of losses is added unfinanced

import math
from itertools import combinations
from typing import Dict, List, Optional, Sequence

# [Library] NumPy - distance grids and sign changes for crossovers
# [Source] https://numpy.org/
import numpy as np

# [Library] pandas - sweep tables written as plot-ready CSV
# [Source] https://pandas.pydata.org/
import pandas as pd

from src.models.econ import (
    LOW_FREQUENCY,
    CostBreakdown,
    GridOption,
    TcoAssumptions,
    TransformerDesignSpec,
    is_low_frequency,
)
from src.services.techno_econ import (
    TRANSFORMER_DESIGN_PARAMETERS,
    ac_resistance,
    annual_energy_loss,
    conductor_from_cable,
    full_load_loss,
    loss_cost,
    max_power_transfer,
    published_resistance,
    published_transformer_cost,
    transformer_design,
)
from src.utils.logger import get_logger, log_function_call

logger = get_logger(__name__)

# [Comment] Platform of the 220 kV option (MEUR); the low-frequency column is the 50 Hz one scaled by 3
PLATFORM_COST = {
    "50Hz": {"jacket": 9.2, "topside": 22.0, "installation": 7.36},
    "16.67Hz": {"jacket": 27.6, "topside": 66.0, "installation": 22.08},
}

CABLE_RATING = {66: 120.0, 220: 400.0}   # MVA
CABLE_RATED_CURRENT = 1.05               # kA

LOSS_LOADING = {
    "published": "rated cable current of 1.05 kA in every option",
    "model": "farm power shared by the parallel cables at the assumed power factor",
}

# [Comment] Step-up transformers between the turbine array and the HVDC converter per option
STEP_UP = {66: ["66/400"], 220: ["66/220", "220/400"]}
TURBINE_TRANSFORMER = "0.67/66"


def all_options(power: float = 400.0) -> List[GridOption]:
    return [GridOption(voltage=v, frequency=f, power=power) for v in (66, 220) for f in (LOW_FREQUENCY, 50.0)]


def platform_cost(f: float) -> Dict[str, float]:
    """
    [Purpose] Offshore AC platform cost breakdown (MEUR) plus its total
    [Errors] ValueError for frequencies other than 16.67 Hz and 50 Hz
    """
    if is_low_frequency(f):
        items = dict(PLATFORM_COST["16.67Hz"])
    elif f == 50.0:
        items = dict(PLATFORM_COST["50Hz"])
    else:
        raise ValueError(f"no platform cost for {f} Hz (16.67 Hz or 50 Hz only)")
    items["total"] = round(sum(items.values()), 9)
    return items


def annuity_payment(capex: float, rate: float, years: int) -> float:
    """[Purpose] Yearly annuity A = capex r / (1 - (1 + r)^-n); capex / n at r = 0"""
    if rate < 0:
        raise ValueError(f"rate must be >= 0, got {rate}")
    if years < 1:
        raise ValueError(f"years must be >= 1, got {years}")
    if rate == 0:
        return capex / years
    return capex * rate / (1.0 - (1.0 + rate) ** (-years))


def annuity_total(capex: float, rate: float, years: int) -> float:
    """
    [Purpose] Total paid over the amortization period (MEUR)
    [Usage] annuity_total(1.0, 0.02, 20) -> 1.2232
    """
    return annuity_payment(capex, rate, years) * years


def _transformer_cost(name: str, f: float, source: str) -> float:
    if source == "published":
        return published_transformer_cost(name, f)
    v1, v2, s, b, j, dv = TRANSFORMER_DESIGN_PARAMETERS[name]
    spec = TransformerDesignSpec(name=name, v_primary=v1, v_secondary=v2, s_rated=s, f=f, b_max=b, j_max=j, dv_max=dv)
    return transformer_design(spec).cost


def cable_current(option: GridOption, n_cables: int, a: TcoAssumptions) -> float:
    """
    [Purpose] Per-cable current (kA) at which the cost of losses is evaluated
    [Comment] "published" keeps the rated current behind the tabulated losses for every option;
              "model" shares the farm power equally over the parallel cables at the assumed power factor
    """
    if a.data_source == "published":
        return CABLE_RATED_CURRENT
    return option.power / (n_cables * math.sqrt(3.0) * option.voltage * a.power_factor)


def _loss_cost_per_cable_km(option: GridOption, n_cables: int, a: TcoAssumptions) -> float:
    if a.data_source == "published":
        r = published_resistance(option.frequency)
    else:
        r = ac_resistance(conductor_from_cable(), option.frequency)
    annual = annual_energy_loss(full_load_loss(cable_current(option, n_cables, a), r), a.utilization)
    return loss_cost(annual, a.years, a.energy_price)


def tco(option: GridOption, assumptions: Optional[TcoAssumptions] = None) -> CostBreakdown:
    """
    [Purpose] Cost of ownership of one option over the assumption horizon
    [Parameters]
    - option: voltage, frequency, wind farm power and distance
    - assumptions: the [tco] table; defaults when omitted
    [Returns] CostBreakdown in MEUR with financing = annuity total - capex
    [Errors] ValueError for a negative distance (rejected by GridOption)
    """
    a = assumptions or TcoAssumptions()
    f = option.frequency

    transformers = a.turbines * _transformer_cost(TURBINE_TRANSFORMER, f, a.data_source)
    transformers += sum(_transformer_cost(name, f, a.data_source) for name in STEP_UP[option.voltage])
    platform = platform_cost(f)["total"] if option.voltage == 220 else 0.0

    n_cables = math.ceil(option.power / CABLE_RATING[option.voltage] - 1e-12)
    cable_km = n_cables * option.distance
    supply_rate = a.cable_cost_220 if option.voltage == 220 else a.cable_cost_66
    cables_supply = cable_km * supply_rate
    cables_install = cable_km * a.install_cost
    losses = cable_km * _loss_cost_per_cable_km(option, n_cables, a)

    capex = transformers + platform + cables_supply + cables_install
    financing = annuity_total(capex, a.interest_rate, a.years) - capex
    return CostBreakdown(
        option=option.label,
        distance=option.distance,
        transformers=transformers,
        platform=platform,
        cables_supply=cables_supply,
        cables_install=cables_install,
        losses_20yr=losses,
        financing=max(financing, 0.0),
        total=transformers + platform + cables_supply + cables_install + losses + max(financing, 0.0),
    )


@log_function_call(logger)
def tco_sweep(
    distances: Optional[Sequence[float]] = None,
    options: Optional[Sequence[GridOption]] = None,
    assumptions: Optional[TcoAssumptions] = None,
) -> pd.DataFrame:
    """
    [Purpose] Total cost of every option over a distance grid
    [Returns] DataFrame with column length_km and one total column (MEUR) per option label
    """
    a = assumptions or TcoAssumptions()
    if distances is None:
        distances = np.arange(0.0, a.sweep_max + 0.5 * a.sweep_step, a.sweep_step)
    options = list(options) if options is not None else all_options(a.power)
    table = {"length_km": np.asarray(distances, dtype=float)}
    for option in options:
        table[option.label] = [
            tco(option.model_copy(update={"distance": float(d)}), a).total for d in table["length_km"]
        ]
    return pd.DataFrame(table)


def cheapest_option(sweep: pd.DataFrame) -> pd.Series:
    """[Returns] Label of the cheapest option at each distance of a sweep"""
    return sweep.drop(columns="length_km").idxmin(axis=1)


def crossover_distances(sweep: pd.DataFrame) -> Dict[str, List[float]]:
    """
    [Purpose] Distances where the cheaper of two options changes, by linear interpolation
    [Returns] {"A vs B": [km, ...]} for every option pair
    """
    x = sweep["length_km"].to_numpy()
    labels = [c for c in sweep.columns if c != "length_km"]
    result: Dict[str, List[float]] = {}
    for left, right in combinations(labels, 2):
        diff = sweep[left].to_numpy() - sweep[right].to_numpy()
        points = []
        for k in range(len(diff) - 1):
            if diff[k] != 0.0 and diff[k + 1] == 0.0:
                points.append(float(x[k + 1]))
            elif diff[k] * diff[k + 1] < 0:
                points.append(float(x[k] - diff[k] * (x[k + 1] - x[k]) / (diff[k + 1] - diff[k])))
        result[f"{left} vs {right}"] = points
    return result


def argmin_changes(sweep: pd.DataFrame) -> List[float]:
    """[Returns] Distances where the cheapest option changes"""
    cheapest = cheapest_option(sweep).to_numpy()
    x = sweep["length_km"].to_numpy()
    return [float(x[k]) for k in range(1, len(cheapest)) if cheapest[k] != cheapest[k - 1]]


def power_transfer_sweep(lengths: Optional[Sequence[float]] = None, c_per_km: float = 0.2) -> pd.DataFrame:
    """
    [Purpose] Maximum active power of one cable versus length for the four options
    [Returns] DataFrame with column length_km and one MW column per option label
    """
    if lengths is None:
        lengths = np.arange(0.0, 901.0, 1.0)
    table = {"length_km": np.asarray(lengths, dtype=float)}
    for option in all_options():
        s = CABLE_RATING[option.voltage]
        table[option.label] = [
            max_power_transfer(s, float(option.voltage), c_per_km, option.frequency, float(length))
            for length in table["length_km"]
        ]
    return pd.DataFrame(table)
