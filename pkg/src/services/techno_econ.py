# [Purpose] Physical sizing formulas of the collection grid: skin effect, cable losses, charging, transformers
# [Comment] Pure functions over immutable inputs; units are stated on every signature

import math
from functools import lru_cache
from typing import Dict, List, Optional, Sequence

# [Library] pandas - tabular results for reports and CSV output
# [Source] https://pandas.pydata.org/
import pandas as pd

# [Library] SciPy - Kelvin functions ber, bei and their derivatives for the solid-cylinder skin effect
# [Source] https://docs.scipy.org/doc/scipy/reference/special.html
from scipy.special import bei, beip, ber, berp

from src.models.econ import (
    LOW_FREQUENCY,
    ConductorModel,
    TransformerDesign,
    TransformerDesignSpec,
    is_low_frequency,
)
from src.models.grid import CABLE_220KV, CableSpec
from src.utils.logger import get_logger

logger = get_logger(__name__)

HOURS_PER_YEAR = 8760.0
STEEL_DENSITY = 7650.0     # kg/m3
COPPER_DENSITY = 8960.0    # kg/m3
COPPER_PRICE = 7.0         # EUR/kg
STEEL_PRICE = 3.0          # EUR/kg
WINDOW_FILL = 0.3

# [Comment] Published cable resistances (mOhm/km) and derived rows, keyed by column
PUBLISHED_RESISTANCES = {"DC": 29.5, "16.67Hz": 29.7, "50.0Hz": 34.9}
PUBLISHED_CABLE_LOSSES = {
    "DC": {"full_load_loss": 97.6, "annual_loss": 427.0, "loss_cost": 0.256},
    "16.67Hz": {"full_load_loss": 98.2, "annual_loss": 430.0, "loss_cost": 0.258},
    "50.0Hz": {"full_load_loss": 115.4, "annual_loss": 506.0, "loss_cost": 0.303},
}

# [Comment] Published active-material masses (t) and costs (MEUR) at (16.67 Hz, 50 Hz)
PUBLISHED_TRANSFORMERS = {
    "0.67/66": {"mass": (27.0, 9.0), "cost": (0.10, 0.04)},
    "66/220": {"mass": (1075.0, 371.0), "cost": (3.75, 1.49)},
    "220/400": {"mass": (1387.0, 489.0), "cost": (4.78, 1.93)},
    "66/400": {"mass": (1207.0, 417.0), "cost": (4.16, 1.64)},
}

# [Comment] name -> (v_primary kV, v_secondary kV, s MVA, b_max T, j_max A/mm2, dv_max V/turn)
TRANSFORMER_DESIGN_PARAMETERS = {
    "0.67/66": (0.67, 66.0, 10.0, 1.0, 7.0, 22.0),
    "66/220": (66.0, 220.0, 400.0, 1.0, 3.0, 220.0),
    "220/400": (220.0, 400.0, 400.0, 1.0, 3.0, 220.0),
    "66/400": (66.0, 400.0, 400.0, 1.0, 3.0, 220.0),
}

REFERENCE_DESIGN = "66/400"
REFERENCE_MASS = 417.0


def _check_frequency(f: float, allow_zero: bool = False) -> None:
    if f < 0 or (f == 0 and not allow_zero) or not math.isfinite(f):
        raise ValueError(f"frequency must be {'>= 0' if allow_zero else '> 0'} Hz, got {f}")


def conductor_from_cable(spec: CableSpec = CABLE_220KV) -> ConductorModel:
    """
    [Purpose] Solid-cylinder conductor whose resistivity reproduces the datasheet DC resistance
    [Comment] rho = R_dc * A with R_dc in ohm/m (mOhm/km * 1e-6) and A in m2 (mm2 * 1e-6)
    """
    resistivity = spec.r_dc_per_km * 1e-6 * spec.conductor_area * 1e-6
    return ConductorModel(
        area=spec.conductor_area,
        radius=spec.conductor_diameter / 2.0,
        resistivity=resistivity,
    )


def skin_depth(f: float, conductor: ConductorModel) -> float:
    """
    [Purpose] Skin depth delta = sqrt(rho / (pi f mu)) in mm
    [Errors] ValueError for f <= 0
    """
    _check_frequency(f)
    return math.sqrt(conductor.resistivity / (math.pi * f * conductor.permeability)) * 1e3


def kelvin_ratio(conductor: ConductorModel, f: float) -> float:
    """
    [Purpose] R_ac / R_dc of a solid round conductor from the Kelvin functions
    [Comment] x = sqrt(2) r / delta; ratio = (x/2) (ber bei' - bei ber') / (ber'^2 + bei'^2)
    """
    _check_frequency(f, allow_zero=True)
    if f == 0:
        return 1.0
    x = math.sqrt(2.0) * conductor.radius / skin_depth(f, conductor)
    num = ber(x) * beip(x) - bei(x) * berp(x)
    den = berp(x) ** 2 + beip(x) ** 2
    if den == 0.0:
        return 1.0
    return max(1.0, float(0.5 * x * num / den))


def ac_resistance(conductor: ConductorModel, f: float) -> float:
    """
    [Purpose] AC resistance in mOhm/km; equals the DC value at f = 0
    [Usage] ac_resistance(conductor_from_cable(), 50.0) -> about 32.2
    """
    r_dc = conductor.r_dc_per_km
    if f == 0:
        return r_dc
    return r_dc * kelvin_ratio(conductor, f)


def published_resistance(f: float, conductor: Optional[ConductorModel] = None) -> float:
    """
    [Purpose] Tabulated cable resistance at 0, 16.67 or 50 Hz (mOhm/km)
    [Comment] Other frequencies follow the Kelvin model scaled to meet the 50 Hz entry
    """
    _check_frequency(f, allow_zero=True)
    if f == 0:
        return PUBLISHED_RESISTANCES["DC"]
    if is_low_frequency(f):
        return PUBLISHED_RESISTANCES["16.67Hz"]
    if f == 50.0:
        return PUBLISHED_RESISTANCES["50.0Hz"]
    conductor = conductor or conductor_from_cable()
    scale = PUBLISHED_RESISTANCES["50.0Hz"] / ac_resistance(conductor, 50.0)
    return max(PUBLISHED_RESISTANCES["DC"], ac_resistance(conductor, f) * scale)


def full_load_loss(i_n: float, r_ac: float) -> float:
    """[Purpose] Three-phase joule loss 3 I^2 R in W/m for I in kA and R in mOhm/km"""
    if i_n < 0 or r_ac < 0:
        raise ValueError("current and resistance must be >= 0")
    return 3.0 * (i_n * 1e3) ** 2 * r_ac * 1e-6


def annual_energy_loss(p_loss: float, utilization: float) -> float:
    """[Purpose] W/m (= kW/km) times full-load hours, in MWh per km and year"""
    if not 0.0 <= utilization <= 1.0:
        raise ValueError(f"utilization must be within [0, 1], got {utilization}")
    if p_loss < 0:
        raise ValueError(f"p_loss must be >= 0, got {p_loss}")
    return p_loss * HOURS_PER_YEAR * utilization / 1e3


def loss_cost(annual: float, years: int, price: float) -> float:
    """[Purpose] Cost of the losses over the horizon in MEUR/km (price in EUR/MWh)"""
    if annual < 0 or years < 0 or price < 0:
        raise ValueError("annual loss, years and price must be >= 0")
    return annual * years * price * 1e-6


def cable_charging(v: float, c_per_km: float, f: float, length: float) -> float:
    """[Purpose] Reactive power Q = 2 pi f C' V^2 L of an energized cable, MVAr (v in kV line-line)"""
    if min(v, c_per_km, f, length) < 0:
        raise ValueError("voltage, capacitance, frequency and length must be >= 0")
    return 2.0 * math.pi * f * c_per_km * v**2 * length * 1e-6


def charging_current(v: float, c_per_km: float, f: float, length: float) -> float:
    """[Purpose] Capacitive current I = 2 pi f C' V_phase L in kA"""
    if min(v, c_per_km, f, length) < 0:
        raise ValueError("voltage, capacitance, frequency and length must be >= 0")
    return 2.0 * math.pi * f * c_per_km * 1e-6 * length * (v * 1e3 / math.sqrt(3.0)) * 1e-3


def max_power_transfer(s_rated: float, v: float, c_per_km: float, f: float, length: float) -> float:
    """
    [Purpose] Active power an end-compensated cable can carry, MW
    [Comment] Each end absorbs half the charging: P = sqrt(S^2 - (Q/2)^2), zero beyond the critical length
    """
    if s_rated < 0:
        raise ValueError(f"s_rated must be >= 0, got {s_rated}")
    q_half = cable_charging(v, c_per_km, f, length) / 2.0
    if q_half >= s_rated:
        return 0.0
    return math.sqrt(s_rated**2 - q_half**2)


def critical_length(s_rated: float, v: float, c_per_km: float, f: float) -> float:
    """[Purpose] Length where half the charging equals the rating: L = 2 S / (2 pi f C' V^2), km"""
    per_km = cable_charging(v, c_per_km, f, 1.0)
    if per_km == 0.0:
        return math.inf
    return 2.0 * s_rated / per_km


def transformer_designs() -> List[TransformerDesignSpec]:
    """[Purpose] The four tabulated transformer designs at 16.67 Hz and at 50 Hz"""
    specs = []
    for name, (v1, v2, s, b, j, dv) in TRANSFORMER_DESIGN_PARAMETERS.items():
        for f in (LOW_FREQUENCY, 50.0):
            specs.append(TransformerDesignSpec(
                name=name, v_primary=v1, v_secondary=v2, s_rated=s, f=f, b_max=b, j_max=j, dv_max=dv,
            ))
    return specs


def _raw_geometry(spec: TransformerDesignSpec) -> Dict[str, float]:
    # [Comment] Three-limb core, star-connected windings, square window, 0.3 copper fill
    core_area = spec.dv_max / (4.44 * spec.f * spec.b_max)
    windings = []
    for v_line in (spec.v_primary, spec.v_secondary):
        v_phase = v_line * 1e3 / math.sqrt(3.0)
        if v_phase < spec.dv_max:
            raise ValueError(
                f"{spec.name or 'transformer'}: {v_phase:.0f} V per phase is below one turn of {spec.dv_max} V"
            )
        turns = math.ceil(v_phase / spec.dv_max - 1e-9)
        i_phase = spec.s_rated * 1e6 / (3.0 * v_phase)
        area = i_phase / spec.j_max
        windings.append((turns, area))

    copper_area = sum(n * a for n, a in windings) * 1e-6
    window_area = copper_area / WINDOW_FILL
    window_side = math.sqrt(window_area)
    core_diameter = math.sqrt(4.0 * core_area / math.pi)
    if not (window_side > 0 and core_diameter > 0 and math.isfinite(window_side)):
        raise ValueError(f"{spec.name or 'transformer'}: core window cannot close")

    steel_volume = core_area * (3.0 * window_side + 2.0 * (2.0 * window_side + 3.0 * core_diameter))
    mean_turn = math.pi * (core_diameter + window_side / 2.0)
    copper_volume = 3.0 * copper_area * mean_turn
    return {
        "core_area": core_area,
        "turns_primary": windings[0][0],
        "turns_secondary": windings[1][0],
        "area_primary": windings[0][1],
        "area_secondary": windings[1][1],
        "window_side": window_side,
        "core_diameter": core_diameter,
        "steel": steel_volume * STEEL_DENSITY / 1e3,
        "copper": copper_volume * COPPER_DENSITY / 1e3,
    }


def calibrate_transformer_model(reference: Optional[TransformerDesignSpec] = None,
                                reference_mass: float = REFERENCE_MASS) -> float:
    """
    [Purpose] Single scale constant so the reference design (66/400 kV, 50 Hz) weighs reference_mass tonnes
    [Returns] Dimensionless factor applied to both steel and copper masses
    """
    if reference is None:
        reference = next(s for s in transformer_designs() if s.name == REFERENCE_DESIGN and s.f == 50.0)
    raw = _raw_geometry(reference)
    return reference_mass / (raw["steel"] + raw["copper"])


@lru_cache(maxsize=1)
def calibration_constant() -> float:
    k = calibrate_transformer_model()
    logger.debug(f"Transformer mass calibration constant {k:.4f}")
    return k


def transformer_design(spec: TransformerDesignSpec, scale: Optional[float] = None) -> TransformerDesign:
    """
    [Purpose] Active-material sizing of a core-type transformer
    [Parameters]
    - spec: voltages, rating, frequency and the B/J/dV design limits
    - scale: mass calibration constant; the cached global calibration when omitted
    [Returns] TransformerDesign with core area, turns, masses (t) and cost (MEUR)
    [Errors] ValueError when the geometry is infeasible
    """
    scale = calibration_constant() if scale is None else scale
    raw = _raw_geometry(spec)
    steel = raw["steel"] * scale
    copper = raw["copper"] * scale
    return TransformerDesign(
        spec=spec,
        core_area=raw["core_area"],
        turns_primary=raw["turns_primary"],
        turns_secondary=raw["turns_secondary"],
        conductor_area_primary=raw["area_primary"],
        conductor_area_secondary=raw["area_secondary"],
        window_side=raw["window_side"],
        core_diameter=raw["core_diameter"],
        mass_steel=steel,
        mass_copper=copper,
        cost=(COPPER_PRICE * copper + STEEL_PRICE * steel) * 1e-3,
    )


def published_transformer_cost(name: str, f: float) -> float:
    """[Purpose] Tabulated active-material cost (MEUR) of a named design at 16.67 or 50 Hz"""
    low, nominal = PUBLISHED_TRANSFORMERS[name]["cost"]
    if is_low_frequency(f):
        return low
    if f == 50.0:
        return nominal
    raise ValueError(f"no published transformer cost at {f} Hz")


def transformer_report() -> pd.DataFrame:
    """[Purpose] Computed versus published masses and costs of the four designs at both frequencies"""
    rows = []
    for name in TRANSFORMER_DESIGN_PARAMETERS:
        designs = {}
        for spec in transformer_designs():
            if spec.name == name:
                designs["low" if is_low_frequency(spec.f) else "nominal"] = transformer_design(spec)
        low, nominal = designs["low"], designs["nominal"]
        published = PUBLISHED_TRANSFORMERS[name]
        rows.append({
            "design": name,
            "s_rated_mva": nominal.spec.s_rated,
            "core_area_50hz_m2": nominal.core_area,
            "core_area_16hz_m2": low.core_area,
            "mass_16hz_t": low.mass,
            "mass_50hz_t": nominal.mass,
            "mass_ratio": low.mass / nominal.mass,
            "published_mass_16hz_t": published["mass"][0],
            "published_mass_50hz_t": published["mass"][1],
            "cost_16hz_meur": low.cost,
            "cost_50hz_meur": nominal.cost,
            "published_cost_16hz_meur": published["cost"][0],
            "published_cost_50hz_meur": published["cost"][1],
        })
    return pd.DataFrame(rows)


def cable_loss_pipeline(
    resistances: Optional[Dict[str, float]] = None,
    i_n: float = 1.05,
    utilization: float = 0.5,
    years: int = 20,
    price: float = 30.0,
) -> pd.DataFrame:
    """
    [Purpose] Resistance -> full-load loss -> annual loss -> cost of losses, one row per column label
    [Returns] DataFrame indexed by label with resistance, full_load_loss, annual_loss, loss_cost
    """
    resistances = dict(PUBLISHED_RESISTANCES if resistances is None else resistances)
    rows = {}
    for label, r in resistances.items():
        p = full_load_loss(i_n, r)
        e = annual_energy_loss(p, utilization)
        rows[label] = {
            "resistance": r,
            "full_load_loss": p,
            "annual_loss": e,
            "loss_cost": loss_cost(e, years, price),
        }
    return pd.DataFrame.from_dict(rows, orient="index")


def skin_effect_report(conductor: Optional[ConductorModel] = None,
                       frequencies: Sequence[float] = (0.0, LOW_FREQUENCY, 50.0)) -> pd.DataFrame:
    """[Purpose] Skin depth and Kelvin-model resistance next to the published resistance"""
    conductor = conductor or conductor_from_cable()
    rows = []
    for f in frequencies:
        rows.append({
            "frequency_hz": f,
            "skin_depth_mm": skin_depth(f, conductor) if f > 0 else math.inf,
            "r_ac_model_mohm_km": ac_resistance(conductor, f),
            "r_ac_published_mohm_km": published_resistance(f),
        })
    return pd.DataFrame(rows)


def wind_area(p: float, density: float) -> Dict[str, float]:
    """[Purpose] Sea area (km2) and equivalent circle radius (km) for p GW at density W/m2"""
    if not density > 0:
        raise ValueError(f"density must be > 0, got {density}")
    if p < 0:
        raise ValueError(f"power must be >= 0, got {p}")
    area = p * 1e9 / density / 1e6
    return {"area": area, "radius": math.sqrt(area / math.pi)}


def hub_area_study(powers: Sequence[float] = (4.0, 10.0, 15.0, 36.0), density: float = 6.0) -> pd.DataFrame:
    """[Purpose] wind_area over a range of hub sizes (GW)"""
    rows = []
    for p in powers:
        area = wind_area(p, density)
        rows.append({"power_gw": p, "area_km2": area["area"], "radius_km": area["radius"]})
    return pd.DataFrame(rows)
