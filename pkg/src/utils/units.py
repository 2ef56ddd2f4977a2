# [Purpose] Unit-suffixed quantities used in run configurations ("25 km", "100 us")
# [Comment] Each dimension has one canonical unit; parsing converts to it and formatting writes it

import re
from typing import Annotated, Dict, Tuple

# [Library] Pydantic - validators and serializers attached to annotated field types
# [Source] https://docs.pydantic.dev/latest/concepts/types/#composing-types-via-annotated
from pydantic import BeforeValidator, PlainSerializer

# [Comment] dimension -> (canonical unit, {accepted unit: factor to canonical})
DIMENSIONS: Dict[str, Tuple[str, Dict[str, float]]] = {
    "length": ("km", {"km": 1.0, "m": 1e-3}),
    "time": ("s", {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6}),
    "frequency": ("Hz", {"Hz": 1.0, "kHz": 1e3}),
    "power": ("MW", {"MW": 1.0, "GW": 1e3, "kW": 1e-3}),
    "apparent_power": ("MVA", {"MVA": 1.0, "GVA": 1e3, "kVA": 1e-3}),
    "reactive_power": ("MVAr", {"MVAr": 1.0, "Mvar": 1.0}),
    "voltage": ("kV", {"kV": 1.0, "V": 1e-3}),
    "current": ("kA", {"kA": 1.0, "A": 1e-3}),
    "area": ("mm2", {"mm2": 1.0, "mm²": 1.0}),
    "diameter": ("mm", {"mm": 1.0, "m": 1e3}),
    "capacitance_per_length": ("uF/km", {"uF/km": 1.0, "µF/km": 1.0, "nF/km": 1e-3}),
    "inductance_per_length": ("mH/km", {"mH/km": 1.0, "uH/km": 1e-3}),
    "resistance_per_length": ("mOhm/km", {"mOhm/km": 1.0, "Ohm/km": 1e3}),
    "money": ("MEUR", {"MEUR": 1.0, "kEUR": 1e-3, "EUR": 1e-6}),
    "money_per_length": ("MEUR/km", {"MEUR/km": 1.0, "kEUR/km": 1e-3}),
    "energy_price": ("EUR/MWh", {"EUR/MWh": 1.0}),
    "power_density": ("W/m2", {"W/m2": 1.0, "W/m²": 1.0}),
    "flux_density": ("T", {"T": 1.0}),
    "current_density": ("A/mm2", {"A/mm2": 1.0, "A/mm²": 1.0}),
    "volts_per_turn": ("V/turn", {"V/turn": 1.0}),
    "angular_rate": ("rad/s", {"rad/s": 1.0}),
}

_QUANTITY_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


def parse_quantity(text, dimension: str) -> float:
    """
    [Purpose] Converts "12.5 km" into a float in the dimension's canonical unit
    [Errors] ValueError when the unit is missing, unknown or of another dimension
    """
    canonical, accepted = DIMENSIONS[dimension]
    if isinstance(text, bool) or not isinstance(text, str):
        raise ValueError(
            f"expected a {dimension} with unit (e.g. '1 {canonical}'), got bare value {text!r}"
        )
    match = _QUANTITY_RE.match(text)
    if match is None:
        raise ValueError(f"cannot read {text!r} as a {dimension} (expected '<number> <unit>')")
    number, unit = match.group(1), match.group(2)
    if unit not in accepted:
        allowed = ", ".join(sorted(accepted))
        raise ValueError(f"unit {unit!r} is not a {dimension} unit (allowed: {allowed})")
    return float(number) * accepted[unit]


def format_quantity(value: float, dimension: str) -> str:
    """[Purpose] Writes a canonical-unit value so that parse_quantity returns it exactly"""
    canonical, _ = DIMENSIONS[dimension]
    return f"{float(value)!r} {canonical}"


def quantity(dimension: str):
    """
    [Purpose] Annotated float type for pydantic fields that carry a unit in configuration text
    [Comment] Validation parses "<number> <unit>"; serialization writes the canonical unit
    [Usage]
    Length = quantity("length")
    class Section(BaseModel):
        distance: Length = 25.0
    """
    if dimension not in DIMENSIONS:
        raise KeyError(f"unknown dimension '{dimension}'")
    return Annotated[
        float,
        BeforeValidator(lambda v: parse_quantity(v, dimension)),
        PlainSerializer(lambda v: format_quantity(v, dimension), return_type=str),
    ]


Length = quantity("length")
Time = quantity("time")
Frequency = quantity("frequency")
Power = quantity("power")
ApparentPower = quantity("apparent_power")
Voltage = quantity("voltage")
AngularRate = quantity("angular_rate")
CapacitancePerLength = quantity("capacitance_per_length")
InductancePerLength = quantity("inductance_per_length")
ResistancePerLength = quantity("resistance_per_length")
Money = quantity("money")
MoneyPerLength = quantity("money_per_length")
EnergyPrice = quantity("energy_price")
PowerDensity = quantity("power_density")
