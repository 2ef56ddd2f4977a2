# [Purpose] Reads, validates and writes run configurations (TOML with unit-suffixed values)
# [Comment] Every problem of a document is reported at once through ConfigError.messages

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Union

# [Library] tomli-w - TOML writer (the standard library only reads TOML)
# [Source] https://github.com/hukkin/tomli-w
import tomli_w

# [Library] Pydantic - ValidationError carries one entry per invalid field
# [Source] https://docs.pydantic.dev/latest/errors/validation_errors/
from pydantic import ValidationError

from src.models.schemas import RunConfig
from src.utils.errors import ConfigError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# [Comment] Values that are engineering choices rather than published data; print-defaults flags them
ENGINEERING_CHOICES: Dict[str, Dict[str, str]] = {
    "network": {
        "farm_rating": "engineering choice: 700 MVA is the alternative rating",
        "section_length": "engineering choice: pi-section discretization",
        "cable_c_per_km": "typical 220 kV XLPE value",
        "cable_l_per_km": "typical 220 kV XLPE value",
    },
    "devices.gfm": {
        "droop_mp": "calibrated once, then frozen (keeps offshore |df| below 0.07 Hz)",
        "r_v": "engineering choice: virtual resistance",
        "x_v": "engineering choice: virtual reactance",
        "l_f": "engineering choice: filter sizing",
        "c_f": "engineering choice: filter sizing",
    },
    "devices.gfl": {
        "k_f": "calibrated once, then frozen",
        "pll_bandwidth": "engineering choice: PLL tuning",
        "current_bandwidth": "engineering choice: inner current loop",
        "g_ad": "engineering choice: active damping",
    },
    "devices.sc": {
        "h": "calibrated once, then frozen",
        "k_a": "engineering choice: AVR gain",
    },
    "devices.hvdc": {
        "h_dc": "engineering choice: DC capacitor energy",
        "k_p": "engineering choice: DC voltage controller",
        "k_i": "engineering choice: DC voltage controller",
    },
    "devices.onshore": {
        "rating": "engineering choice: onshore area size",
        "h": "engineering choice: onshore area inertia",
    },
    "devices.central": {
        "k_c": "calibrated once, then frozen",
    },
    "solver": {
        "mismatch_eps": "engineering choice: negligible EMT/phasor difference",
        "band_v": "engineering choice: voltage settling band",
        "band_f": "engineering choice: frequency settling band",
    },
}


def _format_error(error: Dict[str, Any]) -> str:
    location = ".".join(str(part) for part in error.get("loc", ())) or "config"
    if error.get("type") == "extra_forbidden":
        return f"{location}: unknown key"
    message = str(error.get("msg", "invalid value"))
    message = message.removeprefix("Value error, ")
    return f"{location}: {message}"


def validation_messages(exc: ValidationError) -> List[str]:
    return [_format_error(error) for error in exc.errors()]


def parse_config(text: str) -> RunConfig:
    """
    [Purpose] Parses and validates a run configuration document
    [Parameters]
    - text: TOML with [network], [devices.*], [scenario], [solver] and [tco] tables; empty means all defaults
    [Returns] RunConfig
    [Errors] ConfigError listing every syntax, unknown-key, unit, constraint and cross-reference problem
    [Usage]
    cfg = parse_config('[scenario]\\nname = "s1-power-request"\\ninertia = "low"\\n')
    """
    try:
        document = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    try:
        config = RunConfig.model_validate(document)
    except ValidationError as exc:
        messages = validation_messages(exc)
        logger.error(f"Configuration rejected with {len(messages)} problem(s)")
        raise ConfigError(messages) from exc
    logger.debug(f"Configuration parsed: scenario {config.scenario.name}, {config.scenario.inertia} inertia")
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """[Errors] ConfigError for unreadable files as well as invalid content"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError([f"{path}: {message}" for message in exc.messages]) from exc


def _drop_none(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _drop_none(item) for key, item in value.items() if item is not None}
    return value


def serialize_config(config: RunConfig) -> str:
    """
    [Purpose] Canonical TOML of a configuration; dimensioned values are written in their canonical unit
    [Comment] Unset optional keys are omitted, so parse_config(serialize_config(c)) == c
    """
    return tomli_w.dumps(_drop_none(config.model_dump(mode="json")))


def annotated_defaults() -> str:
    """[Purpose] Default configuration with comments on the values that are engineering choices"""
    lines = ["# Default run configuration (every key may be overridden)", ""]
    table = ""
    for line in serialize_config(RunConfig()).splitlines():
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            table = stripped.strip("[]")
        elif "=" in stripped:
            key = stripped.split("=", 1)[0].strip()
            note = ENGINEERING_CHOICES.get(table, {}).get(key)
            if note:
                line = f"{line}  # {note}"
        lines.append(line)
    return "\n".join(lines) + "\n"
