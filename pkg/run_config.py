"""
Run configuration for dpsrate

Settings come from three places, later ones winning: built-in defaults, a
plain-text key=value file, and command-line flags. The file is taken from the
--config flag or, failing that, from the DPSRATE_CONFIG environment variable.
"""
import logging
import os
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional

from model import DpsRateError

logger = logging.getLogger(__name__)

VERSION = "0.1.0"
CONFIG_ENV_VAR = "DPSRATE_CONFIG"


class ConfigError(DpsRateError, ValueError):
    """Unreadable config file, unknown key or unparsable value"""


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text}")


def _labels(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


# Keys accepted in config files and the parser for each value
CONFIG_KEYS: Dict[str, Callable[[str], Any]] = {
    "loss_db": float,
    "transmission": float,
    "dark_count": float,
    "baseline_error": float,
    "nbar": float,
    "source": str,
    "protocol": str,
    "protocols": _labels,
    "f_ec": str,
    "loss_min": float,
    "loss_max": float,
    "loss_step": float,
    "pulses": int,
    "attack": str,
    "k": int,
    "eps_s": float,
    "intercept_fraction": float,
    "seed": int,
    "grid_points": int,
    "e_tol": float,
    "workers": int,
    "integer_k": _bool,
}


def config_path(cli_path: Optional[str] = None) -> Optional[str]:
    """Resolve which config file applies, if any

    Returns:
        str or None: the --config path, else $DPSRATE_CONFIG, else None
    """
    if cli_path:
        return cli_path
    env_path = os.environ.get(CONFIG_ENV_VAR)
    if env_path:
        logger.debug("using config file from %s: %s", CONFIG_ENV_VAR, env_path)
        return env_path
    return None


def parse_config(lines: Iterable[str], source: str = "<config>") -> Dict[str, Any]:
    """Parse key=value lines; blank lines and # comments are skipped"""
    values: Dict[str, Any] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected key=value, got '{raw.strip()}'")
        key, text = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{number}: unknown key '{key}'")
        try:
            values[key] = CONFIG_KEYS[key](text)
        except ValueError as e:
            raise ConfigError(f"{source}:{number}: bad value for {key}: {e}") from e
    return values


def load_config(path: Optional[str]) -> Dict[str, Any]:
    """Read a config file; no path means no settings"""
    if not path:
        return {}
    try:
        with open(path, "r") as f:
            values = parse_config(f, source=path)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    logger.info("loaded %d settings from %s", len(values), path)
    return values


def resolved_parameters(defaults: Mapping[str, Any], file_values: Mapping[str, Any],
            flag_values: Mapping[str, Any]) -> Dict[str, Any]:
    """Merge defaults < file < flags; flags left at None do not override"""
    merged = dict(defaults)
    merged.update(file_values)
    merged.update({key: value for key, value in flag_values.items() if value is not None})
    return merged


def header_lines(command: str, parameters: Mapping[str, Any], columns: Iterable[str]) -> List[str]:
    """Comment lines that open every emitted file: version, parameters, schema"""
    lines = [f"# dpsrate {VERSION} {command}"]
    for key in sorted(parameters):
        value = parameters[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"# {key}={value}")
    lines.append("# columns: " + ",".join(columns))
    return lines
