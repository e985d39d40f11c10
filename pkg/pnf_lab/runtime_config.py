"""Layered run configuration.

Precedence (high to low):
1. Command-line flags
2. Explicit ``PNF_*`` environment variables
3. The YAML settings file (``--config`` or ``PNF_SETTINGS_PATH``)
4. Built-in defaults
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .config_validator import validate_config
from .errors import InvalidArgumentError
from .lattice import DEFAULT_LATTICE_CAP
from .logging_config import parse_bool
from .mechanisms import DEFAULT_REJECTION_MAX_ITERATIONS
from .simplex import DEFAULT_MAX_ITERATIONS


logger = logging.getLogger(__name__)

DEFAULT_SEED = 0

DEFAULTS: Dict[str, Any] = {
    "epsilon": 1.0,
    "delta": 1.0,
    "monotonic_quality": False,
    "seed": DEFAULT_SEED,
    "output_format": "json",
    "rejection_max_iterations": DEFAULT_REJECTION_MAX_ITERATIONS,
    "lattice_cap": DEFAULT_LATTICE_CAP,
    "simplex_max_iterations": DEFAULT_MAX_ITERATIONS,
    "workers": 1,
    "log_level": "INFO",
    "log_format": "text",
    "log_include_identifiers": False,
    "settings_path": "",
    "sentry_dsn": "",
}

EDITABLE_ENV_TO_CONFIG_KEY = {
    "PNF_SEED": "seed",
    "PNF_OUTPUT_FORMAT": "output_format",
    "PNF_REJECTION_MAX_ITERATIONS": "rejection_max_iterations",
    "PNF_LATTICE_CAP": "lattice_cap",
    "PNF_SIMPLEX_MAX_ITERATIONS": "simplex_max_iterations",
    "PNF_WORKERS": "workers",
    "PNF_LOG_LEVEL": "log_level",
    "PNF_LOG_FORMAT": "log_format",
    "PNF_LOG_INCLUDE_IDENTIFIERS": "log_include_identifiers",
}

# section -> key -> (config key, accepted types)
SETTINGS_SCHEMA: Dict[str, Dict[str, tuple]] = {
    "privacy": {
        "epsilon": ("epsilon", (int, float)),
        "delta": ("delta", (int, float)),
        "monotonic_quality": ("monotonic_quality", (bool,)),
    },
    "output": {
        "format": ("output_format", (str,)),
        "seed": ("seed", (int,)),
    },
    "limits": {
        "rejection_max_iterations": ("rejection_max_iterations", (int,)),
        "lattice_cap": ("lattice_cap", (int,)),
        "simplex_max_iterations": ("simplex_max_iterations", (int,)),
        "workers": ("workers", (int,)),
    },
    "logging": {
        "log_level": ("log_level", (str,)),
        "log_format": ("log_format", (str,)),
        "log_include_identifiers": ("log_include_identifiers", (bool,)),
    },
}


class SettingsValidationError(InvalidArgumentError):
    """Raised when the YAML settings file is unreadable or malformed."""


def _env_int(name: str, default: int, minimum: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Invalid %s value '%s', using default %s", name, raw, default)
        return default
    if value < minimum:
        logger.warning("Invalid %s range '%s', using default %s", name, raw, default)
        return default
    return value


def _load_output_config() -> Dict[str, Any]:
    """Load seed and output format.

    Env vars:
    - PNF_SEED: non-negative integer (default: 0)
    - PNF_OUTPUT_FORMAT: json|csv (default: json)
    """
    output_format = (os.environ.get("PNF_OUTPUT_FORMAT") or "json").strip().lower()
    if output_format not in {"json", "csv"}:
        logger.warning("Invalid PNF_OUTPUT_FORMAT value '%s', using default json", output_format)
        output_format = "json"
    return {
        "seed": _env_int("PNF_SEED", DEFAULT_SEED, 0),
        "output_format": output_format,
    }


def _load_limits_config() -> Dict[str, Any]:
    return {
        "rejection_max_iterations": _env_int(
            "PNF_REJECTION_MAX_ITERATIONS", DEFAULTS["rejection_max_iterations"], 1
        ),
        "lattice_cap": _env_int("PNF_LATTICE_CAP", DEFAULTS["lattice_cap"], 1),
        "simplex_max_iterations": _env_int(
            "PNF_SIMPLEX_MAX_ITERATIONS", DEFAULTS["simplex_max_iterations"], 1
        ),
        "workers": _env_int("PNF_WORKERS", DEFAULTS["workers"], 1),
    }


def _load_logging_config() -> Dict[str, Any]:
    """Load logging configuration.

    Env vars:
    - PNF_LOG_LEVEL: Python logging level (default: INFO)
    - PNF_LOG_FORMAT: text|json (default: text)
    - PNF_LOG_INCLUDE_IDENTIFIERS: true/false for process/thread IDs (default: false)
    """
    return {
        "log_level": os.environ.get("PNF_LOG_LEVEL", "INFO"),
        "log_format": os.environ.get("PNF_LOG_FORMAT", "text"),
        "log_include_identifiers": parse_bool(
            os.environ.get("PNF_LOG_INCLUDE_IDENTIFIERS", "false")
        ),
    }


def load_env_config() -> Dict[str, Any]:
    """Load all configuration from environment variables over the defaults.

    Invalid values fall back to documented defaults without raising.
    """
    config = dict(DEFAULTS)
    config.update(_load_output_config())
    config.update(_load_limits_config())
    config.update(_load_logging_config())
    config["settings_path"] = os.environ.get("PNF_SETTINGS_PATH", "").strip()
    config["sentry_dsn"] = os.environ.get("PNF_SENTRY_DSN", "").strip()
    return config


def _type_name(types: tuple) -> str:
    return " or ".join(t.__name__ for t in types)


def load_settings_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML settings file into flat config keys.

    Raises:
        SettingsValidationError: Unreadable file, invalid YAML, unknown
            sections or keys, or values of the wrong type.
    """
    settings_path = Path(path)
    try:
        raw = yaml.safe_load(settings_path.read_text(encoding="utf-8"))
    except OSError as exc:
        message = f"Could not read settings file '{settings_path}': {exc.strerror or exc}"
        raise SettingsValidationError(message, hint="Check the --config path") from exc
    except yaml.YAMLError as exc:
        message = f"Settings file '{settings_path}' is not valid YAML: {exc}"
        raise SettingsValidationError(message) from exc

    if raw is None:
        return {}
    if not isinstance(raw, dict):
        message = f"Settings file '{settings_path}' must contain a mapping"
        raise SettingsValidationError(message)

    flat: Dict[str, Any] = {}
    for section, values in raw.items():
        if section not in SETTINGS_SCHEMA:
            message = f"Unknown settings section '{section}'"
            raise SettingsValidationError(
                message, hint=f"Known sections: {', '.join(SETTINGS_SCHEMA)}"
            )
        if not isinstance(values, dict):
            message = f"Settings section '{section}' must be a mapping"
            raise SettingsValidationError(message)
        for key, value in values.items():
            if key not in SETTINGS_SCHEMA[section]:
                message = f"Unknown setting '{section}.{key}'"
                raise SettingsValidationError(message)
            config_key, types = SETTINGS_SCHEMA[section][key]
            if (bool not in types and isinstance(value, bool)) or not isinstance(value, types):
                message = (
                    f"Setting '{section}.{key}' must be {_type_name(types)}, "
                    f"got {type(value).__name__}"
                )
                raise SettingsValidationError(message)
            flat[config_key] = float(value) if float in types else value
    return flat


def _collect_explicit_editable_env_vars() -> set[str]:
    return {env_var for env_var in EDITABLE_ENV_TO_CONFIG_KEY if env_var in os.environ}


def merge_config_with_settings(
    env_config: Dict[str, Any],
    settings: Dict[str, Any],
    explicit_env_vars: Optional[set[str]] = None,
) -> Dict[str, Any]:
    """Apply file settings wherever no explicit environment variable is set."""
    explicit = (
        explicit_env_vars
        if explicit_env_vars is not None
        else _collect_explicit_editable_env_vars()
    )
    locked = {EDITABLE_ENV_TO_CONFIG_KEY[name] for name in explicit}
    merged = dict(env_config)
    for key, value in settings.items():
        if key not in locked:
            merged[key] = value
    return merged


def resolve_config(
    overrides: Optional[Dict[str, Any]] = None,
    settings_path: Optional[Union[str, Path]] = None,
) -> Dict[str, Any]:
    """Build and validate the effective configuration for one run.

    ``overrides`` holds command-line values; ``None`` entries are ignored.
    """
    env_config = load_env_config()
    path = settings_path or env_config.get("settings_path")
    settings = load_settings_file(path) if path else {}
    merged = merge_config_with_settings(env_config, settings)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    validate_config(merged)
    return merged
