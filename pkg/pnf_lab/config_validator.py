"""Validation of the merged run configuration."""

import math
from typing import Any, Dict, Optional

from .errors import InvalidArgumentError


OUTPUT_FORMATS = {"json", "csv"}
LIMIT_KEYS = (
    "rejection_max_iterations",
    "lattice_cap",
    "simplex_max_iterations",
    "workers",
)


class ConfigValidationError(InvalidArgumentError):
    """Raised when configuration is invalid."""

    def __init__(self, message: str, hint: Optional[str] = None):
        super().__init__(message, hint=hint)


def _is_integer(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_privacy_config(config: Dict[str, Any]) -> None:
    """Require finite, positive ``epsilon`` and ``delta``.

    Raises:
        ConfigValidationError: If either value is missing or out of range.
    """
    for key, flag in (("epsilon", "--eps"), ("delta", "--delta")):
        value = config.get(key)
        if not _is_real(value) or not math.isfinite(value) or value <= 0:
            message = f"{key} must be a finite number greater than 0, got {value!r}"
            raise ConfigValidationError(
                message,
                hint=f"Pass {flag} with a positive value, e.g. {flag} 1.0",
            )


def validate_output_config(config: Dict[str, Any]) -> None:
    output_format = config.get("output_format")
    if output_format not in OUTPUT_FORMATS:
        message = f"output format must be json or csv, got {output_format!r}"
        raise ConfigValidationError(message, hint="Use --format json or --format csv")

    seed = config.get("seed")
    if not _is_integer(seed) or seed < 0:
        message = f"seed must be a non-negative integer, got {seed!r}"
        raise ConfigValidationError(
            message,
            hint="Pass --seed 0 or set PNF_SEED=0",
        )


def validate_limits_config(config: Dict[str, Any]) -> None:
    for key in LIMIT_KEYS:
        value = config.get(key)
        if not _is_integer(value) or value < 1:
            message = f"{key} must be a positive integer, got {value!r}"
            raise ConfigValidationError(
                message,
                hint=f"Set PNF_{key.upper()} or the limits.{key} setting to a positive integer",
            )


def validate_config(config: Dict[str, Any]) -> None:
    """Validate complete configuration before any computation.

    Raises:
        ConfigValidationError: If any configuration is invalid
    """
    validate_privacy_config(config)
    validate_output_config(config)
    validate_limits_config(config)
