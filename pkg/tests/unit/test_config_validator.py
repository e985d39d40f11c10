"""Unit tests for run configuration validation."""

import math

import pytest

from pnf_lab.config_validator import (
    ConfigValidationError,
    validate_config,
    validate_limits_config,
    validate_output_config,
    validate_privacy_config,
)
from pnf_lab.runtime_config import DEFAULTS


@pytest.fixture
def valid_config() -> dict[str, object]:
    """Return the built-in defaults, which must validate."""
    return dict(DEFAULTS)


def test_defaults_are_valid(valid_config: dict[str, object]) -> None:
    validate_config(valid_config)


@pytest.mark.parametrize("key", ["epsilon", "delta"])
@pytest.mark.parametrize("value", [0, -1.5, math.inf, math.nan, "1", True, None])
def test_validate_privacy_config_rejects_bad_values(
    valid_config: dict[str, object], key: str, value: object
) -> None:
    """validate_privacy_config requires finite positive reals."""
    config = dict(valid_config)
    config[key] = value

    with pytest.raises(ConfigValidationError) as exc_info:
        validate_privacy_config(config)

    assert key in str(exc_info.value)
    assert exc_info.value.hint is not None


@pytest.mark.parametrize(
    ("key", "value"),
    [("output_format", "xml"), ("seed", -1), ("seed", 1.0), ("seed", False)],
)
def test_validate_output_config_rejects_bad_values(
    valid_config: dict[str, object], key: str, value: object
) -> None:
    config = dict(valid_config)
    config[key] = value

    with pytest.raises(ConfigValidationError):
        validate_output_config(config)


@pytest.mark.parametrize("key", ["rejection_max_iterations", "lattice_cap", "workers"])
def test_validate_limits_config_requires_positive_integers(
    valid_config: dict[str, object], key: str
) -> None:
    config = dict(valid_config)
    config[key] = 0

    with pytest.raises(ConfigValidationError) as exc_info:
        validate_limits_config(config)

    assert f"PNF_{key.upper()}" in exc_info.value.hint


def test_config_validation_error_is_an_input_error() -> None:
    assert ConfigValidationError("bad").exit_code == 2
