"""
Pytest configuration and shared fixtures.
"""

import logging
import math
import os
import sys
from pathlib import Path

import pytest


# Add the workspace root to path so the package imports from a source checkout
WORKSPACE_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(WORKSPACE_ROOT))

from pnf_lab.scores import PrivacyParams  # noqa: E402


@pytest.fixture
def workspace_root():
    """Return the absolute path to the workspace root."""
    return WORKSPACE_ROOT


@pytest.fixture(autouse=True)
def clean_pnf_env(monkeypatch):
    """Remove PNF_* variables so host settings never leak into a test."""
    for name in [key for key in list(os.environ) if key.startswith("PNF_")]:
        monkeypatch.delenv(name, raising=False)


@pytest.fixture(autouse=True)
def restore_root_logging():
    """Drop the stderr handler configure_logging installs and reset the root level."""
    root = logging.getLogger()
    level = root.level
    yield
    for handler in list(root.handlers):
        if type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture
def unit_params():
    """ε = 1, Δ = 1."""
    return PrivacyParams(1.0, 1.0)


@pytest.fixture
def two_params():
    """ε = 2, Δ = 1, so coins are exp(q_r - q_*)."""
    return PrivacyParams(2.0, 1.0)


@pytest.fixture
def two_candidate_scores():
    """The running two-candidate example (-2, 0)."""
    return (-2.0, 0.0)


@pytest.fixture
def inv_e():
    return math.exp(-1.0)


@pytest.fixture
def histogram_csv(tmp_path):
    """Write a small bin,count CSV and return its path."""
    path = tmp_path / "histogram.csv"
    path.write_text("bin,count\na,3\nb,1\nc,0\n", encoding="utf-8")
    return path
