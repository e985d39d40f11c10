"""Tests for version resolution."""

from importlib import metadata

import pytest

from pnf_lab import version_info


@pytest.fixture
def no_distribution(monkeypatch):
    def missing(_name):
        raise metadata.PackageNotFoundError(_name)

    monkeypatch.setattr(version_info.metadata, "version", missing)


def test_installed_metadata_wins(monkeypatch):
    monkeypatch.setattr(version_info.metadata, "version", lambda _name: "9.9.9")
    assert version_info.read_app_version() == "9.9.9"


def test_version_file_fallback(no_distribution, tmp_path):
    missing = tmp_path / "missing"
    empty = tmp_path / "EMPTY"
    empty.write_text("\n", encoding="utf-8")
    present = tmp_path / "VERSION"
    present.write_text("0.4.0\n", encoding="utf-8")

    assert version_info.read_app_version([missing, empty, present]) == "0.4.0"


def test_unknown_without_sources(no_distribution, tmp_path):
    assert version_info.read_app_version([tmp_path / "nope"]) == "unknown"


def test_repository_version_file(no_distribution, workspace_root):
    expected = (workspace_root / "VERSION").read_text(encoding="utf-8").strip()
    assert version_info.read_app_version() == expected
