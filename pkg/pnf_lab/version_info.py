"""Package version metadata helpers.

Single source of truth for the version string reported by ``--version``, the
startup log line and Sentry releases.
"""

from importlib import metadata
from pathlib import Path
from typing import Iterable


DISTRIBUTION_NAME = "pnf-lab"

VERSION_FILE_CANDIDATES: tuple[Path, ...] = (
    Path(__file__).resolve().parent.parent / "VERSION",
)


def read_app_version(version_file_candidates: Iterable[Path] | None = None) -> str:
    """Resolve the package version.

    The installed distribution metadata wins; a source checkout falls back to
    the first readable VERSION file.

    Args:
        version_file_candidates: Optional ordered candidate paths. If omitted,
            defaults to the repository root VERSION file.

    Returns:
        Version string when found; otherwise ``"unknown"``.
    """
    try:
        return metadata.version(DISTRIBUTION_NAME)
    except metadata.PackageNotFoundError:
        pass

    candidates = version_file_candidates or VERSION_FILE_CANDIDATES
    for candidate in candidates:
        if not candidate.exists():
            continue
        try:
            version = candidate.read_text(encoding="utf-8").strip()
        except OSError:
            continue
        if version:
            return version
    return "unknown"
