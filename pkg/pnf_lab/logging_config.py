"""Logging configuration helpers.

Logs always go to stderr; stdout is reserved for results.
"""

import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone
from typing import Any, Dict, Optional

import numpy as np
import scipy

from .version_info import read_app_version


DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_LOG_FORMAT = "text"
LOG_FORMATS = ("text", "json")


class ISO8601Formatter(logging.Formatter):
    """Formatter with ISO-8601 timestamps."""

    def formatTime(self, record: logging.LogRecord, datefmt: Optional[str] = None) -> str:
        dt = datetime.fromtimestamp(record.created, tz=timezone.utc).astimezone()
        if datefmt:
            return dt.strftime(datefmt)
        return dt.isoformat(timespec="milliseconds")


# Standard LogRecord attribute names, excluded from structured `extra` passthrough
# so that only user-supplied extra={} fields are forwarded into JSON output.
_STDLIB_LOG_RECORD_KEYS = frozenset(
    {
        "name",
        "msg",
        "args",
        "levelname",
        "levelno",
        "pathname",
        "filename",
        "module",
        "exc_info",
        "exc_text",
        "stack_info",
        "lineno",
        "funcName",
        "created",
        "msecs",
        "relativeCreated",
        "thread",
        "threadName",
        "processName",
        "process",
        "message",
        "asctime",
        "taskName",
    }
)


class JSONFormatter(ISO8601Formatter):
    """One JSON object per line."""

    def __init__(self, include_identifiers: bool = False) -> None:
        super().__init__()
        self.include_identifiers = include_identifiers

    def format(self, record: logging.LogRecord) -> str:
        payload: Dict[str, Any] = {
            "timestamp": self.formatTime(record),
            "severity": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if self.include_identifiers:
            payload["process"] = record.process
            payload["thread"] = record.thread

        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)

        for key, value in record.__dict__.items():
            if key not in _STDLIB_LOG_RECORD_KEYS and not key.startswith("_"):
                payload[key] = value

        return json.dumps(payload, ensure_ascii=False, default=str)


class TextFormatter(ISO8601Formatter):
    """Human-readable formatter."""

    def __init__(self, include_identifiers: bool = False) -> None:
        template = "%(asctime)s %(levelname)s %(name)s: %(message)s"
        if include_identifiers:
            template = (
                "%(asctime)s %(levelname)s %(name)s [pid=%(process)d tid=%(thread)d]: %(message)s"
            )
        super().__init__(fmt=template)


def parse_bool(raw_value: Optional[str]) -> bool:
    if raw_value is None:
        return False
    return raw_value.strip().lower() in {"1", "true", "yes", "on"}


def configure_logging(
    level: Optional[str] = None,
    log_format: Optional[str] = None,
    include_identifiers: Optional[bool] = None,
) -> None:
    """Configure root logging; unset arguments come from the environment.

    Supported env vars:
    - PNF_LOG_LEVEL: Python logging level (default: INFO)
    - PNF_LOG_FORMAT: text|json (default: text)
    - PNF_LOG_INCLUDE_IDENTIFIERS: true/false for process/thread ids (default: false)
    """
    raw_level = (level or os.environ.get("PNF_LOG_LEVEL") or DEFAULT_LOG_LEVEL).strip().upper()
    resolved_level = logging.getLevelName(raw_level)
    if not isinstance(resolved_level, int):
        resolved_level = logging.INFO

    resolved_format = (
        (log_format or os.environ.get("PNF_LOG_FORMAT") or DEFAULT_LOG_FORMAT).strip().lower()
    )
    if include_identifiers is None:
        include_identifiers = parse_bool(os.environ.get("PNF_LOG_INCLUDE_IDENTIFIERS", "false"))

    if resolved_format == "json":
        formatter: logging.Formatter = JSONFormatter(include_identifiers=include_identifiers)
    else:
        formatter = TextFormatter(include_identifiers=include_identifiers)

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.handlers.clear()
    root_logger.setLevel(resolved_level)
    root_logger.addHandler(handler)


def log_runtime_info() -> None:
    """Log the package and numerical stack versions.

    INFO level: one summary line.
    DEBUG level: interpreter details and numpy build configuration.
    """
    logger = logging.getLogger(__name__)
    version = read_app_version()
    logger.info(
        "pnf-lab runtime: version=%s numpy=%s scipy=%s python=%s",
        version,
        np.__version__,
        scipy.__version__,
        platform.python_version(),
    )
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("Python executable: %s", sys.executable)
        logger.debug("Platform: %s", platform.platform())
        logger.debug("Float info: %s", np.finfo(np.float64))
