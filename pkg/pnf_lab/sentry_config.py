"""Sentry error tracking initialization and configuration.

Provides optional crash reporting when PNF_SENTRY_DSN is set. Quality scores
and histograms are private data, so events are scrubbed of them before they
leave the process.
"""

import logging
from typing import Any, Dict, Optional

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from .version_info import read_app_version


REDACTED = "[REDACTED]"

# Event keys whose values may hold raw scores or histogram contents.
SENSITIVE_KEYS = frozenset(
    {
        "scores",
        "q",
        "values",
        "histogram",
        "counts",
        "labels",
        "scores_text",
        "argv",
    }
)

ENV_KEYS_TO_REDACT = frozenset({"PNF_SENTRY_DSN", "PNF_SETTINGS_PATH"})


def _scrub(mapping: Dict[str, Any]) -> None:
    for key in list(mapping):
        if key in SENSITIVE_KEYS:
            mapping[key] = REDACTED
        elif isinstance(mapping[key], dict):
            _scrub(mapping[key])


def _redact_private_data(
    event: Dict[str, Any], _hint: Dict[str, Any]
) -> Optional[Dict[str, Any]]:
    """Redact score vectors, histogram data and the DSN from Sentry events.

    Args:
        event: Sentry event dictionary to filter
        _hint: Additional context (exception, original_exception) - unused but required by API

    Returns:
        Modified event (or None to drop event)
    """
    extra = event.get("extra")
    if isinstance(extra, dict):
        _scrub(extra)

    contexts = event.get("contexts")
    if isinstance(contexts, dict):
        for context in contexts.values():
            if isinstance(context, dict):
                _scrub(context)
        env = contexts.get("env")
        if isinstance(env, dict):
            for key in ENV_KEYS_TO_REDACT:
                if key in env:
                    env[key] = REDACTED

    for crumb in (event.get("breadcrumbs") or {}).get("values", []):
        data = crumb.get("data")
        if isinstance(data, dict):
            _scrub(data)

    return event


def init_sentry(sentry_dsn: Optional[str]) -> bool:
    """Initialize Sentry SDK for error tracking.

    Args:
        sentry_dsn: Sentry DSN URL (from PNF_SENTRY_DSN). If None or empty,
            Sentry is disabled.

    Returns:
        Whether reporting was enabled.
    """
    if not sentry_dsn:
        return False

    sentry_sdk.init(  # type: ignore[call-arg]
        dsn=sentry_dsn,
        integrations=[
            LoggingIntegration(
                level=logging.WARNING,
                event_level=logging.ERROR,
            ),
        ],
        release=read_app_version(),
        debug=False,
        before_send=_redact_private_data,  # type: ignore[arg-type]
        send_default_pii=False,
        include_local_variables=False,
        environment="cli",
    )
    return True
