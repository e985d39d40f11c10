"""Tests for the optional Sentry error reporting."""

from unittest import mock

import pytest


class TestSentryIntegration:
    """Test Sentry error tracking initialization and behavior."""

    def test_sentry_skips_init_when_dsn_missing(self):
        """Sentry should skip SDK initialization when DSN is empty or None."""
        from pnf_lab.sentry_config import init_sentry

        with mock.patch("sentry_sdk.init") as mock_init:
            assert init_sentry("") is False
            assert init_sentry(None) is False
            mock_init.assert_not_called()

    def test_sentry_initializes_with_valid_dsn(self):
        """Sentry should initialize the SDK without PII or local variables."""
        from pnf_lab.sentry_config import init_sentry

        test_dsn = "https://test-key@o0.ingest.sentry.io/0"

        with mock.patch("sentry_sdk.init") as mock_init:
            assert init_sentry(test_dsn) is True

            mock_init.assert_called_once()
            call_kwargs = mock_init.call_args[1]
            assert call_kwargs["dsn"] == test_dsn
            assert "integrations" in call_kwargs
            assert "before_send" in call_kwargs
            assert "release" in call_kwargs
            assert call_kwargs["send_default_pii"] is False
            assert call_kwargs["include_local_variables"] is False
            assert call_kwargs["environment"] == "cli"

    def test_sentry_redacts_scores_and_histograms(self):
        """Score vectors, histogram data and the DSN should be redacted from events."""
        from pnf_lab.sentry_config import _redact_private_data

        event = {
            "extra": {
                "scores": [-2.0, 0.0],
                "nested": {"histogram": {"a": 3}, "epsilon": 1.0},
                "command": "analyze",
            },
            "contexts": {
                "env": {
                    "PNF_SENTRY_DSN": "https://secret@example.com/1",
                    "PNF_SETTINGS_PATH": "/home/user/private.yaml",
                    "PNF_SEED": "7",
                },
                "run": {"counts": [1, 2, 3]},
            },
            "breadcrumbs": {
                "values": [
                    {"category": "log", "data": {"q": [0.0, -1.0], "n": 2}},
                    {"category": "log"},
                ]
            },
        }

        filtered = _redact_private_data(event, {})

        assert filtered["extra"]["scores"] == "[REDACTED]"
        assert filtered["extra"]["nested"]["histogram"] == "[REDACTED]"
        assert filtered["extra"]["nested"]["epsilon"] == 1.0
        assert filtered["extra"]["command"] == "analyze"
        assert filtered["contexts"]["env"]["PNF_SENTRY_DSN"] == "[REDACTED]"
        assert filtered["contexts"]["env"]["PNF_SETTINGS_PATH"] == "[REDACTED]"
        assert filtered["contexts"]["env"]["PNF_SEED"] == "7"
        assert filtered["contexts"]["run"]["counts"] == "[REDACTED]"
        assert filtered["breadcrumbs"]["values"][0]["data"] == {"q": "[REDACTED]", "n": 2}

    @pytest.mark.parametrize("event", [{}, {"extra": "text"}, {"breadcrumbs": None}])
    def test_sentry_redaction_handles_sparse_events(self, event):
        """The redaction hook should pass through events without the usual sections."""
        from pnf_lab.sentry_config import _redact_private_data

        assert _redact_private_data(event, {}) == event

    def test_sentry_release_uses_version(self):
        """release= should carry the resolved package version."""
        from pnf_lab import sentry_config

        with (
            mock.patch.object(sentry_config, "read_app_version", return_value="1.2.3"),
            mock.patch("sentry_sdk.init") as mock_init,
        ):
            sentry_config.init_sentry("https://test-key@o0.ingest.sentry.io/0")
            assert mock_init.call_args[1]["release"] == "1.2.3"
