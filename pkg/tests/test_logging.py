import json

import structlog

from polychron.core.config import settings
from polychron.core.logging import setup_logging
from polychron.main import EXIT_FAILURE, main


def events(text):
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


class TestSetupLogging:
    def test_json_events_go_to_stderr_with_the_command(self, monkeypatch, capsys):
        monkeypatch.setattr(settings, "log_format", "json")
        setup_logging("INFO", command="train")
        structlog.get_logger().info("Evaluation finished", step=4, val_bpc=3.5)
        captured = capsys.readouterr()
        assert captured.out == ""
        [event] = events(captured.err)
        assert event["event"] == "Evaluation finished"
        assert event["command"] == "train"
        assert event["level"] == "info"
        assert event["val_bpc"] == 3.5

    def test_level_argument_filters(self, monkeypatch, capsys):
        monkeypatch.setattr(settings, "log_format", "json")
        monkeypatch.setattr(settings, "log_level", "DEBUG")
        setup_logging("ERROR")
        structlog.get_logger().warning("Skipped")
        structlog.get_logger().error("Failed")
        assert [event["event"] for event in events(capsys.readouterr().err)] == ["Failed"]

    def test_command_is_not_carried_into_the_next_setup(self, monkeypatch, capsys):
        monkeypatch.setattr(settings, "log_format", "json")
        setup_logging("INFO", command="eval")
        setup_logging("INFO")
        structlog.get_logger().info("Loaded")
        [event] = events(capsys.readouterr().err)
        assert "command" not in event

    def test_cli_failures_name_the_command(self, monkeypatch, capsys, tmp_path):
        monkeypatch.setattr(settings, "log_format", "json")
        args = ["--log-level", "ERROR", "eval", "--ckpt", str(tmp_path / "none.ckpt"), "--data", "x"]
        assert main(args) == EXIT_FAILURE
        failures = [event for event in events(capsys.readouterr().err) if event["level"] == "error"]
        assert failures
        assert all(event["command"] == "eval" for event in failures)
