#!/usr/bin/env python3
"""
Tests for the diagnostics reporter and log level resolution.
"""

import json
import sys
from pathlib import Path

from loguru import logger

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from utils.diagnostics import DiagnosticsReporter, diagnostics, log_event
from utils.logging_config import get_logger, resolve_log_level


def test_counts_accumulate_per_event():
    reporter = DiagnosticsReporter()
    reporter.record("rollout_failure", "three rollouts left the map", count=3)
    reporter.record("rollout_failure", count=2)
    reporter.record("outlier_rejected")
    reporter.record("outlier_rejected", count=0)
    assert reporter.count("rollout_failure") == 5
    assert reporter.count("outlier_rejected") == 1
    assert reporter.count("track_departure") == 0


def test_summary_orders_by_severity_and_recommends_fixes():
    reporter = DiagnosticsReporter()
    reporter.record("rollout_failure", count=10)
    reporter.record("all_rollouts_failed")
    reporter.record("mystery_event")

    summary = reporter.generate_summary()
    assert summary["total_events"] == 12
    events = summary["event_summaries"]
    assert events[0]["event_type"] == "all_rollouts_failed"
    assert events[0]["severity"] == "critical"
    mystery = next(e for e in events if e["event_type"] == "mystery_event")
    assert mystery["category"] == "system"
    assert summary["category_breakdown"]["control"] == 11
    assert any(r.startswith("all_rollouts_failed") for r in summary["recommendations"])


def test_records_are_capped_but_counts_are_not():
    reporter = DiagnosticsReporter(max_records=3)
    for _ in range(10):
        reporter.record("terrain_fringe_query")
    assert len(reporter.records) == 3
    assert reporter.count("terrain_fringe_query") == 10


def test_report_is_written_as_json(tmp_path):
    reporter = DiagnosticsReporter()
    reporter.record("gain_breakdown_reset", "dbeta head", context={"head": "dbeta"})
    path = reporter.save_report(tmp_path / "reports" / "diagnostics.json")
    data = json.loads(path.read_text())
    assert data["total_events"] == 1
    assert data["event_summaries"][0]["category"] == "learning"

    reporter.reset()
    assert reporter.generate_summary()["summary"] == "No events recorded"


def test_global_reporter_is_reset_between_tests():
    assert diagnostics.count("track_departure") == 0
    log_event("track_departure", "test")
    assert diagnostics.count("track_departure") == 1


def test_log_level_resolution(monkeypatch):
    assert resolve_log_level("debug") == "DEBUG"
    monkeypatch.setenv("NPTRACK_LOG_LEVEL", "warning")
    assert resolve_log_level() == "WARNING"
    monkeypatch.delenv("NPTRACK_LOG_LEVEL")
    assert resolve_log_level() in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}


def test_get_logger_binds_the_module_name():
    names = []
    sink = logger.add(lambda message: names.append(message.record["extra"].get("name")), level="INFO")
    try:
        get_logger("terrain.grid").info("bound")
    finally:
        logger.remove(sink)
    assert names == ["terrain.grid"]
