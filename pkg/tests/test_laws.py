"""Tests for choreo.laws: running law checks and recording their findings."""

# pylint: disable=redefined-outer-name
from __future__ import annotations

import json
import logging
import threading

import pytest

from choreo import laws
from choreo.laws import LawCheck, run_checks, log_findings
from choreo.errors import PulseError
from choreo.category import Diagram, Finding, LawReport

# ---------- helpers ----------


def _report(*subjects: str, severity: str = "violation") -> LawReport:
    return LawReport(tuple(Finding(Diagram.D1, "identity", s, severity=severity) for s in subjects))


# ---------- run_checks ----------


@pytest.mark.parametrize("parallel", [False, True])
def test_run_checks_merges_in_submission_order(parallel) -> None:
    checks = [
        LawCheck("first", Diagram.D1, lambda: _report("a", "b")),
        LawCheck("second", Diagram.D7, lambda: _report("c", severity="note")),
        LawCheck("third", Diagram.D1, LawReport),
    ]
    report = run_checks(checks, parallel=parallel, workers=3)
    assert [f.subject for f in report.findings] == ["a", "b", "c"]
    assert len(report.violations) == 2 and len(report.notes) == 1


def test_run_checks_order_does_not_depend_on_completion() -> None:
    """The first check finishes last, its findings still come first."""
    second_done = threading.Event()

    def slow() -> LawReport:
        assert second_done.wait(timeout=10)
        return _report("slow")

    def fast() -> LawReport:
        second_done.set()
        return _report("fast")

    checks = [LawCheck("slow", Diagram.D1, slow), LawCheck("fast", Diagram.D1, fast)]
    report = run_checks(checks, parallel=True, workers=2)
    assert [f.subject for f in report.findings] == ["slow", "fast"]


def test_aborted_check_becomes_a_finding() -> None:
    """A check raising a ChoreoError is reported under its own diagram; the others still run."""

    def broken() -> LawReport:
        raise PulseError("no beats to conduct")

    checks = [LawCheck("conducting", Diagram.D5, broken), LawCheck("ok", Diagram.D1, lambda: _report("x"))]
    report = run_checks(checks, parallel=False)
    aborted, ok = report.findings
    assert aborted == Finding(Diagram.D5, "check aborted", "conducting", "no beats to conduct")
    assert ok.subject == "x"


def test_run_checks_empty() -> None:
    assert run_checks([]) == LawReport()


# ---------- log_findings ----------


def test_log_findings_without_report_log(monkeypatch) -> None:
    monkeypatch.setattr(laws, "report_logger", None)
    log_findings(_report("a"), "x.chor")


def test_log_findings_writes_one_json_line_per_finding(monkeypatch, tmp_path) -> None:
    from logger.logger import JsonFormatter, JsonFileHandler  # pylint: disable=import-outside-toplevel

    target = tmp_path / "findings.json"
    logger = logging.getLogger("law_reports.test")
    handler = JsonFileHandler(str(target))
    handler.setFormatter(JsonFormatter())
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    monkeypatch.setattr(laws, "report_logger", logger)
    try:
        log_findings(_report("A m0->m1", "A m1->m2"), "steps.chor")
    finally:
        logger.removeHandler(handler)
        handler.close()

    records = [json.loads(line) for line in target.read_text(encoding="utf-8").splitlines()]
    assert [r["subject"] for r in records] == ["A m0->m1", "A m1->m2"]
    first = records[0]
    assert first["source"] == "steps.chor"
    assert first["diagram"] == "D1" and first["severity"] == "violation"
    assert first["message"] == "[D1] identity: A m0->m1"
    assert first["level"] == "INFO"
