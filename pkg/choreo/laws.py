"""Runs independent law checks, optionally in parallel, and records their findings."""

from __future__ import annotations

from typing import NamedTuple
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed

from logger.logger import app_logger, report_logger

from choreo.errors import ChoreoError
from choreo.category import Diagram, Finding, LawReport


class LawCheck(NamedTuple):
    """A named, self-contained check. `diagram` labels the finding emitted if the check itself breaks."""

    name: str
    diagram: Diagram
    run: Callable[[], LawReport]


def _run_one(check: LawCheck, idx: int) -> tuple[int, LawReport]:
    try:
        return idx, check.run()
    except ChoreoError as e:
        app_logger.error("[law check] %s aborted: %s", check.name, e)
        return idx, LawReport((Finding(check.diagram, "check aborted", check.name, str(e)),))


def run_checks(checks: Sequence[LawCheck], parallel: bool = True, workers: int | None = None) -> LawReport:
    """Runs every check and merges the reports in submission order, whatever the completion order."""
    reports: list[LawReport | None] = [None] * len(checks)
    if parallel and len(checks) > 1:
        with ThreadPoolExecutor(max_workers=workers or None) as executor:
            futures = [executor.submit(_run_one, check, idx) for idx, check in enumerate(checks)]
            for future in as_completed(futures):
                idx, report = future.result()
                reports[idx] = report
    else:
        for idx, check in enumerate(checks):
            reports[idx] = _run_one(check, idx)[1]
    merged = LawReport().merged(*(r for r in reports if r is not None))
    app_logger.info(
        "Ran %d law checks: %d violations, %d notes", len(checks), len(merged.violations), len(merged.notes)
    )
    return merged


def log_findings(report: LawReport, source: str) -> None:
    """Writes every finding to the JSON report log, when one is configured."""
    if report_logger is None:
        return
    for f in report.findings:
        report_logger.info(f.render(), extra={"extra": {"source": source, **f.as_dict()}})
