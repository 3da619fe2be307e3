"""Validation of command-line inputs: onset files and numeric flags.

Checks are split into small helpers:
- _check_file: existence, type and size of an input file;
- _parse_onset_lines: one decimal timestamp per line, `#` comments;
- _check_positive: numeric flag ranges;
- read_onsets, validate_tolerances, validate_compile_flags, validate_sync_flags:
  coordinate the checks and build a single result.
"""

from __future__ import annotations

import os
import math
from typing import Any, NamedTuple
from collections.abc import Iterable

EXIT_INPUT = 2
MAX_ONSET_FILE_MB = 8


class ValidationResult(NamedTuple):
    """Outcome of a validation.

    Attributes:
        value: The validated value (onset list, normalized flags) on success, else None.
        error: Human-readable message when validation failed.
        exit_code: Process exit code for `error`, None on success.
    """

    value: Any | None
    error: str | None
    exit_code: int | None


def _check_file(path: str, max_bytes: int) -> tuple[str | None, int]:
    """Checks that `path` is a readable regular file no larger than `max_bytes`.

    :return: (error_message | None, exit_code).
    """
    if not os.path.exists(path):
        return f"File '{path}' does not exist", EXIT_INPUT
    if not os.path.isfile(path):
        return f"'{path}' is not a regular file", EXIT_INPUT
    if os.path.getsize(path) > max_bytes:
        return f"File '{path}' is too large (> {max_bytes // (1024 * 1024)} MB)", EXIT_INPUT
    return None, EXIT_INPUT


def _parse_onset_lines(lines: Iterable[str]) -> tuple[list[float], str | None]:
    """Parses timestamps, skipping blank lines and `#` comments (whole-line or trailing)."""
    onsets: list[float] = []
    for number, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        try:
            value = float(text)
        except ValueError:
            return [], f"line {number}: '{text}' is not a timestamp"
        if not math.isfinite(value):
            return [], f"line {number}: timestamp must be finite"
        onsets.append(value)
    return onsets, None


def _check_positive(name: str, value: float | None) -> str | None:
    if value is not None and not (math.isfinite(value) and value > 0):
        return f"Option '{name}' must be > 0"
    return None


def read_onsets(path: str, max_file_mb: int = MAX_ONSET_FILE_MB) -> ValidationResult:
    """Reads an onset file; `value` is the list of timestamps in file order."""
    error, code = _check_file(path, max_file_mb * 1024 * 1024)
    if error is not None:
        return ValidationResult(None, error, code)
    try:
        with open(path, encoding="utf-8") as f:
            onsets, error = _parse_onset_lines(f)
    except UnicodeDecodeError:
        return ValidationResult(None, f"File '{path}' is not UTF-8 text", EXIT_INPUT)
    if error is not None:
        return ValidationResult(None, f"{path}: {error}", EXIT_INPUT)
    return ValidationResult(onsets, None, None)


def validate_tolerances(eps: float | None, eta: float | None, n_cmp: int) -> ValidationResult:
    """Absolute --eps/--eta overrides (optional) and the comparison resolution."""
    error = _check_positive("--eps", eps) or _check_positive("--eta", eta)
    if error is None and n_cmp < 2:
        error = "Comparison resolution must be >= 2 samples"
    if error is None and eps is not None and eta is not None and eta < eps:
        error = "Option '--eta' must be >= '--eps'"
    if error is not None:
        return ValidationResult(None, error, EXIT_INPUT)
    return ValidationResult({"eps": eps, "eta": eta, "n_cmp": n_cmp}, None, None)


def validate_compile_flags(rate: float, kappa: float) -> ValidationResult:
    error = _check_positive("--rate", rate)
    if error is None and not (math.isfinite(kappa) and kappa >= 0):
        error = "Option '--kappa' must be >= 0"
    if error is not None:
        return ValidationResult(None, error, EXIT_INPUT)
    return ValidationResult({"rate": rate, "kappa": kappa}, None, None)


def validate_sync_flags(window: float, eta: float | None) -> ValidationResult:
    error = _check_positive("--window", window) or _check_positive("--eta", eta)
    if error is not None:
        return ValidationResult(None, error, EXIT_INPUT)
    return ValidationResult({"window": window, "eta": eta}, None, None)
