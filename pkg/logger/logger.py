"""Logging for the choreo compiler.

Two loggers:
- app_logger: "choreo", rotating file CHOREO_LOG_DIR/choreo.log.
- report_logger: "law_reports", one JSON document per law finding; None unless
  CHOREO_REPORT_LOG_PATH is set.
"""

import os
import json
import math
import logging
from logging.handlers import RotatingFileHandler

LOG_DIR = os.environ.get("CHOREO_LOG_DIR", "./logs")
APP_LOG_NAME = "choreo.log"
REPORT_LOG_NAME = "law_reports.json"
MAX_LOG_BYTES = 10 * 1024 * 1024
LOG_BACKUPS = 5


def _build_app_logger() -> logging.Logger:
    os.makedirs(LOG_DIR, exist_ok=True)
    logger = logging.getLogger("choreo")
    # a reload must not stack a second file handler
    for old in list(logger.handlers):
        logger.removeHandler(old)
        old.close()
    handler = RotatingFileHandler(
        os.path.join(LOG_DIR, APP_LOG_NAME), maxBytes=MAX_LOG_BYTES, backupCount=LOG_BACKUPS, encoding="utf-8"
    )
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    return logger


app_logger = _build_app_logger()


# --- Report logger (JSON lines) ---
class JsonFileHandler(logging.FileHandler):
    """Appends one formatted record per line, flushed immediately."""

    def __init__(self, filename: str) -> None:
        super().__init__(filename, mode="a", encoding="utf-8")

    def emit(self, record):
        try:
            self.stream.write(self.format(record) + "\n")
            self.flush()
        except Exception:
            self.handleError(record)


def _plain(value):
    """JSON has no NaN or infinity: non-finite discrepancies become null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class JsonFormatter(logging.Formatter):
    """Record as a JSON object; the `extra` dict (finding fields, source file) is merged at the top level."""

    def format(self, record):
        data = {
            "timestamp": self.formatTime(record, self.datefmt),
            "level": record.levelname,
            "message": record.getMessage(),
            "logger": record.name,
        }
        extra = getattr(record, "extra", None)
        if isinstance(extra, dict):
            data.update({k: _plain(v) for k, v in extra.items()})
        return json.dumps(data, ensure_ascii=False)


def get_report_logger():
    """The findings logger, or None when CHOREO_REPORT_LOG_PATH is unset or unusable.

    A directory path gets law_reports.json inside it; anything else is used as the
    file path, its parent directory created on demand. The logger keeps exactly one
    handler, on the current path, however often the module is reloaded."""
    base_path = os.environ.get("CHOREO_REPORT_LOG_PATH")
    if not base_path:
        return None
    target = os.path.join(base_path, REPORT_LOG_NAME) if os.path.isdir(base_path) else base_path
    target = os.path.abspath(target)
    logger = logging.getLogger("law_reports")
    kept = None
    for h in list(logger.handlers):
        if kept is None and getattr(h, "baseFilename", None) == target:
            kept = h
            continue
        logger.removeHandler(h)
        h.close()
    if kept is None:
        try:
            os.makedirs(os.path.dirname(target), exist_ok=True)
            handler = JsonFileHandler(target)
        except OSError as e:
            app_logger.error("Cannot open law report log %s: %s", target, e)
            return None
        handler.setFormatter(JsonFormatter())
        logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    return logger


report_logger = get_report_logger()
