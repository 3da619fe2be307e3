"""Logging for choreo.

Exports:
- app_logger: main application logger
- report_logger: JSON logger of law findings (by CHOREO_REPORT_LOG_PATH)
"""

from .logger import app_logger, report_logger  # noqa: F401

__all__ = ["app_logger", "report_logger"]
