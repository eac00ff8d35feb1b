"""
boolcd logging guardrails

Fits run over tensors with thousands of cells; a careless ``extra=`` payload
would dump them into the log. This module gates log volume by a global
verbosity level and summarises array-like payloads before they reach the
handlers.

Verbosity levels:
- QUIET (default): warnings and errors only
- NORMAL: lifecycle events (fit started/finished, slot ingested)
- VERBOSE: per-sweep detail for debugging
"""

import logging
from enum import Enum
from typing import Any, Optional

import numpy as np


class Verbosity(Enum):
    """Log volume levels"""
    QUIET = "quiet"
    NORMAL = "normal"
    VERBOSE = "verbose"


VERBOSITY = Verbosity.QUIET

# Sequences longer than this are summarised rather than logged
MAX_INLINE_ITEMS = 16


def set_verbosity(level: Verbosity) -> None:
    """
    Set global verbosity.

    Args:
        level: Verbosity to enforce
    """
    global VERBOSITY
    VERBOSITY = level


def get_verbosity() -> Verbosity:
    """Get current verbosity"""
    return VERBOSITY


def _summarize_value(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return f"[ndarray {value.dtype} shape={value.shape}]"
    shape = getattr(value, "shape", None)
    if shape is not None and hasattr(value, "bits"):
        # BoolMatrix / BoolTensor3
        return f"[{type(value).__name__} shape={tuple(shape)}]"
    if isinstance(value, (list, tuple)) and len(value) > MAX_INLINE_ITEMS:
        return f"[{type(value).__name__} of length {len(value)}]"
    if isinstance(value, bytes):
        return f"[bytes: {len(value)} bytes]"
    if isinstance(value, np.generic):
        return value.item()
    return value


def summarize_log_data(data: dict) -> dict:
    """
    Replace bulky values in a log payload by compact summaries.

    Args:
        data: Dictionary to summarise

    Returns:
        New dictionary safe to attach to a log record
    """
    summarized = {}
    for key, value in data.items():
        if isinstance(value, dict):
            summarized[key] = summarize_log_data(value)
        else:
            summarized[key] = _summarize_value(value)
    return summarized


def _format_context(context: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in context.items())


class FitLogger:
    """
    Logger that respects the global verbosity and summarises payloads.
    """

    def __init__(self, name: str):
        self.logger = logging.getLogger(name)

    def _should_log(self, level: int) -> bool:
        if VERBOSITY == Verbosity.QUIET:
            return level >= logging.WARNING
        elif VERBOSITY == Verbosity.NORMAL:
            return level >= logging.INFO
        else:  # VERBOSE
            return True

    def _emit(self, level: int, msg: str, extra: Optional[dict]) -> None:
        if not self._should_log(level):
            return
        if extra:
            extra = summarize_log_data(extra)
            msg = f"{msg} | {_format_context(extra)}"
        self.logger.log(level, msg)

    def debug(self, msg: str, extra: Optional[dict] = None) -> None:
        """Log debug message (verbose mode only)"""
        self._emit(logging.DEBUG, msg, extra)

    def info(self, msg: str, extra: Optional[dict] = None) -> None:
        """Log info message (normal and verbose modes)"""
        self._emit(logging.INFO, msg, extra)

    def warning(self, msg: str, extra: Optional[dict] = None) -> None:
        """Log warning message (all modes)"""
        self._emit(logging.WARNING, msg, extra)

    def error(self, msg: str, extra: Optional[dict] = None) -> None:
        """Log error message (all modes)"""
        self._emit(logging.ERROR, msg, extra)

    def log_event(self, event_type: str, success: bool, **context) -> None:
        """
        Log a lifecycle event.

        Args:
            event_type: e.g. "fit_finished", "slot_ingested"
            success: Whether the step reached its target
            **context: Additional context (summarised)
        """
        outcome = "success" if success else "failure"
        self.info(f"Event: {event_type} - {outcome}", extra=context)


def get_logger(name: str) -> FitLogger:
    """
    Get a verbosity-aware logger.

    Args:
        name: Logger name (typically __name__)
    """
    return FitLogger(name)
