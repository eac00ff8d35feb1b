"""
boolcd error hierarchy.

Every error raised by the library derives from ValueError so callers that
already guard numerical code with ``except ValueError`` keep working. The CLI
maps the subclasses onto exit codes (see ``boolcd.cli``).
"""

from __future__ import annotations

from typing import Optional


class BoolcdError(ValueError):
    """Base class for all boolcd errors."""


class ShapeError(BoolcdError):
    """Dimension or shape mismatch between operands."""


class ConfigError(BoolcdError):
    """Invalid configuration: ranks, thresholds, densities, weights, flags."""


class CapacityError(BoolcdError):
    """A size or search-space guard was exceeded."""


class DataError(BoolcdError):
    """Invalid data values (non-finite cells, empty inputs)."""


class ParseError(DataError):
    """Malformed file content, with the 1-based line (and column) at fault."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where = f" ({where})"
        super().__init__(f"{message}{where}")


class StateError(BoolcdError):
    """Operation invoked on a stream in the wrong lifecycle state."""


class InputError(BoolcdError):
    """Semantically insufficient input (too few slots, frames, data points)."""
