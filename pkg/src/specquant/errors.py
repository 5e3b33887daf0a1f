"""Error taxonomy shared by all modules.

Every raised error carries a short machine-readable code (stable, uppercase)
and a human-readable detail string.  The CLI maps the three classes to exit
codes: ConfigError -> 3, ValidationFailure -> 1, NumericalError -> 2.
"""

from __future__ import annotations


class ToolError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    def __init__(self, code: str, detail: str = ""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class ConfigError(ToolError):
    """Bad or missing configuration."""


class ValidationFailure(ToolError):
    """A requested validation did not hold (not a numerical breakdown)."""


class NumericalError(ToolError):
    """A numerical operation could not complete within its contract."""
