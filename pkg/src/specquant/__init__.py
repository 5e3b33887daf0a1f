"""Quantization-rule spectra for 1D polynomial Hamiltonian symbols.

Exposes the symbol model, level-curve geometry, winding/holonomy machinery,
the quantization-rule solver with its reference spectra, the Bargmann-side
quasimode checks, and the exact truncated calculus of analytic symbols.
"""

from .errors import ConfigError, NumericalError, ToolError, ValidationFailure

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NumericalError",
    "ToolError",
    "ValidationFailure",
    "__version__",
]
