"""Simulation and pulse-schedule toolkit for gradient-addressed spin-chain
quantum registers: dipolar-coupling lattice sums, prism-magnet field maps,
exact few-spin dynamics, decoupling/recoupling schedule compilation, and
force-microscopy readout/scalability models.
"""

__version__ = "0.1.0"

from .errors import (
    ChainqcError,
    ConfigError,
    ConvergenceError,
    SequenceValidationError,
)

__all__ = [
    "__version__",
    "ChainqcError",
    "ConfigError",
    "ConvergenceError",
    "SequenceValidationError",
]
