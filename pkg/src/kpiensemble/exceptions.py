"""
Exceptions raised by kpiensemble.

Domain errors subclass the builtin ``ValueError`` / ``RuntimeError`` so code
that catches those keeps working. The CLI maps each family to its own exit
code (see :mod:`kpiensemble.cli`).
"""


class KpiEnsembleError(Exception):
    """Base class of every error raised on purpose by kpiensemble."""


class ConfigError(KpiEnsembleError, ValueError):
    """Invalid configuration or parameter precondition."""


class DataError(KpiEnsembleError, ValueError):
    """Malformed or inconsistent input data."""


class OutOfOrderError(DataError):
    """A stream point does not come after the last point seen."""


class CheckpointError(DataError):
    """A checkpoint document cannot be restored."""


class ComputationError(KpiEnsembleError, RuntimeError):
    """A numerical procedure failed (singular system, learner fit, ...)."""
