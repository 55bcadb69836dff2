"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ParameterError and DataError exit 2,
NumericalError exits 3, OS-level I/O problems exit 4.
"""


class HclimitsError(Exception):
    """Base class for all package errors."""


class ParameterError(HclimitsError):
    """A parameter or design violates its domain (e.g. phi <= 1, unequal offsets)."""


class DataError(HclimitsError):
    """Malformed or inconsistent input data (CSV parse errors, duplicate ids)."""


class NumericalError(HclimitsError):
    """A numerical procedure failed: all-zero sample, non-convergence, unstable bootstrap."""
