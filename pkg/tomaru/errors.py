"""Exceptions raised by tomaru.

Input problems derive from ValueError and numerical failures from
RuntimeError, so callers that only know the builtin types still catch them.
"""


class TomaruError(Exception):
    """Base class for every error raised on purpose by tomaru"""


class DomainError(TomaruError, ValueError):
    """An argument lies outside the domain of the function"""


class UnsupportedPriorError(TomaruError, ValueError):
    """A closed-form operation was requested for a prior that has none"""


class LatticeError(TomaruError, ValueError):
    """A (t, s) pair outside of 0 <= s <= t <= horizon"""


class SchemaError(TomaruError, ValueError):
    """A persisted policy or session does not have the expected structure"""


class NoSignChangeError(TomaruError, ValueError):
    """The function does not change sign over the bracket"""


class ConvergenceError(TomaruError, RuntimeError):
    """An iterative routine ran out of iterations"""


class QuadratureError(TomaruError, RuntimeError):
    """The posterior normalizer underflowed"""


class NonIntervalRegionError(TomaruError, RuntimeError):
    """A sampling region is not a contiguous set of success counts"""


class CalibrationError(TomaruError, RuntimeError):
    """A calibration target cannot be bracketed"""
