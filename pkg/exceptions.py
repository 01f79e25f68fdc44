"""
Exceptions Module - Typed errors raised by the BSS toolkit
Numerical failures, validation errors, statistic mismatches and ingestion errors
"""

from typing import Optional


class BSSError(Exception):
    """Base class for all toolkit errors"""


# Numerical

class NonConvergent(BSSError):
    """Adaptive quadrature exhausted its budget without meeting tolerance"""


class SeriesDiverged(BSSError):
    """Pochhammer series did not reach its tail bound within the term budget"""


class DegenerateVariance(BSSError):
    """An increment variance is not strictly positive"""


class NotPSD(BSSError):
    """Matrix is not positive semidefinite beyond repair tolerance"""


class NotConverged(BSSError):
    """Successive resolutions disagree by more than the convergence tolerance"""


# Validation

class DomainError(BSSError, ValueError):
    """Parameter outside the validity range of a formula"""


class OutOfRange(BSSError, IndexError):
    """Index outside its declared range"""


class InvalidModel(BSSError, ValueError):
    """Kernel, volatility or drift model violates its invariants"""


class InvalidPartition(BSSError, ValueError):
    """Blocks are not a disjoint cover of the component set"""


class DimensionMismatch(BSSError, ValueError):
    """Array shapes or index-map descriptors do not line up"""


class SizeCap(BSSError, ValueError):
    """Requested matrix exceeds the configured size cap"""


class InsufficientLags(BSSError, ValueError):
    """Too few lags for a diagnostic"""


class InsufficientData(BSSError, ValueError):
    """Too few observations for an estimator"""


class ConfigError(BSSError, ValueError):
    """Experiment configuration is invalid"""


# Statistics

class RegimeMismatch(BSSError, ValueError):
    """Scaling regime, path variant or grid do not match"""


class MissingVolatility(BSSError, ValueError):
    """Bias term requested without volatility paths or moments"""


class DegenerateDenominator(BSSError, ArithmeticError):
    """Realized sum in a ratio denominator is zero"""


class DegenerateR(BSSError, ArithmeticError):
    """Bias-term value required to be nonzero is not"""


# Ingestion

class SchemaError(BSSError, ValueError):
    """Path file does not match the documented schema"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NonUniformGrid(BSSError, ValueError):
    """Time column is not uniformly spaced"""
