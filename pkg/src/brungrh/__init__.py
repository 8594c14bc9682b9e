"""Rigorous GRH-conditional upper bound on Brun's constant."""

from .errors import (
    ConfigError,
    ConstraintError,
    DataError,
    DomainError,
    OutOfRange,
    ResourceError,
)
from .rint import Interval, Precision, precision

__version__ = "0.1.0"
