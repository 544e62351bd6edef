"""
Error hierarchy shared by the numerical modules
"""
from typing import Optional, Tuple


class FredholmError(Exception):
    """Base class for all solver errors"""


class ConfigurationError(FredholmError, ValueError):
    """Invalid parameters: grid bounds, kernel exponent, catalog id, bound inputs"""


class DomainError(FredholmError, ValueError):
    """Argument outside the domain of an operation"""


class DimensionMismatchError(FredholmError, ValueError):
    """Vectors or matrices that do not share a grid"""


class QuadratureError(FredholmError, ArithmeticError):
    """Non-finite integrand encountered while integrating over a cell"""

    def __init__(self, message: str, cell: Optional[int] = None):
        super().__init__(message)
        self.cell = cell


class AssemblyError(FredholmError):
    """Failure while computing one matrix entry"""

    def __init__(self, message: str, entry: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.entry = entry


class SingularJacobianError(FredholmError, ArithmeticError):
    """LU factorization hit a pivot below the singularity threshold"""

    def __init__(self, message: str, pivot_index: Optional[int] = None):
        super().__init__(message)
        self.pivot_index = pivot_index
