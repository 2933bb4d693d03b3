"""
Exception types for parityarray
"""
from typing import List, Optional, Tuple


class ParityArrayError(Exception):
    """Base class for every error raised by the library"""


class InvalidSpecError(ParityArrayError, ValueError):
    """A circuit, truncation or argument violates its documented invariants"""


class SingularMatrixError(ParityArrayError, ArithmeticError):
    """The reduced branch capacitance matrix cannot be inverted"""


class DimensionOverflowError(ParityArrayError):
    """The charge basis would exceed the configured dimension ceiling"""

    def __init__(self, dim: int, ceiling: int):
        super().__init__(f"charge basis dimension {dim} exceeds ceiling {ceiling}")
        self.dim = dim
        self.ceiling = ceiling

    def __reduce__(self):
        return type(self), (self.dim, self.ceiling)


class ConvergenceError(ParityArrayError, RuntimeError):
    """The iterative eigensolver stopped before reaching the requested accuracy"""

    def __init__(self, message: str, iterations: Optional[int] = None,
                 residual_norm: Optional[float] = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual_norm = residual_norm

    def __reduce__(self):
        return type(self), (self.args[0], self.iterations, self.residual_norm)


class FitDegenerateError(ParityArrayError, ValueError):
    """The band data cannot determine the requested model parameters"""


class ConfigError(ParityArrayError, ValueError):
    """
    A run configuration failed validation

    Attributes:
        issues: List of (key path, message) pairs, one per problem found
    """

    def __init__(self, issues: List[Tuple[str, str]]):
        self.issues = list(issues)
        summary = "; ".join(f"{key}: {msg}" for key, msg in self.issues)
        super().__init__(summary or "invalid configuration")

    def __reduce__(self):
        return type(self), (self.issues,)
