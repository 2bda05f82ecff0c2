"""Exception hierarchy."""

import numpy as np


class HDGError(Exception):
    """Base class for all package errors."""


class ParameterError(HDGError, ValueError):
    """Invalid user-supplied parameter."""


class DegenerateElementError(HDGError, ArithmeticError):
    """Gram-Schmidt breakdown while orthonormalizing an element basis."""


class AssemblyError(HDGError, RuntimeError):
    """Internal inconsistency during assembly (indicates a bug, not bad input)."""


class NotSPDError(HDGError, np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot."""


class ConvergenceError(HDGError, RuntimeError):
    """Iterative solver did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
