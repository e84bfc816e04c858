"""
errors.py -- Exception hierarchy for HypoKernel.

Every library failure derives from HypoKernelError so that the CLI can map it onto
its exit-code contract in one place (see main.py).
"""

from __future__ import annotations

from typing import Optional

import numpy as np


class HypoKernelError(Exception):
    """Base class for all HypoKernel errors."""


class NotPositiveDefinite(HypoKernelError, np.linalg.LinAlgError):
    """A Cholesky pivot fell below the relative threshold (or factorization failed)."""


class QuadratureNotConverged(HypoKernelError, RuntimeError):
    """Adaptive quadrature ran out of subdivisions before converging."""

    def __init__(
        self,
        message: str,
        estimate: Optional[complex] = None,
        error: Optional[float] = None,
        subdivisions: int = 0,
    ) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.subdivisions = subdivisions


class DomainError(HypoKernelError, ValueError):
    """A parameter lies outside the domain of the requested operation."""


class ConfigError(HypoKernelError, ValueError):
    """A run configuration failed strict parsing."""


class PreconditionError(HypoKernelError):
    """The model does not satisfy the precondition of a kernel-dependent task."""


class PointEvaluationError(HypoKernelError):
    """Evaluation failed at a specific input point."""

    def __init__(self, index: int, cause: BaseException) -> None:
        super().__init__(f"evaluation failed at point #{index}: {cause}")
        self.index = index
        self.cause = cause
