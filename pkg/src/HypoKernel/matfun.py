"""
matfun.py -- Dense small-matrix kernels.

Matrix exponential (fixed-order Padé 13 with scaling and squaring), Cholesky factors with
log-determinants, and the Kalman rank test. Matrices are plain float64 numpy arrays;
N is desk-scale (≤ 20).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from .errors import DomainError, NotPositiveDefinite

if TYPE_CHECKING:
    from .funcspace import ModelSpec

SYMMETRY_TOL = 1e-10
PIVOT_RTOL = 1e-14
RANK_RTOL = 1e-10

# Padé 13 coefficients and the scaling threshold theta_13
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA_13 = 5.4


def as_square_matrix(A, name: str = "matrix") -> np.ndarray:
    """Validate and return A as a finite square float64 array."""
    M = np.array(A, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise DomainError(f"{name} must be a non-empty square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} has non-finite entries")
    return M


def mat_exp(A, t: float = 1.0) -> np.ndarray:
    """exp(tA) by scaling and squaring with the degree-13 Padé approximant."""
    A = as_square_matrix(A, "A") * float(t)
    n = A.shape[0]
    ident = np.eye(n)
    norm = np.linalg.norm(A, 1)
    if norm == 0.0:
        return ident
    if not math.isfinite(norm):
        raise OverflowError("‖tA‖ is not finite")

    s = max(0, int(math.ceil(math.log2(norm / _THETA_13))))
    if s > 0:
        A = A / (2.0**s)

    b = _PADE13
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    R = scipy.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    if not np.all(np.isfinite(R)):
        raise OverflowError(f"exp(tA) overflows double range (‖tA‖₁ = {norm:.3e})")
    return R


def expm_eig(A, t: float = 1.0) -> np.ndarray:
    """exp(tA) for symmetric A through the eigendecomposition."""
    A = as_square_matrix(A, "A")
    if not np.allclose(A, A.T, atol=SYMMETRY_TOL * max(1.0, np.abs(A).max())):
        raise DomainError("expm_eig requires a symmetric matrix")
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    return (V * np.exp(t * w)) @ V.T


@dataclass(frozen=True, eq=False)
class SpdFactor:
    """A symmetric positive-definite matrix with its lower Cholesky factor and log-determinant."""

    matrix: np.ndarray
    chol: np.ndarray
    log_det: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs) -> np.ndarray:
        return scipy.linalg.cho_solve((self.chol, True), np.asarray(rhs))

    def quad_form(self, v) -> float:
        """⟨M⁻¹v, v⟩ through one triangular solve."""
        w = scipy.linalg.solve_triangular(self.chol, np.asarray(v, dtype=float), lower=True)
        return float(np.sum(w * w, axis=0))

    def inverse(self) -> np.ndarray:
        inv = self.solve(np.eye(self.n))
        return (inv + inv.T) / 2.0


def _checked_cholesky(M: np.ndarray) -> np.ndarray:
    scale = np.linalg.norm(M)
    if scale == 0.0:
        raise NotPositiveDefinite("zero matrix")
    try:
        L = scipy.linalg.cholesky(M, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from exc
    pivots = np.diag(L) ** 2
    if np.any(pivots <= PIVOT_RTOL * scale):
        raise NotPositiveDefinite(
            f"pivot {pivots.min():.3e} below threshold {PIVOT_RTOL * scale:.3e}"
        )
    return L


def chol_logdet(M, equilibrate: bool = False) -> SpdFactor:
    """
    Cholesky factor with pivot check εₚ = 1e−14·‖M‖ and log_det = 2 Σ log Lᵢᵢ.

    With equilibrate=True the pivot check runs on D⁻¹MD⁻¹, D = diag(M)^{1/2}, and the
    returned factor is D·L̃. Gramians of degenerate models have diagonal entries spanning
    many orders of magnitude at small t and need this.
    """
    M = as_square_matrix(M, "M")
    if not np.allclose(M, M.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, np.linalg.norm(M))):
        raise DomainError("matrix is not symmetric within 1e-10")
    M = (M + M.T) / 2.0
    if not equilibrate:
        L = _checked_cholesky(M)
    else:
        diag = np.diag(M)
        if np.any(diag <= 0.0):
            raise NotPositiveDefinite("non-positive diagonal entry")
        d = np.sqrt(diag)
        L = d[:, None] * _checked_cholesky(M / np.outer(d, d))
    return SpdFactor(matrix=M, chol=L, log_det=float(2.0 * np.sum(np.log(np.diag(L)))))


def symmetric_sqrt(Q) -> np.ndarray:
    """Q^{1/2} of a positive-semidefinite matrix via the symmetric eigendecomposition."""
    w, V = np.linalg.eigh((np.asarray(Q) + np.asarray(Q).T) / 2.0)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def controllability_matrix(model: ModelSpec) -> np.ndarray:
    """[Q^{1/2} | BQ^{1/2} | … | B^{N−1}Q^{1/2}]."""
    blocks = [symmetric_sqrt(model.Q)]
    for _ in range(model.N - 1):
        blocks.append(model.B @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(model: ModelSpec) -> int:
    """Rank of the controllability matrix by column-pivoted QR."""
    Kc = controllability_matrix(model)
    largest = np.linalg.norm(Kc, axis=0).max()
    if largest == 0.0:
        return 0
    R, _ = scipy.linalg.qr(Kc, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    return int(np.sum(diag > RANK_RTOL * largest))
