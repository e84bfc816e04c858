"""
covariance.py -- The Gramians C(t), K(t) and the hypoellipticity report.

    C(t)  = ∫₀ᵗ e^{−sB} Q e^{−sB★} ds
    tK(t) = ∫₀ᵗ e^{sB} Q e^{sB★} ds = e^{tB} C(t) e^{tB★}

Three routes, chosen by ‖tB‖₁:
- small: the Taylor series Σ t^{k+1} M_k/(k+1)! with M₀ = Q, M_{k+1} = BM_k + M_kB★
  (entrywise accurate at tiny t, where the degenerate directions scale like t³)
- moderate: the Van Loan block exponential of [[−B, Q], [0, B★]]
- large: tK from the Lyapunov solution (Hurwitz B) or by the doubling identity
  Φ(2t) = Φ(t) + e^{tB}Φ(t)e^{tB★}; C is then e^{−tB}·tK·e^{−tB★} when that is representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import DomainError, NotPositiveDefinite
from .funcspace import ModelSpec
from .matfun import SpdFactor, chol_logdet, kalman_rank, mat_exp
from .quadrature import QuadratureConfig, adaptive_gk
from .utils import LogManager

logger = LogManager.get("Covariance")

SERIES_LIMIT = 0.5
LARGE_TB = 20.0
SERIES_MAX_TERMS = 80
DEFAULT_SAMPLE_TIMES = (1e-3, 1e-2, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class SingularGramian:
    """Marker for a Gramian that has no Cholesky factor at this t."""

    min_eig: float
    reason: str


Gramian = Union[SpdFactor, SingularGramian]


def _symmetrize(A: np.ndarray) -> np.ndarray:
    return (A + A.T) / 2.0


def _check_time(t: float) -> float:
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"Gramians need t > 0, got {t}")
    return t


def is_hurwitz(B: np.ndarray) -> bool:
    return bool(np.max(np.linalg.eigvals(B).real) < 0)


def _series(model: ModelSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    Q, B = model.Q, model.B
    M = Q.copy()
    C = np.zeros_like(Q)
    tK = np.zeros_like(Q)
    coeff = t
    for k in range(SERIES_MAX_TERMS):
        term = coeff * M
        C += (-1) ** k * term
        tK += term
        if np.abs(term).max() <= 1e-17 * max(np.abs(tK).max(), 1e-300):
            break
        M = B @ M + M @ B.T
        coeff *= t / (k + 2)
        if not M.any():
            break
    return C, tK


def _van_loan(model: ModelSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    n = model.N
    H = np.zeros((2 * n, 2 * n))
    H[:n, :n] = -model.B
    H[:n, n:] = model.Q
    H[n:, n:] = model.B.T
    F = mat_exp(H, t)
    F12 = F[:n, n:]
    C = F12 @ mat_exp(-model.B.T, t)
    tK = F[n:, n:].T @ F12
    return C, tK


def _tk_large(model: ModelSpec, t: float) -> np.ndarray:
    B = model.B
    if is_hurwitz(B):
        S = scipy.linalg.solve_continuous_lyapunov(B, -model.Q)
        E = mat_exp(B, t)
        return S - E @ S @ E.T
    norm = np.linalg.norm(B, 1)
    k = max(0, int(math.ceil(math.log2(t * norm / LARGE_TB))))
    base = t / 2.0**k
    _, phi = _van_loan(model, base)
    E = mat_exp(B, base)
    for _ in range(k):
        phi = phi + E @ phi @ E.T
        E = E @ E
        if not np.all(np.isfinite(phi)):
            raise OverflowError(f"tK(t) overflows double range at t = {t:.3e}")
    return phi


def _gramians(model: ModelSpec, t: float) -> tuple[Optional[np.ndarray], np.ndarray]:
    scale = t * np.linalg.norm(model.B, 1)
    if scale <= SERIES_LIMIT:
        C, tK = _series(model, t)
    elif scale <= LARGE_TB:
        C, tK = _van_loan(model, t)
    else:
        tK = _tk_large(model, t)
        try:
            E = mat_exp(-model.B, t)
            C = E @ tK @ E.T
            if not np.all(np.isfinite(C)):
                C = None
        except OverflowError:
            C = None
    return (None if C is None else _symmetrize(C)), _symmetrize(tK)


def gramian_C(model: ModelSpec, t: float) -> np.ndarray:
    """C(t) = ∫₀ᵗ e^{−sB}Qe^{−sB★}ds; OverflowError when it leaves double range."""
    t = _check_time(t)
    C, _ = _gramians(model, t)
    if C is None:
        raise OverflowError(f"C(t) is not representable at t = {t:.3e}")
    return C


def gramian_K(model: ModelSpec, t: float) -> np.ndarray:
    """K(t) = (1/t)∫₀ᵗ e^{sB}Qe^{sB★}ds."""
    t = _check_time(t)
    _, tK = _gramians(model, t)
    return tK / t


def gramian_C_quadrature(
    model: ModelSpec, t: float, quad: Optional[QuadratureConfig] = None
) -> np.ndarray:
    """C(t) by adaptive Gauss–Kronrod on the matrix integrand, for cross-checks."""
    t = _check_time(t)
    quad = quad or QuadratureConfig()

    def integrand(s: float) -> np.ndarray:
        E = mat_exp(-model.B, s)
        return E @ model.Q @ E.T

    res = adaptive_gk(integrand, 0.0, t, quad)
    return _symmetrize(np.asarray(res.value))


def stationary_covariance(model: ModelSpec) -> Optional[np.ndarray]:
    """Σ∞ with BΣ + ΣB★ + 2Q = 0 when B is Hurwitz, else None."""
    if not is_hurwitz(model.B):
        return None
    return _symmetrize(scipy.linalg.solve_continuous_lyapunov(model.B, -2.0 * model.Q))


def _factor(M: Optional[np.ndarray], what: str) -> Gramian:
    if M is None:
        return SingularGramian(float("nan"), f"{what} overflows double range")
    try:
        return chol_logdet(M, equilibrate=True)
    except NotPositiveDefinite as exc:
        return SingularGramian(float(np.linalg.eigvalsh(M).min()), f"{what}: {exc}")


@dataclass(frozen=True, eq=False)
class GramianPair:
    """C(t), K(t) with factors (or SingularGramian markers) and e^{tB}."""

    t: float
    C_matrix: Optional[np.ndarray]
    K_matrix: np.ndarray
    C: Gramian
    K: Gramian
    exp_tB: np.ndarray

    @property
    def is_singular(self) -> bool:
        return isinstance(self.K, SingularGramian)

    def require_K(self) -> SpdFactor:
        if isinstance(self.K, SingularGramian):
            raise NotPositiveDefinite(f"K(t) is singular at t = {self.t:.6g}: {self.K.reason}")
        return self.K

    def require_C(self) -> SpdFactor:
        if isinstance(self.C, SingularGramian):
            raise NotPositiveDefinite(f"C(t) is singular at t = {self.t:.6g}: {self.C.reason}")
        return self.C

    def log_det_tK(self) -> float:
        return self.require_K().log_det + self.K_matrix.shape[0] * math.log(self.t)

    def consistency_residual(self) -> float:
        """‖tK − e^{tB}Ce^{tB★}‖ / ‖tK‖."""
        if self.C_matrix is None:
            return float("nan")
        tK = self.t * self.K_matrix
        E = self.exp_tB
        return float(np.linalg.norm(tK - E @ self.C_matrix @ E.T) / np.linalg.norm(tK))


@lru_cache(maxsize=512)
def gramian_pair(model: ModelSpec, t: float) -> GramianPair:
    """Cached GramianPair; read-only, shared across workers."""
    t = _check_time(t)
    logger.debug("Gramian cache miss: %s N=%d t=%.6g", model.name, model.N, t)
    C, tK = _gramians(model, t)
    K = tK / t
    return GramianPair(
        t=t,
        C_matrix=C,
        K_matrix=K,
        C=_factor(C, "C(t)"),
        K=_factor(K, "K(t)"),
        exp_tB=mat_exp(model.B, t),
    )


def lyapunov_residual(model: ModelSpec, t: float) -> float:
    """‖e^{−tB}Qe^{−tB★} − Q + BC(t) + C(t)B★‖_F / (1 + ‖Q‖_F)."""
    C = gramian_C(model, t)
    E = mat_exp(-model.B, t)
    R = E @ model.Q @ E.T - model.Q + model.B @ C + C @ model.B.T
    return float(np.linalg.norm(R) / (1.0 + np.linalg.norm(model.Q)))


def small_time_slope(
    model: ModelSpec, times: Sequence[float] = (1e-3, 1e-4, 1e-5)
) -> tuple[float, list[float]]:
    """
    Log-log slope of ‖C(t) − tQ + (t²/2)(BQ+QB★)‖ against t, and the residuals.

    The slope is +inf when every residual vanishes identically.
    """
    Q, B = model.Q, model.B
    residuals = []
    for t in times:
        R = gramian_C(model, t) - t * Q + 0.5 * t * t * (B @ Q + Q @ B.T)
        residuals.append(float(np.linalg.norm(R)))
    if max(residuals) == 0.0:
        return math.inf, residuals
    slope = np.polyfit(np.log(times), np.log(np.maximum(residuals, 1e-300)), 1)[0]
    return float(slope), residuals


# --------------------------
# Report
# --------------------------
@dataclass(frozen=True)
class HypoReport:
    N: int
    kalman_rank: int
    is_hypoelliptic: bool
    trace_B: float
    lp_contractive: bool
    sampled_min_eig_K: list[tuple[float, float]] = field(default_factory=list)
    sampled_det_K: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "kalman_rank": self.kalman_rank,
            "is_hypoelliptic": self.is_hypoelliptic,
            "trace_B": self.trace_B,
            "lp_contractive": self.lp_contractive,
            "sampled_min_eig_K": [[t, v] for t, v in self.sampled_min_eig_K],
            "sampled_det_K": [[t, v] for t, v in self.sampled_det_K],
        }


def hypo_report(
    model: ModelSpec, sample_times: Sequence[float] = DEFAULT_SAMPLE_TIMES
) -> HypoReport:
    """Kalman rank decides; λ_min(K(t)) and det K(t) samples are diagnostics."""
    if not sample_times:
        raise DomainError("sample_times must be non-empty")
    rank = kalman_rank(model)
    min_eigs, dets = [], []
    for t in sample_times:
        K = gramian_K(model, _check_time(t))
        min_eigs.append((float(t), float(np.linalg.eigvalsh(K).min())))
        dets.append((float(t), float(np.linalg.det(K))))
    report = HypoReport(
        N=model.N,
        kalman_rank=rank,
        is_hypoelliptic=rank == model.N,
        trace_B=model.trace_B,
        lp_contractive=model.trace_B >= 0,
        sampled_min_eig_K=min_eigs,
        sampled_det_K=dets,
    )
    logger.info(
        "Hypoellipticity of %s: rank %d/%d, tr B = %g", model.name, rank, model.N, model.trace_B
    )
    return report
