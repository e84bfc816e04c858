"""
semigroup.py -- Pₜ and the evolutive semigroup P^𝒦_τ on test functions.

Pₜf(X) = E[f(e^{tB}X + W)], W ~ N(0, 2tK(t)). For f = P(Y−X₀)·e^{−⟨M(Y−X₀),Y−X₀⟩} the Gaussian
factor of f is folded into the law first; what remains is a polynomial expectation that
Gauss–Hermite integrates exactly with deg//2 + 1 nodes per dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .covariance import gramian_pair, stationary_covariance
from .errors import DomainError
from .funcspace import (
    GaussPolyFunction,
    ModelSpec,
    SpaceTimeGaussPoly,
    apply_A_exact,
    apply_K_exact,
    fourier_exact,
    inverse_fourier_exact,
)
from .matfun import chol_logdet
from .quadrature import QuadratureConfig, adaptive_gk, gaussian_expectation, gh_node_count
from .utils import LogManager

logger = LogManager.get("Semigroup")

RATE_TOL = 1e-6
CONTRACTION_TOL = 1e-8


def _check_real(f: GaussPolyFunction) -> None:
    if not isinstance(f, GaussPolyFunction):
        raise TypeError("expected a GaussPolyFunction")
    if np.any(f.modulation):
        raise DomainError("semigroup quadrature needs an unmodulated function")


def _check_point(X, N: int) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1)
    if X.shape[0] != N:
        raise DomainError(f"point has length {X.shape[0]}, model has N = {N}")
    return X


@dataclass(frozen=True, eq=False)
class FoldedLaw:
    """N(mean, factor·factorᵀ) after folding a Gaussian factor into a law; log_scale is its mass."""

    mean: np.ndarray
    factor: np.ndarray
    log_scale: float


def fold_gaussian(f: GaussPolyFunction, mean: np.ndarray, L: np.ndarray) -> FoldedLaw:
    """
    Fold e^{−⟨M(Y−X₀),Y−X₀⟩} into Y ~ N(mean, LLᵀ).

    With G = I + 2LᵀML = JJᵀ the combined law has covariance RRᵀ, R = LJ^{−ᵀ}, and mean
    μ = m + RRᵀ·2M(X₀ − m); no inverse of LLᵀ is formed.
    """
    M = f.shape
    d = mean - f.center
    G = np.eye(M.shape[0]) + 2.0 * L.T @ M @ L
    J = chol_logdet(G)
    R = scipy.linalg.solve_triangular(J.chol, L.T, lower=True).T
    mu = mean - R @ (R.T @ (2.0 * M @ d))
    S = chol_logdet(np.linalg.inv(M) + 2.0 * L @ L.T, equilibrate=True)
    return FoldedLaw(mu, R, -0.5 * J.log_det - S.quad_form(d))


def gaussian_integral(
    f: GaussPolyFunction, mean: np.ndarray, L: np.ndarray, quad: QuadratureConfig
) -> complex:
    """E[f(Y)] for Y ~ N(mean, LLᵀ)."""
    law = fold_gaussian(f, mean, L)
    if f.poly.degree <= 0:
        return f.amplitude * f.poly.coefficient((0,) * f.N) * math.exp(law.log_scale)
    nodes = gh_node_count(quad.gh_nodes, f.poly.degree)
    expectation = gaussian_expectation(
        lambda Y: f.poly.evaluate(Y - f.center), law.mean, law.factor, nodes
    )
    return f.amplitude * expectation * math.exp(law.log_scale)


def transition_law(model: ModelSpec, X: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    pair = gramian_pair(model, float(t))
    K = pair.require_K()
    return pair.exp_tB @ X, math.sqrt(2.0 * t) * K.chol


def apply_Pt(
    f: GaussPolyFunction, model: ModelSpec, X, t: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """Pₜf(X) by Gauss–Hermite under the combined Gaussian; P₀f = f."""
    _check_real(f)
    X = _check_point(X, model.N)
    if t < 0:
        raise DomainError(f"t must be ≥ 0, got {t}")
    if t == 0:
        return f(X)
    quad = quad or QuadratureConfig()
    mean, L = transition_law(model, X, t)
    return float(gaussian_integral(f, mean, L, quad).real)


def apply_Pt_gauss_exact(f: GaussPolyFunction, model: ModelSpec, X, t: float) -> float:
    """
    Closed form for a pure Gaussian f:
    amplitude·det(I + 2ΣM)^{−1/2}·exp(−⟨(M⁻¹ + 2Σ)⁻¹(m − X₀), m − X₀⟩), m = e^{tB}X, Σ = 2tK(t).
    """
    _check_real(f)
    if f.poly.degree != 0:
        raise DomainError("apply_Pt_gauss_exact needs a purely Gaussian function")
    X = _check_point(X, model.N)
    if t < 0:
        raise DomainError(f"t must be ≥ 0, got {t}")
    if t == 0:
        return f(X)
    pair = gramian_pair(model, float(t))
    sigma = 2.0 * t * pair.K_matrix
    M = f.shape
    S = chol_logdet(np.linalg.inv(M) + 2.0 * sigma, equilibrate=True)
    log_det_M = chol_logdet(M).log_det
    d = pair.exp_tB @ X - f.center
    amp = (f.amplitude * f.poly.coefficient((0,) * f.N)).real
    return amp * math.exp(-0.5 * (log_det_M + S.log_det) - S.quad_form(d))


def propagate_gaussian(f: GaussPolyFunction, model: ModelSpec, t: float) -> GaussPolyFunction:
    """Pₜf as a function of X for a pure Gaussian f; again a Gaussian."""
    _check_real(f)
    if f.poly.degree != 0:
        raise DomainError("propagate_gaussian needs a purely Gaussian function")
    if t == 0:
        return f
    pair = gramian_pair(model, float(t))
    M = f.shape
    S = chol_logdet(np.linalg.inv(M) + 4.0 * t * pair.K_matrix, equilibrate=True)
    E = pair.exp_tB
    shape = E.T @ S.solve(E)
    amp = f.amplitude * f.poly.coefficient((0,) * f.N)
    amp *= math.exp(-0.5 * (chol_logdet(M).log_det + S.log_det))
    return GaussPolyFunction.gaussian(
        np.linalg.solve(E, f.center), (shape + shape.T) / 2.0, amp.real
    )


def apply_Pt_fourier(f: GaussPolyFunction, model: ModelSpec, X, t: float) -> float:
    """
    Pₜf(X) through its transform e^{−t·trB}·e^{−4π²⟨C(t)ξ,ξ⟩}·f̂(e^{−tB★}ξ), inverted exactly.
    """
    _check_real(f)
    X = _check_point(X, model.N)
    if t == 0:
        return f(X)
    pair = gramian_pair(model, float(t))
    C = pair.require_C()
    fhat = fourier_exact(f)
    shifted = fhat.compose_linear(np.linalg.inv(pair.exp_tB).T)
    damping = GaussPolyFunction.gaussian(
        np.zeros(model.N), 4.0 * math.pi**2 * C.matrix, math.exp(-t * model.trace_B)
    )
    back = inverse_fourier_exact(shifted.product(damping))
    return float(back.evaluate(X)[0].real)


def apply_PK(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    tau: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """P^𝒦_τ u(X,t) = P_τ of the slice Y ↦ u(Y, t − τ)."""
    if not isinstance(u, SpaceTimeGaussPoly):
        raise TypeError("apply_PK expects a SpaceTimeGaussPoly")
    if tau < 0:
        raise DomainError(f"τ must be ≥ 0, got {tau}")
    X = _check_point(X, model.N)
    weights = u.time_weights(t - tau)
    return float(
        sum(w * apply_Pt(f, model, X, tau, quad) for (f, _), w in zip(u.terms, weights) if w != 0.0)
    )


def semigroup_limit(
    f: Union[GaussPolyFunction, SpaceTimeGaussPoly],
    model: ModelSpec,
    X=None,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """
    lim Pₜf(X) as t → ∞: the invariant-measure expectation for Hurwitz B, 0 otherwise.

    For space-time data only time-independent terms survive; the limit does not depend on X.
    """
    quad = quad or QuadratureConfig()
    sigma = stationary_covariance(model)
    if sigma is None:
        return 0.0
    L = chol_logdet(sigma, equilibrate=True).chol
    zero = np.zeros(model.N)
    if isinstance(f, SpaceTimeGaussPoly):
        return float(
            sum(gaussian_integral(g, zero, L, quad).real for g, h in f.terms if h is None)
        )
    _check_real(f)
    return float(gaussian_integral(f, zero, L, quad).real)


def resolvent_apply(
    f: GaussPolyFunction,
    model: ModelSpec,
    lam: complex,
    X,
    quad: Optional[QuadratureConfig] = None,
) -> Union[float, complex]:
    """R(λ,𝒜)f(X) = ∫₀^∞ e^{−λt}Pₜf(X)dt, cut where e^{−Re λ·t}·sup|f| < tail_cut."""
    if np.real(lam) <= 0:
        raise DomainError(f"resolvent needs Re λ > 0, got {lam}")
    quad = quad or QuadratureConfig()
    X = _check_point(X, model.N)
    if model.trace_B < 0:
        logger.debug("Resolvent on tr B < 0 model %s: no bound asserted", model.name)
    bound = max(f.sup_bound(), 1e-300)
    horizon = min(quad.t_max, max(1.0, math.log(bound / quad.tail_cut) / np.real(lam)))
    logger.debug("Resolvent horizon %.4g for λ = %s", horizon, lam)

    def integrand(t: float):
        return np.exp(-lam * t) * apply_Pt(f, model, X, t, quad)

    split = min(1.0, horizon)
    total = adaptive_gk(integrand, 0.0, split, quad).value
    total = total + adaptive_gk(integrand, split, horizon, quad).value
    return complex(total) if np.iscomplexobj(total) else float(total)


# --------------------------
# Probes
# --------------------------
@dataclass
class RateRow:
    t: float
    deviation: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.deviation


@dataclass
class RateReport:
    rows: list[RateRow] = field(default_factory=list)
    slope: float = float("nan")

    @property
    def passed(self) -> bool:
        return all(r.margin >= 0 for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": [{"t": r.t, "deviation": r.deviation, "bound": r.bound, "margin": r.margin} for r in self.rows],
            "slope": self.slope,
            "passed": self.passed,
        }


def _slope(rows: Sequence[RateRow]) -> float:
    pts = sorted((r.t, r.deviation) for r in rows if r.deviation > 0)
    if len(pts) < 2:
        return float("nan")
    (t0, d0), (t1, d1) = pts[0], pts[1]
    return math.log(d1 / d0) / math.log(t1 / t0)


def rate_check(
    f: GaussPolyFunction,
    model: ModelSpec,
    t_grid: Sequence[float],
    X_grid: Sequence,
    quad: Optional[QuadratureConfig] = None,
) -> RateReport:
    """
    sup|Pₜf − f| ≤ sup|𝒜f|·t on the grid, with sup|𝒜f| bounded over all of ℝᴺ.

    The bound is `sup_bound()`, which sums the peak of every polynomial term and so
    overstates sup|𝒜f| whenever 𝒜f is not a pure Gaussian: for e^{−X²} on the heat model it
    gives 2 + 4/e where the supremum is 2. Margins are conservative accordingly.
    """
    if any(not (0 < t <= 1) for t in t_grid):
        raise DomainError("rate_check needs t_grid ⊂ (0, 1]")
    Af = apply_A_exact(f, model)
    sup_Af = Af.sup_bound()
    report = RateReport()
    for t in t_grid:
        dev = max(abs(apply_Pt(f, model, X, t, quad) - f(np.asarray(X, float))) for X in X_grid)
        report.rows.append(RateRow(float(t), dev, sup_Af * t + RATE_TOL))
    report.slope = _slope(report.rows)
    return report


def rate_check_K(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    t_grid: Sequence[float],
    point_grid: Sequence[tuple],
    quad: Optional[QuadratureConfig] = None,
) -> RateReport:
    """sup|P^𝒦_τ u − u| ≤ sup|𝒦u|·τ on (X, t) points."""
    if any(not (0 < t <= 1) for t in t_grid):
        raise DomainError("rate_check_K needs τ-grid ⊂ (0, 1]")
    Ku = apply_K_exact(u, model)
    sup_Ku = Ku.sup_bound()
    report = RateReport()
    for tau in t_grid:
        dev = max(
            abs(apply_PK(u, model, X, t, tau, quad) - u.evaluate(X, t)) for X, t in point_grid
        )
        report.rows.append(RateRow(float(tau), dev, sup_Ku * tau + RATE_TOL))
    report.slope = _slope(report.rows)
    return report


def contraction_probe(
    f: GaussPolyFunction,
    model: ModelSpec,
    t_grid: Sequence[float],
    X_grid: Sequence,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """max_t sup_grid|Pₜf| − sup_grid|f|; ≤ 1e−8 expected."""
    sup_f = max(abs(f(np.asarray(X, float))) for X in X_grid)
    sup_pt = max(abs(apply_Pt(f, model, X, t, quad)) for t in t_grid for X in X_grid)
    return sup_pt - sup_f


def commutation_probe(
    f: GaussPolyFunction,
    model: ModelSpec,
    X,
    t: float,
    h: float = 1e-4,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """|Pₜ(𝒜f)(X) − ∂ₜPₜf(X)| relative, the derivative by central differences."""
    if t <= h:
        raise DomainError("commutation_probe needs t > h")
    lhs = apply_Pt(apply_A_exact(f, model), model, X, t, quad)
    rhs = (apply_Pt(f, model, X, t + h, quad) - apply_Pt(f, model, X, t - h, quad)) / (2.0 * h)
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def cauchy_residual(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    tau: float,
    h: float = 1e-3,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """
    Finite-difference residual of ∂_τ v = 𝒦v for v(X,t;τ) = P^𝒦_τ u(X,t), relative to the
    sum of the term magnitudes.
    """
    if tau <= h:
        raise DomainError("cauchy_residual needs τ > h")
    X = _check_point(X, model.N)
    n = model.N
    eye = np.eye(n)

    def v(Xp, tp=t, taup=tau):
        return apply_PK(u, model, Xp, tp, taup, quad)

    v0 = v(X)
    d_tau = (v(X, t, tau + h) - v(X, t, tau - h)) / (2 * h)
    d_t = (v(X, t + h) - v(X, t - h)) / (2 * h)
    grad = np.array([(v(X + h * eye[i]) - v(X - h * eye[i])) / (2 * h) for i in range(n)])
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if model.Q[i, j] == 0.0:
                continue
            if i == j:
                hess[i, i] = (v(X + h * eye[i]) - 2 * v0 + v(X - h * eye[i])) / h**2
            else:
                hess[i, j] = (
                    v(X + h * (eye[i] + eye[j]))
                    - v(X + h * (eye[i] - eye[j]))
                    - v(X - h * (eye[i] - eye[j]))
                    + v(X - h * (eye[i] + eye[j]))
                ) / (4 * h * h)
    diffusion = float(np.sum(model.Q * hess))
    drift = float((model.B @ X) @ grad)
    residual = d_tau - (diffusion + drift - d_t)
    scale = abs(d_tau) + abs(diffusion) + abs(drift) + abs(d_t)
    return abs(residual) / max(scale, 1e-300)
