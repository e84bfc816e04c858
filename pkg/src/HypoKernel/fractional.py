"""
fractional.py -- (−𝒜)ˢ and (−𝒦)ˢ by the semigroup form of Balakrishnan's formula.

    (−𝒜)ˢf(X) = −(s/Γ(1−s)) ∫₀^∞ t^{−1−s} [Pₜf(X) − f(X)] dt

On (0, split] the weight is absorbed by t = r^{1/(1−s)}; below SMALL_T the difference quotient
(Pₜf − f)/t is replaced by its exact Taylor polynomial in 𝒜f, 𝒜²f, … . On (split, ∞) the limit
lim Pₜf is integrated in closed form and the remainder with t = v^{−1/s} up to the horizon
t_max.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .funcspace import GaussPolyFunction, ModelSpec, SpaceTimeGaussPoly, apply_A_exact, apply_K_exact, fourier_exact
from .kernels import FractionalParams, require_hypoelliptic
from .quadrature import QuadratureConfig, adaptive_gk, power_graded
from .semigroup import apply_PK, apply_Pt, semigroup_limit
from .utils import LogManager

logger = LogManager.get("Fractional")

SMALL_T = 1e-4
TAYLOR_ORDER = 3
HEAT_ORACLE_AZIMUTH = 128
HEAT_ORACLE_POLAR = 32
HEAT_ORACLE_DECAY = 60.0


@dataclass(frozen=True)
class BalakrishnanResult:
    """Value of a fractional power at one point with the pieces that make it up."""

    value: float
    error: float
    horizon: float
    tail_bound: float
    limit_term: float

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "error": self.error,
            "horizon": self.horizon,
            "tail_bound": self.tail_bound,
            "limit_term": self.limit_term,
        }


def taylor_coefficients(apply_op: Callable, f, evaluate: Callable) -> list[float]:
    """[𝒜f(X), 𝒜²f(X)/2!, …] while the degree cap allows."""
    terms = []
    g = f
    for k in range(1, TAYLOR_ORDER + 1):
        try:
            g = apply_op(g)
        except DomainError:
            if not terms:
                raise
            break
        terms.append(evaluate(g) / math.factorial(k))
    return terms


def _balakrishnan(
    h: Callable[[float], float],
    f0: float,
    limit: float,
    sup: float,
    taylor: Sequence[float],
    s: float,
    quad: QuadratureConfig,
) -> BalakrishnanResult:
    split = quad.balakrishnan_split
    T = quad.t_max

    def quotient(t: float) -> float:
        if t < SMALL_T:
            return sum(c * t**k for k, c in enumerate(taylor))
        return (h(t) - f0) / t

    # ∫₀^split t^{−s}·(h − f0)/t dt
    head = power_graded(quotient, 1.0 - s, split, quad)

    limit_term = (limit - f0) * split ** (-s) / s

    # ∫_split^T t^{−1−s}(h − L) dt = (1/s) ∫_{T^{−s}}^{split^{−s}} (h(v^{−1/s}) − L) dv
    body = adaptive_gk(
        lambda v: h(v ** (-1.0 / s)) - limit, T ** (-s), split ** (-s), quad
    )
    tail_bound = 2.0 * sup * T ** (-s) / s
    logger.debug(
        "Balakrishnan s=%.3g: head %.3e, limit %.3e, body %.3e, tail ≤ %.2e (T=%.3g)",
        s, head.value, limit_term, body.value / s, tail_bound, T,
    )
    scale = -s * special.rgamma(1.0 - s)
    total = head.value + limit_term + body.value / s
    return BalakrishnanResult(
        value=float(scale * total),
        error=float(abs(scale) * (head.error + body.error / s)),
        horizon=T,
        tail_bound=tail_bound,
        limit_term=float(scale * limit_term),
    )


def frac_A_detailed(
    f: GaussPolyFunction, model: ModelSpec, X, s: float, quad: Optional[QuadratureConfig] = None
) -> BalakrishnanResult:
    FractionalParams(s)
    require_hypoelliptic(model)
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float)
    taylor = taylor_coefficients(lambda g: apply_A_exact(g, model), f, lambda g: g(X))
    return _balakrishnan(
        lambda t: apply_Pt(f, model, X, t, quad),
        f(X),
        semigroup_limit(f, model, X, quad),
        f.sup_bound(),
        taylor,
        s,
        quad,
    )


def frac_A(
    f: GaussPolyFunction, model: ModelSpec, X, s: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """(−𝒜)ˢf(X)."""
    return frac_A_detailed(f, model, X, s, quad).value


def frac_K_detailed(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    s: float,
    quad: Optional[QuadratureConfig] = None,
) -> BalakrishnanResult:
    FractionalParams(s)
    require_hypoelliptic(model)
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float)
    taylor = taylor_coefficients(lambda w: apply_K_exact(w, model), u, lambda w: w.evaluate(X, t))
    return _balakrishnan(
        lambda tau: apply_PK(u, model, X, t, tau, quad),
        u.evaluate(X, t),
        semigroup_limit(u, model, X, quad),
        u.sup_bound(),
        taylor,
        s,
        quad,
    )


def frac_K(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    s: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """(−𝒦)ˢu(X,t)."""
    return frac_K_detailed(u, model, X, t, s, quad).value


# --------------------------
# Heat oracle
# --------------------------
def _directions(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights integrating over the sphere S^{N−1}."""
    if N == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    psi = 2.0 * math.pi * np.arange(HEAT_ORACLE_AZIMUTH) / HEAT_ORACLE_AZIMUTH
    dpsi = 2.0 * math.pi / HEAT_ORACLE_AZIMUTH
    if N == 2:
        dirs = np.column_stack([np.cos(psi), np.sin(psi)])
        return dirs, np.full(HEAT_ORACLE_AZIMUTH, dpsi)
    if N == 3:
        c, wc = np.polynomial.legendre.leggauss(HEAT_ORACLE_POLAR)
        sn = np.sqrt(1.0 - c * c)
        dirs = np.array([[sn[i] * math.cos(p), sn[i] * math.sin(p), c[i]] for i in range(len(c)) for p in psi])
        weights = np.array([wc[i] * dpsi for i in range(len(c)) for _ in psi])
        return dirs, weights
    raise DomainError(f"frac_heat_oracle supports N ≤ 3, got N = {N}")


def frac_heat_oracle(
    f: GaussPolyFunction, X, s: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """
    (−Δ)ˢf(X) = ∫ (4π²|ξ|²)ˢ f̂(ξ) e^{2πi⟨X,ξ⟩} dξ in polar coordinates, s ∈ (0, 1].

    Radial integrals are power-graded in ρ^{N+2s}; f̂ is the exact transform.
    """
    if not (0.0 < s <= 1.0):
        raise DomainError(f"frac_heat_oracle needs s ∈ (0, 1], got {s}")
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float).reshape(-1)
    fhat = fourier_exact(f)
    n = f.N
    dirs, weights = _directions(n)
    lam = float(np.linalg.eigvalsh(fhat.shape).min())
    R = math.sqrt(HEAT_ORACLE_DECAY / lam) + float(np.linalg.norm(fhat.center))
    p = n + 2.0 * s
    factor = (2.0 * math.pi) ** (2.0 * s)

    total = 0.0
    for theta, w in zip(dirs, weights):

        def radial(rho: float, theta=theta) -> float:
            xi = rho * theta
            val = fhat.evaluate(xi)[0] * np.exp(2j * math.pi * (X @ xi))
            return factor * val.real

        total += w * power_graded(radial, p, R, quad).value
    return float(total)
