"""
kernels.py -- Pointwise kernels.

Hörmander's Gaussian fundamental solution (K-form and C-form), its X-gradient, the explicit
Kolmogorov kernel, modified Bessel functions, the Bessel heat kernel p^{(a)}, the profile
g^{(a)}, the Neumann fundamental solution 𝒢^{(a)} and the Poisson kernels P^{(a)}_z, 𝒫^{(a)}.

Everything is assembled in log-space and exponentiated last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import special

from .covariance import gramian_pair, stationary_covariance
from .errors import DomainError, PreconditionError
from .funcspace import ModelSpec, kolmogorov_model
from .matfun import SpdFactor, chol_logdet, kalman_rank, mat_exp
from .quadrature import (
    QuadratureConfig,
    adaptive_gk,
    gamma_weighted,
    gaussian_expectation,
    power_graded,
)
from .utils import LogManager

logger = LogManager.get("Kernels")

LOG_4PI = math.log(4.0 * math.pi)
BESSEL_SERIES_MAX_X = 30.0
KernelForm = Literal["K", "C"]


# --------------------------
# Parameters and points
# --------------------------
@dataclass(frozen=True)
class FractionalParams:
    """s ∈ (0,1) and a = 1 − 2s."""

    s: float

    def __post_init__(self) -> None:
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must lie in (0, 1), got {self.s}")

    @classmethod
    def from_a(cls, a: float) -> FractionalParams:
        if not (-1.0 < a < 1.0):
            raise DomainError(f"a must lie in (−1, 1), got {a}")
        return cls((1.0 - a) / 2.0)

    @property
    def a(self) -> float:
        return 1.0 - 2.0 * self.s

    @property
    def alpha(self) -> float:
        """(1 − a)/2, the exponent of the subordinating Gamma law (equals s)."""
        return (1.0 - self.a) / 2.0


@dataclass(frozen=True)
class KernelPoint:
    X: np.ndarray
    Y: np.ndarray
    t: float
    z: Optional[float] = None
    zeta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.t <= 0:
            raise DomainError(f"kernel evaluation needs t > 0, got {self.t}")
        for name in ("z", "zeta"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise DomainError(f"{name} must be ≥ 0, got {v}")


def check_a(a: float) -> float:
    if not (-1.0 < a < 1.0):
        raise DomainError(f"a must lie in (−1, 1), got {a}")
    return float(a)


def _points(P, N: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(P, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != N:
        raise DomainError(f"points must have length {N}, got shape {np.shape(P)}")
    return arr, single


def _quad_forms(factor: SpdFactor, V: np.ndarray) -> np.ndarray:
    """⟨M⁻¹v, v⟩ for every row v of V."""
    W = scipy.linalg.solve_triangular(factor.chol, V.T, lower=True)
    return np.sum(W * W, axis=0)


# --------------------------
# Hörmander kernel
# --------------------------
def log_hormander_kernel(model: ModelSpec, X, Y, t: float, form: KernelForm = "K"):
    """log p(X,Y,t); X and Y may be single points or (n, N) batches (broadcast)."""
    Xa, sx = _points(X, model.N)
    Ya, sy = _points(Y, model.N)
    pair = gramian_pair(model, float(t))
    n = model.N
    if form == "K":
        K = pair.require_K()
        V = Ya - Xa @ pair.exp_tB.T
        logp = -0.5 * n * LOG_4PI - 0.5 * pair.log_det_tK() - _quad_forms(K, V) / (4.0 * t)
    elif form == "C":
        C = pair.require_C()
        V = Xa - Ya @ mat_exp(-model.B, t).T
        logp = -0.5 * n * LOG_4PI - t * model.trace_B - 0.5 * C.log_det - _quad_forms(C, V) / 4.0
    else:
        raise DomainError(f"unknown kernel form {form!r}")
    return float(logp[0]) if (sx and sy) else logp


def hormander_kernel(model: ModelSpec, X, Y, t: float, form: KernelForm = "K"):
    """p(X,Y,t) in the K-form or the C-form."""
    return np.exp(log_hormander_kernel(model, X, Y, t, form))


def hormander_kernel_gradX(model: ModelSpec, X, Y, t: float) -> np.ndarray:
    """∇_X p = −½ C(t)⁻¹(X − e^{−tB}Y)·p."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    pair = gramian_pair(model, float(t))
    C = pair.require_C()
    w = X - mat_exp(-model.B, t) @ Y
    return -0.5 * C.solve(w) * hormander_kernel(model, X, Y, t, form="C")


def kernel_limit(model: ModelSpec, Y) -> float:
    """lim_{t→∞} p(X,Y,t): the invariant density for Hurwitz B, else 0."""
    sigma = stationary_covariance(model)
    if sigma is None:
        return 0.0
    factor = chol_logdet(sigma, equilibrate=True)
    Y = np.asarray(Y, dtype=float)
    n = model.N
    return math.exp(
        -0.5 * n * math.log(2.0 * math.pi) - 0.5 * factor.log_det - 0.5 * factor.quad_form(Y)
    )


def _kernel_moments(model: ModelSpec, X, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Mean e^{tB}X and a factor L with LLᵀ = 2tK(t) of Y ↦ p(X,Y,t)."""
    pair = gramian_pair(model, float(t))
    K = pair.require_K()
    return pair.exp_tB @ np.asarray(X, float), math.sqrt(2.0 * t) * K.chol


def kernel_mass_Y(model: ModelSpec, X, t: float, nodes: int = 40) -> float:
    """∫ p(X,Y,t) dY by Gauss–Hermite under a widened reference Gaussian."""
    mean, L = _kernel_moments(model, X, t)
    ref = 1.5 * L
    ref_factor = SpdFactor(ref @ ref.T, ref, 2.0 * float(np.sum(np.log(np.abs(np.diag(ref))))))
    n = model.N

    def ratio(Ys: np.ndarray) -> np.ndarray:
        D = Ys - mean
        log_ref = (
            -0.5 * n * math.log(2.0 * math.pi)
            - 0.5 * ref_factor.log_det
            - 0.5 * _quad_forms(ref_factor, D)
        )
        return np.exp(log_hormander_kernel(model, X, Ys, t) - log_ref)

    return gaussian_expectation(ratio, mean, ref, nodes).real


def kernel_mass_X(model: ModelSpec, Y, t: float, nodes: int = 40) -> float:
    """∫ p(X,Y,t) dX (= e^{−t·trB}) under a widened reference Gaussian in X."""
    pair = gramian_pair(model, float(t))
    C = pair.require_C()
    mean = mat_exp(-model.B, t) @ np.asarray(Y, float)
    ref = 1.5 * math.sqrt(2.0) * C.chol
    ref_factor = SpdFactor(ref @ ref.T, ref, 2.0 * float(np.sum(np.log(np.abs(np.diag(ref))))))
    n = model.N

    def ratio(Xs: np.ndarray) -> np.ndarray:
        log_ref = (
            -0.5 * n * math.log(2.0 * math.pi)
            - 0.5 * ref_factor.log_det
            - 0.5 * _quad_forms(ref_factor, Xs - mean)
        )
        return np.exp(log_hormander_kernel(model, Xs, Y, t, form="C") - log_ref)

    return gaussian_expectation(ratio, mean, ref, nodes).real


def chapman_kolmogorov_residual(
    model: ModelSpec, X, Y, s: float, t: float, nodes: int = 40
) -> float:
    """|∫p(X,Z,s)p(Z,Y,t)dZ − p(X,Y,s+t)| / p(X,Y,s+t)."""
    mean, L = _kernel_moments(model, X, s)

    def integrand(Zs: np.ndarray) -> np.ndarray:
        return hormander_kernel(model, Zs, Y, t)

    value = gaussian_expectation(integrand, mean, L, nodes).real
    target = hormander_kernel(model, X, Y, s + t)
    return abs(value - target) / target


# --------------------------
# Kolmogorov explicit kernel
# --------------------------
def kolmogorov_constant(n: int) -> float:
    """c_n = (√3/(2π))ⁿ, fixed by unit mass of the explicit kernel."""
    if n < 1:
        raise DomainError("n must be ≥ 1")
    return (math.sqrt(3.0) / (2.0 * math.pi)) ** n


def kolmogorov_kernel_explicit(v, x, w, y, t: float, n: int) -> float:
    """
    c_n t^{−2n} exp{−(1/t)(|v−w|² + (3/t)⟨v−w, y−x−tv⟩ + (3/t²)|x−y+tv|²)}

    for the Kolmogorov operator on ℝ^{2n}, X = (v, x), Y = (w, y).
    """
    if t <= 0:
        raise DomainError(f"t must be > 0, got {t}")
    v, x, w, y = (np.asarray(u, dtype=float).reshape(n) for u in (v, x, w, y))
    d = v - w
    e = y - x - t * v
    expo = (d @ d + (3.0 / t) * (d @ e) + (3.0 / t**2) * (e @ e)) / t
    return math.exp(math.log(kolmogorov_constant(n)) - 2.0 * n * math.log(t) - expo)


def kolmogorov_literal_discrepancy(points: Sequence[KernelPoint], n: int = 1) -> dict:
    """
    Compare the explicit kernel with the general K-form on the Kolmogorov model.

    Points carry X = (v, x), Y = (w, y). The report lists the largest relative difference and
    whether it stays within 1e−8.
    """
    model = kolmogorov_model(n)
    diffs = []
    for p in points:
        X, Y = np.asarray(p.X, float), np.asarray(p.Y, float)
        general = hormander_kernel(model, X, Y, p.t)
        explicit = kolmogorov_kernel_explicit(X[:n], X[n:], Y[:n], Y[n:], p.t, n)
        diffs.append(abs(explicit - general) / max(abs(general), 1e-300))
    worst = max(diffs, default=0.0)
    if worst > 1e-8:
        logger.warning("Explicit Kolmogorov kernel disagrees with the K-form: %.3e", worst)
    return {
        "n": n,
        "c_n": kolmogorov_constant(n),
        "points": len(diffs),
        "max_rel_diff": worst,
        "agrees": worst <= 1e-8,
    }


# --------------------------
# Modified Bessel functions
# --------------------------
def _check_bessel(nu: float, x: float) -> None:
    if nu <= -1.0:
        raise DomainError(f"bessel_I needs ν > −1, got {nu}")
    if x < 0 or not math.isfinite(x):
        raise DomainError(f"bessel_I needs finite x ≥ 0, got {x}")


def _power_series(nu: float, x: float) -> float:
    """x^{−ν} I_ν(x) = 2^{−ν} Σ (x²/4)^k / (k! Γ(k+ν+1))."""
    q = 0.25 * x * x
    term = float(special.rgamma(nu + 1.0))
    total = term
    k = 0
    while k < 500:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if k * k > q and term <= 1e-17 * total:
            break
    return total * 2.0 ** (-nu)


def _hankel_log(nu: float, x: float) -> float:
    """log I_ν(x) from e^x/√(2πx) Σ (−1)^k a_k(ν)/x^k, for large x."""
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    prev = math.inf
    for k in range(1, 200):
        term *= -(mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if abs(term) >= prev:
            break
        total += term
        prev = abs(term)
        if prev <= 1e-17 * abs(total):
            break
    return x - 0.5 * math.log(2.0 * math.pi * x) + math.log(total)


def log_bessel_I(nu: float, x: float) -> float:
    _check_bessel(nu, x)
    if x == 0.0:
        if nu == 0.0:
            return 0.0
        return -math.inf if nu > 0 else math.inf
    if x <= BESSEL_SERIES_MAX_X:
        return nu * math.log(x) + math.log(_power_series(nu, x))
    return _hankel_log(nu, x)


def bessel_I(nu: float, x: float) -> float:
    """I_ν(x): ascending series for x ≤ 30, asymptotic expansion beyond."""
    return math.exp(log_bessel_I(nu, x))


def bessel_I_scaled(nu: float, x: float) -> float:
    """e^{−x} I_ν(x)."""
    return math.exp(log_bessel_I(nu, x) - x)


def log_bessel_I_power(nu: float, x: float) -> float:
    """log(x^{−ν} I_ν(x)); regular at x = 0."""
    _check_bessel(nu, x)
    if x <= BESSEL_SERIES_MAX_X:
        return math.log(_power_series(nu, x))
    return _hankel_log(nu, x) - nu * math.log(x)


def bessel_I_power(nu: float, x: float) -> float:
    """x^{−ν} I_ν(x), equal to 1/(2^ν Γ(ν+1)) at x = 0."""
    return math.exp(log_bessel_I_power(nu, x))


# --------------------------
# Extension-variable kernels
# --------------------------
def log_bessel_heat_kernel(a: float, z: float, zeta: float, t: float) -> float:
    a = check_a(a)
    if z < 0 or zeta < 0 or t <= 0:
        raise DomainError("bessel_heat_kernel needs z, ζ ≥ 0 and t > 0")
    nu = (a - 1.0) / 2.0
    xi = z * zeta / (2.0 * t)
    return (
        -0.5 * (a + 1.0) * math.log(2.0 * t)
        + log_bessel_I_power(nu, xi)
        - (z * z + zeta * zeta) / (4.0 * t)
    )


def bessel_heat_kernel(a: float, z: float, zeta: float, t: float) -> float:
    """
    p^{(a)}(z,ζ,t) = (2t)^{−(a+1)/2} (zζ/2t)^{(1−a)/2} I_{(a−1)/2}(zζ/2t) e^{−(z²+ζ²)/4t}.

    Written as (2t)^{−(a+1)/2}·ξ^{−ν}I_ν(ξ)·e^{−(z²+ζ²)/4t} with ν = (a−1)/2, which is regular
    at ζ = 0.
    """
    return math.exp(log_bessel_heat_kernel(a, z, zeta, t))


def bessel_mass(a: float, z: float, t: float, quad: Optional[QuadratureConfig] = None) -> float:
    """∫₀^∞ p^{(a)}(z,ζ,t) ζ^a dζ."""
    quad = quad or QuadratureConfig()
    upper = z + 40.0 * math.sqrt(t)
    res = power_graded(lambda zeta: bessel_heat_kernel(a, z, zeta, t), a + 1.0, upper, quad)
    return float(res.value)


def bessel_reproducing_residual(
    a: float, z: float, zeta: float, t: float, s: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """|∫₀^∞ p^{(a)}(z,η,t) p^{(a)}(η,ζ,s) η^a dη − p^{(a)}(z,ζ,t+s)|."""
    quad = quad or QuadratureConfig()
    upper = max(z, zeta) + 40.0 * math.sqrt(max(t, s))

    def integrand(eta: float) -> float:
        return math.exp(log_bessel_heat_kernel(a, z, eta, t) + log_bessel_heat_kernel(a, eta, zeta, s))

    res = power_graded(integrand, a + 1.0, upper, quad)
    return abs(float(res.value) - bessel_heat_kernel(a, z, zeta, t + s))


def log_g_profile(a: float, z: float, t: float) -> float:
    a = check_a(a)
    if z <= 0 or t <= 0:
        raise DomainError("g_profile needs z > 0 and t > 0")
    alpha = (1.0 - a) / 2.0
    return (
        (1.0 - a) * (math.log(z) - math.log(2.0))
        - special.gammaln(alpha)
        - 0.5 * (3.0 - a) * math.log(t)
        - z * z / (4.0 * t)
    )


def g_profile(a: float, z: float, t: float) -> float:
    """g^{(a)}(z,t) = z^{1−a} t^{−(3−a)/2} e^{−z²/4t} / (2^{1−a} Γ((1−a)/2))."""
    return math.exp(log_g_profile(a, z, t))


def g_profile_dt(a: float, z: float, t: float) -> float:
    """∂_t g^{(a)}."""
    return g_profile(a, z, t) * (z * z / (4.0 * t * t) - (3.0 - a) / (2.0 * t))


def g_profile_bessel(a: float, z: float, t: float) -> float:
    """𝓑_z^{(a)} g = ∂²_z g + (a/z)∂_z g, from the z-derivatives term by term."""
    g = g_profile(a, z, t)
    first = (1.0 - a) / z - z / (2.0 * t)
    second = first * first - (1.0 - a) / (z * z) - 1.0 / (2.0 * t)
    return g * (second + (a / z) * first)


def g_normalization_integral(a: float, z: float, quad: Optional[QuadratureConfig] = None) -> float:
    """∫₀^∞ t^{−(3−a)/2} e^{−z²/4t} dt (= 2^{1−a}Γ((1−a)/2) z^{a−1})."""
    a = check_a(a)
    quad = quad or QuadratureConfig()
    head = adaptive_gk(lambda t: t ** (-(3.0 - a) / 2.0) * math.exp(-z * z / (4.0 * t)), 0.0, 1.0, quad)
    # t = 1/v on [1, ∞): v^{−(1+a)/2} e^{−z²v/4} on (0, 1]
    tail = power_graded(lambda v: math.exp(-z * z * v / 4.0), (1.0 - a) / 2.0, 1.0, quad)
    return float(head.value) + float(tail.value)


def neumann_G(
    model: ModelSpec, a: float, X, t: float, z: float, Y, tau: float, zeta: float
) -> float:
    """𝒢^{(a)}(X,t,z;Y,τ,ζ) = p(X,Y,t−τ)·p^{(a)}(z,ζ,t−τ); closed form when ζ = 0."""
    a = check_a(a)
    if t <= tau:
        raise DomainError(f"neumann_G needs t > τ, got t={t}, τ={tau}")
    s = t - tau
    log_p = log_hormander_kernel(model, X, Y, s)
    if zeta == 0.0:
        log_b = (
            -a * math.log(2.0)
            - special.gammaln((a + 1.0) / 2.0)
            - 0.5 * (a + 1.0) * math.log(s)
            - z * z / (4.0 * s)
        )
    else:
        log_b = log_bessel_heat_kernel(a, z, zeta, s)
    return math.exp(log_p + log_b)


def poisson_time_kernel(model: ModelSpec, a: float, X, Y, t: float, z: float):
    """P^{(a)}_z(X,Y,t) = g^{(a)}(z,t)·p(X,Y,t); Y may be an (n, N) batch."""
    if z <= 0 or t <= 0:
        raise DomainError("poisson_time_kernel needs z > 0 and t > 0")
    val = np.exp(log_g_profile(a, z, t) + log_hormander_kernel(model, X, Y, t))
    return float(val) if np.ndim(val) == 0 else val


def poisson_space_kernel(
    model: ModelSpec, a: float, X, Y, z: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """
    𝒫^{(a)}(X,Y,z) = ∫₀^∞ P^{(a)}_z(X,Y,t) dt.

    With t = z²/(4u) the weight g dt becomes the Gamma((1−a)/2) law in u, so the integral is
    (1/Γ(α)) ∫ u^{α−1} e^{−u} p(X,Y,z²/4u) du.
    """
    a = check_a(a)
    if z <= 0:
        raise DomainError("poisson_space_kernel needs z > 0")
    quad = quad or QuadratureConfig()
    alpha = (1.0 - a) / 2.0
    zz = z * z / 4.0
    res = gamma_weighted(
        lambda u: hormander_kernel(model, X, Y, zz / u),
        alpha,
        quad,
        w_min=zz / quad.t_max,
        limit_at_zero=kernel_limit(model, Y),
    )
    return float(res.value)


def poisson_kernel_mass(
    model: ModelSpec, a: float, X, z: float, quad: Optional[QuadratureConfig] = None
) -> float:
    """∫∫ P^{(a)}_z(X,Y,t) dY dt, the Y-mass taken by Gauss–Hermite at each t = z²/4u."""
    a = check_a(a)
    if z <= 0:
        raise DomainError("poisson_kernel_mass needs z > 0")
    quad = quad or QuadratureConfig()
    zz = z * z / 4.0
    res = gamma_weighted(
        lambda u: kernel_mass_Y(model, X, zz / u, quad.gh_nodes),
        (1.0 - a) / 2.0,
        quad,
        w_min=zz / quad.t_max,
        limit_at_zero=1.0,
    )
    return float(res.value)


def require_hypoelliptic(model: ModelSpec) -> None:
    """PreconditionError unless the Kalman rank is full."""
    rank = kalman_rank(model)
    if rank != model.N:
        raise PreconditionError(
            f"model {model.name!r} is not hypoelliptic (Kalman rank {rank} < N = {model.N})"
        )
