"""
extension.py -- Extension problems for 𝒦_a and 𝒜_a and their boundary limits.

U(X,t,z) = ∫₀^∞ g^{(a)}(z,τ)·P^𝒦_τu(X,t) dτ. With τ = z²/(4w) the weight becomes the
Gamma((1−a)/2) law in w, which is what the quadrature integrates. The weighted normal
derivative −c_a·z^a∂_zU is differentiated under the integral sign:

    −c_a z^a ∂_zU = ((4/z²)ˢ/Γ(1−s)) ∫₀^∞ (w − s) w^{s−1} e^{−w} [P^𝒦_{z²/4w}u − u] dw

with s = (1−a)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
from scipy import special

from .errors import DomainError
from .fractional import SMALL_T, frac_A, frac_K, taylor_coefficients
from .funcspace import (
    GaussPolyFunction,
    ModelSpec,
    SpaceTimeGaussPoly,
    apply_A_exact,
    apply_K_exact,
)
from .kernels import FractionalParams, check_a, log_g_profile, poisson_time_kernel
from .quadrature import (
    QuadratureConfig,
    adaptive_gk,
    gamma_weighted,
    gauss_hermite_rule,
    gh_node_count,
    power_graded,
)
from .semigroup import apply_PK, apply_Pt, fold_gaussian, semigroup_limit, transition_law
from .utils import LogManager

logger = LogManager.get("Extension")

DEFAULT_Z_GRID = tuple(0.2 * 2.0**-k for k in range(5))
FieldName = Literal["extend_K", "extend_A", "poisson_time_kernel"]


def _check_z(z: float) -> float:
    z = float(z)
    if not (math.isfinite(z) and z >= 0):
        raise DomainError(f"z must be ≥ 0, got {z}")
    return z


def _subordinate(
    F: Callable[[float], float], limit: float, a: float, z: float, quad: QuadratureConfig
) -> float:
    alpha = (1.0 - a) / 2.0
    zz = z * z / 4.0
    res = gamma_weighted(
        lambda w: F(zz / w),
        alpha,
        quad,
        w_min=zz / quad.t_max,
        limit_at_zero=limit,
        split=quad.balakrishnan_split,
    )
    return float(res.value)


def extend_K(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    z: float,
    a: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """U(X,t,z) by subordination of P^𝒦; U(X,t,0) = u(X,t)."""
    a = check_a(a)
    z = _check_z(z)
    if z == 0:
        return u.evaluate(X, t)
    quad = quad or QuadratureConfig()
    return _subordinate(
        lambda tau: apply_PK(u, model, X, t, tau, quad),
        semigroup_limit(u, model, X, quad),
        a,
        z,
        quad,
    )


def extend_A(
    phi: GaussPolyFunction,
    model: ModelSpec,
    X,
    z: float,
    a: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """U(X,z) = ∫₀^∞ g^{(a)}(z,t)·Pₜφ(X) dt; U(X,0) = φ(X)."""
    a = check_a(a)
    z = _check_z(z)
    if z == 0:
        return phi(np.asarray(X, dtype=float))
    quad = quad or QuadratureConfig()
    return _subordinate(
        lambda t: apply_Pt(phi, model, X, t, quad),
        semigroup_limit(phi, model, X, quad),
        a,
        z,
        quad,
    )


def _direct_inner(
    f: GaussPolyFunction, model: ModelSpec, X: np.ndarray, tau: float, z: float, a: float, quad
) -> float:
    """∫ P^{(a)}_z(X,Y,τ)·f(Y) dY with nodes of the folded law and the kernel evaluated pointwise."""
    mean, L = transition_law(model, X, tau)
    law = fold_gaussian(f, mean, L)
    nodes = gh_node_count(quad.gh_nodes, f.poly.degree)
    x, w = gauss_hermite_rule(nodes)
    n = model.N
    grid = np.stack(np.meshgrid(*([np.arange(nodes)] * n), indexing="ij"), -1).reshape(-1, n)
    W = math.sqrt(2.0) * x[grid]
    weights = np.prod(w[grid] / math.sqrt(math.pi), axis=1)
    pts = law.mean + W @ law.factor.T
    _, logdet = np.linalg.slogdet(law.factor)
    log_q = -0.5 * n * math.log(2.0 * math.pi) - logdet - 0.5 * np.sum(W * W, axis=1)
    kernel = poisson_time_kernel(model, a, X, pts, tau, z)
    ratio = np.atleast_1d(kernel) * np.exp(-log_q)
    return float(np.sum(weights * ratio * f.evaluate(pts).real))


def extend_K_direct(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    z: float,
    a: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """
    U(X,t,z) = ∫₀^∞∫ P^{(a)}_z(X,Y,τ)·u(Y,t−τ) dY dτ, directly in τ.

    (0,1] is integrated plainly; [1,∞) through τ = 1/v, where the weight v^{−(1+a)/2} is
    power-graded.
    """
    a = check_a(a)
    z = _check_z(z)
    if z == 0:
        return u.evaluate(X, t)
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float)

    def inner(tau: float) -> float:
        weights = u.time_weights(t - tau)
        return sum(
            wk * _direct_inner(fk, model, X, tau, z, a, quad)
            for (fk, _), wk in zip(u.terms, weights)
            if wk != 0.0
        )

    head = adaptive_gk(inner, 0.0, 1.0, quad)
    log_c = (1.0 - a) * (math.log(z) - math.log(2.0)) - special.gammaln((1.0 - a) / 2.0)

    def tail(v: float) -> float:
        tau = min(1.0 / v, quad.t_max)
        # g(z,1/v)/v² = reduced·v^{−(1+a)/2}; inner already carries g(z,τ)
        g = math.exp(log_g_profile(a, z, tau))
        if g == 0.0:
            return 0.0
        reduced = math.exp(log_c - z * z * v / 4.0)
        return reduced * inner(tau) / g

    body = power_graded(tail, (1.0 - a) / 2.0, 1.0, quad)
    return float(head.value + body.value)


# --------------------------
# Neumann limit
# --------------------------
def dtn_leading_coefficient(s: float) -> float:
    """c(s) with dtn − (−𝒦)ˢu ≈ c(s)·z^{2−2s}·𝒦u as z → 0."""
    FractionalParams(s)
    return 4.0 ** (s - 1.0) * special.gamma(s) / ((1.0 - s) * special.gamma(1.0 - s))


def _dtn(
    delta: Callable[[float], float],
    limit_gap: float,
    taylor: Sequence[float],
    s: float,
    z: float,
    quad: QuadratureConfig,
) -> float:
    if not (math.isfinite(z) and z > 0):
        raise DomainError(f"the Neumann quotient needs z > 0, got {z}")
    zz = z * z / 4.0

    def diff(tau: float) -> float:
        if tau < SMALL_T:
            return sum(c * tau ** (k + 1) for k, c in enumerate(taylor))
        return delta(tau)

    w_min = zz / quad.t_max
    res = gamma_weighted(
        lambda w: (w - s) * diff(zz / w),
        s,
        quad,
        w_min=w_min,
        split=quad.balakrishnan_split,
    )
    integral = res.value * special.gamma(s) - limit_gap * w_min**s * math.exp(-w_min)
    return float((4.0 / (z * z)) ** s * special.rgamma(1.0 - s) * integral)


def dtn_K(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    X,
    t: float,
    s: float,
    z: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """−c_a·z^a∂_zU(X,t,z) with a = 1 − 2s, from the differentiated subordination integral."""
    FractionalParams(s)
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float)
    u0 = u.evaluate(X, t)
    taylor = taylor_coefficients(lambda w: apply_K_exact(w, model), u, lambda w: w.evaluate(X, t))
    return _dtn(
        lambda tau: apply_PK(u, model, X, t, tau, quad) - u0,
        semigroup_limit(u, model, X, quad) - u0,
        taylor,
        s,
        z,
        quad,
    )


def dtn_A(
    phi: GaussPolyFunction,
    model: ModelSpec,
    X,
    s: float,
    z: float,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """Stationary Neumann quotient, converging to (−𝒜)ˢφ(X)."""
    FractionalParams(s)
    quad = quad or QuadratureConfig()
    X = np.asarray(X, dtype=float)
    f0 = phi(X)
    taylor = taylor_coefficients(lambda g: apply_A_exact(g, model), phi, lambda g: g(X))
    return _dtn(
        lambda t: apply_Pt(phi, model, X, t, quad) - f0,
        semigroup_limit(phi, model, X, quad) - f0,
        taylor,
        s,
        z,
        quad,
    )


# --------------------------
# PDE residual
# --------------------------
def pde_residual(
    model: ModelSpec,
    a: float,
    field: FieldName,
    point: Sequence,
    h: float = 1e-3,
    *,
    data: Union[SpaceTimeGaussPoly, GaussPolyFunction, np.ndarray, None] = None,
    quad: Optional[QuadratureConfig] = None,
) -> float:
    """
    |𝒜U + 𝓑_z^{(a)}U − ∂_tU| / (sum of the term magnitudes) by central differences.

    point is (X, t, z) for extend_K and poisson_time_kernel (whose pole Y is `data`, default 0)
    and (X, z) for extend_A. The z step is h·z.
    """
    a = check_a(a)
    quad = quad or QuadratureConfig()
    n = model.N
    if field == "extend_A":
        X, z = point
        t = 0.0
        if not isinstance(data, GaussPolyFunction):
            raise DomainError("extend_A residual needs a GaussPolyFunction as data")

        def U(Xp, tp, zp):
            return extend_A(data, model, Xp, zp, a, quad)

    elif field == "extend_K":
        X, t, z = point
        if not isinstance(data, SpaceTimeGaussPoly):
            raise DomainError("extend_K residual needs a SpaceTimeGaussPoly as data")

        def U(Xp, tp, zp):
            return extend_K(data, model, Xp, tp, zp, a, quad)

    elif field == "poisson_time_kernel":
        X, t, z = point
        pole = np.zeros(n) if data is None else np.asarray(data, dtype=float)

        def U(Xp, tp, zp):
            return poisson_time_kernel(model, a, Xp, pole, tp, zp)

    else:
        raise DomainError(f"unknown field {field!r}")

    X = np.asarray(X, dtype=float)
    z = float(z)
    if z <= 0:
        raise DomainError("pde_residual needs an interior point, z > 0")
    hz = h * z
    eye = np.eye(n)
    u0 = U(X, t, z)

    grad = np.array([(U(X + h * eye[i], t, z) - U(X - h * eye[i], t, z)) / (2 * h) for i in range(n)])
    diffusion = 0.0
    for i in range(n):
        for j in range(n):
            q = model.Q[i, j]
            if q == 0.0:
                continue
            if i == j:
                d2 = (U(X + h * eye[i], t, z) - 2 * u0 + U(X - h * eye[i], t, z)) / h**2
            else:
                d2 = (
                    U(X + h * (eye[i] + eye[j]), t, z)
                    - U(X + h * (eye[i] - eye[j]), t, z)
                    - U(X - h * (eye[i] - eye[j]), t, z)
                    + U(X - h * (eye[i] + eye[j]), t, z)
                ) / (4 * h * h)
            diffusion += q * d2
    drift = float((model.B @ X) @ grad)

    up, um = U(X, t, z + hz), U(X, t, z - hz)
    bessel = (up - 2 * u0 + um) / hz**2 + (a / z) * (up - um) / (2 * hz)

    dt = 0.0
    if field != "extend_A":
        dt = (U(X, t + h, z) - U(X, t - h, z)) / (2 * h)

    residual = diffusion + drift + bessel - dt
    scale = abs(diffusion) + abs(drift) + abs(bessel) + abs(dt)
    return abs(residual) / max(scale, 1e-300)


# --------------------------
# Sweeps
# --------------------------
@dataclass
class SweepRow:
    z: float
    value: float
    target: float

    @property
    def abs_err(self) -> float:
        return abs(self.value - self.target)


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)
    order: float = float("nan")
    extrapolated: Optional[float] = None

    @property
    def target(self) -> float:
        return self.rows[0].target if self.rows else float("nan")

    @property
    def monotone(self) -> bool:
        errs = [r.abs_err for r in sorted(self.rows, key=lambda r: -r.z)]
        return all(e1 <= e0 for e0, e1 in zip(errs, errs[1:]))

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"z": r.z, "value": r.value, "target": r.target, "abs_err": r.abs_err}
                for r in self.rows
            ],
            "order": self.order,
            "extrapolated": self.extrapolated,
            "monotone": self.monotone,
        }


def loglog_order(zs: Sequence[float], errs: Sequence[float]) -> float:
    """Least-squares slope of log err against log z."""
    pairs = [(z, e) for z, e in zip(zs, errs) if e > 0]
    if len(pairs) < 2:
        return float("nan")
    lz, le = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
    return float(np.polyfit(lz, le, 1)[0])


def richardson_limit(rows: Sequence[SweepRow], exponents: Sequence[float]) -> Optional[float]:
    """
    Limit L of value(z) ≈ L + Σ c_j z^{p_j}, solved exactly on the len(exponents)+1 smallest z.

    Exponents closer than 0.1 to an earlier one are dropped, as are trailing ones the grid
    cannot support.
    """
    pts = sorted(rows, key=lambda r: r.z)
    kept: list[float] = []
    for p in exponents:
        if all(abs(p - q) >= 0.1 for q in kept):
            kept.append(p)
    kept = kept[: len(pts) - 1]
    if not kept:
        return None
    pts = pts[: len(kept) + 1]
    # powers of z/z_ref
    z_ref = pts[-1].z
    lhs = np.array([[1.0, *((r.z / z_ref) ** p for p in kept)] for r in pts])
    rhs = np.array([r.value for r in pts])
    return float(np.linalg.solve(lhs, rhs)[0])


def dtn_sweep(
    u: Union[SpaceTimeGaussPoly, GaussPolyFunction],
    model: ModelSpec,
    X,
    t: float,
    s: float,
    z_grid: Sequence[float] = DEFAULT_Z_GRID,
    quad: Optional[QuadratureConfig] = None,
) -> SweepReport:
    """Neumann quotients against (−𝒦)ˢu (or (−𝒜)ˢφ) over z_grid, with a Richardson value."""
    params = FractionalParams(s)
    quad = quad or QuadratureConfig()
    if isinstance(u, GaussPolyFunction):
        target = frac_A(u, model, X, s, quad)
        values = [dtn_A(u, model, X, s, z, quad) for z in z_grid]
    else:
        target = frac_K(u, model, X, t, s, quad)
        values = [dtn_K(u, model, X, t, s, z, quad) for z in z_grid]
    report = SweepReport([SweepRow(float(z), v, target) for z, v in zip(z_grid, values)])
    report.order = loglog_order([r.z for r in report.rows], [r.abs_err for r in report.rows])
    # D(z) − (−𝒦)ˢu ≈ c₁z^{1+a} + c₂z²
    report.extrapolated = richardson_limit(report.rows, (1.0 + params.a, 2.0))
    logger.info("DtN sweep s=%.3g: order %.3f, extrapolated %r", s, report.order, report.extrapolated)
    return report


def dirichlet_sweep(
    u: Union[SpaceTimeGaussPoly, GaussPolyFunction],
    model: ModelSpec,
    X,
    t: float,
    a: float,
    z_grid: Sequence[float] = DEFAULT_Z_GRID,
    quad: Optional[QuadratureConfig] = None,
) -> SweepReport:
    """|U(·,z) − u| over z_grid; the order should approach 1 − a."""
    a = check_a(a)
    quad = quad or QuadratureConfig()
    if isinstance(u, GaussPolyFunction):
        target = u(np.asarray(X, dtype=float))
        values = [extend_A(u, model, X, z, a, quad) for z in z_grid]
    else:
        target = u.evaluate(X, t)
        values = [extend_K(u, model, X, t, z, a, quad) for z in z_grid]
    report = SweepReport([SweepRow(float(z), v, target) for z, v in zip(z_grid, values)])
    report.order = loglog_order([r.z for r in report.rows], [r.abs_err for r in report.rows])
    return report


def trace_norms(
    u: SpaceTimeGaussPoly,
    model: ModelSpec,
    grid: Sequence[tuple],
    z: float,
    a: float,
    quad: Optional[QuadratureConfig] = None,
) -> dict[str, float]:
    """Discrete ℓ¹, ℓ² and ℓ^∞ norms of U(·,·,z) − u over (X, t) grid points."""
    diffs = np.array([extend_K(u, model, X, t, z, a, quad) - u.evaluate(X, t) for X, t in grid])
    return {
        "l1": float(np.sum(np.abs(diffs))),
        "l2": float(np.sqrt(np.sum(diffs * diffs))),
        "linf": float(np.max(np.abs(diffs))),
    }
