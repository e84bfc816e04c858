"""
verification.py -- Invariant suites behind `hypokernel verify`.

Each check records the measured value, its tolerance and whether it passed. Random points come
from numpy.random.default_rng with fixed seeds, so two runs on the same config produce the same
report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import extension, fractional, kernels, semigroup
from .covariance import gramian_K, hypo_report, lyapunov_residual
from .funcspace import (
    GaussPolyFunction,
    ModelSpec,
    SpaceTimeGaussPoly,
    apply_A_exact,
    heat_model,
    kolmogorov_model,
)
from .quadrature import QuadratureConfig
from .utils import LogManager

logger = LogManager.get("Verification")

SUITES = ("kernels", "semigroup", "fractional", "extension")
Suite = Literal["kernels", "semigroup", "fractional", "extension", "all"]
SEED = 20240611
DIRICHLET_Z_GRID = (0.16, 0.08, 0.04, 0.02)
DTN_S_VALUES = (0.25, 0.5, 0.75)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    upper: bool = True
    detail: str = ""

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.tolerance if self.upper else self.value >= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "bound": "upper" if self.upper else "lower",
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class SuiteReport:
    suite: str
    model: str
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def add(self, name: str, value: float, tolerance: float, upper: bool = True, detail: str = ""):
        check = Check(name, float(value), float(tolerance), upper, detail)
        self.checks.append(check)
        logger.info("%s/%s: %.3e (%s %.1e) %s", self.suite, name, check.value,
                    "≤" if upper else "≥", tolerance, "ok" if check.passed else "FAILED")

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "model": self.model,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def default_function(model: ModelSpec) -> GaussPolyFunction:
    """e^{−|X|²}."""
    return GaussPolyFunction.gaussian(np.zeros(model.N), np.eye(model.N))


def _space_time(f: GaussPolyFunction) -> SpaceTimeGaussPoly:
    return SpaceTimeGaussPoly.from_factors(f, GaussPolyFunction.gaussian([0.0], [[1.0]]))


def _random_points(n: int, count: int, seed: int, scale: float = 1.0) -> np.ndarray:
    return scale * np.random.default_rng(seed).standard_normal((count, n))


# --------------------------
# Suites
# --------------------------
def kernels_suite(model: ModelSpec, quad: QuadratureConfig, **_) -> SuiteReport:
    kernels.require_hypoelliptic(model)
    report = SuiteReport("kernels", model.name)
    n = model.N

    hypo = hypo_report(model)
    report.add("kalman_rank_deficit", n - hypo.kalman_rank, 0)
    report.add("lyapunov_residual", lyapunov_residual(model, 1.0), 1e-10)

    Xs, Ys = _random_points(n, 50, SEED), _random_points(n, 50, SEED + 1)
    worst = 0.0
    for i, (X, Y) in enumerate(zip(Xs, Ys)):
        t = 0.5 if i % 2 else 1.0
        pk = kernels.hormander_kernel(model, X, Y, t, "K")
        pc = kernels.hormander_kernel(model, X, Y, t, "C")
        worst = max(worst, _rel(pc, pk))
    report.add("kernel_form_agreement", worst, 1e-10)

    X0 = _random_points(n, 1, SEED + 2, 0.5)[0]
    for t in (0.1, 1.0):
        report.add(f"mass_Y[t={t}]", abs(kernels.kernel_mass_Y(model, X0, t) - 1.0), 1e-8)
        target = math.exp(-t * model.trace_B)
        report.add(f"mass_X[t={t}]", abs(kernels.kernel_mass_X(model, X0, t) - target), 1e-8)
    report.add(
        "chapman_kolmogorov",
        kernels.chapman_kolmogorov_residual(model, X0, 0.5 * X0, 0.3, 0.7),
        1e-6,
    )

    if n % 2 == 0 and model == kolmogorov_model(n // 2):
        k = n // 2
        pts = [
            kernels.KernelPoint(X, Y, t)
            for X, Y, t in zip(
                _random_points(n, 20, SEED + 3),
                _random_points(n, 20, SEED + 4),
                np.random.default_rng(SEED + 5).uniform(0.2, 2.0, 20),
            )
        ]
        disc = kernels.kolmogorov_literal_discrepancy(pts, k)
        report.add("kolmogorov_explicit", disc["max_rel_diff"], 1e-8)
        for t in (0.1, 1.0, 10.0):
            det = float(np.linalg.det(gramian_K(model, t)))
            report.add(f"det_K[t={t}]", _rel(det, (t * t / 12.0) ** k), 1e-10)

    for a in (-0.5, 0.0, 0.5):
        report.add(f"bessel_mass[a={a}]", abs(kernels.bessel_mass(a, 0.7, 0.5, quad) - 1.0), 1e-8)
    report.add(
        "bessel_reproducing",
        kernels.bessel_reproducing_residual(0.3, 0.6, 0.9, 0.4, 0.5, quad),
        1e-6,
    )
    report.add(
        "g_normalization",
        _rel(kernels.g_normalization_integral(0.0, 1.0, quad), 2.0 * math.sqrt(math.pi)),
        1e-10,
    )
    report.add(
        "poisson_mass",
        abs(kernels.poisson_kernel_mass(model, 0.0, X0, 0.5, quad) - 1.0),
        1e-7,
    )
    cauchy = kernels.poisson_space_kernel(heat_model(1), 0.0, [0.0], [1.0], 1.0, quad)
    report.add("cauchy_kernel", _rel(cauchy, 1.0 / (2.0 * math.pi)), 1e-6)
    return report


def semigroup_suite(
    model: ModelSpec, quad: QuadratureConfig, function: Optional[GaussPolyFunction] = None, **_
) -> SuiteReport:
    kernels.require_hypoelliptic(model)
    report = SuiteReport("semigroup", model.name)
    n = model.N
    g = default_function(model)
    f = function or g
    X_grid = [np.zeros(n), *_random_points(n, 4, SEED + 10, 0.7)]

    worst = max(
        _rel(semigroup.apply_Pt(g, model, X, 0.5, quad), semigroup.apply_Pt_gauss_exact(g, model, X, 0.5))
        for X in X_grid
    )
    report.add("gauss_oracle", worst, 1e-10)
    X1 = X_grid[1]
    report.add(
        "fourier_route",
        _rel(semigroup.apply_Pt_fourier(f, model, X1, 0.5), semigroup.apply_Pt(f, model, X1, 0.5, quad)),
        1e-8,
    )
    lhs = semigroup.apply_Pt(semigroup.propagate_gaussian(g, model, 0.3), model, X1, 0.4, quad)
    report.add("semigroup_law", _rel(lhs, semigroup.apply_Pt(g, model, X1, 0.7, quad)), 1e-7)

    u = _space_time(g)
    inner = SpaceTimeGaussPoly.from_factors(
        semigroup.propagate_gaussian(g, model, 0.3),
        GaussPolyFunction.gaussian([0.3], [[1.0]]),
    )
    report.add(
        "evolutive_law",
        _rel(
            semigroup.apply_PK(inner, model, X1, 0.2, 0.4, quad),
            semigroup.apply_PK(u, model, X1, 0.2, 0.7, quad),
        ),
        1e-7,
    )

    rate = semigroup.rate_check(f, model, (0.001, 0.01, 0.1, 1.0), X_grid, quad)
    report.add("rate_margin", min(r.margin for r in rate.rows), 0.0, upper=False)
    report.add("rate_slope", rate.slope, 0.95, upper=False)

    if model.trace_B >= 0:
        report.add(
            "contraction",
            semigroup.contraction_probe(g, model, (0.1, 1.0, 10.0), X_grid, quad),
            semigroup.CONTRACTION_TOL,
        )
    report.add("commutation", semigroup.commutation_probe(f, model, X1, 0.5, 1e-4, quad), 1e-6)
    report.add("cauchy_problem", semigroup.cauchy_residual(u, model, X1, 0.1, 0.5, 1e-3, quad), 1e-4)

    lam = 1.0
    Rf = semigroup.resolvent_apply(g, model, lam, X1, quad)
    RAf = semigroup.resolvent_apply(apply_A_exact(g, model), model, lam, X1, quad)
    report.add("resolvent_identity", _rel(lam * Rf - RAf, g(X1)), 1e-6)
    if model.trace_B >= 0:
        report.add("resolvent_bound", abs(Rf) - g.sup_bound() / lam, 1e-6)
    return report


def fractional_suite(
    model: ModelSpec,
    quad: QuadratureConfig,
    function: Optional[GaussPolyFunction] = None,
    s: Optional[float] = None,
    **_,
) -> SuiteReport:
    """Oracles and the maximum principle run on e^{−|X|²}; the quadrature checks use `function` when given."""
    kernels.require_hypoelliptic(model)
    report = SuiteReport("fractional", model.name)
    s = 0.5 if s is None else s
    n = model.N
    g = default_function(model)
    f = function or g
    X0 = np.zeros(n)

    heat1 = heat_model(1)
    pi_gauss = GaussPolyFunction.gaussian([0.0], [[math.pi]])
    report.add("heat_half_power", abs(fractional.frac_A(pi_gauss, heat1, [0.0], 0.5, quad) - 2.0), 1e-4)

    if model.is_heat and n <= 3:
        X1 = _random_points(n, 1, SEED + 20, 0.5)[0]
        for sv in (0.25, 0.5, 0.75):
            report.add(
                f"heat_oracle[s={sv}]",
                abs(fractional.frac_A(g, model, X1, sv, quad) - fractional.frac_heat_oracle(g, X1, sv, quad)),
                1e-4,
            )

    # Pₜ1 − 1 is the Balakrishnan integrand of the constant
    constant = max(
        abs(kernels.kernel_mass_Y(model, X0, t, quad.gh_nodes) - 1.0) for t in (0.01, 0.1, 1.0, 10.0)
    )
    report.add("constant_annihilated", constant, 1e-10)

    detailed = fractional.frac_A_detailed(f, model, X0, s, quad)
    at_peak = detailed.value if f is g else fractional.frac_A(g, model, X0, s, quad)
    report.add("maximum_principle", at_peak, 0.0, upper=False)

    expected_tail = 2.0 * f.sup_bound() * quad.t_max ** (-s) / s
    report.add("tail_bound_formula", _rel(detailed.tail_bound, expected_tail), 1e-12)

    u = SpaceTimeGaussPoly.from_factors(f)
    report.add("time_independent", _rel(fractional.frac_K(u, model, X0, 0.0, s, quad), detailed.value), 1e-8)

    refined = fractional.frac_A(f, model, X0, s, quad.refined())
    report.add("self_convergence_A", _rel(refined, detailed.value), 1e-7)
    ut = _space_time(f)
    coarse = fractional.frac_K(ut, model, X0, 0.0, s, quad)
    report.add("self_convergence_K", _rel(fractional.frac_K(ut, model, X0, 0.0, s, quad.refined()), coarse), 1e-7)
    return report


def extension_suite(
    model: ModelSpec,
    quad: QuadratureConfig,
    function: Optional[GaussPolyFunction] = None,
    s: Optional[float] = None,
    **_,
) -> SuiteReport:
    """
    Trace and DtN sweeps on e^{−|X|²} for every s in DTN_S_VALUES plus `s`.

    The pointwise checks run on `function` when given.
    """
    kernels.require_hypoelliptic(model)
    report = SuiteReport("extension", model.name)
    s = 0.5 if s is None else s
    a = 1.0 - 2.0 * s
    n = model.N
    g = default_function(model)
    u = _space_time(g)
    f = function or g
    uf = _space_time(f)
    X0 = np.zeros(n)
    X1 = _random_points(n, 1, SEED + 30, 0.5)[0]

    report.add(
        "pde_residual_kernel",
        extension.pde_residual(model, a, "poisson_time_kernel", (X1, 0.7, 0.6), 1e-3, quad=quad),
        1e-4,
    )
    report.add(
        "pde_residual_extension",
        extension.pde_residual(model, a, "extend_K", (X1, 0.1, 0.5), 1e-3, data=uf, quad=quad),
        1e-3,
    )
    direct = extension.extend_K_direct(uf, model, X1, 0.1, 0.5, a, quad)
    report.add("route_agreement", _rel(direct, extension.extend_K(uf, model, X1, 0.1, 0.5, a, quad)), 1e-6)

    stationary = SpaceTimeGaussPoly.from_factors(f)
    report.add(
        "time_independent",
        _rel(extension.extend_A(f, model, X1, 0.5, a, quad), extension.extend_K(stationary, model, X1, 0.0, 0.5, a, quad)),
        1e-7,
    )

    if model.trace_B >= 0:
        worst = max(
            abs(extension.extend_K(uf, model, X, 0.0, z, a, quad))
            for X in (X0, X1)
            for z in (0.1, 1.0)
        )
        report.add("mean_value_bound", worst - uf.sup_bound(), 1e-8)

    dirichlet = extension.dirichlet_sweep(u, model, X0, 0.0, a, DIRICHLET_Z_GRID, quad)
    report.add("dirichlet_order", abs(dirichlet.order - (1.0 - a)), 0.15)

    for sv in sorted({*DTN_S_VALUES, s}):
        av = 1.0 - 2.0 * sv
        dtn = extension.dtn_sweep(u, model, X0, 0.0, sv, extension.DEFAULT_Z_GRID, quad)
        report.add(f"dtn_monotone[s={sv}]", 0.0 if dtn.monotone else 1.0, 0.0)
        report.add(f"dtn_order[s={sv}]", dtn.order, min(1.0 - av, 1.0 + av) - 0.2, upper=False)
        report.add(f"dtn_extrapolated[s={sv}]", abs(dtn.extrapolated - dtn.target), 1e-3)

    def curvature(q: QuadratureConfig) -> float:
        h = 0.05
        vals = [extension.extend_K(u, model, X0, 0.0, z, a, q) for z in (0.5 - h, 0.5, 0.5 + h)]
        return (vals[0] - 2.0 * vals[1] + vals[2]) / (h * h)

    c0 = curvature(quad)
    report.add("z_curvature_stability", abs(curvature(quad.refined()) - c0) / max(1.0, abs(c0)), 1e-6)
    return report


_RUNNERS: dict[str, Callable[..., SuiteReport]] = {
    "kernels": kernels_suite,
    "semigroup": semigroup_suite,
    "fractional": fractional_suite,
    "extension": extension_suite,
}


def run_suites(
    suite: Suite,
    model: ModelSpec,
    quad: Optional[QuadratureConfig] = None,
    function: Optional[GaussPolyFunction] = None,
    s: Optional[float] = None,
) -> list[SuiteReport]:
    """Run one suite or all of them; PreconditionError before any check on a degenerate model."""
    quad = quad or QuadratureConfig()
    kernels.require_hypoelliptic(model)
    names: Sequence[str] = SUITES if suite == "all" else (suite,)
    if any(name not in _RUNNERS for name in names):
        raise ValueError(f"unknown suite {suite!r}")
    reports = []
    for name in names:
        logger.info("Running suite %s on %s", name, model.name)
        reports.append(_RUNNERS[name](model, quad, function=function, s=s))
    return reports
