"""
quadrature.py -- Integration rules shared by every module.

- QuadratureConfig: tolerances, node counts and horizons (immutable)
- adaptive Gauss–Kronrod 7/15 with a heap of panels (scalar, complex or array integrands)
- semi-infinite and power-graded variants for the improper time integrals
- tensorized Gauss–Hermite expectations under a Gaussian law
"""

from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass, fields, replace
from functools import lru_cache
from itertools import product as iproduct
from typing import Any, Callable, Optional

import numpy as np
from scipy import special

from .errors import DomainError, QuadratureNotConverged
from .utils import LogManager

logger = LogManager.get("Quadrature")

MAX_GH_DIMENSION = 6

# Kronrod abscissae on [0, 1) (symmetric), Kronrod weights and the embedded Gauss weights
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
# full 15-point node list in [-1, 1] and matching weights
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
for _k, _w in zip((1, 3, 5), _WG[:3]):
    _GAUSS[_k] = _w
    _GAUSS[14 - _k] = _w
_GAUSS[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs for every integral in the package."""

    gh_nodes: int = 40
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdiv: int = 2000
    balakrishnan_split: float = 1.0
    tail_cut: float = 1e-16
    t_max: float = 1e10
    max_degree: int = 16

    def __post_init__(self) -> None:
        if int(self.gh_nodes) != self.gh_nodes or self.gh_nodes < 2:
            raise DomainError(f"gh_nodes must be an integer ≥ 2, got {self.gh_nodes}")
        if int(self.max_subdiv) != self.max_subdiv or self.max_subdiv < 1:
            raise DomainError(f"max_subdiv must be a positive integer, got {self.max_subdiv}")
        if int(self.max_degree) != self.max_degree or self.max_degree < 0:
            raise DomainError(f"max_degree must be a non-negative integer, got {self.max_degree}")
        for name in ("abs_tol", "rel_tol", "balakrishnan_split", "tail_cut", "t_max"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        if self.tail_cut >= 1.0:
            raise DomainError("tail_cut must be below 1")
        if self.t_max <= self.balakrishnan_split:
            raise DomainError("t_max must exceed balakrishnan_split")

    def replace(self, **changes: Any) -> QuadratureConfig:
        """Copy with some fields changed (validated)."""
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise DomainError(f"unknown quadrature fields: {sorted(unknown)}")
        return replace(self, **changes)

    def refined(self) -> QuadratureConfig:
        """Double the nodes and halve the tolerances."""
        return self.replace(
            gh_nodes=2 * self.gh_nodes, abs_tol=self.abs_tol / 2, rel_tol=self.rel_tol / 2
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class QuadResult:
    value: Any
    error: float
    subdivisions: int
    evaluations: int


def _panel(f: Callable[[float], Any], a: float, b: float):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = [np.asarray(f(center + half * x)) for x in _NODES]
    stack = np.stack(vals)
    kron = half * np.tensordot(_KRONROD, stack, axes=1)
    gauss = half * np.tensordot(_GAUSS, stack, axes=1)
    resabs = abs(half) * float(np.max(np.tensordot(_KRONROD, np.abs(stack), axes=1)))
    err = float(np.max(np.abs(kron - gauss)))
    err = max(err, 50.0 * np.finfo(float).eps * resabs)
    return kron, err


def adaptive_gk(
    f: Callable[[float], Any],
    a: float,
    b: float,
    quad: Optional[QuadratureConfig] = None,
    *,
    abs_tol: Optional[float] = None,
    rel_tol: Optional[float] = None,
    max_subdiv: Optional[int] = None,
) -> QuadResult:
    """
    ∫_a^b f by globally adaptive G7/K15 bisection.

    f maps a float to a scalar, complex or fixed-shape array. The panel with the largest
    error estimate is bisected until the total estimate meets max(abs_tol, rel_tol·|I|).
    """
    quad = quad or QuadratureConfig()
    abs_tol = quad.abs_tol if abs_tol is None else abs_tol
    rel_tol = quad.rel_tol if rel_tol is None else rel_tol
    max_subdiv = quad.max_subdiv if max_subdiv is None else max_subdiv
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("adaptive_gk needs finite limits; use integrate_to_infinity")
    if a == b:
        return QuadResult(0.0, 0.0, 0, 0)

    value, err = _panel(f, a, b)
    heap = [(-err, 0, a, b, value, err)]
    total, total_err = value, err
    counter = 1
    subdivisions = 0
    while total_err > max(abs_tol, rel_tol * float(np.max(np.abs(total)))):
        if subdivisions >= max_subdiv:
            raise QuadratureNotConverged(
                f"no convergence on [{a:.6g}, {b:.6g}] after {subdivisions} subdivisions "
                f"(error estimate {total_err:.3e})",
                estimate=total,
                error=total_err,
                subdivisions=subdivisions,
            )
        _, _, lo, hi, v, e = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _panel(f, lo, mid)
        v2, e2 = _panel(f, mid, hi)
        total = total - v + v1 + v2
        total_err = total_err - e + e1 + e2
        for part in ((lo, mid, v1, e1), (mid, hi, v2, e2)):
            heapq.heappush(heap, (-part[3], counter, *part))
            counter += 1
        subdivisions += 1

    # resum to shed accumulated cancellation in the running total
    total = sum((item[4] for item in heap), start=np.zeros_like(np.asarray(total)))
    if subdivisions:
        logger.debug("GK on [%.4g, %.4g]: %d subdivisions, err %.2e", a, b, subdivisions, total_err)
    value = total.item() if np.ndim(total) == 0 else total
    return QuadResult(value, total_err, subdivisions, 15 * (2 * subdivisions + 1))


def integrate_to_infinity(
    f: Callable[[float], Any], a: float, quad: Optional[QuadratureConfig] = None, **tols: Any
) -> QuadResult:
    """∫_a^∞ f through x = a + u/(1−u), u ∈ [0, 1)."""

    def mapped(u: float):
        one_minus = 1.0 - u
        return np.asarray(f(a + u / one_minus)) / (one_minus * one_minus)

    return adaptive_gk(mapped, 0.0, 1.0, quad, **tols)


def power_graded(
    g: Callable[[float], Any],
    p: float,
    upper: float,
    quad: Optional[QuadratureConfig] = None,
    *,
    lower: float = 0.0,
    **tols: Any,
) -> QuadResult:
    """
    ∫_lower^upper w^{p−1} g(w) dw for p > 0.

    The substitution w = r^{1/p} absorbs the weight: the integral is (1/p)∫ g(r^{1/p}) dr over
    [lower^p, upper^p].
    """
    if p <= 0:
        raise DomainError(f"power_graded needs p > 0, got {p}")
    res = adaptive_gk(lambda r: g(r ** (1.0 / p)), lower**p, upper**p, quad, **tols)
    return QuadResult(res.value / p, res.error / p, res.subdivisions, res.evaluations)


def gamma_weighted(
    F: Callable[[float], Any],
    alpha: float,
    quad: Optional[QuadratureConfig] = None,
    *,
    w_min: float = 0.0,
    limit_at_zero: Any = 0.0,
    split: float = 1.0,
    **tols: Any,
) -> QuadResult:
    """
    (1/Γ(α)) ∫₀^∞ w^{α−1} e^{−w} F(w) dw.

    [w_min, split] is power-graded, [split, w_max] plain with w_max = −log(tail_cut), and on
    [0, w_min] F is replaced by limit_at_zero, contributing limit_at_zero·P(α, w_min).
    """
    quad = quad or QuadratureConfig()
    if alpha <= 0:
        raise DomainError(f"gamma_weighted needs α > 0, got {alpha}")
    w_max = -math.log(quad.tail_cut)
    split = min(split, w_max)
    head = power_graded(
        lambda w: math.exp(-w) * np.asarray(F(w)), alpha, split, quad, lower=w_min, **tols
    )
    body = adaptive_gk(
        lambda w: w ** (alpha - 1.0) * math.exp(-w) * np.asarray(F(w)), split, w_max, quad, **tols
    )
    norm = math.exp(-special.gammaln(alpha))
    value = (head.value + body.value) * norm
    if w_min > 0:
        value = value + np.asarray(limit_at_zero) * special.gammainc(alpha, w_min)
    return QuadResult(
        value,
        (head.error + body.error) * norm,
        head.subdivisions + body.subdivisions,
        head.evaluations + body.evaluations,
    )


# --------------------------
# Gauss–Hermite
# --------------------------
@lru_cache(maxsize=64)
def gauss_hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ∫ e^{−x²} g(x) dx."""
    if n < 1:
        raise DomainError("Gauss–Hermite rule needs at least one node")
    x, w = np.polynomial.hermite.hermgauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gh_node_count(gh_nodes: int, degree: int) -> int:
    """Fewest nodes that are exact for a polynomial of the given degree, capped by gh_nodes."""
    return max(1, min(gh_nodes, degree // 2 + 1))


def gaussian_expectation(
    g: Callable[[np.ndarray], np.ndarray], mean, factor, nodes: int
) -> complex:
    """
    E[g(mean + factor·W)] with W standard normal in ℝ^N.

    g receives an (n, N) array of points and returns n values. Tensor rule with `nodes` per
    dimension, exact when g is a polynomial of degree < 2·nodes.
    """
    mean = np.asarray(mean, dtype=float)
    factor = np.asarray(factor, dtype=float)
    n_dim = mean.shape[0]
    if n_dim > MAX_GH_DIMENSION:
        raise DomainError(
            f"tensorized Gauss–Hermite is limited to N ≤ {MAX_GH_DIMENSION}, got N = {n_dim}"
        )
    x, w = gauss_hermite_rule(nodes)
    z = math.sqrt(2.0) * x
    wn = w / math.sqrt(math.pi)
    grid = np.array(list(iproduct(range(nodes), repeat=n_dim)), dtype=int)
    W = z[grid]
    weights = np.prod(wn[grid], axis=1)
    pts = mean + W @ factor.T
    return complex(np.sum(weights * np.asarray(g(pts))))
