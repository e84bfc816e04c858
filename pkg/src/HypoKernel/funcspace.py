"""
funcspace.py -- Polynomial × Gaussian test functions and the operator coefficients.

The family
    f(X) = amplitude · P(X − X₀) · exp(−⟨M(X − X₀), X − X₀⟩) · exp(2πi⟨ω, X − X₀⟩)
is closed under 𝒜, under differentiation, under products and linear changes of variable, and
under the Fourier transform f̂(ξ) = ∫ f(X) e^{−2πi⟨X,ξ⟩} dX. Every quadrature-based operation in
the package is checked against exact values computed here.

User-facing functions have ω = 0 and real coefficients; ω and complex coefficients appear on
the Fourier side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product as iproduct
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .errors import DomainError, NotPositiveDefinite
from .matfun import as_square_matrix, chol_logdet

DEFAULT_MAX_DEGREE = 16
SHAPE_SYMMETRY_TOL = 1e-12
MODEL_SYMMETRY_TOL = 1e-12
IMAG_RESIDUE_TOL = 1e-12

Exponent = tuple[int, ...]
Scalar = Union[int, float, complex]


# --------------------------
# Sparse multivariate polynomials
# --------------------------
@dataclass(frozen=True, eq=False)
class Polynomial:
    """Sparse polynomial: exponent tuple → complex coefficient. Zero terms are never stored."""

    nvars: int
    terms: Mapping[Exponent, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nvars < 1:
            raise DomainError("a polynomial needs at least one variable")
        clean: dict[Exponent, complex] = {}
        for exp, coeff in dict(self.terms).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.nvars or any(e < 0 for e in exp):
                raise DomainError(f"bad exponent {exp} for {self.nvars} variables")
            c = complex(coeff)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise DomainError(f"non-finite coefficient at {exp}")
            if c != 0:
                clean[exp] = clean.get(exp, 0j) + c
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if v != 0})

    # ----- constructors -----
    @classmethod
    def constant(cls, nvars: int, value: Scalar = 1.0) -> Polynomial:
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def monomial(cls, exponent: Iterable[int], coeff: Scalar = 1.0) -> Polynomial:
        exponent = tuple(exponent)
        return cls(len(exponent), {exponent: coeff})

    @classmethod
    def linear(cls, coeffs: Iterable[Scalar], const: Scalar = 0.0) -> Polynomial:
        """Σ coeffs_j·Y_j + const."""
        coeffs = list(coeffs)
        n = len(coeffs)
        terms: dict[Exponent, complex] = {(0,) * n: const}
        for j, c in enumerate(coeffs):
            e = [0] * n
            e[j] = 1
            terms[tuple(e)] = c
        return cls(n, terms)

    # ----- properties -----
    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.terms.values())

    def coefficient(self, exponent: Iterable[int]) -> complex:
        return self.terms.get(tuple(exponent), 0j)

    # ----- arithmetic -----
    def _check(self, other: Polynomial) -> None:
        if other.nvars != self.nvars:
            raise DomainError("polynomials have different numbers of variables")

    def __add__(self, other: Polynomial) -> Polynomial:
        self._check(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0j) + c
        return Polynomial(self.nvars, terms)

    def __neg__(self) -> Polynomial:
        return self.scale(-1.0)

    def __sub__(self, other: Polynomial) -> Polynomial:
        return self + (-other)

    def scale(self, c: Scalar) -> Polynomial:
        if c == 0:
            return Polynomial(self.nvars)
        return Polynomial(self.nvars, {e: v * c for e, v in self.terms.items()})

    def __mul__(self, other: Union[Polynomial, Scalar]) -> Polynomial:
        if not isinstance(other, Polynomial):
            return self.scale(other)
        self._check(other)
        terms: dict[Exponent, complex] = {}
        for (e1, c1), (e2, c2) in iproduct(self.terms.items(), other.terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            terms[e] = terms.get(e, 0j) + c1 * c2
        return Polynomial(self.nvars, terms)

    __rmul__ = __mul__

    def derivative(self, i: int) -> Polynomial:
        terms: dict[Exponent, complex] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = list(e)
            ne[i] -= 1
            terms[tuple(ne)] = c * e[i]
        return Polynomial(self.nvars, terms)

    def multiply_var(self, i: int) -> Polynomial:
        terms = {}
        for e, c in self.terms.items():
            ne = list(e)
            ne[i] += 1
            terms[tuple(ne)] = c
        return Polynomial(self.nvars, terms)

    def conjugate(self) -> Polynomial:
        return Polynomial(self.nvars, {e: c.conjugate() for e, c in self.terms.items()})

    def affine(self, A, d=None) -> Polynomial:
        """Q(Y) = P(A·Y + d) with A of shape (nvars, m); Q has m variables."""
        A = np.atleast_2d(np.asarray(A))
        if A.shape[0] != self.nvars:
            raise DomainError("affine map has the wrong number of rows")
        m = A.shape[1]
        d = np.zeros(self.nvars) if d is None else np.asarray(d)
        forms = [Polynomial.linear(A[i], d[i]) for i in range(self.nvars)]
        powers: dict[tuple[int, int], Polynomial] = {}

        def power(i: int, k: int) -> Polynomial:
            if k == 0:
                return Polynomial.constant(m)
            if (i, k) not in powers:
                powers[(i, k)] = power(i, k - 1) * forms[i]
            return powers[(i, k)]

        out = Polynomial(m)
        for e, c in self.terms.items():
            term = Polynomial.constant(m, c)
            for i, k in enumerate(e):
                if k:
                    term = term * power(i, k)
            out = out + term
        return out

    # ----- evaluation -----
    def evaluate(self, points) -> np.ndarray:
        """Values at points of shape (n, nvars); complex array of length n."""
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        if pts.shape[1] != self.nvars:
            raise DomainError(f"points must have {self.nvars} columns")
        out = np.zeros(pts.shape[0], dtype=complex)
        if not self.terms:
            return out
        deg = self.degree
        pows = np.ones((self.nvars, deg + 1, pts.shape[0]), dtype=complex)
        for k in range(1, deg + 1):
            pows[:, k, :] = pows[:, k - 1, :] * pts.T
        for e, c in self.terms.items():
            term = np.full(pts.shape[0], c, dtype=complex)
            for i, k in enumerate(e):
                if k:
                    term = term * pows[i, k]
            out += term
        return out

    def max_abs_diff(self, other: Polynomial) -> float:
        self._check(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.coefficient(k) - other.coefficient(k)) for k in keys), default=0.0)


# --------------------------
# Gaussian-polynomial functions
# --------------------------
def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussPolyFunction:
    """amplitude · poly(X−X₀) · exp(−⟨M(X−X₀),X−X₀⟩) · exp(2πi⟨ω,X−X₀⟩)."""

    center: np.ndarray
    shape: np.ndarray
    poly: Polynomial
    amplitude: complex = 1.0
    modulation: Optional[np.ndarray] = None
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self) -> None:
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise DomainError("center must be a vector")
        n = center.shape[0]
        M = as_square_matrix(self.shape, "shape")
        if M.shape[0] != n:
            raise DomainError(f"shape is {M.shape}, expected ({n}, {n})")
        if not np.all(np.abs(M - M.T) <= SHAPE_SYMMETRY_TOL * max(1.0, np.abs(M).max())):
            raise DomainError("shape matrix must be symmetric within 1e-12")
        M = (M + M.T) / 2.0
        try:
            chol_logdet(M)
        except NotPositiveDefinite as exc:
            raise DomainError(f"shape matrix must be positive-definite: {exc}") from exc
        if not np.all(np.isfinite(center)):
            raise DomainError("center has non-finite entries")
        if self.poly.nvars != n:
            raise DomainError(f"polynomial has {self.poly.nvars} variables, expected {n}")
        if self.poly.degree > self.max_degree:
            raise DomainError(
                f"polynomial degree {self.poly.degree} exceeds the cap {self.max_degree}"
            )
        omega = np.zeros(n) if self.modulation is None else np.asarray(self.modulation, float)
        if omega.shape != (n,):
            raise DomainError("modulation must have the same length as center")
        amplitude = complex(self.amplitude)
        if not (math.isfinite(amplitude.real) and math.isfinite(amplitude.imag)):
            raise DomainError("amplitude must be finite")
        object.__setattr__(self, "center", _readonly(center))
        object.__setattr__(self, "shape", _readonly(M))
        object.__setattr__(self, "modulation", _readonly(omega))
        object.__setattr__(self, "amplitude", amplitude)

    # ----- constructors -----
    @classmethod
    def gaussian(cls, center, shape, amplitude: Scalar = 1.0) -> GaussPolyFunction:
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(center, shape, Polynomial.constant(center.shape[0]), amplitude)

    @classmethod
    def from_terms(
        cls, center, shape, terms: Mapping[Exponent, Scalar], amplitude: Scalar = 1.0
    ) -> GaussPolyFunction:
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(center, shape, Polynomial(center.shape[0], terms), amplitude)

    # ----- properties -----
    @property
    def N(self) -> int:
        return self.center.shape[0]

    @property
    def is_pure_gaussian(self) -> bool:
        return self.poly.degree == 0 and not np.any(self.modulation)

    @property
    def is_real_valued(self) -> bool:
        return (
            not np.any(self.modulation) and self.amplitude.imag == 0 and self.poly.is_real
        )

    def _same_frame(self, other: GaussPolyFunction) -> bool:
        return (
            self.N == other.N
            and np.array_equal(self.center, other.center)
            and np.array_equal(self.shape, other.shape)
            and np.array_equal(self.modulation, other.modulation)
        )

    def with_poly(self, poly: Polynomial, amplitude: Optional[Scalar] = None) -> GaussPolyFunction:
        return replace(self, poly=poly, amplitude=self.amplitude if amplitude is None else amplitude)

    def normalized(self) -> GaussPolyFunction:
        """Same function with the amplitude folded into the polynomial."""
        return self.with_poly(self.poly.scale(self.amplitude), 1.0)

    # ----- evaluation -----
    def evaluate(self, points) -> np.ndarray:
        """Complex values at points of shape (n, N) (a single vector is accepted)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.N:
            pts = pts.reshape(-1, self.N)
        Y = pts - self.center
        quad = np.einsum("ni,ij,nj->n", Y, self.shape, Y)
        phase = 2.0 * np.pi * (Y @ self.modulation)
        return self.amplitude * self.poly.evaluate(Y) * np.exp(-quad + 1j * phase)

    def __call__(self, points):
        """Real values; an imaginary residue above 1e-12 (relative) is an error."""
        single = np.asarray(points).ndim <= 1
        vals = self.evaluate(points)
        bad = np.abs(vals.imag) > IMAG_RESIDUE_TOL * np.maximum(1.0, np.abs(vals.real))
        if np.any(bad):
            raise DomainError("function is complex-valued at the requested points")
        return float(vals.real[0]) if single else vals.real

    def sup_bound(self) -> float:
        """Upper bound for sup|f|, exact for pure Gaussians."""
        lam = float(np.linalg.eigvalsh(self.shape).min())
        bound = 0.0
        for e, c in self.poly.terms.items():
            k = sum(e)
            peak = 1.0 if k == 0 else (k / (2.0 * lam * math.e)) ** (k / 2.0)
            bound += abs(c) * peak
        return abs(self.amplitude) * bound

    # ----- algebra -----
    def _d_poly(self, P: Polynomial, i: int) -> Polynomial:
        """Polynomial of ∂_i(P·G) relative to the Gaussian factor G of self."""
        out = P.derivative(i)
        row = self.shape[i]
        for j in range(self.N):
            if row[j] != 0.0:
                out = out - P.multiply_var(j).scale(2.0 * row[j])
        if self.modulation[i] != 0.0:
            out = out + P.scale(2j * np.pi * self.modulation[i])
        return out

    def _x_poly(self, P: Polynomial, j: int) -> Polynomial:
        """Polynomial of X_j·(P·G)."""
        out = P.multiply_var(j)
        if self.center[j] != 0.0:
            out = out + P.scale(self.center[j])
        return out

    def _checked(self, poly: Polynomial) -> GaussPolyFunction:
        if poly.degree > self.max_degree:
            raise DomainError(
                f"result degree {poly.degree} exceeds the cap {self.max_degree}"
            )
        return self.with_poly(poly)

    def derivative(self, i: int) -> GaussPolyFunction:
        return self._checked(self._d_poly(self.poly, i))

    def multiply_coordinate(self, j: int) -> GaussPolyFunction:
        return self._checked(self._x_poly(self.poly, j))

    def __add__(self, other: GaussPolyFunction) -> GaussPolyFunction:
        if not isinstance(other, GaussPolyFunction):
            return NotImplemented
        if not self._same_frame(other):
            raise DomainError("sum requires identical center, shape and modulation")
        poly = self.poly.scale(self.amplitude) + other.poly.scale(other.amplitude)
        return self.with_poly(poly, 1.0)

    def __sub__(self, other: GaussPolyFunction) -> GaussPolyFunction:
        return self + (-1.0) * other

    def __mul__(self, c: Scalar) -> GaussPolyFunction:
        if isinstance(c, GaussPolyFunction):
            return self.product(c)
        return self.with_poly(self.poly, self.amplitude * c)

    __rmul__ = __mul__

    def __neg__(self) -> GaussPolyFunction:
        return self * -1.0

    def conjugate(self) -> GaussPolyFunction:
        return replace(
            self,
            poly=self.poly.conjugate(),
            amplitude=self.amplitude.conjugate(),
            modulation=-self.modulation,
        )

    def product(self, other: GaussPolyFunction) -> GaussPolyFunction:
        """Pointwise product, again in the family."""
        if other.N != self.N:
            raise DomainError("product of functions on different dimensions")
        a, b = self.center, other.center
        M1, M2 = self.shape, other.shape
        M = M1 + M2
        c = chol_logdet(M).solve(M1 @ a + M2 @ b)
        const = a @ M1 @ a + b @ M2 @ b - c @ M @ c
        w1, w2 = self.modulation, other.modulation
        phase = 2.0 * np.pi * (w1 @ (c - a) + w2 @ (c - b))
        ident = np.eye(self.N)
        poly = self.poly.affine(ident, c - a) * other.poly.affine(ident, c - b)
        amplitude = self.amplitude * other.amplitude * np.exp(-const + 1j * phase)
        return GaussPolyFunction(
            c, M, poly, amplitude, w1 + w2, max(self.max_degree, other.max_degree, poly.degree)
        )

    def compose_linear(self, A) -> GaussPolyFunction:
        """x ↦ f(A·x) for invertible A."""
        A = as_square_matrix(A, "A")
        if A.shape[0] != self.N:
            raise DomainError("linear map has the wrong order")
        new_center = np.linalg.solve(A, self.center)
        shape = A.T @ self.shape @ A
        return GaussPolyFunction(
            new_center,
            (shape + shape.T) / 2.0,
            self.poly.affine(A),
            self.amplitude,
            A.T @ self.modulation,
            self.max_degree,
        )

    def reflect(self) -> GaussPolyFunction:
        """x ↦ f(−x)."""
        return self.compose_linear(-np.eye(self.N))

    def integral(self) -> complex:
        """∫ f dX, i.e. f̂(0)."""
        return complex(fourier_exact(self).evaluate(np.zeros(self.N))[0])

    def l2_norm(self) -> float:
        """‖f‖₂ from closed-form Gaussian moments."""
        return math.sqrt(max(self.product(self.conjugate()).integral().real, 0.0))

    def coefficients_close(self, other: GaussPolyFunction, tol: float) -> bool:
        if not self._same_frame(other):
            return False
        a, b = self.normalized().poly, other.normalized().poly
        scale = max(1.0, max((abs(c) for c in a.terms.values()), default=0.0))
        return a.max_abs_diff(b) <= tol * scale


def _gaussian_derivative_polys(
    shape: np.ndarray, exponents: Iterable[Exponent]
) -> dict[Exponent, Polynomial]:
    """R_α with ∂^α exp(−ηᵀSη) = R_α(η)·exp(−ηᵀSη)."""
    n = shape.shape[0]
    memo: dict[Exponent, Polynomial] = {(0,) * n: Polynomial.constant(n)}

    def build(alpha: Exponent) -> Polynomial:
        if alpha in memo:
            return memo[alpha]
        j = next(k for k, e in enumerate(alpha) if e > 0)
        beta = list(alpha)
        beta[j] -= 1
        R = build(tuple(beta))
        out = R.derivative(j)
        for k in range(n):
            if shape[j, k] != 0.0:
                out = out - R.multiply_var(k).scale(2.0 * shape[j, k])
        memo[alpha] = out
        return out

    return {alpha: build(alpha) for alpha in exponents}


def fourier_exact(f: GaussPolyFunction) -> GaussPolyFunction:
    """f̂(ξ) = ∫ f(X) e^{−2πi⟨X,ξ⟩} dX, exactly."""
    n = f.N
    factor = chol_logdet(f.shape)
    dual = np.pi**2 * factor.inverse()
    dual = (dual + dual.T) / 2.0
    derivs = _gaussian_derivative_polys(dual, f.poly.terms.keys())
    poly = Polynomial(n)
    for alpha, c in f.poly.terms.items():
        poly = poly + derivs[alpha].scale(c * (1j / (2.0 * np.pi)) ** sum(alpha))
    amplitude = (
        f.amplitude
        * np.pi ** (n / 2.0)
        * math.exp(-0.5 * factor.log_det)
        * np.exp(-2j * np.pi * (f.center @ f.modulation))
    )
    return GaussPolyFunction(
        f.modulation.copy(), dual, poly, amplitude, -f.center, max(f.max_degree, poly.degree)
    )


def inverse_fourier_exact(g: GaussPolyFunction) -> GaussPolyFunction:
    """∫ g(ξ) e^{2πi⟨X,ξ⟩} dξ, exactly."""
    return fourier_exact(g).reflect()


# --------------------------
# Space-time functions
# --------------------------
SpaceTimeTerm = tuple[GaussPolyFunction, Optional[GaussPolyFunction]]


@dataclass(frozen=True, eq=False)
class SpaceTimeGaussPoly:
    """u(X,t) = Σ_k f_k(X)·h_k(t); h_k is a 1-D GaussPolyFunction or None for the constant 1."""

    terms: tuple[SpaceTimeTerm, ...]

    def __post_init__(self) -> None:
        terms = tuple(self.terms)
        if not terms:
            raise DomainError("a space-time function needs at least one term")
        n = terms[0][0].N
        for space, time in terms:
            if not isinstance(space, GaussPolyFunction):
                raise TypeError("space factor must be a GaussPolyFunction")
            if space.N != n:
                raise DomainError("space factors have inconsistent dimensions")
            if time is not None and (not isinstance(time, GaussPolyFunction) or time.N != 1):
                raise DomainError("time factor must be a 1-D GaussPolyFunction or None")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_factors(
        cls, space: GaussPolyFunction, time: Optional[GaussPolyFunction] = None
    ) -> SpaceTimeGaussPoly:
        return cls(((space, time),))

    @property
    def N(self) -> int:
        return self.terms[0][0].N

    @property
    def is_time_independent(self) -> bool:
        return all(time is None for _, time in self.terms)

    def time_weights(self, t: float) -> list[float]:
        return [1.0 if h is None else h(np.array([t])) for _, h in self.terms]

    def evaluate(self, X, t: float) -> float:
        X = np.asarray(X, dtype=float)
        return float(
            sum(w * f(X) for (f, _), w in zip(self.terms, self.time_weights(t)))
        )

    def sup_bound(self) -> float:
        return sum(
            f.sup_bound() * (1.0 if h is None else h.sup_bound()) for f, h in self.terms
        )


# --------------------------
# Model coefficients
# --------------------------
@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Coefficients (Q, B) of 𝒜u = tr(Q∇²u) + ⟨BX,∇u⟩."""

    Q: np.ndarray
    B: np.ndarray
    name: str = "custom"
    N: int = field(init=False)
    trace_B: float = field(init=False)

    def __post_init__(self) -> None:
        Q = as_square_matrix(self.Q, "Q")
        B = as_square_matrix(self.B, "B")
        if Q.shape != B.shape:
            raise DomainError(f"Q is {Q.shape} but B is {B.shape}")
        if not np.all(np.abs(Q - Q.T) <= MODEL_SYMMETRY_TOL * max(1.0, np.abs(Q).max())):
            raise DomainError("Q must be symmetric within 1e-12")
        Q = (Q + Q.T) / 2.0
        if np.linalg.eigvalsh(Q).min() < -MODEL_SYMMETRY_TOL:
            raise DomainError("Q must be positive-semidefinite")
        object.__setattr__(self, "Q", _readonly(Q))
        object.__setattr__(self, "B", _readonly(B))
        object.__setattr__(self, "N", Q.shape[0])
        object.__setattr__(self, "trace_B", float(np.trace(B)))

    def _key(self) -> tuple[bytes, bytes]:
        return (self.Q.tobytes(), self.B.tobytes())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ModelSpec) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    @property
    def is_heat(self) -> bool:
        return np.array_equal(self.Q, np.eye(self.N)) and not np.any(self.B)

    def to_dict(self) -> dict:
        return {"Q": self.Q.tolist(), "B": self.B.tolist()}


def heat_model(N: int = 1) -> ModelSpec:
    return ModelSpec(np.eye(N), np.zeros((N, N)), name="heat")


def ou_model(N: int = 1) -> ModelSpec:
    return ModelSpec(np.eye(N), -np.eye(N), name="ou")


def kolmogorov_model(n: int = 1) -> ModelSpec:
    """Δ_v + ⟨v, ∇_x⟩ on ℝ^{2n}, variables ordered (v, x)."""
    Q = np.zeros((2 * n, 2 * n))
    Q[:n, :n] = np.eye(n)
    B = np.zeros((2 * n, 2 * n))
    B[n:, :n] = np.eye(n)
    return ModelSpec(Q, B, name="kolmogorov")


def kramers_model() -> ModelSpec:
    """Smoluchowski–Kramers model with damped velocity, tr B = −2."""
    return ModelSpec(np.diag([1.0, 0.0]), np.array([[-2.0, -2.0], [1.0, 0.0]]), name="kramers")


# --------------------------
# Exact operators
# --------------------------
def _check_model(f_dim: int, model: ModelSpec) -> None:
    if f_dim != model.N:
        raise DomainError(f"function lives in dimension {f_dim}, model in {model.N}")


def apply_A_exact(f: GaussPolyFunction, model: ModelSpec) -> GaussPolyFunction:
    """𝒜f = tr(Q∇²f) + ⟨BX,∇f⟩ in the same Gaussian frame."""
    if not isinstance(f, GaussPolyFunction):
        raise TypeError("apply_A_exact expects a GaussPolyFunction")
    _check_model(f.N, model)
    n = f.N
    first = [f._d_poly(f.poly, i) for i in range(n)]
    out = Polynomial(n)
    for i in range(n):
        for j in range(n):
            if model.Q[i, j] != 0.0:
                out = out + f._d_poly(first[j], i).scale(model.Q[i, j])
            if model.B[i, j] != 0.0:
                out = out + f._x_poly(first[i], j).scale(model.B[i, j])
    return f._checked(out)


def apply_K_exact(u: SpaceTimeGaussPoly, model: ModelSpec) -> SpaceTimeGaussPoly:
    """𝒦u = 𝒜u − ∂_t u."""
    if not isinstance(u, SpaceTimeGaussPoly):
        raise TypeError("apply_K_exact expects a SpaceTimeGaussPoly")
    _check_model(u.N, model)
    terms: list[SpaceTimeTerm] = []
    for space, time in u.terms:
        terms.append((apply_A_exact(space, model), time))
        if time is not None:
            terms.append((space, -time.derivative(0)))
    return SpaceTimeGaussPoly(tuple(terms))
