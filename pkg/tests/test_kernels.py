import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from HypoKernel import kernels
from HypoKernel.errors import DomainError, NotPositiveDefinite, PreconditionError
from HypoKernel.funcspace import kolmogorov_model
from HypoKernel.kernels import (
    FractionalParams,
    KernelPoint,
    bessel_heat_kernel,
    bessel_I,
    bessel_I_power,
    bessel_mass,
    bessel_reproducing_residual,
    chapman_kolmogorov_residual,
    g_normalization_integral,
    g_profile,
    g_profile_bessel,
    g_profile_dt,
    hormander_kernel,
    hormander_kernel_gradX,
    kernel_limit,
    kernel_mass_X,
    kernel_mass_Y,
    kolmogorov_constant,
    kolmogorov_kernel_explicit,
    kolmogorov_literal_discrepancy,
    neumann_G,
    poisson_kernel_mass,
    poisson_space_kernel,
    poisson_time_kernel,
    require_hypoelliptic,
)
from HypoKernel.quadrature import adaptive_gk, gauss_hermite_rule, power_graded

coord = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


# --------------------------
# Parameters
# --------------------------
def test_fractional_params():
    p = FractionalParams(0.25)
    assert p.a == 0.5
    assert p.alpha == 0.25
    assert FractionalParams.from_a(0.0).s == 0.5
    for s in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            FractionalParams(s)


def test_kernel_point_validation():
    with pytest.raises(DomainError):
        KernelPoint(np.zeros(1), np.zeros(1), 0.0)
    with pytest.raises(DomainError):
        KernelPoint(np.zeros(1), np.zeros(1), 1.0, z=-1.0)


# --------------------------
# Hörmander kernel
# --------------------------
def test_heat_kernel_closed_form(heat1):
    x, y, t = 0.3, -0.4, 0.6
    expected = math.exp(-((x - y) ** 2) / (4 * t)) / math.sqrt(4 * math.pi * t)
    assert math.isclose(hormander_kernel(heat1, [x], [y], t), expected, rel_tol=1e-14)


@given(coord, coord, coord, coord, st.floats(0.05, 3.0))
@settings(max_examples=40, deadline=None)
def test_kernel_forms_agree(v, x, w, y, t):
    model = kolmogorov_model(1)
    lk = kernels.log_hormander_kernel(model, [v, x], [w, y], t, "K")
    lc = kernels.log_hormander_kernel(model, [v, x], [w, y], t, "C")
    assert abs(lk - lc) <= 1e-10 * max(1.0, abs(lk))


def test_kernel_batch(kolmogorov, rng):
    X = np.array([0.1, 0.2])
    Ys = rng.standard_normal((5, 2))
    batch = hormander_kernel(kolmogorov, X, Ys, 0.7)
    assert batch.shape == (5,)
    for Y, value in zip(Ys, batch):
        assert math.isclose(hormander_kernel(kolmogorov, X, Y, 0.7), value, rel_tol=1e-14)


def test_kernel_rejects_degenerate(degenerate):
    with pytest.raises(NotPositiveDefinite):
        hormander_kernel(degenerate, [0.0, 0.0], [0.0, 0.0], 1.0)


def test_kernel_rejects_unknown_form(heat1):
    with pytest.raises(DomainError):
        hormander_kernel(heat1, [0.0], [0.0], 1.0, "Z")


def test_gradient_matches_finite_difference(kramers):
    X, Y, t, h = np.array([0.2, -0.1]), np.array([0.4, 0.3]), 0.8, 1e-6
    grad = hormander_kernel_gradX(kramers, X, Y, t)
    for i in range(2):
        e = np.eye(2)[i] * h
        fd = (hormander_kernel(kramers, X + e, Y, t) - hormander_kernel(kramers, X - e, Y, t)) / (2 * h)
        assert math.isclose(grad[i], fd, rel_tol=1e-6, abs_tol=1e-9)


def test_kernel_limit(ou1, kolmogorov):
    assert math.isclose(kernel_limit(ou1, [0.0]), 1.0 / math.sqrt(2 * math.pi), rel_tol=1e-14)
    assert kernel_limit(kolmogorov, [0.0, 0.0]) == 0.0


@pytest.mark.parametrize("t", [0.1, 1.0])
def test_masses(model, t):
    X = np.array([0.3, -0.2])
    assert abs(kernel_mass_Y(model, X, t) - 1.0) <= 1e-8
    assert abs(kernel_mass_X(model, X, t) - math.exp(-t * model.trace_B)) <= 1e-8


def test_chapman_kolmogorov(kolmogorov, kramers):
    for model in (kolmogorov, kramers):
        assert chapman_kolmogorov_residual(model, [0.1, 0.2], [0.3, -0.1], 0.4, 0.6) <= 1e-6


# --------------------------
# Explicit Kolmogorov kernel
# --------------------------
def test_kolmogorov_constant():
    assert math.isclose(kolmogorov_constant(1), math.sqrt(3) / (2 * math.pi))
    with pytest.raises(DomainError):
        kolmogorov_constant(0)


def test_explicit_kernel_matches_general(kolmogorov, rng):
    for _ in range(20):
        v, x, w, y = rng.standard_normal(4)
        t = rng.uniform(0.2, 2.0)
        explicit = kolmogorov_kernel_explicit(v, x, w, y, t, 1)
        general = hormander_kernel(kolmogorov, [v, x], [w, y], t)
        assert math.isclose(explicit, general, rel_tol=1e-8)


def test_literal_discrepancy_report(rng):
    pts = [KernelPoint(rng.standard_normal(2), rng.standard_normal(2), 1.0) for _ in range(5)]
    report = kolmogorov_literal_discrepancy(pts, 1)
    assert report["agrees"]
    assert report["points"] == 5
    assert report["c_n"] == kolmogorov_constant(1)


# --------------------------
# Bessel functions and kernels
# --------------------------
@pytest.mark.parametrize("nu", [-0.9, -0.75, -0.25, 0.0, 0.5, 1.3])
@pytest.mark.parametrize("x", [1e-3, 0.7, 5.0, 29.0, 31.0, 80.0])
def test_bessel_I_matches_scipy(nu, x):
    assert math.isclose(bessel_I(nu, x), special.iv(nu, x), rel_tol=1e-12)


def test_bessel_I_power_at_zero():
    assert math.isclose(bessel_I_power(0.5, 0.0), 1.0 / (math.sqrt(2.0) * special.gamma(1.5)), rel_tol=1e-14)
    with pytest.raises(DomainError):
        bessel_I(-1.0, 1.0)
    with pytest.raises(DomainError):
        bessel_I(0.5, -1.0)


@given(
    st.floats(-0.9, 0.9),
    st.floats(0.0, 3.0),
    st.floats(0.0, 3.0),
    st.floats(0.05, 2.0),
)
@settings(max_examples=40, deadline=None)
def test_bessel_heat_kernel_symmetric(a, z, zeta, t):
    assert math.isclose(bessel_heat_kernel(a, z, zeta, t), bessel_heat_kernel(a, zeta, z, t), rel_tol=1e-12)


def test_bessel_heat_kernel_a0_is_even_heat_kernel():
    # a = 0: even reflection of the heat kernel on the half line
    z, zeta, t = 0.4, 0.9, 0.3
    gauss = lambda d: math.exp(-d * d / (4 * t)) / math.sqrt(4 * math.pi * t)  # noqa: E731
    assert math.isclose(bessel_heat_kernel(0.0, z, zeta, t), gauss(z - zeta) + gauss(z + zeta), rel_tol=1e-12)


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_bessel_mass(quad, a):
    assert abs(bessel_mass(a, 0.7, 0.5, quad) - 1.0) <= 1e-8


def test_bessel_reproducing(quad):
    assert bessel_reproducing_residual(0.3, 0.6, 0.9, 0.4, 0.5, quad) <= 1e-6


def test_g_profile_normalization(quad):
    assert math.isclose(g_normalization_integral(0.0, 1.0, quad), 2 * math.sqrt(math.pi), rel_tol=1e-10)
    for a in (-0.5, 0.5):
        expected = 2 ** (1 - a) * special.gamma((1 - a) / 2) * 0.8 ** (a - 1)
        assert math.isclose(g_normalization_integral(a, 0.8, quad), expected, rel_tol=1e-10)


def test_g_profile_solves_backward_equation():
    # ∂_t g = 𝓑_z g
    for a in (-0.5, 0.0, 0.5):
        assert math.isclose(g_profile_dt(a, 0.7, 0.4), g_profile_bessel(a, 0.7, 0.4), rel_tol=1e-12)


def test_g_profile_rejects():
    with pytest.raises(DomainError):
        g_profile(0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        g_profile(1.0, 1.0, 1.0)


def test_neumann_G_closed_form_at_boundary(kolmogorov):
    X, Y = [0.1, 0.2], [0.0, -0.1]
    closed = neumann_G(kolmogorov, 0.2, X, 1.0, 0.5, Y, 0.3, 0.0)
    general = hormander_kernel(kolmogorov, X, Y, 0.7) * bessel_heat_kernel(0.2, 0.5, 0.0, 0.7)
    assert math.isclose(closed, general, rel_tol=1e-12)
    with pytest.raises(DomainError):
        neumann_G(kolmogorov, 0.2, X, 0.3, 0.5, Y, 0.3, 0.0)


@pytest.mark.slow
@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_neumann_G_reproducing(heat1, quad, a):
    X, Y, z, zeta, t, s = 0.1, -0.2, 0.3, 0.6, 0.4, 0.5
    nodes, weights = gauss_hermite_rule(quad.gh_nodes)
    # Z = X + √(4t)·x turns p(X,Z,t)dZ into e^{−x²}dx/√π
    Zs = X + math.sqrt(4.0 * t) * nodes

    def over_Z(eta):
        total = 0.0
        for Z, w in zip(Zs, weights):
            first = neumann_G(heat1, a, [X], t, z, [Z], 0.0, eta) / hormander_kernel(heat1, [X], [Z], t)
            total += w * first * neumann_G(heat1, a, [Z], s, eta, [Y], 0.0, zeta)
        return total / math.sqrt(math.pi)

    upper = zeta + 40.0 * math.sqrt(max(t, s))
    value = power_graded(over_Z, a + 1.0, upper, quad).value
    expected = neumann_G(heat1, a, [X], t + s, z, [Y], 0.0, zeta)
    assert abs(value - expected) <= 1e-6


def test_kolmogorov_kernel_scales_like_t_minus_two(kolmogorov):
    times = np.array([1e-3, 1e-2, 0.1, 1.0, 10.0])
    logs = [kernels.log_hormander_kernel(kolmogorov, [0.0, 0.0], [0.0, 0.0], t) for t in times]
    slope = np.polyfit(np.log(times), logs, 1)[0]
    assert abs(slope + 2.0) <= 1e-8


def test_poisson_time_kernel(kolmogorov):
    X, Y = [0.1, 0.2], [0.0, -0.1]
    value = poisson_time_kernel(kolmogorov, 0.0, X, Y, 0.6, 0.5)
    assert math.isclose(value, g_profile(0.0, 0.5, 0.6) * hormander_kernel(kolmogorov, X, Y, 0.6), rel_tol=1e-13)
    batch = poisson_time_kernel(kolmogorov, 0.0, X, np.array([Y, Y]), 0.6, 0.5)
    assert batch.shape == (2,)
    with pytest.raises(DomainError):
        poisson_time_kernel(kolmogorov, 0.0, X, Y, 0.6, 0.0)


@pytest.mark.parametrize("model_name", ["heat1", "kolmogorov"])
def test_poisson_time_kernel_vanishes_at_both_ends(model_name, request):
    model = request.getfixturevalue(model_name)
    n = model.N
    X, Y = np.full(n, 0.1), np.full(n, -0.1)
    for t in (1e-6, 1e6):
        for target in (X, Y):
            assert 0.0 <= poisson_time_kernel(model, -0.2, X, target, t, 0.5) <= 1e-12


@pytest.mark.slow
def test_poisson_space_kernel_mass(heat2, quad):
    # half-space Poisson kernel z/(2π(z² + r²)^{3/2}); mass beyond R is z/√(z² + R²)
    z, R = 1.0, 10.0
    X = np.array([0.2, -0.1])

    def ring(r):
        return 2.0 * math.pi * r * poisson_space_kernel(heat2, 0.0, X, X + [r, 0.0], z, quad)

    for r in (0.5, 2.0):
        closed = z / (2.0 * math.pi * (z * z + r * r) ** 1.5)
        assert math.isclose(ring(r) / (2.0 * math.pi * r), closed, rel_tol=1e-7)
    inner = adaptive_gk(ring, 0.0, R, quad, rel_tol=1e-9, abs_tol=1e-10).value
    assert abs(inner + z / math.hypot(z, R) - 1.0) <= 1e-6


def test_cauchy_kernel(heat1, quad):
    value = poisson_space_kernel(heat1, 0.0, [0.0], [1.0], 1.0, quad)
    assert math.isclose(value, 1.0 / (2 * math.pi), rel_tol=1e-6)


@pytest.mark.slow
@pytest.mark.parametrize("a", [0.0, -0.2])
def test_poisson_kernel_mass(kolmogorov, quad, a):
    assert abs(poisson_kernel_mass(kolmogorov, a, [0.1, 0.0], 0.5, quad) - 1.0) <= 1e-7


def test_require_hypoelliptic(kolmogorov, degenerate):
    require_hypoelliptic(kolmogorov)
    with pytest.raises(PreconditionError):
        require_hypoelliptic(degenerate)


def test_log_space_survives_tiny_times(kolmogorov):
    value = kernels.log_hormander_kernel(kolmogorov, [0.0, 0.0], [1.0, 0.0], 1e-4)
    assert math.isfinite(value)
    assert value < -1000
