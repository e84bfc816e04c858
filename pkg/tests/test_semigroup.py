import math

import numpy as np
import pytest
from scipy import special

from HypoKernel import semigroup
from HypoKernel.errors import DomainError, NotPositiveDefinite
from HypoKernel.funcspace import GaussPolyFunction, SpaceTimeGaussPoly, apply_A_exact


def gauss(n, center=None, scale=1.0):
    center = np.zeros(n) if center is None else center
    return GaussPolyFunction.gaussian(center, scale * np.eye(n))


def poly_gauss(n):
    terms = {(0,) * n: 1.0, (1,) + (0,) * (n - 1): 0.5, (2,) + (0,) * (n - 1): -0.3}
    return GaussPolyFunction.from_terms(np.full(n, 0.1), np.eye(n) * 0.9, terms)


def test_heat_closed_form(heat1, quad):
    f = gauss(1)
    for x, t in ((0.0, 0.5), (0.7, 0.1), (-1.2, 3.0)):
        expected = math.exp(-x * x / (1 + 4 * t)) / math.sqrt(1 + 4 * t)
        assert math.isclose(semigroup.apply_Pt(f, heat1, [x], t, quad), expected, rel_tol=1e-12)


def test_gauss_oracle(model, quad, rng):
    f = GaussPolyFunction.gaussian([0.2, -0.1], [[1.0, 0.3], [0.3, 0.8]], 1.5)
    for X in rng.standard_normal((4, 2)):
        exact = semigroup.apply_Pt_gauss_exact(f, model, X, 0.5)
        assert math.isclose(semigroup.apply_Pt(f, model, X, 0.5, quad), exact, rel_tol=1e-10)


@pytest.mark.parametrize("t", [0.05, 0.5, 2.0])
def test_fourier_route_agrees(model, quad, t):
    f = poly_gauss(2)
    X = np.array([0.3, -0.4])
    direct = semigroup.apply_Pt(f, model, X, t, quad)
    assert math.isclose(semigroup.apply_Pt_fourier(f, model, X, t), direct, rel_tol=1e-8, abs_tol=1e-12)


def test_identity_at_zero_and_negative_time(kolmogorov, quad):
    f = poly_gauss(2)
    X = np.array([0.3, 0.2])
    assert semigroup.apply_Pt(f, kolmogorov, X, 0.0, quad) == f(X)
    with pytest.raises(DomainError):
        semigroup.apply_Pt(f, kolmogorov, X, -0.1, quad)


def test_rejects_wrong_point_and_degenerate(kolmogorov, degenerate, quad):
    f = gauss(2)
    with pytest.raises(DomainError):
        semigroup.apply_Pt(f, kolmogorov, [0.0], 1.0, quad)
    with pytest.raises(NotPositiveDefinite):
        semigroup.apply_Pt(f, degenerate, [0.0, 0.0], 1.0, quad)


def test_semigroup_law(model, quad):
    f = gauss(2, np.array([0.1, 0.2]))
    X = np.array([0.4, -0.3])
    inner = semigroup.propagate_gaussian(f, model, 0.3)
    for Y in (X, np.zeros(2)):
        assert math.isclose(inner(Y), semigroup.apply_Pt(f, model, Y, 0.3, quad), rel_tol=1e-10)
    composed = semigroup.apply_Pt(inner, model, X, 0.4, quad)
    assert math.isclose(composed, semigroup.apply_Pt(f, model, X, 0.7, quad), rel_tol=1e-7)


def test_evolutive_semigroup(kolmogorov, quad):
    f = poly_gauss(2)
    h = GaussPolyFunction.gaussian([0.0], [[1.0]])
    u = SpaceTimeGaussPoly.from_factors(f, h)
    X, t, tau = np.array([0.2, 0.1]), 0.5, 0.3
    expected = math.exp(-((t - tau) ** 2)) * semigroup.apply_Pt(f, kolmogorov, X, tau, quad)
    assert math.isclose(semigroup.apply_PK(u, kolmogorov, X, t, tau, quad), expected, rel_tol=1e-12)
    stationary = SpaceTimeGaussPoly.from_factors(f)
    assert semigroup.apply_PK(stationary, kolmogorov, X, 7.0, tau, quad) == semigroup.apply_Pt(f, kolmogorov, X, tau, quad)
    with pytest.raises(DomainError):
        semigroup.apply_PK(u, kolmogorov, X, t, -1.0, quad)


def test_semigroup_limit(ou1, kolmogorov, quad):
    assert math.isclose(semigroup.semigroup_limit(gauss(1), ou1, quad=quad), 1 / math.sqrt(3), rel_tol=1e-12)
    assert semigroup.semigroup_limit(gauss(2), kolmogorov, quad=quad) == 0.0
    u = SpaceTimeGaussPoly(((gauss(1), None), (gauss(1), GaussPolyFunction.gaussian([0.0], [[1.0]]))))
    assert math.isclose(semigroup.semigroup_limit(u, ou1, quad=quad), 1 / math.sqrt(3), rel_tol=1e-12)


def test_long_time_approaches_limit(ou1, quad):
    f = gauss(1)
    assert math.isclose(semigroup.apply_Pt(f, ou1, [0.5], 40.0, quad), 1 / math.sqrt(3), rel_tol=1e-10)


def test_resolvent_heat_closed_form(heat1, quad):
    value = semigroup.resolvent_apply(gauss(1), heat1, 1.0, [0.0], quad)
    expected = 0.5 * math.sqrt(math.pi) * math.exp(0.25) * special.erfc(0.5)
    assert math.isclose(value, expected, rel_tol=1e-8)


def test_resolvent_identity(model, quad):
    f = gauss(2)
    X = np.array([0.2, -0.1])
    lam = 1.5
    Rf = semigroup.resolvent_apply(f, model, lam, X, quad)
    RAf = semigroup.resolvent_apply(apply_A_exact(f, model), model, lam, X, quad)
    assert abs(lam * Rf - RAf - f(X)) <= 1e-6


def test_resolvent_complex_and_domain(heat1, quad):
    value = semigroup.resolvent_apply(gauss(1), heat1, 1.0 + 2.0j, [0.0], quad)
    assert isinstance(value, complex)
    with pytest.raises(DomainError):
        semigroup.resolvent_apply(gauss(1), heat1, -1.0, [0.0], quad)


def test_resolvent_bound(kolmogorov, quad):
    f = gauss(2)
    for X in ([0.0, 0.0], [0.5, -0.5]):
        assert abs(semigroup.resolvent_apply(f, kolmogorov, 2.0, X, quad)) <= f.sup_bound() / 2.0 + 1e-6


def test_rate_check(model, quad):
    f = poly_gauss(2)
    grid = [np.zeros(2), np.array([0.5, -0.3]), np.array([-0.7, 0.2])]
    report = semigroup.rate_check(f, model, (0.001, 0.01, 0.1, 1.0), grid, quad)
    assert report.passed
    assert report.slope >= 0.95
    doc = report.to_dict()
    assert len(doc["rows"]) == 4
    with pytest.raises(DomainError):
        semigroup.rate_check(f, model, (2.0,), grid, quad)


def test_rate_bound_is_the_global_sup_bound(heat1, quad):
    f = gauss(1)
    report = semigroup.rate_check(f, heat1, (0.01, 0.1), [np.zeros(1)], quad)
    xs = np.linspace(-4.0, 4.0, 4001)[:, None]
    true_sup = np.abs(apply_A_exact(f, heat1)(xs)).max()
    assert math.isclose(true_sup, 2.0, rel_tol=1e-12)
    for row in report.rows:
        assert math.isclose(row.bound, (2.0 + 4.0 / math.e) * row.t + semigroup.RATE_TOL, rel_tol=1e-12)
        assert row.bound >= true_sup * row.t
        assert row.margin >= 0.0


def test_rate_check_K(kolmogorov, quad):
    u = SpaceTimeGaussPoly.from_factors(poly_gauss(2), GaussPolyFunction.gaussian([0.0], [[1.0]]))
    grid = [(np.zeros(2), 0.0), (np.array([0.3, 0.1]), 0.5)]
    report = semigroup.rate_check_K(u, kolmogorov, (0.001, 0.01, 0.1), grid, quad)
    assert report.passed


def test_contraction(kolmogorov, quad):
    f = gauss(2)
    grid = [np.zeros(2), np.array([0.5, 0.5])]
    assert semigroup.contraction_probe(f, kolmogorov, (0.1, 1.0, 10.0), grid, quad) <= semigroup.CONTRACTION_TOL


def test_commutation(model, quad):
    assert semigroup.commutation_probe(poly_gauss(2), model, [0.3, -0.2], 0.5, 1e-4, quad) <= 1e-6
    with pytest.raises(DomainError):
        semigroup.commutation_probe(poly_gauss(2), model, [0.3, -0.2], 1e-5, 1e-4, quad)


def test_cauchy_residual(kolmogorov, quad):
    u = SpaceTimeGaussPoly.from_factors(gauss(2), GaussPolyFunction.gaussian([0.0], [[1.0]]))
    assert semigroup.cauchy_residual(u, kolmogorov, [0.2, 0.1], 0.1, 0.5, 1e-3, quad) <= 1e-4


def test_rejects_modulated_function(heat1, quad):
    f = GaussPolyFunction(np.zeros(1), [[1.0]], GaussPolyFunction.gaussian([0.0], [[1.0]]).poly, modulation=[0.5])
    with pytest.raises(DomainError):
        semigroup.apply_Pt(f, heat1, [0.0], 1.0, quad)
