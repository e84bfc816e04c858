import math

import numpy as np
import pytest

from HypoKernel import extension
from HypoKernel.errors import DomainError
from HypoKernel.funcspace import GaussPolyFunction, SpaceTimeGaussPoly


def gauss(n):
    return GaussPolyFunction.gaussian(np.zeros(n), np.eye(n))


def space_time(n):
    return SpaceTimeGaussPoly.from_factors(gauss(n), GaussPolyFunction.gaussian([0.0], [[1.0]]))


def test_boundary_value_at_zero(kolmogorov, quad):
    u = space_time(2)
    X = np.array([0.3, -0.2])
    assert extension.extend_K(u, kolmogorov, X, 0.4, 0.0, 0.0, quad) == u.evaluate(X, 0.4)
    assert extension.extend_A(gauss(2), kolmogorov, X, 0.0, 0.0, quad) == gauss(2)(X)


def test_rejects_bad_arguments(kolmogorov, quad):
    u = space_time(2)
    with pytest.raises(DomainError):
        extension.extend_K(u, kolmogorov, [0.0, 0.0], 0.0, -0.1, 0.0, quad)
    with pytest.raises(DomainError):
        extension.extend_A(gauss(2), kolmogorov, [0.0, 0.0], 0.5, 1.0, quad)
    with pytest.raises(DomainError):
        extension.dtn_A(gauss(2), kolmogorov, [0.0, 0.0], 0.5, 0.0, quad)
    with pytest.raises(DomainError):
        extension.dtn_K(u, kolmogorov, [0.0, 0.0], 0.0, 1.2, 0.1, quad)


@pytest.mark.parametrize("a", [-0.5, 0.0, 0.5])
def test_route_agreement(kolmogorov, quad, a):
    u = space_time(2)
    X = np.array([0.2, 0.1])
    direct = extension.extend_K_direct(u, kolmogorov, X, 0.1, 0.5, a, quad)
    subordinated = extension.extend_K(u, kolmogorov, X, 0.1, 0.5, a, quad)
    assert math.isclose(direct, subordinated, rel_tol=1e-6)


def test_time_independent_data(model, quad):
    f = gauss(2)
    X = np.array([0.1, -0.2])
    stationary = SpaceTimeGaussPoly.from_factors(f)
    lhs = extension.extend_A(f, model, X, 0.5, 0.0, quad)
    rhs = extension.extend_K(stationary, model, X, 5.0, 0.5, 0.0, quad)
    assert math.isclose(lhs, rhs, rel_tol=1e-7)


def test_mean_value_bound(kolmogorov, quad):
    u = space_time(2)
    for z in (0.1, 1.0, 4.0):
        assert abs(extension.extend_K(u, kolmogorov, [0.0, 0.0], 0.0, z, 0.0, quad)) <= u.sup_bound() + 1e-8


def test_extension_decreases_from_maximum(heat1, quad):
    f = gauss(1)
    values = [extension.extend_A(f, heat1, [0.0], z, 0.0, quad) for z in (0.0, 0.1, 0.5, 2.0)]
    assert all(v1 < v0 for v0, v1 in zip(values, values[1:]))


def test_pde_residuals(kolmogorov, quad):
    X = np.array([0.2, -0.1])
    kernel = extension.pde_residual(kolmogorov, 0.0, "poisson_time_kernel", (X, 0.7, 0.6), quad=quad)
    assert kernel <= 1e-4
    field = extension.pde_residual(
        kolmogorov, 0.0, "extend_K", (X, 0.1, 0.5), data=space_time(2), quad=quad
    )
    assert field <= 1e-3


def test_pde_residual_rejects(kolmogorov, quad):
    X = np.zeros(2)
    with pytest.raises(DomainError):
        extension.pde_residual(kolmogorov, 0.0, "nope", (X, 0.5, 0.5), quad=quad)
    with pytest.raises(DomainError):
        extension.pde_residual(kolmogorov, 0.0, "poisson_time_kernel", (X, 0.5, 0.0), quad=quad)
    with pytest.raises(DomainError):
        extension.pde_residual(kolmogorov, 0.0, "extend_A", (X, 0.5), data=space_time(2), quad=quad)


def test_dtn_leading_coefficient():
    assert math.isclose(extension.dtn_leading_coefficient(0.5), 1.0, rel_tol=1e-14)
    with pytest.raises(DomainError):
        extension.dtn_leading_coefficient(1.0)


def test_loglog_order():
    zs = [0.2, 0.1, 0.05]
    assert math.isclose(extension.loglog_order(zs, [z**1.5 for z in zs]), 1.5, rel_tol=1e-12)
    assert math.isnan(extension.loglog_order([0.1], [0.01]))
    assert math.isnan(extension.loglog_order(zs, [0.0, 0.0, 0.0]))


def test_richardson_limit_removes_both_exponents():
    rows = [extension.SweepRow(z, 2.0 + 0.7 * z**0.5 - 1.3 * z**2, 2.0) for z in extension.DEFAULT_Z_GRID]
    assert abs(extension.richardson_limit(rows, (0.5, 2.0)) - 2.0) <= 1e-12
    # one exponent only: the z² term survives
    assert abs(extension.richardson_limit(rows, (0.5,)) - 2.0) > 1e-4
    linear = [extension.SweepRow(z, 1.0 + 3.0 * z, 1.0) for z in (0.1, 0.05)]
    assert math.isclose(extension.richardson_limit(linear, (1.0, 1.05)), 1.0, rel_tol=1e-13)
    assert extension.richardson_limit(linear[:1], (1.0,)) is None


def test_sweep_report_properties():
    rows = [extension.SweepRow(z, 1.0 + z, 1.0) for z in (0.2, 0.1, 0.05)]
    report = extension.SweepReport(rows)
    assert report.target == 1.0
    assert report.monotone
    assert rows[0].abs_err == pytest.approx(0.2)
    report.rows.append(extension.SweepRow(0.01, 1.5, 1.0))
    assert not report.monotone
    assert len(report.to_dict()["rows"]) == 4


@pytest.mark.slow
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("model_name", ["heat1", "kolmogorov"])
def test_dtn_sweep_converges(model_name, s, quad, request):
    model = request.getfixturevalue(model_name)
    a = 1.0 - 2.0 * s
    u = space_time(model.N)
    sweep = extension.dtn_sweep(u, model, np.zeros(model.N), 0.0, s, extension.DEFAULT_Z_GRID, quad)
    assert sweep.monotone
    assert sweep.order >= min(1.0 - a, 1.0 + a) - 0.2
    assert abs(sweep.extrapolated - sweep.target) <= 1e-3


@pytest.mark.slow
def test_dirichlet_sweep_order(heat1, quad):
    sweep = extension.dirichlet_sweep(gauss(1), heat1, [0.0], 0.0, 0.0, (0.16, 0.08, 0.04, 0.02), quad)
    assert abs(sweep.order - 1.0) <= 0.15


def test_trace_norms(kolmogorov, quad):
    grid = [(np.zeros(2), 0.0), (np.array([0.3, 0.1]), 0.2)]
    norms = extension.trace_norms(space_time(2), kolmogorov, grid, 0.1, 0.0, quad)
    assert 0.0 < norms["linf"] <= norms["l2"] <= norms["l1"]
