import math

import numpy as np
import pytest

from HypoKernel.covariance import (
    SingularGramian,
    gramian_C,
    gramian_C_quadrature,
    gramian_K,
    gramian_pair,
    hypo_report,
    is_hurwitz,
    lyapunov_residual,
    small_time_slope,
    stationary_covariance,
)
from HypoKernel.errors import DomainError, NotPositiveDefinite
from HypoKernel.funcspace import ModelSpec


def test_heat_gramians(heat2):
    np.testing.assert_allclose(gramian_C(heat2, 0.7), 0.7 * np.eye(2), rtol=1e-15)
    np.testing.assert_allclose(gramian_K(heat2, 0.7), np.eye(2), rtol=1e-15)


@pytest.mark.parametrize("t", [1e-3, 0.3, 2.0, 50.0])
def test_ou_closed_form(ou1, t):
    assert math.isclose(gramian_C(ou1, t)[0, 0], math.expm1(2 * t) / 2, rel_tol=1e-12)
    assert math.isclose(t * gramian_K(ou1, t)[0, 0], -math.expm1(-2 * t) / 2, rel_tol=1e-12)


@pytest.mark.parametrize("t", [1e-4, 0.1, 1.0, 10.0, 1e3])
def test_kolmogorov_closed_form(kolmogorov, t):
    expected_C = np.array([[t, -t * t / 2], [-t * t / 2, t**3 / 3]])
    expected_K = np.array([[1.0, t / 2], [t / 2, t * t / 3]])
    np.testing.assert_allclose(gramian_C(kolmogorov, t), expected_C, rtol=1e-10)
    np.testing.assert_allclose(gramian_K(kolmogorov, t), expected_K, rtol=1e-10)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_kolmogorov_det_K(kolmogorov, t):
    assert math.isclose(np.linalg.det(gramian_K(kolmogorov, t)), t * t / 12, rel_tol=1e-10)


@pytest.mark.parametrize("t", [0.05, 1.0, 4.0])
def test_gramian_routes_match_quadrature(model, t):
    C = gramian_C(model, t)
    assert np.linalg.norm(C - gramian_C_quadrature(model, t)) <= 1e-9 * np.linalg.norm(C)


@pytest.mark.parametrize("t", [0.2, 1.0, 2.0])
def test_lyapunov_residual(model, t):
    assert lyapunov_residual(model, t) <= 1e-10


def test_pair_consistency(kramers):
    pair = gramian_pair(kramers, 1.5)
    assert pair.consistency_residual() <= 1e-12
    assert not pair.is_singular
    assert math.isclose(pair.log_det_tK(), math.log(np.linalg.det(1.5 * pair.K_matrix)), rel_tol=1e-10)


def test_singular_pair(degenerate):
    pair = gramian_pair(degenerate, 1.0)
    assert pair.is_singular
    assert isinstance(pair.K, SingularGramian)
    with pytest.raises(NotPositiveDefinite):
        pair.require_K()


def test_rejects_bad_time(heat1):
    for t in (0.0, -1.0, math.inf):
        with pytest.raises(DomainError):
            gramian_C(heat1, t)


def test_stationary_covariance(ou1, kolmogorov, kramers):
    np.testing.assert_allclose(stationary_covariance(ou1), [[1.0]])
    assert stationary_covariance(kolmogorov) is None
    S = stationary_covariance(kramers)
    R = kramers.B @ S + S @ kramers.B.T + 2 * kramers.Q
    assert np.abs(R).max() <= 1e-12
    assert is_hurwitz(kramers.B)


def test_large_time_hurwitz_limit(kramers):
    np.testing.assert_allclose(
        1e6 * gramian_K(kramers, 1e6), stationary_covariance(kramers) / 2, rtol=1e-10
    )


def test_small_time_slope(kolmogorov, heat1):
    slope, residuals = small_time_slope(kolmogorov)
    assert slope == pytest.approx(3.0, abs=0.1)
    assert len(residuals) == 3
    assert small_time_slope(heat1)[0] == math.inf


def test_hypo_report(kolmogorov, degenerate):
    report = hypo_report(kolmogorov)
    assert report.is_hypoelliptic
    assert report.kalman_rank == 2
    assert report.lp_contractive
    doc = report.to_dict()
    assert doc["is_hypoelliptic"] is True
    assert len(doc["sampled_det_K"]) == 5

    bad = hypo_report(degenerate)
    assert not bad.is_hypoelliptic
    assert bad.kalman_rank == 1


def test_hypo_report_zero_diffusion():
    report = hypo_report(ModelSpec(np.zeros((2, 2)), np.eye(2)))
    assert report.kalman_rank == 0
    assert not report.is_hypoelliptic


def test_hypo_report_needs_times(heat1):
    with pytest.raises(DomainError):
        hypo_report(heat1, ())


def test_gramians_are_monotone(model):
    times = (1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    for t1, t2 in zip(times, times[1:]):
        dC = gramian_C(model, t2) - gramian_C(model, t1)
        dK = t2 * gramian_K(model, t2) - t1 * gramian_K(model, t1)
        assert np.linalg.eigvalsh((dC + dC.T) / 2).min() >= -1e-10
        assert np.linalg.eigvalsh((dK + dK.T) / 2).min() >= -1e-10
