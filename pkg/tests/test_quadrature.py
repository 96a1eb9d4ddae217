"""Tests de la cuadratura adaptativa"""
import numpy as np
import pytest

from hmmqp.exceptions import QuadratureNotConverged
from hmmqp.core.quadrature import gaussian_support, integrate


def test_polynomial_is_exact():
    assert integrate(lambda x: x ** 2, 0.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_gaussian_density_integrates_to_one():
    mu, s2 = 1.5, 4.0
    a, b = gaussian_support(np.array([mu]), np.array([s2]))
    value = integrate(lambda x: np.exp(-0.5 * (x - mu) ** 2 / s2) / np.sqrt(2 * np.pi * s2), a, b)
    assert value == pytest.approx(1.0, abs=1e-9)


def test_vector_valued_integrand():
    value = integrate(lambda x: np.stack([np.ones_like(x), x, x ** 3], axis=1), -1.0, 2.0)
    np.testing.assert_allclose(value, [3.0, 1.5, 3.75], rtol=1e-10)


def test_breakpoints_handle_narrow_peaks():
    s2 = 1e-4
    value = integrate(
        lambda x: np.exp(-0.5 * (x - 0.37) ** 2 / s2) / np.sqrt(2 * np.pi * s2),
        -10.0, 10.0, breakpoints=[0.37],
    )
    assert value == pytest.approx(1.0, abs=1e-6)


def test_not_converged_raises():
    with pytest.raises(QuadratureNotConverged):
        integrate(lambda x: np.abs(x - 0.3) ** 0.5, 0.0, 1.0, rel_tol=1e-15, max_depth=0)


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        integrate(lambda x: x, 1.0, 1.0)


def test_support_covers_all_components():
    a, b = gaussian_support(np.array([-4.0, 4.0]), np.array([4.0, 1.0]))
    assert a == pytest.approx(-28.0)
    assert b == pytest.approx(20.0)
