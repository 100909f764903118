import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualstab.errors import ConjugateDiverges
from dualstab.utility import UtilityFunction, normalize, numeric_conjugate

Y_GRID = np.geomspace(0.05, 20, 25)


def _utilities():
    xs = np.geomspace(0.05, 50, 40)
    return [
        UtilityFunction.log(),
        normalize(UtilityFunction.power(0.5)),
        normalize(UtilityFunction.power(-1.0)),
        normalize(UtilityFunction.tabulated(xs, np.log(xs), 1 / xs)),
    ]


@pytest.mark.parametrize("U", _utilities(), ids=lambda U: U.name)
def test_normalized(U):
    assert U.is_normalized(1e-10)


@pytest.mark.parametrize("U", _utilities(), ids=lambda U: U.name)
def test_conjugate_matches_brute_force(U):
    V = U.conjugate()
    brute = numeric_conjugate(U, Y_GRID)
    assert np.max(np.abs(V(Y_GRID) - brute)) < 1e-7


@pytest.mark.parametrize("U", _utilities(), ids=lambda U: U.name)
def test_dual_derivatives(U):
    V = U.conjugate()
    h = 1e-5
    fd = (V(Y_GRID + h) - V(Y_GRID - h)) / (2 * h)
    np.testing.assert_allclose(V.derivative(Y_GRID), fd, rtol=1e-6)
    fd2 = (V.derivative(Y_GRID + h) - V.derivative(Y_GRID - h)) / (2 * h)
    np.testing.assert_allclose(V.second_derivative(Y_GRID), fd2, rtol=1e-4)


@pytest.mark.parametrize("U", _utilities(), ids=lambda U: U.name)
def test_round_trip(U):
    x = np.geomspace(0.1, 10, 15)
    np.testing.assert_allclose(U.inverse_marginal(U.derivative(x)), x, rtol=1e-10)


@pytest.mark.parametrize("U", _utilities(), ids=lambda U: U.name)
def test_v_above_minus_y(U):
    # U(1) = 0 makes V(y) >= U(1) - y
    assert np.all(U.conjugate()(Y_GRID) >= -Y_GRID - 1e-12)


def test_tabulated_log_conjugate():
    # values sampled from log only; the slopes are recovered from the samples
    xs = np.geomspace(0.01, 100, 8000)
    T = normalize(UtilityFunction.tabulated(xs, np.log(xs)))
    y = np.geomspace(0.1, 10, 200)
    assert np.max(np.abs(T.conjugate()(y) - (-np.log(y) - 1))) < 1e-6


def test_tabulated_from_samples_only():
    xs = np.geomspace(0.05, 10, 600)
    T = UtilityFunction.tabulated(xs, np.sqrt(xs))
    x = np.linspace(0.3, 4.5, 20)
    assert np.all(np.diff(T(x)) > 0) and np.all(np.diff(T.derivative(x)) < 0)
    assert np.max(np.abs(T(x) - np.sqrt(x))) < 1e-3


def test_tabulated_rejects_nonconcave():
    xs = np.array([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        UtilityFunction.tabulated(xs, xs**2)


def test_power_closed_form_conjugate():
    U = UtilityFunction.power(0.5)
    y = Y_GRID
    # sup_x 2 sqrt(x) - x y = 1 / y
    np.testing.assert_allclose(U.conjugate()(y), 1 / y, rtol=1e-12)


def test_bounded_utility_value_at_zero():
    U = normalize(UtilityFunction.power(-1.0))
    V = U.conjugate()
    assert np.isfinite(V.value_at_zero)
    assert V(1e-10) == pytest.approx(V.value_at_zero, abs=1e-4)
    assert UtilityFunction.log().conjugate().value_at_zero == np.inf


def test_inada():
    grid = np.geomspace(1e-8, 1e8, 5)
    for U in _utilities():
        assert U.check_inada(grid, tol=1e-3), U.name


def test_invalid_power():
    with pytest.raises(ValueError):
        UtilityFunction.power(1.0)
    with pytest.raises(ValueError):
        UtilityFunction.power(0.0)


def test_numeric_conjugate_divergence():
    # linear-ish growth of log is fine, but y = 0 has no finite sup
    with pytest.raises(ConjugateDiverges):
        numeric_conjugate(UtilityFunction.log(), 0.0)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(0.01, 100), y=st.floats(0.01, 100), alpha=st.floats(-3, 0.9).filter(lambda a: abs(a) > 1e-2))
def test_fenchel_young(x, y, alpha):
    U = normalize(UtilityFunction.power(alpha))
    assert float(U.conjugate()(y)) >= float(U(x)) - x * y - 1e-9 * (1 + abs(float(U(x))))
