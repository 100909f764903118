import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualstab.convex import (
    GridFunction,
    Interval,
    asymptotic_elasticity,
    average_function,
    average_tail,
    check_epi_convergence,
    check_graphical_convergence,
    compact_grid,
    convex_minorant,
    epsilon_extension,
    grid_conjugate,
    perspective,
    power_growth_bound,
    subdifferential,
    tabulate,
    uniform_rae,
)
from dualstab.errors import BoundaryPoint, NoPowerBound, NotApplicable, UnboundedSubdifferentials
from dualstab.utility import UtilityFunction, normalize

LOG_V = UtilityFunction.log().conjugate()


def power_v(a):
    return normalize(UtilityFunction.power(a)).conjugate()


def test_epsilon_extension_value_at_zero():
    Ve = epsilon_extension(LOG_V, 0.5)
    assert float(Ve(0.0)) == pytest.approx(np.log(2), abs=1e-14)
    y = np.array([0.5, 0.7, 3.0])
    assert np.array_equal(Ve(y), LOG_V(y))


def test_epsilon_extension_monotone_in_eps():
    y = np.linspace(0.0, 0.49, 50)
    hi, lo = epsilon_extension(LOG_V, 0.5), epsilon_extension(LOG_V, 0.1)
    assert np.all(hi(y) <= lo(y) + 1e-14)


def test_epsilon_extension_c1():
    Ve = epsilon_extension(LOG_V, 0.25)
    iv = subdifferential(Ve, 0.25)
    assert iv.degenerate
    assert iv.lo == pytest.approx(float(LOG_V.derivative(0.25)), rel=1e-6)
    assert Ve.tabulate(np.linspace(0.01, 5, 300)).shape_ok()


def test_epsilon_extension_rejects_bad_eps():
    with pytest.raises(ValueError):
        epsilon_extension(LOG_V, 1.0)


def test_minorant_trivial_families():
    g = compact_grid(500)
    one = convex_minorant([LOG_V], g)
    assert np.max(np.abs(one.y - LOG_V(g))) < 1e-12
    two = convex_minorant([LOG_V, LOG_V], g)
    assert np.array_equal(one.y, two.y)


def test_minorant_power_family_converges():
    g = compact_grid()
    mid = (g >= 0.5) & (g <= 2)
    alpha = 0.5
    V = power_v(alpha)
    gaps = []
    for n in (1, 10, 100):
        fam = [power_v(alpha - 0.2 / k**2) for k in range(n, n + 50)]
        Vt = convex_minorant(fam, g)
        assert np.all(Vt.y <= V(g) + 1e-12)
        assert np.all(Vt.y >= -g - 1e-12)
        assert Vt.shape_ok()
        gaps.append(float(np.max(np.abs(Vt.y - V(g))[mid])))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[-1] < 1e-4


def test_minorant_of_nonconvex_is_convex():
    g = np.linspace(-2, 2, 401)
    Vt = convex_minorant([lambda t: np.cos(3 * t), lambda t: t**2 - 1], g)
    assert Vt.shape_ok()
    assert np.all(Vt.y <= np.minimum(np.cos(3 * g), g**2 - 1) + 1e-12)


def test_average_function():
    g = np.geomspace(1, 1e3, 4001)
    Vbar = average_function(tabulate(LOG_V, g))
    assert Vbar.y[0] == pytest.approx(-1.0)
    assert float(Vbar(np.e)) == pytest.approx(-2 / np.e, abs=1e-6)
    assert np.all(np.diff(Vbar.y) >= -1e-12)
    assert abs(average_tail(Vbar)) < 1e-2


def test_average_uniform_convergence_on_power_family():
    g = np.geomspace(1, 1e3, 2000)
    alpha = 0.5
    target = average_function(tabulate(power_v(alpha), g))
    dist = []
    for n in (1, 3, 10, 30, 100):
        Vt = convex_minorant([power_v(alpha - 0.2 / k**2) for k in range(n, n + 20)], g)
        dist.append(float(np.max(np.abs(average_function(Vt).y - target.y))))
    assert all(a > b for a, b in zip(dist, dist[1:]))


def test_perspective_basic():
    Ve = epsilon_extension(LOG_V, 0.5)
    y = np.array([0.3, 1.0, 2.0])
    np.testing.assert_allclose(perspective(Ve, 1.0, y), Ve(y))
    np.testing.assert_allclose(perspective(Ve, 3.0, 3 * y), 3 * perspective(Ve, 1.0, y))
    with pytest.raises(ValueError):
        perspective(Ve, 0.0, 1.0)


def test_perspective_joint_convexity():
    rng = np.random.default_rng(7)
    Ve = epsilon_extension(LOG_V, 0.5)
    a = rng.uniform(0.01, 5, (1000, 2))
    b = rng.uniform(0.01, 5, (1000, 2))
    m = 0.5 * (a + b)
    slack = 0.5 * (perspective(Ve, a[:, 0], a[:, 1]) + perspective(Ve, b[:, 0], b[:, 1])) - perspective(Ve, m[:, 0], m[:, 1])
    assert np.min(slack) >= -1e-12


def test_subdifferential_examples():
    iv = subdifferential(LOG_V, 1.0)
    assert iv.degenerate and iv.lo == pytest.approx(-1.0, abs=1e-9)
    kink = subdifferential(lambda t: np.abs(t - 1), 1.0)
    assert kink.lo == pytest.approx(-1.0) and kink.hi == pytest.approx(1.0)
    assert not kink.degenerate
    grid_f = tabulate(lambda t: np.abs(t - 1), np.linspace(0, 2, 2001), "convex")
    assert subdifferential(grid_f, 1.0).hi == pytest.approx(1.0)


def test_subdifferential_boundary():
    with pytest.raises(BoundaryPoint):
        subdifferential(LOG_V, 1e-4)


def test_epi_convergence_examples():
    g = np.linspace(0.1, 5, 200)
    f = tabulate(LOG_V, g)
    same = check_epi_convergence(lambda n: f, f, g[5:-5], indices=[1, 10, 100])
    assert same.verdict and same.worst_gap == 0.0
    shifted = check_epi_convergence(lambda n: (lambda t: LOG_V(t) + 1.0 / n), LOG_V, g, indices=[1, 10, 100, 1000, 10**6, 10**7])
    assert shifted.verdict
    bad = check_epi_convergence(lambda n: (lambda t: LOG_V(t) + 1.0), LOG_V, g, indices=[1, 10, 100])
    assert not bad.verdict


def test_epi_conjugation_consistency():
    # primal and dual power families converge together
    alpha = 0.5
    idx = [1, 10, 100, 1000, 10**4, 10**5]
    fam_u = lambda n: normalize(UtilityFunction.power(alpha - 0.2 / n))
    probe_x = np.geomspace(0.2, 5, 30)
    neg_u = lambda U: (lambda t: -U(t))
    primal = check_epi_convergence(lambda n: neg_u(fam_u(n)), neg_u(normalize(UtilityFunction.power(alpha))), probe_x, idx, tol=1e-4)
    dual = check_epi_convergence(lambda n: fam_u(n).conjugate(), power_v(alpha), np.geomspace(0.2, 5, 30), idx, tol=1e-4)
    assert primal.verdict == dual.verdict is True


def test_graphical_convergence_power_family():
    alpha, x = 0.5, 1.3
    idx = [10, 100, 1000, 10**4, 10**5]
    subs = [subdifferential(power_v(alpha - 0.2 / n), x * (1 + 1.0 / n)) for n in idx]
    lim = subdifferential(power_v(alpha), x)
    rep = check_graphical_convergence(subs, lim, idx)
    assert rep.accumulation_distance < 1e-6 and rep.verdict
    smooth = check_graphical_convergence([lim] * 3, lim, [1, 2, 3])
    assert smooth.n_eps == {1e-1: 1, 1e-2: 1, 1e-3: 1}


def test_graphical_checker_on_kinks():
    idx = [10, 100, 1000, 10**4]
    subs = [subdifferential(lambda t, n=n: np.abs(t - 1.0 / n), 1.0 / n, steps=(1e-6, 5e-7, 2.5e-7)) for n in idx]
    rep = check_graphical_convergence(subs, Interval(-1.0, 1.0), idx)
    assert rep.verdict
    unb = [Interval(-k * 1e9, 0.0) for k in (1, 2, 3)]
    assert check_graphical_convergence(unb, Interval(-1, 0), [1, 2, 3]).n_eps is None
    with pytest.raises(UnboundedSubdifferentials):
        check_graphical_convergence(unb, Interval(-1, 0), [1, 2, 3], strict=True)


def test_asymptotic_elasticity():
    assert asymptotic_elasticity(UtilityFunction.power(0.3), 1.0) == pytest.approx(0.3)
    log = UtilityFunction.log()
    assert asymptotic_elasticity(log, np.e) == pytest.approx(1.0)
    assert asymptotic_elasticity(log, np.e**2) == pytest.approx(0.5)
    assert not uniform_rae([log], np.e).holds
    assert uniform_rae([log], np.e**2).holds
    with pytest.raises(NotApplicable):
        asymptotic_elasticity(log, 0.5)


def test_power_growth_bound():
    fam = [normalize(UtilityFunction.power(0.5 - 0.2 / n)) for n in (1, 2, 5, 10)]
    b = power_growth_bound(fam)
    # the largest member exponent is 0.5 - 0.2 / 10
    assert b.alpha == pytest.approx(0.48)
    x = np.geomspace(1e-3, 1e6, 200)
    for U in fam:
        assert np.all(b.primal(x) >= U(x) - 1e-9)
    with pytest.raises(NoPowerBound):
        power_growth_bound(fam, alpha=0.3)
    assert power_growth_bound(fam, alpha=0.5).alpha == 0.5


def test_grid_conjugate_matches_closed_form():
    g = np.geomspace(1e-3, 1e3, 20001)
    f = tabulate(lambda t: -np.log(t), g)
    s = np.array([-2.0, -1.0, -0.5])
    # sup_x {s x + log x} = -log(-s) - 1
    np.testing.assert_allclose(grid_conjugate(f, s), -np.log(-s) - 1, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(eps=st.floats(0.01, 0.99), y=st.floats(0.0, 10))
def test_extension_below_tangent_domination(eps, y):
    # the extension never exceeds V where both are defined and is finite at 0
    Ve = epsilon_extension(LOG_V, eps)
    val = float(Ve(y))
    assert np.isfinite(val)
    if y > 0:
        assert val <= float(LOG_V(y)) + 1e-12


def test_gridfunction_csv():
    gf = GridFunction(np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.5, 0.4]), "convex")
    assert gf.to_csv().splitlines()[0] == "abscissa,ordinate"
