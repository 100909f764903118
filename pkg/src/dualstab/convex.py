"""Convex-analysis toolkit used by the stability arguments.

Grid-backed functions, epsilon-extensions of dual functions, convex
minorants of families, average functions, perspectives, numerical
subdifferentials, and empirical epi-/graphical-convergence checkers.
"""

import io
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BoundaryPoint, NoPowerBound, NotApplicable, UnboundedSubdifferentials
from .utility import DualFunction, UtilityFunction

SHAPE_TOL = 1e-10
RICHARDSON_STEPS = (1e-3, 5e-4, 2.5e-4)
COMPACT = (0.05, 20.0)
COMPACT_POINTS = 2000


def compact_grid(points: int = COMPACT_POINTS) -> np.ndarray:
    """Fixed log-spaced grid on the reference compact [0.05, 20]."""
    return np.geomspace(*COMPACT, points)


@dataclass(frozen=True)
class GridFunction:
    """Piecewise-linear function through ``(x, y)`` with a declared shape."""

    x: np.ndarray
    y: np.ndarray
    shape: str = "convex"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise ValueError("x and y must be matching 1-d arrays of length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("abscissae must be strictly increasing")
        if self.shape not in ("convex", "concave", "none"):
            raise ValueError(f"unknown shape tag {self.shape!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.shape != "none" and not self.shape_ok():
            raise ValueError(f"ordinates are not {self.shape} on the grid")

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def slopes(self) -> np.ndarray:
        return np.diff(self.y) / np.diff(self.x)

    def shape_ok(self, tol: float = SHAPE_TOL) -> bool:
        ds = np.diff(self.slopes())
        scale = max(1.0, float(np.max(np.abs(self.slopes()))))
        if self.shape == "convex":
            return bool(np.all(ds >= -tol * scale))
        if self.shape == "concave":
            return bool(np.all(ds <= tol * scale))
        return True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.x[0] - 1e-12) or np.any(t > self.x[-1] + 1e-12):
            raise ValueError("evaluation outside the grid domain")
        return np.interp(t, self.x, self.y)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("abscissa,ordinate\n")
        for a, b in zip(self.x, self.y):
            buf.write(f"{a:.12g},{b:.12g}\n")
        return buf.getvalue()


def tabulate(fn: Callable, grid, shape: str = "convex") -> GridFunction:
    grid = np.asarray(grid, dtype=float)
    return GridFunction(grid, np.asarray(fn(grid), dtype=float), shape)


# -- epsilon extension ---------------------------------------------------------


@dataclass(frozen=True)
class EpsilonExtension:
    """``V`` on ``[eps, inf)``, continued affinely (C^1) to ``[0, eps)``."""

    V: Callable
    eps: float
    _value: float = field(init=False, repr=False)
    _slope: float = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        object.__setattr__(self, "_value", float(self.V(self.eps)))
        object.__setattr__(self, "_slope", float(self.V.derivative(self.eps)))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        safe = np.maximum(y, self.eps)
        return np.where(y >= self.eps, self.V(safe), self._value + self._slope * (y - self.eps))

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        safe = np.maximum(y, self.eps)
        return np.where(y >= self.eps, self.V.derivative(safe), self._slope)

    @property
    def domain(self) -> Tuple[float, float]:
        return 0.0, np.inf

    def tabulate(self, grid) -> GridFunction:
        return tabulate(self, grid, "convex")


def epsilon_extension(V: DualFunction, eps: float) -> EpsilonExtension:
    return EpsilonExtension(V, eps)


# -- convex minorant and averages --------------------------------------------


def lower_convex_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    hull: List[int] = []
    for i in range(x.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def convex_minorant(family: Sequence[Callable], grid) -> GridFunction:
    """Largest convex function below every member, sampled on ``grid``."""
    if not family:
        raise ValueError("family must be non-empty")
    grid = np.asarray(grid, dtype=float)
    lower = np.min([np.asarray(V(grid), dtype=float) for V in family], axis=0)
    idx = lower_convex_hull(grid, lower)
    return GridFunction(grid, np.interp(grid, grid[idx], lower[idx]), "convex")


def average_function(Vt: GridFunction) -> GridFunction:
    """``x -> Vt(x) / x`` on the same grid."""
    return GridFunction(Vt.x, Vt.y / Vt.x, "none")


def average_tail(Vbar: GridFunction) -> float:
    """Value at the right end of the grid; stands in for the limit at infinity."""
    return float(Vbar.y[-1])


def perspective(Veps: Callable, z, y):
    """``z * Veps(y / z)`` for ``z, y > 0``."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(z <= 0) or np.any(y <= 0):
        raise ValueError("perspective needs z, y > 0")
    return z * Veps(y / z)


def grid_conjugate(f: GridFunction, s) -> np.ndarray:
    """Discrete Legendre-Fenchel transform ``max_k {s x_k - f(x_k)}``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return np.max(s[:, None] * f.x[None, :] - f.y[None, :], axis=1)


# -- subdifferentials ----------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.hi - self.lo <= 1e-6 * max(1.0, abs(self.lo), abs(self.hi))

    def distance(self, t: float) -> float:
        return max(self.lo - t, t - self.hi, 0.0)

    def excess(self, other: "Interval") -> float:
        """One-sided Hausdorff distance: how far ``self`` sticks out of ``other``."""
        return max(other.distance(self.lo), other.distance(self.hi))


def _domain_of(f) -> Tuple[float, float]:
    return getattr(f, "domain", (0.0, np.inf))


def subdifferential(f: Callable, x: float, steps: Sequence[float] = RICHARDSON_STEPS) -> Interval:
    """``[left slope, right slope]`` of a convex ``f`` at ``x``.

    One-sided difference quotients at the three step sizes are combined by
    two rounds of Richardson extrapolation (halving ratio).
    """
    lo_dom, hi_dom = _domain_of(f)
    h = max(steps)
    if not (x - h > lo_dom and x + h < hi_dom):
        raise BoundaryPoint(f"{x!r} is within {h:g} of the domain boundary")
    fx = float(f(x))
    left = [(fx - float(f(x - s))) / s for s in steps]
    right = [(float(f(x + s)) - fx) / s for s in steps]
    return Interval(_richardson(left), _richardson(right))


def _richardson(d: Sequence[float]) -> float:
    d0, d1, d2 = d
    r0 = 2 * d1 - d0
    r1 = 2 * d2 - d1
    return (4 * r1 - r0) / 3


# -- convergence checkers ------------------------------------------------------


def default_indices(n_max: float = 1e8, per_decade: int = 1) -> List[int]:
    k = int(round(np.log10(n_max) * per_decade))
    return sorted({int(round(v)) for v in np.logspace(0, np.log10(n_max), k + 1)})


@dataclass
class EpiReport:
    indices: List[int]
    liminf_gaps: List[float]  # max violation of f_n(x_n) >= f(x) at each n
    recovery_gaps: List[float]  # max violation of f_n(x) <= f(x) at each n
    tol: float

    @property
    def worst_gap(self) -> float:
        return max(self.liminf_gaps[-1], self.recovery_gaps[-1])

    @property
    def verdict(self) -> bool:
        tail = lambda g: g[-1] <= self.tol and g[-1] <= max(g[-3:]) + 1e-15
        return tail(self.liminf_gaps) and tail(self.recovery_gaps)


def check_epi_convergence(
    f_seq: Union[Callable[[int], Callable], Sequence[Callable]],
    f: Callable,
    probe,
    indices: Optional[Sequence[int]] = None,
    tol: float = 1e-6,
) -> EpiReport:
    """Empirical epi-convergence test of ``f_n`` towards ``f``.

    Liminf condition: for each probe point ``x`` and each probe sequence
    ``x_n`` in ``{x, x +- 1/n, x (1 +- 1/n)}`` the shortfall
    ``f(x_n) - f_n(x_n)`` is recorded.  For continuous ``f`` this is
    equivalent to the shortfall against ``f(x)`` in the limit, and it does
    not charge the modulus of continuity of ``f`` to the sequence.  Recovery condition: the constant
    sequence must satisfy ``f_n(x) <= f(x)`` asymptotically.  Both gaps are
    tracked along ``indices``; the verdict requires the final gaps to be
    below ``tol`` and not increasing at the tail.
    """
    if callable(f_seq) and not isinstance(f_seq, (list, tuple)):
        get = f_seq
        indices = list(indices) if indices is not None else default_indices()
    else:
        seq = list(f_seq)
        get = lambda n: seq[n - 1]
        indices = list(indices) if indices is not None else list(range(1, len(seq) + 1))
    probe = np.asarray(probe, dtype=float)
    lo, hi = _domain_of(f)
    fx = np.asarray(f(probe), dtype=float)
    lo_f = lo
    lim_gaps, rec_gaps = [], []
    for n in indices:
        fn = get(n)
        nlo, nhi = _domain_of(fn)
        lo_n, hi_n = max(lo, nlo), min(hi, nhi)
        worst = -np.inf
        for xn in (probe, probe + 1.0 / n, probe - 1.0 / n, probe * (1 + 1.0 / n), probe * (1 - 1.0 / n)):
            ok = (xn >= lo_n) & (xn <= hi_n) & ((xn > 0) | (lo_f < 0))
            if not np.any(ok):
                continue
            gap = np.asarray(f(xn[ok]), dtype=float) - np.asarray(fn(xn[ok]), dtype=float)
            worst = max(worst, float(np.max(gap)))
        lim_gaps.append(max(worst, 0.0))
        rec = np.asarray(fn(probe), dtype=float) - fx
        rec_gaps.append(max(float(np.max(rec)), 0.0))
    return EpiReport(indices, lim_gaps, rec_gaps, tol)


@dataclass
class GraphicalReport:
    accumulation: Tuple[float, float]
    accumulation_distance: float
    inclusion_ok: bool
    n_eps: Optional[Dict[float, Optional[int]]]
    bounded: bool
    tol: float = 1e-6

    @property
    def verdict(self) -> bool:
        ok_b = self.n_eps is None or all(v is not None for v in self.n_eps.values())
        return self.inclusion_ok and ok_b


def _extrapolate(s: Sequence[float]) -> float:
    if len(s) < 3:
        return float(s[-1])
    d1, d2 = s[-2] - s[-3], s[-1] - s[-2]
    if d1 != 0 and abs(d2) < abs(d1) and d2 != d1:
        return float(s[-1] - d2 * d2 / (d2 - d1))
    return float(s[-1])


def check_graphical_convergence(
    sub_seq: Sequence[Interval],
    sub_lim: Interval,
    indices: Sequence[int],
    eps_ladder: Sequence[float] = (1e-1, 1e-2, 1e-3),
    tol: float = 1e-6,
    bound: float = 1e8,
    strict: bool = False,
) -> GraphicalReport:
    """Check ``limsup d f_n(x_n) in d f(x)`` and the eps-ball inclusion.

    ``sub_seq[k]`` is the subdifferential interval at ``indices[k]``.  The
    accumulation point of each endpoint sequence is estimated by Aitken
    extrapolation of its last three terms.  When the intervals are not
    uniformly bounded the eps-ball part is skipped (``n_eps`` is None) or,
    with ``strict=True``, :class:`UnboundedSubdifferentials` is raised.
    """
    los = [iv.lo for iv in sub_seq]
    his = [iv.hi for iv in sub_seq]
    acc = (_extrapolate(los), _extrapolate(his))
    dist = max(sub_lim.distance(acc[0]), sub_lim.distance(acc[1]))
    bounded = bool(np.all(np.isfinite(los + his)) and max(np.abs(los + his)) <= bound)
    n_eps = None
    if bounded:
        excess = [iv.excess(sub_lim) for iv in sub_seq]
        n_eps = {}
        for eps in eps_ladder:
            n0 = None
            for k in range(len(indices) - 1, -1, -1):
                if excess[k] < eps:
                    n0 = indices[k]
                else:
                    break
            n_eps[eps] = n0
    elif strict:
        raise UnboundedSubdifferentials("subdifferentials are not uniformly bounded")
    return GraphicalReport(acc, dist, dist <= tol, n_eps, bounded, tol)


# -- growth diagnostics ----------------------------------------------------------


def asymptotic_elasticity(U: UtilityFunction, x0: float, x_max: float = 1e6, points: int = 4000) -> float:
    """``sup_{x >= x0} x U'(x) / U(x)`` on a geometric grid up to ``x_max``."""
    grid = np.geomspace(x0, x_max, points)
    val = np.asarray(U(grid), dtype=float)
    if np.any(val <= 0):
        raise NotApplicable(f"U is not positive on [{x0:g}, {x_max:g}]")
    return float(np.max(grid * U.derivative(grid) / val))


@dataclass
class RaeVerdict:
    delta: float
    x0: float
    holds: bool


def uniform_rae(family: Sequence[UtilityFunction], x0: float, **kw) -> RaeVerdict:
    """Uniform reasonable asymptotic elasticity: one ``delta < 1`` for all members."""
    delta = max(asymptotic_elasticity(U, x0, **kw) for U in family)
    return RaeVerdict(delta, x0, delta < 1.0)


@dataclass
class PowerBound:
    c: float
    d: float
    alpha: float
    C: float
    D: float

    def primal(self, x):
        return self.c * np.asarray(x, dtype=float) ** self.alpha + self.d

    def dual(self, y):
        a = self.alpha
        return self.C * np.asarray(y, dtype=float) ** (-a / (1 - a)) + self.D


def _natural_exponent(U: UtilityFunction, log_alpha: float) -> float:
    if U.family == "power":
        return U.alpha if U.alpha > 0 else log_alpha
    if U.family == "log":
        return log_alpha
    rho = U.base.rho_right
    return max(1.0 - rho, log_alpha) if rho < 1 else log_alpha


def _member_bound(U: UtilityFunction, alpha: float, grid) -> Tuple[float, float]:
    s, t = U.scale, U.shift
    if U.family == "power":
        # (x^b - 1)/b <= (x^a - 1)/a whenever b <= a
        b = U.alpha
        return s / alpha, t + s / b - s / alpha
    if U.family == "log":
        return s / alpha, t - s / alpha
    upper = grid[grid >= 1.0]
    c = max(float(np.max(np.maximum(U(upper), 0.0) / upper**alpha)), 1e-12)
    return c, float(np.max(U(grid) - c * grid**alpha))


def power_growth_bound(
    family: Sequence[UtilityFunction],
    alpha: Optional[float] = None,
    log_alpha: float = 0.01,
    grid=None,
    dual_grid=None,
) -> PowerBound:
    """Constants with ``U_n(x) <= c x^alpha + d`` and the induced dual bound.

    The dual constants follow from maximizing ``c x^alpha - x y``:
    ``C = (1 - alpha)/alpha * (c alpha)^(1/(1 - alpha))`` and ``D = d``.
    Both inequalities are checked on grids before returning.
    """
    grid = np.geomspace(1e-3, 1e6, 3000) if grid is None else np.asarray(grid, float)
    dual_grid = np.geomspace(1e-3, 1.0, 500) if dual_grid is None else np.asarray(dual_grid, float)
    need = max(_natural_exponent(U, log_alpha) for U in family)
    if alpha is None:
        alpha = need
    if not 0 < alpha < 1 or alpha < need - 1e-15:
        raise NoPowerBound(f"growth exponent {need:g} not dominated by alpha={alpha:g} < 1")
    cs, ds = zip(*(_member_bound(U, alpha, grid) for U in family))
    c, d = max(cs), max(ds)
    C = (1 - alpha) / alpha * (c * alpha) ** (1 / (1 - alpha))
    bound = PowerBound(c, d, alpha, C, d)
    for U in family:
        slack = bound.primal(grid) - U(grid)
        if np.min(slack) < -1e-9 * (1 + np.max(np.abs(U(grid)))):
            raise NoPowerBound("fitted primal bound violated on the grid")
        V = U.conjugate()
        dslack = bound.dual(dual_grid) - V(dual_grid)
        if np.min(dslack) < -1e-9 * (1 + np.max(np.abs(V(dual_grid)))):
            raise NoPowerBound("induced dual bound violated on the grid")
    return bound
