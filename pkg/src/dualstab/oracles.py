"""Solver-independent brute-force oracles used for cross-checking.

Nothing here calls the Newton solvers for the quantity being checked:
the primal oracle searches the vertex (budget) representation of the
feasible set directly, and the zoom search is a plain grid refinement.
"""

from typing import Callable, Optional, Tuple

import numpy as np

from .market import EndowmentBundle, FiniteMarket, MartingaleMeasurePolytope, martingale_measures


def zoom_search(
    fn: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    points: int = 41,
    levels: int = 40,
    shrink: float = 0.5,
    maximize: bool = True,
) -> Tuple[np.ndarray, float]:
    """Grid search on a box with repeated zooming around the incumbent.

    ``fn`` maps an array of shape (k, dim) to k values (``nan``/``-inf``
    for infeasible points).  Each level evaluates a tensor grid, recentres
    the box on the best point and shrinks it by ``shrink``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    dim = lo.size
    sign = 1.0 if maximize else -1.0
    best_x, best_v = None, -np.inf
    a, b = lo.copy(), hi.copy()
    for _ in range(levels):
        axes = [np.linspace(a[j], b[j], points) for j in range(dim)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        vals = sign * np.asarray(fn(mesh), dtype=float)
        vals = np.where(np.isfinite(vals), vals, -np.inf)
        k = int(np.argmax(vals))
        if vals[k] > best_v:
            best_v, best_x = float(vals[k]), mesh[k]
        if best_x is None:
            raise ValueError("no feasible grid point found")
        half = shrink * (b - a) / 2
        a = np.maximum(lo, best_x - half)
        b = np.minimum(hi, best_x + half)
    return best_x, sign * best_v


def brute_force_primal(
    market: FiniteMarket,
    P,
    U,
    x: float,
    q=None,
    f: Optional[EndowmentBundle] = None,
    polytope: Optional[MartingaleMeasurePolytope] = None,
    points: int = 11,
    levels: int = 200,
    shrink: float = 0.8,
) -> Tuple[float, np.ndarray]:
    """Maximize ``E_P U(g)`` over ``{g >= 0 : E^Q g <= x + <q, E^Q f>}``.

    The budget constraints range over the polytope vertices.  The first
    ``m - 1`` coordinates are searched on a zooming grid; the last one is
    set to the largest value the budgets allow, which is optimal because
    ``U`` is increasing.  When several budgets bind the objective has a
    kinked ridge and the zoom may stop short of the optimum, so the result
    is a certified lower bound that is usually tight to about 1e-5.
    """
    P = np.asarray(getattr(P, "weights", P), dtype=float)
    polytope = polytope or martingale_measures(market)
    Qv = polytope.vertices
    b = np.full(Qv.shape[0], float(x))
    if f is not None and f.N:
        b = b + polytope.prices(f) @ np.atleast_1d(np.asarray(q, dtype=float))
    m = market.n_atoms
    last = m - 1
    pos = Qv[:, last] > 1e-14
    upper = np.array([np.min(b[Qv[:, i] > 1e-14] / Qv[Qv[:, i] > 1e-14, i]) for i in range(m)])

    def payoff(head):
        head = np.atleast_2d(head)
        slack = b[None, :] - head @ Qv[:, :last].T
        tail = np.min(slack[:, pos] / Qv[pos, last][None, :], axis=1)
        ok = np.all(slack[:, ~pos] >= 0, axis=1) & (tail > 0) & np.all(head > 0, axis=1)
        return np.column_stack([head, tail]), ok

    def value(head):
        g, ok = payoff(head)
        out = np.full(g.shape[0], -np.inf)
        if np.any(ok):
            out[ok] = U(g[ok]) @ P
        return out

    if m == 1:
        g = np.array([upper[0]])
        return float(P @ U(g)), g
    head, best = zoom_search(value, np.full(last, 1e-12), upper[:last], points, levels, shrink)
    g, _ = payoff(head)
    return best, g[0]


def brute_force_strategy(
    market: FiniteMarket,
    P,
    U,
    x: float,
    q=None,
    f: Optional[EndowmentBundle] = None,
    points: int = 21,
    levels: int = 60,
    box: float = 50.0,
) -> Tuple[float, np.ndarray]:
    """Maximize ``E_P U(x + <q, f> + G H)`` by grid search over strategies ``H``.

    The feasible strategies form the polytope ``{H : x + <q, f> + G H >= 0}``;
    on it the objective is smooth and concave, so plain zooming converges
    where the payoff-space search can stall on budget ridges.
    """
    P = np.asarray(getattr(P, "weights", P), dtype=float)
    base = np.full(market.n_atoms, float(x))
    if f is not None and f.N:
        base = base + f.position(np.atleast_1d(np.asarray(q, dtype=float)))
    G = market.gains
    if G.shape[1] == 0:
        return float(P @ U(base)), base

    def value(H):
        g = base[None, :] + H @ G.T
        ok = np.all(g > 0, axis=1)
        out = np.full(H.shape[0], -np.inf)
        if np.any(ok):
            out[ok] = U(g[ok]) @ P
        return out

    k = G.shape[1]
    H, best = zoom_search(value, np.full(k, -box), np.full(k, box), points, levels)
    return best, base + G @ H


def grid_argmin_R(
    phi: Callable[[float, float], float],
    y_range: Tuple[float, float],
    p_range: Tuple[float, float],
    points: int = 21,
    levels: int = 40,
) -> Tuple[float, float, float]:
    """Brute-force argmin of ``phi(y, r)`` over ``y`` and ``r = y p`` (N = 1).

    Returns ``(y, r, value)``.
    """

    def neg(mesh):
        return np.array([phi(yy, yy * pp) for yy, pp in mesh])

    (y, p), val = zoom_search(neg, [y_range[0], p_range[0]], [y_range[1], p_range[1]],
                              points, levels, maximize=False)
    return float(y), float(y * p), float(val)
