"""Primal and dual utility maximization on a finite market.

Primal problem: maximize ``E_P U(g)`` over terminal payoffs
``g = x + <q, f> + G H`` with ``g > 0``, where ``G`` is the gains matrix of
the tree and ``H`` ranges over all predictable strategies.

Dual problem: minimize ``E_P V(Y)`` over densities ``Y = y dQ/dP`` with
``Q`` a martingale measure pricing the endowment at ``r / y``.

Both are smooth, strictly convex programs on affine slices of the positive
orthant and are solved by the damped Newton method in :mod:`._newton`.
"""

import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq, linprog, minimize, nnls

from . import _newton
from .errors import InfeasibleStart, MismatchedPair, SolverDiverged, SolverError
from .market import (
    INTERIOR_MARGIN,
    EndowmentBundle,
    FiniteMarket,
    MartingaleMeasurePolytope,
    PriceSet,
    ProbabilityMeasure,
    _independent_rows,
    analytic_center,
    arbitrage_free_price_set,
    cone_K_margin,
    martingale_constraints,
    martingale_measures,
    strictly_positive_point,
)
from .utility import DualFunction, UtilityFunction

NEWTON_TOL = 1e-13
FACE_SLACKS = (1e-7, 1e-9)
FACE_RANDOM_DIRECTIONS = 16
SINGLETON_TOL = 1e-5
LINK_TOL = 1e-3


def _weights(P) -> np.ndarray:
    if isinstance(P, ProbabilityMeasure):
        return P.weights
    return np.asarray(P, dtype=float)


def _bundle(market: FiniteMarket, f: Optional[EndowmentBundle]) -> EndowmentBundle:
    return EndowmentBundle.empty(market.n_atoms) if f is None else f


def _vec(q, N: int) -> np.ndarray:
    if N == 0:
        return np.zeros(0)
    if q is None:
        return np.zeros(N)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (N,):
        raise ValueError(f"expected a vector of length {N}, got shape {q.shape}")
    return q


def _vertex_weights(polytope: MartingaleMeasurePolytope, Q: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Convex weights of ``Q`` on the polytope vertices (minimal NNLS fit).

    The second value flags a degenerate decomposition: more vertices than
    ``dim + 1`` means the weights are not unique.
    """
    V = polytope.vertices
    k = V.shape[0]
    M = np.vstack([V.T, np.ones((1, k))])
    lam, _ = nnls(M, np.concatenate([Q, [1.0]]))
    dim = int(np.linalg.matrix_rank(V - V.mean(axis=0), tol=1e-10)) if k > 1 else 0
    return lam, k > dim + 1


# -- solution records --------------------------------------------------------


@dataclass(frozen=True)
class PrimalSolution:
    """Optimal terminal wealth and first-order data of the primal problem.

    Attributes
    ----------
    wealth : terminal wealth ``X_T`` (excluding the endowment).
    payoff : total payoff ``g = X_T + <q, f>``.
    value : ``u(x, q)``.
    y, r : supergradient ``(du/dx, du/dq)``.
    pricing_measure : ``Q = P U'(g) / y``, a martingale measure.
    vertex_weights : convex weights of the pricing measure on the vertices.
    """

    x: float
    q: np.ndarray
    probabilities: np.ndarray
    wealth: np.ndarray
    payoff: np.ndarray
    value: float
    y: float
    r: np.ndarray
    pricing_measure: np.ndarray
    vertex_weights: np.ndarray
    strategy: np.ndarray
    kkt_residual: float
    iterations: int
    metadata: Dict = field(default_factory=dict)

    @property
    def marginal_utility(self) -> np.ndarray:
        return self.y * self.pricing_measure / self.probabilities

    def budget_slack(self, polytope: MartingaleMeasurePolytope, f: EndowmentBundle) -> np.ndarray:
        """``x + <q, E^Q f> - E^Q[g]`` at every vertex (all >= 0)."""
        endow = polytope.prices(f) @ self.q if f.N else np.zeros(polytope.n_vertices)
        return self.x + endow - polytope.vertices @ self.payoff

    def to_csv(self, dual: Optional["DualSolution"] = None) -> str:
        buf = io.StringIO()
        buf.write("atom,P,X,Y\n")
        Y = dual.density if dual is not None else self.marginal_utility
        for i, (p, xv, yv) in enumerate(zip(self.probabilities, self.wealth, Y)):
            buf.write(f"{i},{p:.12g},{xv:.12g},{yv:.12g}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class DualSolution:
    """Dual minimizer ``Y = y dQ/dP`` and its multipliers.

    ``x`` and ``q`` are minus the multipliers of the budget and pricing
    constraints, so that ``dv/dy = -x`` and ``dv/dr = -q``.
    """

    y: float
    r: np.ndarray
    probabilities: np.ndarray
    density: np.ndarray
    value: float
    x: float
    q: np.ndarray
    measure: np.ndarray
    vertex_weights: np.ndarray
    residual: float
    iterations: int
    metadata: Dict = field(default_factory=dict)

    @property
    def dv_dy(self) -> float:
        return -self.x

    @property
    def dv_dr(self) -> np.ndarray:
        return -self.q


@dataclass(frozen=True)
class Superdifferential:
    """``{y} x R`` with ``R`` a vertex list of shape (k, N)."""

    y: float
    R: np.ndarray
    value: float
    width: float = 0.0
    certified: bool = True

    @property
    def N(self) -> int:
        return self.R.shape[1]


@dataclass(frozen=True)
class MarginalPriceSet:
    points: np.ndarray  # (k, N)

    @property
    def N(self) -> int:
        return self.points.shape[1]

    def is_singleton(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.ptp(self.points, axis=0) <= tol)) if self.points.size else True


# -- primal ------------------------------------------------------------------


def _primal_start(G: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Strategy maximizing ``min_i (base + G H)_i`` (capped)."""
    m, k = G.shape
    if k == 0:
        return np.zeros(0)
    cap = max(1.0, float(np.max(np.abs(base))))
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-G, np.ones((m, 1))])
    res = linprog(c, A_ub=A_ub, b_ub=base, bounds=[(None, None)] * k + [(None, cap)], method="highs")
    if res.status != 0:
        raise InfeasibleStart("could not find a strictly positive feasible payoff")
    return res.x[:k]


def solve_primal(
    market: FiniteMarket,
    P,
    U: UtilityFunction,
    x: float,
    q=None,
    f: Optional[EndowmentBundle] = None,
    polytope: Optional[MartingaleMeasurePolytope] = None,
    tol: float = NEWTON_TOL,
) -> PrimalSolution:
    """Maximize ``E_P U(x + <q, f> + (H . S)_T)`` over strategies ``H``.

    Raises
    ------
    InfeasibleStart
        If ``(x, q)`` is not interior to the feasibility cone.
    SolverDiverged
        If Newton's method fails to reach the requested residual.
    """
    f = _bundle(market, f)
    q = _vec(q, f.N)
    Pw = _weights(P)
    polytope = polytope or martingale_measures(market)
    margin = cone_K_margin(market, f, x, q, polytope)
    if not margin > INTERIOR_MARGIN:
        raise InfeasibleStart(f"(x, q) = ({x:g}, {q.tolist()}) is not interior to K (margin {margin:.3g})")
    G = market.gains
    endow = f.position(q) if f.N else np.zeros(market.n_atoms)
    base = x + endow
    H0 = _primal_start(G, base)
    w0 = base + G @ H0
    if not np.all(w0 > 0):
        raise InfeasibleStart("no strictly positive payoff is attainable")
    B = _newton.orthonormal_range(G)

    def objective(w):
        return -float(Pw @ U(w)), -Pw * U.derivative(w), -Pw * U.second_derivative(w)

    res = _newton.minimize_separable(objective, w0, B, tol=tol)
    g = res.w
    marg = U.derivative(g)
    y = float(Pw @ marg)
    r = f.payoffs @ (Pw * marg) if f.N else np.zeros(0)
    Qhat = Pw * marg / y
    kkt = float(np.max(np.abs(G.T @ Qhat))) if G.size else 0.0
    lam, degenerate = _vertex_weights(polytope, Qhat)
    H = np.linalg.lstsq(G, g - base, rcond=None)[0] if G.size else np.zeros(0)
    return PrimalSolution(
        x=float(x),
        q=q,
        probabilities=Pw,
        wealth=g - endow,
        payoff=g,
        value=float(Pw @ U(g)),
        y=y,
        r=np.asarray(r, dtype=float),
        pricing_measure=Qhat,
        vertex_weights=lam,
        strategy=H.reshape(len(market.internal), market.n_assets) if G.size else H,
        kkt_residual=kkt,
        iterations=res.iterations,
        metadata={"degenerate": degenerate, "newton_residual": res.residual},
    )


# -- dual --------------------------------------------------------------------


def _as_dual(V: Union[DualFunction, UtilityFunction]) -> DualFunction:
    return V.conjugate() if isinstance(V, UtilityFunction) else V


def _slice_start(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    Ar, br = _independent_rows(A, b)
    Q0 = strictly_positive_point(Ar, br)
    if Q0 is None:
        raise InfeasibleStart("no equivalent martingale measure prices the endowment at r / y")
    return analytic_center(Ar, br, Q0)


def solve_dual(
    market: FiniteMarket,
    P,
    V: Union[DualFunction, UtilityFunction],
    y: float,
    r=None,
    f: Optional[EndowmentBundle] = None,
    polytope: Optional[MartingaleMeasurePolytope] = None,
    price_set: Optional[PriceSet] = None,
    tol: float = NEWTON_TOL,
) -> DualSolution:
    """Minimize ``E_P V(Y)`` over ``Y = y dQ/dP`` with ``E^Q f = r / y``.

    Raises
    ------
    InfeasibleStart
        If ``(y, r)`` is not in the relative interior of the polar cone.
    SolverDiverged
        If Newton's method fails to reach the requested residual.
    """
    V = _as_dual(V)
    f = _bundle(market, f)
    r = _vec(r, f.N)
    Pw = _weights(P)
    if not y > INTERIOR_MARGIN:
        raise InfeasibleStart(f"y = {y:g} must be positive")
    if f.N:
        polytope = polytope or martingale_measures(market)
        price_set = price_set or arbitrage_free_price_set(market, f, polytope)
        if not price_set.interior_contains(r / y):
            raise InfeasibleStart(f"r / y = {(r / y).tolist()} is not an interior arbitrage-free price")
    A, b = martingale_constraints(market)
    if f.N:
        A = np.vstack([A, f.payoffs])
        b = np.concatenate([b, r / y])
    Q0 = _slice_start(A, b)

    # constraints on the density Y: rows of A scaled by P, rhs scaled by y
    M = A * Pw[None, :]
    rhs = y * b
    Mr, _ = _independent_rows(M, rhs)
    B = _newton.null_space(Mr)
    w0 = y * Q0 / Pw

    def objective(w):
        return float(Pw @ V(w)), Pw * V.derivative(w), Pw * V.second_derivative(w)

    res = _newton.minimize_separable(objective, w0, B, tol=tol)
    Y = res.w
    grad = Pw * V.derivative(Y)
    lam = np.linalg.lstsq(M.T, grad, rcond=None)[0]
    k = market.gains.shape[1]
    mu = lam[k]
    nu = lam[k + 1:]
    Q = Pw * Y / y
    if polytope is None:
        polytope = martingale_measures(market)
    weights, degenerate = _vertex_weights(polytope, Q)
    return DualSolution(
        y=float(y),
        r=r,
        probabilities=Pw,
        density=Y,
        value=res.value,
        x=float(-mu),
        q=-np.asarray(nu, dtype=float),
        measure=Q,
        vertex_weights=weights,
        residual=res.residual,
        iterations=res.iterations,
        metadata={"degenerate": degenerate},
    )


def dual_objective(market, P, V, x, q, y, r, f=None, polytope=None, price_set=None) -> float:
    """``v(y, r) + x y + <q, r>``; ``inf`` outside the polar cone."""
    try:
        d = solve_dual(market, P, V, y, r, f, polytope, price_set)
    except InfeasibleStart:
        return np.inf
    return d.value + x * y + float(np.dot(q, d.r))


# -- superdifferential -------------------------------------------------------


def _probe_directions(n: int, seed: int = 0) -> np.ndarray:
    axes = np.vstack([np.eye(n), -np.eye(n)])
    rng = np.random.default_rng(seed)
    rand = rng.standard_normal((FACE_RANDOM_DIRECTIONS, n))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    return np.vstack([axes, rand])


def superdifferential_u(
    market: FiniteMarket,
    P,
    U: UtilityFunction,
    x: float,
    q=None,
    f: Optional[EndowmentBundle] = None,
    polytope: Optional[MartingaleMeasurePolytope] = None,
    trace_face: bool = True,
    primal: Optional[PrimalSolution] = None,
) -> Superdifferential:
    """Supergradients of ``u`` at ``(x, q)``.

    The optimal ``(y, r)`` is read off the primal optimizer.  With
    ``trace_face`` the argmin face of ``(y, r) -> v(y, r) + x y + <q, r>``
    is probed along axis and random directions at two value slacks; the
    face radius is extrapolated to zero slack (it scales like the square
    root of the slack for a singleton).  A vanishing radius certifies the
    singleton, otherwise the probed points' hull is returned.
    """
    f = _bundle(market, f)
    q = _vec(q, f.N)
    polytope = polytope or martingale_measures(market)
    sol = primal or solve_primal(market, P, U, x, q, f, polytope)
    phat = np.concatenate([[sol.y], sol.r])
    if not trace_face:
        return Superdifferential(sol.y, sol.r[None, :], sol.value)

    V = U.conjugate()
    price_set = arbitrage_free_price_set(market, f, polytope) if f.N else None

    def phi(p):
        return dual_objective(market, P, V, x, q, p[0], p[1:], f, polytope, price_set)

    base = phi(phat)
    if not np.isfinite(base):
        raise SolverError("optimal (y, r) fell outside the polar cone")
    scale = float(np.linalg.norm(phat))
    dirs = _probe_directions(phat.size)
    radii, points = [], []
    for s in FACE_SLACKS:
        target = base + s * max(1.0, abs(base))
        ts = []
        for d in dirs:
            h = lambda t: phi(phat + t * d) - target
            hi = 1e-6 * scale
            while np.isfinite(h(hi)) and h(hi) < 0 and hi < 10 * scale:
                hi *= 4
            if not np.isfinite(h(hi)):
                # cone boundary reached first: shrink until finite
                while not np.isfinite(h(hi)):
                    hi *= 0.5
                if h(hi) < 0:
                    ts.append(hi)
                    continue
            ts.append(brentq(h, 0.0, hi, xtol=1e-15 * scale, rtol=1e-12))
        ts = np.array(ts)
        radii.append(float(np.max(ts)))
        points.append(phat[None, :] + ts[:, None] * dirs)
    r1, r2 = radii
    s1, s2 = (np.sqrt(s) for s in FACE_SLACKS)
    width = max((r2 * s1 - r1 * s2) / (s1 - s2), 0.0)
    certified = width <= SINGLETON_TOL * max(1.0, scale)
    if certified:
        return Superdifferential(sol.y, sol.r[None, :], sol.value, width, True)
    face = points[0]
    R = face[:, 1:]
    if f.N:
        R = PriceSet(R).vertices
    return Superdifferential(float(np.mean(face[:, 0])), R, sol.value, width, False)


def marginal_price_set(sd: Superdifferential) -> MarginalPriceSet:
    """``{r / y : r in R}``."""
    return MarginalPriceSet(sd.R / sd.y)


# -- cross-checks ------------------------------------------------------------


def first_order_link_check(primal: PrimalSolution, dual: DualSolution, U: UtilityFunction,
                           q=None, f: Optional[EndowmentBundle] = None) -> float:
    """``max_i |Y_i - U'(g_i)|`` for a matched primal/dual pair.

    Raises
    ------
    MismatchedPair
        If ``(dual.y, dual.r)`` is not the supergradient of ``u`` at the
        primal point, or the atomwise residual exceeds the link tolerance.
    """
    if f is not None and q is not None:
        g = primal.wealth + f.position(_vec(q, f.N))
    else:
        g = primal.payoff
    p_hat = np.concatenate([[primal.y], primal.r])
    p_dual = np.concatenate([[dual.y], dual.r])
    gap = float(np.max(np.abs(p_hat - p_dual)) / max(1.0, np.max(np.abs(p_hat))))
    residual = float(np.max(np.abs(dual.density - U.derivative(g))))
    if gap > 1e-6 or residual > LINK_TOL:
        raise MismatchedPair(f"(y, r) is not a supergradient at (x, q): gap {gap:.3g}, residual {residual:.3g}")
    return residual


@dataclass
class ConjugacyReport:
    primal_residual: float  # max |u - inf (v + xy + qr)|
    dual_residual: float  # max |v - sup (u - xy - qr)|
    weak_violation: float  # max (u(x,q) - v(y,r) - xy - qr)^+ over all grid pairs
    link_residual: float
    rows: List[Dict] = field(default_factory=list)
    value_finite: bool = True

    @property
    def residual(self) -> float:
        return max(self.primal_residual, self.dual_residual, self.weak_violation)


def conjugacy_check(
    market: FiniteMarket,
    P,
    U: UtilityFunction,
    K_points: Sequence[Tuple[float, Sequence[float]]],
    L_points: Sequence[Tuple[float, Sequence[float]]],
    f: Optional[EndowmentBundle] = None,
    polytope: Optional[MartingaleMeasurePolytope] = None,
) -> ConjugacyReport:
    """Residuals of both conjugacy identities on sample grids in K and L.

    For each ``(x, q)`` the infimum of ``v(y, r) + x y + <q, r>`` is found
    by a quasi-Newton search over ``(y, r)`` using the dual multipliers as
    the exact gradient; symmetrically for each ``(y, r)`` the supremum of
    ``u(x, q) - x y - <q, r>`` uses the primal supergradients.  Pairwise
    weak duality over the full grid product is checked as well.
    """
    f = _bundle(market, f)
    polytope = polytope or martingale_measures(market)
    V = U.conjugate()
    price_set = arbitrage_free_price_set(market, f, polytope) if f.N else None
    N = f.N
    rows: List[Dict] = []

    # v(y, 0) < inf is automatic for finite V on a finite space; surfaced for the record
    v_finite = bool(np.isfinite(solve_dual(market, P, V, 1.0, _center_price(price_set), f,
                                           polytope, price_set).value))

    def dual_at(p):
        return solve_dual(market, P, V, p[0], p[1:], f, polytope, price_set)

    def primal_at(z):
        return solve_primal(market, P, U, z[0], z[1:], f, polytope)

    primal_res, link_res = 0.0, 0.0
    u_vals = []
    for x, q in K_points:
        q = _vec(q, N)
        sol = primal_at(np.concatenate([[x], q]))
        u_vals.append((x, q, sol.value))
        z = np.concatenate([[x], q])

        def obj(p):
            try:
                d = dual_at(p)
            except InfeasibleStart:
                return 1e30, np.zeros_like(p)
            grad = z - np.concatenate([[d.x], d.q])
            return d.value + float(z @ p), grad

        p0 = np.concatenate([[sol.y], sol.r])
        res = minimize(obj, p0, jac=True, method="BFGS", options={"gtol": 1e-11})
        inf_val = min(res.fun, obj(p0)[0])
        d0 = dual_at(p0)
        link_res = max(link_res, first_order_link_check(sol, d0, U))
        primal_res = max(primal_res, abs(sol.value - inf_val))
        rows.append({"kind": "K", "point": z.tolist(), "value": sol.value, "conjugate": inf_val})

    dual_res = 0.0
    v_vals = []
    for y, r in L_points:
        r = _vec(r, N)
        d = dual_at(np.concatenate([[y], r]))
        v_vals.append((y, r, d.value))
        p = np.concatenate([[y], r])

        def obj(z):
            if cone_K_margin(market, f, z[0], z[1:], polytope) <= INTERIOR_MARGIN:
                return 1e30, np.zeros_like(z)
            s = primal_at(z)
            grad = np.concatenate([[s.y], s.r]) - p
            return -(s.value - float(z @ p)), -grad

        z0 = np.concatenate([[d.x], d.q])
        res = minimize(obj, z0, jac=True, method="BFGS", options={"gtol": 1e-11})
        sup_val = max(-res.fun, -obj(z0)[0])
        dual_res = max(dual_res, abs(d.value - sup_val))
        rows.append({"kind": "L", "point": p.tolist(), "value": d.value, "conjugate": sup_val})

    weak = 0.0
    for x, q, u in u_vals:
        for y, r, v in v_vals:
            weak = max(weak, u - (v + x * y + float(q @ r)))
    return ConjugacyReport(primal_res, dual_res, weak, link_res, rows, v_finite)


def _center_price(price_set: Optional[PriceSet]) -> np.ndarray:
    return np.zeros(0) if price_set is None else price_set.center
