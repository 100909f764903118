"""Stability experiments under joint perturbation of measure and utility.

A :class:`PerturbationFamily` produces, for every index ``n``, a density
``Z_n = dP_n/dP``, a normalized utility ``U_n`` and evaluation points
``(x_n, q_n)``, ``(y_n, r_n)``.  :func:`run_stability_experiment` solves
primal and dual problems along the family and reports the deviations
from the limit problem.
"""

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .convex import NoPowerBound, PowerBound, power_growth_bound, uniform_rae
from .errors import EmptySet, NotApplicable, SolverError
from .market import (
    EndowmentBundle,
    FiniteMarket,
    MartingaleMeasurePolytope,
    PriceSet,
    ProbabilityMeasure,
    arbitrage_free_price_set,
    martingale_constraints,
    martingale_measures,
    one_period_market,
)
from .optimizer import (
    NEWTON_TOL,
    MarginalPriceSet,
    _slice_start,
    marginal_price_set,
    solve_dual,
    solve_primal,
    superdifferential_u,
)
from .utility import UtilityFunction, normalize

VALUE_TOL = 1e-4
KYFAN_TOL = 1e-4
EPS_LADDER = (1e-1, 1e-2, 1e-3)
LIMIT = math.inf


# -- metrics -------------------------------------------------------------------


def kyfan_distance(xi, eta, P) -> float:
    """``E_P[min(|xi - eta|, 1)]``."""
    w = np.asarray(getattr(P, "weights", P), dtype=float)
    d = np.abs(np.asarray(xi, dtype=float) - np.asarray(eta, dtype=float))
    return float(w @ np.minimum(d, 1.0))


def _points(S) -> np.ndarray:
    pts = S.points if isinstance(S, MarginalPriceSet) else np.asarray(S, dtype=float)
    pts = np.atleast_2d(pts)
    if pts.shape[0] == 0:
        raise EmptySet("set has no points")
    return pts


def one_sided_hausdorff(A, B) -> float:
    """``sup_{a in A} dist(a, conv B)``.

    Distance to a convex set is convex, so the supremum over ``conv A`` is
    attained at one of the listed points of ``A``.
    """
    A, B = _points(A), _points(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError("sets live in different dimensions")
    if A.shape[1] == 0:
        return 0.0
    if B.shape[0] == 1:
        return float(np.max(np.linalg.norm(A - B[0], axis=1)))
    if B.shape[1] == 1:
        lo, hi = B.min(), B.max()
        return float(np.max(np.maximum(np.maximum(lo - A[:, 0], A[:, 0] - hi), 0.0)))
    hull = PriceSet(B)
    return float(max(hull.distance(a) for a in A))


def first_index_below(indices: Sequence[int], values: Sequence[float], eps: float) -> Optional[int]:
    """Smallest tested ``n0`` with ``values[n] < eps`` for every tested ``n >= n0``."""
    n0 = None
    for n, v in zip(reversed(list(indices)), reversed(list(values))):
        if v < eps:
            n0 = n
        else:
            break
    return n0


# -- families ------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationFamily:
    """Deterministic sequence ``n -> (Z_n, U_n, (x_n, q_n), (y_n, r_n))``.

    Every generator is also evaluated at ``n = inf`` to obtain the limit.
    """

    density: Callable[[float], np.ndarray]
    utility: Callable[[float], UtilityFunction]
    primal_point: Callable[[float], Tuple[float, np.ndarray]]
    dual_point: Callable[[float], Tuple[float, np.ndarray]]
    name: str = "family"
    params: Dict = field(default_factory=dict)

    def measure(self, P: ProbabilityMeasure, n: float) -> ProbabilityMeasure:
        Z = self.density(n)
        if np.any(Z <= 0):
            raise ValueError(f"density at n={n} is not strictly positive")
        return ProbabilityMeasure.from_density(P, Z)

    def validate(self, P: ProbabilityMeasure, indices: Sequence[int]) -> None:
        for n in list(indices) + [LIMIT]:
            Z = self.density(n)
            if np.any(Z <= 0):
                raise ValueError(f"density at n={n} is not strictly positive")
            if abs(float(P.weights @ Z) - 1.0) > 1e-12:
                raise ValueError(f"density at n={n} does not integrate to one")


def constant_family(U: UtilityFunction, x: float, q, y: float, r, n_atoms: int) -> PerturbationFamily:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return PerturbationFamily(
        density=lambda n: np.ones(n_atoms),
        utility=lambda n: U,
        primal_point=lambda n: (x, q),
        dual_point=lambda n: (y, r),
        name="constant",
    )


def _decay(n: float, power: float = 1.0) -> float:
    return 0.0 if math.isinf(n) else 1.0 / n**power


def drift_family(
    P: ProbabilityMeasure,
    zeta,
    alpha: float,
    alpha_bar: float,
    x: float,
    q,
    y: float,
    r,
    point_drift: float = 0.0,
    point_power: float = 2.0,
) -> PerturbationFamily:
    """``Z_n = 1 + zeta / n``, ``U_n`` normalized power with ``alpha_n = alpha + (alpha_bar - alpha) / n``.

    ``zeta`` is centred under ``P`` and must satisfy ``zeta > -1`` so that
    every density is positive.  Evaluation points drift towards their limits
    at rate ``n ** -point_power``.
    """
    zeta = np.asarray(zeta, dtype=float)
    zeta = zeta - float(P.weights @ zeta)
    if np.any(zeta <= -1):
        raise ValueError("zeta must exceed -1 atomwise")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))

    def util(n):
        a = alpha + (alpha_bar - alpha) * _decay(n)
        return normalize(UtilityFunction.power(a))

    return PerturbationFamily(
        density=lambda n: 1.0 + zeta * _decay(n),
        utility=util,
        primal_point=lambda n: (x * (1 + point_drift * _decay(n, point_power)), q),
        dual_point=lambda n: (y * (1 + point_drift * _decay(n, point_power)), r * (1 + point_drift * _decay(n, point_power))),
        name="drift",
        params={"zeta": zeta.tolist(), "alpha": alpha, "alpha_bar": alpha_bar},
    )


# -- the experiment --------------------------------------------------------------

CSV_COLUMNS = ("n", "u_n", "v_n", "du_dx", "dv_dy", "kyfan_X", "kyfan_Y", "hausdorff_P", "tv_distance")


def default_indices(n_max: int) -> List[int]:
    """1-2-5 sequence up to and including ``n_max``."""
    out, base = [], 1
    while base <= n_max:
        out.extend(k * base for k in (1, 2, 5) if k * base <= n_max)
        base *= 10
    if out[-1] != n_max:
        out.append(n_max)
    return out


@dataclass
class ConvergenceReport:
    """Per-index records plus clause-by-clause verdicts."""

    records: List[Dict]
    limit: Dict
    verdicts: Dict[str, bool]
    details: Dict

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def column(self, name: str) -> np.ndarray:
        return np.array([rec[name] for rec in self.records], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for rec in self.records:
            buf.write(",".join(f"{rec[c]:.12g}" if c != "n" else str(rec[c]) for c in CSV_COLUMNS) + "\n")
        return buf.getvalue()

    def summary(self) -> Dict:
        return {"verdicts": self.verdicts, "passed": self.passed, "limit": self.limit, "details": self.details}


def _solve_index(market, f, P, family, n, polytope, price_set, tol):
    Pn = family.measure(P, n)
    Un = family.utility(n)
    x, q = family.primal_point(n)
    y, r = family.dual_point(n)
    try:
        primal = solve_primal(market, Pn, Un, x, q, f, polytope, tol=tol)
        dual = solve_dual(market, Pn, Un.conjugate(), y, r, f, polytope, price_set, tol=tol)
    except SolverError as exc:
        raise type(exc)(f"n={n}: {exc}") from exc
    sd = superdifferential_u(market, Pn, Un, x, q, f, polytope, trace_face=False, primal=primal)
    return Pn, Un, primal, dual, marginal_price_set(sd)


def run_stability_experiment(
    market: FiniteMarket,
    f: Optional[EndowmentBundle],
    family: PerturbationFamily,
    n_max: int = 1000,
    indices: Optional[Sequence[int]] = None,
    value_tol: float = VALUE_TOL,
    kyfan_tol: float = KYFAN_TOL,
    eps_ladder: Sequence[float] = EPS_LADDER,
    tol: float = NEWTON_TOL,
) -> ConvergenceReport:
    """Solve along the family and test every limiting relationship.

    Verdicts
    --------
    values : value and derivative deviations at ``n_max`` below ``value_tol``.
    kyfan : Ky-Fan distances of both optimizers at ``n_max`` below ``kyfan_tol``.
    hausdorff : one-sided Hausdorff distance eventually below every rung.
    liminf / limsup : semicontinuity of ``v_n`` at the fixed limit point,
        checked on the tail window ``n >= n_max / 2``.
    tv : total variation reaches its tail values monotonically.
    """
    f = f if f is not None else EndowmentBundle.empty(market.n_atoms)
    P = market.P
    indices = list(indices) if indices is not None else default_indices(n_max)
    family.validate(P, indices)
    polytope = martingale_measures(market)
    price_set = arbitrage_free_price_set(market, f, polytope) if f.N else None

    _, U, p_lim, d_lim, mps_lim = _solve_index(market, f, P, family, LIMIT, polytope, price_set, tol)
    y_lim, r_lim = family.dual_point(LIMIT)
    V = U.conjugate()
    limit = {
        "u": p_lim.value,
        "v": d_lim.value,
        "du_dx": p_lim.y,
        "dv_dy": d_lim.dv_dy,
        "prices": mps_lim.points.tolist(),
    }

    records, fixed_v = [], []
    for n in indices:
        Pn, Un, p, d, mps = _solve_index(market, f, P, family, n, polytope, price_set, tol)
        records.append({
            "n": n,
            "u_n": p.value,
            "v_n": d.value,
            "du_dx": p.y,
            "dv_dy": d.dv_dy,
            "kyfan_X": kyfan_distance(p.wealth, p_lim.wealth, P),
            "kyfan_Y": kyfan_distance(d.density, d_lim.density, P),
            "hausdorff_P": one_sided_hausdorff(mps, mps_lim),
            "tv_distance": Pn.tv_distance(P),
        })
        fixed_v.append(solve_dual(market, Pn, Un.conjugate(), y_lim, r_lim, f, polytope, price_set, tol=tol).value)

    last = records[-1]
    dev = {
        "u": abs(last["u_n"] - limit["u"]),
        "v": abs(last["v_n"] - limit["v"]),
        "du_dx": abs(last["du_dx"] - limit["du_dx"]),
        "dv_dy": abs(last["dv_dy"] - limit["dv_dy"]),
        "kyfan_X": last["kyfan_X"],
        "kyfan_Y": last["kyfan_Y"],
    }
    haus = [rec["hausdorff_P"] for rec in records]
    n_eps = {eps: first_index_below(indices, haus, eps) for eps in eps_ladder}
    tail = [k for k, n in enumerate(indices) if n >= n_max / 2]
    lower = min(fixed_v[k] for k in tail) - d_lim.value
    upper = max(fixed_v[k] for k in tail) - d_lim.value
    tv = [rec["tv_distance"] for rec in records]
    tv_index = _monotone_from(indices, tv)

    verdicts = {
        "values": max(dev["u"], dev["v"], dev["du_dx"], dev["dv_dy"]) < value_tol,
        "kyfan": max(dev["kyfan_X"], dev["kyfan_Y"]) < kyfan_tol,
        "hausdorff": all(v is not None and v <= n_max for v in n_eps.values()),
        "liminf": lower >= -value_tol,
        "limsup": upper <= value_tol,
        "tv": tv_index is not None,
    }
    details = {
        "deviations": dev,
        "n_eps": {f"{k:g}": v for k, v in n_eps.items()},
        "liminf_gap": lower,
        "limsup_gap": upper,
        "tv_monotone_from": tv_index,
        "ui": "automatic on a fixed finite space",
        "indices": indices,
    }
    return ConvergenceReport(records, limit, verdicts, details)


def _monotone_from(indices, values) -> Optional[int]:
    """First index beyond which ``values`` are non-increasing."""
    k = len(values) - 1
    while k > 0 and values[k - 1] >= values[k] - 1e-15:
        k -= 1
    return indices[k] if values else None


# -- uniform integrability diagnostics -------------------------------------------


def selection_measure(market: FiniteMarket, f: EndowmentBundle, p=None) -> np.ndarray:
    """Analytic centre of the martingale measures pricing ``f`` at ``p``."""
    A, b = martingale_constraints(market)
    if f.N:
        A = np.vstack([A, f.payoffs])
        b = np.concatenate([b, np.atleast_1d(np.asarray(p, dtype=float))])
    return _slice_start(A, b)


@dataclass
class HolderCheck:
    alpha: float
    p_hat: float
    q_hat: float
    q_hat_min: float
    gamma: float
    density_moment: float  # sup_n E[Z_n^p_hat]
    inverse_moment: float  # E[(dQ/dP)^-q_hat]
    bound: PowerBound
    max_ratio: float  # max over (n, y) of lhs / rhs, must be <= 1

    @property
    def exponents_ok(self) -> bool:
        return 1.0 < self.gamma < self.p_hat and self.p_hat > 1.0 / (1.0 - self.alpha)

    @property
    def passed(self) -> bool:
        finite = np.isfinite(self.density_moment) and np.isfinite(self.inverse_moment)
        return bool(self.exponents_ok and finite and self.max_ratio <= 1.0 + 1e-12)


@dataclass
class UIReport:
    finite_space: bool
    xi_max: float
    bounded_above: bool
    upper_bound: float
    holder: Optional[HolderCheck]
    holder_note: str
    rae_delta: Optional[float]
    rae_x0: Optional[float]
    rae_holds: bool

    def summary(self) -> Dict:
        h = self.holder
        return {
            "finite_space_ui": self.finite_space,
            "xi_max": self.xi_max,
            "item3_bounded_above": self.bounded_above,
            "upper_bound": self.upper_bound,
            "item4": None if h is None else {
                "alpha": h.alpha, "p_hat": h.p_hat, "q_hat": h.q_hat, "q_hat_min": h.q_hat_min,
                "gamma": h.gamma, "density_moment": h.density_moment,
                "inverse_moment": h.inverse_moment, "max_ratio": h.max_ratio, "passed": h.passed,
            },
            "item4_note": self.holder_note,
            "item5_rae_delta": self.rae_delta,
            "item5_rae_x0": self.rae_x0,
            "item5_rae": self.rae_holds,
        }


def holder_exponents(alpha: float, p_hat: Optional[float] = None, q_factor: float = 2.0):
    """``(p_hat, q_hat, q_hat_min, gamma)`` for the Holder estimate.

    ``q_hat_min = p_hat alpha / (p_hat (1 - alpha) - 1)`` makes the
    exponent ``gamma = q p (1 - alpha) / (q + p alpha)`` equal to one, so a
    larger ``q_hat = q_factor * q_hat_min`` is used; ``gamma`` then lies
    strictly between 1 and ``p_hat (1 - alpha)``.
    """
    p = 2.0 / (1.0 - alpha) if p_hat is None else float(p_hat)
    if not p > 1.0 / (1.0 - alpha):
        raise ValueError("p_hat must exceed 1 / (1 - alpha)")
    q_min = p * alpha / (p * (1 - alpha) - 1)
    q = q_factor * q_min
    gamma = q * p * (1 - alpha) / (q + p * alpha)
    return p, q, q_min, gamma


def _holder_check(P, Q, densities, utilities, y_grid, alpha=None) -> HolderCheck:
    bound = power_growth_bound(utilities, alpha=alpha)
    a = bound.alpha
    p, q, q_min, gamma = holder_exponents(a)
    w = P.weights
    dQ = Q / w
    mom_p = max(float(w @ Z**p) for Z in densities)
    mom_q = float(w @ dQ ** (-q))
    C, D = bound.C, max(bound.D, 0.0)
    s = gamma / (p * (1 - a))
    ratio = 0.0
    for Z, U in zip(densities, utilities):
        V = U.conjugate()
        for y in y_grid:
            lhs = float(w @ (Z * V.positive_part(y * dQ / Z)) ** gamma)
            rhs = (2 ** (gamma - 1) * C**gamma * y ** (-a * gamma / (1 - a))
                   * (w @ Z**p) ** s * mom_q ** (1 - s)
                   + 2 ** (gamma - 1) * D**gamma * float(w @ Z**gamma))
            if rhs > 0:
                ratio = max(ratio, lhs / rhs)
            elif lhs > 0:
                ratio = np.inf
    return HolderCheck(a, p, q, q_min, gamma, mom_p, mom_q, bound, ratio)


def ui_condition_report(
    market: FiniteMarket,
    f: Optional[EndowmentBundle],
    family: PerturbationFamily,
    p=None,
    indices: Optional[Sequence[int]] = None,
    y_grid=None,
    rae_starts=(math.e, math.e**2, 10.0, 100.0),
) -> UIReport:
    """Diagnose the uniform-integrability hypothesis along ``family``.

    Reports the trivial finite-space verdict, then the three structural
    sufficient conditions: uniform upper bound, power growth with density
    moments (Holder chain verified numerically), and uniform reasonable
    asymptotic elasticity.
    """
    f = f if f is not None else EndowmentBundle.empty(market.n_atoms)
    P = market.P
    indices = list(indices) if indices is not None else default_indices(1000)
    y_grid = np.geomspace(1e-2, 1e2, 25) if y_grid is None else np.asarray(y_grid, dtype=float)
    if f.N and p is None:
        p = arbitrage_free_price_set(market, f).center
    Q = selection_measure(market, f, p)
    dQ = Q / P.weights
    densities = [family.density(n) for n in indices]
    utilities = [family.utility(n) for n in indices]

    xi_max = 0.0
    for Z, U in zip(densities, utilities):
        V = U.conjugate()
        for y in y_grid:
            xi_max = max(xi_max, float(np.max(Z * V.positive_part(y * dQ / Z))))

    sups = [U.sup_value() for U in utilities]
    bounded = bool(np.all(np.isfinite(sups)))

    holder, note = None, ""
    try:
        holder = _holder_check(P, Q, densities, utilities, y_grid)
    except NoPowerBound as exc:
        note = f"no power bound: {exc}"

    delta, x0, rae = None, None, False
    for start in rae_starts:
        try:
            verdict = uniform_rae(utilities, start)
        except NotApplicable:
            continue
        delta, x0, rae = verdict.delta, start, verdict.holds
        if rae:
            break
    return UIReport(True, xi_max, bounded, float(max(sups)), holder, note, delta, x0, rae)


# -- the C_m mechanism -------------------------------------------------------------


def in_C_m(a, b, m: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    inside = (a >= 1 / m) & (a <= m) & (b >= 1 / m) & (b <= m)
    return inside & (np.abs(a - b) > 1 / m)


def beta_m(V: Callable, m: int, points: int = 400) -> float:
    """``inf over C_m`` of the midpoint gap ``(V(a) + V(b))/2 - V((a+b)/2)``.

    The gap is symmetric, so ``b = a + d`` with ``d >= 1/m`` is searched on
    a grid in ``(a, d)`` including the edge ``d = 1/m`` and the sides
    ``a = 1/m`` and ``b = m`` of the square.
    """
    lo, hi = 1.0 / m, float(m)
    if hi - lo <= 1.0 / m:
        return np.inf  # C_m is empty
    a = np.geomspace(lo, hi, points)
    d = np.concatenate([[1.0 / m], np.geomspace(1.0 / m, hi - lo, points)[1:]])
    A, Dd = np.meshgrid(a, d, indexing="ij")
    B = A + Dd
    ok = B <= hi
    if not np.any(ok):
        return np.inf
    # the edges b = m and a = 1/m are where the gap typically bottoms out
    A = np.concatenate([A[ok], hi - d, np.full(d.size, lo)])
    B = np.concatenate([B[ok], np.full(d.size, hi), lo + d])
    keep = (A >= lo) & (B <= hi)
    A, B = A[keep], B[keep]
    gap = 0.5 * (V(A) + V(B)) - V(0.5 * (A + B))
    return float(np.min(gap))


@dataclass
class CmCurve:
    m_values: List[int]
    indices: List[int]
    probability: np.ndarray  # shape (len(m_values), len(indices))
    beta: List[float]


def cm_diagnostic(
    market: FiniteMarket,
    f: Optional[EndowmentBundle],
    family: PerturbationFamily,
    m_max: int = 10,
    indices: Optional[Sequence[int]] = None,
) -> CmCurve:
    """``P_n[(Y_n, f_n / Z_n) in C_m]`` along the family, for ``m <= m_max``.

    ``Y_n`` is the dual optimizer under ``(P_n, V_n)`` at the family's dual
    point, and ``f_n = n^-1 y dQ/dP + (1 - n^-1) Y_inf`` mixes the limit
    optimizer with the analytic-centre pricing density.
    """
    f = f if f is not None else EndowmentBundle.empty(market.n_atoms)
    P = market.P
    indices = list(indices) if indices is not None else default_indices(1000)
    polytope = martingale_measures(market)
    price_set = arbitrage_free_price_set(market, f, polytope) if f.N else None
    y, r = family.dual_point(LIMIT)
    U = family.utility(LIMIT)
    g = solve_dual(market, P, U.conjugate(), y, r, f, polytope, price_set).density
    Q = selection_measure(market, f, r / y if f.N else None)
    fdens = y * Q / P.weights
    ms = list(range(1, m_max + 1))
    prob = np.zeros((len(ms), len(indices)))
    for j, n in enumerate(indices):
        Pn = family.measure(P, n)
        yn, rn = family.dual_point(n)
        Yn = solve_dual(market, Pn, family.utility(n).conjugate(), yn, rn, f, polytope, price_set).density
        Z = family.density(n)
        fn = fdens / n + (1 - 1 / n) * g
        for i, m in enumerate(ms):
            prob[i, j] = float(Pn.weights @ in_C_m(Yn, fn / Z, m))
    beta = [beta_m(U.conjugate(), m) for m in ms]
    return CmCurve(ms, indices, prob, beta)


# -- instability example -----------------------------------------------------------


def lattice_market(m: int) -> Tuple[FiniteMarket, np.ndarray]:
    """Statically completed ``m``-step recombining lattice for ``dS = S dW``.

    Terminal atoms ``j = 0..m`` carry binomial weights, ``W_1 = (2j - m)/sqrt(m)``
    and ``S_1 = (1 + 1/sqrt(m))^j (1 - 1/sqrt(m))^(m - j)``.  Besides the stock,
    calls struck at the interior terminal prices are traded at their
    expectations, which makes the one-period market complete with ``P`` as
    its unique martingale measure.  Returns the market and ``W_1``.
    """
    if m < 2:
        raise ValueError("lattice needs at least two steps")
    j = np.arange(m + 1)
    prob = np.array([math.comb(m, k) for k in j], dtype=float) / 2.0**m
    s = 1.0 / math.sqrt(m)
    S = (1 + s) ** j * (1 - s) ** (m - j)
    payoffs = [S] + [np.maximum(S - K, 0.0) for K in S[1:-1]]
    prices = [float(prob @ h) for h in payoffs]
    names = ["S"] + [f"C{k}" for k in range(1, m)]
    market = one_period_market(prices, np.column_stack(payoffs), prob, asset_names=names)
    return market, (2 * j - m) * s


@dataclass(frozen=True)
class SpikeDensity:
    """``phi_n(w)`` proportional to ``1 + h_n psi((w - a_n) / width)``.

    ``a_n = sqrt(n)`` and ``h_n = eps_scale / (n * mass_n)``, where ``mass_n``
    is the standard Gaussian mass of the bump, so that the bump carries
    Gaussian mass ``eps_scale / n``.  Normalization happens on each lattice.
    """

    eps_scale: float = 0.2
    width: float = 0.5
    profile: str = "indicator"
    amplitude: float = 1.0  # 0 switches the perturbation off

    def bump(self, w, n: int) -> np.ndarray:
        t = (np.asarray(w, dtype=float) - math.sqrt(n)) / self.width
        if self.profile == "indicator":
            return (np.abs(t) <= 0.5).astype(float)
        if self.profile == "gaussian":
            return np.exp(-0.5 * (4 * t) ** 2)
        raise ValueError(f"unknown spike profile {self.profile!r}")

    def gaussian_mass(self, n: int) -> float:
        from scipy.integrate import quad
        from scipy.stats import norm

        c, h = math.sqrt(n), self.width
        val, _ = quad(lambda w: self.bump(w, n) * norm.pdf(w), c - h, c + h, points=[c - h / 2, c + h / 2])
        return val

    def __call__(self, w, n: int, P) -> np.ndarray:
        if self.amplitude == 0:
            return np.ones_like(np.asarray(w, dtype=float))
        h = self.amplitude * self.eps_scale / (n * self.gaussian_mass(n))
        phi = 1.0 + h * self.bump(w, n)
        return phi / float(np.asarray(P) @ phi)


@dataclass
class CounterexampleReport:
    rows: List[Dict]  # m, n, tv, kyfan, modulus
    mode: str

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("m,n,tv,kyfan,modulus\n")
        for r in self.rows:
            buf.write(f"{r['m']},{r['n']},{r['tv']:.12g},{r['kyfan']:.12g},{r['modulus']:.12g}\n")
        return buf.getvalue()


def _lattice_run(m: int, n: int, spike: SpikeDensity, U: UtilityFunction, x: float, cache: Dict) -> Dict:
    if m not in cache:
        market, W = lattice_market(m)
        poly = martingale_measures(market)
        base = solve_primal(market, market.P, U, x, polytope=poly)
        cache[m] = (market, W, poly, base)
    market, W, poly, base = cache[m]
    P = market.P
    Z = spike(W, n, P.weights)
    Pn = ProbabilityMeasure.from_density(P, Z)
    sol = solve_primal(market, Pn, U, x, polytope=poly)
    V = U.conjugate()
    return {
        "m": m,
        "n": n,
        "tv": Pn.tv_distance(P),
        "kyfan": kyfan_distance(sol.wealth, base.wealth, P),
        "modulus": float(P.weights @ (Z * V.positive_part(1.0 / Z))),
    }


def counterexample_experiment(
    levels: Sequence[int] = tuple(range(2, 13)),
    n_of_m: Optional[Callable[[int], int]] = None,
    fixed_m: Optional[int] = None,
    n_values: Sequence[int] = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000),
    spike: SpikeDensity = SpikeDensity(),
    alpha: float = 0.5,
    x: float = 1.0,
) -> CounterexampleReport:
    """Diagonal (``m -> n(m)``) or fixed-level sweep of the instability example.

    The limit model is the martingale ``dS = S dW`` under ``P``, so the
    unperturbed optimal wealth is the constant ``x``.  Densities
    ``phi_n(W_1)`` push mass into a shrinking spike; on a fixed lattice the
    spike eventually leaves the support and the optimizers agree, while along
    the diagonal it always sits on the top atom.
    """
    U = normalize(UtilityFunction.power(alpha))
    cache: Dict = {}
    rows = []
    if fixed_m is not None:
        for n in n_values:
            rows.append(_lattice_run(fixed_m, n, spike, U, x, cache))
        return CounterexampleReport(rows, "fixed")
    n_of_m = n_of_m or (lambda m: m)
    for m in levels:
        rows.append(_lattice_run(m, n_of_m(m), spike, U, x, cache))
    return CounterexampleReport(rows, "diagonal")
