"""Finite scenario-tree markets and their martingale-measure polytopes.

A market is a tree of nodes; each node carries the prices of ``d`` risky
assets (the numeraire is fixed at 1).  Terminal nodes are the atoms of the
probability space.  On such a market the admissible and acceptable wealth
processes coincide, so the dual objects reduce to a polytope of martingale
measures and everything below is exact linear algebra.
"""

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from . import _newton
from .errors import (
    DegenerateBranching,
    DisconnectedTree,
    EmptyBundle,
    MarketSpecError,
    NoMartingaleMeasure,
    NonPositiveProbability,
)

PROB_TOL = 1e-12
VERTEX_TOL = 1e-10
INTERIOR_MARGIN = 1e-9
MAX_BASES = 2_000_000


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProbabilityMeasure:
    """A probability vector over the atoms of a market."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(~np.isfinite(w)) or np.any(w < 0):
            raise NonPositiveProbability("weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > PROB_TOL * max(1, w.size):
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def equivalent(self) -> bool:
        """True when every atom carries positive mass."""
        return bool(np.all(self.weights > 0))

    def density(self, reference: "ProbabilityMeasure") -> np.ndarray:
        """Radon-Nikodym density with respect to ``reference``."""
        return self.weights / reference.weights

    def tv_distance(self, other: "ProbabilityMeasure") -> float:
        return 0.5 * float(np.abs(self.weights - other.weights).sum())

    def expectation(self, x) -> float:
        return float(self.weights @ np.asarray(x, dtype=float))

    @classmethod
    def from_density(cls, reference: "ProbabilityMeasure", z) -> "ProbabilityMeasure":
        w = reference.weights * np.asarray(z, dtype=float)
        return cls(w / w.sum())


class FiniteMarket:
    """Validated, immutable scenario tree.

    Parameters
    ----------
    parents : sequence of int
        Parent index of every node, ``-1`` for the root (node 0).
    prices : array (n_nodes, d)
        Risky-asset prices at each node, numeraire excluded.
    probabilities : array (n_atoms,)
        Reference probabilities of the terminal nodes in depth-first order.
    labels : optional node names
    """

    def __init__(self, parents, prices, probabilities, labels=None, asset_names=None):
        parents = [int(p) for p in parents]
        n = len(parents)
        if n < 2:
            raise DegenerateBranching("a market needs at least one period")
        prices = np.asarray(prices, dtype=float)
        if prices.ndim == 1:
            prices = prices[:, None]
        if prices.shape[0] != n:
            raise MarketSpecError("one price vector per node is required")
        if not np.all(np.isfinite(prices)):
            raise MarketSpecError("prices must be finite")

        if parents[0] != -1 or any(p == -1 for p in parents[1:]):
            raise DisconnectedTree("node 0 must be the unique root")
        children: List[List[int]] = [[] for _ in range(n)]
        for i, p in enumerate(parents[1:], start=1):
            if not 0 <= p < n or p == i:
                raise DisconnectedTree(f"node {i} has invalid parent {p}")
            children[p].append(i)

        depth = [-1] * n
        depth[0] = 0
        order = []
        stack = [0]
        while stack:
            v = stack.pop()
            order.append(v)
            for c in reversed(children[v]):
                if depth[c] != -1:
                    raise DisconnectedTree("cycle in tree")
                depth[c] = depth[v] + 1
                stack.append(c)
        if len(order) != n:
            raise DisconnectedTree("some nodes are not reachable from the root")

        for v in range(n):
            if 0 < len(children[v]) < 2:
                raise DegenerateBranching(f"node {v} has a single child")
        leaves = [v for v in order if not children[v]]
        horizon = depth[leaves[0]]
        if any(depth[v] != horizon for v in leaves):
            raise MarketSpecError("all terminal nodes must sit at the same depth")

        probs = np.asarray(probabilities, dtype=float)
        if probs.shape != (len(leaves),):
            raise MarketSpecError(
                f"{len(leaves)} terminal nodes but {probs.size} atom probabilities"
            )
        if np.any(~np.isfinite(probs)) or np.any(probs <= 0):
            raise NonPositiveProbability("atom probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > PROB_TOL * max(1, probs.size):
            raise NonPositiveProbability(f"atom probabilities sum to {probs.sum()!r}")

        self.parents = tuple(parents)
        self.children = tuple(tuple(c) for c in children)
        self.depth = tuple(depth)
        self.prices = _frozen(prices)
        self.leaves = tuple(leaves)
        self.horizon = horizon
        self.labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
        self.asset_names = (
            tuple(asset_names)
            if asset_names is not None
            else tuple(f"S{j + 1}" for j in range(prices.shape[1]))
        )
        self.P = ProbabilityMeasure(probs)
        self.internal = tuple(v for v in order if children[v])
        self._build_gains()

    # -- derived structure -------------------------------------------------

    def _build_gains(self):
        m, d = self.n_atoms, self.n_assets
        G = np.zeros((m, len(self.internal) * d))
        col = {v: k for k, v in enumerate(self.internal)}
        for i, leaf in enumerate(self.leaves):
            child = leaf
            node = self.parents[leaf]
            while node != -1:
                k = col[node]
                G[i, k * d:(k + 1) * d] = self.prices[child] - self.prices[node]
                child, node = node, self.parents[node]
        self.gains = _frozen(G)

    @property
    def n_atoms(self) -> int:
        return len(self.leaves)

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]

    @property
    def n_nodes(self) -> int:
        return len(self.parents)

    def terminal_prices(self, asset: int = 0) -> np.ndarray:
        return self.prices[list(self.leaves), asset]

    def path(self, atom: int) -> List[int]:
        v, out = self.leaves[atom], []
        while v != -1:
            out.append(v)
            v = self.parents[v]
        return out[::-1]

    def wealth(self, x: float, strategy) -> np.ndarray:
        """Terminal wealth ``x + (H . S)_T`` for a strategy (internal nodes x assets)."""
        H = np.asarray(strategy, dtype=float).reshape(-1)
        return x + self.gains @ H

    def __repr__(self):
        return (
            f"FiniteMarket(atoms={self.n_atoms}, assets={self.n_assets}, "
            f"horizon={self.horizon})"
        )


@dataclass(frozen=True)
class EndowmentBundle:
    """Non-traded terminal payoffs ``f^1..f^N`` as an (N, n_atoms) array."""

    payoffs: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        f = np.asarray(self.payoffs, dtype=float)
        if f.ndim == 1:
            f = f[None, :]
        if f.ndim != 2:
            raise ValueError("payoffs must be a 2-d array (N, atoms)")
        if not np.all(np.isfinite(f)):
            raise ValueError("payoffs must be finite")
        object.__setattr__(self, "payoffs", _frozen(f))
        names = tuple(self.names) or tuple(f"f{j + 1}" for j in range(f.shape[0]))
        object.__setattr__(self, "names", names)

    @property
    def N(self) -> int:
        return self.payoffs.shape[0]

    @classmethod
    def empty(cls, n_atoms: int) -> "EndowmentBundle":
        return cls(np.zeros((0, n_atoms)))

    def position(self, q) -> np.ndarray:
        """Atomwise value of the position ``<q, f>``."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if self.N == 0:
            return np.zeros(self.payoffs.shape[1])
        return q @ self.payoffs


def call_payoff(market: FiniteMarket, strike: float, asset: int = 0) -> np.ndarray:
    return np.maximum(market.terminal_prices(asset) - strike, 0.0)


def put_payoff(market: FiniteMarket, strike: float, asset: int = 0) -> np.ndarray:
    return np.maximum(strike - market.terminal_prices(asset), 0.0)


# -- builders ----------------------------------------------------------------


def multinomial_market(s0, factors, probabilities, steps: int = 1) -> FiniteMarket:
    """Recombination-free multinomial tree for one asset.

    Every node branches into ``len(factors)`` children with price
    ``S * factor`` and conditional probability ``probabilities[k]``.
    Atoms are ordered lexicographically by path.
    """
    factors = [float(u) for u in factors]
    probs = [float(p) for p in probabilities]
    if len(factors) != len(probs):
        raise MarketSpecError("factors and probabilities differ in length")
    if steps < 1:
        raise MarketSpecError("steps must be >= 1")
    parents, prices, atom_p = [-1], [float(s0)], []
    frontier = [(0, 1.0)]
    for t in range(steps):
        nxt = []
        for node, mass in frontier:
            for u, p in zip(factors, probs):
                parents.append(node)
                prices.append(prices[node] * u)
                nxt.append((len(parents) - 1, mass * p))
        frontier = nxt
    # depth-first leaf order matches lexicographic path order for this layout
    atom_p = [mass for _, mass in frontier]
    return FiniteMarket(parents, np.array(prices)[:, None], atom_p)


def binomial_market(s0=1.0, up=2.0, down=0.5, p_up=0.5, steps=1) -> FiniteMarket:
    return multinomial_market(s0, [up, down], [p_up, 1 - p_up], steps)


def trinomial_market(s0=1.0, factors=(0.5, 1.0, 2.0), probabilities=(1 / 3, 1 / 3, 1 / 3), steps=1):
    return multinomial_market(s0, factors, probabilities, steps)


def one_period_market(initial_prices, terminal_payoffs, probabilities, asset_names=None) -> FiniteMarket:
    """One-period market from an (atoms, d) matrix of terminal asset values."""
    X = np.asarray(terminal_payoffs, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    s0 = np.atleast_1d(np.asarray(initial_prices, dtype=float))
    prices = np.vstack([s0[None, :], X])
    parents = [-1] + [0] * X.shape[0]
    return FiniteMarket(parents, prices, probabilities, asset_names=asset_names)


def build_market(spec: Dict) -> FiniteMarket:
    """Build a market from a tree description.

    Two forms are accepted::

        {"kind": "multinomial", "s0": 1, "factors": [2, 0.5],
         "probabilities": [0.5, 0.5], "steps": 1}

        {"tree": [{"id": "0", "parent": null}, {"id": "u", "parent": "0"}, ...],
         "prices": {"0": [1.0], "u": [2.0], ...},
         "atoms": [{"node": "u", "probability": 0.5}, ...]}

    In the explicit form ``atoms`` may also be a bare list of probabilities
    in depth-first terminal order.
    """
    kind = spec.get("kind", "explicit")
    if kind in ("multinomial", "binomial", "trinomial"):
        try:
            return multinomial_market(
                spec["s0"], spec["factors"], spec["probabilities"], int(spec.get("steps", 1))
            )
        except KeyError as exc:
            raise MarketSpecError(f"missing field {exc}") from None
    if kind == "one_period":
        return one_period_market(spec["initial_prices"], spec["terminal_values"], spec["probabilities"])
    if kind != "explicit":
        raise MarketSpecError(f"unknown tree kind {kind!r}")

    nodes = spec.get("nodes", spec.get("tree"))
    if nodes is None:
        raise MarketSpecError("explicit market needs a 'tree' (or 'nodes') list")
    ids = [str(n["id"]) for n in nodes]
    if len(set(ids)) != len(ids):
        raise MarketSpecError("duplicate node ids")
    index = {k: i for i, k in enumerate(ids)}
    roots = [i for i, n in enumerate(nodes) if n.get("parent") is None]
    if len(roots) != 1:
        raise DisconnectedTree(f"expected exactly one root, found {len(roots)}")
    # reorder so the root is node 0
    perm = roots + [i for i in range(len(nodes)) if i != roots[0]]
    new = {old: k for k, old in enumerate(perm)}
    parents = []
    for old in perm:
        p = nodes[old].get("parent")
        if p is None:
            parents.append(-1)
        elif str(p) not in index:
            raise DisconnectedTree(f"unknown parent {p!r}")
        else:
            parents.append(new[index[str(p)]])
    price_map = spec["prices"]
    try:
        prices = [np.atleast_1d(np.asarray(price_map[ids[old]], dtype=float)) for old in perm]
    except KeyError as exc:
        raise MarketSpecError(f"no prices for node {exc}") from None
    if len({p.size for p in prices}) != 1:
        raise MarketSpecError("every node needs the same number of asset prices")
    labels = [ids[old] for old in perm]

    # probabilities are matched to leaves after the tree is validated
    atoms = spec["atoms"]
    probe = FiniteMarket(parents, np.vstack(prices), _placeholder_probs(parents), labels=labels)
    if atoms and isinstance(atoms[0], dict):
        by_node = {str(a["node"]): float(a["probability"]) for a in atoms}
        leaf_labels = [labels[v] for v in probe.leaves]
        if set(by_node) != set(leaf_labels):
            raise MarketSpecError("atoms must list every terminal node exactly once")
        probs = [by_node[k] for k in leaf_labels]
    else:
        probs = [float(a) for a in atoms]
    return FiniteMarket(parents, np.vstack(prices), probs, labels=labels)


def _placeholder_probs(parents) -> np.ndarray:
    n = len(parents)
    has_child = [False] * n
    for p in parents[1:]:
        if 0 <= p < n:
            has_child[p] = True
    k = sum(1 for h in has_child if not h)
    return np.full(k, 1.0 / max(k, 1))


# -- martingale measures -----------------------------------------------------


@dataclass(frozen=True)
class MartingaleMeasurePolytope:
    """``{Q >= 0 : G^T Q = 0, sum Q = 1}`` in H- and V-representation."""

    equalities: np.ndarray  # rows of A in A Q = b
    rhs: np.ndarray
    vertices: np.ndarray  # (K, n_atoms)
    interior_point: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def contains(self, Q, tol: float = 1e-10) -> bool:
        Q = np.asarray(Q, dtype=float)
        return bool(
            np.all(Q >= -tol) and np.max(np.abs(self.equalities @ Q - self.rhs)) <= tol
        )

    def prices(self, f: EndowmentBundle) -> np.ndarray:
        """``E^Q[f]`` at every vertex, shape (K, N)."""
        return self.vertices @ f.payoffs.T

    def to_csv(self) -> str:
        buf = io.StringIO()
        m = self.vertices.shape[1]
        buf.write("vertex," + ",".join(f"q{i}" for i in range(m)) + "\n")
        for k, v in enumerate(self.vertices):
            buf.write(f"{k}," + ",".join(f"{x:.12g}" for x in v) + "\n")
        return buf.getvalue()


def martingale_constraints(market: FiniteMarket) -> Tuple[np.ndarray, np.ndarray]:
    G = market.gains
    A = np.vstack([G.T, np.ones((1, market.n_atoms))])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    return A, b


def _independent_rows(A: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    import scipy.linalg

    if A.shape[0] == 0:
        return A, b
    _, R, piv = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-12 * max(1.0, diag[0]) * max(A.shape)))
    keep = np.sort(piv[:rank])
    return A[keep], b[keep]


def enumerate_vertices(A: np.ndarray, b: np.ndarray, tol: float = VERTEX_TOL) -> np.ndarray:
    """Vertices of ``{x >= 0 : A x = b}`` by exhaustive basis enumeration."""
    A, b = _independent_rows(np.asarray(A, float), np.asarray(b, float))
    r, m = A.shape
    if math.comb(m, r) > MAX_BASES:
        raise ValueError(f"{math.comb(m, r)} candidate bases exceed the enumeration budget")
    found: List[np.ndarray] = []
    for basis in itertools.combinations(range(m), r):
        AB = A[:, basis]
        if np.linalg.cond(AB) > 1e12:
            continue
        xB = np.linalg.solve(AB, b)
        if np.any(xB < -tol):
            continue
        x = np.zeros(m)
        x[list(basis)] = np.clip(xB, 0.0, None)
        if np.max(np.abs(A @ x - b)) > tol:
            continue
        if not any(np.max(np.abs(x - v)) <= 10 * tol for v in found):
            found.append(x)
    if not found:
        return np.zeros((0, m))
    V = np.array(found)
    # deterministic order: lexicographic descending on coordinates
    order = np.lexsort(V.T[::-1])[::-1]
    return V[order]


def _max_min_point(A: np.ndarray, b: np.ndarray) -> Tuple[float, Optional[np.ndarray]]:
    """Solve max t s.t. A x = b, x >= t, t <= 1. Returns (t*, x*)."""
    r, m = A.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.hstack([A, np.zeros((r, 1))])
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(m),
        A_eq=A_eq,
        b_eq=b,
        bounds=[(None, None)] * m + [(None, 1.0)],
        method="highs",
    )
    if res.status != 0:
        return -np.inf, None
    return float(res.x[-1]), res.x[:m]


def strictly_positive_point(A, b) -> Optional[np.ndarray]:
    t, x = _max_min_point(np.asarray(A, float), np.asarray(b, float))
    if x is None or t <= 1e-12:
        return None
    return x


def analytic_center(A: np.ndarray, b: np.ndarray, start: np.ndarray) -> np.ndarray:
    """Maximizer of ``sum log x_i`` over ``{x > 0 : A x = b}``."""
    B = _newton.null_space(A)

    def neg_log(w):
        return -float(np.sum(np.log(w))), -1.0 / w, 1.0 / w**2

    return _newton.minimize_separable(neg_log, start, B, tol=1e-14).w


def martingale_measures(market: FiniteMarket) -> MartingaleMeasurePolytope:
    """Enumerate the martingale-measure polytope of ``market``.

    Raises
    ------
    NoMartingaleMeasure
        If no strictly positive martingale measure exists.
    """
    A, b = martingale_constraints(market)
    x = strictly_positive_point(A, b)
    if x is None:
        raise NoMartingaleMeasure("no equivalent martingale measure (NFLVR fails)")
    Ar, br = _independent_rows(A, b)
    center = analytic_center(Ar, br, x)
    V = enumerate_vertices(A, b)
    return MartingaleMeasurePolytope(_frozen(A), _frozen(b), _frozen(V), _frozen(center))


@dataclass(frozen=True)
class NflvrCertificate:
    holds: bool
    measure: Optional[np.ndarray] = None
    strategy: Optional[np.ndarray] = None

    def __bool__(self):
        return self.holds


def check_nflvr(market: FiniteMarket) -> NflvrCertificate:
    """Decide NFLVR; certify with the analytic center or an arbitrage."""
    A, b = martingale_constraints(market)
    x = strictly_positive_point(A, b)
    if x is not None:
        Ar, br = _independent_rows(A, b)
        return NflvrCertificate(True, measure=analytic_center(Ar, br, x))
    G = market.gains
    k = G.shape[1]
    res = linprog(
        -G.sum(axis=0),
        A_ub=np.vstack([-G, G]),
        b_ub=np.concatenate([np.zeros(G.shape[0]), np.ones(G.shape[0])]),
        bounds=[(None, None)] * k,
        method="highs",
    )
    H = res.x.reshape(len(market.internal), market.n_assets)
    return NflvrCertificate(False, strategy=H)


# -- price sets --------------------------------------------------------------


class PriceSet:
    """Convex polytope of prices with open (relative-interior) semantics.

    ``points`` are the images ``E^Q[f]`` of the polytope vertices; the
    closed set is their convex hull and the price set proper is its
    relative interior.
    """

    def __init__(self, points, margin: float = INTERIOR_MARGIN):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[0] == 0:
            raise ValueError("empty price set")
        self.margin = margin
        self.N = P.shape[1]
        self.center = P.mean(axis=0)
        D = P - self.center
        if self.N == 0 or not np.any(D):
            self.basis = np.zeros((self.N, 0))
        else:
            U, s, _ = np.linalg.svd(D.T, full_matrices=False)
            rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
            self.basis = U[:, :rank]
        self.dim = self.basis.shape[1]
        C = D @ self.basis
        if self.dim == 0:
            self.vertices = self.center[None, :]
            self._facets = None
        elif self.dim == 1:
            lo, hi = np.argmin(C[:, 0]), np.argmax(C[:, 0])
            self.vertices = P[[lo, hi]]
            self._facets = np.array([[-1.0, C[lo, 0]], [1.0, -C[hi, 0]]])
        else:
            hull = ConvexHull(C)
            self.vertices = P[np.sort(hull.vertices)]
            eq = hull.equations
            self._facets = eq / np.linalg.norm(eq[:, :-1], axis=1, keepdims=True)

    @property
    def is_open(self) -> bool:
        """Nonempty interior in R^N."""
        return self.dim == self.N

    def _coords(self, p):
        d = np.asarray(p, dtype=float) - self.center
        c = self.basis.T @ d
        off = float(np.linalg.norm(d - self.basis @ c))
        return c, off

    def depth(self, p) -> float:
        """Signed distance from ``p`` to the relative boundary (positive inside)."""
        c, off = self._coords(p)
        if off > self.margin:
            return -off
        if self.dim == 0:
            return 0.0
        return float(np.min(-(self._facets[:, :-1] @ c + self._facets[:, -1])))

    def interior_contains(self, p) -> bool:
        c, off = self._coords(p)
        if off > self.margin:
            return False
        if self.dim == 0:
            return True
        return self.depth(p) > self.margin

    def closure_contains(self, p, tol: float = 1e-9) -> bool:
        return self.depth(p) >= -tol

    def distance(self, p) -> float:
        """Euclidean distance from ``p`` to the closed set."""
        p = np.asarray(p, dtype=float)
        if self.closure_contains(p, tol=0.0):
            return 0.0
        from scipy.optimize import nnls

        V = self.vertices
        k = V.shape[0]
        # min ||V^T w - p|| with w in simplex: heavy row enforces sum(w) = 1
        big = 1e4 * max(1.0, float(np.abs(V).max()))
        M = np.vstack([V.T, big * np.ones((1, k))])
        rhs = np.concatenate([p, [big]])
        w, _ = nnls(M, rhs)
        w = w / w.sum()
        return float(np.linalg.norm(V.T @ w - p))

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def __repr__(self):
        return f"PriceSet(N={self.N}, dim={self.dim}, vertices={self.vertices.tolist()})"


def arbitrage_free_price_set(
    market: FiniteMarket, f: EndowmentBundle, polytope: Optional[MartingaleMeasurePolytope] = None
) -> PriceSet:
    if f.N == 0:
        raise EmptyBundle("price set needs at least one endowment claim")
    polytope = polytope or martingale_measures(market)
    return PriceSet(polytope.prices(f))


def check_n_trad(market, f: EndowmentBundle, polytope=None) -> bool:
    if f.N == 0:
        return True
    return arbitrage_free_price_set(market, f, polytope).is_open


def superreplication_cost(market, payoff, polytope=None) -> float:
    polytope = polytope or martingale_measures(market)
    return float(np.max(polytope.vertices @ np.asarray(payoff, dtype=float)))


def subreplication_value(market, payoff, polytope=None) -> float:
    polytope = polytope or martingale_measures(market)
    return float(np.min(polytope.vertices @ np.asarray(payoff, dtype=float)))


def cone_K_margin(market, f: EndowmentBundle, x: float, q=None, polytope=None) -> float:
    """``x + min_Q <q, E^Q f>``: positive exactly on the interior of the cone."""
    polytope = polytope or martingale_measures(market)
    if f.N == 0:
        return float(x)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return float(x + np.min(polytope.prices(f) @ q))


def membership_K(market, f: EndowmentBundle, x: float, q=None, polytope=None,
                 margin: float = INTERIOR_MARGIN) -> bool:
    return cone_K_margin(market, f, x, q, polytope) > margin


def membership_L(market, f: EndowmentBundle, y: float, r=None, polytope=None,
                 margin: float = INTERIOR_MARGIN, price_set: Optional[PriceSet] = None) -> bool:
    if not y > margin:
        return False
    if f.N == 0:
        return True
    price_set = price_set or arbitrage_free_price_set(market, f, polytope)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    return price_set.interior_contains(r / y)
