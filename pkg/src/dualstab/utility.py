"""Utility functions on (0, inf) and their convex conjugates.

A :class:`UtilityFunction` is an affine image ``scale * base(x) + shift`` of
one of three base shapes: logarithmic, power, or tabulated.  Keeping the
affine part explicit makes normalization and conjugation exact:

    V(y) = shift + scale * V_base(y / scale),   I(y) = I_base(y / scale).
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import ConjugateDiverges


class _Log:
    tag = "log"

    def u(self, x):
        return np.log(x)

    def du(self, x):
        return 1.0 / x

    def d2u(self, x):
        return -1.0 / x**2

    def inv(self, y):
        return 1.0 / y

    def v(self, y):
        return -np.log(y) - 1.0

    def sup(self):
        return np.inf

    def params(self):
        return {}


class _Power:
    """``x**a / a`` for ``a < 1``, ``a != 0``; bounded above when ``a < 0``."""

    tag = "power"

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not alpha < 1 or alpha == 0:
            raise ValueError("power exponent must satisfy alpha < 1, alpha != 0")
        self.alpha = alpha

    def u(self, x):
        return x**self.alpha / self.alpha

    def du(self, x):
        return x ** (self.alpha - 1.0)

    def d2u(self, x):
        return (self.alpha - 1.0) * x ** (self.alpha - 2.0)

    def inv(self, y):
        return y ** (1.0 / (self.alpha - 1.0))

    def v(self, y):
        a = self.alpha
        return (1.0 - a) / a * y ** (a / (a - 1.0))

    def sup(self):
        return 0.0 if self.alpha < 0 else np.inf

    def params(self):
        return {"alpha": self.alpha}


class _Tabulated:
    """Concave utility with piecewise-linear marginal utility between nodes.

    Outside the node range the marginal utility follows power laws matched
    to the end segments, which keeps both Inada conditions.
    """

    tag = "tabulated"

    def __init__(self, x, values, marginals=None):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.size < 3 or np.any(np.diff(x) <= 0) or x[0] <= 0:
            raise ValueError("tabulated utility needs >= 3 increasing positive abscissae")
        if marginals is None:
            marginals = _concave_slopes(x, values)
        m = np.asarray(marginals, dtype=float)
        if np.any(m <= 0) or np.any(np.diff(m) >= 0):
            raise ValueError("marginal utilities must be positive and strictly decreasing")
        self.x, self.m = x, m
        self.slope = np.diff(m) / np.diff(x)  # U'' on each segment
        # cumulative integral of U' from x[0]
        seg = 0.5 * (m[:-1] + m[1:]) * np.diff(x)
        self.cum = values[0] + np.concatenate([[0.0], np.cumsum(seg)])
        self.rho_left = float(np.clip(-np.log(m[1] / m[0]) / np.log(x[1] / x[0]), 1e-3, 50.0))
        self.rho_right = float(np.clip(-np.log(m[-1] / m[-2]) / np.log(x[-1] / x[-2]), 1e-3, 50.0))

    def _seg(self, x):
        return np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)

    def du(self, x):
        x = np.asarray(x, dtype=float)
        k = self._seg(x)
        mid = self.m[k] + self.slope[k] * (x - self.x[k])
        left = self.m[0] * (x / self.x[0]) ** (-self.rho_left)
        right = self.m[-1] * (x / self.x[-1]) ** (-self.rho_right)
        return np.where(x < self.x[0], left, np.where(x > self.x[-1], right, mid))

    def d2u(self, x):
        x = np.asarray(x, dtype=float)
        k = self._seg(x)
        mid = self.slope[k]
        left = -self.rho_left * self.du(x) / x
        right = -self.rho_right * self.du(x) / x
        return np.where(x < self.x[0], left, np.where(x > self.x[-1], right, mid))

    @staticmethod
    def _tail(m0, x0, rho, x):
        # integral of m0 (t/x0)^-rho from x0 to x
        if abs(rho - 1.0) < 1e-12:
            return m0 * x0 * np.log(x / x0)
        return m0 * x0 / (1.0 - rho) * ((x / x0) ** (1.0 - rho) - 1.0)

    def u(self, x):
        x = np.asarray(x, dtype=float)
        k = self._seg(x)
        dx = x - self.x[k]
        mid = self.cum[k] + self.m[k] * dx + 0.5 * self.slope[k] * dx**2
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            left = self.cum[0] + self._tail(self.m[0], self.x[0], self.rho_left, x)
            right = self.cum[-1] + self._tail(self.m[-1], self.x[-1], self.rho_right, x)
        return np.where(x < self.x[0], left, np.where(x > self.x[-1], right, mid))

    def inv(self, y):
        y = np.asarray(y, dtype=float)
        mr = self.m[::-1]  # increasing
        j = np.clip(np.searchsorted(mr, y, side="right") - 1, 0, mr.size - 2)
        k = self.x.size - 2 - j  # segment index with m[k+1] <= y <= m[k]
        mid = self.x[k] + (y - self.m[k]) / self.slope[k]
        with np.errstate(divide="ignore", over="ignore"):
            left = self.x[0] * (y / self.m[0]) ** (-1.0 / self.rho_left)
            right = self.x[-1] * (y / self.m[-1]) ** (-1.0 / self.rho_right)
        return np.where(y > self.m[0], left, np.where(y < self.m[-1], right, mid))

    def v(self, y):
        x = self.inv(y)
        return self.u(x) - y * x

    def sup(self):
        if self.rho_right > 1.0:
            return self.cum[-1] + self.m[-1] * self.x[-1] / (self.rho_right - 1.0)
        return np.inf

    def params(self):
        return {"nodes": int(self.x.size)}


def _concave_slopes(x, values):
    """Decreasing node slopes from concave samples (harmonic-mean blend)."""
    s = np.diff(values) / np.diff(x)
    if np.any(s <= 0) or np.any(np.diff(s) >= 0):
        raise ValueError("samples must be strictly increasing and strictly concave")
    h = np.diff(x)
    m = np.empty(x.size)
    m[1:-1] = (h[1:] * s[:-1] + h[:-1] * s[1:]) / (h[:-1] + h[1:])
    m[0] = max(2 * s[0] - m[1], s[0] * 1.0000001)
    m[-1] = min(2 * s[-1] - m[-2], s[-1] * 0.9999999)
    if m[-1] <= 0:
        m[-1] = 0.5 * s[-1]
    return m


@dataclass(frozen=True)
class UtilityFunction:
    """``U(x) = scale * base(x) + shift`` with a log, power or tabulated base."""

    base: object
    scale: float = 1.0
    shift: float = 0.0
    name: str = ""

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    # constructors
    @classmethod
    def log(cls):
        return cls(_Log(), name="log")

    @classmethod
    def power(cls, alpha: float, scale: float = 1.0):
        return cls(_Power(alpha), scale=scale, name=f"power({alpha:g})")

    @classmethod
    def tabulated(cls, x, values, marginals=None):
        return cls(_Tabulated(x, values, marginals), name="tabulated")

    @property
    def family(self) -> str:
        return self.base.tag

    @property
    def alpha(self) -> Optional[float]:
        return getattr(self.base, "alpha", None)

    def __call__(self, x):
        return self.scale * self.base.u(x) + self.shift

    def derivative(self, x):
        return self.scale * self.base.du(x)

    def second_derivative(self, x):
        return self.scale * self.base.d2u(x)

    def inverse_marginal(self, y):
        """``I(y) = (U')^{-1}(y)``."""
        return self.base.inv(np.asarray(y, dtype=float) / self.scale)

    def sup_value(self) -> float:
        """``sup_x U(x)``; ``inf`` when unbounded above."""
        return self.scale * self.base.sup() + self.shift

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(float(self(1.0))) <= tol and abs(float(self.derivative(1.0)) - 1.0) <= tol

    def check_inada(self, grid, tol: float = 1e-6) -> bool:
        d = self.derivative(np.asarray(grid, dtype=float))
        return bool(d[0] > 1.0 / tol and d[-1] < tol)

    def conjugate(self) -> "DualFunction":
        return conjugate(self)


def normalize(U: UtilityFunction) -> UtilityFunction:
    """Affine renormalization with ``U(1) = 0`` and ``U'(1) = 1``."""
    slope = float(U.derivative(1.0))
    level = float(U(1.0))
    scale = U.scale / slope
    shift = (U.shift - level) / slope
    return replace(U, scale=scale, shift=shift)


@dataclass(frozen=True)
class DualFunction:
    """Convex conjugate ``V(y) = sup_x {U(x) - x y}`` of a utility."""

    utility: UtilityFunction = field(repr=False)

    def __call__(self, y):
        U = self.utility
        return U.shift + U.scale * U.base.v(np.asarray(y, dtype=float) / U.scale)

    def derivative(self, y):
        return -self.utility.inverse_marginal(y)

    def second_derivative(self, y):
        # V''(y) = -1 / U''(I(y))
        x = self.utility.inverse_marginal(y)
        return -1.0 / self.utility.second_derivative(x)

    def positive_part(self, y):
        return np.maximum(self(y), 0.0)

    @property
    def value_at_zero(self) -> float:
        """``V(0+) = sup U``; ``inf`` flags an unbounded utility."""
        return self.utility.sup_value()


def conjugate(U: UtilityFunction) -> DualFunction:
    return DualFunction(U)


def numeric_conjugate(U: UtilityFunction, y, lo: float = 1e-12, hi: float = 1e12,
                      points: int = 4001) -> np.ndarray:
    """Evaluate ``sup_x {U(x) - x y}`` by brute force, independent of ``I``.

    A log-spaced grid locates the maximizer, then a bounded scalar search on
    ``log x`` refines it.  Raises :class:`ConjugateDiverges` when the grid
    maximum sits on the grid boundary (sup not attained inside).
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    grid = np.geomspace(lo, hi, points)
    Ug = U(grid)
    out = np.empty_like(ys)
    for k, yk in enumerate(ys):
        vals = Ug - grid * yk
        j = int(np.argmax(vals))
        if j == 0 or j == points - 1:
            raise ConjugateDiverges(f"sup not attained on [{lo:g}, {hi:g}] for y={yk:g}")
        a, b = np.log(grid[j - 1]), np.log(grid[j + 1])
        res = minimize_scalar(
            lambda t: -(float(U(np.exp(t))) - np.exp(t) * yk),
            bounds=(a, b),
            method="bounded",
            options={"xatol": 1e-13},
        )
        out[k] = max(-res.fun, vals[j])
    return out if np.ndim(y) else out[0]
