"""Damped Newton method for separable convex objectives on an affine slice.

Every solver in the package reduces to

    minimize  sum_i phi_i(w_i)   over   w = w0 + B @ theta,   w > 0,

with ``phi`` smooth and convex on (0, inf).  ``B`` is assumed to have
orthonormal columns.
"""

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
import scipy.linalg

from .errors import SolverDiverged

# objective(w) -> (value, gradient, hessian diagonal)
Objective = Callable[[np.ndarray], Tuple[float, np.ndarray, np.ndarray]]

ARMIJO = 1e-4
BOUNDARY_FRACTION = 0.99
ROUNDOFF = 1e-13


@dataclass
class NewtonResult:
    w: np.ndarray
    theta: np.ndarray
    value: float
    residual: float
    iterations: int


def orthonormal_range(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of the column space of ``A``."""
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0))
    rank = int(np.sum(s > rtol * s[0] * max(A.shape)))
    return U[:, :rank]


def null_space(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis of ``{z : A @ z = 0}``."""
    if A.shape[0] == 0:
        return np.eye(A.shape[1])
    return scipy.linalg.null_space(A, rcond=rtol * max(A.shape))


def minimize_separable(
    objective: Objective,
    w0: np.ndarray,
    B: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> NewtonResult:
    """Minimize ``objective(w0 + B theta)`` by damped Newton steps.

    ``w0`` must be strictly positive.  Steps are shortened to keep the
    iterate inside the positive orthant and then backtracked until the
    Armijo condition holds.  Convergence is declared when the reduced
    gradient's sup-norm falls below ``tol`` (relative to the gradient scale)
    or the Newton decrement vanishes.
    """
    w = np.array(w0, dtype=float)
    if np.any(w <= 0):
        raise ValueError("starting point must be strictly positive")
    theta = np.zeros(B.shape[1])
    value, grad, hdiag = objective(w)
    scale = max(1.0, float(np.max(np.abs(grad))))
    if B.shape[1] == 0:
        return NewtonResult(w, theta, value, 0.0, 0)

    residual = np.inf
    for it in range(1, max_iter + 1):
        g_red = B.T @ grad
        residual = float(np.max(np.abs(g_red)))
        if residual <= tol * scale:
            return NewtonResult(w, theta, value, residual, it - 1)
        H = (B.T * hdiag) @ B
        try:
            c, low = scipy.linalg.cho_factor(H)
            step = -scipy.linalg.cho_solve((c, low), g_red)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(H, g_red, rcond=None)[0]
        direction = B @ step
        slope = float(g_red @ step)
        if slope >= 0:
            # Hessian too ill-conditioned to give descent; fall back to gradient
            step = -g_red
            direction = B @ step
            slope = float(g_red @ step)
        if -slope < 1e-32:
            return NewtonResult(w, theta, value, residual, it)

        t = 1.0
        neg = direction < 0
        if np.any(neg):
            t = min(1.0, BOUNDARY_FRACTION * float(np.min(w[neg] / -direction[neg])))
        # below this predicted decrease the Armijo test only sees rounding noise
        flat = -slope <= ROUNDOFF * max(1.0, abs(value))
        while True:
            w_new = w + t * direction
            if np.all(w_new > 0):
                v_new, g_new, h_new = objective(w_new)
                if np.isfinite(v_new) and v_new <= value + ARMIJO * t * slope:
                    break
                if flat and np.isfinite(v_new) and np.max(np.abs(B.T @ g_new)) < residual:
                    break
            t *= 0.5
            if t < 1e-18:
                # no further decrease representable in floating point
                if residual <= 1e3 * tol * scale:
                    return NewtonResult(w, theta, value, residual, it)
                raise SolverDiverged("line search failed", residual)
        w, theta = w_new, theta + t * step
        value, grad, hdiag = v_new, g_new, h_new

    g_red = B.T @ grad
    residual = float(np.max(np.abs(g_red)))
    if residual <= 1e3 * tol * scale:
        return NewtonResult(w, theta, value, residual, max_iter)
    raise SolverDiverged("Newton iteration limit reached", residual)
