"""Nonlinear solvers for the implicit stage equations of Runge-Kutta steps.

Both solvers use increment-based stopping with the mixed absolute/relative
tolerance ``tol * (1 + |y|)``, which is scale-free across realizations whose
coordinates differ by orders of magnitude, and both verify the final
residual before reporting convergence.  They are deterministic: the same
inputs always produce identical outputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["SolveReport", "fixed_point", "newton"]


@dataclass(frozen=True)
class SolveReport:
    """Outcome of a nonlinear solve.

    ``final_increment`` is the norm of the last update; ``final_residual``
    is ``|y - g(y)|`` for fixed-point iteration and ``|F(y)|`` for Newton.
    """

    converged: bool
    iterations: int
    final_increment: float
    final_residual: float


def fixed_point(g: Callable, y0: np.ndarray, tol: float = 1e-13,
                max_iters: int = 100):
    """Iterate ``y <- g(y)`` until the update stalls below tolerance.

    Accepts when the increment satisfies ``|y_new - y| <= tol*(1 + |y_new|)``
    and the residual of the accepted iterate satisfies
    ``|g(y) - y| <= tol*(1 + |y|)``; the residual evaluation is reused as
    the next iterate if it fails the test, so no work is wasted.

    Returns
    -------
    (y, SolveReport)
        The last mapped value and the solve diagnostics.  On
        non-convergence ``converged`` is False and ``y`` is the final
        iterate, left for the caller's diagnostics.
    """
    y0 = np.asarray(y0, dtype=float)
    scalar = (y0.ndim == 0)
    y_prev = np.atleast_1d(y0).astype(float)
    y = np.atleast_1d(np.asarray(g(y0 if scalar else y_prev), dtype=float))
    iterations = 1
    increment = float(np.linalg.norm(y - y_prev))
    while iterations <= max_iters:
        if increment <= tol * (1.0 + float(np.linalg.norm(y))):
            y_next = np.atleast_1d(np.asarray(g(y[0] if scalar else y),
                                              dtype=float))
            residual = float(np.linalg.norm(y_next - y))
            if residual <= tol * (1.0 + float(np.linalg.norm(y))):
                report = SolveReport(True, iterations, increment, residual)
                return (y[0] if scalar else y), report
            y_prev, y = y, y_next
            iterations += 1
            increment = residual
            continue
        if iterations == max_iters:
            break
        y_prev, y = y, np.atleast_1d(np.asarray(g(y[0] if scalar else y),
                                                dtype=float))
        iterations += 1
        increment = float(np.linalg.norm(y - y_prev))
    residual = increment
    report = SolveReport(False, iterations, increment, residual)
    return (y[0] if scalar else y), report


def _fd_jacobian(F: Callable, y: np.ndarray, Fy: np.ndarray,
                 h: float) -> np.ndarray:
    """Forward-difference Jacobian of ``F`` at ``y``, one column per call."""
    m = y.shape[0]
    J = np.empty((Fy.shape[0], m))
    for j in range(m):
        yj = y.copy()
        yj[j] += h
        J[:, j] = (np.asarray(F(yj), dtype=float) - Fy) / h
    return J


def newton(F: Callable, y0: np.ndarray, tol: float = 1e-13,
           max_iters: int = 100, jacobian: Optional[Callable] = None,
           fd_step: Optional[float] = None):
    """Newton iteration on the residual map ``F``.

    ``jacobian`` may be an analytic callable ``y -> dF/dy``; when absent a
    forward-difference Jacobian with step ``fd_step`` (default
    ``sqrt(eps) * (1 + |y|)``) is recomputed at every iterate.
    Convergence requires ``|F(y)| <= tol * (1 + |y0|)``.

    Returns
    -------
    (y, SolveReport)
        On a singular Jacobian the report carries ``converged=False`` and
        the iteration stops with the current iterate.
    """
    y0 = np.asarray(y0, dtype=float)
    scalar = (y0.ndim == 0)
    y = np.atleast_1d(y0).astype(float).copy()
    scale0 = 1.0 + float(np.linalg.norm(y))
    sqrt_eps = float(np.sqrt(np.finfo(float).eps))
    increment = np.inf
    iterations = 0
    while iterations < max_iters:
        Fy = np.atleast_1d(np.asarray(F(y[0] if scalar else y), dtype=float))
        residual = float(np.linalg.norm(Fy))
        if (residual <= tol * scale0
                and increment <= tol * (1.0 + float(np.linalg.norm(y)))):
            report = SolveReport(True, iterations, float(increment), residual)
            return (y[0] if scalar else y), report
        if jacobian is not None:
            J = np.atleast_2d(np.asarray(jacobian(y[0] if scalar else y),
                                         dtype=float))
        else:
            h = (fd_step if fd_step is not None
                 else sqrt_eps * (1.0 + float(np.linalg.norm(y))))
            if scalar:
                J = np.atleast_2d(_fd_jacobian(
                    lambda v: np.atleast_1d(F(v[0])), y, Fy, h))
            else:
                J = _fd_jacobian(F, y, Fy, h)
        try:
            step = np.linalg.solve(J, Fy)
        except np.linalg.LinAlgError:
            report = SolveReport(False, iterations, float(increment),
                                 residual)
            return (y[0] if scalar else y), report
        y = y - step
        increment = float(np.linalg.norm(step))
        iterations += 1
    Fy = np.atleast_1d(np.asarray(F(y[0] if scalar else y), dtype=float))
    residual = float(np.linalg.norm(Fy))
    converged = (residual <= tol * scale0
                 and increment <= tol * (1.0 + float(np.linalg.norm(y))))
    report = SolveReport(bool(converged), iterations, float(increment),
                         residual)
    return (y[0] if scalar else y), report
