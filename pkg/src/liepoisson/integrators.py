"""Symplectic one-step methods and the fixed-step trajectory driver.

Implemented methods: the implicit midpoint rule, Gauss-Legendre collocation
with 1 to 5 stages (orders 2 to 10), and Stormer-Verlet (leapfrog) for
partitioned systems.  All Runge-Kutta tableaux here satisfy the algebraic
symplecticity identity ``b_i a_ij + b_j a_ji - b_i b_j = 0``, which is what
makes the methods conserve every quadratic first integral of the flow; the
partitioned leapfrog method conserves bilinear invariants in the declared
``(q, p)`` splitting.

Step size is constant per run (a shortened final step lands exactly on the
requested end time); adaptive stepping is deliberately absent because it
destroys the conservation structure.  Negative integration direction is
supported everywhere by passing ``t_end < t0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (ConfigurationError, HamiltonianSpec, Realization,
                       StepFailureError, make_collective_field, split_qp)
from . import solver as _solver

__all__ = [
    "ButcherTableau",
    "StepResult",
    "IntegratorConfig",
    "Trajectory",
    "gauss_tableau",
    "midpoint_step",
    "gauss_step",
    "stormer_verlet_step",
    "integrate",
]

_SYMPLECTICITY_TOL = 1e-14


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients ``(A, b, c)`` of an ``s``-stage Runge-Kutta method."""

    s: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def symplecticity_residual(self) -> float:
        """Max of ``|b_i a_ij + b_j a_ji - b_i b_j|`` over all ``i, j``."""
        M = self.b[:, None] * self.A
        return float(np.abs(M + M.T - np.outer(self.b, self.b)).max())


@dataclass(frozen=True)
class StepResult:
    """One accepted step: the new point plus stage-solver diagnostics."""

    x_next: np.ndarray
    solver_iterations: int
    residual: float


@dataclass(frozen=True)
class IntegratorConfig:
    """Method selection and stage-solver settings for a run.

    ``dt`` must be positive; the integration direction is taken from the
    sign of ``t_end - t0``.  ``separable`` declares that the collective
    Hamiltonian splits as ``V(q) + T(p)``, enabling the explicit leapfrog
    substeps.
    """

    method: str = "midpoint"
    stages: int = 1
    dt: float = 0.1
    stage_tol: float = 1e-13
    max_stage_iters: int = 100
    solver: str = "fixed_point"
    separable: bool = False

    def __post_init__(self):
        if self.method not in ("midpoint", "gauss", "stormer_verlet"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt)
                and self.dt > 0):
            raise ConfigurationError(
                f"dt must be a positive finite number, got {self.dt!r}")
        if self.method == "gauss" and not 1 <= self.stages <= 5:
            raise ConfigurationError(
                f"gauss stage count must be in 1..5, got {self.stages}")
        if self.stage_tol <= 0:
            raise ConfigurationError("stage_tol must be positive")
        if self.max_stage_iters < 1:
            raise ConfigurationError("max_stage_iters must be at least 1")
        if self.solver not in ("fixed_point", "newton"):
            raise ConfigurationError(f"unknown stage solver {self.solver!r}")


class Trajectory:
    """A time-stamped trajectory in ``M`` together with its reduction.

    Attributes
    ----------
    ts : (N,) array of sample times (monotone in the integration direction).
    xs : (N, 2n) array of phase points.
    ws : (N, m) array of reduced points ``w = J(x)``.
    realization : name of the realization that produced the run.
    config : snapshot dict of the integrator settings, or None.
    stats : dict with ``steps``, ``total_iterations``, ``max_residual``.
    failure : None on success, else a dict recording where the run stopped
        (``time``, ``iterations``, ``residual``, ``message``); the arrays
        hold the partial trajectory up to the failure.
    """

    def __init__(self, ts, xs, ws, realization="", config=None, stats=None,
                 failure=None):
        self.ts = np.asarray(ts, dtype=float)
        self.xs = np.asarray(xs, dtype=float)
        self.ws = np.asarray(ws, dtype=float)
        self.realization = realization
        self.config = config
        self.stats = stats if stats is not None else {}
        self.failure = failure

    def __len__(self):
        return self.ts.shape[0]


# ----------------------------------------------------------------------
# Gauss-Legendre tableaux
# ----------------------------------------------------------------------

def _shifted_legendre(s: int, x: float):
    """Value and derivative at ``x`` of the Legendre polynomial of degree
    ``s`` rescaled to [0, 1], by the three-term recurrence."""
    t = 2.0 * x - 1.0
    p0, p1 = 1.0, t
    d0, d1 = 0.0, 1.0
    if s == 0:
        return p0, 0.0
    for n in range(1, s):
        p2 = ((2 * n + 1) * t * p1 - n * p0) / (n + 1)
        d2 = ((2 * n + 1) * (p1 + t * d1) - n * d0) / (n + 1)
        p0, p1, d0, d1 = p1, p2, d1, d2
    return p1, 2.0 * d1


def _gauss_nodes(s: int) -> np.ndarray:
    """Roots of the degree-``s`` shifted Legendre polynomial on [0, 1].

    Closed-form radicals seed every stage count; a few Newton iterations
    polish the roots to machine precision, avoiding any dependence on a
    general polynomial root finder.
    """
    if s == 1:
        c = [0.5]
    elif s == 2:
        r = math.sqrt(3.0) / 6.0
        c = [0.5 - r, 0.5 + r]
    elif s == 3:
        r = math.sqrt(15.0) / 10.0
        c = [0.5 - r, 0.5, 0.5 + r]
    elif s == 4:
        r1 = math.sqrt(3.0 / 28.0 + math.sqrt(30.0) / 70.0)
        r2 = math.sqrt(3.0 / 28.0 - math.sqrt(30.0) / 70.0)
        c = [0.5 - r1, 0.5 - r2, 0.5 + r2, 0.5 + r1]
    else:
        r1 = math.sqrt(5.0 + 2.0 * math.sqrt(70.0) / 7.0) / 6.0
        r2 = math.sqrt(5.0 - 2.0 * math.sqrt(70.0) / 7.0) / 6.0
        c = [0.5 - r1, 0.5 - r2, 0.5, 0.5 + r2, 0.5 + r1]
    c = np.array(c)
    for _ in range(3):
        for i in range(s):
            p, dp = _shifted_legendre(s, c[i])
            c[i] -= p / dp
    return c


_TABLEAU_CACHE = {}


def gauss_tableau(s: int) -> ButcherTableau:
    """Collocation tableau of the ``s``-stage Gauss-Legendre method.

    The nodes are the shifted-Legendre roots on [0, 1]; the weights and the
    stage matrix solve the collocation (interpolatory quadrature)
    conditions.  The resulting method has order ``2s`` and satisfies the
    symplecticity identity to within a few units of roundoff, which is
    asserted here.
    """
    if not (isinstance(s, int) and 1 <= s <= 5):
        raise ConfigurationError(f"stage count must be in 1..5, got {s!r}")
    if s in _TABLEAU_CACHE:
        return _TABLEAU_CACHE[s]
    c = _gauss_nodes(s)
    V = np.vander(c, s, increasing=True).T
    b = np.linalg.solve(V, 1.0 / np.arange(1, s + 1))
    A = np.empty((s, s))
    for i in range(s):
        A[i] = np.linalg.solve(V, c[i] ** np.arange(1, s + 1)
                               / np.arange(1, s + 1))
    tab = ButcherTableau(s, A, b, c)
    resid = tab.symplecticity_residual()
    if resid > _SYMPLECTICITY_TOL:
        raise ConfigurationError(
            f"gauss tableau s={s} violates the symplecticity identity "
            f"(residual {resid:.2e})")
    A.setflags(write=False)
    b.setflags(write=False)
    c.setflags(write=False)
    _TABLEAU_CACHE[s] = tab
    return tab


# ----------------------------------------------------------------------
# Stage solvers
# ----------------------------------------------------------------------

class _StageWorkspace:
    """Mutable per-run cache for the stage solvers.

    Carries the previous stage increments (warm start), the previous
    algebra elements for the reduced midpoint solver, and, for the
    simplified-Newton solver, the stage-system inverse frozen at the
    current step's base point.
    """

    def __init__(self):
        self.Z_prev = None
        self.Z_prev2 = None
        self.M_inv = None
        self.last_iterations = 0
        self.reduced = None
        self.a_prev = None
        self.a_prev2 = None

    def warm_start(self, shape):
        if self.Z_prev is None or self.Z_prev.shape != shape:
            return None
        if self.Z_prev2 is not None and self.Z_prev2.shape == shape:
            return 2.0 * self.Z_prev - self.Z_prev2
        return self.Z_prev.copy()

    def store(self, Z):
        self.Z_prev2 = self.Z_prev
        self.Z_prev = Z

    def warm_a(self):
        if self.a_prev is None:
            return None
        if self.a_prev2 is not None:
            return 2.0 * self.a_prev - self.a_prev2
        return self.a_prev

    def store_a(self, a):
        self.a_prev2 = self.a_prev
        self.a_prev = a


def _stage_times(t, dt, c):
    return t + c * dt


def _eval_stages(f, stage_t, x, Z, K):
    for i in range(Z.shape[0]):
        K[i] = f(stage_t[i], x + Z[i])
    return K


def _initial_guess(f, t, x, dt, c, ws):
    if ws is not None:
        Z = ws.warm_start((c.shape[0], x.shape[0]))
        if Z is not None:
            return Z
    f0 = np.asarray(f(t + 0.5 * dt, x), dtype=float)
    return dt * np.outer(c, f0)


def _solve_stages_fixed_point(f, t, x, dt, tableau, tol, max_iters, ws):
    """Fixed-point iteration on the stacked stage increments.

    Stops on the increment test ``|dZ| <= tol*(1 + |Z|)`` and verifies the
    stage residual against ``tol*(1 + |x|)`` with a fresh evaluation that
    doubles as the next iterate when the test fails.
    """
    A, c = tableau.A, tableau.c
    s, d = tableau.s, x.shape[0]
    stage_t = _stage_times(t, dt, c)
    Z = _initial_guess(f, t, x, dt, c, ws)
    K = np.empty((s, d))
    bound = tol * (1.0 + float(np.linalg.norm(x)))
    have_K = False
    iterations = 0
    inc = math.inf
    res = math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        while iterations < max_iters:
            if not have_K:
                _eval_stages(f, stage_t, x, Z, K)
            Z_new = dt * (A @ K)
            inc = float(np.linalg.norm(Z_new - Z))
            Z = Z_new
            have_K = False
            iterations += 1
            if not math.isfinite(inc):
                raise StepFailureError(
                    f"fixed-point stage iteration diverged (non-finite "
                    f"update after {iterations} iterations) at "
                    f"t={float(t)!r}; consider a smaller dt or the newton "
                    f"stage solver",
                    time=t, iterations=iterations, residual=inc)
            if inc <= tol * (1.0 + float(np.linalg.norm(Z))):
                _eval_stages(f, stage_t, x, Z, K)
                have_K = True
                res = float(np.linalg.norm(Z - dt * (A @ K)))
                if res <= bound:
                    if ws is not None:
                        ws.store(Z)
                        ws.last_iterations = iterations
                    return Z, K, iterations, res
    raise StepFailureError(
        f"stage equations did not converge in {iterations} fixed-point "
        f"iterations (last increment {inc:.3e}, residual {min(res, inc):.3e}) "
        f"at t={float(t)!r}; consider a smaller dt or the newton stage solver",
        time=t, iterations=iterations, residual=min(res, inc))


def _fd_field_jacobian(f, t_mid, x, f0):
    d = x.shape[0]
    h = math.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(x)))
    J = np.empty((d, d))
    for j in range(d):
        xj = x.copy()
        xj[j] += h
        J[:, j] = (np.asarray(f(t_mid, xj), dtype=float) - f0) / h
    return J


def _refresh_newton_matrix(f, t, x, dt, A, ws):
    f0 = np.asarray(f(t + 0.5 * dt, x), dtype=float)
    Jf = _fd_field_jacobian(f, t + 0.5 * dt, x, f0)
    s = A.shape[0]
    if s == 1:
        M = np.eye(x.shape[0]) - (dt * A[0, 0]) * Jf
    else:
        M = np.eye(s * x.shape[0]) - dt * np.kron(A, Jf)
    ws.M_inv = np.linalg.inv(M)
    return f0


_NEWTON_CHEAP_BUDGET = 12
_CONTINUATION_SUBSTEPS = 8


def _newton_correct(f, t, x, h, tableau, Z, bound, max_iters, base_point):
    """Newton iteration at step size ``h`` with the stage matrix frozen at
    ``base_point``; returns ``(Z, K, iterations, residual, converged)``."""
    A, c = tableau.A, tableau.c
    s, d = tableau.s, x.shape[0]
    stage_t = _stage_times(t, h, c)
    f0 = np.asarray(f(t + 0.5 * h, base_point), dtype=float)
    Jf = _fd_field_jacobian(f, t + 0.5 * h, base_point, f0)
    if s == 1:
        M = np.eye(d) - (h * A[0, 0]) * Jf
    else:
        M = np.eye(s * d) - h * np.kron(A, Jf)
    M_inv = np.linalg.inv(M)
    K = np.empty((s, d))
    res = math.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for it in range(1, max_iters + 1):
            _eval_stages(f, stage_t, x, Z, K)
            F = Z - h * (A @ K)
            res = float(np.linalg.norm(F))
            if not math.isfinite(res):
                return Z, K, it, res, False
            if res <= bound:
                return Z, K, it, res, True
            if s == 1:
                Z = Z - (M_inv @ F[0])[None, :]
            else:
                Z = Z - (M_inv @ F.ravel()).reshape(s, d)
    return Z, K, max_iters, res, False


def _solve_stages_continuation(f, t, x, dt, tableau, tol, max_iters, ws):
    """Path-follow the principal stage-solution branch from step size 0 up
    to ``dt``, correcting at each substep with a Newton iteration whose
    matrix is refreshed at the current branch point.  The substep is halved
    adaptively when the correction fails, down to ``dt/256``.

    Fallback for steps where the frozen-matrix iteration fails: near the
    solvability boundary the stage Jacobian changes completely between the
    step base and the solution, so only tracking the branch is reliable.
    Returns ``(Z, K, iterations, residual, converged)``; a fold in the
    branch (substep underflow) reports ``converged=False``.
    """
    s, d = tableau.s, x.shape[0]
    scale = 1.0 + float(np.linalg.norm(x))
    bound = tol * scale
    mid_bound = max(bound, 1e-10 * scale)
    Z = np.zeros((s, d))
    K = np.empty((s, d))
    total_iterations = 0
    res = math.inf
    h = 0.0
    dh = dt / _CONTINUATION_SUBSTEPS
    dh_min = dt / 256.0
    sub_iters = min(max_iters, 25)
    while h < dt:
        h_next = min(h + dh, dt)
        base = x + Z.mean(axis=0)
        Z_try, K, it, res, converged = _newton_correct(
            f, t, x, h_next, tableau, Z.copy(),
            bound if h_next == dt else mid_bound, sub_iters, base)
        total_iterations += it
        if converged:
            Z = Z_try
            h = h_next
            if it <= 3 and dh < dt:
                dh = min(2.0 * dh, dt)
        else:
            dh *= 0.5
            if dh < dh_min:
                return Z, K, total_iterations, res, False
    ws.store(Z)
    ws.last_iterations = total_iterations
    return Z, K, total_iterations, res, True


def _solve_stages_lm(f, t, x, dt, tableau, tol, max_iters, ws):
    """Levenberg-Marquardt search for a stage solution from the cold
    start, with the Jacobian re-evaluated at every iterate.

    Last-resort fallback: past a fold of the principal branch the stage
    equations still have roots, but they are not reachable by undamped
    Newton or by continuation from step size zero.  Returns
    ``(Z, K, iterations, residual, converged)``.
    """
    A, c = tableau.A, tableau.c
    s, d = tableau.s, x.shape[0]
    n = s * d
    stage_t = _stage_times(t, dt, c)
    bound = tol * (1.0 + float(np.linalg.norm(x)))
    Z = dt * np.outer(c, np.asarray(f(t + 0.5 * dt, x), dtype=float))
    K = np.empty((s, d))
    mu = 1e-3
    fd_h = math.sqrt(np.finfo(float).eps) * (1.0 + float(np.linalg.norm(x)))
    _eval_stages(f, stage_t, x, Z, K)
    F = (Z - dt * (A @ K)).ravel()
    res = float(np.linalg.norm(F))
    iterations = 0
    while iterations < max_iters:
        if res <= bound:
            ws.store(Z)
            ws.last_iterations = iterations
            return Z, K, iterations, res, True
        J = np.empty((n, n))
        for col in range(n):
            Zp = Z.copy()
            Zp[col // d, col % d] += fd_h
            _eval_stages(f, stage_t, x, Zp, K)
            J[:, col] = ((Zp - dt * (A @ K)).ravel() - F) / fd_h
        JtJ = J.T @ J
        JtF = J.T @ F
        improved = False
        for _ in range(20):
            try:
                delta = np.linalg.solve(
                    JtJ + mu * np.diag(np.diag(JtJ) + 1e-30), -JtF)
            except np.linalg.LinAlgError:
                mu *= 10.0
                continue
            Z_try = Z + delta.reshape(s, d)
            _eval_stages(f, stage_t, x, Z_try, K)
            F_try = (Z_try - dt * (A @ K)).ravel()
            res_try = float(np.linalg.norm(F_try))
            if res_try < res:
                Z, F, res = Z_try, F_try, res_try
                mu = max(mu / 3.0, 1e-12)
                improved = True
                break
            mu *= 10.0
        iterations += 1
        if not improved:
            break
    _eval_stages(f, stage_t, x, Z, K)
    res = float(np.linalg.norm(Z - dt * (A @ K)))
    if res <= bound:
        ws.store(Z)
        ws.last_iterations = iterations
        return Z, K, iterations, res, True
    return Z, K, iterations, res, False


def _solve_stages_newton(f, t, x, dt, tableau, tol, max_iters, ws):
    """Simplified Newton iteration on the stacked stage increments.

    The stage-system matrix ``I - dt (A x Jf)`` is built from a
    finite-difference field Jacobian frozen at the step base point and
    inverted once per step; acceptance is on the stage residual directly,
    ``|Z - dt A f(x + Z)| <= tol*(1 + |x|)``.  A diverging warm start is
    retried from the cold-start guess, and if the frozen iteration still
    diverges or exhausts its budget the solve falls back to step-size
    continuation (:func:`_solve_stages_continuation`).
    """
    A, c = tableau.A, tableau.c
    s, d = tableau.s, x.shape[0]
    stage_t = _stage_times(t, dt, c)
    bound = tol * (1.0 + float(np.linalg.norm(x)))
    f0 = _refresh_newton_matrix(f, t, x, dt, A, ws)
    Z = _initial_guess(f, t, x, dt, c, ws)
    cold_used = ws.Z_prev is None
    K = np.empty((s, d))
    budget = min(max_iters, _NEWTON_CHEAP_BUDGET)
    iterations = 0
    res = math.inf
    res_prev = math.inf
    M_inv = ws.M_inv
    while iterations < budget:
        _eval_stages(f, stage_t, x, Z, K)
        F = Z - dt * (A @ K)
        res = float(np.linalg.norm(F))
        if res <= bound:
            ws.store(Z)
            ws.last_iterations = iterations
            return Z, K, iterations, res
        if res > 4.0 * res_prev:
            if cold_used:
                break  # diverging even from the cold start
            # The warm start was outside the contraction basin; restart
            # from the cold-start guess with the base-point matrix.
            Z = dt * np.outer(c, f0)
            cold_used = True
            res_prev = math.inf
            iterations += 1
            continue
        res_prev = res
        if s == 1:
            Z = Z - (M_inv @ F[0])[None, :]
        else:
            Z = Z - (M_inv @ F.ravel()).reshape(s, d)
        iterations += 1
    Z, K, cont_iters, res, converged = _solve_stages_continuation(
        f, t, x, dt, tableau, tol, max_iters, ws)
    if converged:
        return Z, K, iterations + cont_iters, res
    Z, K, lm_iters, res, converged = _solve_stages_lm(
        f, t, x, dt, tableau, tol, max_iters, ws)
    total = iterations + cont_iters + lm_iters
    if converged:
        return Z, K, total, res
    raise StepFailureError(
        f"stage equations did not converge at t={float(t)!r} after frozen-matrix "
        f"newton, step-size continuation, and damped search (residual "
        f"{res:.3e}); the step size {dt!r} appears to be beyond the "
        f"solvability bound for this field",
        time=t, iterations=total, residual=res)


# ----------------------------------------------------------------------
# One-step maps
# ----------------------------------------------------------------------

def _reduced_midpoint_step(t, x, dt, tableau, cfg, ws):
    """Midpoint step through a realization's reduced stage solver.

    Solves the single stage equation in the algebra variable, then
    advances by the reflection form ``x1 = 2 Y - x``, which agrees with
    ``x + dt f(t_mid, Y)`` to within the stage tolerance and conserves
    quadratic invariants of the group action to roundoff.  Returns
    ``None`` when the reduced solve fails, so the caller can fall back
    to the generic stage solvers.
    """
    eta = dt * float(tableau.A[0, 0])
    t_mid = t + float(tableau.c[0]) * dt
    x1, a, iters, res, ok = ws.reduced(t_mid, eta, x, ws.warm_a(),
                                       cfg.stage_tol)
    if not ok:
        ws.a_prev = ws.a_prev2 = None
        return None
    x1 = np.asarray(x1, dtype=float)
    ws.store_a(np.asarray(a, dtype=float))
    ws.store((0.5 * (x1 - x))[None, :])
    ws.last_iterations = iters
    return StepResult(x1, iters, res)


def gauss_step(f: Callable, t: float, x: np.ndarray, dt: float,
               tableau: ButcherTableau, cfg: IntegratorConfig,
               workspace: Optional[_StageWorkspace] = None) -> StepResult:
    """One step of the collocation method defined by ``tableau``.

    Solves the stage equations ``Y_i = x + dt sum_j a_ij f(t + c_j dt, Y_j)``
    to the configured tolerance and advances
    ``x1 = x + dt sum_i b_i f(t + c_i dt, Y_i)``.
    """
    x = np.asarray(x, dtype=float)
    if workspace is None:
        workspace = _StageWorkspace()
    if (workspace.reduced is not None and tableau.s == 1
            and cfg.solver == "newton"):
        result = _reduced_midpoint_step(t, x, dt, tableau, cfg, workspace)
        if result is not None:
            return result
    if cfg.solver == "newton":
        Z, K, iters, res = _solve_stages_newton(
            f, t, x, dt, tableau, cfg.stage_tol, cfg.max_stage_iters,
            workspace)
    else:
        Z, K, iters, res = _solve_stages_fixed_point(
            f, t, x, dt, tableau, cfg.stage_tol, cfg.max_stage_iters,
            workspace)
    x_next = x + dt * (tableau.b @ K)
    return StepResult(x_next, iters, res)


def midpoint_step(f: Callable, t: float, x: np.ndarray, dt: float,
                  cfg: IntegratorConfig,
                  workspace: Optional[_StageWorkspace] = None) -> StepResult:
    """One step of the implicit midpoint rule
    ``x1 = x0 + dt f(t + dt/2, (x0 + x1)/2)``.

    The midpoint rule is the one-stage Gauss method; this delegates to
    :func:`gauss_step` with the one-stage tableau, so the two agree
    bit-for-bit under identical solver settings.
    """
    return gauss_step(f, t, x, dt, gauss_tableau(1), cfg, workspace)


def _solve_substep(g: Callable, y0: np.ndarray, cfg: IntegratorConfig,
                   t: float):
    """Solve the implicit relation ``y = g(y)`` of a leapfrog half step."""
    if cfg.solver == "newton":
        y, report = _solver.newton(lambda y: y - g(y), y0, cfg.stage_tol,
                                   cfg.max_stage_iters)
    else:
        y, report = _solver.fixed_point(g, y0, cfg.stage_tol,
                                        cfg.max_stage_iters)
    if not report.converged:
        raise StepFailureError(
            f"leapfrog substep did not converge in {report.iterations} "
            f"iterations (residual {report.final_residual:.3e}) at t={float(t)!r}",
            time=t, iterations=report.iterations,
            residual=report.final_residual)
    return y, report


def stormer_verlet_step(gradq: Callable, gradp: Callable, t: float,
                        x: np.ndarray, dt: float,
                        cfg: IntegratorConfig) -> StepResult:
    """One Stormer-Verlet (leapfrog) step for a partitioned system.

    ``gradq(t, q, p)`` and ``gradp(t, q, p)`` are the two halves of the
    Hamiltonian gradient on ``M``.  The three-substep composition is

    ``p_half = p - (dt/2) gradq(t, q, p_half)``
    ``q1 = q + (dt/2) (gradp(t, q, p_half) + gradp(t + dt, q1, p_half))``
    ``p1 = p_half - (dt/2) gradq(t + dt, q1, p_half)``

    The two implicit relations collapse to explicit updates when the
    Hamiltonian is declared separable (``gradq`` independent of ``p`` and
    ``gradp`` independent of ``q``).
    """
    x = np.asarray(x, dtype=float)
    q, p = split_qp(x)
    half = 0.5 * dt
    iterations = 0
    residual = 0.0
    if cfg.separable:
        p_half = p - half * gradq(t, q, p)
        q1 = q + half * (gradp(t, q, p_half) + gradp(t + dt, q, p_half))
    else:
        p_half, rep = _solve_substep(
            lambda y: p - half * gradq(t, q, y), p, cfg, t)
        iterations += rep.iterations
        residual = max(residual, rep.final_residual)
        gp_left = gradp(t, q, p_half)
        q1, rep = _solve_substep(
            lambda y: q + half * (gp_left + gradp(t + dt, y, p_half)),
            q, cfg, t)
        iterations += rep.iterations
        residual = max(residual, rep.final_residual)
    p1 = p_half - half * gradq(t + dt, q1, p_half)
    return StepResult(np.concatenate([q1, p1]), iterations, residual)


# ----------------------------------------------------------------------
# Trajectory driver
# ----------------------------------------------------------------------

def _partitioned_gradients(field: Callable, dim: int):
    """Recover ``(gradq, gradp)`` from a canonical field closure.

    The canonical field is ``(dH/dp, -dH/dq)``, so one field evaluation
    yields either half of the gradient.
    """
    n = dim // 2

    def gradq(t, q, p):
        fx = field(t, np.concatenate([q, p]))
        return -fx[n:]

    def gradp(t, q, p):
        fx = field(t, np.concatenate([q, p]))
        return fx[:n]

    return gradq, gradp


def _run_reduced_loop(field, r, ts, xs, ws_rows, n_steps, t0, t_end,
                      direction, cfg, tableau, workspace, stats):
    """Specialized scalar driver for runs with a reduced midpoint solver.

    Performs the same stepping as the generic loop but keeps per-step
    work in scalar arithmetic: one reduced stage solve, the reflection
    update ``x1 = 2 Y - x``, and the momentum-map row.  A failed reduced
    solve falls back to the generic Newton stage solver chain for that
    step only.  Returns ``(n_done, failure)`` and fills ``stats``.
    """
    solve = workspace.reduced
    a11 = float(tableau.A[0, 0])
    c1 = float(tableau.c[0])
    b_row = tableau.b
    dt_nom = cfg.dt
    tol = cfg.stage_tol
    jm = r.momentum_map
    failure = None
    n_done = 0
    total_iters = 0
    max_res = 0.0
    t_here = float(ts[0])
    xt = tuple(float(v) for v in xs[0])
    a_prev = None
    warm = None
    for i in range(n_steps):
        t_next = t_end if i == n_steps - 1 else t0 + (i + 1) * direction * dt_nom
        dt_step = t_next - t_here
        x1, a, iters, res, ok = solve(t_here + c1 * dt_step,
                                      dt_step * a11, xt, warm, tol)
        if ok:
            xs[i + 1] = x1
            xt = x1
            if a_prev is not None:
                warm = (2.0 * a[0] - a_prev[0], 2.0 * a[1] - a_prev[1],
                        2.0 * a[2] - a_prev[2])
            a_prev = a
            total_iters += iters
            if res > max_res:
                max_res = res
        else:
            # One-off fallback to the generic solver chain; clear the
            # stale stage and algebra warm starts first.
            workspace.Z_prev = workspace.Z_prev2 = None
            a_prev = None
            warm = None
            x_row = xs[i]
            try:
                Z, K, g_iters, res = _solve_stages_newton(
                    field, t_here, x_row, dt_step, tableau, tol,
                    cfg.max_stage_iters, workspace)
            except StepFailureError as err:
                failure = {"time": t_here, "iterations": err.iterations,
                           "residual": err.residual, "message": str(err)}
                break
            xs[i + 1] = x_row + dt_step * (b_row @ K)
            xt = tuple(float(v) for v in xs[i + 1])
            total_iters += iters + g_iters
            if res > max_res:
                max_res = res
        ws_rows[i + 1] = jm(xs[i + 1])
        ts[i + 1] = t_next
        t_here = t_next
        n_done = i + 1
    stats["steps"] = n_done
    stats["total_iterations"] = total_iters
    stats["max_residual"] = max_res
    return n_done, failure


def integrate(r: Realization, h: HamiltonianSpec, x0: np.ndarray, t0: float,
              t_end: float, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the collective field of ``(r, h)`` from ``x0`` over
    ``[t0, t_end]`` with constant steps.

    Produces ``ceil(|t_end - t0| / dt) + 1`` samples ``(t, x, w=J(x))``; the
    final step is shortened to land exactly on ``t_end``.  A stage-solver
    failure stops the run and returns the partial trajectory with a failure
    record instead of raising.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (r.dim_M,):
        raise ConfigurationError(
            f"initial point of shape {x0.shape} does not match phase "
            f"dimension ({r.dim_M},) of realization {r.name!r}")
    if not np.all(np.isfinite(x0)):
        raise ConfigurationError("initial point must be finite")
    if cfg.method == "stormer_verlet" and not (cfg.separable
                                               or r.partition_compatible):
        raise ConfigurationError(
            "stormer_verlet requires a separable Hamiltonian or a "
            "realization with bilinear (partition-compatible) invariants; "
            f"realization {r.name!r} declares neither")

    field = make_collective_field(r, h)
    span = t_end - t0
    direction = 1.0 if span >= 0 else -1.0
    n_steps = 0 if span == 0 else max(1, math.ceil(abs(span) / cfg.dt - 1e-9))
    ts = np.empty(n_steps + 1)
    xs = np.empty((n_steps + 1, r.dim_M))
    ws = np.empty((n_steps + 1, r.dim_dual))
    ts[0] = t0
    xs[0] = x0
    ws[0] = r.momentum_map(x0)

    snapshot = {
        "method": cfg.method, "stages": cfg.stages, "dt": cfg.dt,
        "stage_tol": cfg.stage_tol, "max_stage_iters": cfg.max_stage_iters,
        "solver": cfg.solver, "separable": cfg.separable,
        "t0": t0, "t_end": t_end,
    }
    stats = {"steps": 0, "total_iterations": 0, "max_residual": 0.0}
    failure = None

    if cfg.method == "gauss":
        tableau = gauss_tableau(cfg.stages)
        stepper = "rk"
    elif cfg.method == "midpoint":
        tableau = gauss_tableau(1)
        stepper = "rk"
    else:
        tableau = None
        stepper = "sv"
        gradq, gradp = _partitioned_gradients(field, r.dim_M)
    workspace = _StageWorkspace()
    if (stepper == "rk" and tableau.s == 1 and cfg.solver == "newton"
            and r.reduced_midpoint_factory is not None):
        workspace.reduced = r.reduced_midpoint_factory(h)

    if workspace.reduced is not None:
        n_done, failure = _run_reduced_loop(
            field, r, ts, xs, ws, n_steps, t0, t_end, direction, cfg,
            tableau, workspace, stats)
    else:
        n_done = 0
        for i in range(n_steps):
            t_here = ts[i]
            t_next = (t_end if i == n_steps - 1
                      else t0 + (i + 1) * direction * cfg.dt)
            dt_step = t_next - t_here
            try:
                if stepper == "rk":
                    result = gauss_step(field, t_here, xs[i], dt_step,
                                        tableau, cfg, workspace)
                else:
                    result = stormer_verlet_step(gradq, gradp, t_here, xs[i],
                                                 dt_step, cfg)
            except StepFailureError as err:
                failure = {"time": t_here, "iterations": err.iterations,
                           "residual": err.residual, "message": str(err)}
                break
            xs[i + 1] = result.x_next
            ws[i + 1] = r.momentum_map(xs[i + 1])
            ts[i + 1] = t_next
            stats["steps"] += 1
            stats["total_iterations"] += result.solver_iterations
            stats["max_residual"] = max(stats["max_residual"],
                                        result.residual)
            n_done = i + 1

    keep = n_done + 1
    return Trajectory(ts[:keep], xs[:keep], ws[:keep], realization=r.name,
                      config=snapshot, stats=stats, failure=failure)
