"""High-accuracy reference solutions for error measurement.

The reference integrator is the 5-stage Gauss method (order 10) run at
successively halved step sizes until two successive endpoints agree to
a tenth of the requested tolerance; the observed agreement is reported
as the estimated accuracy.  Because this reuses the very Gauss
implementation the test suite validates, independence comes from
closed-form cross-checks in the tests (precession of an axially
symmetric free body, the Cayley map for the midpoint rule on linear
fields, Pade stability functions, small matrix exponentials) rather
than from a second integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import (ConfigurationError, HamiltonianSpec, Realization,
                       StepFailureError)
from .integrators import IntegratorConfig, integrate

__all__ = ["ReferenceSolution", "reference_solve"]


@dataclass(frozen=True)
class ReferenceSolution:
    """Endpoint of a converged reference integration."""

    w_ref: np.ndarray
    x_ref: np.ndarray
    estimated_accuracy: float


def reference_solve(r: Realization, h: HamiltonianSpec, x0: np.ndarray,
                    t_end: float, tol: float = 1e-13,
                    t0: float = 0.0) -> ReferenceSolution:
    """Integrate to ``t_end`` with Gauss s=5, halving ``dt`` until two
    successive endpoints agree within ``tol / 10``.

    Parameters
    ----------
    tol : float
        Requested endpoint tolerance; must be at least 1e-13 (roundoff
        makes tighter requests unverifiable in double precision).

    Raises
    ------
    StepFailureError
        If the step size underflows (or a step fails to converge)
        before two successive endpoints agree.
    """
    if tol < 1e-13:
        raise ConfigurationError(
            f"reference tolerance must be >= 1e-13, got {tol!r}")
    span = float(t_end) - float(t0)
    if span == 0.0:
        w0 = r.momentum_map(np.asarray(x0, dtype=float))
        return ReferenceSolution(w_ref=np.asarray(w0, dtype=float),
                                 x_ref=np.array(x0, dtype=float),
                                 estimated_accuracy=0.0)
    config = IntegratorConfig(method="gauss", stages=5,
                              dt=abs(span) / 64.0, stage_tol=1e-14,
                              max_stage_iters=200)

    def endpoint(cfg):
        traj = integrate(r, h, x0, t0, t_end, cfg)
        if traj.failure is not None:
            raise StepFailureError(
                f"reference integration failed at dt={cfg.dt}: "
                f"{traj.failure['message']}",
                time=traj.failure["time"],
                iterations=traj.failure["iterations"],
                residual=traj.failure["residual"])
        return traj.ws[-1], traj.xs[-1]

    target = tol / 10.0
    min_dt = abs(span) * 1e-8
    while True:
        try:
            w_prev, x_prev = endpoint(config)
            break
        except StepFailureError:
            # The span/64 opener can be too coarse for the fixed-point
            # stage iteration on long spans; back off before giving up.
            if config.dt / 2.0 < min_dt:
                raise
            config = replace(config, dt=config.dt / 2.0)
    best = np.inf
    stalled = 0
    while True:
        config = replace(config, dt=config.dt / 2.0)
        if config.dt < min_dt:
            raise StepFailureError(
                f"reference step size underflowed below {min_dt!r} before "
                f"endpoints agreed to {target!r}",
                time=t_end, iterations=0, residual=float("nan"))
        w_next, x_next = endpoint(config)
        agreement = float(np.linalg.norm(w_next - w_prev))
        if agreement <= target:
            return ReferenceSolution(w_ref=w_next, x_ref=x_next,
                                     estimated_accuracy=agreement)
        # Once the agreement stops shrinking, further halvings only
        # accumulate roundoff at exponentially growing cost.
        stalled = stalled + 1 if agreement > 0.5 * best else 0
        best = min(best, agreement)
        if stalled >= 2:
            raise StepFailureError(
                f"reference endpoint agreement stalled at {best:.3e} "
                f"above the requested {target:.3e}; the span is too long "
                f"for that tolerance in double precision",
                time=t_end, iterations=0, residual=best)
        w_prev, x_prev = w_next, x_next
