"""Post-hoc measurement of conservation properties and convergence.

Everything the construction promises is measured here: Casimir drift
along the reduced trajectory, drift of the group invariants on the
realizing space, energy behaviour (bounded envelope for autonomous
collective Hamiltonians), observed convergence orders against a
reference solution, and sign-pattern (orthant) preservation for
polyhedral orbit closures.

Conventions
-----------
Relative deviations are measured against ``max(1, |initial value|)``, so
quantities that start at zero are reported on an absolute scale instead
of dividing by zero.  ``DriftReport.slope`` is the least-squares slope
of ``|deviation|`` against ``t``; for boundedness claims use
:func:`envelope_slope`, which fits the windowed maxima of the deviation
and therefore ignores stationary oscillation.  All reports are pure
functions of the trajectory: recomputation is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import ConfigurationError, HamiltonianSpec, Realization
from .integrators import IntegratorConfig, Trajectory, integrate
from .oracle import reference_solve

__all__ = [
    "DriftReport",
    "OrderEstimate",
    "OrderStudy",
    "OrthantReport",
    "drift_report",
    "casimir_drift",
    "invariant_drift",
    "energy_drift",
    "envelope_slope",
    "convergence_order",
    "orthant_check",
]

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class DriftReport:
    """Deviation of one scalar quantity along a trajectory.

    ``max_rel_deviation`` is ``max_abs_deviation / max(1, |initial|)``;
    ``slope`` is the least-squares slope of ``|deviation|`` vs ``t``
    (zero for trajectories with fewer than two samples).
    """

    name: str
    initial_value: float
    max_abs_deviation: float
    max_rel_deviation: float
    slope: float


@dataclass(frozen=True)
class OrderEstimate:
    """Observed order from one adjacent step-size pair."""

    dt_coarse: float
    dt_fine: float
    error_coarse: float
    error_fine: float
    order: Optional[float]
    excluded: bool


@dataclass(frozen=True)
class OrderStudy:
    """Result of a convergence study against a reference endpoint."""

    dts: tuple
    errors: tuple
    estimates: tuple
    floor: float
    conclusive: bool

    def observed_orders(self) -> tuple:
        return tuple(e.order for e in self.estimates if not e.excluded)


@dataclass(frozen=True)
class OrthantReport:
    """Outcome of a sign-pattern scan along a trajectory."""

    ok: bool
    first_violation_time: Optional[float]
    coordinate: Optional[int]


def _fit_slope(ts: np.ndarray, ys: np.ndarray) -> float:
    if len(ts) < 2 or float(ts[-1]) == float(ts[0]):
        return 0.0
    return float(np.polyfit(ts, ys, 1)[0])


def drift_report(name: str, ts: np.ndarray,
                 values: np.ndarray) -> DriftReport:
    """Build a :class:`DriftReport` for sampled scalar ``values``."""
    values = np.asarray(values, dtype=float)
    f0 = float(values[0])
    dev = np.abs(values - f0)
    max_abs = float(dev.max()) if len(dev) else 0.0
    return DriftReport(
        name=name, initial_value=f0, max_abs_deviation=max_abs,
        max_rel_deviation=max_abs / max(1.0, abs(f0)),
        slope=_fit_slope(np.asarray(ts, dtype=float), dev))


def casimir_drift(traj: Trajectory, r: Realization) -> list:
    """One report per Casimir of ``r``, evaluated along ``w(t)``."""
    if not r.casimirs:
        raise ConfigurationError(
            f"realization {r.name!r} declares no Casimirs")
    return [drift_report(c.name, traj.ts,
                         [c(w) for w in traj.ws])
            for c in r.casimirs]


def invariant_drift(traj: Trajectory, r: Realization) -> list:
    """One report per quadratic/bilinear group invariant, along ``x(t)``."""
    return [drift_report(i.name, traj.ts,
                         [i(x) for x in traj.xs])
            for i in r.quadratic_invariants]


def energy_drift(traj: Trajectory, h: HamiltonianSpec) -> DriftReport:
    """Drift of ``H(t, w(t))``.

    For nonautonomous ``h`` the report name is suffixed with
    ``[not conserved by theory: nonautonomous]``: the drift is still
    measured, but no conservation claim applies.
    """
    name = f"H[{h.name}]" if h.name else "H"
    if not h.autonomous:
        name += " [not conserved by theory: nonautonomous]"
    values = [h.value(t, w) for t, w in zip(traj.ts, traj.ws)]
    return drift_report(name, traj.ts, values)


def envelope_slope(ts: Sequence[float], values: Sequence[float],
                   n_windows: int = 50) -> float:
    """Least-squares slope of the windowed maxima of ``|values - values[0]|``.

    Splits the time span into ``n_windows`` equal windows, takes the
    maximum absolute deviation in each, and fits a line through
    (window midpoint, window maximum).  A bounded oscillatory error has
    near-zero envelope slope; secular growth shows up directly.
    """
    ts = np.asarray(ts, dtype=float)
    dev = np.abs(np.asarray(values, dtype=float) - float(values[0]))
    if len(ts) < 2 or ts[-1] == ts[0]:
        return 0.0
    n_windows = max(2, min(int(n_windows), len(ts) // 2))
    edges = np.linspace(ts[0], ts[-1], n_windows + 1)
    mids, maxima = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mask = (ts >= a) & (ts <= b)
        if not mask.any():
            continue
        mids.append(0.5 * (a + b))
        maxima.append(dev[mask].max())
    return _fit_slope(np.array(mids), np.array(maxima))


def _roundoff_floor(n_steps: int, w_scale: float) -> float:
    """Estimated accumulated roundoff in the endpoint after ``n_steps``
    (random-walk model), used to exclude saturated errors from order
    fits at 100x this level."""
    return 100.0 * _EPS * math.sqrt(max(n_steps, 1)) * (1.0 + w_scale)


def convergence_order(r: Realization, h: HamiltonianSpec, x0: np.ndarray,
                      t_end: float, config: IntegratorConfig,
                      dts: Sequence[float], t0: float = 0.0,
                      w_ref: Optional[np.ndarray] = None,
                      reference_tol: float = 1e-13) -> OrderStudy:
    """Observed orders from endpoint errors at a ladder of step sizes.

    The error metric is the Euclidean norm of ``w(t_end) - w_ref``,
    with ``w_ref`` from :func:`~liepoisson.oracle.reference_solve`
    unless supplied.  Each adjacent pair yields
    ``log(e_coarse / e_fine) / log(dt_coarse / dt_fine)``; pairs where
    either error sits below 100x the estimated roundoff floor are
    excluded, and a study with every pair excluded is flagged
    inconclusive.
    """
    dts = [float(dt) for dt in dts]
    if len(dts) < 3:
        raise ConfigurationError(
            f"a convergence study needs at least 3 step sizes, got {dts}")
    if any(dt <= 0 for dt in dts) or any(
            b >= a for a, b in zip(dts, dts[1:])):
        raise ConfigurationError(
            f"step sizes must be positive and strictly decreasing, "
            f"got {dts}")
    if w_ref is None:
        w_ref = reference_solve(r, h, x0, t_end, tol=reference_tol,
                                t0=t0).w_ref
    w_scale = float(np.linalg.norm(w_ref))
    errors = []
    for dt in dts:
        traj = integrate(r, h, x0, t0, t_end, replace(config, dt=dt))
        if traj.failure is not None:
            raise ConfigurationError(
                f"convergence run at dt={dt} failed: "
                f"{traj.failure['message']}")
        errors.append(float(np.linalg.norm(traj.ws[-1] - w_ref)))
    span = abs(t_end - t0)
    floor = max(_roundoff_floor(int(math.ceil(span / dt)), w_scale)
                for dt in dts)
    estimates = []
    for (dt_c, e_c), (dt_f, e_f) in zip(zip(dts, errors),
                                        zip(dts[1:], errors[1:])):
        pair_floor = _roundoff_floor(int(math.ceil(span / dt_f)), w_scale)
        excluded = e_c <= pair_floor or e_f <= pair_floor
        order = None
        if not excluded and e_f > 0.0:
            order = math.log(e_c / e_f) / math.log(dt_c / dt_f)
        estimates.append(OrderEstimate(
            dt_coarse=dt_c, dt_fine=dt_f, error_coarse=e_c,
            error_fine=e_f, order=order,
            excluded=excluded or order is None))
    conclusive = any(not e.excluded for e in estimates)
    return OrderStudy(dts=tuple(dts), errors=tuple(errors),
                      estimates=tuple(estimates), floor=floor,
                      conclusive=conclusive)


def orthant_check(traj: Trajectory, coordinates: Sequence[int],
                  zero_tol: float = 1e-14) -> OrthantReport:
    """Scan ``x(t)`` for sign changes in the given coordinates.

    The sign pattern is taken from the initial sample: coordinates with
    ``|x0_i| <= zero_tol`` must remain within ``zero_tol`` of zero (the
    invariant stratum); strictly signed coordinates must keep their
    strict sign.  Returns the first violation time and coordinate, if
    any.
    """
    if len(traj.xs) == 0:
        return OrthantReport(ok=True, first_violation_time=None,
                             coordinate=None)
    x0 = traj.xs[0]
    signs = []
    for i in coordinates:
        v = float(x0[i])
        signs.append(0 if abs(v) <= zero_tol else (1 if v > 0 else -1))
    for t, x in zip(traj.ts, traj.xs):
        for i, s in zip(coordinates, signs):
            v = float(x[i])
            bad = (abs(v) > zero_tol) if s == 0 else (s * v <= 0.0)
            if bad:
                return OrthantReport(ok=False,
                                     first_violation_time=float(t),
                                     coordinate=int(i))
    return OrthantReport(ok=True, first_violation_time=None,
                         coordinate=None)
