"""Core abstractions for integrating Lie-Poisson systems by symplectic lift.

A Hamiltonian system on the dual ``g*`` of a Lie algebra is pulled back
through a momentum map ``J: M -> g*`` defined on a symplectic vector space
``M``.  The pulled-back ("collective") Hamiltonian ``H . J`` generates a
canonical vector field on ``M`` whose flow projects, through ``J``, onto the
Lie-Poisson flow of ``H``.  This module defines the realization data
structure that packages ``J`` together with its infinitesimal generator,
invariants, Casimirs and a fiber lift, plus the operations shared by every
realization: evaluating the collective vector field, reducing points of
``M`` to ``g*``, and lifting points of ``g*`` back into ``M``.

Conventions
-----------
Phase points ``x`` on ``M = T*R^n`` are flat arrays storing the
concatenation ``(q, p)``.  Hamilton's equations read ``dq/dt = dH/dp``,
``dp/dt = -dH/dq``.  Dual elements ``w`` are flat arrays in the
realization's declared basis; matrix-valued duals are stored dense and
row-major flattened, paired by the Frobenius inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

__all__ = [
    "LiePoissonError",
    "ConfigurationError",
    "RangeError",
    "StepFailureError",
    "NamedFunction",
    "Realization",
    "HamiltonianSpec",
    "canonical_field_from_gradient",
    "split_qp",
    "join_qp",
    "collective_vector_field",
    "collective_gradient",
    "make_collective_field",
    "reduce",
    "lift",
]


class LiePoissonError(Exception):
    """Base class for all errors raised by this library."""


class ConfigurationError(LiePoissonError):
    """A structural problem: bad parameters, dimensions, or config input."""


class RangeError(LiePoissonError):
    """A dual element lies outside the range of the momentum map.

    The message names the violated constraint.
    """


class StepFailureError(LiePoissonError):
    """An implicit step did not converge within the allowed iterations."""

    def __init__(self, message, *, time=None, iterations=None, residual=None):
        super().__init__(message)
        self.time = time
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class NamedFunction:
    """A scalar function bundled with a short display name for reports."""

    name: str
    fn: Callable

    def __call__(self, *args):
        return self.fn(*args)


def _always_true(w) -> bool:
    return True


@dataclass(frozen=True)
class Realization:
    """A symplectic realization of a Lie-Poisson manifold.

    Parameters
    ----------
    name : str
        Identifier used in configs, trajectories and reports.
    dim_M : int
        Dimension ``2n`` of the symplectic vector space ``M``.
    dim_dual : int
        Dimension ``m`` of the dual ``g*`` in the declared basis.
    momentum_map : callable
        ``x -> w``; the Poisson map ``J`` realizing ``g*`` on ``M``.
    generator : callable or None
        ``(a, x) -> dx/dt``; the infinitesimal generator of the group
        action, evaluated on an algebra element ``a`` (the gradient of a
        Hamiltonian on ``g*``).  When ``None``, the collective field falls
        back to the canonical flip of ``momentum_jacobian(x).T @ a``.
    fiber_lift : callable or None
        ``w -> x``; a deterministic right inverse of ``J`` on its range.
        Raises :class:`RangeError` (naming the violated constraint) for
        ``w`` outside the range.
    momentum_jacobian : callable or None
        ``x -> (m, 2n) array``; the analytic derivative of ``J``.
    quadratic_invariants : tuple of NamedFunction
        Group invariants ``I(x)`` conserved exactly by symplectic
        Runge-Kutta methods applied to any collective field.
    casimirs : tuple of NamedFunction
        Functions of ``w`` constant on coadjoint orbits.
    range_predicate : callable
        ``w -> bool``; membership test for ``J(M)``.  Identically true when
        ``J`` is surjective.
    partition_compatible : bool
        True when the invariants are bilinear in the declared ``(q, p)``
        splitting, so partitioned methods (leapfrog) conserve them too.
    orthant_coordinates : tuple of int
        Indices of ``x`` whose signs are invariant under every collective
        flow; used by post-hoc orthant diagnostics.
    fused_field_factory : callable or None
        Optional ``h -> f(t, x)`` producing a low-overhead collective field
        closure; used by the integrator driver when present.
    reduced_midpoint_factory : callable or None
        Optional ``h -> solver`` producing a specialized midpoint stage
        solver that exploits algebraic structure of the group action (for
        instance a closed-form resolvent of the generator).  The solver has
        signature ``(t_mid, eta, x, a_warm, tol) -> (x1, a, iters, res,
        ok)`` where ``eta`` is the effective stage step, ``a_warm`` an
        optional initial guess for the algebra element, ``tol`` the
        relative stage tolerance (the solver enforces the phase-space
        residual ``res <= tol * (1 + |x|)``), ``x1`` the advanced point
        ``2 Y - x`` through the reflection update at the converged stage
        ``Y``, and ``a`` the converged algebra element.  The factory may
        return ``None`` for Hamiltonians it cannot handle; the driver then
        falls back to the generic stage solvers.
    """

    name: str
    dim_M: int
    dim_dual: int
    momentum_map: Callable
    generator: Optional[Callable] = None
    fiber_lift: Optional[Callable] = None
    momentum_jacobian: Optional[Callable] = None
    quadratic_invariants: Tuple[NamedFunction, ...] = ()
    casimirs: Tuple[NamedFunction, ...] = ()
    range_predicate: Callable = _always_true
    partition_compatible: bool = False
    orthant_coordinates: Tuple[int, ...] = ()
    fused_field_factory: Optional[Callable] = None
    reduced_midpoint_factory: Optional[Callable] = None

    def __post_init__(self):
        if self.dim_M <= 0 or self.dim_M % 2 != 0:
            raise ConfigurationError(
                f"realization {self.name!r}: dim_M must be even and positive, "
                f"got {self.dim_M}")
        if self.dim_dual <= 0:
            raise ConfigurationError(
                f"realization {self.name!r}: dim_dual must be positive, "
                f"got {self.dim_dual}")


@dataclass(frozen=True)
class HamiltonianSpec:
    """A Hamiltonian ``H`` on ``g*`` with an analytic gradient.

    ``value(t, w)`` and ``gradient(t, w)`` take the time first so that
    driven systems fit the same interface; autonomous entries ignore ``t``.
    ``gradient_scalars``, when present, is an equivalent scalar-arithmetic
    gradient ``(t, w_1, ..., w_m) -> tuple`` used by fused field closures
    on hot paths.  ``hessian_scalars``, when present on a 3-dim dual,
    returns the upper triangle ``(h11, h12, h13, h22, h23, h33)`` of the
    second-derivative matrix of ``H`` in ``w``; reduced stage solvers use
    it to assemble analytic Newton directions.
    """

    value: Callable
    gradient: Callable
    autonomous: bool = True
    name: str = ""
    gradient_scalars: Optional[Callable] = None
    hessian_scalars: Optional[Callable] = None


def split_qp(x: np.ndarray):
    """Split a concatenated phase point into its ``(q, p)`` halves."""
    n = x.shape[0] // 2
    return x[:n], x[n:]


def join_qp(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Concatenate position and momentum halves into a phase point."""
    return np.concatenate([q, p])


def canonical_field_from_gradient(g: np.ndarray) -> np.ndarray:
    """Map a gradient on ``M`` to the canonical Hamiltonian field.

    For ``g = (dH/dq, dH/dp)`` returns ``(dH/dp, -dH/dq)``.
    """
    n = g.shape[0] // 2
    return np.concatenate([g[n:], -g[:n]])


def collective_gradient(r: Realization, h: HamiltonianSpec, t: float,
                        x: np.ndarray) -> np.ndarray:
    """Gradient of the collective Hamiltonian ``H . J`` at ``x``.

    Computed as ``(TJ)^T (grad H)(J(x))`` from the realization's analytic
    momentum-map Jacobian.
    """
    if r.momentum_jacobian is None:
        raise ConfigurationError(
            f"realization {r.name!r} supplies no momentum-map Jacobian")
    w = r.momentum_map(x)
    a = np.asarray(h.gradient(t, w), dtype=float)
    if a.shape != (r.dim_dual,):
        raise ConfigurationError(
            f"gradient dimension {a.shape} does not match dual dimension "
            f"({r.dim_dual},) of realization {r.name!r}")
    return r.momentum_jacobian(x).T @ a


def collective_vector_field(r: Realization, h: HamiltonianSpec, t: float,
                            x: np.ndarray) -> np.ndarray:
    """Evaluate the canonical vector field of ``H . J`` at ``(t, x)``.

    Uses the realization's closed-form generator when available, else the
    canonical flip of the collective gradient.
    """
    x = np.asarray(x, dtype=float)
    if r.generator is not None:
        w = r.momentum_map(x)
        a = np.asarray(h.gradient(t, w), dtype=float)
        if a.shape != (r.dim_dual,):
            raise ConfigurationError(
                f"gradient dimension {a.shape} does not match dual dimension "
                f"({r.dim_dual},) of realization {r.name!r}")
        return r.generator(a, x)
    return canonical_field_from_gradient(collective_gradient(r, h, t, x))


def make_collective_field(r: Realization, h: HamiltonianSpec) -> Callable:
    """Build a field closure ``f(t, x)`` for the integrator driver.

    Prefers the realization's fused factory (a flat scalar-arithmetic
    implementation of the same field) when one is supplied.
    """
    if r.fused_field_factory is not None:
        return r.fused_field_factory(h)
    def field(t, x, _r=r, _h=h):
        return collective_vector_field(_r, _h, t, x)
    return field


def reduce(r: Realization, x: np.ndarray) -> np.ndarray:
    """Project a phase point to the dual: ``w = J(x)``."""
    return r.momentum_map(np.asarray(x, dtype=float))


def lift(r: Realization, w: np.ndarray) -> np.ndarray:
    """Lift a dual element into ``M`` through the realization's section.

    Raises
    ------
    RangeError
        If ``w`` lies outside the range of the momentum map; the message
        names the violated constraint.
    ConfigurationError
        If the dimension of ``w`` is wrong or no lift is available.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (r.dim_dual,):
        raise ConfigurationError(
            f"dual element of shape {w.shape} does not match dual dimension "
            f"({r.dim_dual},) of realization {r.name!r}")
    if r.fiber_lift is None:
        raise ConfigurationError(
            f"realization {r.name!r} supplies no fiber lift")
    return r.fiber_lift(w)
