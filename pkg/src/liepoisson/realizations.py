"""Catalog of concrete symplectic realizations.

Each builder returns a fully populated :class:`~liepoisson.geometry.Realization`
packaging the momentum map, its analytic Jacobian, the infinitesimal
generator of the group action, the group invariants that symplectic
(partitioned) Runge-Kutta methods conserve, the Casimirs of the target
Lie-Poisson structure, a range predicate for the momentum-map image, and a
deterministic fiber lift.

Catalog
-------
``AffineA1``
    The affine group of the line acting on ``T*R`` by cotangent lift;
    ``J(q, p) = (qp, p)``.  The image misses the punctured ``w2 = 0`` axis
    and the orbit closures are polyhedral (the half planes ``p >= 0`` and
    ``p <= 0`` and the stratum ``p = 0``), which small-step symplectic
    methods respect.
``AffineA1Diagonal``
    The same group acting diagonally on ``T*R^2``; ``J = (p.q, p1 + p2)``
    is surjective and the bilinear invariants ``(q2 - q1) p_i`` make
    partitioned methods applicable.
``O3_to_so3``
    Orthogonal group on ``T*R^3``; ``J = q x p`` realizes ``so(3)*`` with
    quadratic invariants ``(q.q, p.p, q.p)`` and Casimir ``|w|^2``.
``SL2_from_O3invariants``
    The complementary action on the same space; ``J = (q.q, p.p, q.p)``
    realizes ``sl(2)*`` on the solid cone ``w1, w2 >= 0``,
    ``w1 w2 - w3^2 >= 0``, with bilinear invariants ``q x p``.
``Hopf_so3``
    The Hopf fibration chart of ``so(3)*`` on ``R^4``: writing
    ``z_i = q_i + i p_i``, ``J = (Re(z1* z2)/2, Im(z1* z2)/2,
    (|z1|^2 - |z2|^2)/4)`` is surjective, with the single quadratic
    invariant ``|z1|^2 + |z2|^2 = 4 |J|``.
``OnSp2k``
    Orthogonal/symplectic pair on ``T*R^(n x k)``: ``J = Q P^T - P Q^T``
    into ``o(n)*`` (side ``o_n``) or ``J = Omega X^T X`` into ``sp(2k)*``
    (side ``sp_2k``), where ``X = (Q, P)``.
``GLnGLk``
    General-linear pair on the same space: ``J = Q P^T`` into ``gl(n)*``
    (side ``gl_n``) or ``J = Q^T P`` into ``gl(k)*`` (side ``gl_k``).
``Landmarks``
    Point-measure discretization of the dual of the vector fields on
    ``R^d``: the phase space of ``n`` landmarks is itself the realization
    (identity momentum map) and the dynamics come from the kernel
    Hamiltonian of :func:`landmark_collective_hamiltonian`.  Total linear
    and angular momentum are the conserved invariants.

Matrix-valued duals are stored dense, row-major flattened, and paired by
the Frobenius inner product.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .geometry import (ConfigurationError, HamiltonianSpec, NamedFunction,
                       RangeError, Realization,
                       canonical_field_from_gradient)

__all__ = [
    "affine_a1",
    "affine_a1_diagonal",
    "o3_to_so3",
    "sl2_from_o3_invariants",
    "hopf_so3",
    "on_sp2k",
    "gln_glk",
    "landmarks",
    "landmark_collective_hamiltonian",
    "pack_matrix_point",
    "unpack_matrix_point",
    "axial_vector",
    "build",
    "REALIZATION_BUILDERS",
]

_RANGE_TOL = 1e-12


# ----------------------------------------------------------------------
# Affine group of the line
# ----------------------------------------------------------------------

def affine_a1() -> Realization:
    """Cotangent action of the affine group on ``T*R``; ``J = (qp, p)``.

    The collective field is ``dq/dt = q H_w1 + H_w2``,
    ``dp/dt = -p H_w1`` (partial derivatives evaluated at ``(qp, p)``).
    The image of ``J`` is the origin plus both open half planes
    ``w2 != 0``, so ``(w1, 0)`` with ``w1 != 0`` is not liftable.  The sign
    of ``p`` is constant along every collective flow.
    """

    def momentum_map(x):
        q, p = x
        return np.array([q * p, p])

    def momentum_jacobian(x):
        q, p = x
        return np.array([[p, q], [0.0, 1.0]])

    def generator(a, x):
        q, p = x
        return np.array([q * a[0] + a[1], -p * a[0]])

    def range_predicate(w):
        return bool(w[1] != 0.0 or w[0] == 0.0)

    def fiber_lift(w):
        w1, w2 = float(w[0]), float(w[1])
        if w2 != 0.0:
            return np.array([w1 / w2, w2])
        if w1 == 0.0:
            return np.zeros(2)
        raise RangeError(
            f"({w1!r}, 0.0) is outside the momentum-map image: w2 = 0 "
            "requires w1 = 0")

    return Realization(
        name="AffineA1", dim_M=2, dim_dual=2,
        momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        range_predicate=range_predicate, partition_compatible=False,
        orthant_coordinates=(1,))


def affine_a1_diagonal() -> Realization:
    """Diagonal affine action on ``T*R^2``; ``J = (p.q, p1 + p2)``.

    Surjective; the bilinear invariants ``I1 = (q2 - q1) p1`` and
    ``I2 = (q2 - q1) p2`` are conserved by partitioned symplectic methods.
    """

    def momentum_map(x):
        q1, q2, p1, p2 = x
        return np.array([q1 * p1 + q2 * p2, p1 + p2])

    def momentum_jacobian(x):
        q1, q2, p1, p2 = x
        return np.array([[p1, p2, q1, q2],
                         [0.0, 0.0, 1.0, 1.0]])

    def generator(a, x):
        q1, q2, p1, p2 = x
        a1, a2 = a
        return np.array([a1 * q1 + a2, a1 * q2 + a2, -a1 * p1, -a1 * p2])

    def fiber_lift(w):
        w1, w2 = float(w[0]), float(w[1])
        if w2 != 0.0:
            return np.array([w1 / w2, 0.0, w2, 0.0])
        return np.array([w1, 0.0, 1.0, -1.0])

    invariants = (
        NamedFunction("I1=(q2-q1)p1",
                      lambda x: (x[1] - x[0]) * x[2]),
        NamedFunction("I2=(q2-q1)p2",
                      lambda x: (x[1] - x[0]) * x[3]),
    )

    return Realization(
        name="AffineA1Diagonal", dim_M=4, dim_dual=2,
        momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, partition_compatible=True)


# ----------------------------------------------------------------------
# O(3) and SL(2) on T*R^3
# ----------------------------------------------------------------------

def _hat(v):
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def o3_to_so3() -> Realization:
    """Orthogonal-group action on ``T*R^3``; ``J = q x p`` onto ``so(3)*``.

    The collective field is ``dq/dt = -q x a``, ``dp/dt = -p x a`` with
    ``a = (grad H)(q x p)``.  Invariants ``(q.q, p.p, q.p)``; Casimir
    ``|w|^2``, whose pullback is ``(q.q)(p.p) - (q.p)^2``.
    """

    def momentum_map(x):
        return np.cross(x[:3], x[3:])

    def momentum_jacobian(x):
        q, p = x[:3], x[3:]
        return np.hstack([-_hat(p), _hat(q)])

    def generator(a, x):
        q, p = x[:3], x[3:]
        return np.concatenate([-np.cross(q, a), -np.cross(p, a)])

    def fiber_lift(w):
        w = np.asarray(w, dtype=float)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return np.zeros(6)
        wh = w / norm
        e = np.zeros(3)
        e[int(np.argmin(np.abs(w)))] = 1.0
        u = e - (e @ wh) * wh
        u /= np.linalg.norm(u)
        scale = math.sqrt(norm)
        return np.concatenate([scale * u, scale * np.cross(wh, u)])

    invariants = (
        NamedFunction("q.q", lambda x: float(x[:3] @ x[:3])),
        NamedFunction("p.p", lambda x: float(x[3:] @ x[3:])),
        NamedFunction("q.p", lambda x: float(x[:3] @ x[3:])),
    )
    casimirs = (
        NamedFunction("|w|^2", lambda w: float(w @ w)),
    )

    return Realization(
        name="O3_to_so3", dim_M=6, dim_dual=3,
        momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, casimirs=casimirs,
        partition_compatible=False)


def sl2_from_o3_invariants() -> Realization:
    """Linear ``SL(2)`` action on ``T*R^3``; ``J = (q.q, p.p, q.p)``.

    Realizes ``sl(2)*`` on the solid cone ``w1 >= 0``, ``w2 >= 0``,
    ``C = w1 w2 - w3^2 >= 0``.  The invariants are the components of
    ``q x p``, bilinear in ``(q, p)``, so leapfrog conserves them; the
    Casimir ``C`` pulls back to ``|q x p|^2``.
    """

    def momentum_map(x):
        q, p = x[:3], x[3:]
        return np.array([q @ q, p @ p, q @ p])

    def momentum_jacobian(x):
        q, p = x[:3], x[3:]
        z = np.zeros(3)
        return np.array([np.concatenate([2.0 * q, z]),
                         np.concatenate([z, 2.0 * p]),
                         np.concatenate([p, q])])

    def generator(a, x):
        q, p = x[:3], x[3:]
        a1, a2, a3 = a
        return np.concatenate([a3 * q + 2.0 * a2 * p,
                               -2.0 * a1 * q - a3 * p])

    def _casimir(w):
        return float(w[0] * w[1] - w[2] * w[2])

    def range_predicate(w):
        slack = _RANGE_TOL * (1.0 + float(np.linalg.norm(w))) ** 2
        return bool(w[0] >= -slack and w[1] >= -slack
                    and _casimir(w) >= -slack)

    def fiber_lift(w):
        w1, w2, w3 = (float(v) for v in w)
        slack = _RANGE_TOL * (1.0 + float(np.linalg.norm(w))) ** 2
        if w1 < -slack:
            raise RangeError(f"w1 = {w1!r} violates w1 >= 0")
        if w2 < -slack:
            raise RangeError(f"w2 = {w2!r} violates w2 >= 0")
        C = w1 * w2 - w3 * w3
        if C < -slack:
            raise RangeError(
                f"w1 w2 - w3^2 = {C!r} violates the cone constraint "
                "w1 w2 - w3^2 >= 0")
        if w1 > slack:
            rq = math.sqrt(w1)
            return np.array([rq, 0.0, 0.0,
                             w3 / rq, math.sqrt(max(C, 0.0) / w1), 0.0])
        if abs(w3) > slack:
            raise RangeError(
                f"w1 = 0 with w3 = {w3!r} violates the cone constraint "
                "(q = 0 forces q.p = 0)")
        return np.array([0.0, 0.0, 0.0, math.sqrt(max(w2, 0.0)), 0.0, 0.0])

    invariants = (
        NamedFunction("(qxp)_1", lambda x: x[1] * x[5] - x[2] * x[4]),
        NamedFunction("(qxp)_2", lambda x: x[2] * x[3] - x[0] * x[5]),
        NamedFunction("(qxp)_3", lambda x: x[0] * x[4] - x[1] * x[3]),
    )
    casimirs = (NamedFunction("w1*w2-w3^2", _casimir),)

    return Realization(
        name="SL2_from_O3invariants", dim_M=6, dim_dual=3,
        momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, casimirs=casimirs,
        range_predicate=range_predicate, partition_compatible=True)


# ----------------------------------------------------------------------
# Hopf fibration chart of so(3)*
# ----------------------------------------------------------------------

def hopf_so3() -> Realization:
    """Hopf-fibration realization of ``so(3)*`` on ``R^4``.

    With ``z1 = q1 + i p1`` and ``z2 = q2 + i p2``,

    ``w1 + i w2 = z1* z2 / 2``, ``w3 = (|z1|^2 - |z2|^2) / 4``,

    all over real coordinates ``x = (q1, q2, p1, p2)``.  ``J`` is onto;
    its fibers are the circle orbits of the phase action
    ``z -> e^{i a} z``, whose single quadratic invariant is
    ``I = |z1|^2 + |z2|^2 = 4 |w|``.  Both ``|w|`` and ``|w|^2`` are
    recorded as Casimirs.
    """

    def momentum_map(x):
        q1, q2, p1, p2 = x
        return np.array([0.5 * (q1 * q2 + p1 * p2),
                         0.5 * (q1 * p2 - p1 * q2),
                         0.25 * (q1 * q1 + p1 * p1 - q2 * q2 - p2 * p2)])

    def momentum_jacobian(x):
        q1, q2, p1, p2 = x
        return np.array([
            [0.5 * q2, 0.5 * q1, 0.5 * p2, 0.5 * p1],
            [0.5 * p2, -0.5 * p1, -0.5 * q2, 0.5 * q1],
            [0.5 * q1, -0.5 * q2, 0.5 * p1, -0.5 * p2],
        ])

    def generator(a, x):
        q1, q2, p1, p2 = x
        a1, a2, a3 = a
        return np.array([
            0.5 * (a1 * p2 - a2 * q2 + a3 * p1),
            0.5 * (a1 * p1 + a2 * q1 - a3 * p2),
            -0.5 * (a1 * q2 + a2 * p2 + a3 * q1),
            0.5 * (-a1 * q1 + a2 * p1 + a3 * q2),
        ])

    def fiber_lift(w):
        w1, w2, w3 = (float(v) for v in w)
        norm = math.sqrt(w1 * w1 + w2 * w2 + w3 * w3)
        if norm == 0.0:
            return np.zeros(4)
        if w3 >= 0.0:
            z1 = math.sqrt(2.0 * (norm + w3))
            return np.array([z1, 2.0 * w1 / z1, 0.0, 2.0 * w2 / z1])
        z2 = math.sqrt(2.0 * (norm - w3))
        return np.array([2.0 * w1 / z2, z2, -2.0 * w2 / z2, 0.0])

    def fused_field_factory(h):
        grad_s = h.gradient_scalars
        if grad_s is not None:
            def fused(t, x, _g=grad_s):
                q1 = float(x[0]); q2 = float(x[1])
                p1 = float(x[2]); p2 = float(x[3])
                w1 = 0.5 * (q1 * q2 + p1 * p2)
                w2 = 0.5 * (q1 * p2 - p1 * q2)
                w3 = 0.25 * (q1 * q1 + p1 * p1 - q2 * q2 - p2 * p2)
                a1, a2, a3 = _g(t, w1, w2, w3)
                return np.array([
                    0.5 * (a1 * p2 - a2 * q2 + a3 * p1),
                    0.5 * (a1 * p1 + a2 * q1 - a3 * p2),
                    -0.5 * (a1 * q2 + a2 * p2 + a3 * q1),
                    0.5 * (-a1 * q1 + a2 * p1 + a3 * q2),
                ])
            return fused
        grad = h.gradient

        def fused_arr(t, x, _g=grad):
            w = momentum_map(x)
            a = _g(t, w)
            return generator(a, x)
        return fused_arr

    def reduced_midpoint_factory(h):
        # The generator is quaternionic: G(a)^2 = -(|a|^2/4) I, so the
        # midpoint stage equation Y = x + eta G(a) Y has the closed-form
        # solution Y = (x + eta G(a) x) / (1 + eta^2 |a|^2 / 4) once the
        # algebra element a is known.  The stage solve therefore reduces
        # to a 3-dimensional root find for a = grad H(J(Y(a))), and the
        # phase-space stage residual is exactly (|eta|/2) |a - b| |Y|
        # because G(c) has all singular values equal to |c|/2.
        #
        # In the complex chart z1 = q1 + i p1, z2 = q2 + i p2 the
        # generator acts as z -> Q(a) z with
        #     Q(a) = -(i/2) [[a3, a1 - i a2], [a1 + i a2, -a3]],
        # the momentum map reads w1 + i w2 = conj(z1) z2 / 2 and
        # w3 = (|z1|^2 - |z2|^2) / 4, and |Y|^2 = |x|^2 / den, so a
        # residual evaluation costs roughly half the scalar operations
        # of the real form.
        grad_s = h.gradient_scalars
        if grad_s is None:
            return None
        hess_s = h.hessian_scalars
        sqrt_eps = math.sqrt(np.finfo(float).eps)

        def solve(t_mid, eta, x, a_warm, tol, _g=grad_s, _h=hess_s,
                  _sqrt=math.sqrt):
            z1 = complex(float(x[0]), float(x[2]))
            z2 = complex(float(x[1]), float(x[3]))
            quarter_eta2 = 0.25 * eta * eta
            # Q(a) z is linear in a: Q(a) z = a1 B1 + a2 B2 + a3 B3.
            b11 = -0.5j * z2; b12 = -0.5j * z1
            b21 = -0.5 * z2;  b22 = 0.5 * z1
            b31 = -0.5j * z1; b32 = 0.5j * z2
            b11c = 0.5j * z2.conjugate()
            b21c = -0.5 * z2.conjugate()
            b31c = 0.5j * z1.conjugate()
            xnorm2 = (z1.real * z1.real + z1.imag * z1.imag
                      + z2.real * z2.real + z2.imag * z2.imag)
            res_scale = quarter_eta2 * xnorm2
            bound = tol * (1.0 + _sqrt(xnorm2))
            bound2 = bound * bound

            def phi_c(a1, a2, a3):
                q1v = a1 * b11 + a2 * b21 + a3 * b31
                q2v = a1 * b12 + a2 * b22 + a3 * b32
                dinv = 1.0 / (1.0 + quarter_eta2
                              * (a1 * a1 + a2 * a2 + a3 * a3))
                y1 = (z1 + eta * q1v) * dinv
                y2 = (z2 + eta * q2v) * dinv
                u = 0.5 * y1.conjugate() * y2
                w3 = 0.25 * (y1.real * y1.real + y1.imag * y1.imag
                             - y2.real * y2.real - y2.imag * y2.imag)
                c1, c2, c3 = _g(t_mid, u.real, u.imag, w3)
                return (a1 - c1, a2 - c2, a3 - c3, y1, y2,
                        u.real, u.imag, w3, dinv)

            def run(a1, a2, a3, max_iters):
                # Damped Newton on phi, solved by Cramer's rule.  The
                # Jacobian I - Hess(H) dJ(Y)/da is assembled analytically
                # when the Hamiltonian carries second derivatives and by
                # finite differences otherwise, so a typical iteration
                # costs one phi evaluation plus the assembly.  A rejected
                # direction ends the run.
                f1, f2, f3, y1, y2, w1, w2, w3, dinv = phi_c(a1, a2, a3)
                nrm2 = f1 * f1 + f2 * f2 + f3 * f3
                it = 0
                while it < max_iters:
                    it += 1
                    res2 = res_scale * nrm2 * dinv
                    if res2 <= bound2:
                        return y1, y2, a1, a2, a3, it, _sqrt(res2), True
                    if _h is not None:
                        # dY/da_j = (eta B_j - (eta^2 a_j / 2) Y) / den,
                        # and dw/dY . Y = 2 w since J is quadratic, so
                        # dw/da = (eta P - eta^2 w a^T) / den with
                        # P[:, j] = dw/dY . B_j, and the Newton matrix is
                        # I - (eta/den) Hess P + (eta^2/den) (Hess w) a^T.
                        y1c = y1.conjugate(); y2c = y2.conjugate()
                        p1 = 0.5 * (b11c * y2 + y1c * b12)
                        p2 = 0.5 * (b21c * y2 + y1c * b22)
                        p3 = 0.5 * (b31c * y2 + y1c * b32)
                        q1 = 0.5 * ((y1c * b11).real - (y2c * b12).real)
                        q2 = 0.5 * ((y1c * b21).real - (y2c * b22).real)
                        q3 = 0.5 * ((y1c * b31).real - (y2c * b32).real)
                        u11 = p1.real; u12 = p2.real; u13 = p3.real
                        u21 = p1.imag; u22 = p2.imag; u23 = p3.imag
                        h11, h12, h13, h22, h23, h33 = _h(t_mid, w1, w2, w3)
                        he = eta * dinv
                        ea = 4.0 * quarter_eta2 * dinv
                        v1 = ea * (h11 * w1 + h12 * w2 + h13 * w3)
                        v2 = ea * (h12 * w1 + h22 * w2 + h23 * w3)
                        v3 = ea * (h13 * w1 + h23 * w2 + h33 * w3)
                        j11 = 1.0 - he * (h11 * u11 + h12 * u21
                                          + h13 * q1) + v1 * a1
                        j12 = -he * (h11 * u12 + h12 * u22
                                     + h13 * q2) + v1 * a2
                        j13 = -he * (h11 * u13 + h12 * u23
                                     + h13 * q3) + v1 * a3
                        j21 = -he * (h12 * u11 + h22 * u21
                                     + h23 * q1) + v2 * a1
                        j22 = 1.0 - he * (h12 * u12 + h22 * u22
                                          + h23 * q2) + v2 * a2
                        j23 = -he * (h12 * u13 + h22 * u23
                                     + h23 * q3) + v2 * a3
                        j31 = -he * (h13 * u11 + h23 * u21
                                     + h33 * q1) + v3 * a1
                        j32 = -he * (h13 * u12 + h23 * u22
                                     + h33 * q2) + v3 * a2
                        j33 = 1.0 - he * (h13 * u13 + h23 * u23
                                          + h33 * q3) + v3 * a3
                    else:
                        eps = sqrt_eps * (1.0 + max(abs(a1), abs(a2),
                                                    abs(a3)))
                        d1 = phi_c(a1 + eps, a2, a3)
                        d2 = phi_c(a1, a2 + eps, a3)
                        d3 = phi_c(a1, a2, a3 + eps)
                        inv_eps = 1.0 / eps
                        j11 = (d1[0] - f1) * inv_eps
                        j21 = (d1[1] - f2) * inv_eps
                        j31 = (d1[2] - f3) * inv_eps
                        j12 = (d2[0] - f1) * inv_eps
                        j22 = (d2[1] - f2) * inv_eps
                        j32 = (d2[2] - f3) * inv_eps
                        j13 = (d3[0] - f1) * inv_eps
                        j23 = (d3[1] - f2) * inv_eps
                        j33 = (d3[2] - f3) * inv_eps
                    c11 = j22 * j33 - j23 * j32
                    c12 = j21 * j33 - j23 * j31
                    c13 = j21 * j32 - j22 * j31
                    det = j11 * c11 - j12 * c12 + j13 * c13
                    if not abs(det) > 1e-300:
                        return (y1, y2, a1, a2, a3, it,
                                _sqrt(res_scale * nrm2 * dinv), False)
                    inv_det = 1.0 / det
                    r1 = -f1; r2 = -f2; r3 = -f3
                    s1 = (r1 * c11 - j12 * (r2 * j33 - j23 * r3)
                          + j13 * (r2 * j32 - j22 * r3)) * inv_det
                    s2 = (j11 * (r2 * j33 - j23 * r3) - r1 * c12
                          + j13 * (j21 * r3 - r2 * j31)) * inv_det
                    s3 = (j11 * (j22 * r3 - r2 * j32)
                          - j12 * (j21 * r3 - r2 * j31) + r1 * c13) * inv_det
                    step = 1.0
                    accepted = False
                    for _ in range(10):
                        t1 = a1 + step * s1
                        t2 = a2 + step * s2
                        t3 = a3 + step * s3
                        nxt = phi_c(t1, t2, t3)
                        n1 = nxt[0]; n2 = nxt[1]; n3 = nxt[2]
                        nn = n1 * n1 + n2 * n2 + n3 * n3
                        if nn < nrm2:
                            a1 = t1; a2 = t2; a3 = t3
                            (f1, f2, f3, y1, y2,
                             w1, w2, w3, dinv) = nxt
                            nrm2 = nn
                            accepted = True
                            break
                        step *= 0.5
                    if not accepted:
                        return (y1, y2, a1, a2, a3, it,
                                _sqrt(res_scale * nrm2 * dinv), False)
                return (y1, y2, a1, a2, a3, max_iters,
                        _sqrt(res_scale * nrm2 * dinv), False)

            def finish(out, total):
                # Reflection update; the float casts keep later steps in
                # plain Python floats even after a multistart rescue
                # hands back numpy scalars.
                x1 = 2.0 * out[0] - z1
                x2 = 2.0 * out[1] - z2
                return ((float(x1.real), float(x2.real),
                         float(x1.imag), float(x2.imag)),
                        (float(out[2]), float(out[3]), float(out[4])),
                        total, float(out[6]), True)

            # Try the caller's extrapolated warm start first (short leash),
            # then the gradient at the base point, then seeded multistart.
            total = 0
            if a_warm is not None:
                out = run(a_warm[0], a_warm[1], a_warm[2], 12)
                total = out[5]
                if out[7]:
                    return finish(out, total)
            u0 = 0.5 * z1.conjugate() * z2
            w30 = 0.25 * (z1.real * z1.real + z1.imag * z1.imag
                          - z2.real * z2.real - z2.imag * z2.imag)
            b1, b2, b3 = _g(t_mid, u0.real, u0.imag, w30)
            a_cold = (float(b1), float(b2), float(b3))
            out = run(a_cold[0], a_cold[1], a_cold[2], 40)
            total += out[5]
            if out[7]:
                return finish(out, total)
            # Damped Newton can stall in a local minimum of |phi| that is
            # not a root even though one always exists (the map
            # a -> grad H(J(Y(a))) sends a bounded ball continuously into
            # itself, so it has a fixed point).  Deterministic seeded
            # multistart recovers these rare hard steps.
            rng = np.random.default_rng(0)
            scale = 1.0 + math.sqrt(a_cold[0] ** 2 + a_cold[1] ** 2
                                    + a_cold[2] ** 2)
            best = out
            for k in range(20):
                radius = scale * (0.5 + k / 20.0)
                trial = rng.normal(0.0, 1.0, 3) * radius
                out = run(float(trial[0]), float(trial[1]),
                          float(trial[2]), 40)
                total += out[5]
                if out[7]:
                    return finish(out, total)
                if out[6] < best[6]:
                    best = out
            return None, None, total, float(best[6]), False

        return solve

    invariants = (
        NamedFunction("|z1|^2+|z2|^2", lambda x: float(x @ x)),
    )
    casimirs = (
        NamedFunction("|w|", lambda w: float(np.linalg.norm(w))),
        NamedFunction("|w|^2", lambda w: float(w @ w)),
    )

    return Realization(
        name="Hopf_so3", dim_M=4, dim_dual=3,
        momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, casimirs=casimirs,
        partition_compatible=False, fused_field_factory=fused_field_factory,
        reduced_midpoint_factory=reduced_midpoint_factory)


# ----------------------------------------------------------------------
# Matrix dual pairs on T*R^(n x k)
# ----------------------------------------------------------------------

def pack_matrix_point(Q: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Flatten a matrix phase point ``(Q, P)`` into a concatenated vector."""
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    if Q.shape != P.shape:
        raise ConfigurationError(
            f"Q and P must have equal shapes, got {Q.shape} and {P.shape}")
    return np.concatenate([Q.ravel(), P.ravel()])


def unpack_matrix_point(x: np.ndarray, n: int, k: int):
    """Recover ``(Q, P)`` with shape ``(n, k)`` from a flat phase point."""
    nk = n * k
    return x[:nk].reshape(n, k), x[nk:].reshape(n, k)


def axial_vector(W: np.ndarray) -> np.ndarray:
    """Axial vector ``(W_32, W_13, W_21)`` of an antisymmetric 3x3 matrix,
    chosen so that the axial vector of ``q p^T - p q^T`` is ``q x p``."""
    return np.array([W[2, 1], W[0, 2], W[1, 0]])


def _symplectic_block(k: int) -> np.ndarray:
    O = np.zeros((2 * k, 2 * k))
    O[:k, k:] = np.eye(k)
    O[k:, :k] = -np.eye(k)
    return O


def _trace_power_casimirs(m: int, powers) -> tuple:
    out = []
    for i in powers:
        def fn(w, _i=i, _m=m):
            W = np.asarray(w, dtype=float).reshape(_m, _m)
            return float(np.trace(np.linalg.matrix_power(W, _i)))
        out.append(NamedFunction(f"tr(W^{i})", fn))
    return tuple(out)


def _rank_from_singular_values(sv, tol_scale):
    return int(np.sum(sv > _RANGE_TOL * (1.0 + tol_scale)))


def on_sp2k(n: int, k: int, side: str = "o_n") -> Realization:
    """Orthogonal/symplectic dual pair on ``T*R^(n x k)``.

    ``X = (Q, P)`` is an ``n x 2k`` matrix.  Side ``o_n`` reduces by the
    orthogonal action ``X -> AX`` with ``J = Q P^T - P Q^T`` (antisymmetric,
    rank at most ``min(2k, n)``); its conserved invariants are the entries
    of ``X^T X`` and the Casimirs are the even trace powers of ``W``.
    Side ``sp_2k`` reduces by ``X -> X B^T`` with ``J = Omega X^T X``
    (range: ``-Omega W`` symmetric positive semidefinite of rank at most
    ``min(2k, n)``); its invariants are the entries of ``Q P^T - P Q^T``,
    bilinear in ``(q, p)``.
    """
    if not (isinstance(n, int) and n >= 1):
        raise ConfigurationError(f"n must be a positive integer, got {n!r}")
    if not (isinstance(k, int) and k >= 1):
        raise ConfigurationError(f"k must be a positive integer, got {k!r}")
    if side not in ("o_n", "sp_2k"):
        raise ConfigurationError(
            f"side must be 'o_n' or 'sp_2k', got {side!r}")
    nk = n * k
    dim_M = 2 * nk
    Omega = _symplectic_block(k)

    def _X(x):
        Q, P = unpack_matrix_point(x, n, k)
        return np.hstack([Q, P])

    if side == "o_n":
        dim_dual = n * n

        def momentum_map(x):
            Q, P = unpack_matrix_point(x, n, k)
            return (Q @ P.T - P @ Q.T).ravel()

        def momentum_jacobian(x):
            Q, P = unpack_matrix_point(x, n, k)
            I = np.eye(n)
            JQ = (np.einsum("ai,bc->abic", I, P)
                  - np.einsum("ac,bi->abic", P, I))
            JP = (np.einsum("ac,bi->abic", Q, I)
                  - np.einsum("ai,bc->abic", I, Q))
            return np.concatenate(
                [JQ.reshape(n * n, nk), JP.reshape(n * n, nk)], axis=1)

        def generator(a, x):
            Q, P = unpack_matrix_point(x, n, k)
            G = np.asarray(a, dtype=float).reshape(n, n)
            b = G.T - G
            return pack_matrix_point(b @ Q, b @ P)

        def range_predicate(w):
            W = np.asarray(w, dtype=float).reshape(n, n)
            scale = float(np.abs(W).max())
            if float(np.abs(W + W.T).max()) > _RANGE_TOL * (1.0 + scale):
                return False
            sv = np.linalg.svd(W, compute_uv=False)
            return _rank_from_singular_values(sv, scale) <= min(2 * k, n)

        def fiber_lift(w):
            W = np.asarray(w, dtype=float).reshape(n, n)
            scale = float(np.abs(W).max())
            asym = float(np.abs(W + W.T).max())
            if asym > _RANGE_TOL * (1.0 + scale):
                raise RangeError(
                    f"|W + W^T| = {asym!r} violates antisymmetry of o({n})*")
            vals, vecs = np.linalg.eigh(1j * W)
            order = np.argsort(vals)[::-1]
            vals, vecs = vals[order], vecs[:, order]
            tol = _RANGE_TOL * (1.0 + scale)
            pos = [j for j in range(n) if vals[j] > tol]
            if len(pos) > k:
                raise RangeError(
                    f"rank {2 * len(pos)} exceeds the momentum-map image "
                    f"bound rank <= {min(2 * k, n)} = min(2k, n)")
            Q = np.zeros((n, k))
            P = np.zeros((n, k))
            for col, j in enumerate(pos):
                beta = math.sqrt(2.0 * float(vals[j]))
                v = vecs[:, j]
                Q[:, col] = beta * v.imag
                P[:, col] = beta * v.real
            return pack_matrix_point(Q, P)

        def _invariant(i, j):
            def fn(x, _i=i, _j=j):
                X = _X(x)
                return float(X[:, _i] @ X[:, _j])
            return NamedFunction(f"(XtX)_{i + 1}{j + 1}", fn)

        invariants = tuple(_invariant(i, j)
                           for i in range(2 * k) for j in range(i, 2 * k))
        casimirs = _trace_power_casimirs(
            n, [2 * i for i in range(1, n // 2 + 1)])
        partition_compatible = False
    else:
        dim_dual = 4 * k * k

        def momentum_map(x):
            X = _X(x)
            return (Omega @ X.T @ X).ravel()

        def momentum_jacobian(x):
            X = _X(x)
            I2k = np.eye(2 * k)
            # d(Omega X^T X)_ab / dX_ie = Omega_ae X_ib + delta_eb (X Omega^T)_ia
            JX = (np.einsum("ae,ib->abie", Omega, X)
                  + np.einsum("eb,ia->abie", I2k, X @ Omega.T))
            # X columns: e < k -> Q[:, e]; e >= k -> P[:, e - k]
            JX = JX.reshape(4 * k * k, n, 2 * k)
            JQ = JX[:, :, :k].reshape(4 * k * k, nk)
            JP = JX[:, :, k:].reshape(4 * k * k, nk)
            return np.concatenate([JQ, JP], axis=1)

        def generator(a, x):
            X = _X(x)
            G = np.asarray(a, dtype=float).reshape(2 * k, 2 * k)
            E = G.T + Omega @ G @ Omega
            XE = X @ E
            return pack_matrix_point(XE[:, :k], XE[:, k:])

        def _sym_part(w):
            W = np.asarray(w, dtype=float).reshape(2 * k, 2 * k)
            return -Omega @ W

        def range_predicate(w):
            S = _sym_part(w)
            scale = float(np.abs(S).max())
            if float(np.abs(S - S.T).max()) > _RANGE_TOL * (1.0 + scale):
                return False
            vals = np.linalg.eigvalsh(S)
            if vals[0] < -_RANGE_TOL * (1.0 + scale):
                return False
            rank = int(np.sum(vals > _RANGE_TOL * (1.0 + scale)))
            return rank <= min(2 * k, n)

        def fiber_lift(w):
            S = _sym_part(w)
            scale = float(np.abs(S).max())
            asym = float(np.abs(S - S.T).max())
            if asym > _RANGE_TOL * (1.0 + scale):
                raise RangeError(
                    f"|S - S^T| = {asym!r} violates symmetry of "
                    "-Omega W for sp(2k)*")
            vals, vecs = np.linalg.eigh(S)
            order = np.argsort(vals)[::-1]
            vals, vecs = vals[order], vecs[:, order]
            tol = _RANGE_TOL * (1.0 + scale)
            if float(vals[-1]) < -tol:
                raise RangeError(
                    f"eigenvalue {float(vals[-1])!r} violates positive "
                    "semidefiniteness of -Omega W")
            rank = int(np.sum(vals > tol))
            if rank > min(2 * k, n):
                raise RangeError(
                    f"rank {rank} exceeds the momentum-map image bound "
                    f"rank <= {min(2 * k, n)} = min(2k, n)")
            X = np.zeros((n, 2 * k))
            for i in range(rank):
                X[i, :] = math.sqrt(float(vals[i])) * vecs[:, i]
            return pack_matrix_point(X[:, :k], X[:, k:])

        def _invariant(i, j):
            def fn(x, _i=i, _j=j):
                Q, P = unpack_matrix_point(x, n, k)
                return float(Q[_i] @ P[_j] - P[_i] @ Q[_j])
            return NamedFunction(f"(QPt-PQt)_{i + 1}{j + 1}", fn)

        invariants = tuple(_invariant(i, j)
                           for i in range(n) for j in range(i + 1, n))
        casimirs = _trace_power_casimirs(
            2 * k, [2 * i for i in range(1, k + 1)])
        partition_compatible = True

    return Realization(
        name=f"OnSp2k(n={n},k={k},side={side})", dim_M=dim_M,
        dim_dual=dim_dual, momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, casimirs=casimirs,
        range_predicate=range_predicate,
        partition_compatible=partition_compatible)


def gln_glk(n: int, k: int, side: str = "gl_n") -> Realization:
    """General-linear dual pair on ``T*R^(n x k)``.

    Side ``gl_n``: action ``(Q, P) -> (AQ, A^-T P)`` with ``J = Q P^T``;
    conserved invariants are the entries of ``Q^T P`` (bilinear) and the
    Casimirs are ``tr W^i`` for ``i = 1..n``.  Side ``gl_k``: action
    ``(Q, P) -> (Q B^T, P B^-1)`` with ``J = Q^T P``, invariants the
    entries of ``Q P^T``, Casimirs ``tr W^i`` for ``i = 1..k``.  Either
    image is the set of matrices of rank at most ``min(n, k)``.
    """
    if not (isinstance(n, int) and n >= 1):
        raise ConfigurationError(f"n must be a positive integer, got {n!r}")
    if not (isinstance(k, int) and k >= 1):
        raise ConfigurationError(f"k must be a positive integer, got {k!r}")
    if side not in ("gl_n", "gl_k"):
        raise ConfigurationError(
            f"side must be 'gl_n' or 'gl_k', got {side!r}")
    nk = n * k
    dim_M = 2 * nk
    m = n if side == "gl_n" else k

    def momentum_map(x):
        Q, P = unpack_matrix_point(x, n, k)
        W = Q @ P.T if side == "gl_n" else Q.T @ P
        return W.ravel()

    def momentum_jacobian(x):
        Q, P = unpack_matrix_point(x, n, k)
        if side == "gl_n":
            # (Q P^T)_ab: d/dQ_ic = delta_ai P_bc, d/dP_ic = Q_ac delta_bi
            I = np.eye(n)
            JQ = np.einsum("ai,bc->abic", I, P)
            JP = np.einsum("ac,bi->abic", Q, I)
        else:
            # (Q^T P)_ab: d/dQ_ic = delta_ac P_ib, d/dP_ic = Q_ia delta_bc
            I = np.eye(k)
            JQ = np.einsum("ac,ib->abic", I, P)
            JP = np.einsum("ia,bc->abic", Q, I)
        return np.concatenate(
            [JQ.reshape(m * m, nk), JP.reshape(m * m, nk)], axis=1)

    def generator(a, x):
        Q, P = unpack_matrix_point(x, n, k)
        G = np.asarray(a, dtype=float).reshape(m, m)
        if side == "gl_n":
            return pack_matrix_point(G.T @ Q, -G @ P)
        return pack_matrix_point(Q @ G, -P @ G.T)

    def range_predicate(w):
        W = np.asarray(w, dtype=float).reshape(m, m)
        sv = np.linalg.svd(W, compute_uv=False)
        return _rank_from_singular_values(sv, float(np.abs(W).max())) \
            <= min(n, k)

    def fiber_lift(w):
        W = np.asarray(w, dtype=float).reshape(m, m)
        U, sv, Vt = np.linalg.svd(W)
        scale = float(sv[0]) if sv.size else 0.0
        rank = int(np.sum(sv > _RANGE_TOL * (1.0 + scale)))
        if rank > min(n, k):
            raise RangeError(
                f"rank {rank} exceeds the momentum-map image bound "
                f"rank <= {min(n, k)} = min(n, k)")
        Q = np.zeros((n, k))
        P = np.zeros((n, k))
        for i in range(rank):
            root = math.sqrt(float(sv[i]))
            if side == "gl_n":
                Q[:, i] = root * U[:, i]
                P[:, i] = root * Vt[i, :]
            else:
                Q[i, :] = root * U[:, i]
                P[i, :] = root * Vt[i, :]
        return pack_matrix_point(Q, P)

    if side == "gl_n":
        def _invariant(i, j):
            def fn(x, _i=i, _j=j):
                Q, P = unpack_matrix_point(x, n, k)
                return float(Q[:, _i] @ P[:, _j])
            return NamedFunction(f"(QtP)_{i + 1}{j + 1}", fn)
        invariants = tuple(_invariant(i, j)
                           for i in range(k) for j in range(k))
    else:
        def _invariant(i, j):
            def fn(x, _i=i, _j=j):
                Q, P = unpack_matrix_point(x, n, k)
                return float(Q[_i] @ P[_j])
            return NamedFunction(f"(QPt)_{i + 1}{j + 1}", fn)
        invariants = tuple(_invariant(i, j)
                           for i in range(n) for j in range(n))

    casimirs = _trace_power_casimirs(m, range(1, m + 1))

    return Realization(
        name=f"GLnGLk(n={n},k={k},side={side})", dim_M=dim_M,
        dim_dual=m * m, momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=invariants, casimirs=casimirs,
        range_predicate=range_predicate, partition_compatible=True)


# ----------------------------------------------------------------------
# Landmarks
# ----------------------------------------------------------------------

def landmarks(d: int, n_landmarks: int, kernel_width: float) -> Realization:
    """Landmark phase space as a self-realization (identity momentum map).

    ``n`` landmarks in ``R^d`` carry positions ``q_i`` and momenta ``p_i``,
    stored as ``x = (q_1, ..., q_n, p_1, ..., p_n)`` componentwise.  The
    realized dual is the space itself; dynamics come from the kernel
    Hamiltonian of :func:`landmark_collective_hamiltonian`, which is
    translation and rotation invariant, so total linear momentum and total
    angular momentum are conserved invariants (the latter bilinear).
    """
    if d not in (2, 3):
        raise ConfigurationError(f"d must be 2 or 3, got {d!r}")
    if not (isinstance(n_landmarks, int) and n_landmarks >= 1):
        raise ConfigurationError(
            f"n_landmarks must be a positive integer, got {n_landmarks!r}")
    if not (kernel_width > 0):
        raise ConfigurationError(
            f"kernel_width must be positive, got {kernel_width!r}")
    n = n_landmarks
    dim = 2 * d * n

    def momentum_map(x):
        return np.array(x, dtype=float)

    def momentum_jacobian(x):
        return np.eye(dim)

    def generator(a, x):
        return canonical_field_from_gradient(np.asarray(a, dtype=float))

    def fiber_lift(w):
        return np.array(w, dtype=float)

    invariants = []
    for c in range(d):
        def lin(x, _c=c):
            return float(np.sum(x[d * n + _c::d][:n]))
        invariants.append(NamedFunction(f"sum_p_{c + 1}", lin))
    if d == 2:
        def ang(x):
            q = x[:2 * n].reshape(n, 2)
            p = x[2 * n:].reshape(n, 2)
            return float(np.sum(q[:, 0] * p[:, 1] - q[:, 1] * p[:, 0]))
        invariants.append(NamedFunction("sum_qxp", ang))
    else:
        for c in range(3):
            def ang(x, _c=c):
                q = x[:3 * n].reshape(n, 3)
                p = x[3 * n:].reshape(n, 3)
                return float(np.sum(np.cross(q, p)[:, _c]))
            invariants.append(NamedFunction(f"sum_qxp_{c + 1}", ang))

    return Realization(
        name=f"Landmarks(d={d},n={n},width={kernel_width})", dim_M=dim,
        dim_dual=dim, momentum_map=momentum_map, generator=generator,
        fiber_lift=fiber_lift, momentum_jacobian=momentum_jacobian,
        quadratic_invariants=tuple(invariants), partition_compatible=True)


def landmark_collective_hamiltonian(d: int, n_landmarks: int,
                                    kernel_width: float) -> HamiltonianSpec:
    """Gaussian-kernel landmark Hamiltonian
    ``H = (1/2) sum_ij (p_i . p_j) exp(-|q_i - q_j|^2 / (2 sigma^2))``.

    The gradient is analytic:
    ``dH/dp_l = sum_j K_lj p_j`` and
    ``dH/dq_l = -(1/sigma^2) sum_j (p_l . p_j) K_lj (q_l - q_j)``.
    """
    if d not in (2, 3):
        raise ConfigurationError(f"d must be 2 or 3, got {d!r}")
    n = n_landmarks
    sigma2 = float(kernel_width) ** 2

    def _parts(w):
        q = w[:d * n].reshape(n, d)
        p = w[d * n:].reshape(n, d)
        diff = q[:, None, :] - q[None, :, :]
        K = np.exp(-np.einsum("ijc,ijc->ij", diff, diff) / (2.0 * sigma2))
        G = p @ p.T
        return q, p, diff, K, G

    def value(t, w):
        _, _, _, K, G = _parts(np.asarray(w, dtype=float))
        return 0.5 * float(np.sum(G * K))

    def gradient(t, w):
        _, p, diff, K, G = _parts(np.asarray(w, dtype=float))
        dq = -np.einsum("lj,ljc->lc", G * K, diff) / sigma2
        dp = K @ p
        return np.concatenate([dq.ravel(), dp.ravel()])

    return HamiltonianSpec(
        value=value, gradient=gradient, autonomous=True,
        name=f"landmark_gaussian(d={d},n={n},sigma={kernel_width})")


# ----------------------------------------------------------------------
# Registry
# ----------------------------------------------------------------------

def _build_on_sp2k(**params):
    return on_sp2k(params.pop("n"), params.pop("k"),
                   params.pop("side", "o_n"))


def _build_gln_glk(**params):
    return gln_glk(params.pop("n"), params.pop("k"),
                   params.pop("side", "gl_n"))


def _build_landmarks(**params):
    return landmarks(params.pop("d"), params.pop("n_landmarks"),
                     params.pop("kernel_width"))


REALIZATION_BUILDERS = {
    "AffineA1": lambda **p: affine_a1(),
    "AffineA1Diagonal": lambda **p: affine_a1_diagonal(),
    "O3_to_so3": lambda **p: o3_to_so3(),
    "SL2_from_O3invariants": lambda **p: sl2_from_o3_invariants(),
    "Hopf_so3": lambda **p: hopf_so3(),
    "OnSp2k": _build_on_sp2k,
    "GLnGLk": _build_gln_glk,
    "Landmarks": _build_landmarks,
}

_PARAMETER_NAMES = {
    "AffineA1": (), "AffineA1Diagonal": (), "O3_to_so3": (),
    "SL2_from_O3invariants": (), "Hopf_so3": (),
    "OnSp2k": ("n", "k", "side"), "GLnGLk": ("n", "k", "side"),
    "Landmarks": ("d", "n_landmarks", "kernel_width"),
}


def build(id: str, **params) -> Realization:
    """Build a catalog realization from its identifier and parameters.

    Examples: ``build("Hopf_so3")``,
    ``build("OnSp2k", n=3, k=1, side="o_n")``,
    ``build("Landmarks", d=2, n_landmarks=3, kernel_width=1.0)``.
    """
    if id not in REALIZATION_BUILDERS:
        raise ConfigurationError(
            f"unknown realization id {id!r}; known ids: "
            + ", ".join(sorted(REALIZATION_BUILDERS)))
    allowed = set(_PARAMETER_NAMES[id])
    extra = set(params) - allowed
    if extra:
        raise ConfigurationError(
            f"realization {id!r} does not accept parameter(s) "
            f"{sorted(extra)}; allowed: {sorted(allowed) or 'none'}")
    required = allowed - {"side"}
    missing = required - set(params)
    if missing:
        raise ConfigurationError(
            f"realization {id!r} requires parameter(s) {sorted(missing)}")
    try:
        return REALIZATION_BUILDERS[id](**params)
    except TypeError as err:
        raise ConfigurationError(
            f"bad parameters for realization {id!r}: {err}") from None
