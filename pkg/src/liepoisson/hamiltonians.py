"""Catalog of Hamiltonians on Lie-Poisson duals.

Every entry carries an analytic gradient; entries on three-dimensional
duals also supply a scalar-tuple gradient (``gradient_scalars``) that
fused collective fields use to avoid array overhead in tight loops, and
an analytic second-derivative triangle (``hessian_scalars``) that
reduced stage solvers use for Newton directions.

Catalog
-------
``rigid_body(a1, a2, a3)``
    ``H = a1 w1^2 + a2 w2^2 + a3 w3^2`` on a 3-dimensional dual.
``sl2_fig1``
    ``H = w1 + w1^2/2 + w2/2``, the quartic-well system on ``sl(2)*``
    used by the ``fig1_top`` and ``fig1_middle`` experiments.
``trig_sum(k)``
    ``H = sum_i cos(k w_i)``.
``trig_product(k)``
    ``H = prod_i sin(k w_i)``.
``driven_trig(k, epsilon)``
    ``H = prod_i sin(k w_i) + epsilon w1 sin^2 t`` (nonautonomous;
    requires a 3-dimensional dual).
``central_force(potential)``
    ``H = w2/2 + V(w1)`` on ``sl(2)*`` where ``V`` is the polynomial
    with the given ascending coefficients; the pullback through
    ``J = (q.q, p.p, q.p)`` is the central-force energy
    ``|p|^2/2 + V(|q|^2)``.
``quadratic_matrix_trace(weights)``
    ``H = (1/2) sum_l c_l w_l^2``, i.e. a weighted squared Frobenius
    norm of a matrix dual; ``weights`` is a scalar or one value per
    dual coordinate.
``custom_polynomial(terms)``
    ``H = sum_t c_t prod_i w_i^(e_ti)`` from a list of
    ``[coefficient, [exponents...]]`` terms.

The catalog is deliberately closed (polynomial and trigonometric forms
with hand-checked gradients); there is no expression parser.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .geometry import ConfigurationError, HamiltonianSpec

__all__ = [
    "rigid_body",
    "sl2_fig1",
    "trig_sum",
    "trig_product",
    "driven_trig",
    "central_force",
    "quadratic_matrix_trace",
    "custom_polynomial",
    "build_hamiltonian",
    "HAMILTONIAN_NAMES",
]


def rigid_body(a1: float, a2: float, a3: float) -> HamiltonianSpec:
    """``H = a1 w1^2 + a2 w2^2 + a3 w3^2`` on a 3-dimensional dual."""
    coeffs = np.array([float(a1), float(a2), float(a3)])

    def value(t, w):
        return float(coeffs @ (np.asarray(w) ** 2))

    def gradient(t, w):
        return 2.0 * coeffs * np.asarray(w, dtype=float)

    c1, c2, c3 = (2.0 * float(c) for c in coeffs)

    def gradient_scalars(t, w1, w2, w3):
        return (c1 * w1, c2 * w2, c3 * w3)

    def hessian_scalars(t, w1, w2, w3):
        return (c1, 0.0, 0.0, c2, 0.0, c3)

    return HamiltonianSpec(value=value, gradient=gradient,
                           name=f"rigid_body({a1},{a2},{a3})",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def sl2_fig1() -> HamiltonianSpec:
    """``H = w1 + w1^2/2 + w2/2`` on ``sl(2)*``.

    Pulled back through ``J = (q.q, p.p, q.p)`` this is the separable
    canonical Hamiltonian ``|q|^2 + |q|^4/2 + |p|^2/2``.
    """

    def value(t, w):
        return float(w[0] + 0.5 * w[0] * w[0] + 0.5 * w[1])

    def gradient(t, w):
        return np.array([1.0 + w[0], 0.5, 0.0])

    def gradient_scalars(t, w1, w2, w3):
        return (1.0 + w1, 0.5, 0.0)

    def hessian_scalars(t, w1, w2, w3):
        return (1.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    return HamiltonianSpec(value=value, gradient=gradient, name="sl2_fig1",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def trig_sum(k: float = 1.0) -> HamiltonianSpec:
    """``H = sum_i cos(k w_i)``."""
    k = float(k)

    def value(t, w):
        return float(np.sum(np.cos(k * np.asarray(w))))

    def gradient(t, w):
        return -k * np.sin(k * np.asarray(w, dtype=float))

    def gradient_scalars(t, w1, w2, w3):
        return (-k * math.sin(k * w1), -k * math.sin(k * w2),
                -k * math.sin(k * w3))

    k2 = k * k

    def hessian_scalars(t, w1, w2, w3):
        return (-k2 * math.cos(k * w1), 0.0, 0.0,
                -k2 * math.cos(k * w2), 0.0, -k2 * math.cos(k * w3))

    return HamiltonianSpec(value=value, gradient=gradient,
                           name=f"trig_sum(k={k})",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def _leave_one_out(values: np.ndarray) -> np.ndarray:
    prefix = np.concatenate([[1.0], np.cumprod(values)[:-1]])
    suffix = np.concatenate([np.cumprod(values[::-1])[:-1][::-1], [1.0]])
    return prefix * suffix


def trig_product(k: float = 4.0) -> HamiltonianSpec:
    """``H = prod_i sin(k w_i)``."""
    k = float(k)

    def value(t, w):
        return float(np.prod(np.sin(k * np.asarray(w))))

    def gradient(t, w):
        arg = k * np.asarray(w, dtype=float)
        return k * np.cos(arg) * _leave_one_out(np.sin(arg))

    def gradient_scalars(t, w1, w2, w3):
        s1 = math.sin(k * w1); s2 = math.sin(k * w2); s3 = math.sin(k * w3)
        return (k * math.cos(k * w1) * s2 * s3,
                k * math.cos(k * w2) * s1 * s3,
                k * math.cos(k * w3) * s1 * s2)

    k2 = k * k

    def hessian_scalars(t, w1, w2, w3):
        s1 = math.sin(k * w1); s2 = math.sin(k * w2); s3 = math.sin(k * w3)
        c1 = math.cos(k * w1); c2 = math.cos(k * w2); c3 = math.cos(k * w3)
        diag = -k2 * s1 * s2 * s3
        return (diag, k2 * c1 * c2 * s3, k2 * c1 * c3 * s2,
                diag, k2 * c2 * c3 * s1, diag)

    return HamiltonianSpec(value=value, gradient=gradient,
                           name=f"trig_product(k={k})",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def driven_trig(k: float = 4.0, epsilon: float = 0.01) -> HamiltonianSpec:
    """``H = prod_i sin(k w_i) + epsilon w1 sin^2 t`` on a 3-dim dual."""
    k = float(k)
    eps = float(epsilon)

    def value(t, w):
        return (float(np.prod(np.sin(k * np.asarray(w))))
                + eps * float(w[0]) * math.sin(t) ** 2)

    def gradient(t, w):
        arg = k * np.asarray(w, dtype=float)
        g = k * np.cos(arg) * _leave_one_out(np.sin(arg))
        g[0] += eps * math.sin(t) ** 2
        return g

    def gradient_scalars(t, w1, w2, w3):
        s1 = math.sin(k * w1); s2 = math.sin(k * w2); s3 = math.sin(k * w3)
        return (k * math.cos(k * w1) * s2 * s3 + eps * math.sin(t) ** 2,
                k * math.cos(k * w2) * s1 * s3,
                k * math.cos(k * w3) * s1 * s2)

    k2 = k * k

    def hessian_scalars(t, w1, w2, w3):
        # The drive is linear in w, so the Hessian is the product term's.
        s1 = math.sin(k * w1); s2 = math.sin(k * w2); s3 = math.sin(k * w3)
        c1 = math.cos(k * w1); c2 = math.cos(k * w2); c3 = math.cos(k * w3)
        diag = -k2 * s1 * s2 * s3
        return (diag, k2 * c1 * c2 * s3, k2 * c1 * c3 * s2,
                diag, k2 * c2 * c3 * s1, diag)

    return HamiltonianSpec(value=value, gradient=gradient, autonomous=False,
                           name=f"driven_trig(k={k},eps={eps})",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def central_force(potential) -> HamiltonianSpec:
    """``H = w2/2 + V(w1)`` on ``sl(2)*``.

    ``potential`` lists the ascending coefficients of the polynomial
    ``V``; through ``J = (q.q, p.p, q.p)`` the collective Hamiltonian is
    ``|p|^2/2 + V(|q|^2)``.
    """
    coeffs = np.asarray(potential, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ConfigurationError(
            "central_force potential must be a non-empty coefficient list")
    dcoeffs = np.polynomial.polynomial.polyder(coeffs)

    def value(t, w):
        return float(0.5 * w[1]
                     + np.polynomial.polynomial.polyval(w[0], coeffs))

    def gradient(t, w):
        return np.array(
            [float(np.polynomial.polynomial.polyval(w[0], dcoeffs)),
             0.5, 0.0])

    def gradient_scalars(t, w1, w2, w3):
        return (float(np.polynomial.polynomial.polyval(w1, dcoeffs)),
                0.5, 0.0)

    ddcoeffs = np.polynomial.polynomial.polyder(dcoeffs)

    def hessian_scalars(t, w1, w2, w3):
        return (float(np.polynomial.polynomial.polyval(w1, ddcoeffs)),
                0.0, 0.0, 0.0, 0.0, 0.0)

    return HamiltonianSpec(value=value, gradient=gradient,
                           name=f"central_force({list(map(float, coeffs))})",
                           gradient_scalars=gradient_scalars,
                           hessian_scalars=hessian_scalars)


def quadratic_matrix_trace(weights, dim_dual: int) -> HamiltonianSpec:
    """``H = (1/2) sum_l c_l w_l^2`` with per-coordinate weights.

    ``weights`` may be a scalar (uniform weight) or a flat list with one
    entry per dual coordinate.
    """
    arr = np.asarray(weights, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim_dual, float(arr))
    if arr.shape != (dim_dual,):
        raise ConfigurationError(
            f"quadratic_matrix_trace weights must be a scalar or "
            f"{dim_dual} values, got shape {arr.shape}")

    def value(t, w):
        w = np.asarray(w, dtype=float)
        return 0.5 * float(arr @ (w * w))

    def gradient(t, w):
        return arr * np.asarray(w, dtype=float)

    spec = HamiltonianSpec(value=value, gradient=gradient,
                           name="quadratic_matrix_trace")
    if dim_dual == 3:
        c1, c2, c3 = (float(c) for c in arr)

        def gradient_scalars(t, w1, w2, w3):
            return (c1 * w1, c2 * w2, c3 * w3)

        def hessian_scalars(t, w1, w2, w3):
            return (c1, 0.0, 0.0, c2, 0.0, c3)

        spec = replace(spec, gradient_scalars=gradient_scalars,
                       hessian_scalars=hessian_scalars)
    return spec


def custom_polynomial(terms, dim_dual: int) -> HamiltonianSpec:
    """``H = sum_t c_t prod_i w_i^(e_ti)`` from ``[coeff, exponents]`` terms."""
    parsed = []
    for idx, term in enumerate(terms):
        try:
            coeff, exponents = term
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"custom_polynomial term {idx} must be "
                f"[coefficient, [exponents...]], got {term!r}") from None
        exps = list(exponents)
        if len(exps) != dim_dual:
            raise ConfigurationError(
                f"custom_polynomial term {idx} has {len(exps)} exponents; "
                f"expected {dim_dual}")
        for e in exps:
            if not (isinstance(e, int) and e >= 0):
                raise ConfigurationError(
                    f"custom_polynomial term {idx} exponent {e!r} must be a "
                    "nonnegative integer")
        parsed.append((float(coeff), np.array(exps, dtype=int)))
    if not parsed:
        raise ConfigurationError(
            "custom_polynomial requires at least one term")

    def value(t, w):
        w = np.asarray(w, dtype=float)
        total = 0.0
        for coeff, exps in parsed:
            total += coeff * float(np.prod(w ** exps))
        return total

    def gradient(t, w):
        w = np.asarray(w, dtype=float)
        g = np.zeros(dim_dual)
        for coeff, exps in parsed:
            powers = w ** exps
            for i in range(dim_dual):
                if exps[i] == 0:
                    continue
                rest = np.prod(np.delete(powers, i))
                g[i] += coeff * exps[i] * w[i] ** (exps[i] - 1) * rest
        return g

    spec = HamiltonianSpec(value=value, gradient=gradient,
                           name="custom_polynomial")
    if dim_dual == 3:
        def gradient_scalars(t, w1, w2, w3):
            g = gradient(t, np.array([w1, w2, w3]))
            return (g[0], g[1], g[2])

        triangle = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))

        def hessian_scalars(t, w1, w2, w3):
            w = (w1, w2, w3)
            out = []
            for i, j in triangle:
                entry = 0.0
                for coeff, exps in parsed:
                    drop = [int(e) for e in exps]
                    if i == j:
                        if drop[i] < 2:
                            continue
                        factor = coeff * drop[i] * (drop[i] - 1)
                        drop[i] -= 2
                    else:
                        if drop[i] == 0 or drop[j] == 0:
                            continue
                        factor = coeff * drop[i] * drop[j]
                        drop[i] -= 1
                        drop[j] -= 1
                    entry += (factor * w[0] ** drop[0] * w[1] ** drop[1]
                              * w[2] ** drop[2])
                out.append(entry)
            return tuple(out)

        spec = replace(spec, gradient_scalars=gradient_scalars,
                       hessian_scalars=hessian_scalars)
    return spec


_REQUIRES_DIM3 = {"rigid_body", "sl2_fig1", "driven_trig", "central_force"}

_PARAM_NAMES = {
    "rigid_body": {"a1", "a2", "a3"},
    "sl2_fig1": set(),
    "trig_sum": {"k"},
    "trig_product": {"k"},
    "driven_trig": {"k", "epsilon"},
    "central_force": {"potential"},
    "quadratic_matrix_trace": {"weights"},
    "custom_polynomial": {"terms"},
}

HAMILTONIAN_NAMES = tuple(sorted(_PARAM_NAMES))


def build_hamiltonian(name: str, params: dict,
                      dim_dual: int) -> HamiltonianSpec:
    """Build a catalog Hamiltonian by name, validating its parameters
    and its compatibility with the target dual dimension."""
    if name not in _PARAM_NAMES:
        raise ConfigurationError(
            f"unknown hamiltonian {name!r}; known names: "
            + ", ".join(HAMILTONIAN_NAMES))
    params = dict(params or {})
    extra = set(params) - _PARAM_NAMES[name]
    if extra:
        raise ConfigurationError(
            f"hamiltonian {name!r} does not accept parameter(s) "
            f"{sorted(extra)}; allowed: "
            f"{sorted(_PARAM_NAMES[name]) or 'none'}")
    if name in _REQUIRES_DIM3 and dim_dual != 3:
        raise ConfigurationError(
            f"hamiltonian {name!r} requires a 3-dimensional dual, got "
            f"dim_dual = {dim_dual}")
    try:
        if name == "rigid_body":
            spec = rigid_body(params["a1"], params["a2"], params["a3"])
        elif name == "sl2_fig1":
            spec = sl2_fig1()
        elif name == "trig_sum":
            spec = trig_sum(params.get("k", 1.0))
        elif name == "trig_product":
            spec = trig_product(params.get("k", 4.0))
        elif name == "driven_trig":
            spec = driven_trig(params.get("k", 4.0),
                               params.get("epsilon", 0.01))
        elif name == "central_force":
            spec = central_force(params["potential"])
        elif name == "quadratic_matrix_trace":
            spec = quadratic_matrix_trace(params["weights"], dim_dual)
        else:
            spec = custom_polynomial(params["terms"], dim_dual)
    except KeyError as err:
        raise ConfigurationError(
            f"hamiltonian {name!r} requires parameter {err.args[0]!r}"
        ) from None
    if dim_dual != 3 and (spec.gradient_scalars is not None
                          or spec.hessian_scalars is not None):
        spec = replace(spec, gradient_scalars=None, hessian_scalars=None)
    return spec
