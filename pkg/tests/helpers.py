"""Shared numeric helpers for the test suite."""

import numpy as np

from liepoisson import build_realization


def fd_gradient(f, t, w, h=1e-6):
    """Central-difference gradient of ``f(t, w)`` in ``w``."""
    w = np.asarray(w, dtype=float)
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(t, w + e) - f(t, w - e)) / (2.0 * h)
    return g


def fd_gradient_order(f, grad, t, w, h=1e-3):
    """Observed convergence order of the central-difference error.

    Central differences converge at order 2, so an analytic gradient
    should show an observed order near 2.  When the function is a
    polynomial of degree <= 2 the difference is exact and both errors
    vanish; that is reported as ``inf`` (better than any finite order).
    """
    g = np.asarray(grad(t, w), dtype=float)
    e1 = float(np.linalg.norm(fd_gradient(f, t, w, h) - g))
    e2 = float(np.linalg.norm(fd_gradient(f, t, w, h / 2.0) - g))
    scale = 1.0 + float(np.linalg.norm(g))
    if e1 <= 1e-12 * scale and e2 <= 1e-12 * scale:
        return np.inf
    if e2 == 0.0:
        return np.inf
    return float(np.log2(e1 / e2))


def random_in_range_w(r, rng, scale=0.7):
    """A dual-space point guaranteed inside the momentum-map image."""
    return r.momentum_map(scale * rng.standard_normal(r.dim_M))


def catalog_realizations():
    """One instance of every realization builder (both sides where a
    ``side`` parameter exists)."""
    return [
        build_realization("AffineA1"),
        build_realization("AffineA1Diagonal"),
        build_realization("O3_to_so3"),
        build_realization("SL2_from_O3invariants"),
        build_realization("Hopf_so3"),
        build_realization("OnSp2k", n=3, k=1, side="o_n"),
        build_realization("OnSp2k", n=3, k=1, side="sp_2k"),
        build_realization("GLnGLk", n=2, k=1, side="gl_n"),
        build_realization("GLnGLk", n=2, k=1, side="gl_k"),
        build_realization("Landmarks", d=2, n_landmarks=3,
                          kernel_width=1.0),
    ]


def max_invariant_drift(traj, r):
    """Worst relative drift over the realization's quadratic invariants."""
    worst = 0.0
    for inv in r.quadratic_invariants:
        values = np.array([inv(x) for x in traj.xs])
        dev = float(np.max(np.abs(values - values[0])))
        worst = max(worst, dev / max(1.0, abs(float(values[0]))))
    return worst
