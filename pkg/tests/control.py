"""Classical fourth-order Runge-Kutta control integrator.

Deliberately *not* symplectic.  The diagnostics and acceptance tests use
it to confirm that the conservation checks discriminate: a general
purpose method of the same nominal accuracy must show secular Casimir
drift where the symplectic methods sit at roundoff.
"""

import math

import numpy as np

from liepoisson.geometry import make_collective_field


def rk4_trajectory(r, h, x0, t0, t_end, dt):
    """Integrate the collective field with classical RK4.

    Returns ``(ts, xs, ws)`` arrays shaped like the symplectic driver's
    trajectory attributes; the final step is shortened to land exactly
    on ``t_end``.
    """
    field = make_collective_field(r, h)
    span = t_end - t0
    n = 0 if span == 0 else max(1, int(math.ceil(abs(span) / dt - 1e-9)))
    sign = 1.0 if span >= 0 else -1.0
    t = float(t0)
    x = np.asarray(x0, dtype=float).copy()
    ts = [t]
    xs = [x.copy()]
    for i in range(n):
        step = sign * dt if i < n - 1 else t_end - t
        k1 = field(t, x)
        k2 = field(t + 0.5 * step, x + 0.5 * step * k1)
        k3 = field(t + 0.5 * step, x + 0.5 * step * k2)
        k4 = field(t + step, x + step * k3)
        x = x + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t_end if i == n - 1 else t + step
        ts.append(t)
        xs.append(x.copy())
    xs = np.asarray(xs)
    ws = np.asarray([r.momentum_map(p) for p in xs])
    return np.asarray(ts), xs, ws
