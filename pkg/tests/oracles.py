"""Independent brute-force oracle for the sticky dynamics.

Fixed-step advection with overlap sticking, deliberately ignorant of
the event-driven solver: every step all particles advance by v * dt and
any run of overlapping neighbours collapses onto its mass centroid with
the momentum-conserving mean velocity.  Because centroid and momentum
are preserved by any merge grouping, the centre-of-mass trajectory
through a collision is exact regardless of when inside a step the
overlap is detected, so final positions agree with the exact dynamics
far beyond the dt scale.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _sweep_merge(x, v, m, n):
    top = -1
    for i in range(n):
        cx, cv, cm = x[i], v[i], m[i]
        while top >= 0 and cx <= x[top]:
            total = m[top] + cm
            cx = (x[top] * m[top] + cx * cm) / total
            cv = (v[top] * m[top] + cv * cm) / total
            cm = total
            top -= 1
        top += 1
        x[top] = cx
        v[top] = cv
        m[top] = cm
    return top + 1


@njit(cache=True)
def _run(x, v, m, dt, n_steps):
    n = len(x)
    for _ in range(n_steps):
        for i in range(n):
            x[i] = x[i] + v[i] * dt
        n = _sweep_merge(x, v, m, n)
    return n


def brute_force_sticky(x0, v0, m0, t_final, dt=1e-5):
    """March the sticking dynamics to t_final with fixed step dt."""
    x = np.array(x0, dtype=np.float64)
    v = np.array(v0, dtype=np.float64)
    m = np.array(m0, dtype=np.float64)
    n_steps = int(round(t_final / dt))
    n = _run(x, v, m, dt, n_steps)
    return x[:n], v[:n], m[:n]
