"""Pure-Python twin of the compiled flow kernel (same signature, same floats).

Fields are handed over as nested lists (see :func:`prepare`); scalar
indexing into lists is several times faster than into numpy arrays.
"""
import math

import numpy as np

LOOP, OUT, STUCK, MAXITER = 0, 1, 2, 3


def prepare(grid):
    return np.asarray(grid, dtype=np.float64).tolist()


def sample_kernel(gx, gy, x, y):
    D = len(gx)
    return _sample_list(gx, gy, D, 0.5 * (D - 1), float(x), float(y))


def flow_kernel(gx, gy, x0, y0, dt, tau_l, tau_s, n_iter, xs, ys, far):
    D = len(gx)
    h = 0.5 * (D - 1)
    xs[0] = x0
    ys[0] = y0
    far[0] = -1
    n = 0
    x, y = float(x0), float(y0)
    for _ in range(n_iter):
        u, v = _sample_list(gx, gy, D, h, x, y)
        if u * u + v * v <= tau_s:
            return n + 1, STUCK, -1
        x = x + dt * u
        y = y + dt * v
        if abs(x) > h or abs(y) > h:
            return n + 1, OUT, -1
        n += 1
        xs[n] = x
        ys[n] = y
        far[n] = -1
        if n < 2:
            continue
        dx = x - xs[: n - 1]
        dy = y - ys[: n - 1]
        d = dx * dx + dy * dy
        fj = far[: n - 1]
        fj[(d >= tau_l) & (fj < 0)] = n
        for j in np.flatnonzero((d < tau_l) & (fj >= 0)):
            m0 = fj[j]
            ax = xs[m0:n] - xs[j]
            ay = ys[m0:n] - ys[j]
            bx = xs[m0:n] - x
            by = ys[m0:n] - y
            if np.any((ax * ax + ay * ay >= tau_l) & (bx * bx + by * by >= tau_l)):
                return n + 1, LOOP, int(j)
    return n + 1, MAXITER, -1


def _sample_list(gx, gy, D, h, x, y):
    cf = x + h
    rf = h - y
    if cf < 0.0:
        cf = 0.0
    elif cf > D - 1:
        cf = float(D - 1)
    if rf < 0.0:
        rf = 0.0
    elif rf > D - 1:
        rf = float(D - 1)
    c0 = int(math.floor(cf))
    r0 = int(math.floor(rf))
    c1 = c0 + 1 if c0 + 1 < D else D - 1
    r1 = r0 + 1 if r0 + 1 < D else D - 1
    fx = cf - c0
    fy = rf - r0
    a, b = gx[r0], gx[r1]
    u = (1.0 - fy) * ((1.0 - fx) * a[c0] + fx * a[c1]) + fy * ((1.0 - fx) * b[c0] + fx * b[c1])
    a, b = gy[r0], gy[r1]
    v = (1.0 - fy) * ((1.0 - fx) * a[c0] + fx * a[c1]) + fy * ((1.0 - fx) * b[c0] + fx * b[c1])
    return u, v
