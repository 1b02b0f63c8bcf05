# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward-Euler point flow; mirrors ``_flowpy.flow_kernel`` exactly."""
from libc.math cimport floor, fabs

DEF LOOP = 0
DEF OUT = 1
DEF STUCK = 2
DEF MAXITER = 3

import numpy as np


def prepare(grid):
    return np.ascontiguousarray(grid, dtype=np.float64)


cdef inline void _sample(const double[:, ::1] vx, const double[:, ::1] vy, Py_ssize_t D,
                         double h, double x, double y, double* u, double* v) nogil:
    cdef double cf = x + h
    cdef double rf = h - y
    cdef Py_ssize_t c0, r0, c1, r1
    cdef double fx, fy
    if cf < 0.0:
        cf = 0.0
    elif cf > D - 1:
        cf = D - 1
    if rf < 0.0:
        rf = 0.0
    elif rf > D - 1:
        rf = D - 1
    c0 = <Py_ssize_t>floor(cf)
    r0 = <Py_ssize_t>floor(rf)
    c1 = c0 + 1 if c0 + 1 < D else D - 1
    r1 = r0 + 1 if r0 + 1 < D else D - 1
    fx = cf - c0
    fy = rf - r0
    u[0] = (1.0 - fy) * ((1.0 - fx) * vx[r0, c0] + fx * vx[r0, c1]) + fy * ((1.0 - fx) * vx[r1, c0] + fx * vx[r1, c1])
    v[0] = (1.0 - fy) * ((1.0 - fx) * vy[r0, c0] + fx * vy[r0, c1]) + fy * ((1.0 - fx) * vy[r1, c0] + fx * vy[r1, c1])


def sample_kernel(const double[:, ::1] vx, const double[:, ::1] vy, double x, double y):
    cdef double u, v
    cdef Py_ssize_t D = vx.shape[0]
    _sample(vx, vy, D, 0.5 * (D - 1), x, y, &u, &v)
    return u, v


def flow_kernel(const double[:, ::1] vx, const double[:, ::1] vy, double x0, double y0,
                double dt, double tau_l, double tau_s, int n_iter,
                double[::1] xs, double[::1] ys, long[::1] far):
    """Integrate from (x0, y0); returns (n_points, code, loop_start).

    ``xs``/``ys``/``far`` are caller-owned buffers of length n_iter + 1.
    ``far[j]`` is the first later index at squared distance >= tau_l from j.
    """
    cdef Py_ssize_t D = vx.shape[0]
    cdef double h = 0.5 * (D - 1)
    cdef double u, v, x, y, dx, dy, d
    cdef Py_ssize_t n = 0, it, j, m
    cdef Py_ssize_t code = MAXITER, start = -1
    cdef bint ok
    with nogil:
        xs[0] = x0
        ys[0] = y0
        far[0] = -1
        for it in range(n_iter):
            x = xs[n]
            y = ys[n]
            _sample(vx, vy, D, h, x, y, &u, &v)
            if u * u + v * v <= tau_s:
                code = STUCK
                break
            x = x + dt * u
            y = y + dt * v
            if fabs(x) > h or fabs(y) > h:
                code = OUT
                break
            n += 1
            xs[n] = x
            ys[n] = y
            far[n] = -1
            for j in range(n - 1):
                dx = x - xs[j]
                dy = y - ys[j]
                d = dx * dx + dy * dy
                if d >= tau_l:
                    if far[j] < 0:
                        far[j] = n
                elif far[j] >= 0:
                    for m in range(far[j], n):
                        dx = xs[m] - xs[j]
                        dy = ys[m] - ys[j]
                        ok = dx * dx + dy * dy >= tau_l
                        if ok:
                            dx = xs[m] - x
                            dy = ys[m] - y
                            ok = dx * dx + dy * dy >= tau_l
                        if ok:
                            start = j
                            break
                    if start >= 0:
                        break
            if start >= 0:
                code = LOOP
                break
    return n + 1, code, start
