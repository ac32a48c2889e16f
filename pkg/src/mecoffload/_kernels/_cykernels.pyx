# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: per-block golden-section minimization and stage sweeps.

Semantics must match ``pykernels`` exactly; the test suite asserts parity.
"""
from libc.math cimport expm1, isfinite

cimport cython
import numpy as np

DEF INVPHI = 0.6180339887498949   # (sqrt(5)-1)/2
DEF INVPHI2 = 0.3819660112501051  # (3-sqrt(5))/2

BACKEND_NAME = "cython"


cdef inline double _interp(const double* prev, int top, double dx_inv, double y) nogil:
    """Piecewise-linear read of prev on the uniform grid {0, dx, ..., top*dx}."""
    cdef double pos = y * dx_inv
    cdef int i0
    cdef double frac, v0
    if pos <= 0.0:
        return prev[0]
    if pos >= top:
        return prev[top]
    i0 = <int> pos
    frac = pos - i0
    v0 = prev[i0]
    if frac == 0.0 or not isfinite(v0):
        return v0
    return v0 + frac * (prev[i0 + 1] - v0)


cdef inline double _tail(int mode, const double* prev, int top, double dx_inv,
                         double c1, double c2, double y) nogil:
    """Cost-to-go for y remaining nats: interpolated table or exact last-block form."""
    if mode == 0:
        return _interp(prev, top, dx_inv, y)
    if y <= 0.0:
        return 0.0
    return c1 * expm1(y * c2)


cdef inline double _energy(double x, double inv_h, double t_blk, double einv) nogil:
    if x <= 0.0:
        return 0.0
    return t_blk * expm1(x * einv) * inv_h


cdef inline void _golden_one(int mode, const double* prev, int top, double dx_inv,
                             double c1, double c2, double d, double h, double t_blk,
                             double einv, double tol, double* out_x, double* out_f) nogil:
    cdef double a = 0.0
    cdef double b = d
    cdef double inv_h = 1.0 / h
    cdef double x1, x2, f1, f2, xm, fm, f0, fd, w
    if b < 0.0:
        b = 0.0
    w = b - a
    x1 = a + INVPHI2 * w
    x2 = a + INVPHI * w
    f1 = _energy(x1, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, d - x1)
    f2 = _energy(x2, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, d - x2)
    while b - a > tol:
        if f1 < f2:
            b = x2
            x2 = x1
            f2 = f1
            x1 = a + INVPHI2 * (b - a)
            f1 = _energy(x1, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, d - x1)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + INVPHI * (b - a)
            f2 = _energy(x2, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, d - x2)
    xm = 0.5 * (a + b)
    fm = _energy(xm, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, d - xm)
    # the interval corners are exact candidates: send nothing now, or everything
    f0 = _tail(mode, prev, top, dx_inv, c1, c2, d)
    fd = _energy(d, inv_h, t_blk, einv) + _tail(mode, prev, top, dx_inv, c1, c2, 0.0)
    out_x[0] = xm
    out_f[0] = fm
    if f0 < out_f[0]:
        out_x[0] = 0.0
        out_f[0] = f0
    if fd < out_f[0]:
        out_x[0] = d
        out_f[0] = fd


def golden_batch(const double[::1] prev, double dx, int tail_mode, double c1, double c2,
                 const double[::1] d, const double[::1] h, double t_blk, double bandwidth, double tol):
    """Minimize e(x, h_i, t_blk, W) + tail(d_i - x) over x in [0, d_i] for each i.

    tail_mode 0 reads the previous-stage table (uniform grid, spacing dx);
    tail_mode 1 evaluates the closed-form last-block cost c1*expm1(y*c2).
    Returns (minimizer, minimum) arrays.
    """
    cdef Py_ssize_t m = d.shape[0]
    cdef Py_ssize_t i
    cdef int top = <int> (prev.shape[0] - 1)
    cdef double dx_inv = 0.0 if dx == 0.0 else 1.0 / dx
    cdef double einv = 1.0 / (t_blk * bandwidth)
    out_x_arr = np.empty(m, dtype=np.float64)
    out_f_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out_x = out_x_arr
    cdef double[::1] out_f = out_f_arr
    if h.shape[0] != m:
        raise ValueError("d and h must have the same length")
    with nogil:
        for i in range(m):
            _golden_one(tail_mode, &prev[0], top, dx_inv, c1, c2, d[i], h[i],
                        t_blk, einv, tol, &out_x[i], &out_f[i])
    return out_x_arr, out_f_arr


def stage_update(const double[::1] prev, double dx, int tail_mode, double c1, double c2,
                 const double[::1] d_grid, const double[::1] nodes, const double[::1] weights,
                 double t_blk, double bandwidth, double tol):
    """One backward-recursion sweep: gain-expectation of the per-gain minima."""
    cdef Py_ssize_t g = d_grid.shape[0]
    cdef Py_ssize_t k = nodes.shape[0]
    cdef Py_ssize_t i, j
    cdef int top = <int> (prev.shape[0] - 1)
    cdef double dx_inv = 0.0 if dx == 0.0 else 1.0 / dx
    cdef double einv = 1.0 / (t_blk * bandwidth)
    cdef double x, f
    out_arr = np.zeros(g, dtype=np.float64)
    cdef double[::1] out = out_arr
    if weights.shape[0] != k:
        raise ValueError("nodes and weights must have the same length")
    with nogil:
        for j in range(k):
            for i in range(g):
                _golden_one(tail_mode, &prev[0], top, dx_inv, c1, c2, d_grid[i],
                            nodes[j], t_blk, einv, tol, &x, &f)
                out[i] += weights[j] * f
    return out_arr


def stage_update_discrete(const double[::1] prev, const double[::1] d_grid, const double[::1] nodes,
                          const double[::1] weights, double t_blk, double bandwidth):
    """Stage sweep with the decision restricted to grid differences (no interpolation)."""
    cdef Py_ssize_t g = d_grid.shape[0]
    cdef Py_ssize_t k = nodes.shape[0]
    cdef Py_ssize_t i, j, l
    cdef double einv = 1.0 / (t_blk * bandwidth)
    cdef double best, cand, inv_h
    out_arr = np.zeros(g, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for j in range(k):
            inv_h = 1.0 / nodes[j]
            for i in range(g):
                best = _energy(d_grid[i] - d_grid[0], inv_h, t_blk, einv) + prev[0]
                for l in range(1, i + 1):
                    cand = _energy(d_grid[i] - d_grid[l], inv_h, t_blk, einv) + prev[l]
                    if cand < best:
                        best = cand
                out[i] += weights[j] * best
    return out_arr
