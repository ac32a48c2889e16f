"""Pure-numpy fallback for the compiled kernels.

Implements the same per-element golden-section recursion in lockstep over
the whole batch (converged elements are masked), so results match the
compiled backend to floating-point reassociation.
"""
import numpy as np

INVPHI = 0.6180339887498949   # (sqrt(5)-1)/2
INVPHI2 = 0.3819660112501051  # (3-sqrt(5))/2

BACKEND_NAME = "python"


def _interp(prev, dx_inv, y):
    top = prev.size - 1
    pos = y * dx_inv
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, max(top - 1, 0))
    frac = pos - i0
    v0 = prev[i0]
    v1 = prev[np.minimum(i0 + 1, top)]
    with np.errstate(invalid="ignore"):
        lerp = v0 + frac * (v1 - v0)
    out = np.where((frac == 0.0) | ~np.isfinite(v0), v0, lerp)
    out = np.where(pos <= 0.0, prev[0], out)
    return np.where(pos >= top, prev[top], out)


def _tail(mode, prev, dx_inv, c1, c2, y):
    if mode == 0:
        return _interp(prev, dx_inv, y)
    with np.errstate(over="ignore"):
        return np.where(y <= 0.0, 0.0, c1 * np.expm1(y * c2))


def _energy(x, inv_h, t_blk, einv):
    with np.errstate(over="ignore"):
        return np.where(x <= 0.0, 0.0, t_blk * np.expm1(x * einv) * inv_h)


def golden_batch(prev, dx, tail_mode, c1, c2, d, h, t_blk, bandwidth, tol):
    """Vectorized twin of the compiled golden-section batch (see _cykernels)."""
    prev = np.ascontiguousarray(prev, dtype=float)
    d = np.ascontiguousarray(d, dtype=float)
    h = np.ascontiguousarray(h, dtype=float)
    if d.shape != h.shape:
        raise ValueError("d and h must have the same length")
    dx_inv = 0.0 if dx == 0.0 else 1.0 / dx
    einv = 1.0 / (t_blk * bandwidth)
    inv_h = 1.0 / h

    def g(x):
        return _energy(x, inv_h, t_blk, einv) + _tail(tail_mode, prev, dx_inv, c1, c2, d - x)

    a = np.zeros_like(d)
    b = np.maximum(d, 0.0)
    x1 = a + INVPHI2 * (b - a)
    x2 = a + INVPHI * (b - a)
    f1 = g(x1)
    f2 = g(x2)
    while True:
        active = (b - a) > tol
        if not active.any():
            break
        shrink_right = active & (f1 < f2)
        shrink_left = active & ~shrink_right
        b = np.where(shrink_right, x2, b)
        a = np.where(shrink_left, x1, a)
        x1n = np.where(shrink_right, a + INVPHI2 * (b - a), np.where(shrink_left, x2, x1))
        x2n = np.where(shrink_left, a + INVPHI * (b - a), np.where(shrink_right, x1, x2))
        f1n = np.where(shrink_left, f2, f1)
        f2n = np.where(shrink_right, f1, f2)
        gx1 = g(x1n)
        gx2 = g(x2n)
        f1 = np.where(shrink_right, gx1, f1n)
        f2 = np.where(shrink_left, gx2, f2n)
        x1, x2 = x1n, x2n
    xm = 0.5 * (a + b)
    best_x = xm
    best_f = g(xm)
    f0 = _tail(tail_mode, prev, dx_inv, c1, c2, d)
    fd = _energy(d, inv_h, t_blk, einv) + _tail(tail_mode, prev, dx_inv, c1, c2, np.zeros_like(d))
    pick0 = f0 < best_f
    best_x = np.where(pick0, 0.0, best_x)
    best_f = np.where(pick0, f0, best_f)
    pickd = fd < best_f
    best_x = np.where(pickd, d, best_x)
    best_f = np.where(pickd, fd, best_f)
    return best_x, best_f


def stage_update(prev, dx, tail_mode, c1, c2, d_grid, nodes, weights, t_blk,
                 bandwidth, tol):
    """One backward-recursion sweep: gain-expectation of the per-gain minima."""
    d_grid = np.ascontiguousarray(d_grid, dtype=float)
    nodes = np.ascontiguousarray(nodes, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    if nodes.shape != weights.shape:
        raise ValueError("nodes and weights must have the same length")
    g = d_grid.size
    k = nodes.size
    dd = np.tile(d_grid, k)
    hh = np.repeat(nodes, g)
    _, vals = golden_batch(prev, dx, tail_mode, c1, c2, dd, hh, t_blk, bandwidth, tol)
    return weights @ vals.reshape(k, g)


def stage_update_discrete(prev, d_grid, nodes, weights, t_blk, bandwidth):
    """Stage sweep with the decision restricted to grid differences (no interpolation)."""
    prev = np.ascontiguousarray(prev, dtype=float)
    d_grid = np.ascontiguousarray(d_grid, dtype=float)
    nodes = np.ascontiguousarray(nodes, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    einv = 1.0 / (t_blk * bandwidth)
    out = np.zeros(d_grid.size)
    inv_h = 1.0 / nodes
    for i in range(d_grid.size):
        send = d_grid[i] - d_grid[: i + 1]
        with np.errstate(over="ignore"):
            base = np.where(send <= 0.0, 0.0, t_blk * np.expm1(send * einv))
        cand = base[None, :] * inv_h[:, None] + prev[None, : i + 1]
        out[i] = weights @ cand.min(axis=1)
    return out
