"""Grid line traversal kernels (Amanatides-Woo) compiled with numba.

All kernels take the raw ``state`` array of an occupancy grid indexed
``[iy, ix]`` and treat cells equal to ``OCCUPIED`` as blocking. Points are
given in world coordinates together with the grid origin and resolution.
"""

import math

import numpy as np
from numba import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2

_EPS = 1e-9


@njit(cache=True)
def _setup_axis(g0, d, i):
    if d > 0.0:
        return 1, (i + 1.0 - g0) / d, 1.0 / d
    if d < 0.0:
        return -1, (g0 - i) / -d, -1.0 / d
    return 0, np.inf, np.inf


@njit(cache=True)
def segment_first_hit(state, ox, oy, res, ax, ay, bx, by, skip_ix, skip_iy):
    """First occupied cell on the open segment a->b.

    Returns ``(hit, ix, iy, t_enter)`` with ``t_enter`` the segment parameter
    in [0, 1] at which the blocking cell is entered. The cell
    ``(skip_ix, skip_iy)`` never blocks. Traversal stops at the grid edge.
    """
    h, w = state.shape
    gx0 = (ax - ox) / res
    gy0 = (ay - oy) / res
    dx = (bx - ax) / res
    dy = (by - ay) / res
    ix = int(math.floor(gx0))
    iy = int(math.floor(gy0))
    sx, tmx, tdx = _setup_axis(gx0, dx, ix)
    sy, tmy, tdy = _setup_axis(gy0, dy, iy)
    t = 0.0
    while True:
        if ix < 0 or iy < 0 or ix >= w or iy >= h:
            return False, -1, -1, 1.0
        if state[iy, ix] == OCCUPIED and not (ix == skip_ix and iy == skip_iy):
            return True, ix, iy, t
        if tmx < tmy - 1e-12:
            t = tmx
            ix += sx
            tmx += tdx
        elif tmy < tmx - 1e-12:
            t = tmy
            iy += sy
            tmy += tdy
        else:
            # exact vertex crossing: step diagonally, corner contact does not block
            t = tmx
            ix += sx
            iy += sy
            tmx += tdx
            tmy += tdy
        if t >= 1.0 - _EPS:
            return False, -1, -1, 1.0


@njit(cache=True)
def ray_first_hit(state, ox, oy, res, ax, ay, angle, max_range):
    bx = ax + max_range * math.cos(angle)
    by = ay + max_range * math.sin(angle)
    hit, ix, iy, t = segment_first_hit(state, ox, oy, res, ax, ay, bx, by, -1, -1)
    if hit:
        return True, ix, iy, t * max_range
    return False, -1, -1, max_range


@njit(cache=True)
def batch_segment_clear(state, ox, oy, res, ax, ay, bxs, bys, skip_ix, skip_iy):
    """Line-of-sight from one origin to many end points, skipping each end's own cell."""
    n = bxs.shape[0]
    out = np.empty(n, dtype=np.bool_)
    for k in range(n):
        hit, _, _, _ = segment_first_hit(
            state, ox, oy, res, ax, ay, bxs[k], bys[k], skip_ix[k], skip_iy[k]
        )
        out[k] = not hit
    return out


@njit(cache=True)
def sweep_update(truth, live, ox, oy, res, ax, ay, n_rays, max_range):
    """360-degree range sweep against ``truth`` written into ``live``.

    Traversed cells become FREE unless already OCCUPIED; the first blocking
    cell of every ray becomes OCCUPIED. Returns the number of cells newly
    marked OCCUPIED.
    """
    h, w = truth.shape
    newly = 0
    for r in range(n_rays):
        ang = 2.0 * math.pi * r / n_rays
        bx = ax + max_range * math.cos(ang)
        by = ay + max_range * math.sin(ang)
        gx0 = (ax - ox) / res
        gy0 = (ay - oy) / res
        dx = (bx - ax) / res
        dy = (by - ay) / res
        ix = int(math.floor(gx0))
        iy = int(math.floor(gy0))
        sx, tmx, tdx = _setup_axis(gx0, dx, ix)
        sy, tmy, tdy = _setup_axis(gy0, dy, iy)
        t = 0.0
        while True:
            if ix < 0 or iy < 0 or ix >= w or iy >= h:
                break
            if truth[iy, ix] == OCCUPIED:
                if live[iy, ix] != OCCUPIED:
                    live[iy, ix] = OCCUPIED
                    newly += 1
                break
            if live[iy, ix] == UNKNOWN:
                live[iy, ix] = FREE
            if tmx < tmy - 1e-12:
                t = tmx
                ix += sx
                tmx += tdx
            elif tmy < tmx - 1e-12:
                t = tmy
                iy += sy
                tmy += tdy
            else:
                t = tmx
                ix += sx
                iy += sy
                tmx += tdx
                tmy += tdy
            if t >= 1.0 - _EPS:
                break
    return newly


@njit(cache=True)
def batch_first_hit(state, ox, oy, res, ax, ay, bxs, bys, skip_ix, skip_iy):
    """First blocking cell from one origin to many end points (-1 where clear)."""
    n = bxs.shape[0]
    hx = np.full(n, -1, dtype=np.int64)
    hy = np.full(n, -1, dtype=np.int64)
    for k in range(n):
        hit, ix, iy, _ = segment_first_hit(
            state, ox, oy, res, ax, ay, bxs[k], bys[k], skip_ix[k], skip_iy[k]
        )
        if hit:
            hx[k] = ix
            hy[k] = iy
    return hx, hy
