"""8-connected grid A* (numba)."""

import heapq
import math

import numpy as np
from numba import njit

_DX = np.array([1, -1, 0, 0, 1, 1, -1, -1], dtype=np.int64)
_DY = np.array([0, 0, 1, -1, 1, -1, 1, -1], dtype=np.int64)


@njit(cache=True)
def astar(free, sx, sy, gx, gy):
    """Cell path from (sx, sy) to (gx, gy) over ``free`` cells; empty if none.

    Diagonal moves may not cut a blocked corner.
    """
    h, w = free.shape
    n = h * w
    g = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    closed = np.zeros(n, dtype=np.bool_)
    s = sy * w + sx
    goal = gy * w + gx
    g[s] = 0.0
    heap = [(math.hypot(gx - sx, gy - sy), 0.0, s)]
    while len(heap) > 0:
        f, gc, c = heapq.heappop(heap)
        if closed[c]:
            continue
        closed[c] = True
        if c == goal:
            break
        cx = c % w
        cy = c // w
        for k in range(8):
            nx = cx + _DX[k]
            ny = cy + _DY[k]
            if nx < 0 or ny < 0 or nx >= w or ny >= h or not free[ny, nx]:
                continue
            if k >= 4 and (not free[cy, nx] or not free[ny, cx]):
                continue
            nc = ny * w + nx
            if closed[nc]:
                continue
            step = 1.0 if k < 4 else math.sqrt(2.0)
            ng = gc + step
            if ng < g[nc]:
                g[nc] = ng
                parent[nc] = c
                heapq.heappush(heap, (ng + math.hypot(gx - nx, gy - ny), ng, nc))
    if not closed[goal]:
        return np.zeros((0, 2), dtype=np.int64)
    count = 1
    c = goal
    while c != s:
        c = parent[c]
        count += 1
    out = np.empty((count, 2), dtype=np.int64)
    c = goal
    for i in range(count - 1, -1, -1):
        out[i, 0] = c % w
        out[i, 1] = c // w
        if i > 0:
            c = parent[c]
    return out
