"""Brute-force reference implementations shared by the test modules."""

import math

import numpy as np

from asip._validation import wrap_angle


def slab_entries(grid, a, b, skip=None, with_chord=False):
    """Exact entry parameter of the segment a->b into every occupied cell it crosses with positive length."""
    spec = grid.spec
    iy, ix = np.nonzero(grid.occupied)
    # open cell interiors: grazing an edge or a corner does not count as crossing
    eps = 1e-9
    x0 = spec.origin[0] + ix * spec.resolution + eps
    y0 = spec.origin[1] + iy * spec.resolution + eps
    side = spec.resolution - 2 * eps
    d = np.asarray(b, float) - np.asarray(a, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tx1 = (x0 - a[0]) / d[0]
        tx2 = (x0 + side - a[0]) / d[0]
        ty1 = (y0 - a[1]) / d[1]
        ty2 = (y0 + side - a[1]) / d[1]
    if d[0] == 0:
        inside = (a[0] > x0) & (a[0] < x0 + side)
        tx1, tx2 = np.where(inside, -np.inf, np.inf), np.full(inside.shape, np.inf)
    if d[1] == 0:
        inside = (a[1] > y0) & (a[1] < y0 + side)
        ty1, ty2 = np.where(inside, -np.inf, np.inf), np.full(inside.shape, np.inf)
    lo = np.maximum(np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2)), 0.0)
    hi = np.minimum(np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2)), 1.0)
    cells = iy * spec.width + ix
    chord = (hi - lo) * np.hypot(*d)
    keep = chord > 1e-9
    if skip is not None:
        keep &= cells != skip
    if with_chord:
        return cells[keep], lo[keep], chord[keep]
    return cells[keep], lo[keep]


def literal_visible(grid, ref, pos, yaw, sensor):
    out = set()
    for k, c in enumerate(ref.target_cells):
        p = ref.surface_points[k]
        d = p - pos
        if math.hypot(*d) > sensor.max_range:
            continue
        if abs(wrap_angle(math.atan2(d[1], d[0]) - yaw)) > 0.5 * sensor.fov + 1e-12:
            continue
        cells, _ = slab_entries(grid, pos, p, skip=int(c))
        if cells.size == 0:
            out.add(int(c))
    return out
