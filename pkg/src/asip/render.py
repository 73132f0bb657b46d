"""Raster images (binary PPM) of maps, coverage and trajectories."""

from __future__ import annotations

import numpy as np

from ._validation import check_int

COLORS = {
    "unknown": (200, 200, 200),
    "free": (255, 255, 255),
    "structure": (90, 90, 90),
    "obstacle": (0, 0, 0),
    "covered": (40, 170, 60),
    "occluded": (220, 40, 40),
    "trajectory": (30, 90, 220),
    "viewpoint": (240, 160, 0),
}


def _line(r0, c0, r1, c1):
    """Integer pixel line (Bresenham)."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    out = []
    while True:
        out.append((r, c))
        if r == r1 and c == c1:
            return out
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def render_image(
    reference,
    truth=None,
    covered=(),
    occluded=(),
    trajectory=None,
    viewpoints=(),
    scale: int = 4,
) -> np.ndarray:
    """RGB array of shape ``(height*scale, width*scale, 3)``, north up.

    Target cells take the covered or occluded color when listed; path and
    viewpoint marks are never drawn over target cells so that cell colors
    can be counted back from the image.
    """
    scale = check_int(scale, "scale", low=1)
    spec = reference.spec
    h, w = spec.height, spec.width
    cell = np.empty((h, w, 3), dtype=np.uint8)
    cell[:] = COLORS["free"]
    cell[reference.structure] = COLORS["structure"]
    if truth is not None:
        cell[truth.occupied & ~reference.structure] = COLORS["obstacle"]
    flat = cell.reshape(-1, 3)
    occ = np.asarray(list(occluded), dtype=np.int64)
    cov = np.asarray(list(covered), dtype=np.int64)
    if occ.size:
        flat[occ] = COLORS["occluded"]
    if cov.size:
        flat[cov] = COLORS["covered"]
    img = np.repeat(np.repeat(cell[::-1], scale, axis=0), scale, axis=1)
    target_px = np.zeros((h, w), dtype=bool)
    target_px.ravel()[np.asarray(reference.target_cells, dtype=np.int64)] = True
    target_px = np.repeat(np.repeat(target_px[::-1], scale, axis=0), scale, axis=1)

    def to_px(p):
        c = int(np.floor((p[0] - spec.origin[0]) / spec.resolution * scale))
        r = h * scale - 1 - int(np.floor((p[1] - spec.origin[1]) / spec.resolution * scale))
        return r, c

    def paint(pixels, color):
        for r, c in pixels:
            if 0 <= r < img.shape[0] and 0 <= c < img.shape[1] and not target_px[r, c]:
                img[r, c] = color

    if trajectory is not None and len(trajectory):
        tr = np.asarray(trajectory, dtype=float)
        xy = tr[:, :2] if tr.shape[1] == 2 else tr[:, 1:3]
        px = [to_px(p) for p in xy]
        for a, b in zip(px[:-1], px[1:]):
            paint(_line(*a, *b), COLORS["trajectory"])
        if len(px) == 1:
            paint(px, COLORS["trajectory"])
    for v in viewpoints:
        pos = getattr(v, "position", v)
        r, c = to_px(pos)
        paint([(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)], COLORS["viewpoint"])
    return img


def to_ppm(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_ppm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    pos += 1  # the single whitespace byte closing the header
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError("expected an 8-bit binary PPM")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos : pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def count_color(img: np.ndarray, color) -> int:
    return int(np.all(img == np.asarray(color, dtype=np.uint8), axis=-1).sum())
