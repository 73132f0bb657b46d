"""Discretized 2D world: grids, reference inspection map, raycasting and visibility.

Cells are addressed by a flat index ``iy * width + ix``. Arrays are stored
row-major as ``[iy, ix]`` with row 0 at the minimum y of the map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np
from scipy import ndimage

from . import _raytrace
from ._validation import TWO_PI, check_int, check_point, check_positive, wrap_angle


class CellState(IntEnum):
    UNKNOWN = _raytrace.UNKNOWN
    FREE = _raytrace.FREE
    OCCUPIED = _raytrace.OCCUPIED


_FOUR = ((1, 0), (-1, 0), (0, 1), (0, -1))
_EIGHT = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))


@dataclass(frozen=True)
class GridSpec:
    resolution: float
    width: int
    height: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        check_positive(self.resolution, "resolution")
        check_int(self.width, "width", low=1)
        check_int(self.height, "height", low=1)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def size(self) -> int:
        return self.width * self.height

    def in_bounds(self, ix, iy) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def contains(self, p) -> bool:
        ix, iy = self.cell_of(p)
        return self.in_bounds(ix, iy)

    def cell_of(self, p) -> tuple[int, int]:
        return (
            int(math.floor((p[0] - self.origin[0]) / self.resolution)),
            int(math.floor((p[1] - self.origin[1]) / self.resolution)),
        )

    def center_of(self, ix, iy) -> np.ndarray:
        return np.array(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )

    def flat(self, ix, iy):
        return iy * self.width + ix

    def unflat(self, cell):
        return cell % self.width, cell // self.width

    def centers(self, cells) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.int64)
        ix, iy = cells % self.width, cells // self.width
        return np.column_stack(
            [
                self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution,
            ]
        )


@dataclass(frozen=True)
class SensorModel:
    fov: float = 1.5
    max_range: float = 4.0
    ray_count: int = 360

    def __post_init__(self):
        if not (0.0 < self.fov < TWO_PI):
            raise ValueError(f"fov must lie in (0, 2*pi), got {self.fov}")
        check_positive(self.max_range, "max_range")
        check_int(self.ray_count, "ray_count", low=2)


class OccupancyGrid:
    """Tri-state occupancy grid; the only mutable world type."""

    def __init__(self, spec: GridSpec, state=None):
        self.spec = spec
        if state is None:
            self.state = np.full(spec.shape, CellState.UNKNOWN, dtype=np.int8)
        else:
            state = np.asarray(state, dtype=np.int8)
            if state.shape != spec.shape:
                raise ValueError(f"state shape {state.shape} does not match grid {spec.shape}")
            self.state = state.copy()

    @classmethod
    def from_mask(cls, spec, occupied):
        state = np.where(np.asarray(occupied, dtype=bool), CellState.OCCUPIED, CellState.FREE)
        return cls(spec, state.astype(np.int8))

    @property
    def occupied(self) -> np.ndarray:
        return self.state == CellState.OCCUPIED

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.spec, self.state)

    def __getitem__(self, cell):
        ix, iy = cell
        return CellState(int(self.state[iy, ix]))

    def is_occupied_at(self, p) -> bool:
        ix, iy = self.spec.cell_of(p)
        if not self.spec.in_bounds(ix, iy):
            return True
        return self.state[iy, ix] == CellState.OCCUPIED

    def __eq__(self, other):
        return (
            isinstance(other, OccupancyGrid)
            and self.spec == other.spec
            and np.array_equal(self.state, other.state)
        )


@dataclass(eq=False)
class ReferenceMap:
    """Prior map of the inspection structure.

    Target cells are structure cells exposing at least one face to the
    interior free space. Each carries an inward normal angle and a surface
    point (the mean of its exposed face midpoints) used for visibility.
    """

    spec: GridSpec
    structure: np.ndarray
    target_cells: np.ndarray
    normals: np.ndarray
    surface_points: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray
    start: np.ndarray | None = None
    _index: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index = {int(c): i for i, c in enumerate(self.target_cells)}

    @classmethod
    def from_structure(cls, spec, structure, start=None, boundary=None, targets=None, sigma=1.5):
        structure = np.asarray(structure, dtype=bool)
        if structure.shape != spec.shape:
            raise ValueError("structure mask does not match grid shape")
        interior = _interior_free(spec, structure, start)
        if boundary is None:
            boundary = _edge_connected(structure)
        if targets is None:
            exposed = np.zeros(spec.shape, dtype=bool)
            for dx, dy in _FOUR:
                exposed |= structure & _shift(interior, dx, dy)
            target_cells = np.flatnonzero(exposed.ravel())
        else:
            target_cells = np.unique(np.asarray(targets, dtype=np.int64))
        normals, surface = _estimate_normals(spec, structure, interior, target_cells, sigma)
        return cls(
            spec=spec,
            structure=structure,
            target_cells=target_cells.astype(np.int64),
            normals=normals,
            surface_points=surface,
            boundary=np.asarray(boundary, dtype=bool),
            interior=interior,
            start=None if start is None else check_point(start, "start"),
        )

    @property
    def n_targets(self) -> int:
        return int(self.target_cells.size)

    def target_index(self, cell) -> int:
        return self._index[int(cell)]

    def is_target(self, cell) -> bool:
        return int(cell) in self._index

    def normal_of(self, cell) -> float:
        return float(self.normals[self._index[int(cell)]])

    @property
    def distance_field(self) -> np.ndarray:
        """Meters from each cell center to the nearest structure cell center."""
        d = self._cache.get("edt")
        if d is None:
            d = ndimage.distance_transform_edt(~self.structure) * self.spec.resolution
            self._cache["edt"] = d
        return d

    def as_grid(self) -> OccupancyGrid:
        return OccupancyGrid.from_mask(self.spec, self.structure)

    def free_at(self, p) -> bool:
        ix, iy = self.spec.cell_of(p)
        return self.spec.in_bounds(ix, iy) and not self.structure[iy, ix]


def _shift(mask, dx, dy):
    """out[iy, ix] = mask[iy + dy, ix + dx] with False outside."""
    out = np.zeros_like(mask)
    h, w = mask.shape
    ys_dst = slice(max(0, -dy), min(h, h - dy))
    xs_dst = slice(max(0, -dx), min(w, w - dx))
    ys_src = slice(max(0, dy), min(h, h + dy))
    xs_src = slice(max(0, dx), min(w, w + dx))
    out[ys_dst, xs_dst] = mask[ys_src, xs_src]
    return out


def _edge_connected(structure):
    labels, n = ndimage.label(structure, structure=np.ones((3, 3)))
    if n == 0:
        return np.zeros_like(structure)
    edge = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    edge = edge[edge > 0]
    return np.isin(labels, edge)


def _interior_free(spec, structure, start):
    free = ~structure
    labels, n = ndimage.label(free)
    if n == 0:
        return np.zeros_like(free)
    if start is not None:
        ix, iy = spec.cell_of(start)
        if not spec.in_bounds(ix, iy) or structure[iy, ix]:
            raise ValueError("start pose must lie in free space of the reference map")
        return labels == labels[iy, ix]
    edge = np.unique(np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]))
    inner = np.setdiff1d(np.arange(1, n + 1), edge)
    if inner.size == 0:
        return free
    return np.isin(labels, inner)


def _estimate_normals(spec, structure, interior, target_cells, sigma):
    """Smoothed inward normals plus per-cell surface points.

    The normal is the direction of steepest increase of the blurred interior
    indicator. If a unit step along it from the cell center does not land in
    interior free space, fall back to the mean of the exposed face directions
    (diagonal neighbors when no face is exposed).
    """
    n = target_cells.size
    normals = np.zeros(n)
    surface = np.zeros((n, 2))
    if n == 0:
        return normals, surface
    f = interior.astype(float)
    gy = ndimage.gaussian_filter(f, sigma, order=(1, 0), mode="constant")
    gx = ndimage.gaussian_filter(f, sigma, order=(0, 1), mode="constant")
    res = spec.resolution
    h, w = spec.shape
    for k, c in enumerate(target_cells):
        ix, iy = int(c % spec.width), int(c // spec.width)
        faces = [(dx, dy) for dx, dy in _FOUR if 0 <= ix + dx < w and 0 <= iy + dy < h and interior[iy + dy, ix + dx]]
        vx, vy = gx[iy, ix], gy[iy, ix]
        ok = math.hypot(vx, vy) > 1e-9
        if ok:
            ang = math.atan2(vy, vx)
            sx = int(math.floor(ix + 0.5 + math.cos(ang)))
            sy = int(math.floor(iy + 0.5 + math.sin(ang)))
            ok = 0 <= sx < w and 0 <= sy < h and interior[sy, sx]
        if not ok:
            dirs = faces or [
                (dx, dy) for dx, dy in _EIGHT if 0 <= ix + dx < w and 0 <= iy + dy < h and interior[iy + dy, ix + dx]
            ]
            if not dirs:
                raise ValueError(f"target cell {int(c)} has no interior free neighbor")
            ux = sum(dx / math.hypot(dx, dy) for dx, dy in dirs)
            uy = sum(dy / math.hypot(dx, dy) for dx, dy in dirs)
            if math.hypot(ux, uy) < 1e-9:
                ux, uy = dirs[0]
            ang = math.atan2(uy, ux)
        normals[k] = wrap_angle(ang)
        center = spec.center_of(ix, iy)
        if faces:
            off = np.mean(np.array(faces, dtype=float), axis=0) * 0.5 * res
        else:
            u = np.array([math.cos(ang), math.sin(ang)])
            off = 0.5 * res * u / max(abs(u[0]), abs(u[1]))
        surface[k] = center + off
    return normals, surface


# --- raycasting -----------------------------------------------------------


class HitRecord(NamedTuple):
    distance: float
    cell: int | None


def _check_in_grid(spec, p, name):
    p = check_point(p, name)
    ix, iy = spec.cell_of(p)
    if not spec.in_bounds(ix, iy):
        raise ValueError(f"{name} outside grid")
    return p, ix, iy


def raycast(grid: OccupancyGrid, origin, angle: float, max_range: float) -> HitRecord:
    """First occupied cell along a ray; unknown cells are transparent.

    The hit distance is where the ray enters the blocking cell. Without a
    hit (or when the ray leaves the grid) the distance is ``max_range``.
    """
    spec = grid.spec
    p, _, _ = _check_in_grid(spec, origin, "origin")
    check_positive(max_range, "max_range")
    hit, ix, iy, dist = _raytrace.ray_first_hit(
        grid.state, spec.origin[0], spec.origin[1], spec.resolution, p[0], p[1], float(angle), float(max_range)
    )
    if hit:
        return HitRecord(float(dist), int(spec.flat(ix, iy)))
    return HitRecord(float(max_range), None)


def line_of_sight(grid: OccupancyGrid, a, b) -> bool:
    """True iff no occupied cell other than the one containing ``b`` lies on a->b."""
    spec = grid.spec
    a, _, _ = _check_in_grid(spec, a, "a")
    b, bx, by = _check_in_grid(spec, b, "b")
    hit, _, _, _ = _raytrace.segment_first_hit(
        grid.state, spec.origin[0], spec.origin[1], spec.resolution, a[0], a[1], b[0], b[1], bx, by
    )
    return not hit


def _los_to_targets(grid, ref, pos, idx):
    """Line-of-sight mask from ``pos`` to the surface points of target rows ``idx``."""
    spec = grid.spec
    if idx.size == 0:
        return np.zeros(0, dtype=bool)
    cells = ref.target_cells[idx]
    pts = ref.surface_points[idx]
    return _raytrace.batch_segment_clear(
        grid.state,
        spec.origin[0],
        spec.origin[1],
        spec.resolution,
        float(pos[0]),
        float(pos[1]),
        np.ascontiguousarray(pts[:, 0]),
        np.ascontiguousarray(pts[:, 1]),
        (cells % spec.width).astype(np.int64),
        (cells // spec.width).astype(np.int64),
    )


def first_hits_to_targets(grid, ref, pos, idx) -> np.ndarray:
    """Flat id of the first blocking cell toward each target row in ``idx`` (-1 if clear)."""
    spec = grid.spec
    if idx.size == 0:
        return np.zeros(0, dtype=np.int64)
    cells = ref.target_cells[idx]
    pts = ref.surface_points[idx]
    hx, hy = _raytrace.batch_first_hit(
        grid.state,
        spec.origin[0],
        spec.origin[1],
        spec.resolution,
        float(pos[0]),
        float(pos[1]),
        np.ascontiguousarray(pts[:, 0]),
        np.ascontiguousarray(pts[:, 1]),
        (cells % spec.width).astype(np.int64),
        (cells // spec.width).astype(np.int64),
    )
    return np.where(hx >= 0, hy * spec.width + hx, -1)


def candidate_targets(ref: ReferenceMap, position, max_range: float):
    """Target rows within range of ``position`` with their bearings."""
    d = ref.surface_points - np.asarray(position, dtype=float)
    dist = np.hypot(d[:, 0], d[:, 1])
    idx = np.flatnonzero(dist <= max_range)
    bearing = np.arctan2(d[idx, 1], d[idx, 0])
    return idx, bearing


def visible_target_rows(grid, ref, position, yaw, sensor: SensorModel, within=None) -> np.ndarray:
    """Rows of ``ref.target_cells`` visible from the pose (fov, range, line of sight)."""
    idx, bearing = candidate_targets(ref, position, sensor.max_range)
    if within is not None:
        keep = within[idx]
        idx, bearing = idx[keep], bearing[keep]
    infov = np.abs(wrap_angle(bearing - yaw)) <= 0.5 * sensor.fov + 1e-12
    idx = idx[infov]
    if idx.size == 0:
        return idx
    return idx[_los_to_targets(grid, ref, position, idx)]


def visible_cells(grid: OccupancyGrid, ref: ReferenceMap, pose, sensor: SensorModel) -> set[int]:
    """Target cells inside the sensor cone at ``pose = (position, yaw)`` with line of sight."""
    position, yaw = pose
    p, ix, iy = _check_in_grid(grid.spec, position, "pose")
    rows = visible_target_rows(grid, ref, p, float(yaw), sensor)
    return {int(c) for c in ref.target_cells[rows]}


# --- text serialization -----------------------------------------------------

_CHAR_FREE, _CHAR_OCC, _CHAR_TARGET, _CHAR_UNKNOWN = ".", "#", "T", "?"


def _header(spec):
    return f"grid {spec.width} {spec.height} {spec.resolution!r} {spec.origin[0]!r} {spec.origin[1]!r}"


def _rows_to_text(spec, chars):
    lines = [_header(spec)]
    lines.extend("".join(row) for row in chars)
    return "\n".join(lines) + "\n"


def grid_to_text(grid: OccupancyGrid) -> str:
    table = np.array([_CHAR_UNKNOWN, _CHAR_FREE, _CHAR_OCC])
    return _rows_to_text(grid.spec, table[grid.state])


def reference_to_text(ref: ReferenceMap) -> str:
    chars = np.where(ref.structure, _CHAR_OCC, _CHAR_FREE).astype("<U1")
    iy, ix = np.divmod(ref.target_cells, ref.spec.width)
    chars[iy, ix] = _CHAR_TARGET
    return _rows_to_text(ref.spec, chars)


def parse_grid_text(text: str):
    """Parse the grid text format into ``(GridSpec, char array [iy, ix])``."""
    lines = [ln.rstrip("\r") for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty grid text")
    head = lines[0].split()
    if len(head) != 6 or head[0] != "grid":
        raise ValueError(f"bad grid header: {lines[0]!r}")
    spec = GridSpec(float(head[3]), int(head[1]), int(head[2]), (float(head[4]), float(head[5])))
    rows = lines[1:]
    if len(rows) != spec.height:
        raise ValueError(f"expected {spec.height} rows, found {len(rows)}")
    chars = np.array([list(r) for r in rows])
    if chars.shape != spec.shape:
        raise ValueError("row widths do not match header")
    bad = set(np.unique(chars)) - {_CHAR_FREE, _CHAR_OCC, _CHAR_TARGET, _CHAR_UNKNOWN}
    if bad:
        raise ValueError(f"unexpected grid characters: {sorted(bad)}")
    return spec, chars


def grid_from_text(text: str) -> OccupancyGrid:
    spec, chars = parse_grid_text(text)
    state = np.full(spec.shape, CellState.FREE, dtype=np.int8)
    state[(chars == _CHAR_OCC) | (chars == _CHAR_TARGET)] = CellState.OCCUPIED
    state[chars == _CHAR_UNKNOWN] = CellState.UNKNOWN
    return OccupancyGrid(spec, state)


def reference_from_text(text: str, start=None) -> ReferenceMap:
    spec, chars = parse_grid_text(text)
    structure = (chars == _CHAR_OCC) | (chars == _CHAR_TARGET)
    marked = np.flatnonzero((chars == _CHAR_TARGET).ravel())
    return ReferenceMap.from_structure(spec, structure, start=start, targets=marked if marked.size else None)
