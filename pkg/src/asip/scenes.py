"""Seeded generation of benchmark scenes and occlusion scenarios.

A scene is an enclosing rectangular boundary with structural components
(line, L, T, cross, arc, disc) forming the reference map, plus optional
static obstacles that exist only in the truth grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from ._validation import check_int, check_positive
from .world import GridSpec, OccupancyGrid, ReferenceMap, SensorModel

KINDS = ("line", "l_shape", "t_shape", "cross", "arc", "circle")

# component-kind mixture weights per benchmark configuration
CONFIG_MIXTURES = {
    1: {"line": 1.0, "l_shape": 1.0},
    2: {"line": 1.0, "l_shape": 1.0, "t_shape": 1.0},
    3: {"line": 1.0, "l_shape": 1.0, "t_shape": 1.0, "cross": 1.0},
    4: {"line": 1.0, "l_shape": 1.0, "arc": 1.0, "circle": 1.0},
    5: {k: 1.0 for k in KINDS},
}

WALL_THICKNESS = 0.3


class PlacementInfeasible(RuntimeError):
    """Raised when rejection sampling cannot realize a scene."""


@dataclass(frozen=True)
class ComponentShape:
    kind: str
    size: tuple
    position: tuple[float, float]
    rotation: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if any(s <= 0 for s in self.size):
            raise ValueError("component sizes must be positive")
        if self.kind == "arc" and not (0.0 < self.size[1] < 2 * math.pi):
            raise ValueError("arc sweep must lie in (0, 2*pi)")

    def rasterize(self, spec: GridSpec) -> np.ndarray:
        centers_x = spec.origin[0] + (np.arange(spec.width) + 0.5) * spec.resolution
        centers_y = spec.origin[1] + (np.arange(spec.height) + 0.5) * spec.resolution
        X, Y = np.meshgrid(centers_x - self.position[0], centers_y - self.position[1])
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        # local frame of the component
        u = c * X + s * Y
        v = -s * X + c * Y
        t = 0.5 * WALL_THICKNESS
        if self.kind == "circle":
            return u * u + v * v <= self.size[0] ** 2
        if self.kind == "arc":
            r, sweep = self.size
            rho = np.hypot(u, v)
            ang = np.abs(np.arctan2(v, u))
            return (np.abs(rho - r) <= t) & (ang <= 0.5 * sweep)
        mask = np.zeros(spec.shape, dtype=bool)
        for (x0, y0), (x1, y1) in self._bars():
            mask |= _bar(u, v, x0, y0, x1, y1, t)
        return mask

    def _bars(self):
        if self.kind == "line":
            a = self.size[0]
            return [((-a / 2, 0.0), (a / 2, 0.0))]
        if self.kind == "l_shape":
            a, b = self.size
            return [((0.0, 0.0), (a, 0.0)), ((0.0, 0.0), (0.0, b))]
        if self.kind == "t_shape":
            a, b = self.size
            return [((-a / 2, 0.0), (a / 2, 0.0)), ((0.0, 0.0), (0.0, -b))]
        a, b = self.size
        return [((-a, 0.0), (a, 0.0)), ((0.0, -b), (0.0, b))]


def _bar(u, v, x0, y0, x1, y1, t):
    """Rectangle of half-width t around the segment, ends extended by t."""
    dx, dy = x1 - x0, y1 - y0
    length = math.hypot(dx, dy)
    ex, ey = dx / length, dy / length
    along = (u - x0) * ex + (v - y0) * ey
    perp = -(u - x0) * ey + (v - y0) * ex
    return (np.abs(perp) <= t) & (along >= -t) & (along <= length + t)


@dataclass(frozen=True)
class Obstacle:
    kind: str  # "rect" (axis aligned, size = side lengths) or "disc" (size = diameter)
    center: tuple[float, float]
    size: tuple

    def rasterize(self, spec: GridSpec) -> np.ndarray:
        xs = spec.origin[0] + (np.arange(spec.width) + 0.5) * spec.resolution - self.center[0]
        ys = spec.origin[1] + (np.arange(spec.height) + 0.5) * spec.resolution - self.center[1]
        X, Y = np.meshgrid(xs, ys)
        if self.kind == "disc":
            return X * X + Y * Y <= (0.5 * self.size[0]) ** 2
        return (np.abs(X) <= 0.5 * self.size[0]) & (np.abs(Y) <= 0.5 * self.size[1])


@dataclass(frozen=True)
class ScenarioConfig:
    config_id: int = 1
    seed: int = 0
    boundary: tuple[float, float] = (20.0, 20.0)
    component_count: int | None = None
    component_range: tuple[int, int] = (10, 15)
    obstacle_count: int = 0
    obstacle_size_range: tuple[float, float] = (0.4, 1.5)
    resolution: float = 0.1
    min_gap: float = 1.3
    start_offset: float = 1.0

    def __post_init__(self):
        check_int(self.config_id, "config_id", 1, 5)
        check_int(self.seed, "seed", 0, 2**64 - 1)
        check_positive(self.boundary[0], "boundary width")
        check_positive(self.boundary[1], "boundary height")
        lo, hi = self.component_range
        if not 0 <= lo <= hi:
            raise ValueError("component_range must satisfy 0 <= low <= high")
        if self.component_count is not None:
            check_int(self.component_count, "component_count", 0)
        check_int(self.obstacle_count, "obstacle_count", 0)
        a, b = self.obstacle_size_range
        if not 0 < a <= b:
            raise ValueError("obstacle_size_range must satisfy 0 < low <= high")
        check_positive(self.resolution, "resolution")

    def with_seed(self, seed):
        return ScenarioConfig(**{**asdict(self), "seed": int(seed)})


@dataclass
class Scene:
    config: ScenarioConfig
    reference: ReferenceMap
    truth: OccupancyGrid
    start: np.ndarray
    components: list = field(default_factory=list)
    obstacles: list = field(default_factory=list)
    occluded: list | None = None

    def metadata(self) -> dict:
        meta = {
            "config": asdict(self.config),
            "config_id": self.config.config_id,
            "seed": self.config.seed,
            "start": [float(self.start[0]), float(self.start[1])],
            "components": [
                {"kind": c.kind, "size": list(c.size), "position": list(c.position), "rotation": c.rotation}
                for c in self.components
            ],
            "obstacles": [
                {"kind": o.kind, "center": list(o.center), "size": list(o.size)} for o in self.obstacles
            ],
        }
        if self.occluded is not None:
            meta["occluded_cells"] = [int(c) for c in self.occluded]
        return meta

    def metadata_json(self) -> str:
        return json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n"


def _rng(seed, stream=0):
    return np.random.Generator(np.random.PCG64([int(seed) & (2**64 - 1), stream]))


def _grid_for(config):
    res = config.resolution
    w = int(round(config.boundary[0] / res))
    h = int(round(config.boundary[1] / res))
    return GridSpec(res, w, h, (0.0, 0.0))


def _boundary_mask(spec):
    m = np.zeros(spec.shape, dtype=bool)
    m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    return m


def _sample_component(rng, kind, spec):
    rot = float(rng.integers(0, 24)) * math.pi / 12
    if kind == "line":
        size = (float(rng.uniform(1.5, 3.5)),)
    elif kind == "l_shape":
        size = (float(rng.uniform(1.2, 2.5)), float(rng.uniform(1.2, 2.5)))
    elif kind == "t_shape":
        size = (float(rng.uniform(2.0, 3.0)), float(rng.uniform(1.0, 2.0)))
    elif kind == "cross":
        size = (float(rng.uniform(0.8, 1.6)), float(rng.uniform(0.8, 1.6)))
    elif kind == "arc":
        size = (float(rng.uniform(0.9, 1.5)), float(rng.uniform(math.pi / 3, math.pi)))
    else:
        size = (float(rng.uniform(0.4, 0.9)),)
    w = spec.width * spec.resolution
    h = spec.height * spec.resolution
    pos = (float(rng.uniform(0.15 * w, 0.85 * w)), float(rng.uniform(0.15 * h, 0.85 * h)))
    return ComponentShape(kind, size, pos, rot)


def _distance_to(mask, res):
    return ndimage.distance_transform_edt(~mask) * res


def generate_scene(config: ScenarioConfig, max_attempts: int = 400) -> Scene:
    """Realize a reference map and truth grid from a config; pure in (config, seed)."""
    spec = _grid_for(config)
    rng = _rng(config.seed, config.config_id)
    res = spec.resolution
    start = np.array([spec.origin[0] + config.start_offset, spec.origin[1] + config.start_offset])
    structure = _boundary_mask(spec)
    cy, cx = np.mgrid[0 : spec.height, 0 : spec.width]
    start_dist = np.hypot((cx + 0.5) * res + spec.origin[0] - start[0], (cy + 0.5) * res + spec.origin[1] - start[1])

    mixture = CONFIG_MIXTURES[config.config_id]
    kinds = sorted(mixture)
    weights = np.array([mixture[k] for k in kinds], dtype=float)
    weights /= weights.sum()
    if config.component_count is None:
        lo, hi = config.component_range
        n_comp = int(rng.integers(lo, hi + 1))
    else:
        n_comp = config.component_count

    components = []
    for _ in range(n_comp):
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        dist = _distance_to(structure, res)
        for _attempt in range(max_attempts):
            comp = _sample_component(rng, kind, spec)
            cells = comp.rasterize(spec)
            if not cells.any():
                continue
            if dist[cells].min() < config.min_gap:
                continue
            if start_dist[cells].min() < config.min_gap + 0.5:
                continue
            structure = structure | cells
            components.append(comp)
            break
        else:
            raise PlacementInfeasible("placement infeasible")

    reference = ReferenceMap.from_structure(spec, structure, start=start, boundary=_boundary_mask(spec))
    if not _single_free_region(structure, spec, start):
        raise PlacementInfeasible("placement infeasible")

    obstacles, truth_mask = _place_obstacles(rng, config, spec, structure, start, config.obstacle_count, max_attempts)
    truth = OccupancyGrid.from_mask(spec, truth_mask)
    return Scene(config, reference, truth, start, components, obstacles)


def _single_free_region(occupied, spec, start):
    labels, n = ndimage.label(~occupied)
    ix, iy = spec.cell_of(start)
    if occupied[iy, ix]:
        return False
    return n == 1


def _sample_obstacle(rng, config, spec, center=None):
    lo, hi = config.obstacle_size_range
    if center is None:
        w = spec.width * spec.resolution
        h = spec.height * spec.resolution
        center = (float(rng.uniform(0.5, w - 0.5)), float(rng.uniform(0.5, h - 0.5)))
    if rng.random() < 0.5:
        return Obstacle("rect", center, (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))))
    return Obstacle("disc", center, (float(rng.uniform(lo, hi)),))


def obstacle_admissible(obstacle, spec, structure, start, occupied, min_structure_gap=0.2):
    """Obstacle must not touch structure (targets stay intact), cover the start or split free space."""
    cells = obstacle.rasterize(spec)
    if not cells.any():
        return False, cells
    dist = _distance_to(structure, spec.resolution)
    if dist[cells].min() < min_structure_gap:
        return False, cells
    pts = spec.centers(np.flatnonzero(cells.ravel()))
    if np.hypot(pts[:, 0] - start[0], pts[:, 1] - start[1]).min() < 1.0:
        return False, cells
    if not _single_free_region(occupied | cells, spec, start):
        return False, cells
    return True, cells


def _place_obstacles(rng, config, spec, structure, start, count, max_attempts):
    occupied = structure.copy()
    obstacles = []
    for _ in range(count):
        for _attempt in range(max_attempts):
            ob = _sample_obstacle(rng, config, spec)
            ok, cells = obstacle_admissible(ob, spec, structure, start, occupied)
            if ok:
                occupied |= cells
                obstacles.append(ob)
                break
        else:
            raise PlacementInfeasible("placement infeasible")
    return obstacles, occupied


# --- occlusion scenarios ------------------------------------------------------


def occlusion_footprint(reference, truth, viewpoints, sensor):
    """Per-viewpoint nominal footprints on the reference and the truth.

    Returns ``(occluded, obstructed_footprint)`` as sorted arrays of target
    cells. ``occluded`` holds cells inside some nominal footprint that no
    viewpoint sees in the truth grid under its nominal yaw;
    ``obstructed_footprint`` is the union of nominal footprints of the
    viewpoints that lost at least one cell.
    """
    from .world import visible_target_rows

    ref_grid = reference.as_grid()
    nominal_union = np.zeros(reference.n_targets, dtype=bool)
    truth_union = np.zeros(reference.n_targets, dtype=bool)
    obstructed = np.zeros(reference.n_targets, dtype=bool)
    for vp in viewpoints:
        pos = np.asarray(vp.position)
        nom = visible_target_rows(ref_grid, reference, pos, vp.yaw, sensor)
        if truth.is_occupied_at(pos):
            seen = np.zeros(0, dtype=np.int64)
        else:
            seen = visible_target_rows(truth, reference, pos, vp.yaw, sensor)
        nominal_union[nom] = True
        truth_union[seen] = True
        if np.setdiff1d(nom, seen).size:
            obstructed[nom] = True
    occluded = nominal_union & ~truth_union
    return reference.target_cells[occluded], reference.target_cells[obstructed]


def occlusion_is_valid(occluded, obstructed_footprint):
    """Exclusion rule: occlusion must exist and be partial."""
    occ = set(int(c) for c in occluded)
    foot = set(int(c) for c in obstructed_footprint)
    return bool(occ) and occ < foot


DEFAULT_OCCLUSION_BASE = ScenarioConfig(
    config_id=5, boundary=(12.0, 12.0), component_range=(3, 5), obstacle_count=0,
    obstacle_size_range=(0.4, 1.0),
)


def generate_occlusion_scenario(seed, base: ScenarioConfig = DEFAULT_OCCLUSION_BASE, sensor=None,
                                planner_params=None, n_obstacles=(1, 3), budget=300) -> Scene:
    """Scene whose unmodeled obstacles partially occlude nominal viewpoints.

    Occluders are sampled in the band between nominal viewpoints and their
    surfaces and resampled until the occluded set is non-empty and a strict
    subset of the obstructed viewpoints' nominal footprint.
    """
    from .global_planner import GlobalCoveragePlanner

    sensor = sensor or SensorModel()
    base = base.with_seed(seed)
    scene = generate_scene(base)
    planner = GlobalCoveragePlanner(**(planner_params or {}))
    planner.fit(scene.reference, start=scene.start)
    vps = planner.plan_.viewpoints
    if not vps:
        raise PlacementInfeasible("placement infeasible")
    spec = scene.reference.spec
    structure = scene.reference.structure
    rng = _rng(seed, 1000 + base.config_id)
    vp_pos = np.array([v.position for v in vps])
    for _ in range(budget):
        count = int(rng.integers(n_obstacles[0], n_obstacles[1] + 1))
        occupied = structure.copy()
        obstacles = []
        for _k in range(count):
            v = vps[int(rng.integers(len(vps)))]
            standoff = planner.standoff
            toward = np.array([math.cos(v.yaw), math.sin(v.yaw)])
            side = np.array([-toward[1], toward[0]])
            depth = float(rng.uniform(0.35, 0.8)) * standoff
            center = np.asarray(v.position) + depth * toward + float(rng.uniform(-0.6, 0.6)) * side
            ob = _sample_obstacle(rng, base, spec, center=(float(center[0]), float(center[1])))
            ok, cells = obstacle_admissible(ob, spec, structure, scene.start, occupied)
            if not ok:
                continue
            if _covers_any(cells, spec, vp_pos, 0.3):
                continue
            occupied |= cells
            obstacles.append(ob)
        if not obstacles:
            continue
        truth = OccupancyGrid.from_mask(spec, occupied)
        occluded, footprint = occlusion_footprint(scene.reference, truth, vps, sensor)
        if occlusion_is_valid(occluded, footprint):
            return Scene(base, scene.reference, truth, scene.start, scene.components, obstacles,
                         occluded=[int(c) for c in occluded])
    raise PlacementInfeasible("occlusion scenario budget exhausted")


def _covers_any(cells, spec, points, radius):
    d = ndimage.distance_transform_edt(~cells) * spec.resolution
    for p in points:
        ix, iy = spec.cell_of(p)
        if spec.in_bounds(ix, iy) and d[iy, ix] < radius:
            return True
    return False
