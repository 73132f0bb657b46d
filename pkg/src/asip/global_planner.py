"""Coverage planning over a reference map.

Pipeline: region-growing segmentation of the target surface, linear viewpoint
placement per segment, a yaw-aware open tour, run-length grouping of the tour
into clusters, merging of undersized clusters into surface-contiguous siblings,
and exact (or 2-opt) reordering inside each cluster.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from . import tsp
from ._validation import (
    angle_diff,
    check_int,
    check_is_fitted,
    check_point,
    check_positive,
    wrap_angle,
)
from .world import ReferenceMap, SensorModel, visible_target_rows

_EIGHT = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


# --- types -----------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    id: int
    cells: np.ndarray  # flat cell ids, ordered along the surface
    rows: np.ndarray  # matching rows into the reference target arrays
    orientation: float  # principal (tangent) direction
    mean_normal: float
    arc_length: float

    def __len__(self):
        return int(self.cells.size)


@dataclass(frozen=True)
class Viewpoint:
    position: tuple
    yaw: float
    segment: int
    order: int = 0  # rank along the source segment's surface
    reachable: bool = True

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass
class Cluster:
    id: int
    segment: int
    viewpoints: list

    def __len__(self):
        return len(self.viewpoints)

    @property
    def centroid(self) -> np.ndarray:
        return np.mean([v.position for v in self.viewpoints], axis=0)


@dataclass
class InspectionPlan:
    clusters: list = field(default_factory=list)
    start: tuple | None = None

    @property
    def viewpoints(self) -> list:
        return [v for c in self.clusters for v in c.viewpoints]

    @property
    def entry_waypoints(self) -> list:
        return [c.viewpoints[0].position for c in self.clusters]

    def __len__(self):
        return sum(len(c) for c in self.clusters)

    def to_dict(self) -> dict:
        return {
            "start": None if self.start is None else [float(x) for x in self.start],
            "clusters": [
                {
                    "id": c.id,
                    "segment": c.segment,
                    "entry": [float(x) for x in c.viewpoints[0].position],
                    "viewpoints": [
                        [float(v.position[0]), float(v.position[1]), float(v.yaw), int(v.segment)]
                        for v in c.viewpoints
                    ],
                    "surface_order": [int(v.order) for v in c.viewpoints],
                }
                for c in self.clusters
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InspectionPlan":
        clusters = []
        for c in d["clusters"]:
            orders = c.get("surface_order", [0] * len(c["viewpoints"]))
            vps = [
                Viewpoint((x, y), yaw, int(seg), int(o))
                for (x, y, yaw, seg), o in zip(c["viewpoints"], orders)
            ]
            clusters.append(Cluster(int(c["id"]), int(c["segment"]), vps))
        start = d.get("start")
        return cls(clusters, None if start is None else tuple(start))


@dataclass(frozen=True)
class GlobalPlannerParams:
    angle_threshold: float = math.radians(10.0)
    standoff: float = 1.5
    spacing: float | None = None
    overlap: float = 0.3
    fov: float = 1.5
    max_range: float = 4.0
    tau_init: int = 1
    tau_max: int = 3
    yaw_weight: float = 1.0
    tsp_budget: int | None = None
    clearance: float = 0.5
    min_segment_cells: int = 4
    prune_redundant: bool = True
    tsp_kicks: int = 100
    merge_cost_aware: bool = True

    def __post_init__(self):
        check_positive(self.angle_threshold, "angle_threshold")
        check_positive(self.standoff, "standoff")
        check_positive(self.fov, "fov")
        check_positive(self.max_range, "max_range")
        if self.standoff >= self.max_range:
            raise ValueError("standoff must be smaller than the sensor max_range")
        if self.spacing is not None:
            check_positive(self.spacing, "spacing")
        if not 0.0 <= self.overlap < 1.0:
            raise ValueError(f"overlap must be in [0, 1), got {self.overlap}")
        check_int(self.tau_init, "tau_init", low=1)
        check_int(self.tau_max, "tau_max", low=self.tau_init)
        check_positive(self.yaw_weight, "yaw_weight", strict=False)
        check_positive(self.clearance, "clearance", strict=False)
        check_int(self.min_segment_cells, "min_segment_cells", low=1)
        if self.tsp_budget is not None:
            check_int(self.tsp_budget, "tsp_budget", low=0)
        check_int(self.tsp_kicks, "tsp_kicks", low=0)

    @property
    def effective_spacing(self) -> float:
        """Surface distance between viewpoints; defaults to the FoV footprint width minus overlap."""
        if self.spacing is not None:
            return float(self.spacing)
        return 2.0 * self.standoff * math.tan(0.5 * self.fov) * (1.0 - self.overlap)


# --- segmentation -------------------------------------------------------------


def _target_neighbors(ref: ReferenceMap) -> list:
    w = ref.spec.width
    lookup = np.full(ref.spec.size, -1, dtype=np.int64)
    lookup[ref.target_cells] = np.arange(ref.n_targets)
    h = ref.spec.height
    nbrs = []
    for c in ref.target_cells:
        ix, iy = int(c % w), int(c // w)
        row = []
        for dx, dy in _EIGHT:
            jx, jy = ix + dx, iy + dy
            if 0 <= jx < w and 0 <= jy < h:
                r = lookup[jy * w + jx]
                if r >= 0:
                    row.append(int(r))
        nbrs.append(sorted(row))
    return nbrs


def curvature_proxy(ref: ReferenceMap, nbrs=None) -> np.ndarray:
    """Standard deviation of the normals over each target's 8-neighborhood (cell included)."""
    if nbrs is None:
        nbrs = _target_neighbors(ref)
    n = ref.normals
    out = np.zeros(ref.n_targets)
    for i, nb in enumerate(nbrs):
        if nb:
            rel = wrap_angle(n[[i] + nb] - n[i])
            out[i] = float(np.std(rel))
    return out


def _grow(ref, nbrs, threshold):
    n = ref.n_targets
    normals = ref.normals
    label = np.full(n, -1, dtype=np.int64)
    seeds = np.lexsort((np.arange(n), curvature_proxy(ref, nbrs)))
    regions = []
    for seed in seeds:
        if label[seed] >= 0:
            continue
        rid = len(regions)
        label[seed] = rid
        members = [int(seed)]
        sx, sy = math.cos(normals[seed]), math.sin(normals[seed])
        queue = deque([int(seed)])
        while queue:
            r = queue.popleft()
            for q in nbrs[r]:
                if label[q] >= 0:
                    continue
                mean = math.atan2(sy, sx)
                if angle_diff(normals[q], mean) <= threshold:
                    label[q] = rid
                    members.append(q)
                    sx += math.cos(normals[q])
                    sy += math.sin(normals[q])
                    queue.append(q)
        # the mean drifts while growing; evict members it left behind
        while len(members) > 1:
            mean = _circular_mean(normals[members])
            dev = angle_diff(normals[members[1:]], mean)  # the seed stays
            if dev.max() <= threshold:
                break
            worst = members[1 + int(np.argmax(dev))]
            label[worst] = -1
            members.remove(worst)
        regions.append(members)
    return label, regions


def _circular_mean(angles) -> float:
    a = np.asarray(angles, dtype=float)
    return float(math.atan2(np.sin(a).sum(), np.cos(a).sum()))


def _absorb_fragments(ref, nbrs, label, regions, min_cells):
    """Fold regions smaller than ``min_cells`` into the adjacent region with the closest mean normal."""
    normals = ref.normals
    alive = {i: list(m) for i, m in enumerate(regions)}
    changed = True
    while changed:
        changed = False
        small = sorted((len(m), i) for i, m in alive.items() if len(m) < min_cells)
        for _, rid in small:
            if rid not in alive:
                continue
            members = alive[rid]
            adj = sorted({int(label[q]) for r in members for q in nbrs[r]} - {rid})
            if not adj:
                continue
            mine = _circular_mean(normals[members])
            best = min(adj, key=lambda a: (angle_diff(_circular_mean(normals[alive[a]]), mine), a))
            alive[best].extend(members)
            label[members] = best
            del alive[rid]
            changed = True
            break
    return [alive[k] for k in sorted(alive)]


def _principal_axis(points: np.ndarray, fallback_normal: float) -> np.ndarray:
    if points.shape[0] >= 2:
        c = points - points.mean(axis=0)
        cov = c.T @ c
        if np.trace(cov) > 1e-12:
            w, v = np.linalg.eigh(cov)
            axis = v[:, int(np.argmax(w))]
            # canonical sign so results do not depend on the eigen solver
            if axis[0] < -1e-12 or (abs(axis[0]) <= 1e-12 and axis[1] < 0):
                axis = -axis
            return axis
    t = fallback_normal + 0.5 * math.pi
    return np.array([math.cos(t), math.sin(t)])


def _build_segment(ref, sid, rows, core) -> Segment:
    rows = np.asarray(rows, dtype=np.int64)
    pts = ref.surface_points[rows]
    mean_normal = _circular_mean(ref.normals[core])
    axis = _principal_axis(pts, mean_normal)
    proj = pts @ axis
    order = np.lexsort((rows, proj))
    rows = rows[order]
    pts = pts[order]
    steps = np.hypot(*np.diff(pts, axis=0).T).sum() if rows.size > 1 else 0.0
    return Segment(
        id=sid,
        cells=ref.target_cells[rows],
        rows=rows,
        orientation=float(wrap_angle(math.atan2(axis[1], axis[0]))),
        mean_normal=mean_normal,
        arc_length=float(steps + ref.spec.resolution),
    )


def map_segmentation(ref: ReferenceMap, params: GlobalPlannerParams | None = None) -> list:
    """Partition target cells into segments of coherent normal direction."""
    params = params or GlobalPlannerParams()
    if ref.n_targets == 0:
        return []
    nbrs = _target_neighbors(ref)
    label, regions = _grow(ref, nbrs, params.angle_threshold)
    cores = {i: list(m) for i, m in enumerate(regions)}
    merged = (
        _absorb_fragments(ref, nbrs, label, regions, params.min_segment_cells)
        if params.min_segment_cells > 1
        else regions
    )
    out = []
    for members in merged:
        # the normal of a merged region is that of its largest grown part
        parts = {int(label[m]) for m in members}
        base = max(parts, key=lambda p: (len(cores[p]), -p)) if parts else None
        core = [m for m in members if m in set(cores.get(base, members))] or members
        out.append((min(int(ref.target_cells[m]) for m in members), members, core))
    out.sort(key=lambda t: t[0])
    return [_build_segment(ref, i, m, c) for i, (_, m, c) in enumerate(out)]


# --- viewpoints ----------------------------------------------------------------


def _sample_positions(length: float, spacing: float) -> np.ndarray:
    if length < spacing:
        return np.array([0.5 * length])
    s = np.arange(0.0, length + 1e-9, spacing)
    if length - s[-1] > 0.5 * spacing:
        s = np.append(s, length)
    return s


def _inward(ref, params, base, normal):
    """Walk from standoff toward the surface until the pose is free with clearance."""
    spec = ref.spec
    edt = ref.distance_field
    res = spec.resolution
    for t in np.arange(params.standoff, 0.0, -0.5 * res):
        p = base + t * normal
        ix, iy = spec.cell_of(p)
        if not spec.in_bounds(ix, iy):
            continue
        if ref.interior[iy, ix] and edt[iy, ix] >= params.clearance:
            if t == params.standoff:
                return p
            return spec.center_of(ix, iy)
    return None


def _place(ref, params, base, normal, axis, toward: float):
    """Pull inward along the normal; failing that, slide along the surface.

    Sliding tries offsets of growing size up to half the spacing, the
    direction pointing at the segment center (sign ``toward``) first.
    """
    p = _inward(ref, params, base, normal)
    if p is not None:
        return p
    step = ref.spec.resolution
    sign = 1.0 if toward >= 0 else -1.0
    for k in range(1, int(0.5 * params.effective_spacing / step) + 1):
        for sg in (sign, -sign):
            p = _inward(ref, params, base + sg * k * step * axis, normal)
            if p is not None:
                return p
    return None


def generate_viewpoints(segment: Segment, params: GlobalPlannerParams, ref: ReferenceMap) -> list:
    """Viewpoints on a line parallel to the segment at the standoff distance, facing it."""
    if len(segment) == 0:
        raise ValueError("segment is empty")
    pts = ref.surface_points[segment.rows]
    axis = np.array([math.cos(segment.orientation), math.sin(segment.orientation)])
    normal = np.array([-axis[1], axis[0]])
    mn = np.array([math.cos(segment.mean_normal), math.sin(segment.mean_normal)])
    if normal @ mn < 0:
        normal = -normal
    yaw = float(wrap_angle(math.atan2(-normal[1], -normal[0])))
    centroid = pts.mean(axis=0)
    proj = (pts - centroid) @ axis
    half = 0.5 * ref.spec.resolution
    s0, s1 = proj.min() - half, proj.max() + half
    length = s1 - s0
    out = []
    for s in _sample_positions(length, params.effective_spacing):
        base = centroid + (s0 + s) * axis
        p = _place(ref, params, base, normal, axis, 0.5 * length - s)
        if p is None:
            continue
        out.append(Viewpoint((float(p[0]), float(p[1])), yaw, segment.id, len(out)))
    return out


def prune_redundant(viewpoints, ref: ReferenceMap, params: GlobalPlannerParams, segments=None) -> list:
    """Drop viewpoints whose every visible target is also seen by another kept viewpoint.

    Candidates are visited shortest source segment first, so short end faces
    already covered from their neighbors lose their dedicated viewpoint. The
    union of targets visible on the reference map is unchanged. Surface ranks
    are renumbered per segment afterwards.
    """
    if not viewpoints:
        return []
    grid = ref.as_grid()
    sensor = SensorModel(fov=params.fov, max_range=params.max_range)
    seen = [visible_target_rows(grid, ref, v.xy, v.yaw, sensor) for v in viewpoints]
    count = np.zeros(ref.n_targets, dtype=np.int64)
    for rows in seen:
        count[rows] += 1
    length = {s.id: s.arc_length for s in segments} if segments else {}
    keep = np.ones(len(viewpoints), dtype=bool)
    for i in sorted(range(len(viewpoints)), key=lambda i: (length.get(viewpoints[i].segment, 0.0), i)):
        rows = seen[i]
        if np.all(count[rows] >= 2):
            keep[i] = False
            count[rows] -= 1
    out, rank = [], {}
    for v, k in zip(viewpoints, keep):
        if k:
            r = rank.get(v.segment, 0)
            rank[v.segment] = r + 1
            out.append(replace(v, order=r))
    return out


# --- sequencing ---------------------------------------------------------------


def remap(order, viewpoints) -> list:
    """Group consecutive tour positions sharing a source segment."""
    clusters = []
    for idx in order:
        v = viewpoints[int(idx)]
        if clusters and clusters[-1].segment == v.segment:
            clusters[-1].viewpoints.append(v)
        else:
            clusters.append(Cluster(len(clusters), v.segment, [v]))
    return clusters


def _contiguous(orders) -> bool:
    o = sorted(orders)
    return len(set(o)) == len(o) and o[-1] - o[0] + 1 == len(o)


def _fuse_adjacent(clusters) -> list:
    out = []
    for c in clusters:
        if out and out[-1].segment == c.segment:
            out[-1] = Cluster(out[-1].id, c.segment, out[-1].viewpoints + c.viewpoints)
        else:
            out.append(Cluster(c.id, c.segment, list(c.viewpoints)))
    return out


def _merge_candidates(clusters, tau):
    """Fusions of a small cluster into a same-segment sibling, nearest sibling first."""
    for i, c in enumerate(clusters):
        if len(c) >= tau:
            continue
        cen = c.centroid
        siblings = [
            (float(np.hypot(*(s.centroid - cen))), j)
            for j, s in enumerate(clusters)
            if j != i and s.segment == c.segment
        ]
        for _, j in sorted(siblings):
            s = clusters[j]
            if not _contiguous([v.order for v in s.viewpoints + c.viewpoints]):
                continue
            fused = sorted(s.viewpoints + c.viewpoints, key=lambda v: v.order)
            out = []
            for k, other in enumerate(clusters):
                if k == i:
                    continue
                out.append(Cluster(other.id, other.segment, fused) if k == j else other)
            yield _fuse_adjacent(out)


def merge_outliers(clusters, tau: int, cost=None) -> list:
    """Fold clusters smaller than ``tau`` into the nearest same-segment sibling.

    A fusion happens only if the combined viewpoints form a contiguous run of
    the segment's surface order. With ``cost`` (a callable on a cluster
    list) a fusion is also rejected when it raises the cost. Repeats until no
    cluster can be fused.
    """
    check_int(tau, "tau", low=1)
    current = _fuse_adjacent(clusters)
    current_cost = cost(current) if cost is not None else 0.0
    while True:
        for cand in _merge_candidates(current, tau):
            if cost is None:
                current = cand
                break
            c = cost(cand)
            if c <= current_cost + 1e-9:
                current, current_cost = cand, c
                break
        else:
            break
    return [Cluster(i, c.segment, c.viewpoints) for i, c in enumerate(current)]


def _path_len(pts, order, entry, exit_):
    return tsp.open_path_length(pts, order, entry, exit_)


def _two_opt_fixed_ends(pts, entry, exit_):
    n = len(pts)
    ends = [np.asarray(exit_, dtype=float)] if exit_ is not None else []
    nodes = np.vstack([np.asarray(entry, dtype=float)] + [pts] + ends)
    D = np.hypot(nodes[:, None, 0] - nodes[None, :, 0], nodes[:, None, 1] - nodes[None, :, 1])
    seq = list(range(len(nodes)))
    improved = True
    while improved:
        improved = False
        for i in range(1, n):
            for j in range(i + 1, n + 1):
                a, b, c = seq[i - 1], seq[i], seq[j]
                delta = D[a, c] - D[a, b]
                if j + 1 < len(seq):
                    e = seq[j + 1]
                    delta += D[b, e] - D[c, e]
                if delta < -1e-10:
                    seq[i : j + 1] = seq[i : j + 1][::-1]
                    improved = True
    return [k - 1 for k in seq[1 : n + 1]]


def reorder_cluster(pts: np.ndarray, entry, exit_=None, exact_limit: int = 10) -> list:
    """Shortest visiting order of ``pts`` from ``entry`` (to ``exit_`` if given).

    The original order is kept unless a strictly shorter one exists.
    """
    n = len(pts)
    if n <= 1:
        return list(range(n))
    ident = list(range(n))
    base = _path_len(pts, ident, entry, exit_)
    if n <= exact_limit:
        D = np.hypot(pts[:, None, 0] - pts[None, :, 0], pts[:, None, 1] - pts[None, :, 1])
        d_in = np.hypot(*(pts - np.asarray(entry)).T)
        d_out = np.hypot(*(pts - np.asarray(exit_)).T) if exit_ is not None else np.zeros(n)
        _, order = tsp.held_karp_path(d_in, D, d_out, exit_ is not None)
        cand = [int(k) for k in order]
    else:
        cand = _two_opt_fixed_ends(pts, entry, exit_)
    if _path_len(pts, cand, entry, exit_) < base - 1e-9:
        return cand
    return ident


def local_reorder(clusters, start=None, exact_limit: int = 10) -> InspectionPlan:
    """Reorder viewpoints inside each cluster; the cluster sequence is kept."""
    out = []
    prev_exit = None if start is None else check_point(start, "start")
    for i, c in enumerate(clusters):
        pts = np.array([v.position for v in c.viewpoints], dtype=float)
        exit_ = np.asarray(clusters[i + 1].viewpoints[0].position) if i + 1 < len(clusters) else None
        entry = prev_exit if prev_exit is not None else pts[0]
        if prev_exit is None:
            # no anchor before the first cluster: keep its first viewpoint fixed
            rest = reorder_cluster(pts[1:], pts[0], exit_, exact_limit)
            order = [0] + [k + 1 for k in rest]
        else:
            order = reorder_cluster(pts, entry, exit_, exact_limit)
        vps = [c.viewpoints[k] for k in order]
        out.append(Cluster(i, c.segment, vps))
        prev_exit = np.asarray(vps[-1].position)
    return InspectionPlan(out, None if start is None else tuple(float(x) for x in start))


class PlanInvariantError(AssertionError):
    """A plan broke one of its structural guarantees."""


def check_plan(plan: InspectionPlan, viewpoints=None) -> None:
    """Raise :class:`PlanInvariantError` unless clusters are same-segment runs
    and (when ``viewpoints`` is given) every generated viewpoint appears once."""
    for c in plan.clusters:
        if not c.viewpoints:
            raise PlanInvariantError(f"cluster {c.id} is empty")
        if any(v.segment != c.segment for v in c.viewpoints):
            raise PlanInvariantError(f"cluster {c.id} mixes segments")
    if viewpoints is not None:
        key = lambda v: (v.position, v.yaw, v.segment)  # noqa: E731
        if sorted(map(key, plan.viewpoints)) != sorted(map(key, viewpoints)):
            raise PlanInvariantError("plan does not visit each generated viewpoint exactly once")


def plan_cost(plan: InspectionPlan, yaw_weight: float) -> float:
    """Path length from the start through all viewpoints plus weighted yaw changes."""
    vps = plan.viewpoints
    if not vps:
        return 0.0
    pts = np.array([v.position for v in vps])
    if plan.start is not None:
        pts = np.vstack([np.asarray(plan.start, dtype=float), pts])
    yaws = np.array([v.yaw for v in vps])
    turn = float(angle_diff(yaws[1:], yaws[:-1]).sum()) if len(vps) > 1 else 0.0
    return float(np.hypot(*np.diff(pts, axis=0).T).sum()) + yaw_weight * turn


def plan_global(ref: ReferenceMap, params: GlobalPlannerParams | None = None, start=None):
    """Full pipeline. Returns ``(plan, segments, viewpoints, tour)``."""
    params = params or GlobalPlannerParams()
    if start is None:
        start = ref.start
    segments = map_segmentation(ref, params)
    viewpoints = [v for s in segments for v in generate_viewpoints(s, params, ref)]
    if params.prune_redundant:
        viewpoints = prune_redundant(viewpoints, ref, params, segments)
    if not viewpoints:
        return InspectionPlan([], None if start is None else tuple(start)), segments, [], np.zeros(0, int)
    if start is None:
        start = viewpoints[0].position
    start = check_point(start, "start")
    pos = np.array([v.position for v in viewpoints])
    yaw = np.array([v.yaw for v in viewpoints])
    order = tsp.solve_tsp(pos, yaw, start, params.yaw_weight, params.tsp_budget, params.tsp_kicks)
    clusters = remap(order, viewpoints)
    cost = None
    if params.merge_cost_aware:
        def cost(cl):
            return plan_cost(local_reorder(cl, start), params.yaw_weight)
    for tau in range(params.tau_init, params.tau_max + 1):
        clusters = merge_outliers(clusters, tau, cost)
    plan = local_reorder(clusters, start)
    return plan, segments, viewpoints, order


# --- estimators ----------------------------------------------------------------


class GlobalCoveragePlanner(BaseEstimator):
    """Segment, sample, sequence and cluster viewpoints over a reference map.

    After ``fit`` the estimator exposes ``segments_``, ``viewpoints_`` (in
    generation order), ``tour_`` (the open tour as indices into
    ``viewpoints_``), ``clusters_`` and ``plan_``.
    """

    def __init__(
        self,
        angle_threshold=math.radians(10.0),
        standoff=1.5,
        spacing=None,
        overlap=0.3,
        fov=1.5,
        max_range=4.0,
        tau_init=1,
        tau_max=3,
        yaw_weight=1.0,
        tsp_budget=None,
        clearance=0.5,
        min_segment_cells=4,
        prune_redundant=True,
        tsp_kicks=100,
        merge_cost_aware=True,
    ):
        self.angle_threshold = angle_threshold
        self.standoff = standoff
        self.spacing = spacing
        self.overlap = overlap
        self.fov = fov
        self.max_range = max_range
        self.tau_init = tau_init
        self.tau_max = tau_max
        self.yaw_weight = yaw_weight
        self.tsp_budget = tsp_budget
        self.clearance = clearance
        self.min_segment_cells = min_segment_cells
        self.prune_redundant = prune_redundant
        self.tsp_kicks = tsp_kicks
        self.merge_cost_aware = merge_cost_aware

    def _params(self) -> GlobalPlannerParams:
        return GlobalPlannerParams(**self.get_params())

    def fit(self, reference: ReferenceMap, start=None):
        self.params_ = self._params()
        plan, segs, vps, order = plan_global(reference, self.params_, start)
        self.segments_ = segs
        self.viewpoints_ = vps
        self.tour_ = order
        self.clusters_ = plan.clusters
        self.plan_ = plan
        return self

    def predict(self, reference: ReferenceMap = None, start=None) -> InspectionPlan:
        if reference is not None:
            self.fit(reference, start)
        check_is_fitted(self, "plan_")
        return self.plan_


def _order_contour(ref, rows, nbrs):
    """Chain target rows along the surface, preferring 4-neighbors, jumping when stuck."""
    remaining = set(rows)
    w = ref.spec.width
    chain = []
    cur = min(remaining)
    while remaining:
        chain.append(cur)
        remaining.discard(cur)
        cands = [q for q in nbrs[cur] if q in remaining]
        if cands:
            c0 = ref.target_cells[cur]

            def rank(q):
                d = abs(int(ref.target_cells[q]) - int(c0))
                return (0 if d in (1, w) else 1, q)

            cur = min(cands, key=rank)
        elif remaining:
            p = ref.surface_points[cur]
            rest = np.fromiter(remaining, dtype=np.int64)
            rest.sort()
            d = np.hypot(*(ref.surface_points[rest] - p).T)
            cur = int(rest[int(np.argmin(d))])
    return chain


def naive_viewpoints(ref: ReferenceMap, params: GlobalPlannerParams) -> list:
    """Uniform arc-length sampling along each surface contour with per-cell normals."""
    if ref.n_targets == 0:
        return []
    nbrs = _target_neighbors(ref)
    # contours are 8-connected components of the target set
    comp = np.full(ref.n_targets, -1, dtype=np.int64)
    ncomp = 0
    for r in range(ref.n_targets):
        if comp[r] >= 0:
            continue
        comp[r] = ncomp
        q = deque([r])
        while q:
            a = q.popleft()
            for b in nbrs[a]:
                if comp[b] < 0:
                    comp[b] = ncomp
                    q.append(b)
        ncomp += 1
    spacing = params.effective_spacing
    out = []
    for k in range(ncomp):
        rows = [int(r) for r in np.flatnonzero(comp == k)]
        chain = _order_contour(ref, rows, nbrs)
        pts = ref.surface_points[chain]
        s = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
        targets = np.arange(0.0, s[-1] + 1e-9, spacing) if s[-1] >= spacing else [0.5 * s[-1]]
        order = 0
        for t in targets:
            j = int(np.searchsorted(s, t))
            j = min(j, len(chain) - 1)
            ang = float(ref.normals[chain[j]])
            nrm = np.array([math.cos(ang), math.sin(ang)])
            tang = np.array([-nrm[1], nrm[0]])
            p = _place(ref, params, pts[j], nrm, tang, 0.0)
            if p is None:
                continue
            out.append(
                Viewpoint((float(p[0]), float(p[1])), float(wrap_angle(ang + math.pi)), k, order)
            )
            order += 1
    return out


class NaiveCoveragePlanner(BaseEstimator):
    """Comparator: uniform viewpoints, position-only nearest-neighbor order, no clustering."""

    def __init__(self, standoff=1.5, spacing=None, overlap=0.3, fov=1.5, max_range=4.0, clearance=0.5):
        self.standoff = standoff
        self.spacing = spacing
        self.overlap = overlap
        self.fov = fov
        self.max_range = max_range
        self.clearance = clearance

    def fit(self, reference: ReferenceMap, start=None):
        self.params_ = GlobalPlannerParams(**self.get_params())
        vps = naive_viewpoints(reference, self.params_)
        if start is None:
            start = reference.start
        if vps:
            if start is None:
                start = vps[0].position
            pos = np.array([v.position for v in vps])
            d = np.hypot(*(pos - np.asarray(start, dtype=float)).T)
            D = tsp.pose_cost_matrix(pos, None, 0.0)
            order = tsp.nearest_neighbor_tour(D, int(np.argmin(d)))
        else:
            order = np.zeros(0, dtype=np.int64)
        self.viewpoints_ = vps
        self.tour_ = order
        clusters = [
            Cluster(i, vps[int(k)].segment, [vps[int(k)]]) for i, k in enumerate(order)
        ]
        self.clusters_ = clusters
        self.plan_ = InspectionPlan(clusters, None if start is None else tuple(float(x) for x in start))
        return self

    def predict(self, reference: ReferenceMap = None, start=None) -> InspectionPlan:
        if reference is not None:
            self.fit(reference, start)
        check_is_fitted(self, "plan_")
        return self.plan_
