"""Occlusion-aware yaw selection.

A score per target cell drives the choice: scanned cells drop to the floor,
cells shadowed by obstacles missing from the reference map are doubled up to
a cap. The yaw maximizing the cosine-weighted sum of visible scores over a
ring of candidate directions is selected, with the candidate ring anchored at
the nominal yaw so equal scores keep the nominal view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import TWO_PI, angle_diff, check_int, check_is_fitted, check_positive, wrap_angle
from .world import (
    OccupancyGrid,
    ReferenceMap,
    SensorModel,
    _los_to_targets,
    candidate_targets,
    first_hits_to_targets,
    visible_target_rows,
)


@dataclass
class ScoreField:
    scores: np.ndarray
    s0: float = 1.0
    s_max: float = 8.0
    s_min: float = 0.0

    @classmethod
    def uniform(cls, n_targets: int, s0=1.0, s_max=8.0, s_min=0.0) -> "ScoreField":
        if not s_min <= s0 <= s_max:
            raise ValueError("need s_min <= s0 <= s_max")
        return cls(np.full(int(n_targets), float(s0)), float(s0), float(s_max), float(s_min))

    def copy(self) -> "ScoreField":
        return ScoreField(self.scores.copy(), self.s0, self.s_max, self.s_min)


@dataclass(frozen=True)
class OcclusionReport:
    """Blocked viewpoint indices and occluded / scanned target rows."""

    blocked: tuple = ()
    occluded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    scanned: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def update_scores(score: ScoreField, report: OcclusionReport, inplace: bool = False) -> ScoreField:
    """Double occluded cells (capped), then reset scanned cells to the floor."""
    out = score if inplace else score.copy()
    s = out.scores
    occ = np.asarray(report.occluded, dtype=np.int64)
    if occ.size:
        s[occ] = np.minimum(2.0 * s[occ], out.s_max)
    scn = np.asarray(report.scanned, dtype=np.int64)
    if scn.size:
        s[scn] = out.s_min
    np.clip(s, out.s_min, out.s_max, out=s)
    return out


def view_weight(phi, phi_i):
    """Preference for directions near the nominal yaw: 1 on it, 0 opposite."""
    return (np.cos(wrap_angle(np.asarray(phi, dtype=float) - phi_i)) + 1.0) / 2.0


def candidate_angles(phi_i: float, n: int = 72) -> np.ndarray:
    """``n`` directions evenly covering the circle, the first equal to ``phi_i``."""
    check_int(n, "n", low=1)
    return wrap_angle(phi_i + TWO_PI * np.arange(n) / n)


def raycast_score(phi, position, sensor: SensorModel, score: ScoreField, grid: OccupancyGrid, ref: ReferenceMap) -> float:
    """Sum of scores over target cells visible from ``(position, phi)`` in ``grid``."""
    rows = visible_target_rows(grid, ref, np.asarray(position, dtype=float), float(phi), sensor)
    return float(score.scores[rows].sum())


@dataclass(frozen=True)
class ViewAngleQuery:
    position: np.ndarray
    nominal_yaw: float
    sensor: SensorModel
    n_candidates: int = 72

    def __post_init__(self):
        if not math.isfinite(self.nominal_yaw):
            raise ValueError("nominal yaw must be finite")
        check_int(self.n_candidates, "n_candidates", low=1)


def candidate_scores(query: ViewAngleQuery, score: ScoreField, grid: OccupancyGrid, ref: ReferenceMap):
    """Raw scores for every candidate, sharing one visibility pass for all of them."""
    phis = candidate_angles(query.nominal_yaw, query.n_candidates)
    pos = np.asarray(query.position, dtype=float)
    idx, bearing = candidate_targets(ref, pos, query.sensor.max_range)
    raw = np.zeros(phis.size)
    if idx.size == 0:
        return phis, raw
    w = score.scores[idx]
    nz = w != 0.0
    idx, bearing, w = idx[nz], bearing[nz], w[nz]
    if idx.size == 0:
        return phis, raw
    los = _los_to_targets(grid, ref, pos, idx)
    bearing, w = bearing[los], w[los]
    if bearing.size == 0:
        return phis, raw
    inside = np.abs(wrap_angle(bearing[None, :] - phis[:, None])) <= 0.5 * query.sensor.fov + 1e-12
    raw = inside.astype(float) @ w
    return phis, raw


def select_view_angle(query: ViewAngleQuery, score: ScoreField, grid: OccupancyGrid, ref: ReferenceMap):
    """Best weighted candidate. Returns ``(phi_star, weighted_score)``.

    Ties go to the candidate closest to the nominal yaw, then the lowest index.
    """
    phis, raw = candidate_scores(query, score, grid, ref)
    weighted = view_weight(phis, query.nominal_yaw) * raw
    best = weighted.max()
    ties = np.flatnonzero(weighted >= best - 1e-12 * max(1.0, abs(best)))
    dev = angle_diff(phis[ties], query.nominal_yaw)
    pick = ties[np.lexsort((ties, dev))[0]]
    return float(phis[pick]), float(weighted[pick])


# --- occlusion inference -------------------------------------------------------------


def segment_rows_in_view(ref: ReferenceMap, viewpoint, segment_rows, sensor: SensorModel) -> np.ndarray:
    """Rows of the viewpoint's own segment inside its nominal cone and range."""
    rows = np.asarray(segment_rows, dtype=np.int64)
    d = ref.surface_points[rows] - np.asarray(viewpoint.position, dtype=float)
    dist = np.hypot(d[:, 0], d[:, 1])
    bearing = np.arctan2(d[:, 1], d[:, 0])
    keep = (dist <= sensor.max_range) & (angle_diff(bearing, viewpoint.yaw) <= 0.5 * sensor.fov + 1e-12)
    return rows[keep]


def identify_blocked_viewpoints(viewpoints, segments, live: OccupancyGrid, ref: ReferenceMap, sensor: SensorModel, expected=None):
    """Indices of viewpoints whose cell is occupied or whose segment view is cut.

    A view counts as cut when a segment cell inside the nominal cone that is
    visible on the reference map loses line of sight on ``live``. ``expected``
    may carry those reference-visible rows per viewpoint to skip recomputing.
    """
    seg_rows = {s.id: s.rows for s in segments}
    ref_grid = ref.as_grid() if expected is None else None
    spec = live.spec
    out = []
    for i, v in enumerate(viewpoints):
        ix, iy = spec.cell_of(v.position)
        if not spec.in_bounds(ix, iy) or live.state[iy, ix] == 2:
            out.append(i)
            continue
        if expected is None:
            rows = segment_rows_in_view(ref, v, seg_rows.get(v.segment, np.zeros(0, np.int64)), sensor)
            rows = rows[_los_to_targets(ref_grid, ref, np.asarray(v.position), rows)]
        else:
            rows = expected[i]
        if rows.size and not np.all(_los_to_targets(live, ref, np.asarray(v.position), rows)):
            out.append(i)
    return tuple(out)


def get_occluded_regions(viewpoint, sensor: SensorModel, ref: ReferenceMap, live: OccupancyGrid) -> np.ndarray:
    """Target rows in the nominal cone whose first blocker is an obstacle absent from the reference."""
    pos = np.asarray(viewpoint.position, dtype=float)
    idx, bearing = candidate_targets(ref, pos, sensor.max_range)
    idx = idx[angle_diff(bearing, viewpoint.yaw) <= 0.5 * sensor.fov + 1e-12]
    if idx.size == 0:
        return idx
    hits = first_hits_to_targets(live, ref, pos, idx)
    novel = np.zeros(hits.size, dtype=bool)
    blocked = hits >= 0
    novel[blocked] = ~ref.structure.ravel()[hits[blocked]]
    return idx[novel]


# --- stateful planner ------------------------------------------------------------------


class ViewAnglePlanner(BaseEstimator):
    """Score-field bookkeeping plus yaw selection for one mission.

    ``fit`` binds the reference map, the planned viewpoints and their
    segments. ``observe`` feeds the latest planning grid and scanned rows;
    ``select`` returns the yaw for a position and nominal yaw.
    """

    def __init__(self, n_candidates=72, s0=1.0, s_max=8.0, s_min=0.0, fov=1.5, max_range=4.0):
        self.n_candidates = n_candidates
        self.s0 = s0
        self.s_max = s_max
        self.s_min = s_min
        self.fov = fov
        self.max_range = max_range

    def fit(self, reference: ReferenceMap, viewpoints=(), segments=()):
        check_int(self.n_candidates, "n_candidates", low=1)
        check_positive(self.s_max, "s_max")
        self.sensor_ = SensorModel(fov=self.fov, max_range=self.max_range)
        self.reference_ = reference
        self.score_ = ScoreField.uniform(reference.n_targets, self.s0, self.s_max, self.s_min)
        self.viewpoints_ = list(viewpoints)
        self.segments_ = list(segments)
        ref_grid = reference.as_grid()
        seg_rows = {s.id: s.rows for s in self.segments_}
        self.expected_ = []
        for v in self.viewpoints_:
            rows = segment_rows_in_view(reference, v, seg_rows.get(v.segment, np.zeros(0, np.int64)), self.sensor_)
            self.expected_.append(rows[_los_to_targets(ref_grid, reference, np.asarray(v.position), rows)])
        self.report_ = OcclusionReport()
        self._novel_count = 0
        return self

    def observe(self, grid: OccupancyGrid, scanned_rows, novel_count: int) -> OcclusionReport:
        """Refresh blocked / occluded sets when new obstacles appeared, then update scores."""
        check_is_fitted(self, "score_")
        if novel_count != self._novel_count:
            self._novel_count = novel_count
            blocked = identify_blocked_viewpoints(
                self.viewpoints_, self.segments_, grid, self.reference_, self.sensor_, self.expected_
            )
            parts = [get_occluded_regions(self.viewpoints_[i], self.sensor_, self.reference_, grid) for i in blocked]
            occ = np.unique(np.concatenate(parts)) if parts else np.zeros(0, dtype=np.int64)
            self.report_ = OcclusionReport(blocked, occ, self.report_.scanned)
        # occluded cells keep doubling every tick up to the cap; scanned cells win
        self.report_ = OcclusionReport(self.report_.blocked, self.report_.occluded, np.asarray(scanned_rows, dtype=np.int64))
        update_scores(self.score_, self.report_, inplace=True)
        return self.report_

    def select(self, position, nominal_yaw: float, grid: OccupancyGrid):
        check_is_fitted(self, "score_")
        q = ViewAngleQuery(np.asarray(position, dtype=float), float(nominal_yaw), self.sensor_, self.n_candidates)
        return select_view_angle(q, self.score_, grid, self.reference_)
