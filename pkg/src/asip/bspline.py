"""Uniform B-spline reference trajectories and their static optimization.

A trajectory of order ``k`` with control points ``P_0..P_{N-1}`` lives on
the uniform knot vector ``0, 1, ..., N + k - 1``; its valid domain is
``[k - 1, N]``. Repeating the start and goal ``k - 1`` times pins the curve
ends to them exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_int, check_point, check_points, check_positive
from .world import GridSpec


@dataclass(frozen=True)
class CostWeights:
    control: float = 1.0
    smooth: float = 1.0
    collision: float = 100.0
    clearance: float = 0.5

    def __post_init__(self):
        check_positive(self.control, "control", strict=False)
        check_positive(self.smooth, "smooth", strict=False)
        check_positive(self.collision, "collision", strict=False)
        check_positive(self.clearance, "clearance")


def _eval_uniform(P: np.ndarray, k: int, u: np.ndarray) -> np.ndarray:
    """De Boor evaluation on knots 0..N+k-1 at knot coordinates ``u``."""
    n = P.shape[0]
    p = k - 1
    span = np.clip(np.floor(u).astype(np.int64), p, n - 1)
    d = np.stack([P[span - p + j] for j in range(p + 1)], axis=0)
    for r in range(1, p + 1):
        for j in range(p, r - 1, -1):
            left = span - p + j
            alpha = (u - left) / (p + 1 - r)
            d[j] = (1.0 - alpha)[:, None] * d[j - 1] + alpha[:, None] * d[j]
    return d[p]


@dataclass(frozen=True)
class BSplineTrajectory:
    control_points: np.ndarray
    order: int = 4
    dt: float = 0.5

    def __post_init__(self):
        P = check_points(self.control_points, "control_points")
        object.__setattr__(self, "control_points", P)
        check_int(self.order, "order", low=2)
        check_positive(self.dt, "dt")
        if P.shape[0] < 2 * (self.order - 1) + 1:
            raise ValueError(
                f"need at least {2 * (self.order - 1) + 1} control points for order {self.order}"
            )

    @classmethod
    def pinned(cls, start, goal, inner, order=4, dt=0.5) -> "BSplineTrajectory":
        s = check_point(start, "start")
        g = check_point(goal, "goal")
        inner = np.asarray(inner, dtype=float).reshape(-1, 2)
        P = np.vstack([np.repeat(s[None], order - 1, 0), inner, np.repeat(g[None], order - 1, 0)])
        return cls(P, order, dt)

    @property
    def n_control(self) -> int:
        return int(self.control_points.shape[0])

    @property
    def duration(self) -> float:
        return (self.n_control - self.order + 1) * self.dt

    @property
    def start(self) -> np.ndarray:
        return self.eval(0.0)

    @property
    def goal(self) -> np.ndarray:
        return self.eval(1.0)

    def _knot_coord(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)) or not np.all(np.isfinite(t)):
            raise ValueError("normalized time must lie in [0, 1]")
        return (self.order - 1) + t * (self.n_control - self.order + 1)

    def eval(self, t, derivative: int = 0) -> np.ndarray:
        """Position (or time derivative up to order 3) at normalized time ``t``."""
        check_int(derivative, "derivative", low=0, high=3)
        scalar = np.ndim(t) == 0
        u = np.atleast_1d(self._knot_coord(t))
        P = self.control_points
        k = self.order
        for _ in range(derivative):
            P = np.diff(P, axis=0) / self.dt
            k -= 1
        if k == 0:
            out = np.zeros((u.size, 2))
        else:
            out = _eval_uniform(P, k, u - derivative)
        return out[0] if scalar else out

    def sample(self, per_span: int = 10) -> np.ndarray:
        m = max(2, per_span * (self.n_control - self.order + 1) + 1)
        return self.eval(np.linspace(0.0, 1.0, m))

    def to_rows(self, per_span: int = 10) -> np.ndarray:
        """Rows of (t, x, y, vx, vy) for dumping."""
        m = max(2, per_span * (self.n_control - self.order + 1) + 1)
        s = np.linspace(0.0, 1.0, m)
        return np.column_stack([s * self.duration, self.eval(s), self.eval(s, 1)])


def bspline_eval(traj: BSplineTrajectory, t, derivative: int = 0) -> np.ndarray:
    return traj.eval(t, derivative)


# --- distance field -----------------------------------------------------------


class DistanceField:
    """Approximate signed distance to occupied cells with bilinear interpolation.

    Positive in free space, negative inside obstacles; the zero crossing sits
    on cell faces. Points outside the grid clamp to the border values.
    """

    def __init__(self, spec: GridSpec, occupied: np.ndarray):
        from scipy import ndimage

        occ = np.asarray(occupied, dtype=bool)
        res = spec.resolution
        if occ.any():
            out = ndimage.distance_transform_edt(~occ) * res - 0.5 * res
        else:
            out = np.full(occ.shape, 1e3)
        if (~occ).any():
            inside = ndimage.distance_transform_edt(occ) * res - 0.5 * res
        else:
            inside = np.full(occ.shape, 1e3)
        self.spec = spec
        self.values = np.where(occ, -inside, out)

    def _locate(self, pts):
        spec = self.spec
        h, w = self.values.shape
        gx = (pts[:, 0] - spec.origin[0]) / spec.resolution - 0.5
        gy = (pts[:, 1] - spec.origin[1]) / spec.resolution - 0.5
        gx = np.clip(gx, 0.0, w - 1.0)
        gy = np.clip(gy, 0.0, h - 1.0)
        x0 = np.minimum(np.floor(gx).astype(np.int64), max(w - 2, 0))
        y0 = np.minimum(np.floor(gy).astype(np.int64), max(h - 2, 0))
        return gx - x0, gy - y0, x0, y0

    def value_and_gradient(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        fx, fy, x0, y0 = self._locate(pts)
        v = self.values
        v00 = v[y0, x0]
        v10 = v[y0, x0 + 1]
        v01 = v[y0 + 1, x0]
        v11 = v[y0 + 1, x0 + 1]
        val = (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy
        gx = ((v10 - v00) * (1 - fy) + (v11 - v01) * fy) / self.spec.resolution
        gy = ((v01 - v00) * (1 - fx) + (v11 - v10) * fx) / self.spec.resolution
        return val, np.column_stack([gx, gy])

    def __call__(self, points) -> np.ndarray:
        return self.value_and_gradient(points)[0]


# --- static optimization ----------------------------------------------------------


def _difference_matrix(n: int, order: int) -> np.ndarray:
    D = np.eye(n)
    for _ in range(order):
        D = D[1:] - D[:-1]
    return D


def _quadratic_form(n: int, weights: CostWeights) -> np.ndarray:
    D2 = _difference_matrix(n, 2)
    D3 = _difference_matrix(n, 3)
    return weights.control * D2.T @ D2 + weights.smooth * D3.T @ D3


class StaticCost:
    """Cost over the inner control points of a pinned net."""

    def __init__(self, head: np.ndarray, tail: np.ndarray, dist: DistanceField, weights: CostWeights):
        self.head = head
        self.tail = tail
        self.dist = dist
        self.weights = weights
        self._Q = None

    def full(self, inner: np.ndarray) -> np.ndarray:
        return np.vstack([self.head, inner.reshape(-1, 2), self.tail])

    def _form(self, n_total):
        if self._Q is None or self._Q.shape[0] != n_total:
            self._Q = _quadratic_form(n_total, self.weights)
        return self._Q

    def terms(self, inner: np.ndarray) -> dict:
        P = self.full(inner)
        D2 = np.diff(P, 2, axis=0)
        D3 = np.diff(P, 3, axis=0)
        d = self.dist(inner.reshape(-1, 2))
        hinge = np.maximum(0.0, self.weights.clearance - d)
        return {
            "control": float((D2**2).sum()),
            "smooth": float((D3**2).sum()),
            "collision": float((hinge**2).sum()),
        }

    def value(self, inner: np.ndarray) -> float:
        t = self.terms(inner)
        w = self.weights
        return w.control * t["control"] + w.smooth * t["smooth"] + w.collision * t["collision"]

    def value_and_grad(self, inner: np.ndarray):
        inner = inner.reshape(-1, 2)
        P = self.full(inner)
        Q = self._form(P.shape[0])
        QP = Q @ P
        h = self.head.shape[0]
        quad = float((P * QP).sum())
        g = 2.0 * QP[h : h + inner.shape[0]]
        d, gd = self.dist.value_and_gradient(inner)
        hinge = np.maximum(0.0, self.weights.clearance - d)
        col = float((hinge**2).sum())
        g = g - 2.0 * self.weights.collision * hinge[:, None] * gd
        return quad + self.weights.collision * col, g


@dataclass
class StaticPlanResult:
    trajectory: BSplineTrajectory
    cost_history: list
    iterations: int
    min_clearance: float


class StaticPlanInfeasible(RuntimeError):
    pass


def polyline_interp(points: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(points, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] <= 0.0:
        return np.repeat(points[:1], len(fractions), axis=0)
    target = np.asarray(fractions) * s[-1]
    return np.column_stack([np.interp(target, s, points[:, 0]), np.interp(target, s, points[:, 1])])


def optimize_inner(cost: StaticCost, x0: np.ndarray, max_iter=500, rel_tol=1e-6):
    """Descent with Armijo backtracking. Returns (x, history of accepted costs).

    The step direction is the gradient scaled by a Gauss-Newton metric: the
    exact Hessian of the quadratic terms plus the outer products of the
    active collision gradients. Any positive definite metric keeps the
    accepted costs non-increasing.
    """
    x = x0.reshape(-1, 2).copy()
    m = x.shape[0]
    h = cost.head.shape[0]
    Q = cost._form(m + h + cost.tail.shape[0])[h : h + m, h : h + m]
    base = np.kron(2.0 * Q, np.eye(2)) + 1e-8 * np.eye(2 * m)
    w = cost.weights
    f, g = cost.value_and_grad(x)
    history = [f]
    for _ in range(max_iter):
        d_val, d_grad = cost.dist.value_and_gradient(x)
        active = (w.clearance - d_val) > 0.0
        H = base.copy()
        for i in np.flatnonzero(active):
            H[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] += 2.0 * w.collision * np.outer(d_grad[i], d_grad[i])
        try:
            d = -np.linalg.solve(H, g.reshape(-1)).reshape(-1, 2)
        except np.linalg.LinAlgError:
            d = -g
        slope = float((g * d).sum())
        if slope >= 0.0:
            d, slope = -g, -float((g * g).sum())
            if slope == 0.0:
                break
        step = 1.0
        while True:
            xn = x + step * d
            fn, gn = cost.value_and_grad(xn)
            if fn <= f + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-12:
                break
        if step < 1e-12 or fn >= f:
            break
        rel = (f - fn) / max(abs(f), 1e-300)
        x, f, g = xn, fn, gn
        history.append(f)
        if rel < rel_tol:
            break
    return x, history


def _segment_clear(field: DistanceField, a, b, threshold) -> bool:
    n = max(2, int(math.ceil(np.hypot(*(b - a)) / (0.5 * field.spec.resolution))) + 1)
    pts = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
    return bool(np.all(field(pts) >= threshold))


def detour_waypoints(field: DistanceField, a, b, clearance: float, margin: float = 0.15):
    """Grid path from ``a`` to ``b`` through cells with clearance plus margin, shortcut greedily.

    Returns ``None`` when no such path exists. Cells near the endpoints are
    admitted down to a small positive distance so poses that already sit
    close to obstacles can leave.
    """
    from ._astar import astar

    spec = field.spec
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    free = field.values >= clearance + margin
    centers_x = spec.origin[0] + (np.arange(spec.width) + 0.5) * spec.resolution
    centers_y = spec.origin[1] + (np.arange(spec.height) + 0.5) * spec.resolution
    for p in (a, b):
        near = np.hypot(centers_x[None, :] - p[0], centers_y[:, None] - p[1]) <= clearance + margin + spec.resolution
        free |= near & (field.values > 0.5 * spec.resolution)
    (sx, sy), (gx, gy) = spec.cell_of(a), spec.cell_of(b)
    if not (spec.in_bounds(sx, sy) and spec.in_bounds(gx, gy)):
        return None
    free[sy, sx] = free[gy, gx] = True
    cells = astar(free, sx, sy, gx, gy)
    if cells.shape[0] == 0:
        return None
    pts = np.vstack([a, spec.centers(cells[:, 1] * spec.width + cells[:, 0])[1:-1], b])
    thr = clearance
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(field, pts[i], pts[j], min(thr, *field(np.vstack([pts[i], pts[j]])))):
            j -= 1
        out.append(pts[j])
        i = j
    return np.array(out)


def static_plan(
    waypoints,
    field,
    weights: CostWeights | None = None,
    k: int = 4,
    n_control: int | None = None,
    dt: float = 0.5,
    v_nominal: float = 1.0,
    max_iter: int = 500,
    detour: bool = True,
) -> StaticPlanResult:
    """Optimize a pinned B-spline through the free space of ``field``.

    ``field`` is a :class:`DistanceField` or a reference map.
    Inner control points start from arc-length interpolation of the
    waypoint polyline and descend on control, smoothness and collision
    costs. With ``detour`` set, legs whose straight line breaks clearance are
    first replaced by a grid search path. The sampled curve must keep ``clearance - resolution`` from
    obstacles, relaxed near endpoints that themselves sit closer.
    """
    weights = weights or CostWeights()
    if not isinstance(field, DistanceField):
        field = DistanceField(field.spec, field.structure)
    wp = check_points(waypoints, "waypoints", min_count=2)
    start, goal = wp[0], wp[-1]
    d_end = field(np.vstack([start, goal]))
    if np.any(d_end <= 0.0):
        raise StaticPlanInfeasible("start or goal in collision")
    if detour:
        legs = [wp[:1]]
        for a, b in zip(wp[:-1], wp[1:]):
            thr = min(weights.clearance, *field(np.vstack([a, b])))
            path = None
            if not _segment_clear(field, a, b, thr):
                path = detour_waypoints(field, a, b, weights.clearance)
            legs.append(path[1:] if path is not None else b[None])
        wp = np.vstack(legs)
    length = float(np.hypot(*np.diff(wp, axis=0).T).sum())
    if n_control is None:
        n_inner = max(1, int(math.ceil(length / (v_nominal * dt))))
        n_control = n_inner + 2 * (k - 1)
    n_inner = n_control - 2 * (k - 1)
    if n_inner < 1:
        raise ValueError("n_control too small for the order")
    frac = np.arange(1, n_inner + 1) / (n_inner + 1)
    x0 = polyline_interp(wp, frac)
    head = np.repeat(start[None], k - 1, 0)
    tail = np.repeat(goal[None], k - 1, 0)
    cost = StaticCost(head, tail, field, weights)
    x, hist = optimize_inner(cost, x0, max_iter=max_iter)
    traj = BSplineTrajectory(cost.full(x), k, dt)
    pts = traj.sample(10)
    d = field(pts)
    res = field.spec.resolution
    need = np.full(d.shape, weights.clearance - res)
    near = np.minimum(np.hypot(*(pts - start).T), np.hypot(*(pts - goal).T)) < weights.clearance + res
    need[near] = np.minimum(need[near], d_end.min() - res)
    if np.any(d < need - 1e-9):
        raise StaticPlanInfeasible("static plan infeasible")
    return StaticPlanResult(traj, hist, len(hist) - 1, float(d.min()))


# --- timing -----------------------------------------------------------------------


class TimedPath:
    """Arc-length timing of a trajectory under speed and acceleration limits.

    Starts and ends at rest. Speed is capped by ``v_max`` and by the lateral
    acceleration limit on curvature.
    """

    def __init__(self, traj: BSplineTrajectory, v_max=1.0, a_max=1.0, a_lat=1.0, per_span=20):
        check_positive(v_max, "v_max")
        check_positive(a_max, "a_max")
        self.traj = traj
        self.v_max = float(v_max)
        m = max(2, per_span * (traj.n_control - traj.order + 1) + 1)
        u = np.linspace(0.0, 1.0, m)
        pts = traj.eval(u)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        d1 = traj.eval(u, 1)
        d2 = traj.eval(u, 2)
        sp = np.hypot(d1[:, 0], d1[:, 1])
        cross = np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        with np.errstate(divide="ignore", invalid="ignore"):
            kappa = np.where(sp > 1e-9, cross / sp**3, 0.0)
        cap = np.minimum(self.v_max, np.sqrt(a_lat / np.maximum(kappa, 1e-12)))
        cap[0] = cap[-1] = 0.0
        v = cap.copy()
        for i in range(1, m):
            v[i] = min(v[i], math.sqrt(v[i - 1] ** 2 + 2 * a_max * seg[i - 1]))
        for i in range(m - 2, -1, -1):
            v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2 * a_max * seg[i]))
        t = np.zeros(m)
        for i in range(1, m):
            vm = v[i - 1] + v[i]
            t[i] = t[i - 1] + (2.0 * seg[i - 1] / vm if vm > 1e-12 else 0.0)
        self._u, self._s, self._v, self._t = u, s, v, t
        self._pts = pts
        self.length = float(s[-1])
        self.duration = float(t[-1])

    @property
    def goal(self) -> np.ndarray:
        return self._pts[-1]

    def state_at(self, times):
        """Positions and velocities at absolute path times (clamped to the ends)."""
        tt = np.clip(np.atleast_1d(np.asarray(times, dtype=float)), 0.0, self.duration)
        s = np.interp(tt, self._t, self._s)
        x = np.interp(s, self._s, self._pts[:, 0])
        y = np.interp(s, self._s, self._pts[:, 1])
        speed = np.interp(tt, self._t, self._v)
        idx = np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._s) - 2)
        tang = self._pts[idx + 1] - self._pts[idx]
        nrm = np.hypot(tang[:, 0], tang[:, 1])
        tang = np.where(nrm[:, None] > 1e-12, tang / np.maximum(nrm, 1e-12)[:, None], 0.0)
        return np.column_stack([x, y]), speed[:, None] * tang


def extract_reference(path: TimedPath, t_now: float, horizon: int, dt: float):
    """Reference positions and velocities at ``t_now + (1..horizon)·dt``."""
    check_int(horizon, "horizon", low=1)
    check_positive(dt, "dt")
    times = t_now + dt * np.arange(1, horizon + 1)
    return path.state_at(times)
