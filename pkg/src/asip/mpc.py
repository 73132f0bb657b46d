"""Receding-horizon tracking for a planar double integrator.

Positions and velocities follow the exact zero-order-hold update
``p += v dt + u dt^2 / 2``, ``v += u dt``. Controls are box bounded.
Obstacles enter as inflated discs with a quadratic hinge penalty on a soft
margin and a hard post-check that triggers a braking command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import ndimage
from sklearn.base import BaseEstimator

from ._validation import check_int, check_point, check_positive
from .world import OccupancyGrid


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    yaw: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", check_point(self.position, "position"))
        object.__setattr__(self, "velocity", check_point(self.velocity, "velocity"))
        if not (math.isfinite(self.yaw) and math.isfinite(self.time)):
            raise ValueError("yaw and time must be finite")

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.velocity))


@dataclass(frozen=True)
class ObstacleDisc:
    center: tuple
    radius: float  # hard radius, already inflated by the robot radius
    margin: float = 0.1  # extra soft band where the penalty starts


@dataclass
class MpcProblem:
    ref_positions: np.ndarray
    ref_velocities: np.ndarray
    dt: float = 0.1
    control_weight: float = 0.1
    u_min: tuple = (-2.0, -2.0)
    u_max: tuple = (2.0, 2.0)
    regions: list = field(default_factory=list)
    penalty_weight: float = 200.0

    def __post_init__(self):
        self.ref_positions = np.asarray(self.ref_positions, dtype=float).reshape(-1, 2)
        self.ref_velocities = np.asarray(self.ref_velocities, dtype=float).reshape(-1, 2)
        if self.ref_positions.shape[0] < 1:
            raise ValueError("horizon must be at least 1")
        if self.ref_velocities.shape != self.ref_positions.shape:
            raise ValueError("reference positions and velocities must have equal length")
        check_positive(self.dt, "dt")
        check_positive(self.control_weight, "control_weight", strict=False)
        lo = np.asarray(self.u_min, dtype=float)
        hi = np.asarray(self.u_max, dtype=float)
        if lo.shape != (2,) or hi.shape != (2,) or np.any(lo >= hi):
            raise ValueError("u_min must be strictly below u_max componentwise")

    @property
    def horizon(self) -> int:
        return int(self.ref_positions.shape[0])


@dataclass
class MpcSolution:
    u0: np.ndarray
    controls: np.ndarray  # (N, 2)
    positions: np.ndarray  # (N + 1, 2), row 0 is the initial state
    velocities: np.ndarray  # (N + 1, 2)
    braking: bool = False


@njit(cache=True)
def _rollout(p0, v0, U, dt):
    n = U.shape[0]
    P = np.empty((n + 1, 2))
    V = np.empty((n + 1, 2))
    P[0] = p0
    V[0] = v0
    for k in range(n):
        for a in range(2):
            P[k + 1, a] = P[k, a] + V[k, a] * dt + 0.5 * U[k, a] * dt * dt
            V[k + 1, a] = V[k, a] + U[k, a] * dt
    return P, V


def rollout(p0, v0, controls, dt):
    """Apply the double-integrator recurrence step by step."""
    U = np.ascontiguousarray(np.asarray(controls, dtype=float).reshape(-1, 2))
    return _rollout(np.asarray(p0, dtype=float), np.asarray(v0, dtype=float), U, float(dt))


def condensed(n: int, dt: float):
    """Maps from controls to stacked positions and velocities (k = 1..n) per axis."""
    k = np.arange(1, n + 1)[:, None]
    j = np.arange(n)[None, :]
    Pp = np.where(j < k, dt * dt * (k - j - 0.5), 0.0)
    Pv = np.where(j < k, dt, 0.0)
    return Pp, Pv


@njit(cache=True)
def _solve(Pp, Pv, p_free, v_free, p_ref, v_ref, lam, lo, hi, discs, w_pen, U0, step, iters):
    n = Pp.shape[0]
    U = U0.copy()
    Y = U0.copy()
    t = 1.0
    P = np.empty((n, 2))
    V = np.empty((n, 2))
    G = np.empty((n, 2))
    gp = np.empty((n, 2))
    gv = np.empty((n, 2))
    for _ in range(iters):
        for a in range(2):
            for k in range(n):
                sp = p_free[k, a]
                sv = v_free[k, a]
                for j in range(k + 1):
                    sp += Pp[k, j] * Y[j, a]
                    sv += Pv[k, j] * Y[j, a]
                P[k, a] = sp
                V[k, a] = sv
        for k in range(n):
            gp[k, 0] = 2.0 * (P[k, 0] - p_ref[k, 0])
            gp[k, 1] = 2.0 * (P[k, 1] - p_ref[k, 1])
            gv[k, 0] = 2.0 * (V[k, 0] - v_ref[k, 0])
            gv[k, 1] = 2.0 * (V[k, 1] - v_ref[k, 1])
            for i in range(discs.shape[0]):
                dx = P[k, 0] - discs[i, 0]
                dy = P[k, 1] - discs[i, 1]
                d = math.sqrt(dx * dx + dy * dy)
                s = discs[i, 2] - d
                if s > 0.0 and d > 1e-9:
                    c = -2.0 * w_pen * s / d
                    gp[k, 0] += c * dx
                    gp[k, 1] += c * dy
        for a in range(2):
            for j in range(n):
                acc = 2.0 * lam * Y[j, a]
                for k in range(j, n):
                    acc += Pp[k, j] * gp[k, a] + Pv[k, j] * gv[k, a]
                G[j, a] = acc
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        for j in range(n):
            for a in range(2):
                u = Y[j, a] - step * G[j, a]
                if u < lo[a]:
                    u = lo[a]
                elif u > hi[a]:
                    u = hi[a]
                y = u + beta * (u - U[j, a])
                if y < lo[a]:
                    y = lo[a]
                elif y > hi[a]:
                    y = hi[a]
                U[j, a] = u
                Y[j, a] = y
        t = t_next
    return U


def _disc_array(regions):
    if not regions:
        return np.zeros((0, 3)), np.zeros((0, 3))
    soft = np.array([[r.center[0], r.center[1], r.radius + r.margin] for r in regions], dtype=float)
    hard = np.array([[r.center[0], r.center[1], r.radius] for r in regions], dtype=float)
    return soft, hard


def _penetrates(P, hard):
    if hard.shape[0] == 0:
        return False
    d = np.hypot(P[:, None, 0] - hard[None, :, 0], P[:, None, 1] - hard[None, :, 1])
    return bool(np.any(d < hard[None, :, 2]))


def braking_controls(v0, n, dt, lo, hi):
    """Maximal deceleration along -v each step until rest, clipped to the box."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    amax = float(min(np.min(np.abs(lo)), np.min(np.abs(hi))))
    U = np.zeros((n, 2))
    v = np.asarray(v0, dtype=float).copy()
    for k in range(n):
        sp = float(np.hypot(*v))
        if sp < 1e-12:
            break
        mag = min(amax, sp / dt)
        U[k] = np.clip(-v / sp * mag, lo, hi)
        v = v + U[k] * dt
    return U


_CACHE: dict = {}


def _matrices(n, dt, lam, w_pen, any_regions):
    key = (n, dt, lam, w_pen, any_regions)
    hit = _CACHE.get(key)
    if hit is None:
        Pp, Pv = condensed(n, dt)
        H = Pp.T @ Pp + Pv.T @ Pv + lam * np.eye(n)
        L = 2.0 * float(np.linalg.eigvalsh(H).max())
        if any_regions:
            L += 2.0 * w_pen * float(np.linalg.eigvalsh(Pp.T @ Pp).max())
        hit = (Pp, Pv, 1.0 / L)
        _CACHE[key] = hit
    return hit


def mpc_step(problem: MpcProblem, x0: RobotState, warm=None, iterations: int = 60) -> MpcSolution:
    """Solve one horizon by projected accelerated gradient and return the first control."""
    n = problem.horizon
    dt = problem.dt
    soft, hard = _disc_array(problem.regions)
    if hard.shape[0] and _penetrates(x0.position[None], hard):
        raise ValueError("state in collision")
    lo = np.asarray(problem.u_min, dtype=float)
    hi = np.asarray(problem.u_max, dtype=float)
    Pp, Pv, step = _matrices(n, dt, problem.control_weight, problem.penalty_weight, bool(hard.shape[0]))
    k = np.arange(1, n + 1)[:, None]
    p_free = x0.position[None, :] + k * dt * x0.velocity[None, :]
    v_free = np.repeat(x0.velocity[None, :], n, axis=0)
    U0 = np.zeros((n, 2)) if warm is None else np.clip(np.asarray(warm, dtype=float).reshape(n, 2), lo, hi)
    U = _solve(
        Pp, Pv, p_free, v_free, problem.ref_positions, problem.ref_velocities,
        problem.control_weight, lo, hi, soft, problem.penalty_weight, U0, step, iterations,
    )
    U = np.clip(U, lo, hi)
    P, V = rollout(x0.position, x0.velocity, U, dt)
    braking = False
    if _penetrates(P[1:], hard):
        U = braking_controls(x0.velocity, n, dt, lo, hi)
        P, V = rollout(x0.position, x0.velocity, U, dt)
        braking = True
    return MpcSolution(U[0].copy(), U, P, V, braking)


def obstacle_regions(
    grid: OccupancyGrid,
    position,
    radius: float = 3.0,
    tile: float = 0.3,
    robot_radius: float = 0.2,
    margin: float = 0.1,
) -> list:
    """Inflated discs covering occupied cells of ``grid`` within ``radius``.

    Each connected occupied component is cut into square tiles; every tile
    becomes a disc around the centroid of its cells that covers them fully,
    grown by the robot radius.
    """
    spec = grid.spec
    res = spec.resolution
    cx, cy = spec.cell_of(position)
    r = int(math.ceil(radius / res))
    x0, x1 = max(0, cx - r), min(spec.width, cx + r + 1)
    y0, y1 = max(0, cy - r), min(spec.height, cy + r + 1)
    if x0 >= x1 or y0 >= y1:
        return []
    occ = grid.occupied[y0:y1, x0:x1]
    if not occ.any():
        return []
    yy, xx = np.nonzero(occ)
    ctr = np.column_stack([spec.origin[0] + (xx + x0 + 0.5) * res, spec.origin[1] + (yy + y0 + 0.5) * res])
    p = np.asarray(position, dtype=float)
    inside = np.hypot(*(ctr - p).T) <= radius + 0.5 * res
    if not inside.any():
        return []
    labels, _ = ndimage.label(occ, structure=np.ones((3, 3)))
    lab = labels[yy, xx][inside]
    ctr = ctr[inside]
    ts = max(1, int(round(tile / res)))
    tx = (xx[inside] + x0) // ts
    ty = (yy[inside] + y0) // ts
    key = (lab.astype(np.int64) * 1_000_003 + ty) * 1_000_003 + tx
    order = np.argsort(key, kind="stable")
    key, ctr = key[order], ctr[order]
    bounds = np.flatnonzero(np.diff(key)) + 1
    half = 0.5 * res * math.sqrt(2.0)
    out = []
    for group in np.split(ctr, bounds):
        c = group.mean(axis=0)
        cover = float(np.hypot(*(group - c).T).max()) + half
        out.append(ObstacleDisc((float(c[0]), float(c[1])), cover + robot_radius, margin))
    return out


class MpcController(BaseEstimator):
    """Stateful tracker: keeps the previous control sequence for warm starts."""

    def __init__(
        self,
        horizon=20,
        dt=0.1,
        control_weight=0.1,
        u_limit=2.0,
        penalty_weight=200.0,
        iterations=60,
    ):
        self.horizon = horizon
        self.dt = dt
        self.control_weight = control_weight
        self.u_limit = u_limit
        self.penalty_weight = penalty_weight
        self.iterations = iterations

    def reset(self):
        self.warm_ = None
        return self

    def step(self, x0: RobotState, ref_positions, ref_velocities, regions=()) -> MpcSolution:
        check_int(self.horizon, "horizon", low=1)
        lim = check_positive(self.u_limit, "u_limit")
        prob = MpcProblem(
            ref_positions, ref_velocities, self.dt, self.control_weight,
            (-lim, -lim), (lim, lim), list(regions), self.penalty_weight,
        )
        if prob.horizon != self.horizon:
            raise ValueError(f"reference length {prob.horizon} != horizon {self.horizon}")
        warm = getattr(self, "warm_", None)
        if warm is not None:
            warm = np.vstack([warm[1:], warm[-1:]])
        sol = mpc_step(prob, x0, warm, self.iterations)
        self.warm_ = None if sol.braking else sol.controls
        return sol
