"""Closed-loop mission execution against a ground-truth scene.

Each tick: sense (range sweep into the live map, camera coverage against the
truth), choose a yaw, track the current leg with the MPC and integrate the
double integrator exactly. Legs run viewpoint to viewpoint along optimized
B-splines that start and end at rest.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _raytrace
from ._validation import angle_diff, check_positive, wrap_angle
from .bspline import CostWeights, DistanceField, StaticPlanInfeasible, TimedPath, extract_reference, static_plan
from .global_planner import InspectionPlan
from .mpc import MpcController, RobotState, obstacle_regions
from .view_angle import ViewAnglePlanner
from .world import CellState, OccupancyGrid, ReferenceMap, SensorModel, visible_target_rows

VISITED = "visited"
SKIPPED_UNREACHABLE = "skipped_unreachable"
SKIPPED_INFEASIBLE = "skipped_infeasible"
MISSED = "missed"
PENDING = "pending"


class SimulationFault(RuntimeError):
    """The robot entered an occupied cell of the truth map."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    sensor: SensorModel = field(default_factory=SensorModel)
    lidar_rays: int = 360
    lidar_range: float = 8.0
    max_time: float = 1200.0
    adaptation: bool = True
    visit_tolerance: float = 0.3
    yaw_rate: float = 1.5
    yaw_tolerance: float = 0.05
    dwell_cap: float = 5.0
    v_max: float = 1.0
    a_max: float = 1.0
    lag_hold: float = 0.5
    detour_attempts: int = 3
    stall_time: float = 3.0
    leg_slack: float = 10.0
    robot_radius: float = 0.2
    region_radius: float = 3.0
    region_tile: float = 0.3
    region_margin: float = 0.1

    def __post_init__(self):
        check_positive(self.dt, "dt")
        check_positive(self.max_time, "max_time")
        check_positive(self.visit_tolerance, "visit_tolerance")
        check_positive(self.yaw_rate, "yaw_rate")
        check_positive(self.v_max, "v_max")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sensor"] = asdict(self.sensor)
        return d


@dataclass
class ViewpointStatus:
    index: int
    cluster: int
    status: str = PENDING
    time: float | None = None
    yaw: float | None = None
    attempts: int = 0


@dataclass
class MissionResult:
    covered: list  # sorted flat ids of covered target cells
    n_targets: int
    trajectory: np.ndarray  # rows (t, x, y, yaw, vx, vy)
    statuses: list
    planned_yaws: list
    ticks: int
    sim_time: float
    replans: int
    adaptation: bool

    @property
    def coverage(self) -> float:
        return 100.0 * len(self.covered) / self.n_targets if self.n_targets else 0.0

    def to_dict(self) -> dict:
        return {
            "adaptation": self.adaptation,
            "covered": [int(c) for c in self.covered],
            "n_targets": int(self.n_targets),
            "coverage": float(self.coverage),
            "ticks": int(self.ticks),
            "sim_time": float(self.sim_time),
            "replans": int(self.replans),
            "planned_yaws": [float(y) for y in self.planned_yaws],
            "viewpoints": [asdict(s) for s in self.statuses],
            "trajectory_length": float(np.hypot(*np.diff(self.trajectory[:, 1:3], axis=0).T).sum())
            if len(self.trajectory) > 1
            else 0.0,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,x,y,yaw,vx,vy\n")
        for row in self.trajectory:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()


class _Leg:
    def __init__(self, path: TimedPath, goal_index: int, novel: int):
        self.path = path
        self.novel = novel
        self.goal_index = goal_index
        self.clock = 0.0
        self.elapsed = 0.0
        self.held = 0.0
        self.samples = path.traj.sample(10)


class Mission:
    """One mission as an explicit state machine; ``run`` drives it to the end."""

    def __init__(
        self,
        reference: ReferenceMap,
        truth: OccupancyGrid,
        plan: InspectionPlan,
        config: SimConfig | None = None,
        segments=(),
        weights: CostWeights | None = None,
        mpc: MpcController | None = None,
        start=None,
    ):
        self.ref = reference
        self.truth = truth
        self.plan = plan
        self.cfg = config or SimConfig()
        self.weights = weights or CostWeights()
        self.mpc = (mpc or MpcController(dt=self.cfg.dt, u_limit=2.0)).reset()
        spec = reference.spec
        self.spec = spec
        self.vps = plan.viewpoints
        cluster_of = [ci for ci, c in enumerate(plan.clusters) for _ in c.viewpoints]
        self.status = [ViewpointStatus(i, cluster_of[i]) for i in range(len(self.vps))]
        if start is None:
            start = plan.start if plan.start is not None else reference.start
        if start is None:
            start = self.vps[0].position if self.vps else (spec.origin[0], spec.origin[1])
        self.p = np.asarray(start, dtype=float).copy()
        self.v = np.zeros(2)
        self.yaw = float(self.vps[0].yaw) if self.vps else 0.0
        self.t = 0.0
        self.tick = 0
        self.live = OccupancyGrid(spec)
        self.planning = OccupancyGrid(spec)
        self.planning.state[reference.structure] = CellState.OCCUPIED
        self._structure = reference.structure
        self.covered = np.zeros(reference.n_targets, dtype=bool)
        self.novel = 0
        self._field = None
        self._regions = None
        self._regions_at = None
        self._regions_novel = -1
        self.leg = None
        self.active = 0
        self.dwell = 0.0
        self.replans = 0
        self.log = []
        self.vap = None
        if self.cfg.adaptation:
            s = self.cfg.sensor
            self.vap = ViewAnglePlanner(fov=s.fov, max_range=s.max_range).fit(reference, self.vps, segments)

    # -- sensing -----------------------------------------------------------------

    def sense(self):
        spec = self.spec
        ix, iy = spec.cell_of(self.p)
        if not spec.in_bounds(ix, iy) or self.truth.state[iy, ix] == CellState.OCCUPIED:
            raise SimulationFault(f"robot inside an occupied truth cell at t={self.t:.2f}")
        newly = _raytrace.sweep_update(
            self.truth.state, self.live.state, spec.origin[0], spec.origin[1], spec.resolution,
            float(self.p[0]), float(self.p[1]), self.cfg.lidar_rays, float(self.cfg.lidar_range),
        )
        if newly:
            occ = self.live.state == CellState.OCCUPIED
            novel_mask = occ & ~self._structure
            count = int(novel_mask.sum())
            if count != self.novel:
                self.novel = count
                self.planning.state[novel_mask] = CellState.OCCUPIED
                self._field = None
        rows = visible_target_rows(self.truth, self.ref, self.p, self.yaw, self.cfg.sensor)
        self.covered[rows] = True
        self.log.append((self.t, self.p[0], self.p[1], self.yaw, self.v[0], self.v[1]))

    @property
    def field(self) -> DistanceField:
        if self._field is None:
            self._field = DistanceField(self.spec, self.planning.state == CellState.OCCUPIED)
        return self._field

    def regions(self):
        moved = self._regions_at is None or np.hypot(*(self.p - self._regions_at)) > 0.25
        if moved or self._regions_novel != self.novel:
            c = self.cfg
            self._regions = obstacle_regions(
                self.planning, self.p, c.region_radius, c.region_tile, c.robot_radius, c.region_margin
            )
            self._regions_at = self.p.copy()
            self._regions_novel = self.novel
            self._disc_c = np.array([r.center for r in self._regions]).reshape(-1, 2)
            self._disc_r = np.array([r.radius for r in self._regions])
        regions = self._regions
        if regions:
            c = self._disc_c
            inside = np.hypot(c[:, 0] - self.p[0], c[:, 1] - self.p[1]) < self._disc_r
            if inside.any():
                # a disc is a conservative cover; never let it hold the robot hostage
                return [r for r, bad in zip(regions, inside) if not bad]
        return self._regions

    # -- legs --------------------------------------------------------------------

    def _plan_leg(self, goal_index: int, attempt: int):
        goal = np.asarray(self.vps[goal_index].position, dtype=float)
        w = self.weights
        if attempt:
            # later attempts keep the detour search farther from obstacles
            w = CostWeights(w.control, w.smooth, w.collision, w.clearance * (1.0 + 0.25 * attempt))
        res = static_plan([self.p, goal], self.field, w, v_nominal=self.cfg.v_max)
        return _Leg(TimedPath(res.trajectory, self.cfg.v_max, self.cfg.a_max), goal_index, self.novel)

    def _ensure_leg(self) -> bool:
        """Make sure a leg toward the active viewpoint exists; False when it had to be skipped."""
        i = self.active
        st = self.status[i]
        if self.leg is not None and self.leg.goal_index == i:
            return True
        spec = self.spec
        gx, gy = spec.cell_of(self.vps[i].position)
        goal_blocked = not spec.in_bounds(gx, gy) or self.live.state[gy, gx] == CellState.OCCUPIED
        while st.attempts <= self.cfg.detour_attempts:
            attempt = st.attempts
            st.attempts += 1
            try:
                self.leg = self._plan_leg(i, attempt)
                self.mpc.reset()
                return True
            except StaticPlanInfeasible:
                continue
        st.status = SKIPPED_UNREACHABLE if goal_blocked else SKIPPED_INFEASIBLE
        st.time = self.t
        self.leg = None
        return False

    def _leg_unsafe(self) -> bool:
        leg = self.leg
        if leg is None or leg.novel == self.novel:
            return False
        leg.novel = self.novel
        d = self.field(leg.samples)
        near_goal = np.hypot(*(leg.samples - leg.samples[-1]).T) < self.weights.clearance
        return bool(np.any((d < self.cfg.robot_radius) & ~near_goal))

    def _advance(self):
        """Resolve visits and skips for the active viewpoint; returns the yaw target or None when done."""
        cfg = self.cfg
        while self.active < len(self.vps):
            i = self.active
            vp = self.vps[i]
            target = self._target_yaw(vp)
            leg = self.leg if self.leg is not None and self.leg.goal_index == i else None
            arrived = leg is None or leg.clock >= leg.path.duration
            if arrived and np.hypot(*(self.p - np.asarray(vp.position))) <= cfg.visit_tolerance:
                settled = angle_diff(self.yaw, target) <= cfg.yaw_tolerance
                if settled or self.dwell >= cfg.dwell_cap:
                    st = self.status[i]
                    st.status, st.time, st.yaw = VISITED, self.t, self.yaw
                    self._next()
                    continue
            if leg is not None and leg.elapsed > leg.path.duration + cfg.leg_slack:
                st = self.status[i]
                st.status, st.time = MISSED, self.t
                self._next()
                continue
            if leg is not None and (leg.held >= cfg.stall_time or self._leg_unsafe()):
                # stuck behind the tracking controller or the leg crosses new obstacles
                self.replans += 1
                self.leg = None
            if not self._ensure_leg():
                self._next()
                continue
            return target
        return None

    def _next(self):
        self.active += 1
        self.leg = None
        self.dwell = 0.0

    def _target_yaw(self, vp) -> float:
        if self.vap is None:
            return float(vp.yaw)
        return self.vap.select(self.p, vp.yaw, self.planning)[0]

    # -- control -------------------------------------------------------------------

    def control(self, yaw_target: float):
        cfg = self.cfg
        leg = self.leg
        ref_now, _ = leg.path.state_at(leg.clock)
        if np.hypot(*(self.p - ref_now[0])) <= cfg.lag_hold:
            leg.clock = min(leg.clock + cfg.dt, leg.path.duration)
            leg.held = 0.0
        else:
            leg.held += cfg.dt
        leg.elapsed += cfg.dt
        rp, rv = extract_reference(leg.path, leg.clock, self.mpc.horizon, cfg.dt)
        sol = self.mpc.step(RobotState(self.p, self.v), rp, rv, self.regions())
        u = sol.u0
        self.p = self.p + self.v * cfg.dt + 0.5 * u * cfg.dt * cfg.dt
        self.v = self.v + u * cfg.dt
        step = float(np.clip(wrap_angle(yaw_target - self.yaw), -cfg.yaw_rate * cfg.dt, cfg.yaw_rate * cfg.dt))
        self.yaw = float(wrap_angle(self.yaw + step))
        if np.hypot(*(self.p - np.asarray(self.vps[leg.goal_index].position))) <= cfg.visit_tolerance:
            self.dwell += cfg.dt
        self.t = round(self.t + cfg.dt, 10)
        self.tick += 1

    def run(self) -> MissionResult:
        cfg = self.cfg
        while True:
            self.sense()
            if self.vap is not None:
                self.vap.observe(self.planning, np.flatnonzero(self.covered), self.novel)
            if self.t >= cfg.max_time - 1e-9:
                break
            target = self._advance()
            if target is None:
                break
            self.control(target)
        for st in self.status:
            if st.status == PENDING:
                st.status = MISSED
        return MissionResult(
            covered=sorted(int(c) for c in self.ref.target_cells[self.covered]),
            n_targets=self.ref.n_targets,
            trajectory=np.array(self.log, dtype=float).reshape(-1, 6),
            statuses=self.status,
            planned_yaws=[float(v.yaw) for v in self.vps],
            ticks=self.tick,
            sim_time=self.t,
            replans=self.replans,
            adaptation=cfg.adaptation,
        )


def run_mission(reference, truth, plan, config=None, segments=(), weights=None, mpc=None, start=None) -> MissionResult:
    return Mission(reference, truth, plan, config, segments, weights, mpc, start).run()
