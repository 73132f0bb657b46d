"""Benchmark orchestration: per-instance pipelines and the suite driver."""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as C
from .global_planner import GlobalCoveragePlanner, NaiveCoveragePlanner
from .metrics import BenchmarkRecord, executed_dyaw, occluded_coverage_ratio, plan_dyaw, trajectory_length
from .scenes import PlacementInfeasible, generate_occlusion_scenario, generate_scene
from .simulator import SimulationFault, run_mission


def plan_scene(scene, cfg: dict, planner: str = "ours"):
    """Fit a planner on the scene's reference map. Returns ``(estimator, seconds)``."""
    t0 = time.perf_counter()
    if planner == "ours":
        est = GlobalCoveragePlanner(**C.planner_kwargs(cfg))
    elif planner == "naive":
        est = NaiveCoveragePlanner(**C.naive_kwargs(cfg))
    else:
        raise ValueError(f"unknown planner {planner!r}")
    est.fit(scene.reference, start=scene.start)
    return est, time.perf_counter() - t0


def simulate(scene, est, cfg: dict, adaptation: bool):
    return run_mission(
        scene.reference,
        scene.truth,
        est.plan_,
        C.sim_config(cfg, adaptation),
        segments=getattr(est, "segments_", ()),
        weights=C.cost_weights(cfg),
        mpc=C.mpc_controller(cfg),
        start=scene.start,
    )


def _planned_length(plan) -> float:
    pts = [v.position for v in plan.viewpoints]
    if plan.start is not None:
        pts = [plan.start] + pts
    return trajectory_length(np.asarray(pts, dtype=float)) if pts else 0.0


def _record(config_id, seed, name, est, result, seconds, occluded=None) -> BenchmarkRecord:
    plan = est.plan_
    return BenchmarkRecord(
        config_id=int(config_id),
        seed=int(seed),
        planner=name,
        coverage=result.coverage,
        length=trajectory_length(result.trajectory),
        planned_length=_planned_length(plan),
        mean_abs_dyaw=plan_dyaw(plan) if len(plan.viewpoints) >= 2 else 0.0,
        executed_dyaw=executed_dyaw(result),
        occluded_ratio=None if occluded is None else occluded_coverage_ratio(result.covered, occluded),
        planning_time=seconds,
        n_viewpoints=len(plan.viewpoints),
    )


def _digest(result) -> str:
    return hashlib.sha256(result.to_json().encode()).hexdigest()


@dataclass
class InstanceOutcome:
    key: tuple
    records: list = field(default_factory=list)
    digests: dict = field(default_factory=dict)
    fault: str | None = None
    infeasible: bool = False


def bench_instance(cfg: dict, config_id: int, seed: int) -> InstanceOutcome:
    """Ours (adaptation per config) and the naive baseline (nominal yaw) on one scene."""
    out = InstanceOutcome(("bench", int(config_id), int(seed)))
    try:
        scene = generate_scene(C.scenario_config(cfg, config_id, seed))
    except PlacementInfeasible:
        out.infeasible = True
        return out
    adapt = bool(cfg["sim"]["adaptation"])
    for name, adaptation in (("ours", adapt), ("naive", False)):
        est, secs = plan_scene(scene, cfg, name)
        try:
            res = simulate(scene, est, cfg, adaptation)
        except SimulationFault as exc:
            out.fault = f"{name}: {exc}"
            return out
        out.records.append(_record(config_id, seed, name, est, res, secs))
        out.digests[name] = _digest(res)
    return out


def occlusion_instance(cfg: dict, seed: int) -> InstanceOutcome:
    """One occlusion scenario flown with and without view-angle adaptation."""
    o = cfg["occlusion"]
    out = InstanceOutcome(("occlusion", int(o["config_id"]), int(seed)))
    try:
        scene = generate_occlusion_scenario(
            seed,
            C.occlusion_base(cfg),
            sensor=C.sim_config(cfg).sensor,
            planner_params=C.planner_kwargs(cfg),
            n_obstacles=(int(o["obstacles_min"]), int(o["obstacles_max"])),
        )
    except PlacementInfeasible:
        out.infeasible = True
        return out
    est, secs = plan_scene(scene, cfg, "ours")
    for name, adaptation in (("adaptive", True), ("nominal", False)):
        try:
            res = simulate(scene, est, cfg, adaptation)
        except SimulationFault as exc:
            out.fault = f"{name}: {exc}"
            return out
        out.records.append(_record(scene.config.config_id, seed, name, est, res, secs, scene.occluded))
        out.digests[name] = _digest(res)
    return out


@dataclass
class SuiteResult:
    records: list
    occlusion: list
    digests: dict
    faults: list
    infeasible: list

    @property
    def all_records(self) -> list:
        return self.records + self.occlusion


def _run(tasks, jobs):
    if jobs <= 1:
        return [fn(*args) for fn, args in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *args) for fn, args in tasks]
        return [f.result() for f in futures]


def run_suite(cfg: dict, seeds, jobs: int = 1, occlusion: bool = True, config_ids=None) -> SuiteResult:
    """Benchmark plus occlusion suite. Output order is fixed by (config, seed)."""
    ids = list(config_ids if config_ids is not None else cfg["scenario"]["config_ids"])
    tasks = [(bench_instance, (cfg, c, s)) for c in ids for s in seeds]
    outcomes = _run(tasks, jobs)
    occ_outcomes = []
    if occlusion:
        o = cfg["occlusion"]
        want, nxt, limit = int(o["count"]), int(o["seed_start"]), int(o["seed_start"]) + int(o["max_seeds"])
        # evaluate seed prefixes in waves so the chosen set never depends on scheduling
        while sum(not x.infeasible for x in occ_outcomes) < want and nxt < limit:
            need = want - sum(not x.infeasible for x in occ_outcomes)
            wave = list(range(nxt, min(nxt + need, limit)))
            nxt += len(wave)
            occ_outcomes += _run([(occlusion_instance, (cfg, s)) for s in wave], jobs)
    everything = outcomes + occ_outcomes
    order = sorted(range(len(everything)), key=lambda i: everything[i].key)
    records, occ, digests, faults, infeasible = [], [], {}, [], []
    for i in order:
        x = everything[i]
        if x.infeasible:
            infeasible.append(x.key)
            continue
        if x.fault:
            faults.append((x.key, x.fault))
        (occ if x.key[0] == "occlusion" else records).extend(x.records)
        for name, d in x.digests.items():
            digests[x.key + (name,)] = d
    return SuiteResult(records, occ, digests, faults, infeasible)
