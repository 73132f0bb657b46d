"""Command-line entry point: generate, plan, simulate, benchmark, render.

Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
scenario, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import config as C
from .bench import plan_scene, run_suite, simulate
from .global_planner import GlobalPlannerParams, InspectionPlan, PlanInvariantError, check_plan, map_segmentation
from .metrics import (
    BenchmarkRecord,
    aggregate,
    occlusion_summary,
    plan_dyaw,
    records_csv,
    records_json,
    summary_table,
    trajectory_length,
)
from .render import render_image, to_ppm
from .scenes import PlacementInfeasible, Scene, generate_occlusion_scenario, generate_scene
from .simulator import SimulationFault
from .world import grid_from_text, grid_to_text, reference_from_text, reference_to_text

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- manifest ------------------------------------------------------------------------


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    config: dict
    seeds: list = field(default_factory=list)
    files: dict = field(default_factory=dict)

    def add(self, root: Path, path: Path):
        self.files[str(Path(path).relative_to(root))] = sha256_file(path)

    def write(self, root: Path) -> Path:
        Path(root).mkdir(parents=True, exist_ok=True)
        out = Path(root) / "manifest.json"
        body = asdict(self)
        body["files"] = dict(sorted(self.files.items()))
        out.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        return out


def _write(root: Path, manifest: RunManifest, rel: str, data) -> Path:
    path = Path(root) / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)
    manifest.add(Path(root), path)
    return path


# --- argument helpers --------------------------------------------------------------------


def parse_seeds(text: str) -> list:
    """``"0-9"``, ``"3"`` or ``"0,2,5-7"`` into a sorted list of distinct seeds."""
    seeds = set()
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if hi < lo:
                    raise ValueError
                seeds.update(range(lo, hi + 1))
            else:
                seeds.add(int(part))
    except ValueError:
        raise UsageError(f"bad seed list {text!r}") from None
    if not seeds or min(seeds) < 0:
        raise UsageError(f"bad seed list {text!r}")
    return sorted(seeds)


# --- scene IO ------------------------------------------------------------------------------


def write_scene(root: Path, manifest: RunManifest, rel: str, scene: Scene):
    _write(root, manifest, f"{rel}/reference.txt", reference_to_text(scene.reference))
    _write(root, manifest, f"{rel}/truth.txt", grid_to_text(scene.truth))
    _write(root, manifest, f"{rel}/scene.json", scene.metadata_json())


@dataclass
class LoadedScene:
    reference: object
    truth: object
    start: np.ndarray
    occluded: list | None
    meta: dict


def load_scene(path) -> LoadedScene:
    d = Path(path)
    try:
        meta = json.loads((d / "scene.json").read_text())
        start = np.asarray(meta["start"], dtype=float)
        ref = reference_from_text((d / "reference.txt").read_text(), start=start)
        truth = grid_from_text((d / "truth.txt").read_text())
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load scene from {d}: {exc}") from exc
    return LoadedScene(ref, truth, start, meta.get("occluded_cells"), meta)


# --- subcommands ---------------------------------------------------------------------------


def cmd_generate(args, cfg) -> int:
    seeds = parse_seeds(args.seeds)
    out = Path(args.out)
    man = RunManifest("generate", {"seeds": args.seeds, "occlusion": args.occlusion}, cfg, seeds)
    infeasible = []
    if args.occlusion:
        o = cfg["occlusion"]
        for s in seeds:
            try:
                scene = generate_occlusion_scenario(
                    s, C.occlusion_base(cfg), C.sim_config(cfg).sensor, C.planner_kwargs(cfg),
                    (int(o["obstacles_min"]), int(o["obstacles_max"])),
                )
            except PlacementInfeasible as exc:
                infeasible.append((s, str(exc)))
                continue
            write_scene(out, man, f"occ_s{s}", scene)
    else:
        for cid in cfg["scenario"]["config_ids"]:
            for s in seeds:
                try:
                    scene = generate_scene(C.scenario_config(cfg, cid, s))
                except PlacementInfeasible as exc:
                    infeasible.append((s, str(exc)))
                    continue
                write_scene(out, man, f"c{cid}_s{s}", scene)
    man.write(out)
    for s, msg in infeasible:
        print(f"seed {s}: {msg}", file=sys.stderr)
    return EXIT_INFEASIBLE if infeasible else EXIT_OK


def cmd_plan(args, cfg) -> int:
    scene = load_scene(args.scene)
    out = Path(args.out)
    est, _ = plan_scene(scene, cfg, args.planner)
    plan = est.plan_
    if not plan.viewpoints:
        print("warning: empty plan (no inspection targets)", file=sys.stderr)
    check_plan(plan, getattr(est, "viewpoints_", None) if args.planner == "ours" else None)
    man = RunManifest("plan", {"scene": str(args.scene), "planner": args.planner}, cfg)
    _write(out, man, "plan.json", json.dumps(plan.to_dict(), indent=1, sort_keys=True) + "\n")
    diag = {
        "planner": args.planner,
        "segments": len(getattr(est, "segments_", [])),
        "clusters": len(plan.clusters),
        "viewpoints": len(plan.viewpoints),
        "planned_length": trajectory_length(np.array([plan.start] + [v.position for v in plan.viewpoints]))
        if plan.viewpoints and plan.start is not None
        else 0.0,
        "mean_abs_dyaw": plan_dyaw(plan) if len(plan.viewpoints) >= 2 else 0.0,
    }
    _write(out, man, "diagnostics.json", json.dumps(diag, indent=1, sort_keys=True) + "\n")
    man.write(out)
    return EXIT_OK


class _PlanHolder:
    def __init__(self, plan, segments):
        self.plan_ = plan
        self.segments_ = segments


def cmd_simulate(args, cfg) -> int:
    scene = load_scene(args.scene)
    try:
        plan = InspectionPlan.from_dict(json.loads(Path(args.plan).read_text()))
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load plan {args.plan}: {exc}") from exc
    segments = map_segmentation(scene.reference, GlobalPlannerParams(**C.planner_kwargs(cfg)))
    if args.adaptation is None:
        adaptation = bool(cfg["sim"]["adaptation"])
    else:
        adaptation = args.adaptation == "on"
    res = simulate(scene, _PlanHolder(plan, segments), cfg, adaptation)
    out = Path(args.out)
    man = RunManifest("simulate", {"scene": str(args.scene), "plan": str(args.plan), "adaptation": adaptation}, cfg)
    _write(out, man, "result.json", res.to_json() + "\n")
    _write(out, man, "trajectory.csv", res.trajectory_csv())
    _write(out, man, "covered.txt", "".join(f"{c}\n" for c in res.covered))
    img = render_image(scene.reference, scene.truth, res.covered, scene.occluded or (), res.trajectory, plan.viewpoints)
    _write(out, man, "mission.ppm", to_ppm(img))
    man.write(out)
    summary = f"coverage {res.coverage:.2f}%  length {trajectory_length(res.trajectory):.2f} m  time {res.sim_time:.1f} s"
    if scene.occluded:
        occ = set(scene.occluded)
        summary += f"  occluded ratio {len(occ & set(res.covered)) / len(occ):.3f}"
    print(summary)
    return EXIT_OK


def _format(records, fmt: str) -> str:
    if fmt == "csv":
        return records_csv(records)
    if fmt == "json":
        agg = {f"{k[0]}/{k[1]}": v for k, v in aggregate(records).items()}
        return json.dumps({"records": json.loads(records_json(records)), "summary": agg}, indent=1, sort_keys=True)
    return summary_table(records) + "\n\n" + occlusion_summary(records)


def _strip_timing(records):
    return [BenchmarkRecord(**{**asdict(r), "planning_time": 0.0}) for r in records]


def cmd_benchmark(args, cfg) -> int:
    seeds = parse_seeds(args.seeds)
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    suite = run_suite(cfg, seeds, jobs=args.jobs, occlusion=not args.no_occlusion)
    records = suite.all_records
    out = Path(args.out)
    man = RunManifest("benchmark", {"seeds": args.seeds, "occlusion": not args.no_occlusion}, cfg, seeds)
    # wall-clock timings vary between runs, so files carry them only on request
    stored = records if args.timings else _strip_timing(records)
    _write(out, man, "records.csv", records_csv(stored))
    _write(out, man, "summary.txt", summary_table(stored) + "\n\n" + occlusion_summary(stored) + "\n")
    _write(out, man, "digests.json", json.dumps({"/".join(map(str, k)): v for k, v in sorted(suite.digests.items())}, indent=1) + "\n")
    man.write(out)
    print(_format(records, args.format))
    if suite.infeasible:
        print(f"skipped infeasible instances: {suite.infeasible}", file=sys.stderr)
    if suite.faults:
        for key, msg in suite.faults:
            print(f"collision in {key}: {msg}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_render(args, cfg) -> int:
    scene = load_scene(args.scene)
    out = Path(args.out)
    man = RunManifest("render", {"scene": str(args.scene), "results": list(args.result or [])}, cfg)
    if not args.result:
        img = render_image(scene.reference, scene.truth, (), scene.occluded or (), scale=args.scale)
        _write(out, man, "scene.ppm", to_ppm(img))
    for i, path in enumerate(args.result or []):
        try:
            d = json.loads(Path(path).read_text())
            covered = d["covered"]
        except (OSError, KeyError, ValueError) as exc:
            raise UsageError(f"cannot load result {path}: {exc}") from exc
        traj = None
        csv_path = Path(path).with_name("trajectory.csv")
        if csv_path.exists():
            traj = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        img = render_image(scene.reference, scene.truth, covered, scene.occluded or (), traj, scale=args.scale)
        _write(out, man, f"render_{i}.ppm", to_ppm(img))
    man.write(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="asip", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seeds=False):
        sp.add_argument("--config", help="TOML file overriding the packaged defaults")
        sp.add_argument("--params", help="second TOML override applied after --config")
        sp.add_argument("--out", required=True, help="output directory")
        if seeds:
            sp.add_argument("--seeds", required=True, help="seed list, e.g. 0-9 or 0,3,5-7")

    g = sub.add_parser("generate", help="write scene files")
    common(g, seeds=True)
    g.add_argument("--occlusion", action="store_true", help="generate occlusion scenarios instead")

    pl = sub.add_parser("plan", help="plan a scene")
    common(pl)
    pl.add_argument("--scene", required=True)
    pl.add_argument("--planner", choices=("ours", "naive"), default="ours")

    sm = sub.add_parser("simulate", help="fly a plan in a scene")
    common(sm)
    sm.add_argument("--scene", required=True)
    sm.add_argument("--plan", required=True)
    sm.add_argument("--adaptation", choices=("on", "off"), default=None)

    b = sub.add_parser("benchmark", help="run the benchmark and occlusion suites")
    common(b, seeds=True)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--format", choices=("table", "csv", "json"), default="table")
    b.add_argument("--no-occlusion", action="store_true")
    b.add_argument("--timings", action="store_true", help="keep wall-clock planning times in output files")

    r = sub.add_parser("render", help="draw scenes and mission results")
    common(r)
    r.add_argument("--scene", required=True)
    r.add_argument("--result", action="append", help="result.json from simulate (repeatable)")
    r.add_argument("--scale", type=int, default=4)
    return p


COMMANDS = {
    "generate": cmd_generate,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "render": cmd_render,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = C.load(args.config, args.params)
        return COMMANDS[args.command](args, cfg)
    except (UsageError, C.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlacementInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SimulationFault, PlanInvariantError) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
