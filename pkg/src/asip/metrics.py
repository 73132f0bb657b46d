"""Evaluation quantities and benchmark tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._validation import angle_diff


def _target_set(ref_or_targets) -> np.ndarray:
    targets = getattr(ref_or_targets, "target_cells", ref_or_targets)
    return np.asarray(targets, dtype=np.int64).ravel()


def coverage_percent(covered, ref_or_targets) -> float:
    """Percentage of target cells present in ``covered``.

    ``ref_or_targets`` is a reference map or an array of target cell ids.
    Cells of ``covered`` outside the target set are rejected.
    """
    targets = _target_set(ref_or_targets)
    if targets.size == 0:
        raise ValueError("coverage of an empty target set is undefined")
    cov = np.unique(np.asarray(list(covered) if not isinstance(covered, np.ndarray) else covered, dtype=np.int64))
    extra = np.setdiff1d(cov, targets)
    if extra.size:
        raise ValueError(f"covered cells outside the target set: {extra[:5].tolist()}")
    return 100.0 * cov.size / np.unique(targets).size


def trajectory_length(log) -> float:
    """Sum of Euclidean steps between consecutive positions.

    Accepts an ``(n, 2)`` position array or trajectory rows ``(t, x, y, ...)``.
    """
    a = np.asarray(log, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 2:
        raise ValueError("need at least one pose")
    xy = a[:, :2] if a.shape[1] == 2 else a[:, 1:3]
    if xy.shape[0] == 1:
        return 0.0
    return float(np.hypot(*np.diff(xy, axis=0).T).sum())


def mean_abs_dyaw(yaws) -> float:
    """Mean wrapped absolute yaw change over consecutive entries."""
    y = np.asarray(yaws, dtype=float).ravel()
    if y.size < 2:
        raise ValueError("need at least two yaws")
    return float(np.mean(angle_diff(y[1:], y[:-1])))


def plan_dyaw(plan) -> float:
    return mean_abs_dyaw([v.yaw for v in plan.viewpoints])


def executed_dyaw(result) -> float:
    """Same statistic on the yaws held when each viewpoint was marked visited."""
    ys = [s.yaw for s in result.statuses if s.yaw is not None]
    return mean_abs_dyaw(ys) if len(ys) >= 2 else 0.0


def occluded_coverage_ratio(covered, occluded) -> float:
    occ = np.unique(np.asarray(list(occluded), dtype=np.int64))
    if occ.size == 0:
        raise ValueError("occluded set is empty")
    cov = np.asarray(list(covered) if not isinstance(covered, np.ndarray) else covered, dtype=np.int64)
    return float(np.isin(occ, cov).sum()) / occ.size


@dataclass(frozen=True)
class BenchmarkRecord:
    config_id: int
    seed: int
    planner: str
    coverage: float
    length: float
    planned_length: float
    mean_abs_dyaw: float
    executed_dyaw: float = 0.0
    occluded_ratio: float | None = None
    planning_time: float = 0.0
    n_viewpoints: int = 0
    collisions: int = 0

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 100.0:
            raise ValueError(f"coverage out of range: {self.coverage}")
        if self.length < 0 or self.planned_length < 0:
            raise ValueError("lengths must be non-negative")
        if not 0.0 <= self.mean_abs_dyaw <= math.pi + 1e-12:
            raise ValueError(f"mean_abs_dyaw out of range: {self.mean_abs_dyaw}")
        if self.occluded_ratio is not None and not 0.0 <= self.occluded_ratio <= 1.0:
            raise ValueError(f"occluded ratio out of range: {self.occluded_ratio}")


NUMERIC = ("coverage", "length", "planned_length", "mean_abs_dyaw", "executed_dyaw", "occluded_ratio", "planning_time")


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof = 1; zero for a single value)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        return math.nan, math.nan
    mean = float(a.mean())
    std = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return mean, std


def aggregate(records, keys=NUMERIC) -> dict:
    """Per (config, planner) mean and std of every numeric field."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.config_id, r.planner), []).append(r)
    out = {}
    for key in sorted(groups):
        rows = groups[key]
        stats = {"n": len(rows)}
        for k in keys:
            vals = [getattr(r, k) for r in rows if getattr(r, k) is not None]
            if vals:
                stats[k] = mean_std(vals)
        out[key] = stats
    return out


def records_csv(records) -> str:
    buf = io.StringIO()
    names = [f.name for f in fields(BenchmarkRecord)]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for r in records:
        w.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])
    return buf.getvalue()


def records_json(records) -> str:
    return json.dumps([asdict(r) for r in records], indent=1, sort_keys=True)


def summary_table(records) -> str:
    """Mean ± std per configuration and planner, one row each."""
    agg = aggregate(records)
    head = f"{'config':>6}  {'planner':<8} {'n':>3}  {'Cov. (%)':>16}  {'Len. (m)':>17}  {'|dYaw| (rad)':>13}"
    lines = [head, "-" * len(head)]
    for (cfg, planner), st in agg.items():
        cov, ln, dy = st["coverage"], st["length"], st["mean_abs_dyaw"]
        lines.append(
            f"{cfg:>6}  {planner:<8} {st['n']:>3}  {cov[0]:>7.2f}±{cov[1]:<8.2f}  "
            f"{ln[0]:>8.2f}±{ln[1]:<8.2f}  {dy[0]:>5.2f}±{dy[1]:<5.2f}"
        )
    return "\n".join(lines)


def occlusion_summary(records) -> str:
    rows = [r for r in records if r.occluded_ratio is not None]
    lines = ["occlusion suite: occluded-region coverage ratio"]
    for planner in sorted({r.planner for r in rows}):
        m, s = mean_std([r.occluded_ratio for r in rows if r.planner == planner])
        lines.append(f"  {planner:<10} {m:.3f} ± {s:.3f}  (n={sum(r.planner == planner for r in rows)})")
    return "\n".join(lines)
