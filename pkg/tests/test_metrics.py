import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asip.metrics import (
    BenchmarkRecord,
    aggregate,
    coverage_percent,
    mean_abs_dyaw,
    mean_std,
    occluded_coverage_ratio,
    records_csv,
    records_json,
    summary_table,
    trajectory_length,
)

floats = st.floats(-50, 50, allow_nan=False)


def test_coverage_trivial_cases(room):
    t = room.target_cells
    assert coverage_percent([], room) == 0.0
    assert coverage_percent(t, room) == 100.0
    assert coverage_percent(t[: len(t) // 2], t) == pytest.approx(100.0 * (len(t) // 2) / len(t))
    # duplicates do not count twice
    assert coverage_percent(np.concatenate([t[:3], t[:3]]), t) == pytest.approx(300.0 / len(t))


def test_coverage_rejects_foreign_cells_and_empty_targets(room):
    free_cell = room.spec.flat(*room.spec.cell_of((4.0, 4.0)))
    with pytest.raises(ValueError):
        coverage_percent([free_cell], room)
    with pytest.raises(ValueError):
        coverage_percent([], np.zeros(0, dtype=np.int64))


def test_occluded_ratio_extremes():
    assert occluded_coverage_ratio([1, 2], [5, 6, 7]) == 0.0
    assert occluded_coverage_ratio([4, 5, 6, 7, 8], [5, 6, 7]) == 1.0
    assert occluded_coverage_ratio([5], [5, 6]) == 0.5
    with pytest.raises(ValueError):
        occluded_coverage_ratio([1], [])


@given(st.lists(st.tuples(floats, floats), min_size=1, max_size=30))
def test_trajectory_length_matches_loop(points):
    xy = np.array(points, dtype=float)
    expected = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        expected += math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2)
    assert trajectory_length(xy) == pytest.approx(expected, rel=1e-12, abs=1e-12)
    # trajectory rows (t, x, y, yaw) give the same number
    rows = np.column_stack([np.arange(len(xy)), xy, np.zeros(len(xy))])
    assert trajectory_length(rows) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(st.lists(st.tuples(floats, floats), min_size=2, max_size=20), floats, floats)
def test_trajectory_length_translation_invariant(points, dx, dy):
    xy = np.array(points, dtype=float)
    assert trajectory_length(xy + [dx, dy]) == pytest.approx(trajectory_length(xy), rel=1e-9, abs=1e-9)


def test_mean_abs_dyaw_wraps():
    assert mean_abs_dyaw([0.0, math.pi / 2, math.pi]) == pytest.approx(math.pi / 2)
    # crossing the seam is a small turn
    assert mean_abs_dyaw([math.pi - 0.1, -math.pi + 0.1]) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        mean_abs_dyaw([1.0])


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=20), st.floats(-10, 10))
def test_mean_abs_dyaw_offset_invariant(yaws, offset):
    base = mean_abs_dyaw(yaws)
    assert 0.0 <= base <= math.pi + 1e-12
    assert mean_abs_dyaw(np.asarray(yaws) + offset) == pytest.approx(base, abs=1e-9)


def _two_pass(values):
    n = len(values)
    m = sum(values) / n
    if n == 1:
        return m, 0.0
    return m, math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40))
def test_mean_std_two_pass(values):
    m, s = mean_std(values)
    em, es = _two_pass(values)
    assert m == pytest.approx(em, rel=1e-9, abs=1e-9)
    assert s == pytest.approx(es, rel=1e-7, abs=1e-7)


def test_mean_std_empty_is_nan():
    assert all(math.isnan(x) for x in mean_std([]))


def _rec(cid, seed, planner, cov, length, dyaw, occ=None):
    return BenchmarkRecord(cid, seed, planner, cov, length, length * 0.9, dyaw, occluded_ratio=occ)


def test_aggregate_groups_and_matches_oracle():
    recs = [_rec(c, s, p, 99.0 + 0.1 * s, 50.0 + s * c, 0.1 * s) for c in (1, 2) for p in ("naive", "ours") for s in range(4)]
    agg = aggregate(recs)
    assert list(agg) == [(1, "naive"), (1, "ours"), (2, "naive"), (2, "ours")]
    for (c, p), stats in agg.items():
        assert stats["n"] == 4
        rows = [r for r in recs if r.config_id == c and r.planner == p]
        for key in ("coverage", "length", "mean_abs_dyaw"):
            em, es = _two_pass([getattr(r, key) for r in rows])
            assert stats[key][0] == pytest.approx(em)
            assert stats[key][1] == pytest.approx(es)
        assert "occluded_ratio" not in stats


def test_record_validation():
    with pytest.raises(ValueError):
        _rec(1, 0, "ours", 100.5, 1.0, 0.1)
    with pytest.raises(ValueError):
        _rec(1, 0, "ours", 99.0, -1.0, 0.1)
    with pytest.raises(ValueError):
        _rec(1, 0, "ours", 99.0, 1.0, 4.0)
    with pytest.raises(ValueError):
        _rec(1, 0, "ours", 99.0, 1.0, 0.1, occ=1.5)


def test_serialisation_is_stable():
    recs = [_rec(1, 0, "ours", 99.5, 10.0, 0.2, occ=0.75), _rec(1, 0, "naive", 99.0, 11.0, 1.2)]
    text = records_csv(recs)
    lines = text.splitlines()
    assert lines[0].split(",")[:4] == ["config_id", "seed", "planner", "coverage"]
    assert len(lines) == 3
    assert records_csv(recs) == text
    assert records_json(recs) == records_json(list(recs))
    table = summary_table(recs)
    assert "ours" in table and "naive" in table
