import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asip.bspline import (
    BSplineTrajectory,
    CostWeights,
    DistanceField,
    StaticCost,
    TimedPath,
    extract_reference,
    optimize_inner,
    static_plan,
)
from asip.world import GridSpec


def cox_de_boor(i, k, u):
    """Basis N_{i,k} on the integer knot vector (order k, degree k - 1)."""
    if k == 1:
        return 1.0 if i <= u < i + 1 else 0.0
    a = (u - i) / (k - 1) * cox_de_boor(i, k - 1, u)
    b = (i + k - u) / (k - 1) * cox_de_boor(i + 1, k - 1, u)
    return a + b


def basis_sum(P, k, u):
    n = len(P)
    if u >= n:  # right end of the domain: take the limit from the left
        u = n - 1e-13
    return sum(P[i] * cox_de_boor(i, k, u) for i in range(n))


def open_field(size=6.0, res=0.1, discs=()):
    n = int(round(size / res))
    spec = GridSpec(res, n, n)
    yy, xx = np.mgrid[:n, :n]
    cx, cy = (xx + 0.5) * res, (yy + 0.5) * res
    occ = np.zeros(spec.shape, bool)
    for x, y, r in discs:
        occ |= np.hypot(cx - x, cy - y) <= r
    return DistanceField(spec, occ), occ


# --- evaluation --------------------------------------------------------------


@pytest.mark.parametrize("order", [2, 3, 4, 5])
def test_eval_matches_basis_summation(order):
    rng = np.random.default_rng(order)
    for _ in range(20):
        n = int(rng.integers(2 * (order - 1) + 1, 14))
        P = rng.uniform(-5, 5, size=(n, 2))
        traj = BSplineTrajectory(P, order, dt=0.5)
        ts = np.concatenate([[0.0, 1.0], rng.uniform(0, 1, 98)])
        got = traj.eval(ts)
        for t, g in zip(ts, got):
            u = (order - 1) + t * (n - order + 1)
            want = basis_sum(P, order, u)
            assert np.all(np.abs(g - want) <= 1e-9 * np.maximum(1.0, np.abs(want)))


def test_constant_net_has_zero_derivatives():
    traj = BSplineTrajectory(np.tile([1.5, -2.0], (9, 1)))
    t = np.linspace(0, 1, 33)
    np.testing.assert_allclose(traj.eval(t), np.tile([1.5, -2.0], (33, 1)), atol=1e-12)
    for d in (1, 2, 3):
        np.testing.assert_allclose(traj.eval(t, d), 0.0, atol=1e-12)


@given(st.integers(0, 10_000), st.integers(1, 12))
def test_pinned_endpoints_are_exact(seed, n_inner):
    rng = np.random.default_rng(seed)
    s, g = rng.uniform(-9, 9, (2, 2))
    traj = BSplineTrajectory.pinned(s, g, rng.uniform(-9, 9, (n_inner, 2)))
    assert np.hypot(*(traj.eval(0.0) - s)) <= 1e-9
    assert np.hypot(*(traj.eval(1.0) - g)) <= 1e-9


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(3)
    traj = BSplineTrajectory(rng.uniform(-3, 3, (10, 2)), 4, dt=0.4)
    t = np.linspace(0.05, 0.95, 17)
    h = 1e-6
    fd = (traj.eval(t + h) - traj.eval(t - h)) / (2 * h) / traj.duration
    np.testing.assert_allclose(traj.eval(t, 1), fd, rtol=1e-5, atol=1e-6)


def test_too_few_control_points_rejected():
    with pytest.raises(ValueError):
        BSplineTrajectory(np.zeros((6, 2)), 4)
    with pytest.raises(ValueError):
        BSplineTrajectory(np.zeros((9, 2)), 4).eval(1.5)


# --- static optimization -------------------------------------------------------------


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(11)
    field, _ = open_field(discs=[(3.0, 3.0, 0.6), (1.5, 4.5, 0.4), (4.5, 1.5, 0.5)])
    worst = 0.0
    for _ in range(50):
        m = int(rng.integers(2, 10))
        s, g = rng.uniform(0.5, 5.5, (2, 2))
        cost = StaticCost(np.repeat(s[None], 3, 0), np.repeat(g[None], 3, 0), field, CostWeights())
        x = rng.uniform(0.5, 5.5, (m, 2))
        _, grad = cost.value_and_grad(x)
        fd = np.zeros_like(x)
        h = 1e-6
        for i in range(m):
            for a in range(2):
                e = np.zeros_like(x)
                e[i, a] = h
                fd[i, a] = (cost.value(x + e) - cost.value(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-12))
    assert worst <= 1e-4


def test_accepted_costs_never_increase():
    rng = np.random.default_rng(12)
    field, _ = open_field(discs=[(3.0, 3.0, 0.7)])
    for _ in range(50):
        s, g = rng.uniform(0.4, 5.6, (2, 2))
        cost = StaticCost(np.repeat(s[None], 3, 0), np.repeat(g[None], 3, 0), field, CostWeights())
        _, hist = optimize_inner(cost, rng.uniform(0.5, 5.5, (int(rng.integers(1, 12)), 2)))
        assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_free_space_plan_is_straight():
    field, _ = open_field()
    res = static_plan([(1.0, 1.0), (5.0, 3.0)], field)
    P = res.trajectory.control_points
    d = np.array([4.0, 2.0]) / math.hypot(4.0, 2.0)
    off = (P - P[0]) @ np.array([-d[1], d[0]])
    assert np.abs(off).max() <= 1e-6
    inner = P[3:-3]
    assert StaticCost(P[:3], P[-3:], field, CostWeights()).terms(inner)["collision"] == 0.0
    assert all(b <= a for a, b in zip(res.cost_history, res.cost_history[1:]))


def test_disc_on_the_line_is_cleared():
    field, occ = open_field(discs=[(3.0, 3.0, 0.6)])
    w = CostWeights()
    res = static_plan([(0.8, 3.0), (5.2, 3.0)], field, w)
    traj = res.trajectory
    assert np.hypot(*(traj.eval(0.0) - (0.8, 3.0))) <= 1e-9
    assert np.hypot(*(traj.eval(1.0) - (5.2, 3.0))) <= 1e-9
    pts = traj.sample(40)
    # distance-field check against the exact cell geometry
    spec = field.spec
    iy, ix = np.nonzero(occ)
    lo = np.column_stack([ix, iy]) * spec.resolution
    gap = np.maximum(np.maximum(lo[None] - pts[:, None], pts[:, None] - (lo[None] + spec.resolution)), 0.0)
    clearance = np.hypot(gap[..., 0], gap[..., 1]).min()
    assert clearance >= w.clearance - spec.resolution


# --- reference extraction ----------------------------------------------------------------


def test_reference_at_the_end_is_the_goal():
    traj = BSplineTrajectory.pinned((0.0, 0.0), (3.0, 1.0), [(1.0, 0.5), (2.0, 0.5)])
    path = TimedPath(traj, v_max=1.0, a_max=1.0)
    pos, vel = extract_reference(path, path.duration, 20, 0.1)
    np.testing.assert_allclose(pos, np.tile(path.goal, (20, 1)), atol=1e-12)
    np.testing.assert_allclose(vel, 0.0, atol=1e-12)


def test_straight_cruise_is_evenly_spaced():
    traj = BSplineTrajectory.pinned((0.0, 0.0), (20.0, 0.0), np.linspace([1, 0], [19, 0], 30))
    path = TimedPath(traj, v_max=1.0, a_max=1.0)
    pos, _ = extract_reference(path, 0.5 * path.duration, 20, 0.1)
    np.testing.assert_allclose(np.diff(pos[:, 0]), 0.1, atol=1e-3)
    np.testing.assert_allclose(pos[:, 1], 0.0, atol=1e-9)


def test_reference_steps_respect_speed_limit():
    rng = np.random.default_rng(8)
    for _ in range(40):
        traj = BSplineTrajectory.pinned(rng.uniform(0, 5, 2), rng.uniform(0, 5, 2), rng.uniform(0, 5, (6, 2)))
        vmax = float(rng.uniform(0.3, 1.5))
        path = TimedPath(traj, v_max=vmax, a_max=1.0)
        for t0 in np.linspace(0.0, path.duration, 25):
            pos, vel = extract_reference(path, t0, 20, 0.1)
            steps = np.hypot(*np.diff(pos, axis=0).T)
            assert steps.max() <= vmax * 0.1 + 1e-9
            assert np.hypot(*vel.T).max() <= vmax + 1e-9
