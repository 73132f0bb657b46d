"""Open-tour sequencing: nearest neighbor construction, 2-opt and Or-opt descent.

The first tour position is fixed; the tour does not return to it.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._validation import angle_diff, check_points

_IMPROVE = 1e-10


def pose_cost_matrix(positions, yaws, yaw_weight: float) -> np.ndarray:
    """Euclidean distance plus ``yaw_weight`` times wrapped yaw difference."""
    p = np.asarray(positions, dtype=float)
    d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
    if yaw_weight:
        y = np.asarray(yaws, dtype=float)
        d = d + yaw_weight * angle_diff(y[:, None], y[None, :])
    return d


@njit(cache=True)
def tour_cost(order, D):
    c = 0.0
    for k in range(order.shape[0] - 1):
        c += D[order[k], order[k + 1]]
    return c


@njit(cache=True)
def nearest_neighbor_tour(D, first):
    n = D.shape[0]
    order = np.empty(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    order[0] = first
    used[first] = True
    cur = first
    for k in range(1, n):
        best = -1
        bd = np.inf
        for j in range(n):
            if not used[j] and D[cur, j] < bd:
                bd = D[cur, j]
                best = j
        order[k] = best
        used[best] = True
        cur = best
    return order


@njit(cache=True)
def _two_opt_pass(order, D, budget, examined):
    n = order.shape[0]
    improved = False
    for i in range(1, n - 1):
        for j in range(i + 1, n):
            examined += 1
            a = order[i - 1]
            b = order[i]
            d = order[j]
            delta = D[a, d] - D[a, b]
            if j < n - 1:
                e = order[j + 1]
                delta += D[b, e] - D[d, e]
            if delta < -_IMPROVE:
                lo, hi = i, j
                while lo < hi:
                    t = order[lo]
                    order[lo] = order[hi]
                    order[hi] = t
                    lo += 1
                    hi -= 1
                improved = True
            if examined >= budget:
                return improved, examined
    return improved, examined


@njit(cache=True)
def _or_opt_pass(order, D, budget, examined):
    n = order.shape[0]
    improved = False
    for seg in range(1, 4):
        i = 1
        while i + seg <= n:
            s0 = order[i]
            s1 = order[i + seg - 1]
            prev = order[i - 1]
            has_next = i + seg < n
            if has_next:
                nxt = order[i + seg]
                gain = D[prev, s0] + D[s1, nxt] - D[prev, nxt]
            else:
                gain = D[prev, s0]
            best_delta = -_IMPROVE
            best_k = -1
            best_rev = False
            for k in range(0, n):
                # insert after order[k]; k must lie outside [i - 1, i + seg - 1]
                if k >= i - 1 and k <= i + seg - 1:
                    continue
                examined += 1
                a = order[k]
                if k + 1 < n:
                    b = order[k + 1]
                    fwd = D[a, s0] + D[s1, b] - D[a, b]
                    rev = D[a, s1] + D[s0, b] - D[a, b]
                else:
                    fwd = D[a, s0]
                    rev = D[a, s1]
                if fwd - gain < best_delta:
                    best_delta = fwd - gain
                    best_k = k
                    best_rev = False
                if rev - gain < best_delta:
                    best_delta = rev - gain
                    best_k = k
                    best_rev = True
            if best_k >= 0:
                moved = order[i : i + seg].copy()
                if best_rev:
                    moved = moved[::-1].copy()
                rest = np.concatenate((order[:i], order[i + seg :]))
                pos = best_k + 1 if best_k < i else best_k + 1 - seg
                new = np.concatenate((rest[:pos], moved, rest[pos:]))
                for q in range(n):
                    order[q] = new[q]
                improved = True
            if examined >= budget:
                return improved, examined
            i += 1
    return improved, examined


@njit(cache=True)
def local_search(order, D, budget):
    """First-improvement 2-opt / Or-opt descent with a move-examination budget."""
    order = order.copy()
    examined = 0
    while examined < budget:
        imp2, examined = _two_opt_pass(order, D, budget, examined)
        if examined >= budget:
            break
        impo, examined = _or_opt_pass(order, D, budget, examined)
        if not (imp2 or impo):
            break
    return order, examined


def _double_bridge(order, rng):
    n = order.shape[0]
    a, b, c = np.sort(rng.choice(np.arange(1, n), 3, replace=False))
    return np.concatenate((order[:a], order[b:c], order[a:b], order[c:]))


def solve_tsp(positions, yaws, start, yaw_weight=0.5, budget=None, kicks=0, seed=0) -> np.ndarray:
    """Open tour over viewpoints beginning at the one nearest ``start``.

    Nearest neighbor construction, then 2-opt / Or-opt descent. With
    ``kicks`` > 0 the descent is restarted from that many double-bridge
    perturbations of the incumbent (seeded, so the result is deterministic).
    The returned cost never exceeds the nearest neighbor tour.
    """
    p = check_points(positions, "positions")
    n = p.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    start = np.asarray(start, dtype=float)
    first = int(np.argmin(np.hypot(p[:, 0] - start[0], p[:, 1] - start[1])))
    D = pose_cost_matrix(p, yaws, yaw_weight)
    nn = nearest_neighbor_tour(D, first)
    if budget is None:
        budget = 50 * n * n
    best, _ = local_search(nn, D, int(budget))
    if n < 4 or kicks <= 0:
        return best
    best_cost = tour_cost(best, D)
    rng = np.random.default_rng(seed)
    for _ in range(int(kicks)):
        cand, _ = local_search(_double_bridge(best, rng), D, int(budget))
        c = tour_cost(cand, D)
        if c < best_cost - _IMPROVE:
            best, best_cost = cand, c
    return best


def open_path_length(points, order=None, entry=None, exit=None) -> float:
    pts = np.asarray(points, dtype=float)
    if order is not None:
        pts = pts[np.asarray(order)]
    seq = [pts]
    if entry is not None:
        seq.insert(0, np.asarray(entry, dtype=float).reshape(1, 2))
    if exit is not None:
        seq.append(np.asarray(exit, dtype=float).reshape(1, 2))
    pts = np.vstack(seq)
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


@njit(cache=True)
def held_karp_path(D_in, D, D_out, use_out):
    """Exact open path over n nodes from a fixed entry to an optional fixed exit.

    ``D_in[j]`` is the entry-to-node cost, ``D_out[j]`` node-to-exit.
    Returns ``(cost, order)``.
    """
    n = D.shape[0]
    full = (1 << n) - 1
    dp = np.full((1 << n, n), np.inf)
    parent = np.full((1 << n, n), -1, dtype=np.int64)
    for j in range(n):
        dp[1 << j, j] = D_in[j]
    for mask in range(1, full + 1):
        for j in range(n):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur == np.inf:
                continue
            for k in range(n):
                if (mask >> k) & 1:
                    continue
                nm = mask | (1 << k)
                v = cur + D[j, k]
                if v < dp[nm, k] - 1e-12:
                    dp[nm, k] = v
                    parent[nm, k] = j
    best = np.inf
    last = -1
    for j in range(n):
        v = dp[full, j] + (D_out[j] if use_out else 0.0)
        if v < best - 1e-12:
            best = v
            last = j
    order = np.empty(n, dtype=np.int64)
    mask = full
    for pos in range(n - 1, -1, -1):
        order[pos] = last
        pj = parent[mask, last]
        mask ^= 1 << last
        last = pj
    return best, order
