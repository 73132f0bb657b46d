import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from asip.world import (
    CellState,
    GridSpec,
    OccupancyGrid,
    ReferenceMap,
    SensorModel,
    grid_from_text,
    grid_to_text,
    line_of_sight,
    raycast,
    reference_from_text,
    reference_to_text,
    visible_cells,
)
from conftest import make_room
from oracles import literal_visible, slab_entries


def random_grid(seed, n=32, density=0.08, res=0.1):
    rng = np.random.default_rng(seed)
    spec = GridSpec(res, n, n)
    state = np.where(rng.random(spec.shape) < density, CellState.OCCUPIED, CellState.FREE)
    unknown = rng.random(spec.shape) < 0.1
    state[unknown & (state == CellState.FREE)] = CellState.UNKNOWN
    return OccupancyGrid(spec, state.astype(np.int8)), rng


def march_first(grid, a, angle, max_range, step):
    spec = grid.spec
    for s in np.arange(0.0, max_range + 1e-12, step):
        p = (a[0] + s * math.cos(angle), a[1] + s * math.sin(angle))
        ix, iy = spec.cell_of(p)
        if not spec.in_bounds(ix, iy):
            return None, max_range
        if grid.state[iy, ix] == CellState.OCCUPIED:
            return spec.flat(ix, iy), s
    return None, max_range


# --- grid basics -----------------------------------------------------------


def test_gridspec_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        GridSpec(0.0, 10, 10)
    with pytest.raises(ValueError):
        GridSpec(0.1, 0, 10)


def test_cell_center_round_trip_every_cell():
    spec = GridSpec(0.1, 23, 17, origin=(-1.3, 2.7))
    for iy in range(spec.height):
        for ix in range(spec.width):
            assert spec.cell_of(spec.center_of(ix, iy)) == (ix, iy)
    cells = np.arange(spec.size)
    np.testing.assert_allclose(spec.centers(cells)[5], spec.center_of(*spec.unflat(5)))


def test_text_round_trip_preserves_states():
    grid, _ = random_grid(3, n=12)
    assert grid_from_text(grid_to_text(grid)) == grid


def test_reference_text_round_trip(room):
    back = reference_from_text(reference_to_text(room), start=room.start)
    np.testing.assert_array_equal(back.target_cells, room.target_cells)
    np.testing.assert_array_equal(back.structure, room.structure)


def test_malformed_text_rejected():
    with pytest.raises(ValueError):
        grid_from_text("grid 2 2 0.1 0 0\n..\n")
    with pytest.raises(ValueError):
        grid_from_text("grid 2 1 0.1 0 0\n.x\n")


# --- reference map -----------------------------------------------------------


def test_room_targets_are_interior_faces_only(room):
    spec = room.spec
    ix, iy = spec.unflat(room.target_cells)
    assert room.structure[iy, ix].all()
    # a 3-cell-thick wall exposes only its innermost ring
    n = spec.width
    assert set(np.unique(np.minimum.reduce([ix, iy, n - 1 - ix, n - 1 - iy]))) == {2}
    assert room.n_targets == 4 * (n - 6) + 4 - 4  # ring of side n-4 minus its 4 corners


def test_targets_touch_interior_and_normals_step_inside():
    for seed in range(5):
        rng = np.random.default_rng(seed)

        def blobs(spec):
            m = np.zeros(spec.shape, dtype=bool)
            for _ in range(4):
                cx, cy = rng.integers(15, spec.width - 15, size=2)
                r = rng.integers(2, 8)
                yy, xx = np.mgrid[: spec.height, : spec.width]
                m |= (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            return m

        ref = make_room(size=8.0, extra=blobs, start=(0.45, 0.45))
        spec = ref.spec
        for k, c in enumerate(ref.target_cells):
            ix, iy = spec.unflat(int(c))
            nb = ref.interior[max(iy - 1, 0) : iy + 2, max(ix - 1, 0) : ix + 2]
            assert nb.any()
            a = ref.normals[k]
            sx = int(math.floor(ix + 0.5 + math.cos(a)))
            sy = int(math.floor(iy + 0.5 + math.sin(a)))
            assert ref.interior[sy, sx], (seed, int(c))


def test_start_inside_structure_rejected():
    spec = GridSpec(0.1, 20, 20)
    s = np.zeros(spec.shape, dtype=bool)
    s[5, 5] = True
    with pytest.raises(ValueError):
        ReferenceMap.from_structure(spec, s, start=(0.55, 0.55))


# --- raycast -----------------------------------------------------------------


def test_raycast_empty_grid_reports_range():
    spec = GridSpec(0.1, 10, 10)
    g = OccupancyGrid.from_mask(spec, np.zeros(spec.shape, bool))
    hit = raycast(g, (0.5, 0.5), 0.0, 2.0)
    assert hit.cell is None and hit.distance == 2.0


def test_raycast_single_cell_ahead():
    spec = GridSpec(0.1, 40, 40)
    m = np.zeros(spec.shape, bool)
    m[20, 15] = True
    g = OccupancyGrid.from_mask(spec, m)
    hit = raycast(g, (0.55, 2.05), 0.0, 5.0)
    assert hit.cell == spec.flat(15, 20)
    assert abs(hit.distance - 1.0) <= math.sqrt(2) * spec.resolution


def test_raycast_unknown_cells_transparent():
    spec = GridSpec(0.1, 30, 30)
    g = OccupancyGrid(spec)
    g.state[15, 20] = CellState.OCCUPIED
    assert raycast(g, (0.55, 1.55), 0.0, 5.0).cell == spec.flat(20, 15)


def test_raycast_matches_exact_slab_oracle_and_quarter_march():
    mismatches = 0
    for seed in range(100):
        grid, rng = random_grid(seed)
        spec = grid.spec
        for _ in range(10):
            while True:
                a = rng.uniform(0.05, 3.15, size=2)
                if not grid.is_occupied_at(a):
                    break
            ang = rng.uniform(-math.pi, math.pi)
            rng_max = rng.uniform(0.5, 4.0)
            hit = raycast(grid, a, ang, rng_max)
            b = a + rng_max * np.array([math.cos(ang), math.sin(ang)])
            cells, t, chord = slab_entries(grid, a, b, with_chord=True)
            if cells.size:
                k = int(np.argmin(t))
                assert hit.cell == int(cells[k])
                assert hit.distance == pytest.approx(t[k] * rng_max, abs=1e-7)  # oracle insets cells by 1e-9
            else:
                assert hit.cell is None
            # a quarter-step march can only step over cells it crosses for less than one step
            step = 0.25 * spec.resolution
            mc, md = march_first(grid, a, ang, rng_max, step)
            if mc != hit.cell and hit.cell is None:
                mismatches += 1
            elif mc != hit.cell:
                k = int(np.argmin(t))
                mismatches += md < hit.distance - 1e-9 or chord[k] >= step
    assert mismatches == 0


def test_line_of_sight_examples():
    spec = GridSpec(0.1, 20, 20)
    g = OccupancyGrid.from_mask(spec, np.zeros(spec.shape, bool))
    assert line_of_sight(g, (0.15, 0.15), (1.85, 1.25))
    g.state[10, 10] = CellState.OCCUPIED
    assert not line_of_sight(g, (0.15, 1.05), (1.85, 1.05))
    # the end cell itself never blocks
    assert line_of_sight(g, (0.15, 1.05), (1.05, 1.05))


def test_line_of_sight_matches_exact_oracle():
    for k in range(200):
        grid, rng = random_grid(1000 + k // 10, density=0.05)
        a, b = rng.uniform(0.01, 3.19, size=(2, 2))
        bcell = grid.spec.flat(*grid.spec.cell_of(b))
        cells, _ = slab_entries(grid, a, b, skip=bcell)
        assert line_of_sight(grid, a, b) == (cells.size == 0), k


@given(st.integers(0, 10_000), st.floats(-math.pi, math.pi))
def test_adding_an_occupied_cell_never_lengthens_a_ray(seed, ang):
    grid, rng = random_grid(seed, n=24)
    a = np.array([1.25, 1.25])
    grid.state[12, 12] = CellState.FREE
    before = raycast(grid, a, ang, 3.0).distance
    more = grid.copy()
    iy, ix = rng.integers(0, 24, size=2)
    if (ix, iy) != (12, 12):
        more.state[iy, ix] = CellState.OCCUPIED
    assert raycast(more, a, ang, 3.0).distance <= before + 1e-12


# --- visibility --------------------------------------------------------------


def test_visible_single_target_and_blocker():
    spec = GridSpec(0.1, 60, 60)
    s = np.zeros(spec.shape, bool)
    s[30, 50] = True
    ref = ReferenceMap.from_structure(spec, s, start=(1.05, 3.05))
    sensor = SensorModel(1.5, 4.0)
    grid = ref.as_grid()
    assert visible_cells(grid, ref, ((3.05, 3.05), 0.0), sensor) == {spec.flat(50, 30)}
    grid.state[30, 40] = CellState.OCCUPIED
    assert visible_cells(grid, ref, ((3.05, 3.05), 0.0), sensor) == set()


def test_visible_cells_equals_literal_filter(sensor):
    rng = np.random.default_rng(7)

    def posts(spec):
        m = np.zeros(spec.shape, bool)
        for _ in range(6):
            ix, iy = rng.integers(10, spec.width - 12, size=2)
            m[iy : iy + 3, ix : ix + 3] = True
        return m

    for trial in range(8):
        ref = make_room(size=6.0, extra=posts, start=(0.45, 0.45))
        grid = ref.as_grid()
        for _ in range(5):
            free = np.flatnonzero(ref.interior.ravel())
            pos = ref.spec.centers([rng.choice(free)])[0] + rng.uniform(-0.04, 0.04, 2)
            yaw = rng.uniform(-math.pi, math.pi)
            got = visible_cells(grid, ref, (pos, yaw), sensor)
            assert got == literal_visible(grid, ref, pos, yaw, sensor), trial


@given(st.floats(-math.pi, math.pi), st.integers(0, 50))
def test_visibility_is_two_pi_periodic_and_monotone(yaw, seed):
    ref = make_room(size=5.0)
    sensor = SensorModel(1.5, 4.0)
    grid = ref.as_grid()
    pos = (2.5, 2.5)
    base = visible_cells(grid, ref, (pos, yaw), sensor)
    assert base == visible_cells(grid, ref, (pos, yaw + 2 * math.pi), sensor)
    rng = np.random.default_rng(seed)
    more = grid.copy()
    iy, ix = rng.integers(5, 45, size=2)
    if (ix, iy) != (25, 25):
        more.state[iy, ix] = CellState.OCCUPIED
    assert visible_cells(more, ref, (pos, yaw), sensor) <= base
