import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vrmec.mobility import EyeState, FovGrid, fov_of, generate_trace, random_eye_states, \
    read_trace_csv, sample_displacement, step_eye, write_trace_csv

GRID = FovGrid.for_count(8)  # 4 x 2


def test_grid_shapes():
    assert (GRID.cols, GRID.rows) == (4, 2)
    assert (FovGrid.for_count(4).cols, FovGrid.for_count(4).rows) == (2, 2)
    with pytest.raises(ValueError):
        FovGrid(8, 3, 2)


def test_fov_of_examples():
    t = GRID.tile_side
    assert fov_of(0, 0, GRID) == 0
    assert fov_of(1.5 * t, 1.5 * t, GRID) == 5
    assert fov_of(t, 0.5 * t, GRID) == 0  # boundary goes to the lower tile
    assert fov_of(GRID.width, GRID.height, GRID) == 7
    with pytest.raises(ValueError):
        fov_of(-0.1, 0, GRID)


def test_zero_diffusion_keeps_position():
    s = EyeState(100.0, 50.0, 0.0, fov_of(100.0, 50.0, GRID))
    nxt = step_eye(s, GRID, np.random.default_rng(0))
    assert (nxt.x, nxt.y, nxt.current_fov) == (s.x, s.y, s.current_fov)


def test_corner_tile_neighbours():
    rng = np.random.default_rng(1)
    t = GRID.tile_side
    seen = set()
    for _ in range(3000):
        s = EyeState(rng.uniform(0, t), rng.uniform(0, t), 5000.0, 0)
        seen.add(step_eye(s, GRID, rng).current_fov)
    assert seen <= {0, 1, 4, 5}
    assert seen == {0, 1, 4, 5}


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.floats(0, 20000))
def test_trace_adjacency_and_bounds(seed, d):
    rng = np.random.default_rng(seed)
    eyes = random_eye_states(3, GRID, d, rng)
    trace, final = generate_trace(eyes, GRID, 50, rng)
    cols, rows = trace % GRID.cols, trace // GRID.cols
    assert np.all(np.abs(np.diff(cols, axis=1)) <= 1)
    assert np.all(np.abs(np.diff(rows, axis=1)) <= 1)
    first_c = np.array([e.current_fov % GRID.cols for e in eyes])
    assert np.all(np.abs(cols[:, 0] - first_c) <= 1)
    for e in final:
        assert 0 <= e.x <= GRID.width and 0 <= e.y <= GRID.height
        assert fov_of(e.x, e.y, GRID) == e.current_fov


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_step_consistency(seed):
    rng = np.random.default_rng(seed)
    s = random_eye_states(1, GRID, 3.0, rng)[0]
    for _ in range(20):
        s = step_eye(s, GRID, rng)
        assert fov_of(s.x, s.y, GRID) == s.current_fov


def test_constant_trace_without_diffusion():
    rng = np.random.default_rng(2)
    eyes = random_eye_states(4, GRID, 0.0, rng)
    trace, _ = generate_trace(eyes, GRID, 5, rng)
    assert np.all(trace == trace[:, :1])


def test_displacement_variance():
    d = sample_displacement(3.0, np.random.default_rng(7), size=100_000)
    assert d.shape == (100_000, 2)
    assert np.all(np.abs(d.var(axis=0) - 6.0) < 0.05 * 6.0)


def test_trace_deterministic():
    def run():
        rng = np.random.default_rng(11)
        return generate_trace(random_eye_states(3, GRID, 3.0, rng), GRID, 40, rng)[0]
    assert np.array_equal(run(), run())


def test_surjective_cover():
    t = GRID.tile_side
    hits = {fov_of(c * t + t / 2, r * t + t / 2, GRID) for c in range(4) for r in range(2)}
    assert hits == set(range(8))


def test_trace_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    trace, _ = generate_trace(random_eye_states(3, GRID, 3.0, rng), GRID, 12, rng)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace)
    assert path.read_text().splitlines()[0] == "slot,user_id,fov"
    assert np.array_equal(read_trace_csv(path), trace)
