"""Brownian eye movement over a tiled 2D view and its FoV quantization.

The 360-degree view is unrolled into a ``cols x rows`` grid of square tiles.
Each slot the eye moves by an independent Gaussian step with variance
``2 * D`` per axis, clamped to one tile per axis so the next FoV is always
the same tile or one of its 8 neighbours.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

_DEFAULT_SHAPES = {1: (1, 1), 2: (2, 1), 4: (2, 2), 6: (3, 2), 8: (4, 2), 9: (3, 3),
                   12: (4, 3), 16: (4, 4)}


@dataclass(frozen=True)
class FovGrid:
    n_fov: int
    cols: int
    rows: int
    tile_side: float = 90.0

    def __post_init__(self):
        if self.cols * self.rows != self.n_fov:
            raise ValueError(f"{self.cols} x {self.rows} grid does not hold {self.n_fov} FoVs")
        if self.tile_side <= 0:
            raise ValueError("tile_side must be positive")

    @classmethod
    def for_count(cls, n_fov: int, tile_side: float = 90.0) -> "FovGrid":
        """Default grid shape: 8 -> 4x2, 4 -> 2x2, 2 -> 2x1, otherwise a single row."""
        cols, rows = _DEFAULT_SHAPES.get(n_fov, (n_fov, 1))
        return cls(n_fov, cols, rows, tile_side)

    @property
    def width(self) -> float:
        return self.cols * self.tile_side

    @property
    def height(self) -> float:
        return self.rows * self.tile_side

    def col_row(self, fov: int) -> tuple[int, int]:
        return fov % self.cols, fov // self.cols


@dataclass(frozen=True)
class EyeState:
    x: float
    y: float
    diffusion: float
    current_fov: int


def _axis_tile(v, tile, count):
    # ceil-based so that an exact boundary belongs to the lower tile
    idx = np.ceil(np.asarray(v, dtype=float) / tile).astype(int) - 1
    return np.clip(idx, 0, count - 1)


def fov_of(x: float, y: float, grid: FovGrid) -> int:
    """Row-major tile index of the point; boundaries go to the lower-index tile."""
    if not (0.0 <= x <= grid.width and 0.0 <= y <= grid.height):
        raise ValueError(f"point ({x}, {y}) outside the {grid.width} x {grid.height} view")
    col = int(_axis_tile(x, grid.tile_side, grid.cols))
    row = int(_axis_tile(y, grid.tile_side, grid.rows))
    return row * grid.cols + col


def fov_of_many(xs, ys, grid: FovGrid) -> np.ndarray:
    cols = _axis_tile(xs, grid.tile_side, grid.cols)
    rows = _axis_tile(ys, grid.tile_side, grid.rows)
    return rows * grid.cols + cols


def sample_displacement(diffusion: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Pre-clamp eye displacement: per-axis Normal(0, 2 * diffusion)."""
    if diffusion < 0:
        raise ValueError("diffusion must be non-negative")
    shape = (2,) if size is None else (*np.atleast_1d(size), 2)
    return rng.normal(0.0, math.sqrt(2.0 * diffusion), size=shape)


def _apply_step(x, y, d, grid):
    t = grid.tile_side
    d = np.clip(d, -t, t)
    x = np.clip(x + d[..., 0], 0.0, grid.width)
    y = np.clip(y + d[..., 1], 0.0, grid.height)
    return x, y


def step_eye(state: EyeState, grid: FovGrid, rng: np.random.Generator) -> EyeState:
    d = sample_displacement(state.diffusion, rng)
    x, y = _apply_step(state.x, state.y, d, grid)
    x, y = float(x), float(y)
    return replace(state, x=x, y=y, current_fov=fov_of(x, y, grid))


def random_eye_states(n_users: int, grid: FovGrid, diffusion: float,
                      rng: np.random.Generator) -> list[EyeState]:
    xs = rng.uniform(0.0, grid.width, size=n_users)
    ys = rng.uniform(0.0, grid.height, size=n_users)
    return [EyeState(float(x), float(y), diffusion, fov_of(float(x), float(y), grid))
            for x, y in zip(xs, ys)]


def generate_trace(users: list[EyeState], grid: FovGrid, slots: int,
                   rng: np.random.Generator) -> tuple[np.ndarray, list[EyeState]]:
    """Run ``slots`` eye steps for every user.

    Returns the (K, slots) FoV trace, where column t is the FoV after the
    t-th step, and the final eye states.  All users step together, so the
    draw order differs from calling :func:`step_eye` user by user.
    """
    if slots < 1:
        raise ValueError("slots must be >= 1")
    k = len(users)
    x = np.array([u.x for u in users], dtype=float)
    y = np.array([u.y for u in users], dtype=float)
    scale = np.sqrt(2.0 * np.array([u.diffusion for u in users], dtype=float))
    steps = rng.normal(0.0, 1.0, size=(slots, k, 2)) * scale[None, :, None]
    trace = np.empty((k, slots), dtype=np.int64)
    for t in range(slots):
        x, y = _apply_step(x, y, steps[t], grid)
        trace[:, t] = fov_of_many(x, y, grid)
    final = [EyeState(float(x[i]), float(y[i]), users[i].diffusion, int(trace[i, -1]))
             for i in range(k)]
    return trace, final


def write_trace_csv(path, trace: np.ndarray) -> None:
    """Write a (K, T) trace as rows of (slot, user_id, fov)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["slot", "user_id", "fov"])
        for t in range(trace.shape[1]):
            for k in range(trace.shape[0]):
                w.writerow([t, k, int(trace[k, t])])


def read_trace_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(int(r["slot"]), int(r["user_id"]), int(r["fov"])) for r in csv.DictReader(fh)]
    if not rows:
        raise ValueError(f"{path} holds no trace rows")
    n_slots = max(r[0] for r in rows) + 1
    n_users = max(r[1] for r in rows) + 1
    trace = np.full((n_users, n_slots), -1, dtype=np.int64)
    for t, k, f in rows:
        trace[k, t] = f
    if np.any(trace < 0):
        raise ValueError(f"{path} has missing (slot, user) entries")
    return trace
