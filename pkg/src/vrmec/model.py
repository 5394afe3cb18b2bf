"""Domain types shared by every part of the simulator.

Units are SI throughout: meters, seconds, watts, hertz, bits, and
cycles per second for compute.  The noise power is configured in dBm (the
usual way it is quoted) and exposed in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .config import TopologyConfig


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class FovIndex:
    value: int
    n_fov: int

    def __post_init__(self):
        if not 0 <= self.value < self.n_fov:
            raise ValueError(f"FoV index {self.value} outside [0, {self.n_fov})")

    def __int__(self):
        return self.value


@dataclass(frozen=True)
class MecNode:
    id: int
    position: tuple[float, float]
    compute: float  # cycles/s
    cycles_per_bit: float
    antennas: int

    def __post_init__(self):
        if self.cycles_per_bit <= 0:
            raise ValueError("cycles_per_bit must be positive")
        if self.antennas < 1:
            raise ValueError("antennas must be >= 1")
        if self.compute <= 0:
            raise ValueError("compute must be positive")


@dataclass(frozen=True)
class VrUser:
    id: int
    position: tuple[float, float]
    device_compute: float
    device_cycles_per_bit: float


@dataclass(frozen=True)
class NetworkTopology:
    mecs: tuple[MecNode, ...]
    users: tuple[VrUser, ...]
    arena_side: float
    fiber_rate: float  # bits/s
    fiber_distance: np.ndarray = field(repr=False)  # (B, B) meters

    def __post_init__(self):
        d = self.fiber_distance
        b = len(self.mecs)
        if d.shape != (b, b):
            raise ValueError("fiber_distance must be B x B")
        if not np.allclose(d, d.T) or np.any(np.diag(d) != 0):
            raise ValueError("fiber_distance must be symmetric with zero diagonal")
        side = self.arena_side
        for u in self.users:
            if not (0 <= u.position[0] <= side and 0 <= u.position[1] <= side):
                raise ValueError(f"user {u.id} outside the arena")

    @property
    def n_mecs(self) -> int:
        return len(self.mecs)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def mec_positions(self) -> np.ndarray:
        return np.array([m.position for m in self.mecs], dtype=float)

    @property
    def user_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.users], dtype=float)

    @property
    def mec_computes(self) -> np.ndarray:
        return np.array([m.compute for m in self.mecs], dtype=float)

    @property
    def antennas(self) -> int:
        return self.mecs[0].antennas

    def user_mec_distances(self) -> np.ndarray:
        """Euclidean user-to-MEC distances, shape (K, B)."""
        diff = self.user_positions[:, None, :] - self.mec_positions[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))

    def with_computes(self, computes) -> "NetworkTopology":
        """Copy with MEC computes replaced (used to build controlled instances)."""
        mecs = tuple(
            MecNode(m.id, m.position, float(c), m.cycles_per_bit, m.antennas)
            for m, c in zip(self.mecs, computes, strict=True)
        )
        return NetworkTopology(mecs, self.users, self.arena_side, self.fiber_rate,
                               self.fiber_distance)


@dataclass(frozen=True)
class PhyParams:
    noise_power_dbm: float = -110.0
    pathloss_exponent_mul: float = 3.0
    pathloss_exponent_uni: float = 3.0
    tx_power_per_group: float = 1.0  # W
    bandwidth: float = 100e6  # Hz
    # "distance": variance d**-exponent;  "constant": variance equal to the exponent
    pathloss_mode: str = "distance"
    min_distance: float = 1.0
    frozen: bool = False

    def __post_init__(self):
        for name in ("pathloss_exponent_mul", "pathloss_exponent_uni",
                     "tx_power_per_group", "bandwidth", "min_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.pathloss_mode not in ("distance", "constant"):
            raise ValueError(f"unknown pathloss_mode {self.pathloss_mode!r}")

    @property
    def noise_power(self) -> float:
        """Noise power in watts."""
        return dbm_to_watts(self.noise_power_dbm)


@dataclass(frozen=True)
class RenderingParams:
    resolution: int = 1080  # single-eye side, pixels
    viewpoints: int = 2
    bits_per_pixel: int = 8
    compression_ratio: float = 200.0
    latency_threshold: float = 0.030  # s
    uplink_latency: float = 0.010  # s
    delta: float = 1.0

    def __post_init__(self):
        if self.compression_ratio < 1:
            raise ValueError("compression_ratio must be >= 1")
        if self.latency_threshold <= 0:
            raise ValueError("latency_threshold must be positive")
        if self.uplink_latency < 0:
            raise ValueError("uplink_latency must be non-negative")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def build_topology(config: "TopologyConfig", rng: np.random.Generator) -> NetworkTopology:
    """Draw MEC/user positions and MEC computes uniformly; fiber = MEC geometry."""
    b, k, side = config.n_mecs, config.n_users, config.arena_side
    if b < 1 or k < 1:
        raise ValueError("need at least one MEC and one user")
    if side <= 0:
        raise ValueError("arena_side must be positive")
    lo, hi = config.mec_compute_min, config.mec_compute_max
    if not 0 < lo <= hi:
        raise ValueError("need 0 < mec_compute_min <= mec_compute_max")

    mec_pos = rng.uniform(0.0, side, size=(b, 2))
    user_pos = rng.uniform(0.0, side, size=(k, 2))
    computes = rng.uniform(lo, hi, size=b)

    mecs = tuple(
        MecNode(i, (float(mec_pos[i, 0]), float(mec_pos[i, 1])), float(computes[i]),
                config.mec_cycles_per_bit, config.antennas)
        for i in range(b)
    )
    users = tuple(
        VrUser(j, (float(user_pos[j, 0]), float(user_pos[j, 1])),
               config.vr_compute, config.vr_cycles_per_bit)
        for j in range(k)
    )
    diff = mec_pos[:, None, :] - mec_pos[None, :, :]
    fiber = np.sqrt(np.sum(diff**2, axis=-1))
    fiber = 0.5 * (fiber + fiber.T)
    np.fill_diagonal(fiber, 0.0)
    return NetworkTopology(mecs, users, side, config.fiber_rate, fiber)


def topology_from_positions(mec_positions, user_positions, computes, *, arena_side=100.0,
                            fiber_rate=10e9, cycles_per_bit=1000.0, antennas=4,
                            vr_compute=2e9, vr_cycles_per_bit=1000.0) -> NetworkTopology:
    """Hand-built topology, mostly for constructed test instances."""
    mec_positions = np.asarray(mec_positions, dtype=float)
    mecs = tuple(
        MecNode(i, (float(p[0]), float(p[1])), float(c), cycles_per_bit, antennas)
        for i, (p, c) in enumerate(zip(mec_positions, computes, strict=True))
    )
    users = tuple(
        VrUser(j, (float(p[0]), float(p[1])), vr_compute, vr_cycles_per_bit)
        for j, p in enumerate(np.asarray(user_positions, dtype=float))
    )
    diff = mec_positions[:, None, :] - mec_positions[None, :, :]
    fiber = np.sqrt(np.sum(diff**2, axis=-1))
    np.fill_diagonal(fiber, 0.0)
    return NetworkTopology(mecs, users, arena_side, fiber_rate, fiber)
