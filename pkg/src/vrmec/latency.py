"""Data sizes, interaction latency of the three rendering schemes, and QoE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import RenderingParams

# finite stand-in for "never arrives" so latency sums stay well defined
INFINITE_LATENCY = 1e9


class Scheme(str, Enum):
    MEC_NO_MIGRATION = "mec-no-migration"
    MEC_MIGRATION = "mec-migration"
    VR_DEVICE = "vr-device"


class Role(str, Enum):
    RENDERS_ITSELF = "renders-itself"
    RECEIVES_MIGRATION = "receives-migration"


@dataclass(frozen=True)
class LatencyBreakdown:
    uplink: float
    render: float
    migration: float
    downlink: float

    def __post_init__(self):
        for name in ("uplink", "render", "migration", "downlink"):
            if getattr(self, name) < 0:
                raise ValueError(f"negative {name} latency")

    @property
    def total(self) -> float:
        return self.uplink + self.render + self.migration + self.downlink


@dataclass(frozen=True)
class QoeSample:
    mse: float
    psnr: float
    delta: float


def fov_bits(params: RenderingParams) -> float:
    """Uncompressed bits of one rendered stereo FoV (48 R^2 at 8 bpp, 2 views)."""
    r = params.resolution
    if r <= 0:
        raise ValueError("resolution must be positive")
    return float(r * r * 3 * params.bits_per_pixel * params.viewpoints)


def stitched_bits(params: RenderingParams) -> float:
    """Bits of the stitched 2D image; the FoV keeps 3/4 of its pixels."""
    return fov_bits(params) * 4.0 / 3.0


def render_time(bits: float, cycles_per_bit: float, compute: float) -> float:
    return cycles_per_bit * bits / compute


def migration_time(distance: float, fiber_rate: float) -> float:
    return distance / fiber_rate


def downlink_time(bits: float, compression_ratio: float, rate: float) -> float:
    if rate <= 0:
        return INFINITE_LATENCY
    return bits / (compression_ratio * rate)


def interaction_latency(scheme: Scheme | str, predicted: bool, params: RenderingParams,
                        downlink_rate: float, *, compute: float, cycles_per_bit: float,
                        role: Role | str = Role.RENDERS_ITSELF, fiber_distance: float = 0.0,
                        fiber_rate: float = 1.0) -> LatencyBreakdown:
    """Latency of one user under one scheme.

    ``compute``/``cycles_per_bit`` describe whoever renders: the serving MEC
    without migration, the chosen rendering MEC with migration, or the VR
    device.  ``downlink_rate`` is always the serving MEC's rate to the user.
    """
    scheme, role = Scheme(scheme), Role(role)
    if role is Role.RECEIVES_MIGRATION and scheme is not Scheme.MEC_MIGRATION:
        raise ValueError("only the migration scheme has a receiving role")
    uplink = 0.0 if predicted else params.uplink_latency
    m = stitched_bits(params)
    render = render_time(m, cycles_per_bit, compute)
    if scheme is Scheme.VR_DEVICE:
        down = downlink_time(m, params.compression_ratio, downlink_rate)
    else:
        down = downlink_time(fov_bits(params), params.compression_ratio, downlink_rate)
    migration = 0.0
    if role is Role.RECEIVES_MIGRATION:
        migration = migration_time(fiber_distance, fiber_rate)
    return LatencyBreakdown(uplink, render, migration, down)


def qoe(total_latency: float, threshold: float, delta: float = 1.0) -> QoeSample:
    delivered = 1.0 if total_latency <= threshold else 0.0
    mse = (1.0 - delivered) ** 2
    return QoeSample(mse, 10.0 * math.log10((1.0 + delta) / (mse + delta)), delta)


def psnr(total_latency: float, threshold: float, delta: float = 1.0) -> float:
    """Two-valued PSNR: 10 log10(1 + delta) - 10 log10(delta) on time, 0 dB late."""
    return qoe(total_latency, threshold, delta).psnr


def psnr_on_time(delta: float = 1.0) -> float:
    return 10.0 * math.log10((1.0 + delta) / delta)


def prediction_accuracy(actual, predicted) -> float:
    """Exact-match accuracy in percent."""
    a, p = np.asarray(actual), np.asarray(predicted)
    if a.shape != p.shape:
        raise ValueError("sequences differ in shape")
    if a.size == 0:
        raise ValueError("empty sequences")
    return float(np.mean(a == p) * 100.0)


def literal_accuracy(actual, predicted) -> float:
    """Mean normalized index difference as printed (FoVs taken 1-based).

    Perfect prediction gives 0 here, so this is only a diagnostic next to
    :func:`prediction_accuracy`.
    """
    a = np.asarray(actual, dtype=float) + 1.0
    p = np.asarray(predicted, dtype=float) + 1.0
    return float(np.mean((a - p) / a) * 100.0)
