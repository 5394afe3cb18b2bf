import math

import pytest
from hypothesis import given, strategies as st

from vrmec.latency import INFINITE_LATENCY, LatencyBreakdown, Role, Scheme, downlink_time, \
    fov_bits, interaction_latency, literal_accuracy, migration_time, prediction_accuracy, \
    psnr, psnr_on_time, qoe, render_time, stitched_bits
from vrmec.model import RenderingParams


def test_sizes():
    assert fov_bits(RenderingParams(resolution=10)) == 4800
    assert fov_bits(RenderingParams(resolution=1080)) == 55_987_200
    assert stitched_bits(RenderingParams(resolution=10)) == 6400
    assert stitched_bits(RenderingParams(resolution=1080)) == 74_649_600
    p = RenderingParams(resolution=37)
    assert stitched_bits(p) / fov_bits(p) == pytest.approx(4 / 3, rel=1e-15)
    with pytest.raises(ValueError):
        fov_bits(RenderingParams(resolution=0))


def test_component_examples():
    assert render_time(1e6, 1000, 1e9) == pytest.approx(1.0)
    assert render_time(0, 1000, 1e9) == 0
    assert render_time(1e6, 1000, 5e9) * 2 == pytest.approx(render_time(1e6, 1000, 2.5e9))
    assert migration_time(0, 1e10) == 0
    assert migration_time(100, 1e10) == pytest.approx(1e-8)
    assert migration_time(200, 1e10) > migration_time(100, 1e10)
    assert downlink_time(4800, 200, 1e6) == pytest.approx(2.4e-5)
    assert downlink_time(4800, 1, 1e6) == pytest.approx(4800 / 1e6)
    assert downlink_time(4800, 200, 0.0) == INFINITE_LATENCY


def test_vr_device_example():
    p = RenderingParams(resolution=10, compression_ratio=200)
    lat = interaction_latency(Scheme.VR_DEVICE, True, p, 1e6, compute=2e9, cycles_per_bit=1000)
    assert lat.uplink == 0
    assert lat.downlink == pytest.approx(3.2e-5)
    assert lat.render == pytest.approx(3.2e-3)
    assert lat.total == pytest.approx(3.2e-5 + 3.2e-3)


def test_role_reduction_and_migration_gap():
    p = RenderingParams(resolution=42)
    common = dict(compute=5e9, cycles_per_bit=1000, fiber_rate=1e10)
    own = interaction_latency(Scheme.MEC_MIGRATION, True, p, 2e5, **common)
    same = interaction_latency(Scheme.MEC_MIGRATION, True, p, 2e5, role=Role.RENDERS_ITSELF,
                               fiber_distance=50.0, **common)
    assert own == same and own.migration == 0
    moved = interaction_latency(Scheme.MEC_MIGRATION, True, p, 2e5,
                                role=Role.RECEIVES_MIGRATION, fiber_distance=50.0, **common)
    assert moved.total - own.total == pytest.approx(50.0 / 1e10, rel=1e-6)


def test_uplink_additivity():
    p = RenderingParams(resolution=42, uplink_latency=0.010)
    a = interaction_latency(Scheme.MEC_NO_MIGRATION, False, p, 1e5, compute=4e9,
                            cycles_per_bit=1000)
    b = interaction_latency(Scheme.MEC_NO_MIGRATION, True, p, 1e5, compute=4e9,
                            cycles_per_bit=1000)
    assert a.total - b.total == pytest.approx(0.010, rel=1e-12)


@given(st.sampled_from([0.0, 0.01, 0.02, 0.03, 1.5]))
def test_prediction_ignores_uplink(uplink):
    p = RenderingParams(resolution=42, uplink_latency=uplink)
    lat = interaction_latency(Scheme.MEC_MIGRATION, True, p, 1e5, compute=4e9, cycles_per_bit=1000)
    ref = interaction_latency(Scheme.MEC_MIGRATION, True, RenderingParams(resolution=42), 1e5,
                              compute=4e9, cycles_per_bit=1000)
    assert lat.total == ref.total


def test_mec_beats_vr_device_at_equal_rate():
    p = RenderingParams(resolution=42)
    mec = interaction_latency(Scheme.MEC_NO_MIGRATION, True, p, 1e5, compute=4e9,
                              cycles_per_bit=1000)
    vr = interaction_latency(Scheme.VR_DEVICE, True, p, 1e5, compute=2e9, cycles_per_bit=1000)
    assert mec.total < vr.total


def test_invalid_combination():
    with pytest.raises(ValueError):
        interaction_latency(Scheme.VR_DEVICE, True, RenderingParams(), 1e6, compute=2e9,
                            cycles_per_bit=1000, role=Role.RECEIVES_MIGRATION)
    with pytest.raises(ValueError):
        LatencyBreakdown(-1.0, 0, 0, 0)


def test_psnr_examples():
    assert psnr(0.01, 0.03) == pytest.approx(10 * math.log10(2))
    assert psnr(0.01, 0.03) == pytest.approx(3.0103, abs=1e-4)
    assert psnr(0.05, 0.03) == 0.0
    assert psnr(0.03, 0.03) == pytest.approx(psnr_on_time())
    assert qoe(0.05, 0.03).mse == 1.0 and qoe(0.01, 0.03).mse == 0.0


def test_accuracy_examples():
    assert prediction_accuracy([1, 2, 3], [1, 2, 3]) == 100.0
    assert prediction_accuracy([1, 2, 3], [0, 0, 0]) == 0.0
    assert prediction_accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 75.0
    with pytest.raises(ValueError):
        prediction_accuracy([], [])
    assert literal_accuracy([0, 1, 2], [0, 1, 2]) == 0.0
