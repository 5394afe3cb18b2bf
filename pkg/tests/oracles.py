"""Straight-line reference implementations used as test oracles.

Nothing here imports the package's formula code: each function recomputes
its quantity from first principles with plain Python loops and math.
"""

from __future__ import annotations

import cmath
import math


def dbm_to_w(dbm):
    return 10 ** (dbm / 10) / 1000


def gain(distance, exponent, mode="distance", floor=1.0):
    if mode == "constant":
        return exponent
    return max(distance, floor) ** (-exponent)


def channel_vec(fading_row, g):
    s = math.sqrt(g)
    return [s * z for z in fading_row]


def inner(a, b):
    """a^H b."""
    return sum(x.conjugate() * y for x, y in zip(a, b))


def mrt(vectors, power):
    n = len(vectors[0])
    u = [sum(v[i] for v in vectors) / len(vectors) for i in range(n)]
    norm = math.sqrt(sum(abs(x) ** 2 for x in u))
    if norm == 0:
        u = [1 + 0j] * n
        norm = math.sqrt(n)
    return [math.sqrt(power) * x / norm for x in u]


def sinr(user, groups, fading, dist, alpha, beta, power, noise_w, mode="distance"):
    """SINR of ``user``; ``groups`` is a list of (mec, members)."""
    def vec(k, i, multicast):
        return channel_vec(fading[k][i], gain(dist[k][i], alpha if multicast else beta, mode))

    beams = []
    for mec, members in groups:
        multi = len(members) >= 2
        beams.append(mrt([vec(k, mec, multi) for k in members], power))
    own = [j for j, (_, m) in enumerate(groups) if user in m][0]
    multi = len(groups[own][1]) >= 2
    signal = abs(inner(vec(user, groups[own][0], multi), beams[own])) ** 2
    interference = 0.0
    for j, (mec, _) in enumerate(groups):
        if j != own:
            interference += abs(inner(vec(user, mec, multi), beams[j])) ** 2
    return signal / (interference + noise_w)


def rate(s, bandwidth):
    return bandwidth * math.log2(1 + s)


def fov_bits(resolution, bpp=8, views=2):
    return 3 * bpp * views * resolution ** 2


def stitched_bits(resolution, bpp=8, views=2):
    return fov_bits(resolution, bpp, views) * 4 / 3


def latency(scheme, predicted, resolution, compression, uplink, rate_bps, compute, cpb,
            receives=False, fiber_d=0.0, fiber_rate=1.0):
    up = 0.0 if predicted else uplink
    m = stitched_bits(resolution)
    c = fov_bits(resolution)
    render = cpb * m / compute
    sent = m if scheme == "vr-device" else c
    down = 1e9 if rate_bps <= 0 else sent / (compression * rate_bps)
    mig = fiber_d / fiber_rate if receives else 0.0
    return up, render, mig, down


def psnr(total, threshold, delta=1.0):
    e = 1.0 if total <= threshold else 0.0
    mse = (1 - e) ** 2
    return 10 * math.log10((1 + delta) / (mse + delta))


def discounted(rewards, gamma):
    out, g = 0.0, 1.0
    for r in rewards:
        out += g * r
        g *= gamma
    return out


def slot_reward(mec_xy, user_xy, computes, fovs, truth, serving, rendering, fading, *,
                alpha, beta, power, noise_dbm, bandwidth, resolution, compression,
                threshold, uplink, scheme, predicted, cpb=1000.0, fiber_rate=10e9,
                vr_compute=2e9, delta=1.0):
    """Whole-slot reward from raw inputs: grouping, SINR, latency and PSNR."""
    k_users = len(user_xy)
    dist = [[math.dist(user_xy[k], mec_xy[i]) for i in range(len(mec_xy))]
            for k in range(k_users)]
    keys = sorted({(serving[k], fovs[k]) for k in range(k_users)})
    groups = [(b, [k for k in range(k_users) if serving[k] == b and fovs[k] == q])
              for b, q in keys]
    noise = dbm_to_w(noise_dbm)
    total_reward = 0.0
    lat = []
    for k in range(k_users):
        s = sinr(k, groups, fading, dist, alpha, beta, power, noise)
        r = rate(s, bandwidth)
        b = serving[k]
        if scheme == "vr-device":
            parts = latency(scheme, predicted, resolution, compression, uplink, r,
                            vr_compute, cpb)
        elif scheme == "mec-no-migration":
            parts = latency(scheme, predicted, resolution, compression, uplink, r,
                            computes[b], cpb)
        else:
            rm = rendering[fovs[k]]
            fd = math.dist(mec_xy[b], mec_xy[rm])
            parts = latency(scheme, predicted, resolution, compression, uplink, r,
                            computes[rm], cpb, receives=rm != b, fiber_d=fd,
                            fiber_rate=fiber_rate)
        total = sum(parts)
        lat.append(total)
        ok = (not predicted) or fovs[k] == truth[k]
        total_reward += psnr(total if ok else 1e9, threshold, delta)
    return total_reward, lat


def complex_normal(rng, shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / cmath.sqrt(2)
