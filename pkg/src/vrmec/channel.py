"""Rayleigh-fading downlink: channel draws, MRT precoding, SINR and rate.

A user in a multicast group sees the multicast channel ``h`` (large-scale
exponent ``alpha``); a unicast user sees ``g`` (exponent ``beta``).  Both are
built from the same unit-variance small-scale draw so the random stream does
not depend on how users end up grouped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import NetworkTopology, PhyParams


@dataclass(frozen=True)
class Group:
    """Users sharing one (FoV, serving MEC) pair."""

    mec: int
    fov: int
    members: tuple[int, ...]

    @property
    def multicast(self) -> bool:
        return len(self.members) >= 2


@dataclass(frozen=True)
class ChannelRealization:
    fading: np.ndarray = field(repr=False)  # (K, B, N) complex, CN(0, 1) entries
    gain_mul: np.ndarray = field(repr=False)  # (K, B) per-entry variance for h
    gain_uni: np.ndarray = field(repr=False)  # (K, B) per-entry variance for g
    slot: int = 0

    @property
    def n_antennas(self) -> int:
        return self.fading.shape[2]

    def h(self, user: int, mec: int) -> np.ndarray:
        return np.sqrt(self.gain_mul[user, mec]) * self.fading[user, mec]

    def g(self, user: int, mec: int) -> np.ndarray:
        return np.sqrt(self.gain_uni[user, mec]) * self.fading[user, mec]

    def vector(self, user: int, mec: int, multicast: bool) -> np.ndarray:
        return self.h(user, mec) if multicast else self.g(user, mec)

    def all_vectors(self, multicast_users: np.ndarray) -> np.ndarray:
        """(K, B, N) channels using h for multicast users and g otherwise."""
        gain = np.where(multicast_users[:, None], self.gain_mul, self.gain_uni)
        return np.sqrt(gain)[..., None] * self.fading


def large_scale_gain(distance, exponent: float, phy: PhyParams) -> np.ndarray:
    if phy.pathloss_mode == "constant":
        return np.full(np.shape(distance), float(exponent))
    d = np.maximum(np.asarray(distance, dtype=float), phy.min_distance)
    return d ** (-exponent)


def sample_channel(topology: NetworkTopology, phy: PhyParams, slot: int,
                   rng: np.random.Generator) -> ChannelRealization:
    k, b, n = topology.n_users, topology.n_mecs, topology.antennas
    re = rng.normal(size=(k, b, n))
    im = rng.normal(size=(k, b, n))
    fading = (re + 1j * im) / np.sqrt(2.0)
    dist = topology.user_mec_distances()
    return ChannelRealization(
        fading,
        large_scale_gain(dist, phy.pathloss_exponent_mul, phy),
        large_scale_gain(dist, phy.pathloss_exponent_uni, phy),
        slot,
    )


def mrt_precoder(group_channels, power: float) -> np.ndarray:
    """Matched-filter beam toward the mean member channel, ``||v||^2 = power``."""
    chans = [np.asarray(c, dtype=complex) for c in group_channels]
    if not chans:
        raise ValueError("empty group")
    u = np.mean(chans, axis=0)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        u = np.ones_like(u)
        norm = np.linalg.norm(u)
    return np.sqrt(power) * u / norm


def build_precoders(groups: list[Group], channel: ChannelRealization,
                    phy: PhyParams) -> list[np.ndarray]:
    out = []
    for grp in groups:
        chans = [channel.vector(k, grp.mec, grp.multicast) for k in grp.members]
        out.append(mrt_precoder(chans, phy.tx_power_per_group))
    return out


def _user_sinr(user: int, group_idx: int, groups, channel, precoders, phy) -> float:
    own = groups[group_idx]
    kind = own.multicast
    sig = abs(np.vdot(channel.vector(user, own.mec, kind), precoders[group_idx])) ** 2
    interference = 0.0
    for j, (grp, v) in enumerate(zip(groups, precoders)):
        if j == group_idx:
            continue
        interference += abs(np.vdot(channel.vector(user, grp.mec, kind), v)) ** 2
    return sig / (interference + phy.noise_power)


def multicast_sinr(user: int, group_idx: int, groups: list[Group],
                   channel: ChannelRealization, precoders, phy: PhyParams) -> float:
    """SINR of a multicast member; interference from every other active group."""
    grp = groups[group_idx]
    if not grp.multicast or user not in grp.members:
        raise ValueError(f"user {user} is not in multicast group {group_idx}")
    return _user_sinr(user, group_idx, groups, channel, precoders, phy)


def unicast_sinr(user: int, group_idx: int, groups: list[Group],
                 channel: ChannelRealization, precoders, phy: PhyParams) -> float:
    grp = groups[group_idx]
    if grp.multicast or grp.members != (user,):
        raise ValueError(f"user {user} is not the unicast group {group_idx}")
    return _user_sinr(user, group_idx, groups, channel, precoders, phy)


def downlink_sinrs(groups: list[Group], channel: ChannelRealization, precoders,
                   phy: PhyParams, n_users: int) -> np.ndarray:
    """SINR of every grouped user at once, shape (K,)."""
    multicast = np.zeros(n_users, dtype=bool)
    owner = np.full(n_users, -1)
    for j, grp in enumerate(groups):
        for k in grp.members:
            owner[k] = j
            multicast[k] = grp.multicast
    if np.any(owner < 0):
        raise ValueError("every user must belong to a group")
    chans = channel.all_vectors(multicast)  # (K, B, N)
    mecs = np.array([g.mec for g in groups])
    beams = np.array(precoders)  # (G, N)
    # power[k, j] = |c_{k, mec_j}^H v_j|^2
    proj = np.einsum("kjn,jn->kj", chans[:, mecs, :].conj(), beams)
    power = np.abs(proj) ** 2
    users = np.arange(n_users)
    signal = power[users, owner].copy()
    power[users, owner] = 0.0
    interference = power.sum(axis=1)
    return signal / (interference + phy.noise_power)


def rate(sinr, phy: PhyParams):
    """Achievable rate in bits/s."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("sinr must be non-negative")
    out = phy.bandwidth * np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out
