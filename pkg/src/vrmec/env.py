"""Slotted MEC/VR environment: states, actions, grouping, rewards, baseline.

Slot order is predict -> act -> transmit -> observe truth.  Eye traces,
predictions and channel draws come from their own seeded streams and never
depend on the actions taken, so two policies run on the same seed face the
same FoV requests and fading.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .channel import ChannelRealization, Group, build_precoders, downlink_sinrs, rate, \
    sample_channel
from .latency import INFINITE_LATENCY, LatencyBreakdown, Role, Scheme, interaction_latency, \
    psnr, psnr_on_time
from .mobility import FovGrid, generate_trace, random_eye_states
from .model import NetworkTopology, PhyParams, RenderingParams
from .predictor import LastValuePredictor

EPISODE_LOG_COLUMNS = ["slot", "user", "serving_mec", "rendering_mec", "fov_pred", "fov_true",
                       "t_uplink", "t_render", "t_migration", "t_downlink", "t_total", "psnr"]


@dataclass(frozen=True)
class EnvState:
    predicted_fovs: np.ndarray  # (K,) FoVs the controller groups by
    distances: np.ndarray  # (K, B) / arena diagonal
    computes: np.ndarray  # (B,) / F_max
    n_fov: int
    slot: int = 0

    @property
    def n_users(self) -> int:
        return len(self.predicted_fovs)

    @property
    def n_mecs(self) -> int:
        return len(self.computes)

    def vector(self) -> np.ndarray:
        """Network input: one-hot FoVs, then distances (user-major), then computes."""
        onehot = np.eye(self.n_fov)[self.predicted_fovs].ravel()
        return np.concatenate([onehot, self.distances.ravel(), self.computes])

    def local_vector(self, mec: int) -> np.ndarray:
        """What one MEC sees: all FoVs, its own distances to users, its own compute."""
        onehot = np.eye(self.n_fov)[self.predicted_fovs].ravel()
        return np.concatenate([onehot, self.distances[:, mec], self.computes[mec:mec + 1]])


@dataclass(frozen=True)
class ActionVector:
    serving: tuple[int, ...]
    # rendering MEC per FoV index, -1 for FoVs nobody requests; None = default
    rendering: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "serving", tuple(int(b) for b in self.serving))
        if self.rendering is not None:
            object.__setattr__(self, "rendering", tuple(int(b) for b in self.rendering))


@dataclass(frozen=True)
class GroupAssignment:
    groups: tuple[Group, ...]
    inactive: tuple[int, ...]

    @property
    def multicast(self) -> list[Group]:
        return [g for g in self.groups if g.multicast]

    @property
    def unicast(self) -> list[Group]:
        return [g for g in self.groups if not g.multicast]

    @property
    def n_multicast(self) -> int:
        return len(self.multicast)

    @property
    def n_unicast(self) -> int:
        return len(self.unicast)

    def group_of(self, user: int) -> int:
        for j, g in enumerate(self.groups):
            if user in g.members:
                return j
        raise KeyError(user)


def build_state(topology: NetworkTopology, predictions, n_fov: int, slot: int = 0,
                f_max: float | None = None) -> EnvState:
    preds = np.asarray(predictions, dtype=int)
    if preds.shape != (topology.n_users,):
        raise ValueError("need one predicted FoV per user")
    diag = math.sqrt(2.0) * topology.arena_side
    computes = topology.mec_computes
    f_max = float(computes.max()) if f_max is None else f_max
    return EnvState(preds, topology.user_mec_distances() / diag, computes / f_max, n_fov, slot)


def group_users(serving, fovs, n_mecs: int) -> GroupAssignment:
    """Users sharing (FoV, serving MEC) form one group; singletons are unicast."""
    serving = np.asarray(serving, dtype=int)
    fovs = np.asarray(fovs, dtype=int)
    if serving.shape != fovs.shape:
        raise ValueError("serving and fovs differ in length")
    if np.any((serving < 0) | (serving >= n_mecs)):
        raise ValueError("serving MEC index out of range")
    buckets: dict[tuple[int, int], list[int]] = {}
    for k, (b, q) in enumerate(zip(serving, fovs)):
        buckets.setdefault((int(b), int(q)), []).append(k)
    groups = tuple(Group(b, q, tuple(members)) for (b, q), members in sorted(buckets.items()))
    used = {g.mec for g in groups}
    return GroupAssignment(groups, tuple(b for b in range(n_mecs) if b not in used))


def default_rendering(serving, fovs, n_fov: int) -> tuple[int, ...]:
    """Lowest-index serving MEC of each requested FoV."""
    out = [-1] * n_fov
    for b, q in zip(serving, fovs):
        if out[q] < 0 or b < out[q]:
            out[q] = int(b)
    return tuple(out)


def validate_action(action: ActionVector, fovs, n_mecs: int, n_fov: int) -> None:
    fovs = np.asarray(fovs, dtype=int)
    if len(action.serving) != len(fovs):
        raise ValueError("each user must be assigned exactly one MEC")
    for b in action.serving:
        if not 0 <= b < n_mecs:
            raise ValueError(f"serving MEC {b} out of range")
    if action.rendering is None:
        return
    if len(action.rendering) != n_fov:
        raise ValueError(f"rendering must list {n_fov} entries")
    serving = np.asarray(action.serving)
    for q in range(n_fov):
        servers = set(serving[fovs == q].tolist())
        r = action.rendering[q]
        if not servers:
            if r != -1:
                raise ValueError(f"FoV {q} is not requested but has rendering MEC {r}")
        elif r not in servers:
            raise ValueError(f"rendering MEC {r} of FoV {q} serves no group requesting it")


def enumerate_actions(fovs, n_mecs: int, n_fov: int, with_render: bool):
    """Every valid action for these FoVs (exponential; small instances only)."""
    fovs = [int(q) for q in fovs]
    for serving in itertools.product(range(n_mecs), repeat=len(fovs)):
        if not with_render:
            yield ActionVector(serving, None)
            continue
        present = sorted(set(fovs))
        choices = [sorted({serving[k] for k in range(len(fovs)) if fovs[k] == q})
                   for q in present]
        for combo in itertools.product(*choices):
            rendering = [-1] * n_fov
            for q, r in zip(present, combo):
                rendering[q] = r
            yield ActionVector(serving, tuple(rendering))


def nearest_association(state: EnvState, topology: NetworkTopology) -> ActionVector:
    """Nearest MEC per user (lowest index on ties); lowest serving MEC renders."""
    dist = topology.user_mec_distances()
    serving = tuple(int(b) for b in np.argmin(dist, axis=1))
    return ActionVector(serving, default_rendering(serving, state.predicted_fovs, state.n_fov))


def episode_return(rewards, gamma: float) -> float:
    r = np.asarray(list(rewards), dtype=float)
    if r.size == 0:
        return 0.0
    return float(np.sum(gamma ** np.arange(r.size) * r))


@dataclass
class SlotOutcome:
    reward: float
    psnr: np.ndarray
    latencies: list[LatencyBreakdown]
    groups: GroupAssignment
    sinr: np.ndarray
    rates: np.ndarray
    rendering_mec: np.ndarray  # -1 when the VR device renders
    fov_pred: np.ndarray
    fov_true: np.ndarray

    @property
    def totals(self) -> np.ndarray:
        return np.array([lat.total for lat in self.latencies])

    def log_rows(self, slot: int, serving) -> list[list]:
        rows = []
        for k, lat in enumerate(self.latencies):
            rows.append([slot, k, int(serving[k]), int(self.rendering_mec[k]),
                         int(self.fov_pred[k]), int(self.fov_true[k]),
                         repr(lat.uplink), repr(lat.render), repr(lat.migration),
                         repr(lat.downlink), repr(lat.total), repr(float(self.psnr[k]))])
        return rows


@dataclass
class StepResult:
    state: EnvState
    reward: float
    outcome: SlotOutcome
    done: bool


@dataclass
class VrEnv:
    topology: NetworkTopology
    phy: PhyParams
    rendering: RenderingParams
    grid: FovGrid
    diffusion: float
    scheme: Scheme = Scheme.MEC_MIGRATION
    prediction: bool = True
    slots: int = 200
    seed: int = 0
    predictor: object = None
    memory: int = 20
    f_max: float | None = None
    _episode: int = field(default=0, init=False)
    _slot: int = field(default=0, init=False)
    _true: np.ndarray | None = field(default=None, init=False, repr=False)
    _pred: np.ndarray | None = field(default=None, init=False, repr=False)
    _frozen: ChannelRealization | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.scheme = Scheme(self.scheme)
        if self.predictor is None:
            self.predictor = LastValuePredictor(self.grid.n_fov)
        else:
            self.memory = getattr(self.predictor, "memory", self.memory)
        if self.slots < 1:
            raise ValueError("slots must be >= 1")

    @property
    def n_users(self) -> int:
        return self.topology.n_users

    @property
    def n_mecs(self) -> int:
        return self.topology.n_mecs

    @property
    def n_fov(self) -> int:
        return self.grid.n_fov

    @property
    def with_render(self) -> bool:
        return self.scheme is Scheme.MEC_MIGRATION

    @property
    def slot(self) -> int:
        return self._slot

    @property
    def done(self) -> bool:
        return self._slot >= self.slots

    def reset(self, episode: int = 0) -> EnvState:
        """Draw this episode's eye traces and precompute every slot's prediction."""
        self._episode, self._slot = episode, 0
        rng = seeding.stream(self.seed, seeding.MOBILITY, episode)
        eyes = random_eye_states(self.n_users, self.grid, self.diffusion, rng)
        trace, _ = generate_trace(eyes, self.grid, self.memory + self.slots + 1, rng)
        m = self.memory
        self._true = trace[:, m:m + self.slots + 1]
        if self.prediction:
            idx = np.arange(self.slots + 1)[:, None] + np.arange(m)[None, :]
            windows = trace[:, idx].reshape(-1, m)
            users = np.repeat(np.arange(self.n_users), self.slots + 1)
            try:
                preds = self.predictor.predict(windows, users)
            except TypeError:
                preds = self.predictor.predict(windows)
            self._pred = np.asarray(preds, dtype=int).reshape(self.n_users, self.slots + 1)
        else:
            self._pred = self._true
        return self.state()

    def state(self, slot: int | None = None) -> EnvState:
        t = self._slot if slot is None else slot
        t = min(t, self.slots)
        return build_state(self.topology, self._pred[:, t], self.n_fov, t, self.f_max)

    def true_fovs(self, slot: int | None = None) -> np.ndarray:
        t = self._slot if slot is None else slot
        return self._true[:, t].copy()

    def channel(self, slot: int | None = None) -> ChannelRealization:
        t = self._slot if slot is None else slot
        if self.phy.frozen:
            if self._frozen is None:
                rng = seeding.stream(self.seed, seeding.CHANNEL, 0, 0)
                self._frozen = sample_channel(self.topology, self.phy, 0, rng)
            return self._frozen
        rng = seeding.stream(self.seed, seeding.CHANNEL, self._episode, t)
        return sample_channel(self.topology, self.phy, t, rng)

    def evaluate(self, action: ActionVector, slot: int | None = None) -> SlotOutcome:
        """Outcome of ``action`` in the current slot, without advancing."""
        if self._true is None:
            raise RuntimeError("call reset() first")
        t = self._slot if slot is None else slot
        if t >= self.slots:
            raise RuntimeError("episode finished")
        fovs = self._pred[:, t]
        truth = self._true[:, t]
        validate_action(action, fovs, self.n_mecs, self.n_fov)
        return simulate_slot(self.topology, self.phy, self.rendering, self.scheme,
                             self.prediction, action, fovs, truth, self.channel(t))

    def step(self, action: ActionVector) -> StepResult:
        outcome = self.evaluate(action)
        self._slot += 1
        return StepResult(self.state(), outcome.reward, outcome, self.done)


def simulate_slot(topology: NetworkTopology, phy: PhyParams, rendering: RenderingParams,
                  scheme: Scheme, prediction: bool, action: ActionVector, fovs, truth,
                  channel: ChannelRealization) -> SlotOutcome:
    """Group, precode, compute SINR -> rate -> latency -> PSNR for one slot."""
    scheme = Scheme(scheme)
    fovs = np.asarray(fovs, dtype=int)
    truth = np.asarray(truth, dtype=int)
    k_users = topology.n_users
    groups = group_users(action.serving, fovs, topology.n_mecs)
    precoders = build_precoders(list(groups.groups), channel, phy)
    sinr = downlink_sinrs(list(groups.groups), channel, precoders, phy, k_users)
    rates = rate(sinr, phy)
    render_by_fov = action.rendering
    if render_by_fov is None:
        render_by_fov = default_rendering(action.serving, fovs, int(fovs.max()) + 1)

    latencies: list[LatencyBreakdown] = [None] * k_users  # type: ignore[list-item]
    renderer = np.full(k_users, -1)
    for grp in groups.groups:
        for k in grp.members:
            user = topology.users[k]
            if scheme is Scheme.VR_DEVICE:
                lat = interaction_latency(scheme, prediction, rendering, rates[k],
                                          compute=user.device_compute,
                                          cycles_per_bit=user.device_cycles_per_bit)
            elif scheme is Scheme.MEC_NO_MIGRATION:
                mec = topology.mecs[grp.mec]
                renderer[k] = grp.mec
                lat = interaction_latency(scheme, prediction, rendering, rates[k],
                                          compute=mec.compute, cycles_per_bit=mec.cycles_per_bit)
            else:
                r = render_by_fov[grp.fov]
                mec = topology.mecs[r]
                renderer[k] = r
                role = Role.RENDERS_ITSELF if r == grp.mec else Role.RECEIVES_MIGRATION
                lat = interaction_latency(scheme, prediction, rendering, rates[k],
                                          compute=mec.compute, cycles_per_bit=mec.cycles_per_bit,
                                          role=role,
                                          fiber_distance=float(topology.fiber_distance[grp.mec, r]),
                                          fiber_rate=topology.fiber_rate)
            latencies[k] = lat

    scores = np.empty(k_users)
    for k, lat in enumerate(latencies):
        delivered_right = (not prediction) or fovs[k] == truth[k]
        total = lat.total if delivered_right else INFINITE_LATENCY
        scores[k] = psnr(total, rendering.latency_threshold, rendering.delta)
    return SlotOutcome(float(np.sum(scores)), scores, latencies, groups, sinr,
                       np.asarray(rates, dtype=float), renderer, fovs.copy(), truth.copy())


def max_reward(n_users: int, delta: float = 1.0) -> float:
    return n_users * psnr_on_time(delta)


def write_episode_log(path, rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_LOG_COLUMNS)
        w.writerows(rows)
