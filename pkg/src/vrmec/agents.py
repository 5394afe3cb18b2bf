"""DRL controllers for joint user association and rendering placement.

The joint action is factorized into one head per user (which MEC serves it)
and, under the migration scheme, one head per FoV (which MEC renders it).
A joint action's value is the sum of its selected head values.  The only
coupling is that FoV q's rendering MEC must serve some user requesting q,
and the constrained argmax is solved exactly per FoV class.

Distributed controllers give every MEC its own agent.  An agent owns the
users closest to it and the FoVs whose lowest-index requester it owns; it
decides only those heads, restricting each rendering choice to MECs that
its own users were sent to, so the combined action is always valid.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .env import ActionVector, EnvState, SlotOutcome, VrEnv, nearest_association
from .latency import psnr_on_time
from .neural import Mlp, ParameterSet, average_parameters, log_softmax, sgd_step, softmax


# ---------------------------------------------------------------- action space

@dataclass(frozen=True)
class ActionSpace:
    n_users: int
    n_mecs: int
    n_fov: int
    with_render: bool

    @property
    def n_outputs(self) -> int:
        k, b, nf = self.n_users, self.n_mecs, self.n_fov
        return k * b + (nf * b if self.with_render else 0)

    def split(self, out: np.ndarray):
        out = np.asarray(out)
        kb = self.n_users * self.n_mecs
        serve = out[..., :kb].reshape(out.shape[:-1] + (self.n_users, self.n_mecs))
        if not self.with_render:
            return serve, None
        render = out[..., kb:].reshape(out.shape[:-1] + (self.n_fov, self.n_mecs))
        return serve, render

    def _mask(self, user_mask) -> np.ndarray:
        if user_mask is None:
            return np.ones(self.n_users, dtype=bool)
        return np.asarray(user_mask, dtype=bool)

    def owned_fovs(self, fovs, user_mask=None) -> np.ndarray:
        """FoVs whose lowest-index requesting user is in ``user_mask``."""
        fovs = np.asarray(fovs, dtype=int)
        mask = self._mask(user_mask)
        owned = np.zeros(self.n_fov, dtype=bool)
        seen = np.zeros(self.n_fov, dtype=bool)
        for k, q in enumerate(fovs):
            if not seen[q]:
                seen[q] = True
                owned[q] = mask[k]
        return owned

    def selection_mask(self, action: ActionVector, fovs, user_mask=None) -> np.ndarray:
        """0/1 vector over network outputs picking the heads ``action`` selects."""
        mask = self._mask(user_mask)
        sel = np.zeros(self.n_outputs)
        b = self.n_mecs
        for k, m in enumerate(action.serving):
            if mask[k] and m >= 0:
                sel[k * b + m] = 1.0
        if self.with_render:
            base = self.n_users * b
            owned = self.owned_fovs(fovs, mask)
            for q, r in enumerate(action.rendering):
                if owned[q] and r >= 0:
                    sel[base + q * b + r] = 1.0
        return sel

    def value(self, out, action: ActionVector, fovs, user_mask=None) -> float:
        return float(np.asarray(out) @ self.selection_mask(action, fovs, user_mask))

    def greedy(self, out, fovs, user_mask=None):
        """Exact constrained argmax over the owned heads.

        Returns ``(serving, rendering)`` int arrays with -1 where not owned.
        Ties go to the lowest rendering MEC, then to per-user argmax (lowest
        index), forcing the lowest-index tightest user when needed.
        """
        fovs = np.asarray(fovs, dtype=int)
        mask = self._mask(user_mask)
        serve_q, render_q = self.split(out)
        best = serve_q.max(axis=1)
        serving = np.where(mask, serve_q.argmax(axis=1), -1)
        rendering = np.full(self.n_fov, -1)
        if self.with_render:
            for q in np.flatnonzero(self.owned_fovs(fovs, mask)):
                members = np.flatnonzero((fovs == q) & mask)
                gap = best[members, None] - serve_q[members]
                val = render_q[q] - gap.min(axis=0)
                r = int(np.argmax(val))
                rendering[q] = r
                if not np.any(serving[members] == r):
                    serving[members[int(np.argmin(gap[:, r]))]] = r
        return serving, rendering

    def max_values(self, out, fovs, user_mask=None) -> np.ndarray:
        """Batched value of the constrained argmax, shape (n,)."""
        out = np.atleast_2d(out)
        fovs = np.atleast_2d(np.asarray(fovs, dtype=int))
        mask = self._mask(user_mask)
        serve_q, render_q = self.split(out)
        best = serve_q.max(axis=2)  # (n, K)
        total = (best * mask).sum(axis=1)
        if not self.with_render:
            return total
        for q in range(self.n_fov):
            req = fovs == q  # (n, K)
            present = req.any(axis=1)
            first = np.argmax(req, axis=1)
            owned = present & mask[first]
            if not owned.any():
                continue
            members = req & mask
            gap = best[:, :, None] - serve_q  # (n, K, B)
            gap = np.where(members[:, :, None], gap, np.inf)
            val = render_q[:, q, :] - gap.min(axis=1)
            total = total + np.where(owned, val.max(axis=1), 0.0)
        return total

    def sample_uniform(self, fovs, rng: np.random.Generator, user_mask=None):
        """Uniform draw over valid (owned) sub-actions by per-class rejection."""
        fovs = np.asarray(fovs, dtype=int)
        mask = self._mask(user_mask)
        b = self.n_mecs
        serving = np.full(self.n_users, -1)
        rendering = np.full(self.n_fov, -1)
        owned = self.owned_fovs(fovs, mask) if self.with_render else np.zeros(self.n_fov, bool)
        for q in range(self.n_fov):
            members = np.flatnonzero((fovs == q) & mask)
            if members.size == 0:
                continue
            if not owned[q]:
                serving[members] = rng.integers(0, b, size=members.size)
                continue
            while True:
                assign = rng.integers(0, b, size=members.size)
                r = int(rng.integers(0, b))
                if np.any(assign == r):
                    break
            serving[members] = assign
            rendering[q] = r
        return serving, rendering

    def to_action(self, serving, rendering) -> ActionVector:
        serving = np.asarray(serving)
        if np.any(serving < 0):
            raise ValueError("some users have no serving MEC")
        return ActionVector(tuple(serving), tuple(rendering) if self.with_render else None)


def combine_parts(space: ActionSpace, parts) -> ActionVector:
    """Merge per-agent ``(serving, rendering)`` pieces into one joint action."""
    serving = np.full(space.n_users, -1)
    rendering = np.full(space.n_fov, -1)
    for s, r in parts:
        serving = np.where(s >= 0, s, serving)
        rendering = np.where(r >= 0, r, rendering)
    return space.to_action(serving, rendering)


# ---------------------------------------------------------------- replay

@dataclass(frozen=True)
class Transition:
    state: np.ndarray  # observation vector
    fovs: np.ndarray
    action: ActionVector
    reward: float
    next_state: np.ndarray
    next_fovs: np.ndarray
    terminal: bool
    selection: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise ValueError("reward must be finite")
        if np.shape(self.state) != np.shape(self.next_state):
            raise ValueError("state and next state differ in size")


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, item: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._next] = item
        self._next = (self._next + 1) % self.capacity

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if len(self._items) < n:
            raise ValueError(f"buffer holds {len(self._items)} transitions, need {n}")
        return rng.integers(0, len(self._items), size=n)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        return [self._items[i] for i in self.sample_indices(n, rng)]

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]


@dataclass(frozen=True)
class EpsilonSchedule:
    start: float = 1.0
    end: float = 0.05
    fraction: float = 0.6
    total_steps: int = 1

    def value(self, step: int) -> float:
        horizon = max(1, int(round(self.fraction * self.total_steps)))
        if step >= horizon:
            return self.end
        return self.start + (self.end - self.start) * step / horizon


# ---------------------------------------------------------------- DQN

def _hidden_sizes(n_in, hidden, n_out):
    return [n_in, *hidden, n_out]


class DqnAgent:
    def __init__(self, space: ActionSpace, state_dim: int, rng: np.random.Generator, *,
                 hidden=(128, 128), learning_rate=0.05, gamma=0.9,
                 epsilon: EpsilonSchedule | None = None, target_period=100,
                 replay_capacity=10_000, batch_size=64, user_mask=None,
                 params: ParameterSet | None = None):
        self.space = space
        self.q_net = Mlp(_hidden_sizes(state_dim, hidden, space.n_outputs), rng, params)
        self.target = self.q_net.params.copy()
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.epsilon = epsilon or EpsilonSchedule()
        self.target_period = target_period
        self.buffer = ReplayBuffer(replay_capacity)
        self.batch_size = batch_size
        self.user_mask = space._mask(user_mask)
        self.steps = 0  # actions taken (drives epsilon)
        self.updates = 0  # gradient steps (drives target sync)

    @property
    def params(self) -> ParameterSet:
        return self.q_net.params

    @params.setter
    def params(self, value: ParameterSet) -> None:
        if not value.same_layout(self.q_net.params):
            raise ValueError("parameter layout mismatch")
        self.q_net.params = value

    def q_values(self, obs, params: ParameterSet | None = None) -> np.ndarray:
        return self.q_net.forward(obs, params)[0]

    def greedy(self, obs, fovs):
        return self.space.greedy(self.q_values(obs), fovs, self.user_mask)

    def select_action(self, obs, fovs, epsilon: float, rng: np.random.Generator):
        """Epsilon-greedy over valid owned sub-actions; returns ``(serving, rendering)``."""
        if rng.random() < epsilon:
            return self.space.sample_uniform(fovs, rng, self.user_mask)
        return self.greedy(obs, fovs)

    def act(self, obs, fovs, rng: np.random.Generator, explore: bool = True):
        eps = self.epsilon.value(self.steps) if explore else 0.0
        if explore:
            self.steps += 1
        return self.select_action(obs, fovs, eps, rng)

    def targets(self, batch: list[Transition]) -> np.ndarray:
        rewards = np.array([t.reward for t in batch])
        live = np.array([not t.terminal for t in batch])
        if self.gamma == 0.0 or not live.any():
            return rewards
        nxt = np.stack([t.next_state for t in batch])
        nfov = np.stack([t.next_fovs for t in batch])
        q_next = self.q_net.forward(nxt, self.target)[0]
        best = self.space.max_values(q_next, nfov, self.user_mask)
        return rewards + self.gamma * np.where(live, best, 0.0)

    def loss_and_grad(self, batch: list[Transition], y=None, params=None):
        """Mean squared TD error over the minibatch and its parameter gradient."""
        y = self.targets(batch) if y is None else y
        obs = np.stack([t.state for t in batch])
        sel = np.stack([self._selection(t) for t in batch])
        out, cache = self.q_net.forward(obs, params)
        q_sa = (out * sel).sum(axis=1)
        err = y - q_sa
        n = len(batch)
        loss = float(np.mean(err ** 2))
        grads = self.q_net.backward(cache, (-2.0 / n) * err[:, None] * sel)
        return loss, grads

    def _selection(self, t: Transition) -> np.ndarray:
        if t.selection is not None:
            return t.selection
        return self.space.selection_mask(t.action, t.fovs, self.user_mask)

    def dqn_update(self, batch: list[Transition]) -> float:
        if len(batch) == 0:
            raise ValueError("empty minibatch")
        loss, grads = self.loss_and_grad(batch)
        self.q_net.params = sgd_step(self.q_net.params, grads, self.learning_rate)
        self.updates += 1
        if self.updates % self.target_period == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target = self.q_net.params.copy()

    def remember(self, transition: Transition) -> None:
        if transition.selection is None:
            transition = dataclasses.replace(
                transition, selection=self.space.selection_mask(
                    transition.action, transition.fovs, self.user_mask))
        self.buffer.push(transition)

    def train(self, rng: np.random.Generator) -> float | None:
        if len(self.buffer) < self.batch_size:
            return None
        return self.dqn_update(self.buffer.sample(self.batch_size, rng))


# ---------------------------------------------------------------- actor-critic

class AcAgent:
    """Softmax actor over factorized heads plus a scalar state-value critic."""

    def __init__(self, space: ActionSpace, state_dim: int, rng: np.random.Generator, *,
                 hidden=(128, 128), actor_lr=0.005, critic_lr=0.05, gamma=0.9,
                 user_mask=None, actor_params=None, critic_params=None):
        self.space = space
        self.actor = Mlp(_hidden_sizes(state_dim, hidden, space.n_outputs), rng, actor_params)
        self.critic = Mlp(_hidden_sizes(state_dim, hidden, 1), rng, critic_params)
        self.actor_lr, self.critic_lr, self.gamma = actor_lr, critic_lr, gamma
        self.user_mask = space._mask(user_mask)
        self.steps = 0

    def value(self, obs, params=None) -> float:
        return float(self.critic.forward(obs, params)[0][0])

    def _render_mask(self, serving, fovs, q) -> np.ndarray:
        own = (np.asarray(fovs) == q) & self.user_mask
        allowed = np.zeros(self.space.n_mecs, dtype=bool)
        allowed[np.asarray(serving)[own]] = True
        return allowed

    def head_probabilities(self, obs, fovs, serving=None, params=None):
        """Per-head distributions; rendering heads are masked by ``serving``."""
        out = self.actor.forward(obs, params)[0]
        s_logits, r_logits = self.space.split(out)
        serve_p = softmax(s_logits, axis=-1)
        render_p = {}
        if self.space.with_render and serving is not None:
            for q in np.flatnonzero(self.space.owned_fovs(fovs, self.user_mask)):
                allowed = self._render_mask(serving, fovs, q)
                z = np.where(allowed, r_logits[q], -np.inf)
                render_p[int(q)] = softmax(z)
        return serve_p, render_p

    def sample(self, obs, fovs, rng: np.random.Generator, greedy: bool = False):
        fovs = np.asarray(fovs, dtype=int)
        out = self.actor.forward(obs)[0]
        s_logits, r_logits = self.space.split(out)
        serving = np.full(self.space.n_users, -1)
        for k in np.flatnonzero(self.user_mask):
            p = softmax(s_logits[k])
            serving[k] = int(np.argmax(p)) if greedy else int(rng.choice(len(p), p=p))
        rendering = np.full(self.space.n_fov, -1)
        if self.space.with_render:
            for q in np.flatnonzero(self.space.owned_fovs(fovs, self.user_mask)):
                allowed = self._render_mask(serving, fovs, q)
                p = softmax(np.where(allowed, r_logits[q], -np.inf))
                rendering[q] = int(np.argmax(p)) if greedy else int(rng.choice(len(p), p=p))
        self.steps += 0 if greedy else 1
        return serving, rendering

    def log_policy(self, obs, fovs, action: ActionVector, params=None):
        """``log pi(A|S)`` over owned heads and its gradient w.r.t. actor params."""
        fovs = np.asarray(fovs, dtype=int)
        out, cache = self.actor.forward(obs, params)
        s_logits, r_logits = self.space.split(out)
        b = self.space.n_mecs
        dout = np.zeros_like(out)
        total = 0.0
        for k in np.flatnonzero(self.user_mask):
            lp = log_softmax(s_logits[k])
            a = action.serving[k]
            total += lp[a]
            g = -np.exp(lp)
            g[a] += 1.0
            dout[k * b:(k + 1) * b] = g
        if self.space.with_render:
            base = self.space.n_users * b
            for q in np.flatnonzero(self.space.owned_fovs(fovs, self.user_mask)):
                allowed = self._render_mask(action.serving, fovs, q)
                z = np.where(allowed, r_logits[q], -np.inf)
                lp = log_softmax(z)
                r = action.rendering[q]
                total += lp[r]
                g = np.where(allowed, -np.exp(lp), 0.0)
                g[r] += 1.0
                dout[base + q * b:base + (q + 1) * b] = g
        return float(total), self.actor.backward(cache, dout)

    def td_error(self, t: Transition) -> float:
        nxt = 0.0 if t.terminal else self.value(t.next_state)
        return t.reward + self.gamma * nxt - self.value(t.state)

    def ac_update(self, t: Transition) -> float:
        """One critic and one actor step from a single transition; returns delta."""
        delta = self.td_error(t)
        out, cache = self.critic.forward(t.state)
        g_v = self.critic.backward(cache, np.array([1.0]))
        self.critic.params = sgd_step(self.critic.params, g_v, -self.critic_lr * delta)
        _, g_logp = self.log_policy(t.state, t.fovs, t.action)
        self.actor.params = sgd_step(self.actor.params, g_logp, -self.actor_lr * delta)
        return delta


# ---------------------------------------------------------------- distributed rounds

def broadcast(central: ParameterSet, count: int) -> list[ParameterSet]:
    return [central.copy() for _ in range(count)]


def distributed_round(agents: list, central: ParameterSet, local_train=None,
                      part: str = "q") -> ParameterSet:
    """Start every agent from ``central``, train locally, return the mean.

    ``part`` is ``"q"`` for DQN agents or ``"critic"`` for actor-critic
    agents; actors are never averaged.
    """
    if not agents:
        raise ValueError("no agents")
    for agent in agents:
        _set_part(agent, part, central.copy())
    if local_train is not None:
        for agent in agents:
            local_train(agent)
    return average_parameters([_get_part(a, part) for a in agents])


def _get_part(agent, part):
    if part == "q":
        return agent.q_net.params
    if part == "critic":
        return agent.critic.params
    raise ValueError(part)


def _set_part(agent, part, params: ParameterSet):
    current = _get_part(agent, part)
    if not params.same_layout(current):
        raise ValueError("parameter shapes differ from the central model")
    if part == "q":
        agent.q_net.params = params
    else:
        agent.critic.params = params


# ---------------------------------------------------------------- controllers

@dataclass
class AgentSettings:
    hidden: tuple[int, ...] = (128, 128)
    gamma: float = 0.9
    dqn_lr: float = 0.05
    actor_lr: float = 0.005
    critic_lr: float = 0.05
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_fraction: float = 0.6
    replay_capacity: int = 10_000
    target_period: int = 100
    batch_size: int = 64
    reward_scale: float | None = None  # None: divide by the max slot reward


def owner_of_users(env: VrEnv) -> np.ndarray:
    """Nearest MEC per user, lowest index on ties."""
    return np.argmin(env.topology.user_mec_distances(), axis=1)


class Controller:
    name = "controller"
    learns = False

    def act(self, state: EnvState, explore: bool) -> ActionVector:
        raise NotImplementedError

    def observe(self, state, action, outcome: SlotOutcome, next_state, done) -> None:
        pass

    def begin_episode(self, episode: int) -> None:
        pass

    def end_episode(self) -> None:
        pass

    def checkpoints(self) -> dict[str, ParameterSet]:
        return {}

    def load(self, params: dict[str, ParameterSet]) -> None:
        """Restore from the mapping :meth:`checkpoints` produces."""


class NearestController(Controller):
    name = "nearest"

    def __init__(self, env: VrEnv):
        self.env = env

    def act(self, state, explore):
        a = nearest_association(state, self.env.topology)
        return a if self.env.with_render else ActionVector(a.serving, None)


class _Learner(Controller):
    learns = True

    def __init__(self, env: VrEnv, settings: AgentSettings, seed: int, total_steps: int,
                 distributed: bool):
        self.env = env
        self.settings = settings
        self.space = ActionSpace(env.n_users, env.n_mecs, env.n_fov, env.with_render)
        scale = settings.reward_scale
        self.reward_scale = scale if scale else env.n_users * psnr_on_time(env.rendering.delta)
        self.epsilon = EpsilonSchedule(settings.epsilon_start, settings.epsilon_end,
                                       settings.epsilon_fraction, total_steps)
        self.distributed = distributed
        if distributed:
            owner = owner_of_users(env)
            self.agent_ids = [i for i in range(env.n_mecs) if np.any(owner == i)]
            self.masks = {i: owner == i for i in self.agent_ids}
        else:
            self.agent_ids = [0]
            self.masks = {0: np.ones(env.n_users, dtype=bool)}
        self.explore_rng = {i: seeding.stream(seed, seeding.EXPLORATION, i) for i in self.agent_ids}
        self.replay_rng = {i: seeding.stream(seed, seeding.REPLAY, i) for i in self.agent_ids}
        self.seed = seed

    def obs(self, state: EnvState, i: int) -> np.ndarray:
        return state.local_vector(i) if self.distributed else state.vector()

    @property
    def state_dim(self) -> int:
        k, nf = self.env.n_users, self.env.n_fov
        if self.distributed:
            return k * nf + k + 1
        return k * nf + k * self.env.n_mecs + self.env.n_mecs

    def local_reward(self, outcome: SlotOutcome, i: int) -> float:
        if not self.distributed:
            return outcome.reward / self.reward_scale
        return float(np.sum(outcome.psnr[self.masks[i]])) / self.reward_scale

    def _transition(self, i, state, action, outcome, next_state, done) -> Transition:
        return Transition(self.obs(state, i), state.predicted_fovs, action,
                          self.local_reward(outcome, i), self.obs(next_state, i),
                          next_state.predicted_fovs, done)


class DqnController(_Learner):
    def __init__(self, env, settings: AgentSettings, seed: int, total_steps: int,
                 distributed: bool = False):
        super().__init__(env, settings, seed, total_steps, distributed)
        self.name = "ddqn" if distributed else "cdqn"
        s = settings
        init = Mlp(_hidden_sizes(self.state_dim, s.hidden, self.space.n_outputs),
                   seeding.stream(seed, seeding.AGENT_INIT, 0)).params
        self.central = init
        self.agents = {
            i: DqnAgent(self.space, self.state_dim, None, hidden=s.hidden,
                        learning_rate=s.dqn_lr, gamma=s.gamma, epsilon=self.epsilon,
                        target_period=s.target_period, replay_capacity=s.replay_capacity,
                        batch_size=s.batch_size, user_mask=self.masks[i], params=init.copy())
            for i in self.agent_ids}

    def begin_episode(self, episode):
        if self.distributed:
            for agent in self.agents.values():
                agent.params = self.central.copy()

    def act(self, state, explore):
        parts = [self.agents[i].act(self.obs(state, i), state.predicted_fovs,
                                    self.explore_rng[i], explore)
                 for i in self.agent_ids]
        return combine_parts(self.space, parts)

    def observe(self, state, action, outcome, next_state, done):
        for i in self.agent_ids:
            agent = self.agents[i]
            agent.remember(self._transition(i, state, action, outcome, next_state, done))
            agent.train(self.replay_rng[i])

    def end_episode(self):
        if not self.distributed:
            return
        members = [self.agents[i] for i in self.agent_ids]
        self.central = average_parameters([a.params for a in members])
        for a in members:
            a.params = self.central.copy()
            if len(members) > 1:
                a.sync_target()

    def checkpoints(self):
        if self.distributed:
            return {"central_q": self.central}
        a = self.agents[0]
        return {"q": a.params, "q_target": a.target}

    def load(self, params):
        if self.distributed:
            self.central = params["central_q"].copy()
            for a in self.agents.values():
                a.params = self.central.copy()
                a.sync_target()
        else:
            a = self.agents[0]
            a.params = params["q"].copy()
            a.target = params["q_target"].copy()


class AcController(_Learner):
    def __init__(self, env, settings: AgentSettings, seed: int, total_steps: int,
                 distributed: bool = False):
        super().__init__(env, settings, seed, total_steps, distributed)
        self.name = "dac" if distributed else "cac"
        s = settings
        self.agents = {}
        for i in self.agent_ids:
            rng = seeding.stream(seed, seeding.AGENT_INIT, i)
            self.agents[i] = AcAgent(self.space, self.state_dim, rng, hidden=s.hidden,
                                     actor_lr=s.actor_lr, critic_lr=s.critic_lr,
                                     gamma=s.gamma, user_mask=self.masks[i])
        first = self.agents[self.agent_ids[0]]
        self.central = first.critic.params.copy()
        for a in self.agents.values():
            a.critic.params = self.central.copy()

    def begin_episode(self, episode):
        if self.distributed:
            for a in self.agents.values():
                a.critic.params = self.central.copy()

    def act(self, state, explore):
        parts = [self.agents[i].sample(self.obs(state, i), state.predicted_fovs,
                                       self.explore_rng[i], greedy=not explore)
                 for i in self.agent_ids]
        return combine_parts(self.space, parts)

    def observe(self, state, action, outcome, next_state, done):
        for i in self.agent_ids:
            self.agents[i].ac_update(
                self._transition(i, state, action, outcome, next_state, done))

    def end_episode(self):
        if self.distributed:
            self.central = average_parameters(
                [self.agents[i].critic.params for i in self.agent_ids])

    def checkpoints(self):
        out = {}
        for i in self.agent_ids:
            prefix = f"agent{i}_" if self.distributed else ""
            out[prefix + "actor"] = self.agents[i].actor.params
            if not self.distributed:
                out["critic"] = self.agents[i].critic.params
        if self.distributed:
            out["central_critic"] = self.central
        return out

    def load(self, params):
        for i in self.agent_ids:
            prefix = f"agent{i}_" if self.distributed else ""
            self.agents[i].actor.params = params[prefix + "actor"].copy()
        critic = params["central_critic" if self.distributed else "critic"]
        self.central = critic.copy()
        for a in self.agents.values():
            a.critic.params = critic.copy()


ALGORITHMS = ("cdqn", "ddqn", "cac", "dac", "nearest")


def make_controller(algorithm: str, env: VrEnv, settings: AgentSettings, seed: int,
                    total_steps: int) -> Controller:
    if algorithm == "nearest":
        return NearestController(env)
    if algorithm in ("cdqn", "ddqn"):
        return DqnController(env, settings, seed, total_steps, algorithm == "ddqn")
    if algorithm in ("cac", "dac"):
        return AcController(env, settings, seed, total_steps, algorithm == "dac")
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")


# ---------------------------------------------------------------- episodes

@dataclass
class EpisodeResult:
    episode: int
    rewards: list[float] = field(default_factory=list)
    latencies: list[float] = field(default_factory=list)  # per user per slot
    psnrs: list[float] = field(default_factory=list)
    correct: list[bool] = field(default_factory=list)
    log_rows: list[list] = field(default_factory=list)

    @property
    def total_reward(self) -> float:
        return float(np.sum(self.rewards))

    @property
    def avg_qoe_per_user(self) -> float:
        return float(np.mean(self.psnrs))

    @property
    def avg_latency(self) -> float:
        return float(np.mean(self.latencies))

    @property
    def accuracy(self) -> float:
        return float(np.mean(self.correct) * 100.0)


def run_episode(env: VrEnv, controller: Controller, episode: int, *, train: bool = True,
                log: bool = False) -> EpisodeResult:
    result = EpisodeResult(episode)
    state = env.reset(episode)
    controller.begin_episode(episode)
    while not env.done:
        slot = env.slot
        action = controller.act(state, explore=train)
        step = env.step(action)
        out = step.outcome
        if train:
            controller.observe(state, action, out, step.state, step.done)
        result.rewards.append(out.reward)
        result.latencies.extend(out.totals.tolist())
        result.psnrs.extend(out.psnr.tolist())
        result.correct.extend((out.fov_pred == out.fov_true).tolist())
        if log:
            result.log_rows.extend(out.log_rows(slot, action.serving))
        state = step.state
    if train:
        controller.end_episode()
    return result
