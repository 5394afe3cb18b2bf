import numpy as np
import pytest

from gradcheck import max_relative_error, numeric_grad
from helpers import desk_env
from vrmec.agents import AcAgent, AgentSettings, ActionSpace, DqnAgent, EpsilonSchedule, \
    ReplayBuffer, Transition, combine_parts, distributed_round, make_controller, run_episode
from vrmec.env import ActionVector, enumerate_actions, validate_action
from vrmec.neural import ParameterSet


def _transition(space, rng, dim, terminal=False, reward=None, fovs=None):
    fovs = rng.integers(0, space.n_fov, space.n_users) if fovs is None else np.asarray(fovs)
    s, r = space.sample_uniform(fovs, rng)
    nf = rng.integers(0, space.n_fov, space.n_users)
    return Transition(rng.normal(size=dim), fovs, space.to_action(s, r),
                      float(rng.normal()) if reward is None else reward,
                      rng.normal(size=dim), nf, terminal)


def _hand_set(agent_net, values):
    """Make the network output ``values`` for every input."""
    last = agent_net.n_layers - 1
    agent_net.params[f"W{last}"][...] = 0.0
    agent_net.params[f"b{last}"][...] = values


@pytest.mark.parametrize("seed", range(30))
def test_greedy_is_exact_constrained_max(seed):
    rng = np.random.default_rng(seed)
    b, k, nf = rng.integers(1, 4), rng.integers(1, 5), rng.integers(1, 4)
    for render in (True, False):
        space = ActionSpace(int(k), int(b), int(nf), render)
        out = rng.normal(size=space.n_outputs)
        fovs = rng.integers(0, nf, k)
        s, r = space.greedy(out, fovs)
        action = space.to_action(s, r)
        validate_action(action, fovs, b, nf)
        best = max(space.value(out, a, fovs) for a in enumerate_actions(fovs, b, nf, render))
        assert space.value(out, action, fovs) == pytest.approx(best, abs=1e-12)
        assert space.max_values(out[None], fovs[None])[0] == pytest.approx(best, abs=1e-12)


def test_greedy_restricted_to_owned_users():
    rng = np.random.default_rng(1)
    space = ActionSpace(4, 3, 2, True)
    fovs = np.array([0, 1, 0, 1])
    mask = np.array([False, True, True, False])
    for _ in range(50):
        out = rng.normal(size=space.n_outputs)
        s, r = space.greedy(out, fovs, mask)
        assert np.all(s[~mask] == -1) and np.all(s[mask] >= 0)
        owned = space.owned_fovs(fovs, mask)
        assert owned.tolist() == [False, True]
        assert r[0] == -1 and r[1] in s[(fovs == 1) & mask]


def test_uniform_exploration_chi_square():
    space = ActionSpace(3, 2, 2, True)
    fovs = np.array([0, 0, 1])
    valid = list(enumerate_actions(fovs, 2, 2, True))
    assert len(valid) == 12
    index = {a: i for i, a in enumerate(valid)}
    rng = np.random.default_rng(0)
    counts = np.zeros(len(valid))
    n = 10_000
    for _ in range(n):
        a = space.to_action(*space.sample_uniform(fovs, rng))
        counts[index[a]] += 1
    expected = n / len(valid)
    chi2 = float(np.sum((counts - expected) ** 2 / expected))
    assert chi2 < 31.26  # chi-square 0.999 quantile, 11 degrees of freedom


def test_epsilon_one_never_invalid_and_epsilon_zero_greedy():
    space = ActionSpace(4, 3, 4, True)
    agent = DqnAgent(space, 5, np.random.default_rng(0), hidden=(8,))
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        fovs = rng.integers(0, 4, 4)
        a = space.to_action(*agent.select_action(np.zeros(5), fovs, 1.0, rng))
        validate_action(a, fovs, 3, 4)
    values = rng.normal(size=space.n_outputs)
    _hand_set(agent.q_net, values)
    fovs = np.array([2, 2, 0, 1])
    a = space.to_action(*agent.select_action(np.zeros(5), fovs, 0.0, rng))
    best = max(enumerate_actions(fovs, 3, 4, True), key=lambda x: space.value(values, x, fovs))
    assert space.value(values, a, fovs) == space.value(values, best, fovs)


def test_dqn_terminal_loss_and_gamma_zero():
    space = ActionSpace(1, 2, 1, False)
    agent = DqnAgent(space, 3, np.random.default_rng(0), hidden=(4,), gamma=0.9)
    _hand_set(agent.q_net, np.zeros(2))
    t = Transition(np.ones(3), np.array([0]), ActionVector((1,)), 1.0, np.ones(3), np.array([0]),
                   True)
    assert agent.dqn_update([t]) == pytest.approx(1.0)
    agent0 = DqnAgent(space, 3, np.random.default_rng(0), hidden=(4,), gamma=0.0)
    live = Transition(np.ones(3), np.array([0]), ActionVector((1,)), 0.7, np.ones(3),
                      np.array([0]), False)
    assert agent0.targets([live]).tolist() == [0.7]


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("render", [True, False])
def test_dqn_loss_gradient(seed, render):
    rng = np.random.default_rng(seed)
    space = ActionSpace(3, 2, 2, render)
    agent = DqnAgent(space, 4, rng, hidden=(6, 5), gamma=0.9)
    batch = [_transition(space, rng, 4, terminal=bool(i % 3 == 0)) for i in range(6)]
    y = agent.targets(batch)
    loss, grads = agent.loss_and_grad(batch, y=y)
    f = lambda p: agent.loss_and_grad(batch, y=y, params=p)[0]  # noqa: E731
    assert max_relative_error(grads, numeric_grad(f, agent.q_net.params)) <= 1e-4


def test_target_sync_cadence():
    rng = np.random.default_rng(0)
    space = ActionSpace(2, 2, 2, True)
    agent = DqnAgent(space, 4, rng, hidden=(6,), target_period=100, batch_size=4,
                     learning_rate=0.01)
    batch = [_transition(space, rng, 4) for _ in range(4)]
    initial = agent.target.copy()
    for i in range(1, 251):
        agent.dqn_update(batch)
        if i < 100:
            assert agent.target.equals(initial)
        if i in (100, 200):
            assert agent.target.equals(agent.params)
        if i in (99, 150, 250):
            assert not agent.target.equals(agent.params)
    agent.sync_target()
    assert agent.target.equals(agent.params)


def test_loss_non_increasing_with_frozen_target():
    rng = np.random.default_rng(3)
    space = ActionSpace(3, 2, 2, True)
    agent = DqnAgent(space, 4, rng, hidden=(16, 16), learning_rate=0.005, target_period=10**9)
    batch = [_transition(space, rng, 4) for _ in range(16)]
    losses = [agent.dqn_update(batch) for _ in range(200)]
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_insufficient_buffer():
    buf = ReplayBuffer(10)
    with pytest.raises(ValueError):
        buf.sample(1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ReplayBuffer(0)


def test_replay_ring_and_uniformity():
    buf = ReplayBuffer(50)
    rng = np.random.default_rng(0)
    for i in range(70):
        buf.push(Transition(np.array([i]), np.array([0]), ActionVector((0,)), float(i),
                            np.array([i]), np.array([0]), False))
    assert len(buf) == 50
    assert sorted(buf[i].reward for i in range(50)) == list(range(20, 70))
    draws = np.concatenate([buf.sample_indices(50, rng) for _ in range(2000)])
    n, p = len(draws), 1 / 50
    counts = np.bincount(draws, minlength=50)
    sigma = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sigma)


def test_transition_invariants():
    with pytest.raises(ValueError):
        Transition(np.zeros(2), np.array([0]), ActionVector((0,)), float("nan"), np.zeros(2),
                   np.array([0]), False)
    with pytest.raises(ValueError):
        Transition(np.zeros(2), np.array([0]), ActionVector((0,)), 0.0, np.zeros(3),
                   np.array([0]), False)


def test_epsilon_schedule():
    e = EpsilonSchedule(1.0, 0.05, 0.6, 1000)
    assert e.value(0) == 1.0
    assert e.value(300) == pytest.approx(1.0 - 0.95 * 0.5)
    assert e.value(600) == 0.05 and e.value(10_000) == 0.05


def test_td_error_example_and_zero_delta():
    space = ActionSpace(1, 2, 1, False)
    agent = AcAgent(space, 3, np.random.default_rng(0), hidden=(4,), gamma=0.0)
    _hand_set(agent.critic, np.array([0.5]))
    t = Transition(np.ones(3), np.array([0]), ActionVector((1,)), 1.0, np.ones(3), np.array([0]),
                   False)
    assert agent.td_error(t) == pytest.approx(0.5)
    t0 = Transition(np.ones(3), np.array([0]), ActionVector((1,)), 0.5, np.ones(3),
                    np.array([0]), False)
    a_before, c_before = agent.actor.params.copy(), agent.critic.params.copy()
    assert agent.ac_update(t0) == 0.0
    assert agent.actor.params.equals(a_before) and agent.critic.params.equals(c_before)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_log_policy_gradient(seed):
    rng = np.random.default_rng(seed)
    space = ActionSpace(3, 3, 2, True)
    agent = AcAgent(space, 4, rng, hidden=(6,))
    obs = rng.normal(size=4)
    fovs = np.array([0, 0, 1])
    action = space.to_action(*agent.sample(obs, fovs, rng))
    _, grads = agent.log_policy(obs, fovs, action)
    f = lambda p: agent.log_policy(obs, fovs, action, params=p)[0]  # noqa: E731
    assert max_relative_error(grads, numeric_grad(f, agent.actor.params)) <= 1e-4


def test_policy_stays_normalized():
    rng = np.random.default_rng(2)
    space = ActionSpace(3, 3, 2, True)
    agent = AcAgent(space, 4, rng, hidden=(8,), actor_lr=0.05, critic_lr=0.05)
    for _ in range(50):
        t = _transition(space, rng, 4, fovs=[0, 0, 1])
        agent.ac_update(t)
        serve_p, render_p = agent.head_probabilities(t.state, t.fovs, t.action.serving)
        assert np.allclose(serve_p.sum(axis=1), 1.0)
        assert all(abs(p.sum() - 1.0) < 1e-12 for p in render_p.values())


def test_distributed_round_examples():
    space = ActionSpace(2, 2, 2, False)
    agents = [DqnAgent(space, 3, np.random.default_rng(i), hidden=(4,)) for i in range(2)]
    central = agents[0].params.copy()
    assert distributed_round(agents, central).equals(central)
    solo = distributed_round(agents[:1], central,
                             lambda a: setattr(a, "params", a.params.from_flat(
                                 a.params.flat() + 1.0)))
    assert np.allclose(solo.flat(), central.flat() + 1.0)

    def hand_set(value):
        def train(agent):
            agent.params = agent.params.from_flat(np.full(agent.params.size, value))
        return train

    values = iter([1.0, 3.0])
    mean = distributed_round(agents, central, lambda a: hand_set(next(values))(a))
    assert np.allclose(mean.flat(), 2.0)
    with pytest.raises(ValueError):
        distributed_round(agents, ParameterSet({"x": np.zeros(2)}))


def test_distributed_critics_only():
    space = ActionSpace(2, 2, 2, False)
    agents = [AcAgent(space, 3, np.random.default_rng(i), hidden=(4,)) for i in range(2)]
    actors = [a.actor.params.copy() for a in agents]
    central = agents[0].critic.params.copy()
    distributed_round(agents, central, part="critic")
    assert all(a.actor.params.equals(p) for a, p in zip(agents, actors))


def test_combine_parts_valid():
    space = ActionSpace(4, 3, 2, True)
    fovs = np.array([0, 1, 0, 1])
    masks = [np.array([1, 0, 0, 1], bool), np.array([0, 1, 1, 0], bool)]
    rng = np.random.default_rng(0)
    for _ in range(200):
        parts = [space.sample_uniform(fovs, rng, m) for m in masks]
        validate_action(combine_parts(space, parts), fovs, 3, 2)


def test_degenerate_distributed_equals_centralized():
    env, cfg = desk_env(b=1, k=3, n_fov=2, slots=30)
    settings = AgentSettings(hidden=(16, 16), batch_size=8, target_period=10, dqn_lr=0.01)
    c = make_controller("cdqn", env, settings, 7, 90)
    d = make_controller("ddqn", env, settings, 7, 90)
    env2, _ = desk_env(b=1, k=3, n_fov=2, slots=30)
    for ep in range(3):
        run_episode(env, c, ep)
        run_episode(env2, d, ep)
        assert c.agents[0].params.equals(d.agents[0].params)
        assert c.agents[0].target.equals(d.agents[0].target)


def test_controllers_produce_valid_actions():
    for alg in ("cdqn", "ddqn", "cac", "dac", "nearest"):
        env, _ = desk_env(b=3, k=4, n_fov=4, slots=10)
        ctl = make_controller(alg, env, AgentSettings(hidden=(8,), batch_size=4), 0, 20)
        for ep in range(2):
            res = run_episode(env, ctl, ep, train=True)
            assert len(res.rewards) == 10


def test_checkpoint_load_roundtrip():
    env, _ = desk_env(b=2, k=3, n_fov=2, slots=10)
    for alg in ("cdqn", "ddqn", "cac", "dac"):
        s = AgentSettings(hidden=(8,), batch_size=4)
        a = make_controller(alg, env, s, 0, 10)
        run_episode(env, a, 0)
        b = make_controller(alg, env, s, 1, 10)
        b.load(a.checkpoints())
        for name, params in a.checkpoints().items():
            assert b.checkpoints()[name].equals(params)
