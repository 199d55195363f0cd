import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlm import agents, elm
from eqlm.agents import (EQLM_DEFAULTS, QNET_DEFAULTS, AgentConfig, ConfigError, EqlmAgent,
                         HeuristicAgent, QNetworkAgent, ReplayMemory, Transition,
                         compute_targets, epsilon_at, eqlm_update, heuristic_action,
                         qnet_update, run_episode, select_action, sync_target, td_loss_and_grad,
                         train)
from eqlm.cartpole import CartPole


def random_batch(rng, k, terminal_rate=0.3):
    return [Transition(rng.normal(scale=0.5, size=4), int(rng.integers(2)), 1.0,
                       rng.normal(scale=0.5, size=4), bool(rng.random() < terminal_rate))
            for _ in range(k)]


class FixedQ(agents._Agent):
    """Agent stub with hand-set Q and Q_T tables keyed on nothing."""

    def __init__(self, q, q_target, gamma):
        super().__init__(AgentConfig(gamma=gamma))
        self.q, self.qt = np.asarray(q, float), np.asarray(q_target, float)

    def q_values(self, states):
        return np.tile(self.q, (len(states), 1))

    def target_q_values(self, states):
        return np.tile(self.qt, (len(states), 1))


# -- schedule and heuristic ----------------------------------------------------

def test_epsilon_schedule():
    assert epsilon_at(0, QNET_DEFAULTS) == 0.670
    assert epsilon_at(400, QNET_DEFAULTS) == 0.0
    assert epsilon_at(10_000, EQLM_DEFAULTS) == 0.0
    cfg = AgentConfig(eps_i=1.0, eps_f=0.0, n_eps=100)
    assert epsilon_at(50, cfg) == 0.5
    assert epsilon_at(99, cfg) == pytest.approx(0.01)


def test_heuristic_action():
    assert [heuristic_action(t) for t in (0, 1, 7, 8)] == [0, 1, 1, 0]


def test_config_validation():
    with pytest.raises(ConfigError) as err:
        AgentConfig(eps_i=0.2, eps_f=0.5)
    assert err.value.field == "eps_i"
    with pytest.raises(ConfigError):
        AgentConfig(gamma=0.0)
    with pytest.raises(ConfigError):
        AgentConfig(k=0)
    with pytest.raises(ConfigError):
        AgentConfig.from_dict({"bogus": 1})


def test_table_defaults():
    q, e = QNET_DEFAULTS, EQLM_DEFAULTS
    assert (q.alpha, q.n_hidden, q.eps_i, q.n_eps, q.gamma, q.k, q.c_target) == \
        (0.0065, 29, 0.670, 400, 0.99, 26, 70)
    assert (e.gamma_bar, e.n_hidden, e.eps_i, e.n_eps, e.gamma, e.k, e.c_target, e.n_h) == \
        (1.827e-5, 25, 0.559, 360, 0.93, 2, 48, 5)
    assert q.eps_f == e.eps_f == 0.0


# -- replay memory -------------------------------------------------------------

def test_memory_fifo_eviction():
    mem = ReplayMemory(3)
    for i in range(5):
        mem.push(np.full(4, i), i % 2, 1.0, np.full(4, i + 1), False)
    assert len(mem) == 3
    assert [t.s[0] for t in mem] == [2.0, 3.0, 4.0]


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(1, 80), st.integers(0, 2**32 - 1))
def test_memory_never_exceeds_capacity_and_samples_distinct(capacity, pushes, seed):
    rng = np.random.default_rng(seed)
    mem = ReplayMemory(capacity)
    for i in range(pushes):
        mem.push(np.full(4, float(i)), 0, 1.0, np.zeros(4), False)
    assert len(mem) == min(capacity, pushes)
    kept = [t.s[0] for t in mem]
    assert kept == sorted(kept) and kept[-1] == pushes - 1
    k = int(rng.integers(1, len(mem) + 1))
    batch = mem.sample(k, rng)
    assert np.unique(batch.states[:, 0]).size == k


def test_memory_sampling_uniform():
    rng = np.random.default_rng(0)
    mem = ReplayMemory(100)
    for i in range(20):
        mem.push(np.full(4, float(i)), 0, 1.0, np.zeros(4), False)
    counts = np.zeros(20)
    for _ in range(5000):
        counts[mem.sample(2, rng).states[:, 0].astype(int)] += 1
    assert np.abs(counts / counts.sum() - 0.05).max() < 0.01


# -- action selection ------------------------------------------------------------

def test_greedy_and_ties():
    rng = np.random.default_rng(0)
    assert select_action(FixedQ([0.2, 0.9], [0, 0], 0.9), np.zeros(4), 0.0, rng) == 1
    assert select_action(FixedQ([0.5, 0.5], [0, 0], 0.9), np.zeros(4), 0.0, rng) == 0


def test_fully_random_is_uniform():
    rng = np.random.default_rng(1)
    agent = FixedQ([0.0, 1.0], [0, 0], 0.9)
    acts = [select_action(agent, np.zeros(4), 1.0, rng) for _ in range(10_000)]
    assert abs(np.mean(acts) - 0.5) < 0.02


class ShiftedQ(agents._Agent):
    def __init__(self, base, scale, shift):
        super().__init__(base.config)
        self.base, self.scale, self.shift = base, scale, shift

    def q_values(self, states):
        return self.scale * self.base.q_values(states) + self.shift


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 100), st.floats(-100, 100), st.integers(0, 2**32 - 1))
def test_greedy_affine_invariance(c, d, seed):
    rng = np.random.default_rng(seed)
    agent = QNetworkAgent(QNET_DEFAULTS, rng)
    s = rng.normal(size=4)
    a0 = select_action(agent, s, 0.0, rng)
    assert select_action(ShiftedQ(agent, c, d), s, 0.0, rng) == a0


# -- targets ------------------------------------------------------------------------

def test_targets_terminal_and_discount():
    rng = np.random.default_rng(0)
    agent = FixedQ([0.3, 0.4], [2.0, 3.0], gamma=0.93)
    t_term = Transition(np.zeros(4), 1, 1.0, np.zeros(4), True)
    t_live = Transition(np.zeros(4), 0, 1.0, np.zeros(4), False)
    T = compute_targets(agent, [t_term, t_live])
    assert T[0, 1] == 1.0 and T[0, 0] == 0.3
    assert T[1, 0] == pytest.approx(1 + 0.93 * 3) and T[1, 0] == pytest.approx(3.79)
    assert T[1, 1] == 0.4
    near_zero = FixedQ([0.3, 0.4], [2.0, 3.0], gamma=1e-300)
    assert compute_targets(near_zero, [t_live])[0, 0] == pytest.approx(1.0)


def test_target_decoupling_from_policy():
    rng = np.random.default_rng(2)
    agent = QNetworkAgent(QNET_DEFAULTS, rng)
    batch = random_batch(rng, 8)
    T1 = compute_targets(agent, batch)
    agent.policy_net.beta = agent.policy_net.beta + 5.0
    T2 = compute_targets(agent, batch)
    taken = np.array([t.a for t in batch])
    rows = np.arange(8)
    np.testing.assert_array_equal(T1[rows, taken], T2[rows, taken])
    other = 1 - taken
    assert np.all(T1[rows, other] != T2[rows, other])


# -- Q-network gradient ------------------------------------------------------------

def numeric_grad(net, states, actions, y, eps=1e-6):
    grads = []
    for p in net.params():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + eps
            lp, _ = td_loss_and_grad(net, states, actions, y)
            p[idx] = old - eps
            lm, _ = td_loss_and_grad(net, states, actions, y)
            p[idx] = old
            g[idx] = (lp - lm) / (2 * eps)
        grads.append(g)
    return grads


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = agents.QNetwork.random(4, 7, 2, rng)
    b = agents.as_batch(random_batch(rng, 5))
    y = rng.normal(size=5)
    _, analytic = td_loss_and_grad(net, b.states, b.actions, y)
    for a, n in zip(analytic, numeric_grad(net, b.states, b.actions, y)):
        np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-8)


def test_single_transition_output_gradient():
    rng = np.random.default_rng(4)
    net = agents.QNetwork.random(4, 5, 2, rng)
    s = rng.normal(size=(1, 4))
    y = np.array([0.7])
    loss, grads = td_loss_and_grad(net, s, np.array([1]), y)
    h = net.hidden(s)[0]
    e = (h @ net.beta)[1] - 0.7
    np.testing.assert_allclose(grads[2][:, 1], 2 * e * h, atol=1e-12)
    np.testing.assert_array_equal(grads[2][:, 0], 0.0)
    assert loss == pytest.approx(e * e)


def test_qnet_update_zero_error_no_change():
    rng = np.random.default_rng(5)
    agent = QNetworkAgent(dataclasses.replace(QNET_DEFAULTS, gamma=1e-12), rng)
    agent.policy_net.beta[:] = 0.0
    agent.target_net = agent.policy_net.copy()
    # Rewards zero and beta zero: predictions already equal the targets.
    batch = [t._replace(r=0.0) for t in random_batch(rng, 6)]
    before = [p.copy() for p in agent.policy_net.params()]
    qnet_update(agent, batch)
    for b, p in zip(before, agent.policy_net.params()):
        np.testing.assert_allclose(p, b, atol=1e-12)


def test_qnet_update_descends():
    rng = np.random.default_rng(6)
    agent = QNetworkAgent(dataclasses.replace(QNET_DEFAULTS, alpha=1e-4), rng)
    b = agents.as_batch(random_batch(rng, 26))
    T = compute_targets(agent, b)
    y = T[np.arange(26), b.actions]
    before, _ = td_loss_and_grad(agent.policy_net, b.states, b.actions, y)
    qnet_update(agent, b)
    after, _ = td_loss_and_grad(agent.policy_net, b.states, b.actions, y)
    assert after < before


# -- EQLM update ----------------------------------------------------------------------

def test_eqlm_first_call_initialises():
    rng = np.random.default_rng(7)
    agent = EqlmAgent(EQLM_DEFAULTS, rng)
    assert not agent.lsielm.initialized
    eqlm_update(agent, random_batch(rng, 2))
    assert agent.lsielm.initialized


def test_eqlm_two_updates_equal_batch_fit():
    rng = np.random.default_rng(8)
    cfg = dataclasses.replace(EQLM_DEFAULTS, gamma=1e-300, gamma_bar=0.5)
    agent = EqlmAgent(cfg, rng)
    # All-terminal transitions: targets are rewards for the taken action; the
    # other action's target is the prediction, so feed both actions' targets
    # through the oracle by recomputing them the same way.
    b1 = random_batch(rng, 2, terminal_rate=1.0)
    b2 = random_batch(rng, 2, terminal_rate=1.0)
    T1 = compute_targets(agent, b1)
    eqlm_update(agent, b1)
    T2 = compute_targets(agent, b2)
    eqlm_update(agent, b2)
    X = np.array([t.s for t in b1 + b2])
    ref = elm.SLFN(agent.net.input_weights, agent.net.biases, np.zeros((25, 2)))
    elm.fit_regularized(ref, X, np.vstack([T1, T2]), 0.5)
    np.testing.assert_allclose(agent.net.beta, ref.beta, atol=1e-8)


def test_eqlm_inner_inverse_is_k_by_k(monkeypatch):
    rng = np.random.default_rng(9)
    agent = EqlmAgent(EQLM_DEFAULTS, rng)
    eqlm_update(agent, random_batch(rng, 2))
    shapes = []
    real = elm.pinv

    def spy(m, rtol=elm.pinv.__defaults__[0]):
        shapes.append(np.shape(m))
        return real(m, rtol)

    monkeypatch.setattr(elm, "pinv", spy)
    eqlm_update(agent, random_batch(rng, 2))
    assert shapes == [(2, 2)]


# -- target sync ---------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["qnet", "eqlm"])
def test_sync_copies_and_decouples(kind):
    rng = np.random.default_rng(10)
    cfg = QNET_DEFAULTS if kind == "qnet" else EQLM_DEFAULTS
    agent = agents.make_agent(kind, cfg, rng)
    for _ in range(3):
        agent.update(agents.as_batch(random_batch(rng, cfg.k)))
    s = rng.normal(size=(5, 4))
    sync_target(agent)
    np.testing.assert_allclose(agent.target_q_values(s), agent.q_values(s), atol=1e-12)
    frozen = agent.target_q_values(s).copy()
    for _ in range(3):
        agent.update(agents.as_batch(random_batch(rng, cfg.k)))
    np.testing.assert_array_equal(agent.target_q_values(s), frozen)
    assert not np.allclose(agent.q_values(s), frozen)


def test_sync_count_matches_steps():
    rng = np.random.default_rng(11)
    agent = QNetworkAgent(dataclasses.replace(QNET_DEFAULTS, n_ep=15), rng)
    train(agent, CartPole(), rng)
    assert agent.n_syncs == agent.global_step // 70


# -- episodes -------------------------------------------------------------------------

def test_heuristic_only_mean_return():
    rng = np.random.default_rng(12)
    agent = HeuristicAgent(AgentConfig(n_ep=100))
    curve = train(agent, CartPole(), rng)
    assert abs(curve.mean() - 37) < 8
    assert len(agent.memory) == 0


def test_heuristic_phase_ignores_network():
    cfg = dataclasses.replace(EQLM_DEFAULTS, n_ep=5)
    returns = []
    for zero in (False, True):
        rng = np.random.default_rng(13)
        agent = EqlmAgent(cfg, np.random.default_rng(0))
        if zero:
            agent.update = lambda batch, a=agent: a.net.set_beta(np.zeros_like(a.net.beta))
        returns.append(train(agent, CartPole(), rng).tolist())
    assert returns[0] == returns[1]


@pytest.mark.parametrize("kind", ["qnet", "eqlm"])
def test_episode_bounds_and_determinism(kind):
    cfg = dataclasses.replace(QNET_DEFAULTS if kind == "qnet" else EQLM_DEFAULTS, n_ep=20)
    curves = []
    for _ in range(2):
        agent = agents.make_agent(kind, cfg, np.random.default_rng(1))
        curves.append(train(agent, CartPole(), np.random.default_rng(2), np.random.default_rng(3)))
    np.testing.assert_array_equal(curves[0], curves[1])
    assert np.all((curves[0] >= 1) & (curves[0] <= 200))


def test_train_lengths():
    agent = EqlmAgent(dataclasses.replace(EQLM_DEFAULTS, n_ep=0), np.random.default_rng(0))
    assert train(agent, CartPole(), np.random.default_rng(0)).size == 0
    agent = HeuristicAgent(AgentConfig(n_ep=600))
    assert train(agent, CartPole(), np.random.default_rng(0)).size == 600


def test_updates_skipped_until_memory_holds_k():
    rng = np.random.default_rng(14)
    cfg = dataclasses.replace(QNET_DEFAULTS, n_ep=1)
    agent = QNetworkAgent(cfg, rng)
    seen = []
    agent.update = lambda batch: seen.append(len(batch))
    run_episode(agent, CartPole(), 0, rng)
    assert all(n == 26 for n in seen)
    assert len(seen) == max(0, agent.global_step - 25)


@pytest.mark.parametrize("kind", ["qnet", "eqlm"])
def test_checkpoint_round_trip(kind):
    import json
    cfg = dataclasses.replace(QNET_DEFAULTS if kind == "qnet" else EQLM_DEFAULTS, n_ep=3)
    agent = agents.make_agent(kind, cfg, np.random.default_rng(0))
    train(agent, CartPole(), np.random.default_rng(1))
    d = json.loads(json.dumps(agents.checkpoint(agent)))
    back = agents.restore(d)
    s = np.random.default_rng(2).normal(size=(4, 4))
    np.testing.assert_array_equal(back.q_values(s), agent.q_values(s))
    np.testing.assert_array_equal(back.target_q_values(s), agent.target_q_values(s))
    assert back.global_step == agent.global_step and back.config == agent.config
