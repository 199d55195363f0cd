"""Q-learning agents: a gradient-descent Q-network and the ELM-updated EQLM.

Both agents share the same single-hidden-layer architecture (sigmoid hidden
nodes, linear outputs without bias), experience replay, an epsilon-greedy
policy with a linear schedule, and a target network synchronised every ``C``
environment steps. They differ only in how a sampled minibatch changes the
weights:

* :class:`QNetworkAgent` takes one SGD step on the mean-squared TD error,
  backpropagated through every weight.
* :class:`EqlmAgent` keeps the hidden layer fixed and folds the minibatch into
  the output weights with the incremental regularised ELM recursion.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from . import elm
from .cartpole import CartPole
from .linalg import NumericalError

log = logging.getLogger(__name__)

N_STATES = CartPole.n_states
N_ACTIONS = CartPole.n_actions


class ConfigError(ValueError):
    """Raised for an invalid configuration; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class AgentConfig:
    alpha: float = 0.0
    gamma_bar: float = 1.0
    n_hidden: int = 25
    eps_i: float = 1.0
    eps_f: float = 0.0
    n_eps: int = 1
    gamma: float = 0.99
    k: int = 1
    c_target: int = 1
    n_mem: int = 10000
    n_h: int = 0
    n_ep: int = 600

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0.0 <= self.eps_f <= self.eps_i <= 1.0:
            raise ConfigError("eps_i", "need 0 <= eps_f <= eps_i <= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma", "discount must lie in (0, 1]")
        for name in ("k", "c_target", "n_hidden", "n_mem", "n_eps"):
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        for name in ("n_h", "n_ep"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.alpha < 0:
            raise ConfigError("alpha", "learning rate must be non-negative")
        if not self.gamma_bar > 0:
            raise ConfigError("gamma_bar", "must be positive")
        if self.k > self.n_mem:
            raise ConfigError("k", "minibatch larger than replay memory")

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown agent setting")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# Tuned values for the cart-pole task. N_mem is not part of the tuned set.
QNET_DEFAULTS = AgentConfig(alpha=0.0065, n_hidden=29, eps_i=0.670, eps_f=0.0, n_eps=400,
                            gamma=0.99, k=26, c_target=70, n_h=0)
EQLM_DEFAULTS = AgentConfig(gamma_bar=1.827e-5, n_hidden=25, eps_i=0.559, eps_f=0.0,
                            n_eps=360, gamma=0.93, k=2, c_target=48, n_h=5)


def epsilon_at(n: int, cfg: AgentConfig) -> float:
    """Exploration probability after ``n`` completed episodes."""
    if n < cfg.n_eps:
        return cfg.eps_i - (n / cfg.n_eps) * (cfg.eps_i - cfg.eps_f)
    return cfg.eps_f


def heuristic_action(t: int) -> int:
    """Open-loop alternating controller used in the opening episodes."""
    return t % 2


# -- replay memory -----------------------------------------------------------

class Transition(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    terminal: bool


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.actions)


def as_batch(minibatch) -> Batch:
    if isinstance(minibatch, Batch):
        return minibatch
    t = list(minibatch)
    return Batch(
        np.array([x.s for x in t], dtype=float),
        np.array([x.a for x in t], dtype=int),
        np.array([x.r for x in t], dtype=float),
        np.array([x.s_next for x in t], dtype=float),
        np.array([x.terminal for x in t], dtype=bool),
    )


class ReplayMemory:
    """Fixed-capacity FIFO of transitions stored in preallocated arrays.

    Index 0 is always the oldest retained transition.
    """

    def __init__(self, capacity: int, n_states: int = N_STATES):
        self.capacity = capacity
        self._s = np.zeros((capacity, n_states))
        self._s2 = np.zeros((capacity, n_states))
        self._a = np.zeros(capacity, dtype=int)
        self._r = np.zeros(capacity)
        self._done = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, s, a, r, s_next, terminal) -> None:
        i = self._next
        self._s[i] = s
        self._a[i] = a
        self._r[i] = r
        self._s2[i] = s_next
        self._done[i] = terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _physical(self, idx):
        start = self._next - self._size
        return (start + np.asarray(idx)) % self.capacity

    def __getitem__(self, i: int) -> Transition:
        if not -self._size <= i < self._size:
            raise IndexError(i)
        j = int(self._physical(i % self._size))
        return Transition(self._s[j].copy(), int(self._a[j]), float(self._r[j]),
                          self._s2[j].copy(), bool(self._done[j]))

    def __iter__(self):
        return (self[i] for i in range(self._size))

    def sample(self, k: int, rng: np.random.Generator) -> Batch:
        """``k`` distinct transitions drawn uniformly."""
        if k > self._size:
            raise ValueError(f"cannot sample {k} from memory of size {self._size}")
        if 4 * k <= self._size:
            # Redraw on collision; uniform over distinct tuples and much
            # cheaper than Generator.choice(replace=False) for small k.
            while True:
                idx = rng.integers(0, self._size, size=k)
                if k == 1 or np.unique(idx).size == k:
                    break
        else:
            idx = rng.choice(self._size, size=k, replace=False)
        j = self._physical(idx)
        return Batch(self._s[j], self._a[j], self._r[j], self._s2[j], self._done[j])


# -- networks ------------------------------------------------------------------

@dataclass
class QNetwork:
    """Fully trainable counterpart of :class:`eqlm.elm.SLFN`."""

    w: np.ndarray
    b: np.ndarray
    beta: np.ndarray

    @classmethod
    def random(cls, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> "QNetwork":
        s1 = 1.0 / np.sqrt(n_in)
        s2 = 1.0 / np.sqrt(n_hidden)
        return cls(rng.uniform(-s1, s1, (n_hidden, n_in)),
                   rng.uniform(-s1, s1, n_hidden),
                   rng.uniform(-s2, s2, (n_hidden, n_out)))

    def hidden(self, x: np.ndarray) -> np.ndarray:
        return elm.sigmoid(x @ self.w.T + self.b)

    def q_values(self, x: np.ndarray) -> np.ndarray:
        return self.hidden(x) @ self.beta

    def copy(self) -> "QNetwork":
        return QNetwork(self.w.copy(), self.b.copy(), self.beta.copy())

    def params(self) -> list[np.ndarray]:
        return [self.w, self.b, self.beta]

    def to_slfn(self) -> elm.SLFN:
        return elm.SLFN(self.w, self.b, self.beta)


def td_loss_and_grad(net: QNetwork, states: np.ndarray, actions: np.ndarray,
                     y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error ``mean_j (Q(s_j, a_j) - y_j)^2`` and its gradient.

    Gradients are returned in the order of :meth:`QNetwork.params`.
    """
    k = len(actions)
    h = net.hidden(states)
    q = h @ net.beta
    rows = np.arange(k)
    e = q[rows, actions] - y
    loss = float(np.mean(e ** 2))
    dq = np.zeros_like(q)
    dq[rows, actions] = 2.0 * e / k
    d_beta = h.T @ dq
    dz = (dq @ net.beta.T) * h * (1.0 - h)
    return loss, [dz.T @ states, dz.sum(axis=0), d_beta]


# -- agents --------------------------------------------------------------------

class _Agent:
    uses_updates = True

    def __init__(self, config: AgentConfig):
        self.config = config
        self.memory = ReplayMemory(config.n_mem)
        self.global_step = 0
        self.episodes_done = 0
        self.n_syncs = 0
        self.skipped_updates = 0

    def q_values(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def target_q_values(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def update(self, batch: Batch) -> None:
        raise NotImplementedError

    def _sync(self) -> None:
        raise NotImplementedError

    def uses_heuristic(self, n: int) -> bool:
        return n < self.config.n_h


class QNetworkAgent(_Agent):
    def __init__(self, config: AgentConfig, rng: np.random.Generator):
        super().__init__(config)
        self.policy_net = QNetwork.random(N_STATES, config.n_hidden, N_ACTIONS, rng)
        self.target_net = self.policy_net.copy()

    def q_values(self, states):
        return self.policy_net.q_values(states)

    def target_q_values(self, states):
        return self.target_net.q_values(states)

    def update(self, batch):
        qnet_update(self, batch)

    def _sync(self):
        self.target_net = self.policy_net.copy()


class EqlmAgent(_Agent):
    def __init__(self, config: AgentConfig, rng: np.random.Generator):
        super().__init__(config)
        net = elm.SLFN.random(N_STATES, config.n_hidden, N_ACTIONS, rng)
        self.lsielm = elm.LsielmState(net, config.gamma_bar)
        self.target_beta = net.beta.copy()

    @property
    def net(self) -> elm.SLFN:
        return self.lsielm.net

    def q_values(self, states):
        return self.net.hidden(states) @ self.net.beta

    def target_q_values(self, states):
        return self.net.hidden(states) @ self.target_beta

    def update(self, batch):
        eqlm_update(self, batch)

    def _sync(self):
        self.target_beta = self.net.beta.copy()


class HeuristicAgent(_Agent):
    """Plays the alternating heuristic forever and never learns."""

    uses_updates = False

    def __init__(self, config: AgentConfig, rng: np.random.Generator | None = None):
        super().__init__(config)

    def uses_heuristic(self, n):
        return True

    def q_values(self, states):
        return np.zeros((len(states), N_ACTIONS))

    target_q_values = q_values

    def update(self, batch):
        pass

    def _sync(self):
        pass


AGENT_KINDS = {"qnet": QNetworkAgent, "eqlm": EqlmAgent, "heuristic-only": HeuristicAgent}


def make_agent(kind: str, config: AgentConfig, rng: np.random.Generator) -> _Agent:
    try:
        cls = AGENT_KINDS[kind]
    except KeyError:
        raise ConfigError("agent", f"unknown agent kind {kind!r}") from None
    return cls(config, rng)


def select_action(agent: _Agent, s: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; ties go to the lowest action index."""
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return int(np.argmax(agent.q_values(s[np.newaxis, :])[0]))


def compute_targets(agent: _Agent, minibatch) -> np.ndarray:
    """Target matrix: current predictions with the taken action's entry replaced.

    The replaced entry is ``r`` for terminal transitions and
    ``r + gamma * max_a Q_T(s', a)`` otherwise, using the target parameters.
    """
    b = as_batch(minibatch)
    T = agent.q_values(b.states).copy()
    boot = agent.target_q_values(b.next_states).max(axis=1)
    y = b.rewards + agent.config.gamma * np.where(b.terminals, 0.0, boot)
    T[np.arange(len(b)), b.actions] = y
    return T


def qnet_update(agent: QNetworkAgent, minibatch) -> None:
    b = as_batch(minibatch)
    T = compute_targets(agent, b)
    y = T[np.arange(len(b)), b.actions]
    _, grads = td_loss_and_grad(agent.policy_net, b.states, b.actions, y)
    for p, g in zip(agent.policy_net.params(), grads):
        p -= agent.config.alpha * g


def eqlm_update(agent: EqlmAgent, minibatch) -> None:
    """First call initialises the incremental solver; later calls fold in chunks."""
    b = as_batch(minibatch)
    T = compute_targets(agent, b)
    H = agent.net.hidden(b.states)
    if agent.lsielm.initialized:
        elm._update_from_hidden(agent.lsielm, H, T)
    else:
        elm._init_from_hidden(agent.lsielm, H, T)


def sync_target(agent: _Agent) -> None:
    agent._sync()
    agent.n_syncs += 1


def run_episode(agent: _Agent, env: CartPole, episode_index: int, rng: np.random.Generator,
                env_rng: np.random.Generator | None = None) -> float:
    """Play one episode, learning after every step. Returns the total reward.

    ``rng`` drives exploration and minibatch sampling; ``env_rng`` (defaulting
    to ``rng``) draws the initial state.
    """
    cfg = agent.config
    s = env.reset(env_rng if env_rng is not None else rng)
    heuristic = agent.uses_heuristic(episode_index)
    eps = epsilon_at(episode_index, cfg)
    total = 0.0
    t = 0
    done = False
    while not done:
        a = heuristic_action(t) if heuristic else select_action(agent, s, eps, rng)
        s_next, r, done = env.step(a)
        total += r
        if agent.uses_updates:
            agent.memory.push(s, a, r, s_next, done)
            if len(agent.memory) >= cfg.k:
                batch = agent.memory.sample(cfg.k, rng)
                try:
                    agent.update(batch)
                except NumericalError as exc:
                    agent.skipped_updates += 1
                    log.warning("skipped minibatch at step %d: %s", agent.global_step, exc)
            agent.global_step += 1
            if agent.global_step % cfg.c_target == 0:
                sync_target(agent)
        s = s_next
        t += 1
    agent.episodes_done += 1
    return total


def train(agent: _Agent, env: CartPole, rng: np.random.Generator,
          env_rng: np.random.Generator | None = None, n_ep: int | None = None) -> np.ndarray:
    """Run ``n_ep`` episodes (default ``config.n_ep``) and return the learning curve."""
    n_ep = agent.config.n_ep if n_ep is None else n_ep
    returns = np.empty(n_ep)
    for n in range(n_ep):
        returns[n] = run_episode(agent, env, n, rng, env_rng)
    return returns


# -- checkpoints -----------------------------------------------------------------

def checkpoint(agent: _Agent) -> dict:
    """Network weights plus config echo and counters, JSON-serialisable."""
    d = {"config": agent.config.to_dict(), "global_step": agent.global_step,
         "episodes_done": agent.episodes_done, "n_syncs": agent.n_syncs}
    if isinstance(agent, EqlmAgent):
        d["kind"] = "eqlm"
        d["network"] = elm.slfn_to_dict(agent.net, agent.lsielm.gamma_bar)
        d["target_beta"] = agent.target_beta.ravel().tolist()
        d["a_dagger"] = agent.lsielm.a_dagger.ravel().tolist()
        d["initialized"] = agent.lsielm.initialized
    elif isinstance(agent, QNetworkAgent):
        d["kind"] = "qnet"
        d["network"] = elm.slfn_to_dict(agent.policy_net.to_slfn())
        d["target_network"] = elm.slfn_to_dict(agent.target_net.to_slfn())
    else:
        d["kind"] = "heuristic-only"
    return d


def restore(d: dict) -> _Agent:
    """Inverse of :func:`checkpoint`. Replay memory is not part of a checkpoint."""
    cfg = AgentConfig.from_dict(d["config"])
    kind = d["kind"]
    rng = np.random.default_rng(0)
    agent = make_agent(kind, cfg, rng)
    if kind == "eqlm":
        net = elm.slfn_from_dict(d["network"])
        n_h = net.n_hidden
        agent.lsielm = elm.LsielmState(net, d["network"]["gamma_bar"],
                                       np.array(d["a_dagger"]).reshape(n_h, n_h),
                                       d["initialized"])
        agent.target_beta = np.array(d["target_beta"]).reshape(net.beta.shape)
    elif kind == "qnet":
        for attr, key in (("policy_net", "network"), ("target_net", "target_network")):
            s = elm.slfn_from_dict(d[key])
            setattr(agent, attr, QNetwork(s.input_weights.copy(), s.biases.copy(), s.beta.copy()))
    agent.global_step = d["global_step"]
    agent.episodes_done = d["episodes_done"]
    agent.n_syncs = d["n_syncs"]
    return agent

