"""Clipped Double Q-Learning with twin online and twin target networks.

Both online networks regress toward the same clipped target
``r + gamma * min(Q1'(s', a*), Q2'(s', a*))`` with ``a* = argmax Q1'(s')``;
network 1 is also the one used to act.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..scenario import rng_stream
from .mlp import Mlp, make_optimizer, mlp_backward, mlp_forward
from .replay import Batch, ReplayBuffer


@dataclass(frozen=True)
class CdqlConfig:
    hidden: tuple = (64, 64)
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 50_000
    gamma: float = 0.95
    tau: float = 0.005
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.4
    optimizer: str = "adam"
    warmup: int = 64  # stored transitions before the first update
    out_init_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= buffer_capacity")
        if not 0.0 <= self.eps_end <= self.eps_start <= 1.0:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CdqlConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)


def epsilon_at(step: int, total_steps: int, cfg: CdqlConfig) -> float:
    """Linear decay from eps_start to eps_end over the first fraction of training."""
    span = cfg.eps_decay_fraction * total_steps
    if span <= 0 or step >= span:
        return cfg.eps_end
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * step / span


def cdql_target(r: float, done: bool, q1_next, q2_next, gamma: float) -> float:
    q1_next = np.asarray(q1_next, dtype=float)
    q2_next = np.asarray(q2_next, dtype=float)
    if q1_next.size == 0 or q2_next.size == 0:
        raise ValueError("empty Q vectors")
    if q1_next.shape != q2_next.shape:
        raise ValueError("twin Q vectors differ in length")
    if done:
        return float(r)
    a = int(np.argmax(q1_next))
    return float(r + gamma * min(q1_next[a], q2_next[a]))


def cdql_targets(rewards, dones, q1_next, q2_next, gamma: float) -> np.ndarray:
    """Batched :func:`cdql_target` over rows of (B, S) arrays."""
    a = np.argmax(q1_next, axis=1)
    rows = np.arange(len(a))
    clipped = np.minimum(q1_next[rows, a], q2_next[rows, a])
    return np.where(dones, rewards, rewards + gamma * clipped)


def greedy(q) -> int:
    """Argmax with the lowest index winning ties."""
    return int(np.argmax(q))


class CdqlAgent:
    """Twin-network CDQL learner with its own replay buffer and RNG streams."""

    def __init__(self, n_features: int, n_actions: int, cfg: CdqlConfig = CdqlConfig(), seed: int = 0,
                 name: str = "cdql"):
        self.cfg = cfg
        self.n_features = int(n_features)
        self.n_actions = int(n_actions)
        self.seed = int(seed)
        self.name = name
        widths = (self.n_features, *cfg.hidden, self.n_actions)
        init_rng = rng_stream(seed, f"{name}/init")
        self.q1 = Mlp.init(widths, init_rng, cfg.out_init_scale)
        self.q2 = Mlp.init(widths, init_rng, cfg.out_init_scale)
        self.t1 = self.q1.copy()
        self.t2 = self.q2.copy()
        self.opt1 = make_optimizer(cfg.optimizer, self.q1.params(), cfg.lr)
        self.opt2 = make_optimizer(cfg.optimizer, self.q2.params(), cfg.lr)
        self.buffer = ReplayBuffer(cfg.buffer_capacity, self.n_features, self.n_actions)
        self.explore_rng = rng_stream(seed, f"{name}/exploration")
        self.replay_rng = rng_stream(seed, f"{name}/replay")
        self.updates = 0
        self.env_steps = 0

    def q_values(self, state) -> np.ndarray:
        return mlp_forward(self.q1, state)

    def act(self, state, epsilon: float) -> int:
        return select_action(self, state, epsilon, self.explore_rng)

    def store(self, state, action, reward, next_state, done) -> None:
        self.buffer.add(state, action, reward, next_state, done)

    def train_step(self):
        """One sampled update once the warm-up is over; returns the loss or None."""
        need = max(self.cfg.warmup, self.cfg.batch_size)
        if len(self.buffer) < need:
            return None
        return cdql_update(self, self.buffer.sample(self.cfg.batch_size, self.replay_rng))

    def networks(self) -> dict:
        return {"q1": self.q1, "q2": self.q2, "t1": self.t1, "t2": self.t2}

    def load_networks(self, nets: dict) -> None:
        for key, net in self.networks().items():
            net.load_from(nets[key])


def select_action(agent: CdqlAgent, state, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(agent.n_actions))
    return greedy(agent.q_values(state))


def _mse_step(net: Mlp, opt, states, actions, targets) -> float:
    q = mlp_forward(net, states)
    rows = np.arange(len(actions))
    err = q[rows, actions] - targets
    upstream = np.zeros_like(q)
    upstream[rows, actions] = 2.0 * err / len(actions)
    opt.step(mlp_backward(net, states, upstream))
    return float(np.mean(err * err))


def cdql_update(agent: CdqlAgent, batch: Batch) -> float:
    """One MSE gradient step on each twin toward the shared clipped target.

    Returns the mean of the two pre-step losses. Target networks are then
    moved toward the online ones with Polyak factor tau.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    cfg = agent.cfg
    q1n = mlp_forward(agent.t1, batch.next_states)
    q2n = mlp_forward(agent.t2, batch.next_states)
    y = cdql_targets(batch.rewards, batch.dones, q1n, q2n, cfg.gamma)
    loss1 = _mse_step(agent.q1, agent.opt1, batch.states, batch.actions, y)
    loss2 = _mse_step(agent.q2, agent.opt2, batch.states, batch.actions, y)
    agent.t1.polyak(agent.q1, cfg.tau)
    agent.t2.polyak(agent.q2, cfg.tau)
    agent.updates += 1
    return 0.5 * (loss1 + loss2)
