"""Hierarchical deep Q-learning: a meta-controller proposing goals on the
(outage, TTT) grid and a goal-conditioned controller choosing the action.

Both levels are CDQL learners. The controller sees the state features with
the goal's two normalised grid coordinates appended and learns from the
intrinsic reward; the meta-controller learns from the summed extrinsic reward
of each goal segment.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dc_core import ActionGrid, HandoverAction
from .metrics import EpisodeMetrics, Scheme
from .rl.cdql import CdqlAgent, CdqlConfig, epsilon_at

GOAL_DIMS = 2


class IntrinsicMode(str, enum.Enum):
    BINARY = "binary"
    SHAPED_DISTANCE = "shaped_distance"


@dataclass(frozen=True)
class Goal:
    """A point of the action grid proposed by the meta-controller."""

    index: int
    i_out: int
    i_ttt: int

    @classmethod
    def from_index(cls, grid: ActionGrid, index: int) -> "Goal":
        if not 0 <= index < grid.size:
            raise ValueError(f"goal index {index} outside [0, {grid.size})")
        i_out, i_ttt = grid[index].grid_index
        return cls(int(index), i_out, i_ttt)

    @property
    def grid_index(self) -> tuple[int, int]:
        return self.i_out, self.i_ttt


@dataclass(frozen=True)
class HidqlConfig:
    c_max: int = 8
    kappa: float = 0.25
    intrinsic: IntrinsicMode = IntrinsicMode.BINARY
    meta: CdqlConfig = field(default_factory=CdqlConfig)
    controller: CdqlConfig = field(default_factory=CdqlConfig)

    def __post_init__(self):
        if self.c_max < 1:
            raise ValueError("c_max must be >= 1")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        object.__setattr__(self, "intrinsic", IntrinsicMode(self.intrinsic))


def _coords(x) -> tuple[int, int]:
    if isinstance(x, (HandoverAction, Goal)):
        return x.grid_index
    i, j = x
    return int(i), int(j)


def goal_distance(a, g, k_o: int, k_ttt: int) -> float:
    """Mean normalised grid distance between an action and a goal, in [0, 1].

    Smaller means closer; the segment ends once this drops below kappa.
    """
    if k_o < 2 or k_ttt < 2:
        raise ValueError("grid needs at least two levels per axis")
    ai, aj = _coords(a)
    gi, gj = _coords(g)
    for i, j in ((ai, aj), (gi, gj)):
        if not (0 <= i < k_o and 0 <= j < k_ttt):
            raise ValueError(f"grid coordinate {(i, j)} outside {k_o}x{k_ttt}")
    return (abs(ai - gi) / (k_o - 1) + abs(aj - gj) / (k_ttt - 1)) / 2.0


def done(c: int, c_max: int, dist: float, kappa: float) -> bool:
    return c == c_max or dist < kappa


def intrinsic_reward(dist: float, mode: IntrinsicMode | str, kappa: float = 0.25) -> float:
    mode = IntrinsicMode(mode)
    if mode is IntrinsicMode.BINARY:
        return 1.0 if dist < kappa else 0.0
    return 1.0 - dist


class HidqlAgent:
    def __init__(self, n_features: int, grid: ActionGrid, cfg: HidqlConfig = HidqlConfig(), seed: int = 0):
        self.cfg = cfg
        self.grid = grid
        self.n_features = int(n_features)
        self.meta = CdqlAgent(n_features, grid.size, cfg.meta, seed, name="meta")
        self.controller = CdqlAgent(n_features + GOAL_DIMS, grid.size, cfg.controller, seed, name="controller")
        self.env_steps = 0
        self.meta_decisions = 0

    def goal_encoding(self, g: Goal) -> np.ndarray:
        return np.array([g.i_out / (self.grid.k_o - 1), g.i_ttt / (self.grid.k_ttt - 1)])

    def controller_input(self, s, g: Goal) -> np.ndarray:
        return np.concatenate([np.asarray(s, dtype=float), self.goal_encoding(g)])

    def greedy_action(self, s, g: Goal) -> int:
        return self.controller.act(self.controller_input(s, g), 0.0)

    def networks(self) -> dict:
        nets = {f"meta_{k}": v for k, v in self.meta.networks().items()}
        nets.update({f"controller_{k}": v for k, v in self.controller.networks().items()})
        return nets


@dataclass
class MetaLogRow:
    episode: int
    env_step: int
    goal: int
    c_used: int
    R: float
    eps_meta: float
    eps_controller: float

    COLUMNS = ("episode", "env_step", "goal", "c_used", "R", "eps_meta", "eps_controller")

    def values(self) -> list:
        return [getattr(self, k) for k in self.COLUMNS]


def hidql_episode(env, agent: HidqlAgent, total_steps: int, episode: int = 0, log: list | None = None,
                  bf_kind: str = "", seed: int = 0) -> EpisodeMetrics:
    """Run one episode of the two-level loop, training both levels online.

    ``total_steps`` is the planned number of environment steps over the whole
    run and sets the exploration schedule of both levels.
    """
    cfg = agent.cfg
    grid = agent.grid
    meta, ctrl = agent.meta, agent.controller

    def eps():
        return (epsilon_at(agent.env_steps, total_steps, cfg.meta),
                epsilon_at(agent.env_steps, total_steps, cfg.controller))

    s = np.asarray(env.reset(episode), dtype=float)
    g = Goal.from_index(grid, meta.act(s, eps()[0]))
    env_done = False
    while True:
        R = 0.0
        s0 = s
        c = 0
        seg_done = False
        eps_mc, eps_c = eps()
        while not seg_done:
            x = agent.controller_input(s, g)
            a = ctrl.act(x, eps_c)
            s_next, r_g, env_done, _ = env.step(a)
            s_next = np.asarray(s_next, dtype=float)
            dist = goal_distance(grid[a].grid_index, g.grid_index, grid.k_o, grid.k_ttt)
            c += 1
            r = intrinsic_reward(dist, cfg.intrinsic, cfg.kappa)
            seg_done = done(c, cfg.c_max, dist, cfg.kappa) or env_done
            ctrl.store(x, a, r, agent.controller_input(s_next, g), seg_done)
            ctrl.train_step()
            R += r_g
            s = s_next
            agent.env_steps += 1
            eps_c = eps()[1]
        meta.store(s0, g.index, R, s, env_done)
        meta.train_step()
        agent.meta_decisions += 1
        if log is not None:
            log.append(MetaLogRow(int(episode), agent.env_steps, g.index, c, float(R), eps_mc, eps_c))
        if env_done:
            break
        g = Goal.from_index(grid, meta.act(s, eps()[0]))
    return EpisodeMetrics.from_summary(env.episode_summary(), episode, Scheme.HIDQL.value, bf_kind, seed)
