"""Decision-window environment around the SCH coordinator.

One environment step applies a (SINR outage, TTT) action for one decision
window of ``decision_window / sim_step`` simulation steps and returns the
windowed extrinsic reward.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .channel import BfArchitecture, ChannelState, CompleteReportTable, build_trace
from .dc_core import (
    GroundTruth,
    HandoverRecord,
    SchState,
    grid_from_params,
    mark_pingpong,
    measure_latency,
    record_from_event,
    ttt_steps_for,
)
from .scenario import ContextParams, ScenarioConfig, mobility_trace, rng_stream

N_FEATURES = 8
FEATURE_NAMES = (
    "lte_sinr_norm",
    "serving_mmwave_sinr_norm",
    "best_neighbor_sinr_norm",
    "sinr_gap_norm",
    "current_outage_index_norm",
    "current_ttt_index_norm",
    "recent_pingpong_rate",
    "recent_outage_fraction",
)
SINR_SCALE_DB = 40.0
GAP_SCALE_DB = 20.0
HISTORY_WINDOWS = 10


@dataclass(frozen=True)
class RewardWeights:
    w_latency: float = 1.0
    w_outage: float = 0.5
    w_pingpong: float = 0.2
    latency_norm: float = 0.100


@dataclass
class WindowMetrics:
    records: list = field(default_factory=list)
    outage_fraction: float = 0.0
    lte_fraction: float = 0.0
    sweep_delays: list = field(default_factory=list)

    @property
    def pingpong_count(self) -> int:
        return sum(r.was_pingpong for r in self.records)

    @property
    def matched(self) -> list:
        return [r for r in self.records if not r.flagged]

    @property
    def mean_latency(self) -> float:
        lat = [r.latency for r in self.matched]
        return float(np.mean(lat)) if lat else math.nan


def extrinsic_reward(window: WindowMetrics, w: RewardWeights = RewardWeights()) -> float:
    """Negative weighted cost of one window.

    Only handovers matched to a ground-truth change carry a latency; spurious
    (flagged) ones are paid for through the ping-pong and outage terms.
    """
    lat = 0.0 if not window.matched else window.mean_latency / w.latency_norm
    return -(w.w_latency * lat + w.w_outage * window.outage_fraction + w.w_pingpong * window.pingpong_count)


def _clip(x, lo=-1.0, hi=1.0):
    return min(hi, max(lo, x))


class DcEnv:
    """Single-UE dual-connectivity episode driven window by window."""

    def __init__(self, scenario: ScenarioConfig, seed: int, bf: BfArchitecture | None = None,
                 context: ContextParams | None = None, weights: RewardWeights = RewardWeights(),
                 run_window=None):
        if bf is not None:
            scenario = scenario.with_(beamforming=bf)
        if context is not None:
            scenario = scenario.with_(context=context)
        self.scenario = scenario
        self.seed = int(seed)
        self.weights = weights
        self.grid = grid_from_params(scenario.handover)
        self.n_actions = self.grid.size
        self.n_features = N_FEATURES
        self.initial_action = self.grid.index(self.grid.k_o // 2, self.grid.k_ttt // 2)
        self._run_window = run_window or _kernels.run_window
        self.trace = None

    # ---------------------------------------------------------- episode

    def reset(self, episode: int = 0) -> np.ndarray:
        sc = self.scenario
        self.episode = int(episode)
        pos = mobility_trace(sc, rng_stream(self.seed, "mobility", episode))
        chan = ChannelState.draw(sc, rng_stream(self.seed, "shadowing", episode))
        self.trace = build_trace(
            pos, sc, chan, rng_stream(self.seed, "gps", episode), sc.context,
            rng_stream(self.seed, "measurement", episode),
        )
        self.truth = GroundTruth(self.trace.gt_sinr, sc.sim_step)
        serving = int(np.argmax(self.trace.crt_sinr[0]))
        self.state = SchState(serving_gnb=serving, sim_step=sc.sim_step)
        self.step_index = 0
        self.window = 0
        self.action = self.initial_action
        self.last_completion_step = 0
        self.records: list[HandoverRecord] = []
        self.windows: list[WindowMetrics] = []
        self._recent_pp = deque(maxlen=HISTORY_WINDOWS)
        self._recent_out = deque(maxlen=HISTORY_WINDOWS)
        self.cumulative_reward = 0.0
        self.outage_steps = 0
        self.lte_steps = 0
        self._sweep_cursor = 0
        return self.features()

    @property
    def done(self) -> bool:
        return self.window >= self.scenario.n_windows

    def current_crt(self) -> CompleteReportTable:
        step = max(self.step_index - 1, 0)
        return self.trace.crt_at(step)

    def features(self) -> np.ndarray:
        crt = self.current_crt()
        sinr = crt.mmwave_sinr
        serving = self.state.serving_gnb
        neighbor = max(v for j, v in enumerate(sinr) if j != serving)
        i_out, i_ttt = self.grid[self.action].grid_index
        pp = float(np.mean(self._recent_pp)) if self._recent_pp else 0.0
        out = float(np.mean(self._recent_out)) if self._recent_out else 0.0
        return np.array([
            _clip(crt.lte_sinr / SINR_SCALE_DB),
            _clip(sinr[serving] / SINR_SCALE_DB),
            _clip(neighbor / SINR_SCALE_DB),
            _clip((neighbor - sinr[serving]) / GAP_SCALE_DB),
            i_out / (self.grid.k_o - 1),
            i_ttt / (self.grid.k_ttt - 1),
            pp,
            out,
        ])

    def step(self, action_index: int):
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        sc = self.scenario
        ho = sc.handover
        act = self.grid[int(action_index)]
        self.action = int(action_index)
        start = self.step_index
        stop = start + sc.steps_per_window
        tr = self.trace
        new_state, events, outage_steps, lte_steps = self._run_window(
            self.state.as_tuple(), tr.crt_sinr, tr.visible_row, tr.gt_sinr, tr.gt_lte,
            float(act.outage_threshold), ttt_steps_for(act.ttt, sc.sim_step),
            float(ho.hysteresis_db), float(ho.return_hysteresis_db),
            int(round(ho.rat_switch_delay / sc.sim_step)), float(ho.link_failure_sinr_db),
            start, stop,
        )
        self.state.load_tuple(new_state)
        recs = [record_from_event(ev, sc.sim_step) for ev in events]
        measure_latency(self.truth, recs, ho, start_step=self.last_completion_step)
        for ev, rec in zip(events, recs):
            mark_pingpong(self.state, rec, int(ev[1]), ho)
            self.last_completion_step = int(ev[1])
        n = stop - start
        wm = WindowMetrics(recs, outage_steps / n, lte_steps / n, self._sweeps_started(start, stop))
        reward = extrinsic_reward(wm, self.weights)
        self.records.extend(recs)
        self.windows.append(wm)
        self._recent_pp.append(1.0 if wm.pingpong_count else 0.0)
        self._recent_out.append(wm.outage_fraction)
        self.cumulative_reward += reward
        self.outage_steps += outage_steps
        self.lte_steps += lte_steps
        self.step_index = stop
        self.window += 1
        return self.features(), reward, self.done, wm

    def _sweeps_started(self, start: int, stop: int) -> list:
        dt = self.scenario.sim_step
        starts = self.trace.sweep_start
        lo = self._sweep_cursor
        hi = int(np.searchsorted(starts, stop * dt - 1e-12, side="left"))
        self._sweep_cursor = hi
        return [float(d) for d in self.trace.sweep_delay[lo:hi]]

    # ---------------------------------------------------------- metrics

    def episode_summary(self) -> dict:
        lat = np.array([r.latency for r in self.records if not r.flagged])
        delays = [d for w in self.windows for d in w.sweep_delays]
        return {
            "cumulative_reward": self.cumulative_reward,
            "mean_latency": float(lat.mean()) if lat.size else math.nan,
            "p95_latency": float(np.percentile(lat, 95)) if lat.size else math.nan,
            "handover_count": len(self.records),
            "pingpong_count": sum(r.was_pingpong for r in self.records),
            "flagged_count": sum(r.flagged for r in self.records),
            "outage_fraction": self.outage_steps / max(self.step_index, 1),
            "lte_fraction": self.lte_steps / max(self.step_index, 1),
            "mean_sweep_delay": float(np.mean(delays)) if delays else math.nan,
        }
