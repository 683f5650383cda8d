"""Coordinator-side Secondary Cell Handover (SCH) and handover latency.

The coordinator evaluates the last completed Complete Report Table every
simulation step. A better gNB must beat the serving one by the hysteresis for
TTT consecutive steps; a serving gNB below the outage threshold forces an
immediate fallback to LTE. Every switch takes ``rat_switch_delay``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

LTE = -1
_NO_SWITCH = -2


class Cause(str, enum.Enum):
    BETTER_SINR = "BetterSinr"
    OUTAGE = "Outage"
    RECOVERY = "Recovery"  # return from LTE fallback to a gNB


_CAUSE_CODES = [Cause.BETTER_SINR, Cause.OUTAGE, Cause.RECOVERY]


@dataclass(frozen=True)
class HandoverParams:
    hysteresis_db: float = 1.0
    return_hysteresis_db: float = 2.0
    rat_switch_delay: float = 0.020
    pingpong_window: float = 1.0
    link_failure_sinr_db: float = -6.0
    o_min: float = -8.0
    o_max: float = 0.0
    k_o: int = 5
    ttt_min: float = 0.025
    ttt_max: float = 0.150
    k_ttt: int = 6


@dataclass(frozen=True)
class HandoverAction:
    outage_threshold: float
    ttt: float
    grid_index: tuple[int, int]


@dataclass(frozen=True)
class ActionGrid:
    outage_levels: tuple[float, ...]
    ttt_levels: tuple[float, ...]
    actions: tuple[HandoverAction, ...]

    @property
    def k_o(self) -> int:
        return len(self.outage_levels)

    @property
    def k_ttt(self) -> int:
        return len(self.ttt_levels)

    @property
    def size(self) -> int:
        return len(self.actions)

    def index(self, i_out: int, i_ttt: int) -> int:
        return i_out * self.k_ttt + i_ttt

    def __getitem__(self, idx: int) -> HandoverAction:
        return self.actions[idx]

    def __len__(self) -> int:
        return len(self.actions)


def uniform_levels(lo: float, hi: float, k: int) -> tuple[float, ...]:
    if k < 2:
        raise ValueError(f"need at least 2 levels, got {k}")
    if not lo < hi:
        raise ValueError("minimum must be below maximum")
    step = (hi - lo) / (k - 1)
    levels = [lo + i * step for i in range(k - 1)] + [hi]
    return tuple(levels)


def build_action_grid(o_min, o_max, k_o, ttt_min, ttt_max, k_ttt) -> ActionGrid:
    """Cartesian product of the outage and TTT grids, outage-major order."""
    outs = uniform_levels(o_min, o_max, k_o)
    ttts = uniform_levels(ttt_min, ttt_max, k_ttt)
    actions = tuple(
        HandoverAction(o, t, (i, j)) for i, o in enumerate(outs) for j, t in enumerate(ttts)
    )
    return ActionGrid(outs, ttts, actions)


def grid_from_params(p: HandoverParams) -> ActionGrid:
    return build_action_grid(p.o_min, p.o_max, p.k_o, p.ttt_min, p.ttt_max, p.k_ttt)


def snap_index(value: float, levels, prefer: str) -> int:
    """Nearest level; exact ties go to the higher (``"up"``) or lower level."""
    levels = np.asarray(levels, dtype=float)
    dist = np.abs(levels - value)
    tol = 1e-9 * max(1.0, float(np.max(np.abs(levels))))
    near = np.flatnonzero(dist <= dist.min() + tol)
    return int(near[-1] if prefer == "up" else near[0])


# ------------------------------------------------------------ SCH state

@dataclass
class SchState:
    serving_gnb: int
    sim_step: float
    on_lte_fallback: bool = False
    ttt_candidate: int = -1
    ttt_steps: int = 0
    switch_target: int = _NO_SWITCH
    switch_from: int = _NO_SWITCH
    switch_cause: int = 0
    switch_trigger_step: int = 0
    switch_complete_step: int = 0
    switch_threshold: float = 0.0
    history: list = field(default_factory=list)  # (from, to, completed_step)

    @property
    def ttt_timer(self) -> float:
        return self.ttt_steps * self.sim_step

    @property
    def switch_in_progress(self) -> tuple[int, float] | None:
        if self.switch_target == _NO_SWITCH:
            return None
        return self.switch_target, self.switch_complete_step * self.sim_step

    @property
    def current_cell(self) -> int:
        return LTE if self.on_lte_fallback else self.serving_gnb

    @property
    def last_handover(self):
        if not self.history:
            return None
        f, t, s = self.history[-1]
        return f, t, s * self.sim_step

    def as_tuple(self) -> tuple:
        return (
            self.serving_gnb, int(self.on_lte_fallback), self.ttt_candidate, self.ttt_steps,
            self.switch_target, self.switch_from, self.switch_cause,
            self.switch_trigger_step, self.switch_complete_step, self.switch_threshold,
        )

    def load_tuple(self, t) -> None:
        (self.serving_gnb, lte, self.ttt_candidate, self.ttt_steps, self.switch_target,
         self.switch_from, self.switch_cause, self.switch_trigger_step,
         self.switch_complete_step, self.switch_threshold) = t
        self.on_lte_fallback = bool(lte)


@dataclass
class HandoverRecord:
    triggered_at: float
    completed_at: float
    from_cell: int
    to_cell: int
    cause: Cause
    outage_threshold: float
    latency: float = math.nan
    anchor_at: float = math.nan
    was_pingpong: bool = False
    flagged: bool = False

    def row(self) -> list:
        return [
            repr(self.triggered_at), repr(self.completed_at), _cell_name(self.from_cell),
            _cell_name(self.to_cell), repr(self.latency), int(self.was_pingpong),
            self.cause.value, int(self.flagged),
        ]


RECORD_COLUMNS = ["triggered_at", "completed_at", "from", "to", "latency", "pingpong", "cause", "flagged"]


def _cell_name(c: int) -> str:
    return "lte" if c == LTE else f"gnb{c}"


def advance(st: list, crt_sinr, thr: float, ttt_req: int, hyst: float, ret_hyst: float,
            delay_steps: int, step: int):
    """One SCH step on the primitive state tuple (see :meth:`SchState.as_tuple`).

    Returns ``None`` or the completed switch as
    ``(trigger_step, complete_step, from, to, cause_code, threshold)``.
    Pure-Python reference for the compiled kernel.
    """
    done = None
    if st[4] != _NO_SWITCH:
        if step < st[8]:
            return None
        done = (st[7], st[8], st[5], st[4], st[6], st[9])
        if st[4] == LTE:
            st[1] = 1
        else:
            st[0] = st[4]
            st[1] = 0
        st[4] = _NO_SWITCH
        st[5] = _NO_SWITCH
        st[2] = -1
        st[3] = 0

    m = len(crt_sinr)
    if st[1]:
        best = 0
        for j in range(1, m):
            if crt_sinr[j] > crt_sinr[best]:
                best = j
        if crt_sinr[best] >= thr + ret_hyst:
            _start(st, best, LTE, 2, step, delay_steps, thr)
        return done

    serving = st[0]
    s = crt_sinr[serving]
    if s < thr:
        _start(st, LTE, serving, 1, step, delay_steps, thr)
        st[2] = -1
        st[3] = 0
        return done
    cand = -1
    for j in range(m):
        if j != serving and (cand < 0 or crt_sinr[j] > crt_sinr[cand]):
            cand = j
    if cand >= 0 and crt_sinr[cand] > s + hyst and crt_sinr[cand] >= thr:
        if cand != st[2]:
            st[2] = cand
            st[3] = 0
        st[3] += 1
        if st[3] >= ttt_req:
            _start(st, cand, serving, 0, step, delay_steps, thr)
            st[2] = -1
            st[3] = 0
    else:
        st[2] = -1
        st[3] = 0
    return done


def _start(st, target, source, cause, step, delay_steps, thr):
    st[4] = target
    st[5] = source
    st[6] = cause
    st[7] = step
    st[8] = step + delay_steps
    st[9] = thr


def ttt_steps_for(ttt: float, sim_step: float) -> int:
    return max(1, int(round(ttt / sim_step)))


def mark_pingpong(state: SchState, rec: HandoverRecord, complete_step: int, params: HandoverParams) -> None:
    """Flag ``rec`` if it returns to a cell left within the ping-pong window."""
    window = int(round(params.pingpong_window / state.sim_step))
    trig = int(round(rec.triggered_at / state.sim_step))
    for f, _t, done_step in state.history:
        if f == rec.to_cell and trig - window <= done_step <= trig:
            rec.was_pingpong = True
            break
    state.history.append((rec.from_cell, rec.to_cell, complete_step))
    cutoff = complete_step - window
    state.history = [h for h in state.history if h[2] >= cutoff]


def record_from_event(ev, sim_step: float) -> HandoverRecord:
    trig, comp, src, dst, cause, thr = ev
    return HandoverRecord(trig * sim_step, comp * sim_step, int(src), int(dst), _CAUSE_CODES[int(cause)], float(thr))


def sch_step(state: SchState, crt, action: HandoverAction, now: float, sim_step: float,
             params: HandoverParams = HandoverParams()):
    """Advance the SCH state machine by one step; mutates and returns ``state``.

    Returns ``(state, record)`` where ``record`` is the handover completed at
    this step, if any.
    """
    if crt.measured_at > now + 1e-12:
        raise ValueError("CRT measured in the future")
    step = int(round(now / sim_step))
    st = list(state.as_tuple())
    ev = advance(
        st, crt.mmwave_sinr, action.outage_threshold, ttt_steps_for(action.ttt, sim_step),
        params.hysteresis_db, params.return_hysteresis_db,
        int(round(params.rat_switch_delay / sim_step)), step,
    )
    state.load_tuple(tuple(st))
    if ev is None:
        return state, None
    rec = record_from_event(ev, sim_step)
    rec.latency = rec.completed_at - rec.triggered_at
    mark_pingpong(state, rec, ev[1], params)
    return state, rec


# -------------------------------------------------------------- latency

@dataclass
class GroundTruth:
    """Zero-delay best-beam SINR of every gNB at every step."""

    sinr: np.ndarray  # (T, M)
    sim_step: float
    best: np.ndarray = field(init=False)

    def __post_init__(self):
        self.sinr = np.asarray(self.sinr, dtype=float)
        self.best = np.argmax(self.sinr, axis=1)

    @classmethod
    def from_best(cls, best, sim_step: float, n_cells: int | None = None) -> "GroundTruth":
        """Synthetic truth where ``best[t]`` is 0 dB and every other gNB is -10 dB."""
        best = np.asarray(best, dtype=np.int64)
        m = int(best.max()) + 1 if n_cells is None else n_cells
        sinr = np.full((best.size, m), -10.0)
        sinr[np.arange(best.size), best] = 0.0
        return cls(sinr, sim_step)


def _last_crossing(series: np.ndarray, lo: int, hi: int, up: bool, level: float) -> int | None:
    """Last step t in (lo, hi] where ``series`` crosses ``level`` (t-1 -> t)."""
    a = max(lo, 0)
    if hi <= a:
        return None
    prev = series[a:hi]
    cur = series[a + 1:hi + 1]
    hits = (prev < level) & (cur >= level) if up else (prev >= level) & (cur < level)
    idx = np.flatnonzero(hits)
    return None if idx.size == 0 else a + 1 + int(idx[-1])


def latency_anchor(truth: GroundTruth, rec: HandoverRecord, lower_step: int,
                   params: HandoverParams) -> int | None:
    """Step at which the switch in ``rec`` became the right thing to do."""
    dt = truth.sim_step
    comp = min(int(round(rec.completed_at / dt)), truth.sinr.shape[0] - 1)
    trig = min(int(round(rec.triggered_at / dt)), comp)
    if rec.cause is Cause.BETTER_SINR:
        is_to = truth.best == rec.to_cell
        return _last_crossing(is_to.astype(float), lower_step, comp, True, 0.5)
    if rec.cause is Cause.OUTAGE:
        return _last_crossing(truth.sinr[:, rec.from_cell], lower_step, trig, False, rec.outage_threshold)
    level = rec.outage_threshold + params.return_hysteresis_db
    return _last_crossing(truth.sinr[:, rec.to_cell], lower_step, comp, True, level)


def measure_latency(truth: GroundTruth, records, params: HandoverParams = HandoverParams(),
                    start_step: int = 0) -> np.ndarray:
    """Per-record latency in seconds, measured from the ground-truth change.

    The change must fall after the previous handover completed; records with
    no such change are flagged and fall back to completed - triggered. Sets
    ``latency``, ``anchor_at`` and ``flagged`` on each record.
    """
    dt = truth.sim_step
    lower = start_step
    out = np.empty(len(records))
    for k, rec in enumerate(records):
        anchor = latency_anchor(truth, rec, lower, params)
        if anchor is None:
            rec.flagged = True
            rec.anchor_at = math.nan
            rec.latency = rec.completed_at - rec.triggered_at
        else:
            rec.flagged = False
            rec.anchor_at = anchor * dt
            rec.latency = max(rec.completed_at - anchor * dt, params.rat_switch_delay)
        out[k] = rec.latency
        lower = int(round(rec.completed_at / dt))
    return out
