import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualconn.channel import CompleteReportTable
from dualconn.dc_core import (
    LTE,
    Cause,
    GroundTruth,
    HandoverAction,
    HandoverParams,
    HandoverRecord,
    SchState,
    advance,
    build_action_grid,
    measure_latency,
    sch_step,
    snap_index,
    ttt_steps_for,
)

DT = 0.001
GRID = build_action_grid(-8.0, 0.0, 5, 0.025, 0.150, 6)


def table(s0, s1, lte=5.0):
    return CompleteReportTable(lte, [s0, s1], [(-1, -1)] * 2, 0.0)


def act(outage=-4.0, ttt=0.025):
    return HandoverAction(outage, ttt, (0, 0))


def drive(state, tables, action, start=0):
    """Feed one table per step; returns the emitted records with their steps."""
    out = []
    for k, crt in enumerate(tables):
        _, rec = sch_step(state, crt, action, (start + k) * DT, DT)
        if rec is not None:
            out.append((start + k, rec))
    return out


# ------------------------------------------------------------------ grid

def test_grid_example():
    assert GRID.outage_levels == (-8.0, -6.0, -4.0, -2.0, 0.0)
    assert GRID.ttt_levels == pytest.approx((0.025, 0.05, 0.075, 0.1, 0.125, 0.15), abs=1e-15)
    assert GRID.size == 30 == len(GRID)
    a = GRID[GRID.index(3, 2)]
    assert a.grid_index == (3, 2)
    assert a.outage_threshold == GRID.outage_levels[3] and a.ttt == GRID.ttt_levels[2]


def test_grid_endpoints_and_domain():
    g = build_action_grid(-3.0, 1.0, 2, 0.01, 0.02, 2)
    assert g.outage_levels == (-3.0, 1.0)
    assert g.ttt_levels == (0.01, 0.02)
    with pytest.raises(ValueError):
        build_action_grid(-8.0, 0.0, 1, 0.025, 0.150, 6)
    with pytest.raises(ValueError):
        build_action_grid(0.0, -8.0, 5, 0.025, 0.150, 6)


finite = st.floats(-100.0, 100.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(finite, st.floats(1e-3, 50.0), st.integers(2, 12), st.floats(0.001, 1.0), st.floats(1e-3, 1.0),
       st.integers(2, 12))
def test_grid_uniform_spacing(o_min, o_span, k_o, t_min, t_span, k_t):
    o_max, t_max = o_min + o_span, t_min + t_span
    g = build_action_grid(o_min, o_max, k_o, t_min, t_max, k_t)
    assert g.size == k_o * k_t
    for i, v in enumerate(g.outage_levels):
        assert v == pytest.approx(o_min + i * (o_max - o_min) / (k_o - 1), rel=1e-12, abs=1e-12)
    for j, v in enumerate(g.ttt_levels):
        assert v == pytest.approx(t_min + j * (t_max - t_min) / (k_t - 1), rel=1e-12, abs=1e-15)
    assert g.outage_levels[-1] == o_max and g.ttt_levels[-1] == t_max
    for idx, a in enumerate(g.actions):
        i, j = a.grid_index
        assert g.index(i, j) == idx
        assert a.outage_threshold == g.outage_levels[i] and a.ttt == g.ttt_levels[j]


def test_snap_tie_rules():
    assert snap_index(-3.0, GRID.outage_levels, "up") == 3
    assert snap_index(-3.0, GRID.outage_levels, "down") == 2
    assert snap_index(-3.9, GRID.outage_levels, "up") == 2
    assert snap_index(0.0875, GRID.ttt_levels, "down") == 2


@settings(max_examples=200, deadline=None)
@given(st.floats(-20.0, 10.0, allow_nan=False), st.sampled_from(["up", "down"]))
def test_snap_idempotent(v, prefer):
    i = snap_index(v, GRID.outage_levels, prefer)
    assert snap_index(GRID.outage_levels[i], GRID.outage_levels, prefer) == i


# ------------------------------------------------------------------ SCH

def test_better_sinr_after_exactly_ttt():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    a = act(ttt=0.025)
    n = ttt_steps_for(a.ttt, DT)
    recs = drive(st_, [table(0.0, 3.0)] * (n - 1), a)
    assert recs == [] and st_.switch_in_progress is None
    assert st_.ttt_candidate == 1 and st_.ttt_timer == pytest.approx((n - 1) * DT)
    drive(st_, [table(0.0, 3.0)], a, start=n - 1)
    target, completes = st_.switch_in_progress
    assert target == 1 and completes == pytest.approx((n - 1) * DT + 0.020)
    recs = drive(st_, [table(0.0, 3.0)] * 25, a, start=n)
    assert len(recs) == 1
    step, rec = recs[0]
    assert rec.cause is Cause.BETTER_SINR and (rec.from_cell, rec.to_cell) == (0, 1)
    assert rec.completed_at == pytest.approx(completes) and step * DT == pytest.approx(completes)
    assert st_.serving_gnb == 1


def test_interrupted_hold_resets_timer():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    a = act(ttt=0.025)
    n = ttt_steps_for(a.ttt, DT)
    drive(st_, [table(0.0, 3.0)] * (n - 1) + [table(0.0, -1.0)], a)
    assert st_.ttt_steps == 0 and st_.ttt_candidate == -1
    assert drive(st_, [table(0.0, 3.0)] * (n - 1), a, start=n) == []
    assert st_.switch_in_progress is None


def test_hysteresis_blocks_small_gains():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    drive(st_, [table(0.0, 0.9)] * 200, act())
    assert st_.ttt_steps == 0 and st_.switch_in_progress is None


def test_outage_goes_to_lte_immediately_and_returns():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    a = act(outage=-4.0)
    drive(st_, [table(-4.1, -10.0)], a)
    target, _ = st_.switch_in_progress
    assert target == LTE
    recs = drive(st_, [table(-4.1, -10.0)] * 25, a, start=1)
    assert len(recs) == 1 and recs[0][1].cause is Cause.OUTAGE and recs[0][1].to_cell == LTE
    assert st_.on_lte_fallback and st_.current_cell == LTE
    # below threshold + return hysteresis: stay on LTE
    assert drive(st_, [table(-2.5, -10.0)] * 50, a, start=30) == []
    recs = drive(st_, [table(-1.9, -10.0)] * 25, a, start=80)
    assert len(recs) == 1 and recs[0][1].cause is Cause.RECOVERY and recs[0][1].from_cell == LTE
    assert not st_.on_lte_fallback and st_.serving_gnb == 0


def test_candidate_below_outage_is_ignored():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    drive(st_, [table(-3.9 - 3.0, -5.0)] * 10, act(outage=-8.0))
    assert st_.ttt_candidate == 1
    st2 = SchState(serving_gnb=0, sim_step=DT)
    drive(st2, [table(-3.5, -3.9)] * 10, act(outage=-4.0))
    assert st2.ttt_candidate == -1


def test_future_table_rejected():
    crt = CompleteReportTable(0.0, [0.0, 0.0], [(-1, -1)] * 2, 1.0)
    with pytest.raises(ValueError):
        sch_step(SchState(serving_gnb=0, sim_step=DT), crt, act(), 0.5, DT)


def test_pingpong_flag():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    a = act(ttt=0.025)
    recs = drive(st_, [table(0.0, 3.0)] * 60, a)
    recs += drive(st_, [table(3.0, 0.0)] * 60, a, start=60)
    assert [r.was_pingpong for _, r in recs] == [False, True]
    st2 = SchState(serving_gnb=0, sim_step=DT)
    recs = drive(st2, [table(0.0, 3.0)] * 60, a)
    recs += drive(st2, [table(0.0, 3.0)] * 1200 + [table(3.0, 0.0)] * 60, a, start=60)
    assert [r.was_pingpong for _, r in recs] == [False, False]


def _random_tables(rng, n):
    walk = np.cumsum(rng.normal(0.0, 0.6, (n, 2)), axis=0) * 0.3 + rng.normal(0.0, 4.0, 2)
    return walk


@pytest.mark.parametrize("seed", range(5))
def test_trace_invariants(seed):
    rng = np.random.default_rng(seed)
    tables = _random_tables(rng, 4000)
    a = GRID[int(rng.integers(GRID.size))]
    ttt_req = ttt_steps_for(a.ttt, DT)
    st_ = [0, 0, -1, 0, -2, -2, 0, 0, 0, 0.0]
    trig_thr = {}
    for t in range(tables.shape[0]):
        before = st_[4]
        ev = advance(st_, list(tables[t]), a.outage_threshold, ttt_req, 1.0, 2.0, 20, t)
        if before == -2 and st_[4] != -2:
            trig_thr[t] = tables[t]
        if ev is not None and ev[3] != LTE:
            crt_at_trigger = trig_thr[ev[0]]
            assert crt_at_trigger[ev[3]] >= a.outage_threshold
        if st_[2] >= 0:
            assert st_[2] != st_[0]
        assert st_[3] * DT <= a.ttt + DT + 1e-12
        if st_[4] != -2:
            assert st_[8] >= t


def test_static_noise_free_has_no_handovers():
    st_ = SchState(serving_gnb=0, sim_step=DT)
    assert drive(st_, [table(10.0, 9.5)] * 3000, act()) == []


def test_longer_ttt_never_adds_pingpongs_on_trace():
    rng = np.random.default_rng(7)
    tables = _random_tables(rng, 20000)
    counts = []
    for ttt in GRID.ttt_levels:
        st_ = SchState(serving_gnb=0, sim_step=DT)
        recs = drive(st_, [table(*row) for row in tables], act(outage=-30.0, ttt=ttt))
        counts.append(sum(r.was_pingpong for _, r in recs))
    assert all(b <= a for a, b in zip(counts, counts[1:])), counts


# -------------------------------------------------------------- latency

def test_latency_from_ground_truth_flip():
    best = np.r_[np.zeros(1000, int), np.ones(1000, int)]
    truth = GroundTruth.from_best(best, DT)
    rec = HandoverRecord(1.030, 1.060, 0, 1, Cause.BETTER_SINR, -4.0)
    lat = measure_latency(truth, [rec])
    assert lat[0] == pytest.approx(0.060, abs=1e-12)
    assert rec.anchor_at == pytest.approx(1.0) and not rec.flagged


def test_unmatched_switch_is_flagged():
    truth = GroundTruth.from_best(np.zeros(2000, int), DT, n_cells=2)
    rec = HandoverRecord(0.500, 0.520, 0, 1, Cause.BETTER_SINR, -4.0)
    lat = measure_latency(truth, [rec])
    assert rec.flagged and math.isnan(rec.anchor_at)
    assert lat[0] == pytest.approx(0.020)


def test_anchor_must_follow_previous_completion():
    best = np.r_[np.zeros(500, int), np.ones(1500, int)]
    truth = GroundTruth.from_best(best, DT)
    first = HandoverRecord(0.540, 0.560, 0, 1, Cause.BETTER_SINR, -4.0)
    again = HandoverRecord(1.200, 1.220, 0, 1, Cause.BETTER_SINR, -4.0)
    measure_latency(truth, [first, again])
    assert not first.flagged and again.flagged


def test_outage_latency_uses_threshold_crossing():
    sinr = np.zeros((1000, 2))
    sinr[300:, 0] = -6.0
    truth = GroundTruth(sinr, DT)
    rec = HandoverRecord(0.340, 0.360, 0, LTE, Cause.OUTAGE, -4.0)
    measure_latency(truth, [rec])
    assert rec.latency == pytest.approx(0.060)


def test_latency_never_below_switch_delay():
    best = np.r_[np.zeros(1000, int), np.ones(1000, int)]
    rec = HandoverRecord(0.990, 1.010, 0, 1, Cause.BETTER_SINR, -4.0)
    measure_latency(GroundTruth.from_best(best, DT), [rec], HandoverParams())
    assert rec.latency == pytest.approx(0.020)
