import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualconn.channel import (
    BfArchitecture,
    BfKind,
    ChannelParams,
    ChannelState,
    ShadowingField,
    beam_of,
    build_trace,
    compute_sweep_delay,
    context_sector,
    estimation_error,
    instantaneous_sinr,
    pathloss_lte,
    pathloss_mmwave,
    run_sweep,
)
from dualconn.dc_core import LTE
from dualconn.scenario import ContextParams, mobility_trace, rng_stream


def quiet(scenario, **bf):
    """Scenario with shadowing and estimation error switched off."""
    ch = ChannelParams(shadowing_sigma_los_db=0.0, shadowing_sigma_nlos_db=0.0, measurement_noise_db=0.0,
                       tx_power_gnb_dbm=scenario.channel.tx_power_gnb_dbm)
    return scenario.with_(channel=ch, beamforming=BfArchitecture(**bf))


# ----------------------------------------------------------- sweep delay

@pytest.mark.parametrize(
    "args, expected",
    [
        ((16, 8, 200e-6, 16), 0.0016),
        ((16, 8, 200e-6, 1), 0.0256),
        ((1, 1, 200e-6, 1), 0.0002),
        ((16, 8, 200e-6, 2), 0.0128),
    ],
)
def test_sweep_delay_examples(args, expected):
    assert compute_sweep_delay(*args) == expected


def test_sweep_delay_errors():
    with pytest.raises(ZeroDivisionError):
        compute_sweep_delay(16, 8, 200e-6, 0)
    with pytest.raises(ValueError):
        compute_sweep_delay(0, 8, 200e-6, 1)
    with pytest.raises(ValueError):
        compute_sweep_delay(16, 8, -1.0, 1)


def test_architecture_l_factor_and_table_values():
    assert BfArchitecture(BfKind.ANALOG_ANALOG).l_factor == 1
    assert BfArchitecture(BfKind.HYBRID_ANALOG).l_factor == 2
    assert BfArchitecture(BfKind.DIGITAL_ANALOG).l_factor == 16
    assert BfArchitecture(BfKind.HYBRID_ANALOG).sweep_delay() == 0.0128
    assert BfArchitecture(BfKind.HYBRID_ANALOG, table1_compat=True).sweep_delay() == 0.0168
    assert BfArchitecture(BfKind.ANALOG_ANALOG, table1_compat=True).sweep_delay() == 0.0256
    with pytest.raises(ValueError):
        BfArchitecture(n_gnb_dirs=0)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 64), st.integers(1, 32), st.integers(1, 64), st.integers(2, 5))
def test_sweep_delay_linear_and_inverse(n_g, n_u, l, k):
    t = 200e-6
    base = compute_sweep_delay(n_g, n_u, t, l)
    assert compute_sweep_delay(k * n_g, n_u, t, l) == pytest.approx(k * base, rel=1e-15)
    assert compute_sweep_delay(n_g, k * n_u, t, l) == pytest.approx(k * base, rel=1e-15)
    assert compute_sweep_delay(n_g, n_u, t, k * l) == pytest.approx(base / k, rel=1e-15)


# ------------------------------------------------------------- pathloss

def test_pathloss_examples():
    assert pathloss_mmwave(100.0, True, 28.0) == pytest.approx(32.4 + 42.0 + 20 * math.log10(28.0), abs=1e-12)
    assert pathloss_mmwave(100.0, True, 28.0) == pytest.approx(103.34, abs=0.01)
    assert pathloss_mmwave(1.0, True, 1.0) == pytest.approx(32.4, abs=1e-12)
    assert pathloss_mmwave(100.0, False, 28.0) >= pathloss_mmwave(100.0, True, 28.0)
    assert pathloss_lte(1000.0) == pytest.approx(128.1, abs=1e-12)
    assert pathloss_lte(100.0) == pytest.approx(90.5, abs=1e-12)
    assert pathloss_lte(2000.0) > pathloss_lte(1000.0)


def test_pathloss_vectorised():
    d = np.array([10.0, 100.0])
    out = pathloss_mmwave(d, np.array([True, False]))
    assert out.shape == (2,)
    assert out[0] == pytest.approx(pathloss_mmwave(10.0, True))


# ---------------------------------------------------------------- SINR

def test_link_budget_single_gnb(scenario):
    sc = quiet(scenario).with_(gnb_positions=((100.0, 60.0),), buildings=())
    state = ChannelState.draw(sc, rng_stream(0, "shadowing"))
    ue = (130.0, 100.0)  # 50 m away, line of sight
    ch = sc.channel
    pl = 32.4 + 21.0 * math.log10(50.0) + 20.0 * math.log10(28.0)
    noise = -174.0 + 10.0 * math.log10(400e6) + 7.0
    expected = ch.tx_power_gnb_dbm - pl + 10 * math.log10(16) + 10 * math.log10(8) - noise
    assert instantaneous_sinr(ue, 0, sc, state) == pytest.approx(expected, abs=1e-9)
    lte_expected = 46.0 - (128.1 + 37.6 * math.log10(math.hypot(30.0, 18.0) / 1000.0)) - (
        -174.0 + 10.0 * math.log10(20e6) + 7.0)
    assert instantaneous_sinr(ue, LTE, sc, state) == pytest.approx(lte_expected, abs=1e-9)


def test_adjacent_gnb_wins_and_determinism(scenario):
    state = ChannelState.draw(scenario, rng_stream(0, "shadowing"))
    near0 = (25.0, 60.0)
    s0 = instantaneous_sinr(near0, 0, scenario, state)
    s1 = instantaneous_sinr(near0, 1, scenario, state)
    assert s0 > s1
    assert s0 == instantaneous_sinr(near0, 0, scenario, state)


def test_shadowing_is_frozen(scenario):
    field = ShadowingField.generate(3, 100.0, 50.0, 10.0, rng_stream(0, "shadowing"))
    p = np.array([[12.3, 4.5], [12.3, 4.5], [80.0, 40.0]])
    v = field.sample(1, p)
    assert v[0] == v[1]
    big = ShadowingField.generate(1, 400.0, 400.0, 10.0, rng_stream(1, "shadowing"))
    assert np.std(big.fields[0]) == pytest.approx(1.0, abs=0.15)


# --------------------------------------------------------------- sweeps

def test_sweep_matches_brute_force(scenario):
    sc = scenario.with_(beamforming=BfArchitecture(n_gnb_dirs=4, n_ue_dirs=3))
    state = ChannelState.draw(sc, rng_stream(2, "shadowing"))
    for ue in [(30.0, 40.0), (100.0, 10.0), (170.0, 100.0)]:
        crt = run_sweep(ue, sc, state, now=0.0)
        for i in range(sc.n_gnbs):
            pairs = [instantaneous_sinr(ue, i, sc, state, (g, u)) for g in range(4) for u in range(3)]
            assert crt.mmwave_sinr[i] == pytest.approx(max(pairs), abs=1e-12)
            assert crt.mmwave_sinr[i] == pytest.approx(instantaneous_sinr(ue, i, sc, state), abs=1e-12)


def test_sweep_timing(scenario):
    state = ChannelState.draw(scenario, rng_stream(0, "shadowing"))
    digital = scenario.with_(beamforming=BfArchitecture(BfKind.DIGITAL_ANALOG))
    assert run_sweep((60.0, 10.0), digital, state, now=1.0).measured_at == pytest.approx(1.0016, abs=1e-15)
    sectors = [[0, 1, 2, 3], [4, 5, 6, 7]]
    crt = run_sweep((60.0, 10.0), scenario, state, now=0.0, sectors=sectors)
    assert crt.measured_at == pytest.approx(0.0064, abs=1e-15)


def test_sector_never_increases_sinr(scenario):
    state = ChannelState.draw(scenario, rng_stream(4, "shadowing"))
    for ue in [(30.0, 10.0), (100.0, 110.0), (160.0, 40.0)]:
        full = run_sweep(ue, scenario, state, now=0.0)
        for k in range(16):
            part = run_sweep(ue, scenario, state, now=0.0, sectors=[[k], [k]])
            assert all(p <= f + 1e-12 for p, f in zip(part.mmwave_sinr, full.mmwave_sinr))
            assert part.measured_at <= full.measured_at


def test_trace_agrees_with_sweeps(scenario):
    sc = scenario.with_(episode_duration=0.5, channel=ChannelParams(
        tx_power_gnb_dbm=scenario.channel.tx_power_gnb_dbm, measurement_noise_db=0.0))
    pos = mobility_trace(sc, rng_stream(0, "mobility"))
    state = ChannelState.draw(sc, rng_stream(0, "shadowing"))
    tr = build_trace(pos, sc, state)
    d = sc.beamforming.sweep_delay()
    assert np.allclose(tr.sweep_delay, d)
    assert np.allclose(np.diff(tr.sweep_start), d)
    for k in range(0, len(tr.sweep_start), 5):
        step = int(round(tr.sweep_start[k] / sc.sim_step))
        crt = run_sweep(pos[step], sc, state, now=tr.sweep_start[k])
        assert tr.crt_sinr[k + 1] == pytest.approx(crt.mmwave_sinr, abs=1e-9)
        assert tr.crt_measured_at[k + 1] == pytest.approx(crt.measured_at, abs=1e-12)
    # the table visible at step t was completed no later than t
    t = np.arange(tr.n_steps) * sc.sim_step
    assert np.all(tr.crt_measured_at[tr.visible_row] <= t + 1e-9)
    assert np.all(np.diff(tr.visible_row) >= 0)


def test_context_reduces_delay(scenario):
    sc = scenario.with_(episode_duration=1.0)
    pos = mobility_trace(sc, rng_stream(0, "mobility"))
    state = ChannelState.draw(sc, rng_stream(0, "shadowing"))
    full = build_trace(pos, sc, state, noise_rng=rng_stream(0, "measurement"))
    ctx = build_trace(pos, sc, state, rng_stream(0, "gps"), ContextParams(enabled=True),
                      rng_stream(0, "measurement"))
    assert ctx.sweep_delay.max() <= full.sweep_delay.min()
    assert ctx.sweep_delay.mean() < full.sweep_delay.mean()


# --------------------------------------------------------------- context

def test_context_sector_examples():
    east = (100.0, 0.0)
    assert context_sector(east, 0.0, (0.0, 0.0), 16, math.pi / 16) == [0, 15]
    assert context_sector(east, 0.0, (0.0, 0.0), 16, math.pi) == list(range(16))
    ten_deg = (100.0 * math.cos(math.radians(10)), 100.0 * math.sin(math.radians(10)))
    assert context_sector(ten_deg, 0.0, (0.0, 0.0), 16, 0.0) == [0]
    assert context_sector((1.0, 0.0), 5.0, (0.0, 0.0), 16, 0.0) == list(range(16))
    with pytest.raises(ValueError):
        context_sector(east, 0.0, (0.0, 0.0), 0, 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 2 * math.pi, exclude_max=True), st.floats(10.0, 200.0), st.floats(0.0, 8.0))
def test_context_sector_contains_true_beam(theta, dist, radius):
    ue = (dist * math.cos(theta), dist * math.sin(theta))
    sector = context_sector(ue, radius, (0.0, 0.0), 16, math.pi / 16)
    assert int(beam_of(theta, 16)) in sector


# ------------------------------------------------------ estimation error

def test_estimation_error_statistics():
    err = estimation_error(200_000, 2, 0.001, 1.5, 0.05, np.random.default_rng(0))
    assert err.shape == (200_000, 2)
    assert np.std(err) == pytest.approx(1.5, rel=0.1)
    lag = 50
    rho = np.corrcoef(err[:-lag, 0], err[lag:, 0])[0, 1]
    assert rho == pytest.approx(math.exp(-1.0), abs=0.1)


def test_trace_needs_noise_stream(scenario):
    sc = scenario.with_(episode_duration=0.1)
    pos = mobility_trace(sc, rng_stream(0, "mobility"))
    with pytest.raises(ValueError, match="noise_rng"):
        build_trace(pos, sc, ChannelState.draw(sc, rng_stream(0, "shadowing")))


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(measurement_noise_db=-1.0)
    with pytest.raises(ValueError):
        ChannelParams(measurement_noise_corr_s=0.0)
