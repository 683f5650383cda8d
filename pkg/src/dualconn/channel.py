"""SINR model, beam-sweep measurement delay and the Complete Report Table.

Propagation is UMi street-canyon pathloss for the gNBs and the macro
128.1 + 37.6 log10(d_km) law for the eNB, plus a frozen log-normal shadowing
field per episode. Beams are idealised sectors: a transceiver with ``n``
directions has ``10*log10(n)`` dBi towards the sector containing the peer and
``misalignment_loss_db`` less everywhere else.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import ndimage, signal

from .geometry import bearing, los_many

TWO_PI = 2.0 * math.pi
LTE = -1  # cell id of the eNB / LTE fallback link

# Ratio between the Hybrid-Analog delay printed in the reference table
# (16.8 ms) and the value Eq.-style evaluation gives (12.8 ms).
_TABLE1_HYBRID_RATIO = Fraction(168, 128)


class BfKind(str, enum.Enum):
    ANALOG_ANALOG = "analog-analog"
    HYBRID_ANALOG = "hybrid-analog"
    DIGITAL_ANALOG = "digital-analog"


@dataclass(frozen=True)
class BfArchitecture:
    """gNB/UE beamforming capability; ``l_factor`` follows from ``kind``."""

    kind: BfKind = BfKind.ANALOG_ANALOG
    n_gnb_dirs: int = 16
    n_ue_dirs: int = 8
    srs_period: float = 200e-6
    table1_compat: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", BfKind(self.kind))
        if self.n_gnb_dirs < 1 or self.n_ue_dirs < 1:
            raise ValueError("direction counts must be >= 1")
        if not self.srs_period > 0:
            raise ValueError("srs_period must be > 0")

    @property
    def l_factor(self) -> int:
        if self.kind is BfKind.ANALOG_ANALOG:
            return 1
        if self.kind is BfKind.HYBRID_ANALOG:
            return 2
        return self.n_gnb_dirs

    def sweep_delay(self, n_gnb_swept: int | None = None) -> float:
        """Delay of one sweep over ``n_gnb_swept`` gNB directions (default: all).

        ``l_factor`` direction pairs are measured per SRS period; it is capped
        at the number of pairs swept, so a sweep never takes less than one period.
        """
        n = self.n_gnb_dirs if n_gnb_swept is None else int(n_gnb_swept)
        lf = min(self.l_factor, n * self.n_ue_dirs)
        scale = _TABLE1_HYBRID_RATIO if (self.table1_compat and self.kind is BfKind.HYBRID_ANALOG) else 1
        return _exact_delay(n, self.n_ue_dirs, self.srs_period, lf, scale)


def _exact_delay(n_gnb, n_ue, srs_period, l_factor, scale=1) -> float:
    # Rational evaluation so tabulated values come out bit-exact.
    t = Fraction(repr(float(srs_period)))
    return float(Fraction(int(n_gnb) * int(n_ue)) * t * scale / int(l_factor))


def compute_sweep_delay(n_gnb_dirs: int, n_ue_dirs: int, srs_period: float, l_factor: int) -> float:
    """Sweep delay D = N_gNB * N_UE * T_per / L in seconds."""
    if l_factor == 0:
        raise ZeroDivisionError("l_factor must be >= 1")
    if n_gnb_dirs < 1 or n_ue_dirs < 1 or l_factor < 1:
        raise ValueError("direction counts and l_factor must be >= 1")
    if not srs_period > 0:
        raise ValueError("srs_period must be > 0")
    return _exact_delay(n_gnb_dirs, n_ue_dirs, srs_period, l_factor)


@dataclass(frozen=True)
class ChannelParams:
    mmwave_carrier_ghz: float = 28.0
    lte_carrier_ghz: float = 2.1
    tx_power_gnb_dbm: float = 30.0
    tx_power_enb_dbm: float = 46.0
    noise_figure_db: float = 7.0
    bandwidth_mmwave_hz: float = 400e6
    bandwidth_lte_hz: float = 20e6
    shadowing_sigma_los_db: float = 4.0
    shadowing_sigma_nlos_db: float = 7.82
    shadowing_decorrelation_m: float = 10.0
    misalignment_loss_db: float = 10.0
    measurement_noise_db: float = 0.0  # std of the SINR estimation error
    measurement_noise_corr_s: float = 0.05  # its correlation time

    def __post_init__(self):
        for name in ("tx_power_gnb_dbm", "tx_power_enb_dbm", "noise_figure_db"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.shadowing_sigma_los_db < 0 or self.shadowing_sigma_nlos_db < 0:
            raise ValueError("shadowing sigmas must be >= 0")
        if self.measurement_noise_db < 0:
            raise ValueError("measurement_noise_db must be >= 0")
        if self.measurement_noise_corr_s <= 0:
            raise ValueError("measurement_noise_corr_s must be > 0")
        if self.bandwidth_mmwave_hz <= 0 or self.bandwidth_lte_hz <= 0:
            raise ValueError("bandwidths must be > 0")
        if self.shadowing_decorrelation_m <= 0:
            raise ValueError("shadowing_decorrelation_m must be > 0")

    def noise_dbm(self, bandwidth_hz: float) -> float:
        return -174.0 + 10.0 * math.log10(bandwidth_hz) + self.noise_figure_db


def bf_gain_per_side(n_dirs: int) -> float:
    return 10.0 * math.log10(n_dirs)


def pathloss_mmwave(distance, los, carrier_ghz: float = 28.0):
    """UMi street-canyon pathloss in dB; distances below 1 m are clamped."""
    d = np.maximum(np.asarray(distance, dtype=float), 1.0)
    slope = np.where(los, 21.0, 31.9)
    out = 32.4 + slope * np.log10(d) + 20.0 * math.log10(carrier_ghz)
    return float(out) if out.ndim == 0 else out


def pathloss_lte(distance):
    """Macro-cell pathloss in dB; distances below 10 m are clamped."""
    d = np.maximum(np.asarray(distance, dtype=float), 10.0)
    out = 128.1 + 37.6 * np.log10(d / 1000.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- beams

def beam_centers(n: int) -> np.ndarray:
    """Beam k covers [k, k+1) * 2*pi/n; its center is half a beam further."""
    return (np.arange(n) + 0.5) * (TWO_PI / n)


def beam_of(angle, n: int):
    """Index of the beam whose sector contains ``angle``."""
    idx = np.floor(np.mod(angle, TWO_PI) / (TWO_PI / n)).astype(np.int64)
    return np.minimum(idx, n - 1)


def _angdiff(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def context_sector(ue_gps, error_radius: float, gnb_position, full_dirs: int, margin: float) -> list[int]:
    """gNB beam indices worth sweeping given a GPS fix of the UE.

    Keeps every beam whose center lies within ``margin`` plus the bearing
    uncertainty of an ``error_radius`` disc around the fix. Never empty.
    """
    if full_dirs < 1:
        raise ValueError("full_dirs must be >= 1")
    gx, gy = float(gnb_position[0]), float(gnb_position[1])
    dx, dy = float(ue_gps[0]) - gx, float(ue_gps[1]) - gy
    dist = math.hypot(dx, dy)
    if error_radius >= dist:
        spread = math.pi
    else:
        spread = math.atan2(error_radius, math.sqrt(dist * dist - error_radius * error_radius))
    half = margin + spread
    if half >= math.pi:
        return list(range(full_dirs))
    theta = math.atan2(dy, dx) % TWO_PI
    diff = _angdiff(beam_centers(full_dirs), theta)
    keep = np.flatnonzero(diff <= half + 1e-12)
    if keep.size == 0:
        keep = np.array([int(np.argmin(diff))])
    return [int(k) for k in keep]


# ------------------------------------------------------------ shadowing

@dataclass
class ShadowingField:
    """Frozen, spatially correlated unit-variance Gaussian fields.

    One field per transmitter (gNBs first, the eNB last), sampled on a grid
    and bilinearly interpolated, so the same position always gets the same
    value within an episode.
    """

    fields: np.ndarray  # (n_tx, nx, ny)
    spacing: float

    @classmethod
    def generate(cls, n_tx, width, height, decorrelation_m, rng) -> "ShadowingField":
        spacing = decorrelation_m / 5.0
        nx = int(math.ceil(width / spacing)) + 1
        ny = int(math.ceil(height / spacing)) + 1
        # Gaussian smoothing gives correlation exp(-r^2 / (4 s^2)); 1/e at r = 2 s.
        sigma_cells = decorrelation_m / 2.0 / spacing
        delta = np.zeros((nx, ny))
        delta[nx // 2, ny // 2] = 1.0
        kernel = ndimage.gaussian_filter(delta, sigma_cells, mode="wrap")
        norm = math.sqrt(float(np.sum(kernel * kernel)))
        noise = rng.standard_normal((n_tx, nx, ny))
        out = np.empty_like(noise)
        for k in range(n_tx):
            out[k] = ndimage.gaussian_filter(noise[k], sigma_cells, mode="wrap") / norm
        return cls(out, spacing)

    @classmethod
    def zeros(cls, n_tx) -> "ShadowingField":
        return cls(np.zeros((n_tx, 2, 2)), 1.0)

    def sample(self, tx: int, positions) -> np.ndarray:
        p = np.atleast_2d(np.asarray(positions, dtype=float))
        coords = np.vstack([p[:, 0] / self.spacing, p[:, 1] / self.spacing])
        return ndimage.map_coordinates(self.fields[tx], coords, order=1, mode="nearest")


@dataclass
class ChannelState:
    """Per-episode frozen channel randomness."""

    shadowing: ShadowingField
    background_beams: np.ndarray  # gNB beam each gNB points at its other users

    @classmethod
    def draw(cls, scenario, rng) -> "ChannelState":
        m = len(scenario.gnb_positions)
        ch = scenario.channel
        if ch.shadowing_sigma_los_db == 0 and ch.shadowing_sigma_nlos_db == 0:
            shadow = ShadowingField.zeros(m + 1)
        else:
            shadow = ShadowingField.generate(
                m + 1, scenario.area_width, scenario.area_height, ch.shadowing_decorrelation_m, rng
            )
        beams = rng.integers(0, scenario.beamforming.n_gnb_dirs, size=m)
        return cls(shadow, beams)


# ----------------------------------------------------------------- SINR

@dataclass
class _LinkBudget:
    """Per-position quantities shared by every SINR evaluation."""

    rx_wo_gains: np.ndarray  # (T, M) dBm before any beam gain
    aligned_gnb_beam: np.ndarray  # (T, M) gNB beam that points at the UE
    ue_beam_towards: np.ndarray  # (T, M) UE beam that points at each gNB
    background_gain: np.ndarray  # (T, M) gain of each gNB's background beam towards the UE
    lte_sinr: np.ndarray  # (T,)


def _link_budget(positions, scenario, state: ChannelState) -> _LinkBudget:
    ch = scenario.channel
    bf = scenario.beamforming
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    gnbs = np.asarray(scenario.gnb_positions, dtype=float)
    m = gnbs.shape[0]
    rel = pos[:, None, :]
    dist = np.hypot(rel[..., 0] - gnbs[None, :, 0], rel[..., 1] - gnbs[None, :, 1])
    los = los_many(gnbs[None, :, :], rel, scenario.buildings)
    shadow = np.empty_like(dist)
    for j in range(m):
        sig = np.where(los[:, j], ch.shadowing_sigma_los_db, ch.shadowing_sigma_nlos_db)
        shadow[:, j] = sig * state.shadowing.sample(j, pos)
    pl = pathloss_mmwave(dist, los, ch.mmwave_carrier_ghz)
    rx = ch.tx_power_gnb_dbm - pl - shadow
    aligned = beam_of(bearing(gnbs[None, :, :], rel), bf.n_gnb_dirs)
    ue_beam = beam_of(bearing(rel, gnbs[None, :, :]), bf.n_ue_dirs)
    g_max = bf_gain_per_side(bf.n_gnb_dirs)
    bg = np.where(aligned == state.background_beams[None, :], g_max, g_max - ch.misalignment_loss_db)

    enb = np.asarray(scenario.enb_position, dtype=float)
    d_lte = np.hypot(pos[:, 0] - enb[0], pos[:, 1] - enb[1])
    los_lte = los_many(enb, pos, scenario.buildings)
    sig_lte = np.where(los_lte, ch.shadowing_sigma_los_db, ch.shadowing_sigma_nlos_db)
    rx_lte = ch.tx_power_enb_dbm - pathloss_lte(d_lte) - sig_lte * state.shadowing.sample(m, pos)
    lte_sinr = rx_lte - ch.noise_dbm(ch.bandwidth_lte_hz)
    return _LinkBudget(rx, aligned, ue_beam, bg, np.asarray(lte_sinr, dtype=float))


def _ue_side_gains(lb: _LinkBudget, scenario) -> np.ndarray:
    """(T, N_UE, M) UE receive gain of each UE beam towards each gNB."""
    bf = scenario.beamforming
    g = bf_gain_per_side(bf.n_ue_dirs)
    beams = np.arange(bf.n_ue_dirs)[None, :, None]
    return np.where(lb.ue_beam_towards[:, None, :] == beams, g, g - scenario.channel.misalignment_loss_db)


def _sinr_wo_gnb_gain(lb: _LinkBudget, scenario) -> np.ndarray:
    """(T, N_UE, M) SINR of each UE beam towards gNB i, excluding gNB i's beam gain."""
    ch = scenario.channel
    gu = _ue_side_gains(lb, scenario)
    interf_dbm = (lb.rx_wo_gains + lb.background_gain)[:, None, :] + gu
    interf_mw = 10.0 ** (interf_dbm / 10.0)
    m = interf_mw.shape[-1]
    others = interf_mw @ (1.0 - np.eye(m))
    noise_mw = 10.0 ** (ch.noise_dbm(ch.bandwidth_mmwave_hz) / 10.0)
    return lb.rx_wo_gains[:, None, :] + gu - 10.0 * np.log10(noise_mw + others)


def instantaneous_sinr(position, cell: int, scenario, state: ChannelState, beam_pair=None) -> float:
    """SINR in dB of ``cell`` (gNB index, or ``LTE``) at ``position``.

    ``beam_pair`` is (gNB beam, UE beam); by default the best pair is used.
    Interference comes from the other gNBs' background beams.
    """
    lb = _link_budget(position, scenario, state)
    if cell == LTE:
        return float(lb.lte_sinr[0])
    bf = scenario.beamforming
    s = _sinr_wo_gnb_gain(lb, scenario)[0, :, cell]
    g_max = bf_gain_per_side(bf.n_gnb_dirs)
    if beam_pair is None:
        return float(g_max + s.max())
    b_g, b_u = beam_pair
    g_g = g_max if b_g == lb.aligned_gnb_beam[0, cell] else g_max - scenario.channel.misalignment_loss_db
    return float(g_g + s[b_u])


@dataclass
class CompleteReportTable:
    lte_sinr: float
    mmwave_sinr: list[float]
    best_beam_dir: list[tuple[int, int]]
    measured_at: float

    def best_gnb(self, exclude: int | None = None) -> int:
        vals = list(self.mmwave_sinr)
        if exclude is not None:
            vals[exclude] = -math.inf
        return int(np.argmax(vals))


def run_sweep(position, scenario, state: ChannelState, now: float, sectors=None) -> CompleteReportTable:
    """Sweep every (gNB beam, UE beam) pair and report each gNB's best SINR.

    ``sectors`` optionally restricts the gNB beams swept per gNB. The table
    is available ``now + D`` where D uses the swept direction counts.
    """
    bf = scenario.beamforming
    ch = scenario.channel
    lb = _link_budget(position, scenario, state)
    s = _sinr_wo_gnb_gain(lb, scenario)[0]  # (N_UE, M)
    m = s.shape[1]
    g_max = bf_gain_per_side(bf.n_gnb_dirs)
    sinrs, best, counts = [], [], []
    for i in range(m):
        beams = range(bf.n_gnb_dirs) if sectors is None else sectors[i]
        best_val, best_pair = -math.inf, (-1, -1)
        for b_g in beams:
            g_g = g_max if b_g == lb.aligned_gnb_beam[0, i] else g_max - ch.misalignment_loss_db
            for b_u in range(bf.n_ue_dirs):
                v = g_g + s[b_u, i]
                if v > best_val:
                    best_val, best_pair = v, (int(b_g), b_u)
        sinrs.append(float(best_val))
        best.append(best_pair)
        counts.append(len(beams))
    delay = max(bf.sweep_delay(n) for n in counts)
    return CompleteReportTable(float(lb.lte_sinr[0]), sinrs, best, now + delay)


# -------------------------------------------------------- episode trace

@dataclass
class ChannelTrace:
    """Everything the coordinator can observe over one episode.

    Row 0 of the CRT arrays is the attachment snapshot at t = 0; row k + 1 is
    sweep k. ``visible_row[t]`` is the CRT row the coordinator holds at step t.
    """

    sim_step: float
    positions: np.ndarray
    gt_sinr: np.ndarray  # (T, M) zero-delay best-beam SINR
    gt_lte: np.ndarray  # (T,)
    crt_sinr: np.ndarray  # (K + 1, M)
    crt_lte: np.ndarray  # (K + 1,)
    crt_measured_at: np.ndarray  # (K + 1,)
    sweep_start: np.ndarray  # (K,)
    sweep_delay: np.ndarray  # (K,)
    visible_row: np.ndarray  # (T,) int64
    extras: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.gt_sinr.shape[0]

    def crt_at(self, step: int) -> CompleteReportTable:
        row = int(self.visible_row[step])
        m = self.crt_sinr.shape[1]
        return CompleteReportTable(
            float(self.crt_lte[row]),
            [float(v) for v in self.crt_sinr[row]],
            [(-1, -1)] * m,
            float(self.crt_measured_at[row]),
        )


def estimation_error(n_steps, n_cells, dt, sigma, corr_time, rng) -> np.ndarray:
    """Stationary AR(1) error of std ``sigma`` and correlation time ``corr_time``."""
    rho = math.exp(-dt / corr_time)
    w = rng.standard_normal((n_steps, n_cells))
    w[1:] *= math.sqrt(1.0 - rho * rho)
    out = signal.lfilter([1.0], [1.0, -rho], w, axis=0)
    return sigma * out


def build_trace(positions, scenario, state: ChannelState, gps_rng=None, context=None,
                noise_rng=None) -> ChannelTrace:
    """Vectorised channel evaluation and back-to-back sweep schedule.

    ``context`` (a :class:`ContextParams` with ``enabled``) restricts each
    sweep to the GPS sector; ``gps_rng`` draws the GPS errors. With a
    non-zero ``measurement_noise_db`` each sweep's reported SINRs carry the
    value, at sweep start, of a per-gNB Gauss-Markov estimation error drawn
    from ``noise_rng``. The error process does not depend on the sweep rate, so
    architectures differ only in how stale their reports are.
    """
    dt = scenario.sim_step
    bf = scenario.beamforming
    ch = scenario.channel
    pos = np.asarray(positions, dtype=float)
    n = pos.shape[0]
    lb = _link_budget(pos, scenario, state)
    s_best = _sinr_wo_gnb_gain(lb, scenario).max(axis=1)  # (T, M)
    g_max = bf_gain_per_side(bf.n_gnb_dirs)
    gt = s_best + g_max
    horizon = n * dt
    gnbs = np.asarray(scenario.gnb_positions, dtype=float)
    m = gnbs.shape[0]

    use_ctx = context is not None and context.enabled
    if not use_ctx:
        d = bf.sweep_delay()
        n_sweeps = int(math.floor(horizon / d + 1e-9)) + 1
        starts = np.arange(n_sweeps) * d
        delays = np.full(n_sweeps, d)
        start_steps = np.minimum(np.floor(starts / dt + 1e-9).astype(np.int64), n - 1)
        crt = gt[start_steps]
    else:
        radius = context.gps_error_radius_m
        margin = context.margin_for(bf.n_gnb_dirs)
        u = gps_rng.random((n, 2))
        r = radius * np.sqrt(u[:, 0])
        phi = TWO_PI * u[:, 1]
        gps = pos + np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
        starts_l, delays_l, steps_l, gains_l = [], [], [], []
        t = 0.0
        k = 0
        while True:
            t = 0.0 if k == 0 else starts_l[-1] + delays_l[-1]
            if t >= horizon - 1e-12 and k > 0:
                break
            step = min(int(math.floor(t / dt + 1e-9)), n - 1)
            counts = []
            gain_row = np.empty(m)
            for i in range(m):
                sector = context_sector(gps[step], radius, gnbs[i], bf.n_gnb_dirs, margin)
                counts.append(len(sector))
                hit = int(lb.aligned_gnb_beam[step, i]) in sector
                gain_row[i] = g_max if hit else g_max - ch.misalignment_loss_db
            starts_l.append(t)
            delays_l.append(max(bf.sweep_delay(c) for c in counts))
            steps_l.append(step)
            gains_l.append(gain_row)
            k += 1
        starts = np.asarray(starts_l)
        delays = np.asarray(delays_l)
        start_steps = np.asarray(steps_l, dtype=np.int64)
        crt = s_best[start_steps] + np.asarray(gains_l)
        n_sweeps = len(starts_l)

    if ch.measurement_noise_db > 0:
        if noise_rng is None:
            raise ValueError("noise_rng is required when measurement_noise_db > 0")
        err = estimation_error(n, m, dt, ch.measurement_noise_db, ch.measurement_noise_corr_s, noise_rng)
        crt = crt + err[start_steps]

    completes = starts + delays
    complete_steps = np.ceil(completes / dt - 1e-9).astype(np.int64)
    visible = np.searchsorted(complete_steps, np.arange(n), side="right").astype(np.int64)
    crt_sinr = np.vstack([gt[:1], crt])
    crt_lte = np.concatenate([lb.lte_sinr[:1], lb.lte_sinr[start_steps]])
    measured = np.concatenate([[0.0], completes])
    return ChannelTrace(
        sim_step=dt,
        positions=pos,
        gt_sinr=np.ascontiguousarray(gt),
        gt_lte=np.ascontiguousarray(lb.lte_sinr),
        crt_sinr=np.ascontiguousarray(crt_sinr),
        crt_lte=crt_lte,
        crt_measured_at=measured,
        sweep_start=starts,
        sweep_delay=delays,
        visible_row=visible,
    )
