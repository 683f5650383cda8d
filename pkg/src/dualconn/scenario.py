"""Urban geometry, UE mobility, clocking and the scenario JSON schema.

Scenario files use units in key names (``_m``, ``_s``, ``_mps``, ``_db``,
``_dbm``, ``_hz``, ``_ghz``). Every block except the geometry is optional
and falls back to the defaults of the corresponding dataclass.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import BfArchitecture, BfKind, ChannelParams
from .dc_core import HandoverParams
from .geometry import Rect, los_many

# Waypoint legs keep this clearance from building walls so rounding in the
# kinematics can never put the UE inside a building.
WAYPOINT_CLEARANCE_M = 0.5
_MAX_WAYPOINT_DRAWS = 10_000


class ScenarioError(ValueError):
    """Scenario file could not be parsed or violates an invariant."""


# ------------------------------------------------------------------ RNG

def rng_stream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Independent generator for one concern (``"mobility"``, ``"shadowing"``...).

    Streams are keyed by name, so drawing more from one never shifts another.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(name.encode()), *[int(k) for k in keys]]
    return np.random.default_rng(np.random.SeedSequence(entropy))


# --------------------------------------------------------------- config

@dataclass(frozen=True)
class MobilityParams:
    model: str = "random_waypoint"  # or "waypoints"
    path: tuple[tuple[float, float], ...] = ()
    loop: bool = True


@dataclass(frozen=True)
class ContextParams:
    enabled: bool = False
    gps_error_radius_m: float = 5.0
    margin_rad: float | None = None  # None: half a gNB beamwidth

    def margin_for(self, n_gnb_dirs: int) -> float:
        return math.pi / n_gnb_dirs if self.margin_rad is None else self.margin_rad


@dataclass(frozen=True)
class ScenarioConfig:
    area_width: float
    area_height: float
    enb_position: tuple[float, float]
    gnb_positions: tuple[tuple[float, float], ...]
    buildings: tuple[Rect, ...]
    ue_count: int = 1
    ue_speed: float = 5.0
    sim_step: float = 0.001
    episode_duration: float = 10.0
    decision_window: float = 0.1
    seed: int = 0
    mobility: MobilityParams = field(default_factory=MobilityParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    beamforming: BfArchitecture = field(default_factory=BfArchitecture)
    handover: HandoverParams = field(default_factory=HandoverParams)
    context: ContextParams = field(default_factory=ContextParams)

    @property
    def n_gnbs(self) -> int:
        return len(self.gnb_positions)

    @property
    def n_steps(self) -> int:
        return int(round(self.episode_duration / self.sim_step))

    @property
    def steps_per_window(self) -> int:
        return int(round(self.decision_window / self.sim_step))

    @property
    def n_windows(self) -> int:
        return self.n_steps // self.steps_per_window

    def inside(self, p) -> bool:
        return 0.0 <= p[0] <= self.area_width and 0.0 <= p[1] <= self.area_height

    def validate(self) -> "ScenarioConfig":
        def fail(msg):
            raise ScenarioError(msg)

        if self.area_width <= 0 or self.area_height <= 0:
            fail("area dimensions must be > 0")
        if len(self.gnb_positions) < 2:
            fail(f"M_T >= 2 violated: {len(self.gnb_positions)} gNB(s) configured")
        if self.ue_count != 1:
            fail("ue_count must be 1: episodes simulate a single dual-connected UE")
        if not self.sim_step > 0:
            fail("sim_step must be > 0")
        for name, val in (("episode_duration", self.episode_duration), ("decision_window", self.decision_window)):
            ratio = val / self.sim_step
            if val <= 0 or abs(ratio - round(ratio)) > 1e-6:
                fail(f"{name} must be a positive integer multiple of sim_step")
        if self.n_steps % self.steps_per_window:
            fail("episode_duration must be an integer multiple of decision_window")
        if self.ue_speed < 0:
            fail("ue_speed must be >= 0")
        named = [("eNB", self.enb_position)] + [(f"gNB {i}", p) for i, p in enumerate(self.gnb_positions)]
        for label, p in named:
            if not self.inside(p):
                fail(f"{label} position {tuple(p)} lies outside the area")
            for b, rect in enumerate(self.buildings):
                if rect.contains_closed(p):
                    fail(f"building {b} contains {label} position {tuple(p)}")
        if self.mobility.model not in ("random_waypoint", "waypoints"):
            fail(f"unknown mobility model {self.mobility.model!r}")
        if self.mobility.model == "waypoints":
            path = self.mobility.path
            if len(path) < 1:
                fail("waypoint mobility needs a non-empty path_m")
            for p in path:
                if not self.inside(p) or any(r.contains_open(p) for r in self.buildings):
                    fail(f"waypoint {tuple(p)} is outside the area or inside a building")
            legs = list(zip(path, path[1:] + (path[:1] if self.mobility.loop else ())))
            for a, b in legs:
                if not bool(los_many(a, b, self.buildings)):
                    fail(f"waypoint leg {tuple(a)} -> {tuple(b)} crosses a building")
        h = self.handover
        if not (h.k_o >= 2 and h.k_ttt >= 2 and h.o_min < h.o_max and h.ttt_min < h.ttt_max):
            fail("action grid needs k >= 2 and min < max on both axes")
        if h.ttt_min < self.sim_step:
            fail("ttt_min must be at least one sim_step")
        return self

    def with_(self, **changes) -> "ScenarioConfig":
        from dataclasses import replace

        return replace(self, **changes)


def _pt(v, what):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ScenarioError(f"{what} must be a 2-element [x, y] list")
    return (float(v[0]), float(v[1]))


def _block(cls, raw: dict, mapping: dict, what: str):
    unknown = set(raw) - set(mapping)
    if unknown:
        raise ScenarioError(f"unknown keys in {what}: {sorted(unknown)}")
    try:
        return cls(**{mapping[k]: v for k, v in raw.items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid {what}: {exc}") from exc


_CHANNEL_KEYS = {
    "mmwave_carrier_ghz": "mmwave_carrier_ghz",
    "lte_carrier_ghz": "lte_carrier_ghz",
    "tx_power_gnb_dbm": "tx_power_gnb_dbm",
    "tx_power_enb_dbm": "tx_power_enb_dbm",
    "noise_figure_db": "noise_figure_db",
    "bandwidth_mmwave_hz": "bandwidth_mmwave_hz",
    "bandwidth_lte_hz": "bandwidth_lte_hz",
    "shadowing_sigma_los_db": "shadowing_sigma_los_db",
    "shadowing_sigma_nlos_db": "shadowing_sigma_nlos_db",
    "shadowing_decorrelation_m": "shadowing_decorrelation_m",
    "misalignment_loss_db": "misalignment_loss_db",
    "measurement_noise_db": "measurement_noise_db",
    "measurement_noise_corr_s": "measurement_noise_corr_s",
}
_BF_KEYS = {
    "kind": "kind",
    "n_gnb_dirs": "n_gnb_dirs",
    "n_ue_dirs": "n_ue_dirs",
    "srs_period_s": "srs_period",
    "table1_compat": "table1_compat",
}
_HANDOVER_KEYS = {
    "hysteresis_db": "hysteresis_db",
    "outage_return_hysteresis_db": "return_hysteresis_db",
    "rat_switch_delay_s": "rat_switch_delay",
    "pingpong_window_s": "pingpong_window",
    "link_failure_sinr_db": "link_failure_sinr_db",
    "outage_min_db": "o_min",
    "outage_max_db": "o_max",
    "outage_levels": "k_o",
    "ttt_min_s": "ttt_min",
    "ttt_max_s": "ttt_max",
    "ttt_levels": "k_ttt",
}
_CONTEXT_KEYS = {
    "enabled": "enabled",
    "gps_error_radius_m": "gps_error_radius_m",
    "margin_rad": "margin_rad",
}


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {
        "area_width_m", "area_height_m", "enb_position_m", "gnb_positions_m", "buildings_m",
        "ue_count", "ue_speed_mps", "sim_step_s", "episode_duration_s", "decision_window_s",
        "seed", "mobility", "channel", "beamforming", "handover", "context", "description",
    }
    unknown = set(raw) - known
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        buildings = []
        for b in raw.get("buildings_m", []):
            if len(b) != 4:
                raise ScenarioError("each building is [x_min, y_min, x_max, y_max]")
            buildings.append(Rect(*map(float, b)))
        mob_raw = dict(raw.get("mobility", {}))
        mobility = MobilityParams(
            model=mob_raw.pop("model", "random_waypoint"),
            path=tuple(_pt(p, "waypoint") for p in mob_raw.pop("path_m", [])),
            loop=bool(mob_raw.pop("loop", True)),
        )
        if mob_raw:
            raise ScenarioError(f"unknown keys in mobility: {sorted(mob_raw)}")
        bf_raw = dict(raw.get("beamforming", {}))
        if "kind" in bf_raw:
            try:
                bf_raw["kind"] = BfKind(bf_raw["kind"])
            except ValueError:
                raise ScenarioError(
                    f"unknown beamforming kind {bf_raw['kind']!r}; expected one of "
                    + ", ".join(k.value for k in BfKind)
                ) from None
        cfg = ScenarioConfig(
            area_width=float(raw["area_width_m"]),
            area_height=float(raw["area_height_m"]),
            enb_position=_pt(raw["enb_position_m"], "enb_position_m"),
            gnb_positions=tuple(_pt(p, "gnb position") for p in raw["gnb_positions_m"]),
            buildings=tuple(buildings),
            ue_count=int(raw.get("ue_count", 1)),
            ue_speed=float(raw.get("ue_speed_mps", 5.0)),
            sim_step=float(raw.get("sim_step_s", 0.001)),
            episode_duration=float(raw.get("episode_duration_s", 10.0)),
            decision_window=float(raw.get("decision_window_s", 0.1)),
            seed=int(raw.get("seed", 0)),
            mobility=mobility,
            channel=_block(ChannelParams, raw.get("channel", {}), _CHANNEL_KEYS, "channel"),
            beamforming=_block(BfArchitecture, bf_raw, _BF_KEYS, "beamforming"),
            handover=_block(HandoverParams, raw.get("handover", {}), _HANDOVER_KEYS, "handover"),
            context=_block(ContextParams, raw.get("context", {}), _CONTEXT_KEYS, "context"),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc
    return cfg.validate()


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    inv = lambda keys: {v: k for k, v in keys.items()}  # noqa: E731
    ch, bf, ho, ctx = (asdict(cfg.channel), asdict(cfg.beamforming), asdict(cfg.handover), asdict(cfg.context))
    bf["kind"] = cfg.beamforming.kind.value
    out = {
        "area_width_m": cfg.area_width,
        "area_height_m": cfg.area_height,
        "enb_position_m": list(cfg.enb_position),
        "gnb_positions_m": [list(p) for p in cfg.gnb_positions],
        "buildings_m": [r.as_list() for r in cfg.buildings],
        "ue_count": cfg.ue_count,
        "ue_speed_mps": cfg.ue_speed,
        "sim_step_s": cfg.sim_step,
        "episode_duration_s": cfg.episode_duration,
        "decision_window_s": cfg.decision_window,
        "seed": cfg.seed,
        "mobility": {"model": cfg.mobility.model, "path_m": [list(p) for p in cfg.mobility.path], "loop": cfg.mobility.loop},
        "channel": {inv(_CHANNEL_KEYS)[k]: v for k, v in ch.items()},
        "beamforming": {inv(_BF_KEYS)[k]: v for k, v in bf.items()},
        "handover": {inv(_HANDOVER_KEYS)[k]: v for k, v in ho.items()},
        "context": {inv(_CONTEXT_KEYS)[k]: v for k, v in ctx.items()},
    }
    return out


def load_scenario(path) -> ScenarioConfig:
    """Parse and validate a scenario JSON file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"malformed scenario JSON {path}: {exc}") from exc
    return scenario_from_dict(raw)


def default_scenario_path() -> Path:
    return Path(str(resources.files("dualconn") / "data" / "default_scenario.json"))


def default_scenario() -> ScenarioConfig:
    return load_scenario(default_scenario_path())


# ------------------------------------------------------------- mobility

@dataclass
class UeState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    waypoint: tuple[float, float]
    leg: int = 0  # index into a scripted path


def _clear_path(a, b, cfg: ScenarioConfig) -> bool:
    padded = [r.inflated(WAYPOINT_CLEARANCE_M) for r in cfg.buildings]
    return bool(los_many(a, b, padded))


def _draw_waypoint(pos, cfg: ScenarioConfig, rng) -> tuple[float, float]:
    for _ in range(_MAX_WAYPOINT_DRAWS):
        w = (float(rng.uniform(0.0, cfg.area_width)), float(rng.uniform(0.0, cfg.area_height)))
        if w != tuple(pos) and _clear_path(pos, w, cfg):
            return w
    raise RuntimeError(f"no reachable waypoint from {tuple(pos)}")


def _heading(pos, wp, speed):
    dx, dy = wp[0] - pos[0], wp[1] - pos[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return (0.0, 0.0)
    return (speed * dx / d, speed * dy / d)


def _next_target(ue: UeState, cfg: ScenarioConfig, rng) -> tuple[tuple[float, float], int]:
    if cfg.mobility.model == "waypoints":
        path = cfg.mobility.path
        leg = ue.leg + 1
        if leg >= len(path):
            if not cfg.mobility.loop:
                return ue.position, ue.leg
            leg = 0
        return tuple(path[leg]), leg
    return _draw_waypoint(ue.position, cfg, rng), ue.leg


def initial_ue(cfg: ScenarioConfig, rng) -> UeState:
    if cfg.mobility.model == "waypoints":
        path = cfg.mobility.path
        start = tuple(path[0])
        if len(path) == 1:
            return UeState(start, (0.0, 0.0), start, 0)
        return UeState(start, _heading(start, path[1], cfg.ue_speed), tuple(path[1]), 1)
    padded = [r.inflated(WAYPOINT_CLEARANCE_M) for r in cfg.buildings]
    for _ in range(_MAX_WAYPOINT_DRAWS):
        p = (float(rng.uniform(0.0, cfg.area_width)), float(rng.uniform(0.0, cfg.area_height)))
        if not any(r.contains_closed(p) for r in padded):
            break
    else:
        raise RuntimeError("could not place the UE outside the buildings")
    wp = _draw_waypoint(p, cfg, rng)
    return UeState(p, _heading(p, wp, cfg.ue_speed), wp, 0)


def step_mobility(ue: UeState, cfg: ScenarioConfig, rng) -> UeState:
    """Advance the UE by one ``sim_step`` of constant-speed waypoint motion."""
    travel = cfg.ue_speed * cfg.sim_step
    if travel == 0.0:
        return UeState(ue.position, (0.0, 0.0), ue.waypoint, ue.leg)
    px, py = ue.position
    wx, wy = ue.waypoint
    if math.hypot(wx - px, wy - py) <= travel:
        arrived = UeState((wx, wy), ue.velocity, ue.waypoint, ue.leg)
        wp, leg = _next_target(arrived, cfg, rng)
        return UeState((wx, wy), _heading((wx, wy), wp, cfg.ue_speed), wp, leg)
    vx, vy = ue.velocity
    return UeState((px + vx * cfg.sim_step, py + vy * cfg.sim_step), ue.velocity, ue.waypoint, ue.leg)


def mobility_trace(cfg: ScenarioConfig, rng, n_steps: int | None = None) -> np.ndarray:
    """(n_steps, 2) UE positions; row 0 is the initial position."""
    n = cfg.n_steps if n_steps is None else n_steps
    ue = initial_ue(cfg, rng)
    out = np.empty((n, 2))
    for k in range(n):
        out[k] = ue.position
        ue = step_mobility(ue, cfg, rng)
    return out
