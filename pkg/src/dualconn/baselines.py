"""Fixed-TTT and Dynamic-TTT reference controllers."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .dc_core import ActionGrid, HandoverAction, snap_index


@dataclass(frozen=True)
class BaselineConfig:
    outage_db: float = -4.0
    ttt_s: float = 0.100
    delta_low_db: float = 0.0
    delta_high_db: float = 8.0

    def __post_init__(self):
        if not self.delta_high_db > self.delta_low_db:
            raise ValueError("delta_high_db must exceed delta_low_db")

    def to_dict(self) -> dict:
        return asdict(self)


class OffGridWarning(UserWarning):
    pass


def snap_outage(grid: ActionGrid, value: float) -> int:
    """Nearest outage level, ties toward the higher (more conservative) level."""
    return snap_index(value, grid.outage_levels, "up")


def snap_ttt(grid: ActionGrid, value: float) -> int:
    """Nearest TTT level, ties toward the shorter (faster) one."""
    return snap_index(value, grid.ttt_levels, "down")


def snap_action(grid: ActionGrid, outage_db: float, ttt_s: float, warn: bool = True) -> HandoverAction:
    i = snap_outage(grid, outage_db)
    j = snap_ttt(grid, ttt_s)
    act = grid[grid.index(i, j)]
    if warn:
        off = []
        if not np.isclose(act.outage_threshold, outage_db, rtol=0, atol=1e-9):
            off.append(f"outage {outage_db} dB -> {act.outage_threshold} dB")
        if not np.isclose(act.ttt, ttt_s, rtol=0, atol=1e-12):
            off.append(f"TTT {ttt_s} s -> {act.ttt} s")
        if off:
            warnings.warn("off-grid baseline setting snapped: " + ", ".join(off), OffGridWarning, stacklevel=3)
    return act


def fixed_ttt_policy(cfg: BaselineConfig, grid: ActionGrid) -> HandoverAction:
    """The configured (outage, TTT) pair, snapped to the grid."""
    return snap_action(grid, cfg.outage_db, cfg.ttt_s)


def dynamic_ttt_raw(delta_db: float, cfg: BaselineConfig, ttt_min: float, ttt_max: float) -> float:
    frac = (delta_db - cfg.delta_low_db) / (cfg.delta_high_db - cfg.delta_low_db)
    return float(np.clip(ttt_max - (ttt_max - ttt_min) * frac, ttt_min, ttt_max))


def dynamic_ttt_policy(crt, cfg: BaselineConfig, grid: ActionGrid, serving: int) -> HandoverAction:
    """Shorter TTT the more the best candidate beats the serving gNB.

    The outage threshold stays at the configured value.
    """
    sinr = list(crt.mmwave_sinr)
    others = [v for k, v in enumerate(sinr) if k != serving]
    delta = max(others) - sinr[serving]
    ttt = dynamic_ttt_raw(delta, cfg, grid.ttt_levels[0], grid.ttt_levels[-1])
    i = snap_outage(grid, cfg.outage_db)
    return grid[grid.index(i, snap_ttt(grid, ttt))]
