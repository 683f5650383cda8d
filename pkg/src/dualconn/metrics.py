"""Per-episode metric rows shared by every scheme."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields


class Scheme(str, enum.Enum):
    FIXED = "Fixed"
    DYNAMIC = "Dynamic"
    CDQL = "CDQL"
    HIDQL = "HiDQL"

    @classmethod
    def parse(cls, name: str) -> "Scheme":
        for s in cls:
            if s.value.lower() == str(name).lower():
                return s
        raise ValueError(f"unknown scheme {name!r}; expected one of {[s.value for s in cls]}")


@dataclass
class EpisodeMetrics:
    episode: int
    scheme: str
    bf_kind: str
    seed: int
    cumulative_reward: float
    mean_latency: float  # over handovers matched to a ground-truth change
    p95_latency: float
    handover_count: int
    pingpong_count: int
    flagged_count: int
    outage_fraction: float
    lte_fraction: float
    mean_sweep_delay: float

    @classmethod
    def from_summary(cls, summary: dict, episode: int, scheme: str, bf_kind: str, seed: int) -> "EpisodeMetrics":
        def get(key, default=math.nan):
            return summary.get(key, default)

        return cls(
            episode=int(episode), scheme=str(scheme), bf_kind=str(bf_kind), seed=int(seed),
            cumulative_reward=float(get("cumulative_reward")),
            mean_latency=float(get("mean_latency")),
            p95_latency=float(get("p95_latency")),
            handover_count=int(get("handover_count", 0)),
            pingpong_count=int(get("pingpong_count", 0)),
            flagged_count=int(get("flagged_count", 0)),
            outage_fraction=float(get("outage_fraction", 0.0)),
            lte_fraction=float(get("lte_fraction", 0.0)),
            mean_sweep_delay=float(get("mean_sweep_delay")),
        )

    @classmethod
    def columns(cls) -> list:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return [getattr(self, name) for name in self.columns()]
