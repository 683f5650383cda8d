"""Planar geometry: axis-aligned buildings and line-of-sight blockage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Clipped chords shorter than this (in segment parameter units) are treated as
# touching an edge or corner, which does not block.
_CHORD_EPS = 1e-12


@dataclass(frozen=True)
class Rect:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate building rectangle {self}")

    def contains_open(self, p) -> bool:
        return self.x_min < p[0] < self.x_max and self.y_min < p[1] < self.y_max

    def contains_closed(self, p) -> bool:
        return self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max

    def inflated(self, margin: float) -> "Rect":
        return Rect(self.x_min - margin, self.y_min - margin, self.x_max + margin, self.y_max + margin)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def _axis_interval(a, d, lo, hi):
    """Parameter interval where a + t*d lies in [lo, hi] along one axis.

    For d == 0 the coordinate must lie strictly inside (lo, hi); a segment that
    runs along an edge never enters the open interior.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t1 = (lo - a) / d
        t2 = (hi - a) / d
    t_lo = np.minimum(t1, t2)
    t_hi = np.maximum(t1, t2)
    flat = d == 0
    inside = (a > lo) & (a < hi)
    t_lo = np.where(flat, np.where(inside, -np.inf, np.inf), t_lo)
    t_hi = np.where(flat, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo, t_hi


def blocked_by(a, b, rect: Rect) -> np.ndarray:
    """True where segment a-b passes through the open interior of ``rect``.

    ``a`` and ``b`` broadcast against each other with a trailing axis of 2.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    tx_lo, tx_hi = _axis_interval(a[..., 0], d[..., 0], rect.x_min, rect.x_max)
    ty_lo, ty_hi = _axis_interval(a[..., 1], d[..., 1], rect.y_min, rect.y_max)
    t_in = np.maximum(np.maximum(tx_lo, ty_lo), 0.0)
    t_out = np.minimum(np.minimum(tx_hi, ty_hi), 1.0)
    zero_len = (d[..., 0] == 0) & (d[..., 1] == 0)
    # A zero-length segment is a point: blocked iff strictly inside.
    chord = t_out - t_in > _CHORD_EPS
    point_inside = (t_out >= t_in) & zero_len
    return np.where(zero_len, point_inside, chord)


def los_many(a, b, buildings) -> np.ndarray:
    """Vectorised :func:`is_los` over broadcast arrays of endpoints."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(a.shape, b.shape)[:-1]
    out = np.ones(shape, dtype=bool)
    for rect in buildings:
        out &= ~blocked_by(a, b, rect)
    return out


def is_los(a, b, buildings) -> bool:
    """True iff the segment a-b does not cross the interior of any building.

    Touching an edge or corner counts as line of sight.
    """
    return bool(los_many(a, b, buildings))


def bearing(src, dst) -> np.ndarray:
    """Angle of dst as seen from src, radians in [0, 2*pi)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    d = dst - src
    return np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
