import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualconn.geometry import Rect, bearing, blocked_by, is_los, los_many

BOX = Rect(10.0, 10.0, 20.0, 20.0)


def brute_force_blocked(a, b, rect, n=20001):
    """Sample the segment densely and look for points strictly inside."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    p = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    inside = (p[:, 0] > rect.x_min) & (p[:, 0] < rect.x_max) & (p[:, 1] > rect.y_min) & (p[:, 1] < rect.y_max)
    return bool(inside.any())


def test_segment_outside_everything_is_los():
    assert is_los((0, 0), (5, 30), [BOX])


def test_segment_crossing_building_is_blocked():
    assert not is_los((0, 15), (30, 15), [BOX])


def test_tangent_segments_are_los():
    # along an edge, through a corner, and touching an edge from outside
    assert is_los((0, 10), (30, 10), [BOX])
    assert is_los((10, 0), (10, 30), [BOX])
    assert is_los((0, 0), (20, 20 - 20), [BOX])
    assert is_los((5, 25), (15, 15 + 15), [BOX])
    assert is_los((0, 20), (10, 30), [BOX])


def test_enumerated_cases_match_brute_force():
    coords = [0.0, 10.0, 15.0, 20.0, 30.0]
    pts = list(itertools.product(coords, coords))
    for a, b in itertools.combinations(pts, 2):
        if BOX.contains_open(a) or BOX.contains_open(b):
            continue
        assert is_los(a, b, [BOX]) == (not brute_force_blocked(a, b, BOX)), (a, b)


def test_endpoint_inside_is_blocked():
    assert not is_los((15, 15), (40, 40), [BOX])
    assert bool(blocked_by((15, 15), (15, 15), BOX))
    assert not bool(blocked_by((10, 15), (10, 15), BOX))


def test_los_many_broadcasts():
    a = np.array([[0.0, 15.0], [0.0, 5.0]])
    b = np.array([[30.0, 15.0], [30.0, 5.0]])
    assert los_many(a, b, [BOX]).tolist() == [False, True]
    assert los_many(a, b, []).tolist() == [True, True]


def test_degenerate_rect_rejected():
    with pytest.raises(ValueError):
        Rect(1.0, 1.0, 1.0, 2.0)


def test_bearing_quadrants():
    assert np.isclose(bearing((0, 0), (1, 0)), 0.0)
    assert np.isclose(bearing((0, 0), (0, 1)), np.pi / 2)
    assert np.isclose(bearing((0, 0), (0, -1)), 3 * np.pi / 2)


coord = st.floats(-50.0, 50.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(coord, coord, coord, coord)
def test_los_is_symmetric(ax, ay, bx, by):
    assert is_los((ax, ay), (bx, by), [BOX]) == is_los((bx, by), (ax, ay), [BOX])
