import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vanetsim.kinematics import (
    LS_CAP, MotionState, advance, distance_at, link_expiration_time, link_stability, normalize_heading,
)

coord = st.floats(-2000, 2000)
speed = st.floats(0, 40)
heading = st.floats(-10, 10)
states = st.builds(MotionState, coord, coord, speed, heading)


def test_motion_state_validation():
    assert MotionState(0, 0, 1, -math.pi / 2).heading == pytest.approx(1.5 * math.pi)
    assert 0.0 <= normalize_heading(-1e-18) < 2 * math.pi
    for bad in [dict(x=math.nan, y=0), dict(x=0, y=0, speed=-1), dict(x=0, y=0, heading=math.inf)]:
        with pytest.raises(ValueError):
            MotionState(**bad)


def test_advance_examples():
    assert advance(MotionState(0, 0, 0, 1.234), 5).position == (0, 0)
    assert advance(MotionState(0, 0, 10, 0), 2).position == pytest.approx((20, 0))
    s = advance(MotionState(3, -1, 10, math.pi / 4), 2)
    # independent trig: cos(pi/4) = sin(pi/4) = sqrt(2)/2
    h = math.sqrt(2) / 2
    assert (s.x, s.y) == pytest.approx((3 + 20 * h, -1 + 20 * h), abs=1e-12)
    assert (s.x, s.y) == pytest.approx((17.142, 13.142), abs=1e-3)
    with pytest.raises(ValueError):
        advance(s, -1)


def test_advance_matches_euler():
    s = MotionState(3, -1, 10, math.pi / 4)
    dt, x, y = 1e-4, 3.0, -1.0
    vx, vy = s.velocity
    for _ in range(20000):
        x += vx * dt
        y += vy * dt
    end = advance(s, 2)
    assert math.hypot(end.x - x, end.y - y) < 1e-6


def test_distance_examples():
    assert distance_at(MotionState(0, 0), MotionState(100, 0), 7) == pytest.approx(100)
    assert distance_at(MotionState(0, 0, 10, 0), MotionState(100, 0), 5) == pytest.approx(50)


def test_link_stability_examples():
    a = MotionState(0, 0)
    assert link_stability(a, MotionState(250, 0), 0.5, 250) == pytest.approx(1.0)
    assert link_stability(a, MotionState(100, 0), 0.5, 250) == pytest.approx(2.5)
    # at D = D_floor = 1 the raw ratio is 250, so the cap must engage
    assert link_stability(a, MotionState(0, 0), 0.5, 250) == LS_CAP
    assert link_stability(a, MotionState(0.5, 0), 0.5, 250) == LS_CAP
    with pytest.raises(ValueError):
        link_stability(a, a, 0.5, 0)


def test_let_examples():
    assert link_expiration_time(MotionState(0, 0, 10, 0), MotionState(0, 0), 250) == pytest.approx(25)
    assert link_expiration_time(MotionState(0, 0, 7, 1), MotionState(100, 50, 7, 1), 250) == math.inf
    assert link_expiration_time(MotionState(0, 0), MotionState(200, 0, 25, 0), 250) == pytest.approx(2)
    with pytest.raises(ValueError):
        link_expiration_time(MotionState(0, 0), MotionState(300, 0), 250)


@settings(max_examples=200, deadline=None)
@given(states, st.floats(0, 50), st.floats(0, 50))
def test_advance_composes(s, t1, t2):
    a = advance(advance(s, t1), t2)
    b = advance(s, t1 + t2)
    scale = max(1.0, abs(b.x), abs(b.y))
    assert abs(a.x - b.x) <= 1e-9 * scale and abs(a.y - b.y) <= 1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(states, states, st.floats(0, 30))
def test_distance_symmetric_and_matches_positions(a, b, t):
    d = distance_at(a, b, t)
    assert d == pytest.approx(distance_at(b, a, t), rel=1e-12, abs=1e-9)
    pa, pb = advance(a, t), advance(b, t)
    assert d == pytest.approx(math.hypot(pa.x - pb.x, pa.y - pb.y), rel=1e-9, abs=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1000), st.floats(0, 1000))
def test_link_stability_monotone(d1, d2):
    a = MotionState(0, 0)
    lo, hi = sorted((d1, d2))
    assert link_stability(a, MotionState(lo, 0), 0, 250) >= link_stability(a, MotionState(hi, 0), 0, 250)


connected = st.tuples(st.floats(0, 249), st.floats(0, 2 * math.pi), speed, heading, speed, heading)


@settings(max_examples=100, deadline=None)
@given(connected)
def test_let_keeps_link_until_expiry(params):
    r, phi, va, ha, vb, hb = params
    a = MotionState(10, 20, va, ha)
    b = MotionState(10 + r * math.cos(phi), 20 + r * math.sin(phi), vb, hb)
    let = link_expiration_time(a, b, 250)
    if math.isfinite(let):
        assert distance_at(a, b, let) == pytest.approx(250, abs=1e-6)
        for t in np.linspace(0, let, 1000):
            assert distance_at(a, b, float(t)) <= 250 + 1e-6


@settings(max_examples=100, deadline=None)
@given(connected, st.floats(-500, 500), st.floats(-500, 500), st.floats(0, 2 * math.pi))
def test_frame_invariance(params, tx, ty, rot):
    r, phi, va, ha, vb, hb = params
    a = MotionState(10, 20, va, ha)
    b = MotionState(10 + r * math.cos(phi), 20 + r * math.sin(phi), vb, hb)

    def move(s):
        c, sn = math.cos(rot), math.sin(rot)
        return MotionState(c * s.x - sn * s.y + tx, sn * s.x + c * s.y + ty, s.speed, s.heading + rot)

    a2, b2 = move(a), move(b)
    assert distance_at(a2, b2, 3) == pytest.approx(distance_at(a, b, 3), abs=1e-6)
    assert link_stability(a2, b2, 0.5, 250) == pytest.approx(link_stability(a, b, 0.5, 250), abs=1e-6)
    l1, l2 = link_expiration_time(a, b, 250), link_expiration_time(a2, b2, 250)
    if math.isfinite(l1) and l1 < 1e6:
        assert l2 == pytest.approx(l1, rel=1e-6, abs=1e-6)
