import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharedspace.interaction import (
    Conflict, InteractionClass, classify, count_active_interactions, detect_conflicts, in_heading_corridor,
    nearest_conflict, prediction_velocity,
)
from sharedspace.dynamics import Mode

from .helpers import make_user


def conflict(first, second, distance=5.0, ta=0.0, tb=0.0, ttca=1.0, dmin=0.5):
    return Conflict(first, second, distance, ta, tb, ttca, dmin)


def test_head_on_pedestrians():
    a = make_user("a", pos=(0, 0), vel=(1, 0))
    b = make_user("b", pos=(5, 0), vel=(-1, 0))
    cs = {(c.first, c.second): c for c in detect_conflicts([a, b])}
    assert set(cs) == {("a", "b"), ("b", "a")}
    c = cs[("a", "b")]
    assert c.distance == pytest.approx(4.4)
    assert c.time_to_closest_approach == pytest.approx(2.5)
    assert c.min_predicted_distance == pytest.approx(0.0)
    assert c.theta_alpha == 0.0 and c.theta_beta == pytest.approx(180.0)


def test_no_conflict_when_paths_stay_apart_or_out_of_view():
    a = make_user("a", pos=(0, 0), vel=(1, 0))
    b = make_user("b", pos=(0, 5), vel=(1, 0))
    assert detect_conflicts([a, b]) == []
    behind = make_user("c", pos=(-1.5, 0), vel=(-1, 0))
    pairs = {(c.first, c.second) for c in detect_conflicts([a, behind])}
    assert ("a", "c") not in pairs
    with pytest.raises(ValueError):
        detect_conflicts([a, b], horizon=0)
    assert detect_conflicts([a]) == []


def test_horizon_limits_the_look_ahead():
    a = make_user("a", pos=(0, 0), vel=(1, 0))
    b = make_user("b", pos=(20, 0), vel=(-1, 0))
    assert detect_conflicts([a, b], horizon=4) == []
    assert len(detect_conflicts([a, b], horizon=10)) == 2


def test_intended_velocity_prediction_counts_when_closer():
    car = make_user("c", "car", pos=(0, 0), vel=(0, 0), mode=Mode.stopping("p"))
    ped = make_user("p", pos=(6, 0.5), vel=(0, 1), dest=(6, 10))
    assert np.allclose(prediction_velocity(car, 0.05), [5, 0])
    assert np.allclose(prediction_velocity(ped, 0.05), [0, 1])
    users = [car, ped]
    plain = detect_conflicts(users)
    both = detect_conflicts(users, intended=[prediction_velocity(u, 0.05) for u in users])
    assert len(both) >= len(plain)
    assert any(c.first == "c" for c in both)


def closest_approach_oracle(a, b, horizon):
    rx, ry = b.position - a.position
    wx, wy = b.velocity - a.velocity
    ww = wx * wx + wy * wy
    t = 0.0 if ww <= 1e-12 else min(max(-(rx * wx + ry * wy) / ww, 0.0), horizon)
    return math.hypot(rx + t * wx, ry + t * wy)


xy = st.tuples(st.floats(-15, 15), st.floats(-15, 15))
vel = st.tuples(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(xy, vel), min_size=2, max_size=6))
def test_vectorised_detection_matches_pairwise_oracle(states):
    users = [make_user(f"u{k}", pos=p, vel=v, heading=np.array([1.0, 0.0])) for k, (p, v) in enumerate(states)]
    found = {(c.first, c.second): c for c in detect_conflicts(users)}
    for a in users:
        for b in users:
            if a is b:
                continue
            d = closest_approach_oracle(a, b, 4.0)
            r = b.position - a.position
            visible = r[0] >= -1e-12 or math.hypot(*r) < 1e-9
            expect = visible and d < 2.0 + 0.6
            if abs(d - 2.6) > 1e-9 and (abs(r[0]) > 1e-9):
                assert ((a.id, b.id) in found) == expect
            if (a.id, b.id) in found:
                assert found[(a.id, b.id)].min_predicted_distance == pytest.approx(d, abs=1e-9)


def test_heading_corridor():
    car = make_user("c", "car", pos=(0, 0), vel=(4, 0))
    assert in_heading_corridor(car, make_user("p", pos=(10, 3)), 3.0)
    assert not in_heading_corridor(car, make_user("p", pos=(10, 3.1)), 3.0)
    assert not in_heading_corridor(car, make_user("p", pos=(-1, 0)), 3.0)


def test_reactive_stopping_for_pedestrian_walking_ahead():
    car = make_user("c", "car", pos=(0, 0), vel=(4, 0))
    ped = make_user("p", pos=(10, 1), vel=(0, 1), dest=(10, 10))
    c = conflict("c", "p", ta=5.7)
    assert classify(c, car, ped) is InteractionClass.REACTIVE_STOPPING


def test_reactive_stopping_needs_pedestrian_close_or_moving_in_corridor():
    car = make_user("c", "car", pos=(0, 0), vel=(4, 0))
    halted = make_user("p", pos=(10, 1), vel=(0, 0), dest=(10, 10))
    assert classify(conflict("c", "p", ta=5.7, tb=270.0), car, halted) is not InteractionClass.REACTIVE_STOPPING
    assert classify(conflict("c", "p", distance=2.0, ta=5.7), car, halted) is InteractionClass.REACTIVE_STOPPING


def test_car_following_bands_are_inclusive():
    a = make_user("a", "car", pos=(0, 0), vel=(4, 0))
    b = make_user("b", "car", pos=(12, 0), vel=(3, 0))
    assert classify(conflict("a", "b", ta=10.0, tb=355.0), a, b) is InteractionClass.CAR_FOLLOWING
    assert classify(conflict("a", "b", ta=10.0, tb=5.1), a, b) is not InteractionClass.CAR_FOLLOWING


def test_courtesy_toward_crossing_car():
    a = make_user("a", "car", pos=(0, 0), vel=(4, 0))
    b = make_user("b", "car", pos=(12, -2), vel=(0, 2), dest=(12, 30))
    c = [c for c in detect_conflicts([a, b]) if c.first == "a"][0]
    assert 260 < c.theta_beta < 290
    assert classify(c, a, b) is InteractionClass.COURTESY
    assert classify(conflict("a", "b", ta=15, tb=100.0), a, b) is InteractionClass.COMPLEX_GAME


def test_game_and_none_classes():
    car = make_user("c", "car", pos=(0, 0), vel=(4, 0))
    ped = make_user("p", pos=(8, -8), vel=(0, 1.2), dest=(8, 10))
    assert classify(conflict("c", "p", ta=315.0, tb=135.0, ttca=1.5), car, ped) is InteractionClass.COMPLEX_GAME
    assert classify(conflict("c", "p", ta=315.0, tb=135.0, ttca=0.0), car, ped) is InteractionClass.NONE
    assert classify(conflict("p", "c", ta=225.0, tb=45.0), ped, car) is InteractionClass.COMPLEX_GAME


def test_nearest_and_counts():
    cs = [conflict("a", "b", distance=3.0), conflict("a", "c", distance=2.0), conflict("b", "a"),
          conflict("a", "d", distance=2.0, ttca=0.5)]
    assert nearest_conflict("a", cs).second == "d"
    assert nearest_conflict("z", cs) is None
    assert count_active_interactions("a", cs) == 3
    assert count_active_interactions("b", cs) == 1
