import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfplanner.forces import (StalledWarning, apf_force, artificial_current, cf_force_closed_form,
                              cf_force_point, cf_force_total, k_vlc_gate, lyapunov,
                              magnetic_field, steering_force, vlc_force)
from cfplanner.simulator import SteeringTick
from cfplanner.world import CollisionError, Obstacle, PlannerParams, RobotState

Z = np.array([0.0, 0.0, 1.0])
vec = st.tuples(*[st.floats(-5, 5)] * 3).map(np.array)


def params(**kw):
    base = dict(k_cf=1.0, k_p=1.0, k_v=1.0, v_min=0.5, v_max=2.0, d_max=1.0, d_min=0.5,
                eps_min=0.1, xi=0.1)
    base.update(kw)
    return PlannerParams(**base)


def cross(a, b):
    # component formula, kept apart from np.cross as an independent oracle
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def test_current_examples():
    assert np.allclose(artificial_current([1, 0, 0], Z), [0, -1, 0])
    assert np.allclose(artificial_current([0, 0, 2], Z), [0, 0, 0])
    assert np.allclose(artificial_current([3, 4, 0], Z), [0.8, -0.6, 0])
    with pytest.raises(CollisionError):
        artificial_current([0, 0, 1e-13], Z)


def test_field_example():
    # (0,-1,0) x (-1,0,0) = (0,0,-1)
    assert np.allclose(magnetic_field([1, 0, 0], [-1, 0, 0], Z, 1.0), [0, 0, -1])
    assert np.allclose(magnetic_field([0, 0, 3], [1, 0, 0], Z, 1.0), 0.0)


def test_field_scales_inverse_with_distance():
    b1 = magnetic_field([1, 0.5, 0], [-1, 0.2, 0], Z, 1.0)
    b2 = magnetic_field([2, 1.0, 0], [-1, 0.2, 0], Z, 1.0)
    assert np.allclose(b2, b1 / 2)


def test_field_stalls_quietly():
    with pytest.warns(StalledWarning):
        assert np.all(magnetic_field([1, 0, 0], [1e-12, 0, 0], Z, 1.0) == 0)


def test_point_force_examples():
    f = cf_force_point([1, 0, 0], [-1, 0, 0], Z, 1.0, 2.0)
    assert np.allclose(f, [0, -1, 0])
    assert f @ np.array([-1, 0, 0]) == 0.0
    assert np.all(cf_force_point([1.01, 0, 0], [-1, 0, 0], Z, 1.0, 1.0) == 0)
    g = cf_force_point([0.7, 0.2, 0], [-1, 0.3, 0], -Z, 1.0, 2.0)
    assert np.array_equal(g, -cf_force_point([0.7, 0.2, 0], [-1, 0.3, 0], Z, 1.0, 2.0))


def test_point_force_matches_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = np.r_[rng.normal(size=2), 0.0]
        v = np.r_[rng.normal(size=2), 0.0]
        b = Z * rng.choice([-1.0, 1.0])
        k = rng.uniform(0.1, 3.0)
        assert np.allclose(cf_force_point(x, v, b, k, 1e9), cf_force_closed_form(x, v, b, k),
                           rtol=1e-12, atol=1e-12)


def test_point_force_matches_triple_product_oracle():
    rng = np.random.default_rng(4)
    for _ in range(200):
        d, v, b = rng.normal(size=(3, 3))
        b /= np.linalg.norm(b)
        k = rng.uniform(0.1, 3.0)
        vh = v / np.linalg.norm(v)
        expect = cross(vh, (k / np.linalg.norm(d)) * cross(cross(d / np.linalg.norm(d), b), vh))
        assert np.allclose(cf_force_point(d, v, b, k, 1e9), expect, rtol=1e-12, atol=1e-14)


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec, st.floats(0.01, 10))
def test_force_orthogonal_to_velocity(d, v, b, k):
    if np.linalg.norm(d) < 1e-3 or np.linalg.norm(v) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    b = b / np.linalg.norm(b)
    f = cf_force_point(d, v, b, k, 1e9)
    assert abs(f @ v) <= 1e-12 * (1 + np.linalg.norm(f) * np.linalg.norm(v))


def test_superposition():
    p = params(d_max=2.0)
    state = RobotState([0, 0, 0], [1, 0, 0])
    obs = [Obstacle(0, [[1, 0.5, 0]], Z), Obstacle(1, [[1, -0.5, 0]], Z)]
    total = cf_force_total(state, obs, p).f_cf
    parts = sum(cf_force_point(state.position - o.points[0], state.velocity, o.b, 1.0, 2.0)
                for o in obs)
    assert np.allclose(total, parts)
    one = cf_force_total(state, obs[:1], p).f_cf
    assert np.array_equal(one, cf_force_point(state.position - obs[0].points[0], state.velocity,
                                              Z, 1.0, 2.0))
    far = cf_force_total(RobotState([10, 0, 0], [1, 0, 0]), obs, p).f_cf
    assert np.all(far == 0)


def test_vlc_examples():
    assert np.allclose(vlc_force(RobotState([1, 1, 0], [0, 0, 0]), [1, 1, 0], 1, 1, 2), 0)
    assert np.allclose(vlc_force(RobotState([0, 0, 0], [0, 0, 0]), [1, 0, 0], 1, 1, 2), [1, 0, 0])
    # v_d = (10,0,0), nu = 0.2
    assert np.allclose(vlc_force(RobotState([0, 0, 0], [0, 1, 0]), [10, 0, 0], 1, 1, 2), [2, -1, 0])


def test_gate_examples():
    s = RobotState([0, 0, 0], [0.25, 0, 0])
    f = np.array([-4.0, 0, 0])       # v . f = -1
    assert k_vlc_gate(RobotState([0, 0, 0], [1, 0, 0]), [5, 0, 0], [1, 0, 0], 0.5, 0.1) == 1
    assert k_vlc_gate(s, [0.2, 0, 0], f, 0.5, 0.1) == 0     # distance 2 xi
    assert k_vlc_gate(s, [0.05, 0, 0], f, 0.5, 0.1) == 1    # distance xi / 2


def test_steering_composition():
    p = params()
    free = steering_force(RobotState([0, 0, 0], [0, 0, 0]), [], [3, 0, 0], p)
    assert free.k_vlc == 1 and np.allclose(free.f_total, free.f_vlc)
    st_ = RobotState([0, 0, 0], [0.3, 0.4, 0])
    obs = [Obstacle(0, [[0.5, 0.1, 0]], Z)]
    near_goal = steering_force(st_, obs, [0.05, 0, 0], p)
    assert near_goal.k_vlc == 1
    assert np.allclose(near_goal.f_total, near_goal.f_cf + near_goal.f_vlc)


def test_steering_matches_independent_parts():
    rng = np.random.default_rng(5)
    p = params(d_max=1.5)
    obs = [Obstacle(i, rng.uniform(-1, 1, (20, 3)) * [1, 1, 0], Z * (-1) ** i) for i in range(3)]
    goal = np.array([4.0, 1.0, 0.0])
    for _ in range(50):
        x = np.r_[rng.uniform(-1.5, 1.5, 2), 0]
        v = np.r_[rng.normal(size=2), 0]
        out = steering_force(RobotState(x, v), obs, goal, p)
        f_cf = sum(cf_force_point(x - q, v, o.b, p.k_cf, p.d_max) for o in obs for q in o.points)
        v_d = p.k_p / p.k_v * (goal - x)
        f_vlc = -p.k_v * (v - min(1.0, p.v_max / np.linalg.norm(v_d)) * v_d)
        off = v @ f_vlc <= 0 and np.linalg.norm(v) <= p.v_min and np.linalg.norm(goal - x) > p.xi
        assert np.allclose(out.f_total, f_cf + (0 if off else 1) * f_vlc, atol=1e-12)


def test_compiled_route_matches_reference():
    rng = np.random.default_rng(6)
    p = params(d_max=0.8, k_vlc_scale=0.7)
    obs = [Obstacle(i, np.c_[rng.uniform(-1, 1, (200, 2)), np.zeros(200)], Z * (-1) ** i)
           for i in range(4)]
    goal = [3.0, -1.0, 0.0]
    tick = SteeringTick(obs, goal, p)
    for _ in range(200):
        x = np.r_[rng.uniform(-1.2, 1.2, 2), 0]
        v = np.r_[rng.normal(size=2), 0]
        ref = steering_force(RobotState(x, v), obs, goal, p)
        f, gate = tick(x, v)
        assert gate == ref.k_vlc
        assert np.allclose(f, ref.f_total, rtol=1e-12, atol=1e-12)


def test_apf_far_is_pure_attraction():
    p = params()
    s = RobotState([0, 0, 0], [0.1, 0, 0])
    obs = [Obstacle(0, [[5, 5, 0]], Z)]
    assert np.array_equal(apf_force(s, obs, [3, 0, 0], p, 1.0, 0.5), vlc_force(s, [3, 0, 0], 1, 1, 2))


def test_lyapunov_at_goal_rest_is_zero():
    p = params()
    assert lyapunov(RobotState([1, 2, 0], [0, 0, 0]), [1, 2, 0], p) == 0.0
    assert lyapunov(RobotState([0, 0, 0], [1, 0, 0]), [0, 0, 0], p) == pytest.approx(0.5)
    assert math.isfinite(lyapunov(RobotState([100, 0, 0], [0, 0, 0]), [0, 0, 0], p))
