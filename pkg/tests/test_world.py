import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfplanner.world import (Obstacle, PlannerParams, RobotState, Scenario, WorldError,
                             nearest_obstacle_point, pack_points, validate_params)

Z = [0.0, 0.0, 1.0]


def params(k_cf=1.0, v_min=1.0, v_max=1.0, **kw):
    base = dict(k_cf=k_cf, k_p=1.0, k_v=1.0, v_min=v_min, v_max=v_max, d_max=1.0, d_min=0.5,
                eps_min=0.1, xi=0.1)
    base.update(kw)
    return PlannerParams(**base)


@pytest.mark.parametrize("k_cf, v_min, v_max, ok", [
    (1.0, 1.0, 1.0, True),      # c_min = c_max = 1 < 2
    (1.0, 0.5, 1.0, False),     # c_max = 4 >= 2
    (2.0, 1.0, 1.0, True),      # c = 2 < (4 + 1) / 2
])
def test_c_max_condition_examples(k_cf, v_min, v_max, ok):
    rep = validate_params(params(k_cf, v_min, v_max))
    assert rep.checks["c_max_condition"] is ok
    assert rep.ok is ok


def test_validation_lists_every_failure():
    rep = validate_params(params(k_cf=-1.0, d_min=2.0, xi=0.0))
    assert {"gains_positive", "d_min_lt_d_max", "xi_positive"} <= set(rep.failures())


def test_validation_is_pure():
    p = params(1.0, 0.5, 1.0)
    assert validate_params(p) == validate_params(p)


def test_c_max_skipped_without_speed_band():
    assert "c_max_condition" not in validate_params(params(1.0, 0.5, 1.0), v_bounds_active=False).checks


def test_obstacle_rejects_bad_input():
    with pytest.raises(WorldError):
        Obstacle(0, np.zeros((0, 3)), Z)
    with pytest.raises(WorldError):
        Obstacle(0, [[0, 0, np.nan]], Z)
    with pytest.raises(WorldError):
        Obstacle(0, [[1, 0, 0]], [0, 0, 2])


def test_obstacle_dedupes_points():
    o = Obstacle(0, [[1, 0, 0], [1, 0, 1e-12], [2, 0, 0]], Z)
    assert len(o.points) == 2


def test_scenario_rejects_start_on_point_and_duplicate_ids():
    p = params()
    with pytest.raises(WorldError):
        Scenario(RobotState([0, 0, 0], [1, 0, 0]), [5, 0, 0], (Obstacle(0, [[0, 0, 0]], Z),), p)
    with pytest.raises(WorldError):
        Scenario(RobotState([0, 0, 0], [1, 0, 0]), [5, 0, 0],
                 (Obstacle(0, [[1, 0, 0]], Z), Obstacle(0, [[2, 0, 0]], Z)), p)


def test_planar_scenario_needs_vertical_b():
    with pytest.raises(WorldError):
        Scenario(RobotState([0, 0, 0], [1, 0, 0]), [5, 0, 0],
                 (Obstacle(0, [[1, 0, 0]], [1, 0, 0]),), params())


def test_nearest_examples():
    hit = nearest_obstacle_point([0, 0, 0], [Obstacle(0, [[1, 0, 0], [0, 2, 0]], Z)])
    assert (hit.obstacle_id, hit.index, hit.distance) == (0, 0, 1.0)
    tie = nearest_obstacle_point([0, 0, 0], [Obstacle(3, [[-1, 0, 0]], Z),
                                             Obstacle(1, [[1, 0, 0]], Z)])
    assert (tie.obstacle_id, tie.index) == (1, 0)
    assert nearest_obstacle_point([0, 0, 0], []) is None


def test_nearest_matches_linear_scan():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(100, 3))
    obs = [Obstacle(i, pts[20 * i:20 * (i + 1)], Z) for i in range(5)]
    for x in rng.normal(size=(50, 3)):
        best = min(((float(np.sqrt(np.sum((p - x) ** 2))), i, j)
                    for i, o in enumerate(obs) for j, p in enumerate(o.points)))
        hit = nearest_obstacle_point(x, obs)
        assert (hit.obstacle_id, hit.index) == (best[1], best[2])
        assert hit.distance == pytest.approx(best[0], rel=1e-15)


def test_pack_points_order():
    pk = pack_points([Obstacle(2, [[5, 0, 0]], Z), Obstacle(1, [[1, 0, 0], [2, 0, 0]], [0, 0, -1])])
    assert pk.ids == (1, 2)
    assert list(pk.obstacle_id) == [1, 1, 2]
    assert list(pk.index) == [0, 1, 0]
    assert pk.b[0, 2] == -1.0 and pk.b[2, 2] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[st.floats(-10, 10)] * 3), min_size=1, max_size=30),
       st.tuples(*[st.floats(-10, 10)] * 3))
def test_nearest_distance_is_minimal(points, x):
    o = Obstacle(0, points, Z)
    hit = nearest_obstacle_point(x, [o])
    d = np.linalg.norm(o.points - np.asarray(x), axis=1)
    assert hit.distance == pytest.approx(d.min(), abs=1e-12)
    assert hit.index == int(np.argmin(d))
