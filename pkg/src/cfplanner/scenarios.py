"""Constructed test worlds: single points, a U-trap, a nonconvex course, random worlds."""

from __future__ import annotations

import numpy as np

from .world import Obstacle, PlannerParams, RobotState, Scenario

Z = np.array([0.0, 0.0, 1.0])


def planar(*xy) -> np.ndarray:
    return np.array([xy[0], xy[1], 0.0])


def polyline(corners, spacing: float) -> np.ndarray:
    """Points along a planar polyline with roughly uniform spacing."""
    corners = np.asarray(corners, dtype=float)
    out = [corners[0]]
    for a, b in zip(corners[:-1], corners[1:]):
        n = max(int(np.ceil(np.linalg.norm(b - a) / spacing)), 1)
        for k in range(1, n + 1):
            out.append(a + (b - a) * k / n)
    pts = np.asarray(out)
    return np.column_stack([pts, np.zeros(len(pts))])


def arc(center, radius: float, a0: float, a1: float, spacing: float) -> np.ndarray:
    n = max(int(np.ceil(radius * abs(a1 - a0) / spacing)), 1) + 1
    a = np.linspace(a0, a1, n)
    return np.column_stack([center[0] + radius * np.cos(a), center[1] + radius * np.sin(a),
                            np.zeros(n)])


def course_params() -> PlannerParams:
    """Gains used by the constructed planar course (satisfy the c_max condition)."""
    return PlannerParams(k_cf=0.06, k_p=0.5, k_v=2.0, v_min=0.2, v_max=0.3, d_max=0.6,
                         d_min=0.1, eps_min=0.005, xi=0.15, k_vlc_scale=1.0)


def single_point(x0, v0, params: PlannerParams, b=Z, goal=(-10.0, 0.0, 0.0),
                 dt: float = 1e-3, horizon: float = 5.0) -> Scenario:
    return Scenario(RobotState(x0, v0), goal, (Obstacle(0, [[0.0, 0.0, 0.0]], b),), params,
                    dt=dt, horizon=horizon, planar=True)


def head_on(params: PlannerParams | None = None, offset: float = 0.05) -> Scenario:
    """Robot driving at a single point with a small lateral offset."""
    p = params or course_params()
    return Scenario(RobotState(planar(-2.0, offset), planar(p.v_max, 0.0)), planar(2.0, 0.0),
                    (Obstacle(0, [[0.0, 0.0, 0.0]], Z),), p, dt=1e-3, horizon=30.0)


def u_trap(params: PlannerParams | None = None, spacing: float = 0.05) -> Scenario:
    """A U-shaped cloud opening toward the robot with the goal behind it.

    A potential-field planner settles inside the cavity; the circular field
    steers around the rim.
    """
    p = params or course_params()
    pts = polyline([(0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (0.0, -1.0)], spacing)
    return Scenario(RobotState(planar(-2.0, 0.0), planar(p.v_max, 0.0)), planar(3.0, 0.0),
                    (Obstacle(0, pts, Z),), p, dt=1e-3, horizon=120.0)


def nonconvex_course(params: PlannerParams | None = None, spacing: float = 0.05) -> Scenario:
    """Planar course with three nonconvex clouds (a C, an L and a V shape)."""
    p = params or course_params()
    c_shape = arc((2.2, 0.1), 0.8, -np.pi / 2, np.pi / 2, spacing)  # cavity faces the start
    l_shape = polyline([(5.0, -1.4), (5.0, 0.4), (5.9, 0.4)], spacing)
    v_shape = polyline([(7.6, 1.3), (8.4, 0.0), (7.6, -1.3)], spacing)
    obstacles = (Obstacle(0, c_shape, Z), Obstacle(1, l_shape, -Z), Obstacle(2, v_shape, Z))
    return Scenario(RobotState(planar(0.0, 0.0), planar(p.v_max, 0.0)), planar(10.0, 0.0),
                    obstacles, p, dt=1e-3, horizon=120.0)


def sequential_points(n: int, params: PlannerParams, gap: float = 2.0) -> Scenario:
    """n single-point obstacles placed one after the other along +x."""
    obs = tuple(Obstacle(i, [[gap * (i + 1), 0.03 * (-1) ** i, 0.0]], Z) for i in range(n))
    return Scenario(RobotState(planar(0.0, 0.0), planar(params.v_max, 0.0)),
                    planar(gap * (n + 1), 0.0), obs, params, dt=1e-3,
                    horizon=4.0 * gap * (n + 1) / params.v_max)


def random_cf_scenario(rng: np.random.Generator, horizon: float = 5.0, dt: float = 1e-3) -> Scenario:
    """Random planar world for circular-field-only runs.

    One to three single points ahead of the robot, 1.5 to 2 m apart, random
    speed, gain from a dimensionless c = k_cf/|v|^2 in [0.05, 0.3]. The
    Euler speed drift grows like dt/(2|v|^2) times the integral of |F|^2, so
    the family is kept sparse enough for a drift of about dt per second.
    """
    speed = rng.uniform(0.5, 1.0)
    c = rng.uniform(0.05, 0.3)
    params = PlannerParams(k_cf=c * speed**2, k_p=1.0, k_v=1.0, v_min=0.5 * speed,
                           v_max=2.0 * speed, d_max=1.0, d_min=1.0, eps_min=0.3 * speed, xi=0.1)
    heading = rng.uniform(-np.pi, np.pi)
    u = np.array([np.cos(heading), np.sin(heading), 0.0])
    n = np.array([-u[1], u[0], 0.0])
    obstacles = []
    along = 0.0
    for i in range(int(rng.integers(1, 4))):
        along += rng.uniform(1.5, 2.0)
        p = along * u + rng.uniform(-0.5, 0.5) * n
        obstacles.append(Obstacle(i, [p], Z if rng.random() < 0.5 else -Z))
    return Scenario(RobotState(np.zeros(3), speed * u), 10.0 * u, tuple(obstacles), params,
                    dt=dt, horizon=horizon, planar=True)


def random_full_scenario(rng: np.random.Generator, spacing: float = 0.05, tries: int = 200) -> Scenario:
    """Random planar world for the full planner: three to five nonconvex clouds.

    Arcs and bent polylines scattered between the start and a goal 8 m
    away, each with a random field direction; course gains. Clouds stay
    more than d_max from the start, the goal and each other (a cloud that
    cannot be placed within `tries` draws is dropped).
    """
    p = course_params()
    obstacles = []
    n_obs = int(rng.integers(3, 6))
    for i in range(n_obs):
        for _ in range(tries):
            pts = _random_cloud(rng, i, n_obs, spacing)
            if all(_gap(pts, o.points) > p.d_max for o in obstacles):
                obstacles.append(Obstacle(len(obstacles), pts, Z if rng.random() < 0.5 else -Z))
                break
    heading = rng.uniform(-np.pi / 3, np.pi / 3)
    speed = rng.uniform(p.v_min, p.v_max)
    v0 = speed * np.array([np.cos(heading), np.sin(heading), 0.0])
    return Scenario(RobotState(np.zeros(3), v0), planar(8.0, 0.0), tuple(obstacles), p,
                    dt=1e-3, horizon=150.0)


def _random_cloud(rng, i, n_obs, spacing):
    cx, cy = 1.5 + 4.2 * (i + rng.uniform(0.0, 0.8)) / n_obs, rng.uniform(-1.5, 1.5)
    turn = rng.uniform(-np.pi, np.pi)
    if rng.random() < 0.5:
        r = rng.uniform(0.3, 0.7)
        return arc((cx, cy), r, turn, turn + rng.uniform(np.pi / 2, 1.5 * np.pi), spacing)
    a, b = rng.uniform(0.3, 0.8, 2)
    corners = [(cx + a * np.cos(turn), cy + a * np.sin(turn)), (cx, cy),
               (cx + b * np.cos(turn + 1.6), cy + b * np.sin(turn + 1.6))]
    return polyline(corners, spacing)


def _gap(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.min(np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)))
