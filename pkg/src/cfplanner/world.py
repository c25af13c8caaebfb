"""Domain types: robot state, obstacles, planner parameters, scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

DEDUP_TOL = 1e-9
B_NORM_TOL = 1e-12
START_CLEARANCE = 1e-6


class WorldError(ValueError):
    """Raised for malformed world descriptions."""


class CollisionError(ArithmeticError):
    """The robot sits on an obstacle point; the field is undefined there."""


def vec3(v) -> np.ndarray:
    """Return `v` as a finite, read-only float (3,) array."""
    a = np.array(v, dtype=float).reshape(-1)
    if a.shape != (3,):
        raise WorldError(f"expected 3 components, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise WorldError(f"non-finite vector {a}")
    a.setflags(write=False)
    return a


def dedupe_points(points: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    """Drop points lying within `tol` of an earlier point; order is kept."""
    keep = []
    for i, p in enumerate(points):
        if keep:
            d = np.linalg.norm(points[keep] - p, axis=1)
            if np.any(d <= tol):
                continue
        keep.append(i)
    return points[keep]


@dataclass(frozen=True)
class RobotState:
    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", vec3(self.position))
        object.__setattr__(self, "velocity", vec3(self.velocity))
        object.__setattr__(self, "time", float(self.time))


@dataclass(frozen=True)
class Obstacle:
    """A point cloud sharing one unit field vector `b`."""

    id: int
    points: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if pts.shape[0] == 0:
            raise WorldError(f"obstacle {self.id} has no points")
        if not np.all(np.isfinite(pts)):
            raise WorldError(f"obstacle {self.id} has non-finite points")
        pts = dedupe_points(pts)
        pts.setflags(write=False)
        b = vec3(self.b)
        if abs(np.linalg.norm(b) - 1.0) > B_NORM_TOL:
            raise WorldError(f"obstacle {self.id}: |b| = {np.linalg.norm(b)!r} is not 1")
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "b", b)

    def with_b(self, b) -> "Obstacle":
        return Obstacle(self.id, self.points, b)


@dataclass(frozen=True)
class PlannerParams:
    k_cf: float
    k_p: float
    k_v: float
    v_min: float
    v_max: float
    d_max: float
    d_min: float
    eps_min: float
    xi: float
    k_vlc_scale: float = 1.0

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not np.isfinite(value):
                raise WorldError(f"parameter {name} is not finite")
            object.__setattr__(self, name, float(value))

    @property
    def c_min(self) -> float:
        return self.k_cf / self.v_max**2

    @property
    def c_max(self) -> float:
        return self.k_cf / self.v_min**2


def c_max_limit(c_min: float) -> float:
    """Largest admissible c_max (exclusive) for a given c_min."""
    return (c_min**2 + 1.0) / c_min if c_min >= 1.0 else 2.0


@dataclass(frozen=True)
class ValidationReport:
    checks: dict
    c_min: float
    c_max: float
    c_max_limit: float

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.checks.items() if not v]


def validate_params(params: PlannerParams, v_bounds_active: bool = True) -> ValidationReport:
    """Advisory check of parameter constraints; never raises.

    With `v_bounds_active` False the speed band is not enforced by the
    attractive force, so the c_max condition is not evaluated.
    """
    p = params
    positive = p.k_cf > 0 and p.k_p > 0 and p.k_v > 0 and p.v_min > 0 and p.v_max > 0
    c_min = p.c_min if p.v_max > 0 else float("inf")
    c_max = p.c_max if p.v_min > 0 else float("inf")
    limit = c_max_limit(c_min) if c_min > 0 else float("inf")
    checks = {
        "gains_positive": bool(positive),
        "v_min_le_v_max": bool(0 < p.v_min <= p.v_max),
        "d_min_lt_d_max": bool(0 < p.d_min < p.d_max),
        "eps_min_positive": bool(p.eps_min > 0),
        "xi_positive": bool(p.xi > 0),
        "k_vlc_scale_nonnegative": bool(p.k_vlc_scale >= 0),
    }
    if v_bounds_active:
        checks["c_max_condition"] = bool(c_max < limit)
    return ValidationReport(checks, c_min, c_max, limit)


@dataclass(frozen=True)
class Scenario:
    start: RobotState
    goal: np.ndarray
    obstacles: tuple
    params: PlannerParams
    dt: float = 1e-3
    horizon: float = 10.0
    planar: bool = True
    seed: int = 0
    disturbance: dict | None = None
    apf: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "goal", vec3(self.goal))
        obs = tuple(sorted(self.obstacles, key=lambda o: o.id))
        ids = [o.id for o in obs]
        if len(set(ids)) != len(ids):
            raise WorldError("duplicate obstacle ids")
        object.__setattr__(self, "obstacles", obs)
        if not (self.dt > 0 and self.horizon > 0):
            raise WorldError("dt and horizon must be positive")
        for o in obs:
            if np.any(np.linalg.norm(o.points - self.start.position, axis=1) <= START_CLEARANCE):
                raise WorldError(f"start lies on a point of obstacle {o.id}")
        if self.planar:
            zs = [self.start.position[2], self.start.velocity[2], self.goal[2]]
            for o in obs:
                zs.extend(o.points[:, 2])
                if abs(abs(o.b[2]) - 1.0) > B_NORM_TOL:
                    raise WorldError(f"planar obstacle {o.id} needs b = (0,0,+-1)")
            if np.any(np.asarray(zs) != 0.0):
                raise WorldError("planar scenario has non-zero z components")

    def obstacle(self, oid: int) -> Obstacle:
        for o in self.obstacles:
            if o.id == oid:
                return o
        raise KeyError(oid)

    def with_b(self, assignment: dict) -> "Scenario":
        """Copy with the field vectors of some obstacles replaced."""
        obs = tuple(o.with_b(assignment[o.id]) if o.id in assignment else o
                    for o in self.obstacles)
        return replace(self, obstacles=obs)


class NearestPoint(NamedTuple):
    obstacle_id: int
    index: int
    distance: float


@dataclass(frozen=True)
class PackedPoints:
    """All obstacle points stacked in (obstacle id, point index) order."""

    points: np.ndarray      # (N, 3)
    b: np.ndarray           # (N, 3), field vector of the owning obstacle
    obstacle_id: np.ndarray  # (N,)
    obstacle_slot: np.ndarray  # (N,), position of the owner in the obstacle list
    index: np.ndarray       # (N,), index within the owner
    ids: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.points.shape[0]


def pack_points(obstacles: Sequence[Obstacle]) -> PackedPoints:
    obs = sorted(obstacles, key=lambda o: o.id)
    if not obs:
        z = np.zeros((0, 3))
        e = np.zeros(0, dtype=np.int64)
        return PackedPoints(z, z.copy(), e, e.copy(), e.copy(), ())
    pts = np.concatenate([o.points for o in obs])
    b = np.concatenate([np.broadcast_to(o.b, o.points.shape) for o in obs])
    oid = np.concatenate([np.full(len(o.points), o.id, dtype=np.int64) for o in obs])
    slot = np.concatenate([np.full(len(o.points), i, dtype=np.int64) for i, o in enumerate(obs)])
    idx = np.concatenate([np.arange(len(o.points), dtype=np.int64) for o in obs])
    return PackedPoints(np.ascontiguousarray(pts), np.ascontiguousarray(b), oid, slot, idx,
                        tuple(o.id for o in obs))


def nearest_obstacle_point(x, obstacles: Sequence[Obstacle]) -> NearestPoint | None:
    """Globally nearest obstacle point, ties going to the lowest (id, index).

    Returns None for an empty world.
    """
    packed = obstacles if isinstance(obstacles, PackedPoints) else pack_points(obstacles)
    if packed.n == 0:
        return None
    d = np.linalg.norm(packed.points - np.asarray(x, dtype=float), axis=1)
    i = int(np.argmin(d))  # first minimum: packing order is the tie rule
    return NearestPoint(int(packed.obstacle_id[i]), int(packed.index[i]), float(d[i]))
