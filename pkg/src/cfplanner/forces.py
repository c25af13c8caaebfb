"""Force laws of the planner: circular field, velocity-limited attraction, gate.

These are plain numpy reference implementations. The simulator runs a
compiled copy of the same arithmetic (see `_kernels`), and the tests hold
the two against each other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .world import CollisionError, PackedPoints, PlannerParams, RobotState, pack_points

AT_POINT_TOL = 1e-12
STALL_SPEED = 1e-9


class StalledWarning(RuntimeWarning):
    """Speed too small to define a heading; the circular field is switched off."""


def artificial_current(d, b) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    n = np.linalg.norm(d)
    if n < AT_POINT_TOL:
        raise CollisionError("robot at obstacle point")
    return np.cross(d / n, b)


def magnetic_field(d, d_dot, b, k_cf: float) -> np.ndarray:
    d_dot = np.asarray(d_dot, dtype=float)
    s = np.linalg.norm(d_dot)
    c = artificial_current(d, b)
    if s < STALL_SPEED:
        warnings.warn("stalled: |d_dot| below threshold, field set to zero", StalledWarning)
        return np.zeros(3)
    return (k_cf / np.linalg.norm(d)) * np.cross(c, d_dot / s)


def cf_force_point(d, d_dot, b, k_cf: float, d_max: float) -> np.ndarray:
    if np.linalg.norm(d) > d_max:
        return np.zeros(3)
    B = magnetic_field(d, d_dot, b, k_cf)
    s = np.linalg.norm(d_dot)
    if s < STALL_SPEED:
        return np.zeros(3)
    return np.cross(np.asarray(d_dot, dtype=float) / s, B)


def cf_force_closed_form(x, x_dot, b, k_cf: float) -> np.ndarray:
    """Planar closed form k/(|v|^2 |x|^2) (v x b)(v . x), valid for b normal to the motion plane."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(x_dot, dtype=float)
    return k_cf / (v @ v * (x @ x)) * np.cross(v, b) * (v @ x)


@dataclass(frozen=True)
class ForceBreakdown:
    f_cf: np.ndarray
    f_vlc: np.ndarray
    k_vlc: int
    f_total: np.ndarray
    per_point: np.ndarray      # (N, 3), zero rows outside d_max
    point_ids: np.ndarray      # (N, 2) of (obstacle id, point index)
    stalled: bool = False


def _packed(obstacles) -> PackedPoints:
    return obstacles if isinstance(obstacles, PackedPoints) else pack_points(obstacles)


def cf_point_forces(x, v, packed: PackedPoints, k, d_max: float) -> tuple[np.ndarray, bool]:
    """Per-point circular-field forces for all packed points.

    `k` is a scalar or an (N,) array of per-point gains. Returns the (N, 3)
    force rows and the stalled flag.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    d = x - packed.points
    dn = np.sqrt(np.einsum("ij,ij->i", d, d))
    active = dn <= d_max
    out = np.zeros_like(d)
    if not np.any(active):
        return out, False
    if np.min(dn[active]) < AT_POINT_TOL:
        raise CollisionError("robot at obstacle point")
    s = np.linalg.norm(v)
    if s < STALL_SPEED:
        warnings.warn("stalled near obstacle, circular field set to zero", StalledWarning)
        return out, True
    vh = v / s
    da = d[active]
    dna = dn[active]
    cur = np.cross(da / dna[:, None], packed.b[active])
    kk = np.broadcast_to(np.asarray(k, dtype=float), dn.shape)[active]
    field = (kk / dna)[:, None] * np.cross(cur, vh)
    out[active] = np.cross(vh, field)
    return out, False


def point_gains(packed: PackedPoints, k_cf: float, k_override: dict | None = None) -> np.ndarray | float:
    """Per-point gain array, honoring per-obstacle overrides."""
    if not k_override:
        return k_cf
    k = np.full(packed.n, float(k_cf))
    for oid, val in k_override.items():
        k[packed.obstacle_id == oid] = val
    return k


def cf_force_total(state: RobotState, obstacles, params: PlannerParams,
                   k_override: dict | None = None) -> ForceBreakdown:
    """Superposed circular-field force; the attractive part is left at zero."""
    packed = _packed(obstacles)
    rows, stalled = cf_point_forces(state.position, state.velocity, packed,
                                    point_gains(packed, params.k_cf, k_override), params.d_max)
    f = rows.sum(axis=0)
    ids = np.stack([packed.obstacle_id, packed.index], axis=1)
    zero = np.zeros(3)
    return ForceBreakdown(f, zero, 1, f.copy(), rows, ids, stalled)


def vlc_force(state: RobotState, goal, k_p: float, k_v: float, v_max: float) -> np.ndarray:
    """Velocity-limited attraction -k_v (v - nu v_d) with v_d = (k_p/k_v)(x_g - x)."""
    v_d = (k_p / k_v) * (np.asarray(goal, dtype=float) - state.position)
    n = np.linalg.norm(v_d)
    nu = 1.0 if n == 0.0 else min(1.0, v_max / n)
    return -k_v * (state.velocity - nu * v_d)


def k_vlc_gate(state: RobotState, goal, f_vlc, v_min: float, xi: float) -> int:
    """0 when attraction would slow the robot below v_min away from the goal, else 1.

    A robot at rest keeps the gate on: it has no speed to lose, and with the
    gate off it could never start.
    """
    v = state.velocity
    off = (v @ np.asarray(f_vlc) <= 0.0
           and 0.0 < np.linalg.norm(v) <= v_min
           and np.linalg.norm(np.asarray(goal) - state.position) > xi)
    return 0 if off else 1


def steering_force(state: RobotState, obstacles, goal, params: PlannerParams,
                   k_override: dict | None = None) -> ForceBreakdown:
    cf = cf_force_total(state, obstacles, params, k_override)
    f_vlc = vlc_force(state, goal, params.k_p, params.k_v, params.v_max)
    gate = k_vlc_gate(state, goal, f_vlc, params.v_min, params.xi)
    total = cf.f_cf + params.k_vlc_scale * gate * f_vlc
    return ForceBreakdown(cf.f_cf, f_vlc, gate, total, cf.per_point, cf.point_ids, cf.stalled)


def apf_force(state: RobotState, obstacles, goal, params: PlannerParams,
              eta: float, rho0: float) -> np.ndarray:
    """Baseline potential field: attraction plus inverse-distance repulsion.

    Each point within `rho0` pushes with eta (1/rho - 1/rho0) / rho^2 along
    the unit vector from the point to the robot.
    """
    packed = _packed(obstacles)
    f = vlc_force(state, goal, params.k_p, params.k_v, params.v_max)
    if packed.n == 0:
        return f
    d = state.position - packed.points
    rho = np.linalg.norm(d, axis=1)
    m = rho <= rho0
    if np.any(m):
        if np.min(rho[m]) < AT_POINT_TOL:
            raise CollisionError("robot at obstacle point")
        r = rho[m]
        mag = eta * (1.0 / r - 1.0 / rho0) / r**2
        f = f + ((mag / r)[:, None] * d[m]).sum(axis=0)
    return f


def huber_potential(x, goal, k_p: float, k_v: float, v_max: float) -> float:
    """Attractive potential whose negative gradient is the clamped spring."""
    r = float(np.linalg.norm(np.asarray(x) - np.asarray(goal)))
    knee = k_v * v_max / k_p
    if r < knee:
        return 0.5 * k_p * r * r
    return k_v * v_max * r - (k_v * v_max) ** 2 / (2.0 * k_p)


def lyapunov(state: RobotState, goal, params: PlannerParams) -> float:
    v = state.velocity
    return 0.5 * float(v @ v) + huber_potential(state.position, goal, params.k_p, params.k_v, params.v_max)
