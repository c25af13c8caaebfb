"""Auxiliary (R, S) description of the motion relative to one obstacle point.

R = x . v measures approach (R < 0) or retreat, S = (x cross v) . b measures
whether the robot already circulates the way the field vector b asks for.
The collision ray is eps = S + c R = 0 with c = k_cf / |v|^2. This module
also holds the closed-form bounds used to check the avoidance guarantees.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .world import CollisionError

RAY_TOL_REL = 1e-9


class ICClass(enum.Enum):
    MovingAway = "moving_away"
    FollowingField = "following_field"
    CriticalOffRay = "critical_off_ray"
    CollisionRay = "collision_ray"


@dataclass(frozen=True)
class AuxState:
    R: float
    S: float
    c: float
    eps: float
    v_b: float
    v_norm: float

    @property
    def rho(self) -> float:
        return self.R * self.R + self.S * self.S


def sgn(a: float) -> float:
    """Sign with sgn(0) = +1."""
    return -1.0 if a < 0 else 1.0


def aux_state(x, x_dot, b, k_cf: float) -> AuxState:
    x = np.asarray(x, dtype=float)
    v = np.asarray(x_dot, dtype=float)
    xx = float(x @ x)
    if xx == 0.0:
        raise CollisionError("robot at obstacle point")
    vv = float(v @ v)
    R = float(x @ v)
    S = float(np.cross(x, v) @ np.asarray(b, dtype=float))
    c = k_cf / vv if vv > 0 else math.inf
    eps = S + c * R if vv > 0 else math.nan
    return AuxState(R, S, c, eps, 1.0 / xx, math.sqrt(vv))


def aux_from_rs(R: float, S: float, v_norm: float, k_cf: float) -> AuxState:
    """AuxState from planar (R, S); uses |x|^2 = (R^2 + S^2) / |v|^2."""
    rho = R * R + S * S
    c = k_cf / v_norm**2
    vb = v_norm**2 / rho if rho > 0 else math.inf
    return AuxState(R, S, c, S + c * R, vb, v_norm)


def default_ray_tol(R: float, S: float) -> float:
    return RAY_TOL_REL * math.hypot(R, S)


def classify(aux: AuxState, ray_tol: float | None = None) -> ICClass:
    R, S = aux.R, aux.S
    if R >= 0:
        return ICClass.MovingAway
    if S <= 0:
        return ICClass.FollowingField
    tol = default_ray_tol(R, S) if ray_tol is None else ray_tol
    if abs(aux.eps) <= tol:
        return ICClass.CollisionRay
    return ICClass.CriticalOffRay


def rs_derivatives(R: float, S: float, v_norm: float, k_cf: float,
                   x=None, z=None, b=None) -> tuple[float, float]:
    """(R', S') under the circular field, plus disturbance terms when z is given."""
    rho = R * R + S * S
    if rho == 0.0:
        raise CollisionError("R = S = 0: dynamics undefined at the obstacle point")
    dR = k_cf * R * S / rho + v_norm**2
    dS = -k_cf * R * R / rho
    if z is not None:
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        dR += float(x @ z)
        dS += float(np.cross(x, z) @ np.asarray(b, dtype=float))
    return dR, dS


def eps_derivative(R: float, S: float, k_cf: float, eps: float) -> float:
    return k_cf * S * eps / (R * R + S * S)


def speed_sq_rate(x_dot, z) -> float:
    """d/dt |v|^2 under a disturbance z (the field itself does no work)."""
    return 2.0 * float(np.asarray(x_dot) @ np.asarray(z))


def c_rate(c: float, x_dot, z) -> float:
    v = np.asarray(x_dot, dtype=float)
    return -2.0 * c * float(v @ np.asarray(z)) / float(v @ v)


def ray_s_rate(c: float, k_cf: float) -> float:
    """Constant S' along the collision ray."""
    return -k_cf / (1.0 + c * c)


def collision_time_on_ray(S0: float, c: float, k_cf: float) -> float:
    if not S0 > 0:
        raise ValueError("collision ray needs S0 > 0")
    return S0 * (1.0 + c * c) / k_cf


def adapt_kcf(aux: AuxState, k_cf: float, eps_min: float, distance: float, d_min: float) -> float:
    """Rescale the gain so that |eps| = eps_min near an obstacle.

    Only acts in the critical quadrant (R < 0, S > 0) within d_min. A
    negative result is the same as flipping b.
    """
    R, S = aux.R, aux.S
    if not (R < 0 and S > 0 and distance <= d_min):
        return k_cf
    eps = S + k_cf / aux.v_norm**2 * R
    if abs(eps) >= eps_min:
        return k_cf
    return k_cf - sgn(eps) * (eps_min - abs(eps)) * aux.v_norm**2 / abs(R)


def min_distance_bound(aux0: AuxState, v_norm: float, k_cf: float, disturbed: bool = False,
                       v_max: float | None = None, c_max: float | None = None) -> float:
    """Guaranteed distance while the motion stays in the critical quadrant."""
    cls = classify(aux0)
    if cls is ICClass.CollisionRay:
        return 0.0
    if cls is not ICClass.CriticalOffRay:
        raise ValueError(f"bound defined for the critical quadrant, got {cls.name}")
    e = abs(aux0.eps)
    if disturbed:
        return e / (2.0 * v_max * max(c_max, 1.0))
    if aux0.eps < 0:
        c = k_cf / v_norm**2
        return e / (c * v_norm)
    return e / v_norm


def phase_distance_bound(eps0: float, c: float, v_norm: float) -> float:
    """Uniform critical-quadrant bound |eps0| / (max(c, 1) |v|)."""
    return abs(eps0) / (max(c, 1.0) * v_norm)


def rs_ratio_lower_bound(c_min: float) -> float:
    """Lower bound of R S / (R^2 + S^2) on the safe side of the ray."""
    if c_min >= 1.0:
        return -c_min / (c_min * c_min + 1.0)
    return -0.5


def quadrant_exit_time_bound(R0: float, S0: float, k_cf: float, v_norm: float | None = None,
                             disturbed: bool = False, c_min: float | None = None,
                             c_max: float | None = None, v_min: float | None = None,
                             x0_norm: float | None = None) -> float:
    """Upper bound on the time to leave the current quadrant.

    Critical quadrant, undisturbed (needs v_norm):
      eps < 0: S0 (1 + c^2) / k;  eps > 0: -R0 (c + c^3) / k if c >= 1,
      else -2 R0 / k;  on the ray the exact collision time.
    Critical quadrant, disturbed (needs c_min, c_max): the halved-rate
    versions of the same three cases.
    Following the field (R < 0, S <= 0, needs v_min): -2 R0 / v_min^2, the
    sum of a far and a near phase; x0_norm splits it when given.
    """
    if R0 >= 0:
        return 0.0
    if S0 <= 0:
        if v_min is None:
            v_min = v_norm
        return -2.0 * R0 / v_min**2
    if not disturbed:
        c = k_cf / v_norm**2
        eps = S0 + c * R0
        if abs(eps) <= default_ray_tol(R0, S0):
            return collision_time_on_ray(S0, c, k_cf)
        if eps < 0:
            return S0 * (1.0 + c * c) / k_cf
        if c >= 1.0:
            return -R0 * (c + c**3) / k_cf
        return -2.0 * R0 / k_cf
    c0 = k_cf / v_norm**2 if v_norm is not None else c_max
    eps = S0 + c0 * R0
    if eps < 0:
        return 2.0 * S0 * (1.0 + c_max**2) / k_cf
    if c_min >= 1.0:
        den = c_min**2 - c_min * c_max + 1.0
        return -2.0 * R0 * c_max * (c_min**2 + 1.0) / (k_cf * den)
    return -4.0 * R0 * c_max / (k_cf * (2.0 - c_max))


def following_phase_times(R0: float, x0_norm: float, v_min: float) -> tuple[float, float]:
    """Far-phase and near-phase time limits for the following-field case."""
    t1 = -2.0 * x0_norm / v_min - 2.0 * R0 / v_min**2
    t2 = 2.0 * x0_norm / v_min
    return t1, t2


def disturbance_budget(case: ICClass, x0_norm: float, v_min: float, v_max: float,
                       c_min: float, c_max: float, k_cf: float, S0: float = 0.0,
                       R0: float = 0.0, eps0: float = 0.0, x_max: float | None = None) -> float:
    """Largest disturbance magnitude under which the per-class guarantees hold."""
    if case is ICClass.CollisionRay:
        return 0.0
    if case is ICClass.MovingAway:
        return v_min**2 / x_max
    x0 = x0_norm
    if case is ICClass.FollowingField:
        return min(k_cf * v_min**2 / (x0 * v_max**2),
                   v_min**2 / (2.0 * x0),
                   -v_min * S0 / (4.0 * x0**2))
    e = abs(eps0)
    if eps0 < 0:
        return min(k_cf / (2.0 * x0 * (1.0 + c_max**2)),
                   k_cf * e / (4.0 * x0**2 * v_max * (1.0 + 3.0 * c_max) * (1.0 + c_max**2)))
    if c_min >= 1.0:
        g = c_min**2 - c_min * c_max + 1.0
        return min(k_cf * g / (2.0 * x0 * c_max * (c_min**2 + 1.0)),
                   k_cf * e * g / (4.0 * x0**2 * v_max * c_max * (1.0 + c_min**2) * (1.0 + 3.0 * c_max)))
    return min(k_cf * (2.0 - c_max) / (4.0 * x0 * c_max),
               k_cf * e * (2.0 - c_max) / (8.0 * x0**2 * v_max * c_max * (1.0 + 3.0 * c_max)))


def following_barrier_bound(S0: float, v_norm: float, disturbed: bool = False,
                            v_max: float | None = None) -> float:
    """Ceiling on V_B while following the field: |v|^2/S0^2, or 4 v_max^2/S0^2 disturbed."""
    if disturbed:
        return 4.0 * v_max**2 / S0**2
    return v_norm**2 / S0**2


def uniform_barrier_bound(v_b0: float, v_min: float, v_max: float, c_tilde: float) -> float:
    """V_B ceiling 8 v_max^2 V_B(0) / (v_min^2 max(1, c~^2)) for |S0| >= c~|R0|.

    The max() form is known to be violated (it can fall below V_B(0)
    itself for c~ > 1); see `uniform_barrier_bound_min` for the form
    that follows from S0^2 + c~^2 R0^2 >= min(1, c~^2)(S0^2 + R0^2).
    """
    return v_b0 * 8.0 * v_max**2 / (v_min**2 * max(1.0, c_tilde**2))


def uniform_barrier_bound_min(v_b0: float, v_min: float, v_max: float, c_tilde: float) -> float:
    return v_b0 * 8.0 * v_max**2 / (v_min**2 * min(1.0, c_tilde**2))
