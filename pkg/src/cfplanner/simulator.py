"""Fixed-step simulation of the point-mass robot and trajectory metrics."""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .world import PackedPoints, RobotState, Scenario, pack_points


class Termination(enum.Enum):
    Horizon = K.T_HORIZON
    GoalReached = K.T_GOAL
    Collision = K.T_COLLISION
    Stalled = K.T_STALLED
    Encounter = K.T_ENCOUNTER
    NonFinite = K.T_NONFINITE
    Escaped = K.T_ESCAPED
    QuadrantExit = K.T_EXIT


MODES = {"cf": K.MODE_CF, "full": K.MODE_FULL, "disturbed": K.MODE_DISTURBED, "apf": K.MODE_APF}
DIST_KINDS = {"none": K.DIST_NONE, "random": K.DIST_RANDOM, "random_mag": K.DIST_RANDOM_MAG,
              "adversarial": K.DIST_ADVERSARIAL}

COLLISION_RADIUS = 1e-3
STALL_SPEED = 1e-6
STALL_STEPS = 100


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class Disturbance:
    """Bounded extra force z with |z| <= z_max.

    kind: "random" (uniform direction, full magnitude), "random_mag"
    (uniform direction and magnitude) or "adversarial" (steepest push
    against the active guarantee). Random draws are held for `hold_steps`
    steps. With `speed_band` = (lo, hi), the part of z along v is dropped
    whenever it would push the speed out of [lo, hi].
    """

    kind: str = "random"
    z_max: float = 0.0
    hold_steps: int = 1
    speed_band: tuple | None = None
    seed: int = 0


@dataclass(frozen=True)
class APFParams:
    eta: float = 0.05
    rho0: float = 0.5


@dataclass
class Metrics:
    path_length: float
    duration: float
    min_obstacle_distance: float
    mean_step_compute_time: float

    def table_row(self) -> dict:
        return {"length_m": self.path_length, "duration_s": self.duration,
                "min_dist_m": self.min_obstacle_distance,
                "comp_time_us": self.mean_step_compute_time * 1e6}


@dataclass
class Trajectory:
    records: np.ndarray
    terminated_by: Termination
    dt: float
    summary: np.ndarray
    wall_time: float = 0.0
    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def t(self):
        return self.records[:, K.C_T]

    @property
    def position(self):
        return self.records[:, K.C_X:K.C_X + 3]

    @property
    def velocity(self):
        return self.records[:, K.C_V:K.C_V + 3]

    @property
    def R(self):
        return self.records[:, K.C_R]

    @property
    def S(self):
        return self.records[:, K.C_S]

    @property
    def eps(self):
        return self.records[:, K.C_EPS]

    @property
    def v_b(self):
        return self.records[:, K.C_VB]

    @property
    def f_cf(self):
        return self.records[:, K.C_FCF:K.C_FCF + 3]

    @property
    def f_vlc(self):
        return self.records[:, K.C_FVLC:K.C_FVLC + 3]

    @property
    def gate(self):
        return self.records[:, K.C_GATE]

    @property
    def k_used(self):
        return self.records[:, K.C_KUSED]

    @property
    def distance(self):
        return self.records[:, K.C_DIST]

    @property
    def z(self):
        return self.records[:, K.C_Z:K.C_Z + 3]

    @property
    def nearest_obstacle(self):
        idx = self.records[:, K.C_NEAR].astype(np.int64)
        out = np.full(len(idx), -1, dtype=np.int64)
        ok = idx >= 0
        out[ok] = self.ids[idx[ok]]
        return out

    @property
    def steps(self) -> int:
        return int(self.summary[K.S_STEP])

    @property
    def final_state(self) -> RobotState:
        r = self.records[-1]
        return RobotState(r[K.C_X:K.C_X + 3], r[K.C_V:K.C_V + 3], r[K.C_T])

    def stat(self, name: str) -> float:
        return float(self.summary[getattr(K, "S_" + name.upper())])


def step_euler(state: RobotState, force, dt: float, planar: bool = False) -> RobotState:
    """Explicit Euler: velocity from the force, position from the old velocity."""
    f = np.asarray(force, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteError(f"non-finite force {f}")
    v = state.velocity + f * dt
    x = state.position + state.velocity * dt
    if planar:
        v = v.copy()
        x = x.copy()
        v[2] = 0.0
        x[2] = 0.0
    return RobotState(x, v, state.time + dt)


class Rollout:
    """Resumable kernel state for one scenario.

    Holds the packed world plus everything the integrator carries between
    calls, so a run can stop (e.g. on meeting a new obstacle) and resume
    bit-identically, or be copied to branch.
    """

    def __init__(self, scenario: Scenario, mode: str = "full", *, dt: float | None = None,
                 horizon: float | None = None, adapt: bool = True,
                 disturbance: Disturbance | None = None, goal_tol: float | None = None,
                 collision_radius: float = COLLISION_RADIUS, stop_radius: float = math.inf,
                 stop_on_exit: bool = False, stall_steps: int = STALL_STEPS,
                 stall_speed: float = STALL_SPEED, apf: APFParams | None = None,
                 assigned: dict | None = None):
        p = scenario.params
        self.scenario = scenario
        self.mode = mode
        self.dt = float(dt if dt is not None else scenario.dt)
        self.horizon = float(horizon if horizon is not None else scenario.horizon)
        self.n_steps = int(round(self.horizon / self.dt))
        self.packed: PackedPoints = pack_points(scenario.obstacles)
        n_obs = len(self.packed.ids)
        self.fp = np.zeros(K.N_FPARAM)
        self.ip = np.zeros(K.N_IFLAG, dtype=np.int64)
        apf = apf or APFParams(**(scenario.apf or {}))
        dist = disturbance
        if dist is None and scenario.disturbance:
            dist = Disturbance(**{k: (tuple(v) if k == "speed_band" else v)
                                  for k, v in scenario.disturbance.items()})
        fp, ip = self.fp, self.ip
        fp[K.P_KCF], fp[K.P_KP], fp[K.P_KV] = p.k_cf, p.k_p, p.k_v
        fp[K.P_VMIN], fp[K.P_VMAX], fp[K.P_DMAX], fp[K.P_DMIN] = p.v_min, p.v_max, p.d_max, p.d_min
        fp[K.P_EPSMIN], fp[K.P_XI], fp[K.P_KSCALE] = p.eps_min, p.xi, p.k_vlc_scale
        fp[K.P_GOALTOL] = p.xi if goal_tol is None else goal_tol
        fp[K.P_COLLR] = collision_radius
        fp[K.P_ETA], fp[K.P_RHO0] = apf.eta, apf.rho0
        fp[K.P_STOPR] = stop_radius
        fp[K.P_STALLV] = stall_speed
        fp[K.P_DT] = self.dt
        fp[K.P_BANDLO], fp[K.P_BANDHI] = 0.0, math.inf
        ip[K.F_MODE] = MODES[mode]
        ip[K.F_PLANAR] = int(scenario.planar)
        ip[K.F_ADAPT] = int(adapt)
        ip[K.F_STOPEXIT] = int(stop_on_exit)
        ip[K.F_STALLN] = stall_steps
        ip[K.F_SEED] = scenario.seed
        if dist is not None:
            ip[K.F_DKIND] = DIST_KINDS[dist.kind]
            ip[K.F_HOLD] = dist.hold_steps
            ip[K.F_SEED] = dist.seed
            fp[K.P_ZMAX] = dist.z_max
            if dist.speed_band is not None:
                ip[K.F_BAND] = 1
                fp[K.P_BANDLO], fp[K.P_BANDHI] = dist.speed_band
        self.kbase = np.full(max(n_obs, 1), p.k_cf)
        self.kslot = self.kbase.copy()
        self.assigned = np.ones(max(n_obs, 1), dtype=np.int64)
        if assigned is not None:
            ip[K.F_ENC] = 1
            self.assigned[:] = 0
            for i, oid in enumerate(self.packed.ids):
                if oid in assigned:
                    self.assigned[i] = 1
        self.x = np.array(scenario.start.position, dtype=float)
        self.v = np.array(scenario.start.velocity, dtype=float)
        self.step = 0
        self.carry = K.new_carry()
        self.summary = K.new_summary()
        self.chunks: list[np.ndarray] = []
        self.code = None
        self.wall = 0.0

    def copy(self) -> "Rollout":
        new = object.__new__(Rollout)
        new.__dict__.update(self.__dict__)
        for name in ("fp", "ip", "kbase", "kslot", "assigned", "x", "v", "carry", "summary"):
            setattr(new, name, getattr(self, name).copy())
        new.packed = self.packed
        new.chunks = list(self.chunks)
        return new

    def set_b(self, obstacle_id: int, b) -> None:
        """Fix the field vector of one obstacle and mark it as assigned."""
        b = np.asarray(b, dtype=float)
        slot = self.packed.ids.index(obstacle_id)
        mask = self.packed.obstacle_slot == slot
        bvec = self.packed.b.copy()
        bvec[mask] = b
        self.packed = PackedPoints(self.packed.points, bvec, self.packed.obstacle_id,
                                   self.packed.obstacle_slot, self.packed.index, self.packed.ids)
        self.assigned[slot] = 1

    def advance(self, stride: int = 1, max_rows: int | None = None) -> Termination:
        remaining = self.n_steps - self.step
        rows = max_rows if max_rows is not None else remaining // max(stride, 1) + 2
        rec = np.empty((max(rows, 2), K.N_COL))
        pk = self.packed
        t0 = time.perf_counter()
        n, code = K.run(self.x, self.v, self.scenario.goal, pk.points, pk.b, pk.obstacle_slot,
                        self.kslot, self.kbase, self.assigned, self.fp, self.ip, self.step,
                        self.n_steps, stride, self.carry, rec, self.summary)
        self.wall += time.perf_counter() - t0
        self.step = int(self.summary[K.S_STEP])
        self.chunks.append(rec[:n])
        self.code = Termination(code)
        return self.code

    def resume_after_encounter(self) -> None:
        """Drop the duplicated terminal row so the next chunk starts cleanly."""
        if self.chunks and len(self.chunks[-1]):
            self.chunks[-1] = self.chunks[-1][:-1]

    def trajectory(self) -> Trajectory:
        rec = np.concatenate(self.chunks) if self.chunks else np.zeros((0, K.N_COL))
        return Trajectory(rec, self.code, self.dt, self.summary.copy(), self.wall,
                          np.asarray(self.packed.ids, dtype=np.int64), self.packed.points)


def simulate(scenario: Scenario, mode: str = "full", *, stride: int = 1,
             max_rows: int | None = None, **kw) -> Trajectory:
    """Run one scenario to termination.

    Stops on the horizon, on entering the goal ball (goal_tol, default xi;
    full and apf modes), on breaching the collision radius, on a stall, or
    on leaving the initial quadrant / stop radius when asked to.
    """
    ro = Rollout(scenario, mode, **kw)
    ro.advance(stride, max_rows)
    return ro.trajectory()


def simulate_rs(R0: float, S0: float, v_norm: float, k_cf: float, dt: float, horizon: float,
                disturbance: Disturbance | None = None, *, stride: int = 1,
                collision_radius: float = COLLISION_RADIUS, stop_on_exit: bool = False,
                max_rows: int | None = None):
    """Integrate the planar (R, S) system directly.

    Returns (trace, collided, summary) where trace rows are (t, R, S, |v|^2, eps).
    """
    if R0 == 0.0 and S0 == 0.0:
        raise ValueError("(R0, S0) = (0, 0) is the obstacle point itself")
    n_steps = int(round(horizon / dt))
    rows = max_rows if max_rows is not None else n_steps // max(stride, 1) + 2
    rec = np.empty((rows, 5))
    summary = K.new_summary()
    d = disturbance or Disturbance("none")
    lo, hi = d.speed_band if d.speed_band is not None else (0.0, math.inf)
    n, collided = K.run_rs(R0, S0, v_norm, k_cf, dt, n_steps, stride, DIST_KINDS[d.kind],
                           d.z_max, d.hold_steps, d.seed, lo, hi, collision_radius,
                           stop_on_exit, rec, summary)
    return rec[:n], bool(collided), summary


def metrics(traj: Trajectory) -> Metrics:
    """Length, duration, closest approach and per-step compute time of a run."""
    t = traj.t
    pos = traj.position
    if len(t) == 0:
        raise ValueError("empty trajectory")
    length = float(np.sum(np.linalg.norm(np.diff(pos, axis=0), axis=1)))
    steps = max(traj.steps - int(round(t[0] / traj.dt)), 1)
    return Metrics(length, float(t[-1] - t[0]), float(traj.summary[K.S_MINDIST]),
                   traj.wall_time / steps)


class SteeringTick:
    """Compiled steering force for repeated evaluation in one fixed world."""

    def __init__(self, obstacles, goal, params):
        self.packed = obstacles if isinstance(obstacles, PackedPoints) else pack_points(obstacles)
        self.goal = np.array(goal, dtype=float)
        self.kslot = np.full(max(len(self.packed.ids), 1), params.k_cf)
        self.fp = np.zeros(K.N_FPARAM)
        self.fp[K.P_KP], self.fp[K.P_KV] = params.k_p, params.k_v
        self.fp[K.P_VMIN], self.fp[K.P_VMAX] = params.v_min, params.v_max
        self.fp[K.P_DMAX], self.fp[K.P_XI] = params.d_max, params.xi
        self.fp[K.P_KSCALE] = params.k_vlc_scale
        self.f_cf = np.zeros(3)
        self.f_vlc = np.zeros(3)
        self.f_total = np.zeros(3)

    def __call__(self, x, v) -> tuple[np.ndarray, int]:
        pk = self.packed
        gate = K.steering(np.asarray(x, dtype=float), np.asarray(v, dtype=float), self.goal,
                          pk.points, pk.b, pk.obstacle_slot, self.kslot, self.fp,
                          self.f_cf, self.f_vlc, self.f_total)
        return self.f_total, gate


def apf_baseline(state: RobotState, obstacles, goal, params, apf: APFParams | None = None):
    from .forces import apf_force
    apf = apf or APFParams()
    return apf_force(state, obstacles, goal, params, apf.eta, apf.rho0)
