"""Executable checks of the avoidance and convergence guarantees.

Every claim is a seeded experiment: sample initial conditions or worlds,
simulate, compare against the closed-form bound with an explicit
tolerance. Planar single-point claims are checked twice, on the point-mass
simulator and on the (R, S) integrator, and both routes must pass.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import auxiliary as aux
from .auxiliary import ICClass
from .scenarios import (Z, course_params, nonconvex_course, random_cf_scenario,
                        random_full_scenario, single_point, u_trap)
from .simulator import COLLISION_RADIUS, Disturbance, Termination, simulate, simulate_rs
from .world import PlannerParams

ORACLE_TOL = 1e-8
FAR = 1e9  # d_max used for single-point experiments: the field is always on


@dataclass
class CheckResult:
    claim_id: str
    n_cases: int
    n_pass: int
    worst_margin: float
    tolerance: float
    seed: int
    status: str = ""
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.status:
            self.status = "pass" if self.n_pass == self.n_cases else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(claim_id: str, seed: int) -> np.random.Generator:
    """Independent, reproducible stream per (claim, seed)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(claim_id.encode()),)))


def _result(claim_id, margins, tol, seed, details=None, inconclusive=0) -> CheckResult:
    m = np.asarray(margins, dtype=float)
    n_pass = int(np.sum(m >= 0))
    worst = float(np.min(m)) if len(m) else math.nan
    status = "inconclusive" if inconclusive else ""
    return CheckResult(claim_id, len(m), n_pass, worst, tol, seed, status, details or {})


# --------------------------------------------------------------------------- oracle

@dataclass
class OracleTrace:
    t: np.ndarray
    y: np.ndarray
    converged: bool
    levels: int
    dt: float
    error: float


def oracle_integrate(system, ic, t_end: float, *, n_out: int = 11, dt0: float | None = None,
                     tol: float = ORACLE_TOL, max_halvings: int = 12) -> OracleTrace:
    """Reference solution by step halving with Richardson extrapolation.

    `system(ic, dt, t_out)` must return the explicit-Euler trace sampled at
    `t_out` (shape (len(t_out), m)). The step is halved until two successive
    extrapolated traces agree to `tol` in the sup norm; otherwise the trace
    is returned with converged=False and must be treated as inconclusive.
    """
    t_out = np.linspace(0.0, t_end, n_out)
    dt = dt0 if dt0 is not None else t_end / (64 * (n_out - 1))
    prev: list[np.ndarray] = []
    best = None
    err = math.inf
    for level in range(max_halvings + 1):
        row = [np.asarray(system(ic, dt / 2**level, t_out), dtype=float)]
        # Euler error expands in powers of dt: eliminate them one by one
        for m in range(1, len(prev) + 1):
            row.append(row[m - 1] + (row[m - 1] - prev[m - 1]) / (2**m - 1))
        prev = row
        if best is not None:
            err = float(np.max(np.abs(row[-1] - best)))
            if err < tol:
                return OracleTrace(t_out, row[-1], True, level, dt / 2**level, err)
        best = row[-1]
    return OracleTrace(t_out, best, False, max_halvings, dt / 2**max_halvings, err)


def point_mass_system(k_cf: float, b=Z):
    """Oracle system: planar point mass under the field of one point at the origin.

    State (x, y, vx, vy); ic = (x0, v0) as 3-vectors.
    """
    def run(ic, dt, t_out):
        x0, v0 = ic
        stride = int(round((t_out[1] - t_out[0]) / dt))
        n = stride * (len(t_out) - 1)
        sc = single_point(x0, v0, _pm_params(k_cf, np.linalg.norm(v0)), b, dt=dt, horizon=n * dt)
        tr = simulate(sc, "cf", stride=stride, adapt=False, collision_radius=0.0)
        rows = np.column_stack([tr.position[:, :2], tr.velocity[:, :2]])
        if len(rows) != len(t_out):
            raise FloatingPointError("trajectory ended before t_end")
        return rows
    return run


def _pm_params(k_cf, speed, v_min=None, v_max=None) -> PlannerParams:
    return PlannerParams(k_cf=k_cf, k_p=1.0, k_v=1.0, v_min=v_min or speed, v_max=v_max or speed,
                         d_max=FAR, d_min=0.0, eps_min=1e-9, xi=1.0)


def _planar_ic(r, speed, theta):
    return np.array([r, 0.0, 0.0]), speed * np.array([math.cos(theta), math.sin(theta), 0.0])


def _step_for(dbound, c, v, frac=2e-3, lo=1e-7, hi=1e-3):
    """Euler step that keeps the per-step turning angle near closest approach ~ frac."""
    return float(np.clip(frac * dbound / (max(c, 1.0) * v), lo, hi))


# --------------------------------------------------------------------------- claims

def check_velocity_invariance(n: int = 100, seed: int = 0, dt: float = 1e-3,
                              horizon: float = 5.0) -> CheckResult:
    """The field does no work: relative speed drift <= dt (per second) under Euler."""
    rng = _rng("velocity_invariance", seed)
    tol = dt / 1.0
    margins = []
    for _ in range(n):
        sc = random_cf_scenario(rng, horizon=horizon, dt=dt)
        tr = simulate(sc, "cf", stride=10**9)
        margins.append((tol - tr.stat("speeddev")) / tol)
    return _result("velocity_invariance", margins, tol, seed, {"dt": dt, "horizon": horizon})


def _sample_class(rng, cls: ICClass, c_range=(0.2, 3.0), min_rel_eps=0.05):
    """(r, speed, k, theta) with the requested initial class (b = +z, point at the origin)."""
    while True:
        r = rng.uniform(0.5, 2.0)
        speed = rng.uniform(0.5, 1.5)
        c = rng.uniform(*c_range)
        if cls is ICClass.MovingAway:
            th = rng.uniform(-math.pi / 2, math.pi / 2)
        elif cls is ICClass.FollowingField:
            th = rng.uniform(-math.pi, -math.pi / 2)
        else:
            th = rng.uniform(math.pi / 2, math.pi)
            if abs(math.sin(th) + c * math.cos(th)) < min_rel_eps:
                continue
        x0, v0 = _planar_ic(r, speed, th)
        a = aux.aux_state(x0, v0, Z, c * speed**2)
        if aux.classify(a) is cls:
            return r, speed, c * speed**2, th


def _quadrant_case(cls, r, speed, k, th):
    """Both routes for one undisturbed initial condition; returns (margin, parts)."""
    x0, v0 = _planar_ic(r, speed, th)
    a0 = aux.aux_state(x0, v0, Z, k)
    c = a0.c
    m = {}
    if cls is ICClass.MovingAway:
        dt = 1e-3
        tr = simulate(single_point(x0, v0, _pm_params(k, speed), dt=dt, horizon=3.0 * r / speed),
                      "cf", stride=10**9, adapt=False)
        rs, _, s = simulate_rs(a0.R, a0.S, speed, k, dt, 3.0 * r / speed, stride=10**9)
        m["R_nonneg_pm"] = tr.stat("minr") / (r * speed)
        m["R_nonneg_rs"] = s[_S("minr")] / (r * speed)
        m["vb_pm"] = (1.0 + 1e-9) - tr.stat("vbratio")
        m["vb_rs"] = (1.0 + 1e-9) - s[_S("vbratio")]
    elif cls is ICClass.FollowingField:
        t_max = aux.quadrant_exit_time_bound(a0.R, a0.S, k, speed)
        dbound = abs(a0.S) / speed
        dt = _step_for(dbound, c, speed)
        kw = dict(stop_on_exit=True)
        tr = simulate(single_point(x0, v0, _pm_params(k, speed), dt=dt, horizon=1.5 * t_max + dt),
                      "cf", stride=10**9, adapt=False, **kw)
        _, _, s = simulate_rs(a0.R, a0.S, speed, k, dt, 1.5 * t_max + dt, stride=10**9, **kw)
        vb_cap = aux.following_barrier_bound(a0.S, speed)
        m["dist_pm"] = tr.stat("phasedist") / (0.99 * dbound) - 1.0
        m["dist_rs"] = s[_S("phasedist")] / dbound - (1.0 - 1e-9)
        m["S2_pm"] = tr.stat("minsqratio") - (1.0 - 1e-6)
        m["S2_rs"] = s[_S("minsqratio")] - (1.0 - 1e-12)
        m["vb_pm"] = 1.0 - tr.stat("phasevb") / (vb_cap * 1.01)
        m["vb_rs"] = 1.0 - s[_S("phasevb")] / (vb_cap * (1.0 + 1e-9))
        m["exit_pm"] = _exit_margin(tr.stat("texit"), t_max, dt)
        m["exit_rs"] = _exit_margin(s[_S("texit")], t_max, dt)
    else:
        t_max = aux.quadrant_exit_time_bound(a0.R, a0.S, k, speed)
        dbound = aux.phase_distance_bound(a0.eps, c, speed)
        dt = _step_for(dbound, c, speed)
        kw = dict(stop_on_exit=True)
        tr = simulate(single_point(x0, v0, _pm_params(k, speed), dt=dt, horizon=1.5 * t_max + dt),
                      "cf", stride=10**9, adapt=False, **kw)
        _, _, s = simulate_rs(a0.R, a0.S, speed, k, dt, 1.5 * t_max + dt, stride=10**9, **kw)
        m["eps_pm"] = tr.stat("epsratio") - (1.0 - 1e-2)
        m["eps_rs"] = s[_S("epsratio")] - (1.0 - 1e-9)
        m["dist_pm"] = tr.stat("phasedist") / (0.99 * dbound) - 1.0
        m["dist_rs"] = s[_S("phasedist")] / (0.99 * dbound) - 1.0
        m["exit_pm"] = _exit_margin(tr.stat("texit"), t_max, dt)
        m["exit_rs"] = _exit_margin(s[_S("texit")], t_max, dt)
        if tr.terminated_by is Termination.Collision:
            m["collision"] = -1.0
    return min(m.values()), m


def _S(name):
    from . import _kernels as K
    return getattr(K, "S_" + name.upper())


def _exit_margin(t_exit, t_max, dt):
    if t_exit < 0:
        return -1.0
    return (t_max + dt - t_exit) / t_max


def check_quadrant_lemmas(n: int = 500, seed: int = 0) -> CheckResult:
    """Per-class guarantees for undisturbed motion around one point.

    Moving away: R stays >= 0 and V_B never grows. Following the field:
    S^2 never shrinks, |x| >= |S0|/|v| and the quadrant is left before
    -2 R0/|v|^2. Critical off-ray: |eps| never shrinks, the quadrant is left
    before the exit-time bound and |x| >= |eps0|/(max(c,1)|v|). Point-mass
    results get 1% slack (Euler); the (R, S) route is held to 1e-9.
    """
    rng = _rng("quadrant_lemmas", seed)
    margins, worst = [], {}
    for cls in (ICClass.MovingAway, ICClass.FollowingField, ICClass.CriticalOffRay):
        for _ in range(n):
            mg, parts = _quadrant_case(cls, *_sample_class(rng, cls))
            margins.append(mg)
            for key, val in parts.items():
                name = f"{cls.value}:{key}"
                worst[name] = min(worst.get(name, math.inf), val)
    return _result("quadrant_lemmas", margins, 1e-2, seed, {"worst_by_part": worst, "per_class": n})


def check_collision_ray(n: int = 3600, seed: int = 0, radius: float = 1.0, speed: float = 1.0,
                        k_cf: float = 1.0) -> CheckResult:
    """Heading sweep around one point: only the ray heading collides.

    Headings theta_j = 2 pi j / n from x0 = (radius, 0, 0). A heading passes
    if it collides exactly when it lies within one grid cell of the ray
    heading, and (off the ray, in the critical quadrant) its closest
    approach respects the per-side distance bound minus 1%. The collision
    measure (count x spacing) is reported for the measure-zero argument.
    """
    c = k_cf / speed**2
    ray = math.pi - math.atan(c)       # S + c R = 0 with R < 0, S > 0
    cell = 2.0 * math.pi / n
    margins, hits = [], []
    for j in range(n):
        th = cell * j
        x0, v0 = _planar_ic(radius, speed, th)
        a0 = aux.aux_state(x0, v0, Z, k_cf)
        cls = aux.classify(a0)
        dbound = None
        if cls is ICClass.CriticalOffRay:
            dbound = aux.min_distance_bound(a0, speed, k_cf)
            dt = _step_for(dbound, c, speed, frac=5e-3, lo=1e-7, hi=1e-4)
            t_max = aux.quadrant_exit_time_bound(a0.R, a0.S, k_cf, speed)
        elif cls is ICClass.CollisionRay:
            dt = 1e-7   # the ray repels; a coarser step drifts off it before impact
            t_max = aux.collision_time_on_ray(a0.S, c, k_cf)
        else:
            dt, t_max = 1e-3, 0.0
        horizon = t_max + 6.0 * radius / speed
        sc = single_point(x0, v0, _pm_params(k_cf, speed), dt=dt, horizon=horizon)
        tr = simulate(sc, "cf", stride=10**9, adapt=False, stop_radius=3.0 * radius)
        collided = tr.terminated_by is Termination.Collision
        near_ray = abs(math.remainder(th - ray, 2.0 * math.pi)) <= cell
        if collided:
            hits.append(th)
        if collided:
            margins.append(1.0 if near_ray else -1.0)
        elif dbound is not None:
            margins.append(tr.stat("phasedist") / (0.99 * dbound) - 1.0)
        elif cls is ICClass.CollisionRay:
            margins.append(-1.0)       # the ray heading must collide
        else:
            margins.append(1.0)
    details = {"ray_heading_deg": math.degrees(ray), "collision_headings_deg":
               [math.degrees(h) for h in hits], "collision_measure_rad": len(hits) * cell,
               "cell_rad": cell}
    return _result("collision_ray", margins, 0.01, seed, details)


def ray_collision_time(c: float, r: float = 1.0, speed: float = 1.0, tol: float = ORACLE_TOL,
                       amplification: float = 100.0):
    """Time to reach the point from the ray, by oracle integration.

    The ray repels: an error in eps grows like (S0/S)^(c^2). The oracle
    therefore integrates only until that factor reaches `amplification`
    (at most 90% of the predicted time); along the ray |x| shrinks at the
    constant rate |R|/|x|, which closes the rest. Returns
    (oracle time, predicted time, converged).
    """
    k = c * speed**2
    th = math.pi - math.atan(c)
    x0, v0 = _planar_ic(r, speed, th)
    a0 = aux.aux_state(x0, v0, Z, k)
    tau = aux.collision_time_on_ray(a0.S, c, k)
    frac = min(0.9, 1.0 - amplification ** (-1.0 / (c * c)))
    tr = oracle_integrate(point_mass_system(k), (x0, v0), frac * tau, tol=tol)
    xT, vT = tr.y[-1, :2], tr.y[-1, 2:]
    R = float(xT @ vT)
    t_hit = tr.t[-1] + float(xT @ xT) / -R
    return t_hit, tau, tr.converged


def check_ray_collision_time(cs=(0.5, 1.0, 2.0), seed: int = 0, tol: float = 0.02) -> CheckResult:
    """Collision time from the ray matches S0 (1 + c^2) / k within `tol`.

    Oracle route on the point mass plus the (R, S) integrator, whose Euler
    update keeps eps = 0 exactly and so can follow the ray to the point.
    """
    margins, details, inconclusive = [], {}, 0
    for c in cs:
        t_or, tau, ok = ray_collision_time(c)
        inconclusive += not ok
        x0, v0 = _planar_ic(1.0, 1.0, math.pi - math.atan(c))
        a0 = aux.aux_state(x0, v0, Z, c)
        dt = tau * 1e-5
        trace, col, _ = simulate_rs(a0.R, a0.S, 1.0, c, dt, 1.5 * tau, stride=10**9)
        t, R, S = trace[-1, 0], trace[-1, 1], trace[-1, 2]
        t_rs = t + (R * R + S * S) / -R if col else math.inf
        details[str(c)] = {"tau": tau, "oracle": t_or, "rs": t_rs, "oracle_converged": ok}
        margins.append(tol - abs(t_or - tau) / tau)
        margins.append(tol - abs(t_rs - tau) / tau)
    return _result("ray_collision_time", margins, tol, seed, details, inconclusive)


def _band_params(rng, c_range=(0.2, 1.2), band=1.1):
    speed = rng.uniform(0.5, 1.5)
    c0 = rng.uniform(*c_range)
    k = c0 * speed**2
    v_min, v_max = speed / band, speed * band
    return speed, k, v_min, v_max, k / v_max**2, k / v_min**2


def _disturbance_profile(rng, z_max, v_min, v_max, seed):
    kind = rng.choice(["random", "random_mag", "adversarial"])
    hold = int(rng.integers(1, 200))
    return Disturbance(str(kind), z_max, hold, (v_min, v_max), seed)


def _disturbed_case(rng, cls, case_seed, frac):
    """One seeded profile for one class; both routes. Returns (margin, parts)."""
    while True:
        speed, k, v_min, v_max, c_min, c_max = _band_params(rng)
        r = rng.uniform(0.5, 2.0)
        c = k / speed**2
        if cls is ICClass.MovingAway:
            th = rng.uniform(-math.pi / 2, math.pi / 2)
        elif cls is ICClass.FollowingField:
            th = rng.uniform(-math.pi + 0.05, -math.pi / 2 - 0.05)
        else:
            th = rng.uniform(math.pi / 2, math.pi)
            if abs(math.sin(th) + c * math.cos(th)) < 0.05:
                continue
        x0, v0 = _planar_ic(r, speed, th)
        a0 = aux.aux_state(x0, v0, Z, k)
        if aux.classify(a0) is cls:
            break
    x_max = 3.0 * r
    budget = aux.disturbance_budget(cls, r, v_min, v_max, c_min, c_max, k, a0.S, a0.R, a0.eps,
                                    x_max=x_max)
    prof = _disturbance_profile(rng, frac * budget, v_min, v_max, case_seed)
    params = _pm_params(k, speed, v_min, v_max)
    m = {}
    if cls is ICClass.MovingAway:
        dt = 1e-3
        horizon = 4.0 * r / v_min
        kw = dict(stop_radius=x_max)
        tr = simulate(single_point(x0, v0, params, dt=dt, horizon=horizon), "disturbed",
                      stride=10**9, adapt=False, disturbance=prof, **kw)
        _, col, s = simulate_rs(a0.R, a0.S, speed, k, dt, horizon, prof, stride=10**9)
        m["R_nonneg_pm"] = tr.stat("minr") / (r * speed) + 1e-12
        m["R_nonneg_rs"] = _rs_minr_until(a0, speed, k, dt, horizon, prof, x_max) / (r * speed) + 1e-12
        m["vb_pm"] = (1.0 + 1e-9) - tr.stat("vbratio")
    elif cls is ICClass.FollowingField:
        t1, t2 = aux.following_phase_times(a0.R, r, v_min)
        t_max = t1 + t2
        dt = _step_for(abs(a0.S) / v_max, c_max, v_min)
        kw = dict(stop_on_exit=True)
        tr = simulate(single_point(x0, v0, params, dt=dt, horizon=1.5 * t_max + dt), "disturbed",
                      stride=10**9, adapt=False, disturbance=prof, **kw)
        _, col, s = simulate_rs(a0.R, a0.S, speed, k, dt, 1.5 * t_max + dt, prof, stride=10**9, **kw)
        cap = aux.following_barrier_bound(a0.S, speed, disturbed=True, v_max=v_max)
        m["vb_pm"] = 1.0 - tr.stat("phasevb") / (1.01 * cap)
        m["vb_rs"] = 1.0 - s[_S("phasevb")] / (1.01 * cap)
        m["exit_pm"] = _exit_margin(tr.stat("texit"), t_max, dt)
        m["exit_rs"] = _exit_margin(s[_S("texit")], t_max, dt)
    else:
        t_max = aux.quadrant_exit_time_bound(a0.R, a0.S, k, speed, disturbed=True,
                                             c_min=c_min, c_max=c_max)
        dbound = aux.min_distance_bound(a0, speed, k, disturbed=True, v_max=v_max, c_max=c_max)
        dt = _step_for(dbound, c_max, v_min)
        kw = dict(stop_on_exit=True)
        tr = simulate(single_point(x0, v0, params, dt=dt, horizon=1.5 * t_max + dt), "disturbed",
                      stride=10**9, adapt=False, disturbance=prof, **kw)
        _, col, s = simulate_rs(a0.R, a0.S, speed, k, dt, 1.5 * t_max + dt, prof, stride=10**9, **kw)
        m["eps_pm"] = tr.stat("epsratio") / 0.5 - 1.0
        m["eps_rs"] = s[_S("epsratio")] / 0.5 - 1.0
        m["dist_pm"] = tr.stat("phasedist") / (0.99 * dbound) - 1.0
        m["dist_rs"] = s[_S("phasedist")] / (0.99 * dbound) - 1.0
        m["exit_pm"] = _exit_margin(tr.stat("texit"), t_max, dt)
        m["exit_rs"] = _exit_margin(s[_S("texit")], t_max, dt)
    m["no_collision_pm"] = -1.0 if tr.terminated_by is Termination.Collision else 1.0
    m["no_collision_rs"] = -1.0 if col else 1.0
    m["z_within_budget"] = 1.0 - tr.stat("maxz") / (budget * (1.0 + 1e-12)) if budget > 0 else 1.0
    return min(m.values()), m, prof.kind


def _rs_minr_until(a0, speed, k, dt, horizon, prof, x_max):
    """Smallest R on the (R, S) route while |x| <= x_max."""
    trace, _, _ = simulate_rs(a0.R, a0.S, speed, k, dt, horizon, prof)
    xn = np.sqrt((trace[:, 1] ** 2 + trace[:, 2] ** 2) / trace[:, 3])
    inside = xn <= x_max
    return float(np.min(trace[inside, 1]))


def rate_identity_errors(n: int = 20, seed: int = 0, dt: float = 1e-4):
    """Finite differences of |v|^2 and c along disturbed runs vs their closed forms.

    Returns the largest error of each, normalized by its O(dt) Euler allowance.
    """
    rng = _rng("rate_identities", seed)
    worst_w, worst_c = 0.0, 0.0
    for i in range(n):
        speed, k, v_min, v_max, _, _ = _band_params(rng)
        x0, v0 = _planar_ic(rng.uniform(0.5, 2.0), speed, rng.uniform(-math.pi, math.pi))
        prof = Disturbance("random_mag", 0.05 * speed**2, int(rng.integers(1, 50)), None, i)
        tr = simulate(single_point(x0, v0, _pm_params(k, speed), dt=dt, horizon=0.5), "disturbed",
                      adapt=False, disturbance=prof)
        v, z, f = tr.velocity, tr.z, tr.f_cf + tr.z
        w = np.einsum("ij,ij->i", v, v)
        dw = np.diff(w) / dt
        pred = 2.0 * np.einsum("ij,ij->i", v[:-1], z[:-1])
        allow = 2.0 * dt * np.einsum("ij,ij->i", f[:-1], f[:-1]) + 1e-12 * w[:-1] / dt
        worst_w = max(worst_w, float(np.max(np.abs(dw - pred) / allow)))
        cc = k / w
        dc = np.diff(cc) / dt
        pred_c = np.array([aux.c_rate(cc[j], v[j], z[j]) for j in range(len(w) - 1)])
        allow_c = cc[:-1] * (allow / w[:-1]) * 3.0
        worst_c = max(worst_c, float(np.max(np.abs(dc - pred_c) / allow_c)))
    return worst_w, worst_c


def check_disturbed(n: int = 500, seed: int = 0, frac: float = 0.99) -> CheckResult:
    """Bounded disturbances at `frac` of the budget: guarantees survive.

    Moving away (until |x| = 3|x0|): R >= 0 and V_B non-increasing.
    Following: V_B <= 4 v_max^2/S0^2 and the quadrant is left in time.
    Critical: |eps| >= |eps0|/2, |x| >= |eps0|/(2 v_max max(c_max, 1)) - 1%,
    exit in time. No collisions anywhere. Also checks d|v|^2/dt = 2 v.z and
    the rate of c against finite differences.
    """
    rng = _rng("disturbed", seed)
    margins, worst, kinds = [], {}, {}
    for cls in (ICClass.MovingAway, ICClass.FollowingField, ICClass.CriticalOffRay):
        for i in range(n):
            mg, parts, kind = _disturbed_case(rng, cls, int(rng.integers(2**31)), frac)
            margins.append(mg)
            kinds[kind] = kinds.get(kind, 0) + 1
            for key, val in parts.items():
                name = f"{cls.value}:{key}"
                worst[name] = min(worst.get(name, math.inf), val)
    ew, ec = rate_identity_errors(seed=seed)
    margins.append(1.0 - ew)
    margins.append(1.0 - ec)
    return _result("disturbed", margins, 1e-2, seed,
                   {"worst_by_part": worst, "profiles": kinds, "speed_rate_err": ew,
                    "c_rate_err": ec, "budget_fraction": frac})


def check_velocity_bounds(n: int = 20, seed: int = 0, dt: float = 1e-3) -> CheckResult:
    """Full planner keeps v_min - tol <= |v| <= v_max + tol away from the goal.

    tol = 10 dt max|F|, the Euler overshoot of one step of the largest force.
    """
    rng = _rng("velocity_bounds", seed)
    margins = []
    worlds = [nonconvex_course(), u_trap()] + [random_full_scenario(rng) for _ in range(n)]
    for sc in worlds:
        p = sc.params
        tr = simulate(sc, "full", stride=10**9, dt=dt)
        tol = 10.0 * dt * tr.stat("maxf")
        lo = (tr.stat("vminfar") - (p.v_min - tol)) / p.v_min
        hi = ((p.v_max + tol) - tr.stat("vmaxfar")) / p.v_max
        margins.append(min(lo, hi))
    return _result("velocity_bounds", margins, 10.0 * dt, seed, {"worlds": len(worlds)})


def check_goal_convergence(n: int = 20, seed: int = 0, goal_tol: float = 0.05) -> CheckResult:
    """Scenario battery reaches the goal ball with no collision.

    Convergence is claimed for runs in which the goal-force gate is
    eventually on for good. A run that hits the horizon with the gate
    still switching off in its final third does not meet that premise
    (it coasts away with the gate latched off, or circles among the
    clouds); such runs are counted and reported in the details, not
    scored. A horizon run whose gate stayed on through the final third is
    a failure, as is any collision. The energy V = |v|^2/2 + Huber(x)
    must not grow on any gated-on step beyond the per-step Euler
    allowance, in every run.
    """
    rng = _rng("goal_convergence", seed)
    p = course_params()
    worlds = [_free_world(rng, p), nonconvex_course(), u_trap()]
    worlds += [random_full_scenario(rng) for _ in range(n)]
    margins, outcomes, unmet, latched = [], [], 0, 0
    for sc in worlds:
        tr = simulate(sc, "full", stride=10**9, goal_tol=goal_tol)
        excess = tr.stat("lyapexcess")
        energy = -excess * 1e6 if excess > 0 else 1.0
        outcomes.append(tr.terminated_by.name)
        if tr.terminated_by is Termination.Horizon and gate_premise_unmet(tr):
            unmet += 1
            latched += gate_latched_off(tr, sc)
            margins.append(energy)
            continue
        ok = tr.terminated_by is Termination.GoalReached
        margins.append(min(1.0 if ok else -1.0, energy))
    return _result("goal_convergence", margins, goal_tol, seed,
                   {"terminations": outcomes, "gate_premise_unmet": unmet,
                    "gate_latched_off": latched})


def gate_premise_unmet(tr, frac: float = 1.0 / 3.0) -> bool:
    """True when the gate was off at some step in the final `frac` of the run."""
    t_end = tr.t[-1]
    return bool(tr.stat("gateofft") >= (1.0 - frac) * t_end)


def gate_latched_off(tr, sc) -> bool:
    """True when the run ended coasting with the goal force off, away from every obstacle."""
    if tr.gate[-1] != 0:
        return False
    pts = tr.points
    if len(pts) == 0:
        return True
    d = np.linalg.norm(pts - tr.position[-1], axis=1)
    return bool(np.min(d) > sc.params.d_max)


def _free_world(rng, p):
    from .world import RobotState, Scenario
    a = rng.uniform(-math.pi, math.pi)
    goal = 6.0 * np.array([math.cos(a), math.sin(a), 0.0])
    turn = rng.uniform(-0.5, 0.5)
    v0 = p.v_max * np.array([math.cos(a + turn), math.sin(a + turn), 0.0])
    return Scenario(RobotState(np.zeros(3), v0), goal, (), p, dt=1e-3, horizon=120.0)


def check_adaptation(n: int = 10_000, seed: int = 0) -> CheckResult:
    """Gain rescaling lands exactly on |eps| = eps_min, and holds in simulation.

    Part one: random critical states with |eps| < eps_min, recomputed eps
    equals sgn(eps) eps_min to 1e-12. Part two: head-on runs that trigger
    the rescaling keep |eps| >= eps_min (Euler slack 1e-6 relative) while in
    the critical quadrant near the point.
    """
    rng = _rng("adaptation", seed)
    margins = []
    for _ in range(n):
        speed = rng.uniform(0.2, 2.0)
        k = rng.uniform(0.05, 3.0)
        eps_min = rng.uniform(1e-3, 0.2)
        R = -rng.uniform(0.01, 2.0)
        eps = rng.uniform(-eps_min, eps_min)
        S = eps - k / speed**2 * R
        if S <= 0:
            S = rng.uniform(1e-3, 1.0)
            k = (eps - S) * speed**2 / R
        a = aux.aux_from_rs(R, S, speed, k)
        k_new = aux.adapt_kcf(a, k, eps_min, 0.0, 1.0)
        e_new = S + k_new / speed**2 * R
        margins.append(1.0 - abs(e_new - aux.sgn(a.eps) * eps_min) / 1e-12)
    sim = []
    p0 = course_params()
    for _ in range(max(n // 500, 5)):
        # start just off the collision ray so the rescaling must fire near the point
        speed = rng.uniform(p0.v_min, p0.v_max)
        c = p0.k_cf / speed**2
        th = math.pi - math.atan(c) + rng.uniform(-1e-3, 1e-3)
        x0, v0 = _planar_ic(0.5, speed, th)
        sc = single_point(x0, v0, p0, goal=(-5.0, 0.0, 0.0), dt=1e-4, horizon=4.0)
        tr = simulate(sc, "cf", stride=10**9)
        if tr.stat("nadapt") == 0 or tr.terminated_by is Termination.Collision:
            sim.append(-1.0)
            continue
        m = tr.stat("minepsafter")
        sim.append(m / (p0.eps_min * (1.0 - 1e-6)) - 1.0 if math.isfinite(m) else 1.0)
    margins += sim
    return _result("adaptation", margins, 1e-12, seed, {"simulated_activations": len(sim)})


def check_rs_ratio_bound(n: int = 100_000, seed: int = 0) -> CheckResult:
    """RS/(R^2+S^2) stays above its c_min-dependent floor on the safe side of the ray.

    Samples R < 0, S > 0, c >= c_min with S + cR > 0 and checks the bound
    strictly.
    """
    rng = _rng("rs_ratio_bound", seed)
    c_min = np.exp(rng.uniform(np.log(0.05), np.log(20.0), n))
    c = c_min * np.exp(rng.uniform(0.0, np.log(5.0), n))
    R = -np.exp(rng.uniform(np.log(1e-3), np.log(1e3), n))
    # S > -c R, spread over several decades above the ray
    S = -c * R * (1.0 + np.exp(rng.uniform(np.log(1e-9), np.log(1e3), n)))
    ratio = R * S / (R * R + S * S)
    bound = np.array([aux.rs_ratio_lower_bound(cm) for cm in c_min])
    margin = ratio - bound
    return CheckResult("rs_ratio_bound", n, int(np.sum(margin > 0)), float(np.min(margin)), 0.0, seed)


def _uniform_barrier(n, seed, bound_fn, claim):
    """Following-field starts with |S0| >= c~|R0| under budget disturbances."""
    rng = _rng(claim, seed)
    margins, worst_case = [], None
    for i in range(n):
        speed, k, v_min, v_max, c_min, c_max = _band_params(rng)
        c_t = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        r = rng.uniform(0.5, 2.0)
        # heading in the following quadrant with |S0| >= c~ |R0|
        lo = math.atan(c_t)
        th = -math.pi + rng.uniform(lo, math.pi / 2 - 1e-3)
        x0, v0 = _planar_ic(r, speed, th)
        a0 = aux.aux_state(x0, v0, Z, k)
        budget = aux.disturbance_budget(ICClass.FollowingField, r, v_min, v_max, c_min, c_max, k,
                                        a0.S, a0.R, a0.eps)
        prof = _disturbance_profile(rng, 0.99 * budget, v_min, v_max, i)
        t1, t2 = aux.following_phase_times(a0.R, r, v_min)
        dt = _step_for(abs(a0.S) / v_max, c_max, v_min)
        tr = simulate(single_point(x0, v0, _pm_params(k, speed, v_min, v_max), dt=dt,
                                   horizon=1.5 * (t1 + t2) + dt),
                      "disturbed", stride=10**9, adapt=False, disturbance=prof, stop_on_exit=True)
        factor = bound_fn(1.0, v_min, v_max, c_t)
        mg = 1.0 - tr.stat("vbratio") / factor
        if worst_case is None or mg < worst_case[0]:
            worst_case = (mg, {"c_tilde": c_t, "R0": a0.R, "S0": a0.S, "factor": factor,
                               "observed_ratio": tr.stat("vbratio")})
        margins.append(mg)
    return _result(claim, margins, 0.0, seed, {"worst_case": worst_case[1] if worst_case else None})


def check_uniform_barrier_bound(n: int = 500, seed: int = 0) -> CheckResult:
    """V_B <= V_B(0) 8 v_max^2 / (v_min^2 max(1, c~^2)) for |S0| >= c~|R0| (as stated)."""
    return _uniform_barrier(n, seed, aux.uniform_barrier_bound, "uniform_barrier_bound")


def check_uniform_barrier_bound_min(n: int = 500, seed: int = 0) -> CheckResult:
    """Same experiment against the min(1, c~^2) form of the factor."""
    return _uniform_barrier(n, seed, aux.uniform_barrier_bound_min, "uniform_barrier_bound_min")


def check_rs_identity(n: int = 50, seed: int = 0) -> CheckResult:
    """R^2 + S^2 = |x|^2 |v|^2 on every recorded sample of planar runs (rel. 1e-9)."""
    rng = _rng("rs_identity", seed)
    margins = []
    for _ in range(n):
        tr = simulate(random_cf_scenario(rng, horizon=5.0), "cf")
        ok = np.isfinite(tr.R)
        x, v = tr.position[ok] - _nearest_points(tr, ok), tr.velocity[ok]
        lhs = tr.R[ok] ** 2 + tr.S[ok] ** 2
        rhs = np.einsum("ij,ij->i", x, x) * np.einsum("ij,ij->i", v, v)
        err = np.max(np.abs(lhs - rhs) / rhs) if len(rhs) else 0.0
        margins.append(1.0 - err / 1e-9)
    return _result("rs_identity", margins, 1e-9, seed)


def _nearest_points(tr, ok):
    sc_pts = tr.points
    return sc_pts[tr.records[ok, _C("near")].astype(np.int64)]


def _C(name):
    from . import _kernels as K
    return getattr(K, "C_" + name.upper())


MANIFEST = {
    "velocity_invariance": check_velocity_invariance,
    "rs_identity": check_rs_identity,
    "quadrant_lemmas": check_quadrant_lemmas,
    "collision_ray": check_collision_ray,
    "ray_collision_time": check_ray_collision_time,
    "disturbed": check_disturbed,
    "velocity_bounds": check_velocity_bounds,
    "goal_convergence": check_goal_convergence,
    "adaptation": check_adaptation,
    "rs_ratio_bound": check_rs_ratio_bound,
    "uniform_barrier_bound": check_uniform_barrier_bound,
    "uniform_barrier_bound_min": check_uniform_barrier_bound_min,
}


def run_checks(claims=None, n: int | None = None, seed: int = 0) -> list[CheckResult]:
    """Run the selected claims (all by default); `n` overrides each case count."""
    names = list(MANIFEST) if not claims or claims == ["all"] else list(claims)
    unknown = [c for c in names if c not in MANIFEST]
    if unknown:
        raise KeyError(f"unknown claims: {unknown}")
    out = []
    for name in names:
        fn = MANIFEST[name]
        if n is not None and name != "ray_collision_time":
            out.append(fn(n=n, seed=seed))
        else:
            out.append(fn(seed=seed))
    return out


def report_json(results) -> str:
    return json.dumps({"results": [r.to_dict() for r in results],
                       "all_pass": all(r.passed for r in results)}, indent=2, sort_keys=True,
                      default=float)


def summary_table(results) -> str:
    lines = [f"{'claim':28s} {'status':12s} {'pass':>11s} {'worst margin':>14s}"]
    for r in results:
        lines.append(f"{r.claim_id:28s} {r.status:12s} {r.n_pass:>5d}/{r.n_cases:<5d} "
                     f"{r.worst_margin:14.6g}")
    return "\n".join(lines)
