"""Compiled integration loop.

One kernel drives every simulation mode. Parameters travel in flat arrays
indexed by the constants below so the compiled signature stays fixed.
"""

import math

import numpy as np
from numba import njit

# float parameters
P_KCF, P_KP, P_KV, P_VMIN, P_VMAX, P_DMAX, P_DMIN, P_EPSMIN, P_XI, P_KSCALE = range(10)
P_GOALTOL, P_COLLR, P_ETA, P_RHO0, P_ZMAX, P_BANDLO, P_BANDHI, P_STOPR, P_STALLV, P_DT = range(10, 20)
N_FPARAM = 20

# integer flags
F_MODE, F_PLANAR, F_ADAPT, F_DKIND, F_HOLD, F_BAND, F_STOPEXIT, F_STALLN, F_ENC, F_SEED = range(10)
N_IFLAG = 10

MODE_CF, MODE_FULL, MODE_DISTURBED, MODE_APF = 0, 1, 2, 3
DIST_NONE, DIST_RANDOM, DIST_RANDOM_MAG, DIST_ADVERSARIAL = 0, 1, 2, 3

T_HORIZON, T_GOAL, T_COLLISION, T_STALLED, T_ENCOUNTER, T_NONFINITE, T_ESCAPED, T_EXIT = range(8)

# record columns
C_T = 0
C_X = 1
C_V = 4
C_R, C_S, C_EPS, C_VB = 7, 8, 9, 10
C_FCF = 11
C_FVLC = 14
C_GATE, C_KUSED, C_DIST, C_NEAR, C_Z = 17, 18, 19, 20, 21
N_COL = 24

# summary slots
S_MINDIST, S_SPEEDDEV, S_TEXIT, S_EPSRATIO, S_PHASEDIST, S_VBRATIO = range(6)
S_PHASEVB, S_ENCSLOT, S_NADAPT, S_NGUARD, S_VMINFAR, S_VMAXFAR = range(6, 12)
S_MAXF, S_LYAPEXCESS, S_STEP, S_MAXS, S_MINR, S_MINSQRATIO = range(12, 18)
S_EPS0, S_CLASS0, S_MINEPSAFTER, S_NLYAP, S_MAXZ, S_PATHLEN = range(18, 24)
S_GATEOFFT = 24
N_SUMMARY = 25

# carry slots
K_LATCH, K_STALL, K_HOLD, K_Z = 0, 1, 2, 3
N_CARRY = 6

CLS_AWAY, CLS_FOLLOW, CLS_CRIT, CLS_RAY, CLS_NONE = 0, 1, 2, 3, -1


@njit(cache=True, nogil=True)
def _class_of(R, S, eps):
    if R >= 0.0:
        return CLS_AWAY
    if S <= 0.0:
        return CLS_FOLLOW
    if abs(eps) <= 1e-9 * math.sqrt(R * R + S * S):
        return CLS_RAY
    return CLS_CRIT


@njit(cache=True, nogil=True)
def cf_forces(x, v, pts, bvec, slot, kslot, d_max, out):
    """Sum of circular-field forces; returns (nearest index, nearest distance, stalled)."""
    out[0] = 0.0
    out[1] = 0.0
    out[2] = 0.0
    s = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    stalled = False
    near = -1
    nd = np.inf
    n = pts.shape[0]
    if s > 0.0:
        vh0, vh1, vh2 = v[0] / s, v[1] / s, v[2] / s
    else:
        vh0, vh1, vh2 = 0.0, 0.0, 0.0
    for i in range(n):
        d0 = x[0] - pts[i, 0]
        d1 = x[1] - pts[i, 1]
        d2 = x[2] - pts[i, 2]
        dn = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if dn < nd:
            nd = dn
            near = i
        if dn > d_max:
            continue
        if s < 1e-9:
            stalled = True
            continue
        if dn == 0.0:
            continue
        u0, u1, u2 = d0 / dn, d1 / dn, d2 / dn
        b0, b1, b2 = bvec[i, 0], bvec[i, 1], bvec[i, 2]
        # current = d_hat x b
        c0 = u1 * b2 - u2 * b1
        c1 = u2 * b0 - u0 * b2
        c2 = u0 * b1 - u1 * b0
        g = kslot[slot[i]] / dn
        # field = g * (current x v_hat)
        B0 = g * (c1 * vh2 - c2 * vh1)
        B1 = g * (c2 * vh0 - c0 * vh2)
        B2 = g * (c0 * vh1 - c1 * vh0)
        out[0] += vh1 * B2 - vh2 * B1
        out[1] += vh2 * B0 - vh0 * B2
        out[2] += vh0 * B1 - vh1 * B0
    if stalled:
        out[0] = 0.0
        out[1] = 0.0
        out[2] = 0.0
    return near, nd, stalled


@njit(cache=True, nogil=True)
def _vlc(x, v, goal, kp, kv, vmax, out):
    vd0 = kp / kv * (goal[0] - x[0])
    vd1 = kp / kv * (goal[1] - x[1])
    vd2 = kp / kv * (goal[2] - x[2])
    n = math.sqrt(vd0 * vd0 + vd1 * vd1 + vd2 * vd2)
    nu = 1.0
    if n > 0.0:
        nu = min(1.0, vmax / n)
    out[0] = -kv * (v[0] - nu * vd0)
    out[1] = -kv * (v[1] - nu * vd1)
    out[2] = -kv * (v[2] - nu * vd2)


@njit(cache=True, nogil=True)
def steering(x, v, goal, pts, bvec, slot, kslot, fp, fcf, fvl, out):
    """One tick of the full steering force; returns the attraction gate."""
    cf_forces(x, v, pts, bvec, slot, kslot, fp[P_DMAX], fcf)
    _vlc(x, v, goal, fp[P_KP], fp[P_KV], fp[P_VMAX], fvl)
    vf = v[0] * fvl[0] + v[1] * fvl[1] + v[2] * fvl[2]
    s = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    r = math.sqrt((goal[0] - x[0]) ** 2 + (goal[1] - x[1]) ** 2 + (goal[2] - x[2]) ** 2)
    gate = 0 if (vf <= 0.0 and 0.0 < s <= fp[P_VMIN] and r > fp[P_XI]) else 1
    g = fp[P_KSCALE] * gate
    for j in range(3):
        out[j] = fcf[j] + g * fvl[j]
    return gate


@njit(cache=True, nogil=True)
def _huber(x, goal, kp, kv, vmax):
    r = math.sqrt((x[0] - goal[0]) ** 2 + (x[1] - goal[1]) ** 2 + (x[2] - goal[2]) ** 2)
    if r < kv * vmax / kp:
        return 0.5 * kp * r * r
    return kv * vmax * r - (kv * vmax) ** 2 / (2.0 * kp)


@njit(cache=True, nogil=True)
def _apf(x, pts, eta, rho0, out):
    for i in range(pts.shape[0]):
        d0 = x[0] - pts[i, 0]
        d1 = x[1] - pts[i, 1]
        d2 = x[2] - pts[i, 2]
        r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if r <= rho0 and r > 0.0:
            m = eta * (1.0 / r - 1.0 / rho0) / (r * r) / r
            out[0] += m * d0
            out[1] += m * d1
            out[2] += m * d2


@njit(cache=True, nogil=True)
def _aux(x, v, p, b, ksign, kabs):
    """R, S, eps, V_B with respect to point p and effective field sign."""
    d0 = x[0] - p[0]
    d1 = x[1] - p[1]
    d2 = x[2] - p[2]
    R = d0 * v[0] + d1 * v[1] + d2 * v[2]
    S = ksign * ((d1 * v[2] - d2 * v[1]) * b[0] + (d2 * v[0] - d0 * v[2]) * b[1]
                 + (d0 * v[1] - d1 * v[0]) * b[2])
    vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    xx = d0 * d0 + d1 * d1 + d2 * d2
    eps = S + kabs / vv * R if vv > 0.0 else np.nan
    vb = 1.0 / xx if xx > 0.0 else np.inf
    return R, S, eps, vb


@njit(cache=True, nogil=True)
def _disturbance(kind, zmax, planar, x, v, p, b, ksign, kabs, z):
    if kind == DIST_ADVERSARIAL:
        d0 = x[0] - p[0]
        d1 = x[1] - p[1]
        d2 = x[2] - p[2]
        R, S, eps, vb = _aux(x, v, p, b, ksign, kabs)
        e0 = ksign * b[0]
        e1 = ksign * b[1]
        e2 = ksign * b[2]
        if R >= 0.0:
            # push toward the point
            g0, g1, g2 = -d0, -d1, -d2
        else:
            # b x d raises S
            g0 = e1 * d2 - e2 * d1
            g1 = e2 * d0 - e0 * d2
            g2 = e0 * d1 - e1 * d0
            if S > 0.0:
                vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
                c = kabs / vv
                g0 += c * d0 - 2.0 * c * R * v[0] / vv
                g1 += c * d1 - 2.0 * c * R * v[1] / vv
                g2 += c * d2 - 2.0 * c * R * v[2] / vv
                if eps > 0.0:
                    g0, g1, g2 = -g0, -g1, -g2
        if planar:
            g2 = 0.0
        gn = math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
        if gn > 0.0:
            z[0] = zmax * g0 / gn
            z[1] = zmax * g1 / gn
            z[2] = zmax * g2 / gn
        else:
            z[0] = 0.0
            z[1] = 0.0
            z[2] = 0.0
        return
    mag = zmax
    if kind == DIST_RANDOM_MAG:
        mag = zmax * np.random.random()
    if planar:
        a = 2.0 * math.pi * np.random.random()
        z[0] = mag * math.cos(a)
        z[1] = mag * math.sin(a)
        z[2] = 0.0
    else:
        g0 = np.random.standard_normal()
        g1 = np.random.standard_normal()
        g2 = np.random.standard_normal()
        gn = math.sqrt(g0 * g0 + g1 * g1 + g2 * g2)
        z[0] = mag * g0 / gn
        z[1] = mag * g1 / gn
        z[2] = mag * g2 / gn


@njit(cache=True, nogil=True)
def _speed_band(v, z, lo, hi):
    """Drop the speed-changing part of z when it would leave [lo, hi]."""
    vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    if vv == 0.0:
        return
    s = math.sqrt(vv)
    vz = v[0] * z[0] + v[1] * z[1] + v[2] * z[2]
    if (s >= hi and vz > 0.0) or (s <= lo and vz < 0.0):
        f = vz / vv
        z[0] -= f * v[0]
        z[1] -= f * v[1]
        z[2] -= f * v[2]


@njit(cache=True, nogil=True)
def run(x, v, goal, pts, bvec, slot, kslot, kbase, assigned, fp, ip, step0, n_steps,
        stride, carry, rec, summary):
    """Integrate from `step0` up to `n_steps` inclusive.

    x, v, kslot and carry are updated in place. Rows are written into `rec`
    every `stride` steps and at termination; returns (rows written, code).
    """
    mode = ip[F_MODE]
    planar = ip[F_PLANAR] != 0
    dt = fp[P_DT]
    kp, kv, vmin, vmax = fp[P_KP], fp[P_KV], fp[P_VMIN], fp[P_VMAX]
    xi = fp[P_XI]
    kscale = fp[P_KSCALE]
    dkind = ip[F_DKIND]
    hold = max(ip[F_HOLD], 1)
    n_rows = 0
    code = T_HORIZON
    if dkind != DIST_NONE and dkind != DIST_ADVERSARIAL:
        np.random.seed(ip[F_SEED])
    fcf = np.zeros(3)
    fvl = np.zeros(3)
    ftot = np.zeros(3)
    z = np.zeros(3)
    xn = np.zeros(3)
    pnear = np.zeros(3)
    bnear = np.zeros(3)
    s0 = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    cls0 = CLS_NONE
    in_phase = True
    eps0 = 0.0
    vb0 = 0.0
    S0 = 0.0
    step = step0
    while True:
        near, nd, stalled = cf_forces(x, v, pts, bvec, slot, kslot, fp[P_DMAX], fcf)
        if stalled:
            summary[S_NGUARD] += 1.0
        gate = 1
        R = np.nan
        S = np.nan
        eps = np.nan
        vb = np.nan
        kused = np.nan
        if near >= 0:
            o = slot[near]
            # encounter of an obstacle the caller has not assigned yet
            if ip[F_ENC] != 0:
                enc = -1
                for i in range(pts.shape[0]):
                    if assigned[slot[i]] == 0:
                        e0 = x[0] - pts[i, 0]
                        e1 = x[1] - pts[i, 1]
                        e2 = x[2] - pts[i, 2]
                        if math.sqrt(e0 * e0 + e1 * e1 + e2 * e2) <= fp[P_DMAX]:
                            enc = slot[i]
                            break
                if enc >= 0:
                    summary[S_ENCSLOT] = enc
                    code = T_ENCOUNTER
                    break
            latch = int(carry[K_LATCH])
            pnear[0] = pts[near, 0]
            pnear[1] = pts[near, 1]
            pnear[2] = pts[near, 2]
            bnear[0] = bvec[near, 0]
            bnear[1] = bvec[near, 1]
            bnear[2] = bvec[near, 2]
            kc = kslot[o]
            ksign = -1.0 if kc < 0.0 else 1.0
            R, S, eps, vb = _aux(x, v, pnear, bnear, ksign, abs(kc))
            if latch >= 0 and (latch != o or R >= 0.0):
                kslot[latch] = kbase[latch]
                carry[K_LATCH] = -1.0
                if latch == o:
                    kc = kslot[o]
                    ksign = -1.0 if kc < 0.0 else 1.0
                    R, S, eps, vb = _aux(x, v, pnear, bnear, ksign, abs(kc))
            # |eps| under a latched gain, measured before any re-adaptation
            if int(carry[K_LATCH]) == o and R < 0.0 and S > 0.0 and nd <= fp[P_DMIN]:
                summary[S_MINEPSAFTER] = min(summary[S_MINEPSAFTER], abs(eps))
            if ip[F_ADAPT] != 0 and mode != MODE_APF and nd <= fp[P_DMIN] and R < 0.0 and S > 0.0:
                if abs(eps) < fp[P_EPSMIN]:
                    vv = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
                    se = -1.0 if eps < 0.0 else 1.0
                    knew = abs(kc) - se * (fp[P_EPSMIN] - abs(eps)) * vv / abs(R)
                    kslot[o] = ksign * knew
                    carry[K_LATCH] = o
                    summary[S_NADAPT] += 1.0
                    kc = kslot[o]
                    ksign = -1.0 if kc < 0.0 else 1.0
                    R, S, eps, vb = _aux(x, v, pnear, bnear, ksign, abs(kc))
                    near, nd, stalled = cf_forces(x, v, pts, bvec, slot, kslot, fp[P_DMAX], fcf)
            kused = abs(kc)
            if nd < summary[S_MINDIST]:
                summary[S_MINDIST] = nd
            c = _class_of(R, S, eps)
            if cls0 == CLS_NONE:
                cls0 = c
                eps0 = eps
                vb0 = vb
                S0 = S
                summary[S_EPS0] = eps
                summary[S_CLASS0] = c
            if in_phase:
                left = False
                if cls0 == CLS_CRIT or cls0 == CLS_RAY:
                    left = R >= 0.0 or S <= 0.0
                elif cls0 == CLS_FOLLOW:
                    left = R >= 0.0
                if left:
                    in_phase = False
                    summary[S_TEXIT] = step * dt
                else:
                    if eps0 != 0.0 and abs(eps0) > 0.0:
                        summary[S_EPSRATIO] = min(summary[S_EPSRATIO], abs(eps) / abs(eps0))
                    summary[S_PHASEDIST] = min(summary[S_PHASEDIST], nd)
                    summary[S_PHASEVB] = max(summary[S_PHASEVB], vb)
            summary[S_VBRATIO] = max(summary[S_VBRATIO], vb / vb0)
            summary[S_MAXS] = max(summary[S_MAXS], S)
            summary[S_MINR] = min(summary[S_MINR], R)
            if S0 != 0.0:
                summary[S_MINSQRATIO] = min(summary[S_MINSQRATIO], (S * S) / (S0 * S0))
        # forces
        if mode == MODE_FULL or mode == MODE_APF:
            _vlc(x, v, goal, kp, kv, vmax, fvl)
        else:
            fvl[0] = 0.0
            fvl[1] = 0.0
            fvl[2] = 0.0
        speed = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        gdist = math.sqrt((goal[0] - x[0]) ** 2 + (goal[1] - x[1]) ** 2 + (goal[2] - x[2]) ** 2)
        if mode == MODE_FULL:
            vf = v[0] * fvl[0] + v[1] * fvl[1] + v[2] * fvl[2]
            # at rest there is no speed to protect: the gate stays on
            if vf <= 0.0 and 0.0 < speed <= vmin and gdist > xi:
                gate = 0
                summary[S_GATEOFFT] = step * dt
        if mode == MODE_APF:
            ftot[0] = fvl[0]
            ftot[1] = fvl[1]
            ftot[2] = fvl[2]
            _apf(x, pts, fp[P_ETA], fp[P_RHO0], ftot)
            fcf[0] = ftot[0] - fvl[0]
            fcf[1] = ftot[1] - fvl[1]
            fcf[2] = ftot[2] - fvl[2]
        else:
            for j in range(3):
                ftot[j] = fcf[j] + kscale * gate * fvl[j]
        z[0] = 0.0
        z[1] = 0.0
        z[2] = 0.0
        if dkind != DIST_NONE and near >= 0:
            if dkind == DIST_ADVERSARIAL:
                _disturbance(dkind, fp[P_ZMAX], planar, x, v, pnear, bnear,
                             -1.0 if kslot[slot[near]] < 0.0 else 1.0, abs(kslot[slot[near]]), z)
            else:
                if int(carry[K_HOLD]) <= 0:
                    _disturbance(dkind, fp[P_ZMAX], planar, x, v, pnear, bnear, 1.0, 1.0, z)
                    carry[K_Z] = z[0]
                    carry[K_Z + 1] = z[1]
                    carry[K_Z + 2] = z[2]
                    carry[K_HOLD] = hold
                z[0] = carry[K_Z]
                z[1] = carry[K_Z + 1]
                z[2] = carry[K_Z + 2]
                carry[K_HOLD] -= 1.0
            if ip[F_BAND] != 0:
                _speed_band(v, z, fp[P_BANDLO], fp[P_BANDHI])
            for j in range(3):
                ftot[j] += z[j]
            zn = math.sqrt(z[0] * z[0] + z[1] * z[1] + z[2] * z[2])
            summary[S_MAXZ] = max(summary[S_MAXZ], zn)
        fn = math.sqrt(ftot[0] * ftot[0] + ftot[1] * ftot[1] + ftot[2] * ftot[2])
        summary[S_MAXF] = max(summary[S_MAXF], fn)
        if s0 > 0.0:
            summary[S_SPEEDDEV] = max(summary[S_SPEEDDEV], abs(speed - s0) / s0)
        if mode == MODE_FULL and gdist > xi:
            summary[S_VMINFAR] = min(summary[S_VMINFAR], speed)
            summary[S_VMAXFAR] = max(summary[S_VMAXFAR], speed)
        # termination tests on the current state
        if not (math.isfinite(fn) and math.isfinite(x[0]) and math.isfinite(x[1])
                and math.isfinite(x[2]) and math.isfinite(speed)):
            code = T_NONFINITE
        elif near >= 0 and nd < fp[P_COLLR]:
            code = T_COLLISION
        elif (mode == MODE_FULL or mode == MODE_APF) and gdist <= fp[P_GOALTOL]:
            code = T_GOAL
        elif near >= 0 and nd > fp[P_STOPR]:
            code = T_ESCAPED
        elif ip[F_STOPEXIT] != 0 and not in_phase:
            code = T_EXIT
        else:
            if speed < fp[P_STALLV] and gate == 1:
                carry[K_STALL] += 1.0
            else:
                carry[K_STALL] = 0.0
            if carry[K_STALL] >= ip[F_STALLN]:
                code = T_STALLED
            elif step >= n_steps:
                code = T_HORIZON
            else:
                code = -1
        if (step % stride == 0 or code >= 0) and n_rows < rec.shape[0]:
            r = rec[n_rows]
            r[C_T] = step * dt
            for j in range(3):
                r[C_X + j] = x[j]
                r[C_V + j] = v[j]
                r[C_FCF + j] = fcf[j]
                r[C_FVLC + j] = fvl[j]
                r[C_Z + j] = z[j]
            r[C_R] = R
            r[C_S] = S
            r[C_EPS] = eps
            r[C_VB] = vb
            r[C_GATE] = gate
            r[C_KUSED] = kused
            r[C_DIST] = nd
            r[C_NEAR] = near
            n_rows += 1
        if code >= 0:
            break
        # explicit Euler: velocity first, position with the old velocity
        v_old0, v_old1, v_old2 = v[0], v[1], v[2]
        if mode == MODE_FULL and gate == 1 and kscale == 1.0:
            V0 = 0.5 * speed * speed + _huber(x, goal, kp, kv, vmax)
        v[0] = v[0] + ftot[0] * dt
        v[1] = v[1] + ftot[1] * dt
        v[2] = v[2] + ftot[2] * dt
        summary[S_PATHLEN] += speed * dt
        x[0] = x[0] + v_old0 * dt
        x[1] = x[1] + v_old1 * dt
        x[2] = x[2] + v_old2 * dt
        if planar:
            v[2] = 0.0
            x[2] = 0.0
        if mode == MODE_FULL and gate == 1 and kscale == 1.0:
            V1 = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) + _huber(x, goal, kp, kv, vmax)
            tol = 0.5 * dt * dt * (fn * fn + kp * speed * speed) + 1e-12 * max(1.0, abs(V0))
            summary[S_LYAPEXCESS] = max(summary[S_LYAPEXCESS], (V1 - V0) - tol)
            summary[S_NLYAP] += 1.0
        step += 1
    summary[S_STEP] = step
    return n_rows, code


def new_summary():
    s = np.zeros(N_SUMMARY)
    s[S_MINDIST] = np.inf
    s[S_TEXIT] = -1.0
    s[S_EPSRATIO] = np.inf
    s[S_PHASEDIST] = np.inf
    s[S_PHASEVB] = 0.0
    s[S_VBRATIO] = 0.0
    s[S_ENCSLOT] = -1.0
    s[S_VMINFAR] = np.inf
    s[S_VMAXFAR] = 0.0
    s[S_LYAPEXCESS] = -np.inf
    s[S_MAXS] = -np.inf
    s[S_MINR] = np.inf
    s[S_MINSQRATIO] = np.inf
    s[S_EPS0] = np.nan
    s[S_CLASS0] = CLS_NONE
    s[S_MINEPSAFTER] = np.inf
    s[S_GATEOFFT] = -np.inf
    return s


def new_carry():
    c = np.zeros(N_CARRY)
    c[K_LATCH] = -1.0
    return c


@njit(cache=True, nogil=True)
def run_rs(R0, S0, v0, k_cf, dt, n_steps, stride, dkind, zmax, hold, seed, band_lo, band_hi,
           coll_r, stop_on_exit, rec, summary):
    """Euler on the planar (R, S, |v|^2) system with an optional disturbance.

    The disturbance is given in the frame of the obstacle point: a radial
    part z_r along x and a tangential part z_t along b x x_hat. Rows hold
    (t, R, S, v^2, eps). Returns (rows written, collided).
    """
    if dkind == DIST_RANDOM or dkind == DIST_RANDOM_MAG:
        np.random.seed(seed)
    R = R0
    S = S0
    w = v0 * v0
    c0 = k_cf / w
    eps0 = S0 + c0 * R0
    cls0 = _class_of(R0, S0, eps0)
    rho0 = R0 * R0 + S0 * S0
    vb0 = w / rho0
    in_phase = True
    zr = 0.0
    zt = 0.0
    left_hold = 0
    n_rows = 0
    collided = False
    step = 0
    while True:
        rho = R * R + S * S
        c = k_cf / w
        eps = S + c * R
        xn = math.sqrt(rho / w)
        vb = w / rho if rho > 0.0 else np.inf
        summary[S_MINDIST] = min(summary[S_MINDIST], xn)
        summary[S_VBRATIO] = max(summary[S_VBRATIO], vb / vb0)
        summary[S_MAXS] = max(summary[S_MAXS], S)
        summary[S_MINR] = min(summary[S_MINR], R)
        if S0 != 0.0:
            summary[S_MINSQRATIO] = min(summary[S_MINSQRATIO], S * S / (S0 * S0))
        if in_phase:
            left = False
            if cls0 == CLS_CRIT or cls0 == CLS_RAY:
                left = R >= 0.0 or S <= 0.0
            elif cls0 == CLS_FOLLOW:
                left = R >= 0.0
            if left:
                in_phase = False
                summary[S_TEXIT] = step * dt
            else:
                if eps0 != 0.0:
                    summary[S_EPSRATIO] = min(summary[S_EPSRATIO], abs(eps) / abs(eps0))
                summary[S_PHASEDIST] = min(summary[S_PHASEDIST], xn)
                summary[S_PHASEVB] = max(summary[S_PHASEVB], vb)
        stop = False
        if xn < coll_r or rho == 0.0:
            collided = True
            stop = True
        elif stop_on_exit and not in_phase:
            stop = True
        elif step >= n_steps:
            stop = True
        if (step % stride == 0 or stop) and n_rows < rec.shape[0]:
            rec[n_rows, 0] = step * dt
            rec[n_rows, 1] = R
            rec[n_rows, 2] = S
            rec[n_rows, 3] = w
            rec[n_rows, 4] = eps
            n_rows += 1
        if stop:
            break
        dR = k_cf * R * S / rho + w
        dS = -k_cf * R * R / rho
        dw = 0.0
        if dkind != DIST_NONE:
            if dkind == DIST_ADVERSARIAL:
                # steepest direction against the active guarantee
                if R >= 0.0:
                    gr, gt = -1.0, 0.0
                elif S <= 0.0:
                    gr, gt = 0.0, 1.0
                else:
                    # d eps / d z = x_hat-frame gradient of S + c R with c varying
                    v = math.sqrt(w)
                    vr = R / xn
                    vt = S / xn
                    gr = c * xn - 2.0 * c * R * vr / w
                    gt = xn - 2.0 * c * R * vt / w
                    if eps > 0.0:
                        gr, gt = -gr, -gt
                gn = math.sqrt(gr * gr + gt * gt)
                zr = zmax * gr / gn
                zt = zmax * gt / gn
            elif left_hold <= 0:
                mag = zmax
                if dkind == DIST_RANDOM_MAG:
                    mag = zmax * np.random.random()
                a = 2.0 * math.pi * np.random.random()
                zr = mag * math.cos(a)
                zt = mag * math.sin(a)
                left_hold = max(hold, 1)
            left_hold -= 1
            vr = R / xn
            vt = S / xn
            vz = vr * zr + vt * zt
            s = math.sqrt(w)
            if (s >= band_hi and vz > 0.0) or (s <= band_lo and vz < 0.0):
                # remove the part of z along v
                f = vz / w
                zr -= f * vr
                zt -= f * vt
                vz = 0.0
            dR += xn * zr
            dS += xn * zt
            dw = 2.0 * vz
        R = R + dR * dt
        S = S + dS * dt
        w = w + dw * dt
        step += 1
    summary[S_STEP] = step
    return n_rows, collided
