"""Tight integration loops, jitted.

One kernel per geometry.  Each integrates from t to t_end with adaptive
forward-Euler steps (or a forced step schedule), mutates u in place, and
records a strided (t, dt, linf, mass) trace into caller-allocated buffers.
Kernels are resumable: they stop at t_end, on an event, or after max_steps,
and report why via the code below.  All reductions run in fixed cell order,
so reruns are bit-identical.
"""

import numpy as np
from numba import njit

REACHED = 0        # hit t_end
BLOWUP = 1         # linf >= u_max after an accepted step
UNDERFLOW = 2      # stable dt fell below dt_min
STEP_CAP = 3       # max_steps accepted; call again to continue
UNSTABLE = 4       # NaN/Inf or negative beyond roundoff tolerance
FORCED_EXHAUSTED = 5


@njit(cache=True)
def _stable_dt(umax, h, dim, m, p, source_on, safety):
    tiny = 1e-300
    dt = safety * h * h / (2.0 * dim * m * umax ** (m - 1.0) + tiny)
    if source_on:
        dt_react = safety / (p * umax ** (p - 1.0) + tiny)
        if dt_react < dt:
            dt = dt_react
    return dt


@njit(cache=True)
def integrate_box1(u, h, m, p, source_on, periodic, t, t_end,
                   safety, u_max, dt_min, forced, fpos, max_steps,
                   rec_t, rec_dt, rec_linf, rec_mass, stride):
    n = u.shape[0]
    v = np.empty(n)
    inc = np.empty(n)
    inv_h2 = 1.0 / (h * h)
    nrec = 0
    steps = 0
    code = REACHED
    while t < t_end:
        umax = 0.0
        for i in range(n):
            if u[i] > umax:
                umax = u[i]
        if forced.size > 0:
            if fpos >= forced.size:
                code = FORCED_EXHAUSTED
                break
            dt = forced[fpos]
        else:
            dt = _stable_dt(umax, h, 1.0, m, p, source_on, safety)
            if dt < dt_min:
                code = UNDERFLOW
                break
        last = dt >= (t_end - t) * (1.0 - 1e-12)
        if last:
            dt = t_end - t

        if m == 1.0:
            for i in range(n):
                v[i] = u[i]
        else:
            for i in range(n):
                v[i] = u[i] ** m
        for i in range(n):
            left = v[i - 1] if i > 0 else (v[n - 1] if periodic else v[0])
            right = v[i + 1] if i < n - 1 else (v[0] if periodic else v[n - 1])
            inc[i] = (left - 2.0 * v[i] + right) * inv_h2
        neg_tol = 1e-14 * umax
        linf = 0.0
        mass = 0.0
        ok = True
        for i in range(n):
            un = u[i] + dt * inc[i]
            if source_on:
                un += dt * u[i] ** p
            if un < 0.0:
                if un >= -neg_tol:
                    un = 0.0
                else:
                    ok = False
                    break
            if not np.isfinite(un):
                ok = False
                break
            u[i] = un
            if un > linf:
                linf = un
            mass += un
        if not ok:
            code = UNSTABLE
            break
        mass *= h
        t = t_end if last else t + dt
        steps += 1
        if forced.size > 0:
            fpos += 1
        if linf >= u_max:
            code = BLOWUP
        if steps % stride == 0 or code != REACHED or t >= t_end:
            rec_t[nrec] = t
            rec_dt[nrec] = dt
            rec_linf[nrec] = linf
            rec_mass[nrec] = mass
            nrec += 1
        if code != REACHED:
            break
        if steps >= max_steps:
            code = STEP_CAP
            break
    return code, t, steps, fpos, nrec


@njit(cache=True)
def integrate_box2(u, h, m, p, source_on, periodic, t, t_end,
                   safety, u_max, dt_min, forced, fpos, max_steps,
                   rec_t, rec_dt, rec_linf, rec_mass, stride):
    n0, n1 = u.shape
    v = np.empty((n0, n1))
    inc = np.empty((n0, n1))
    inv_h2 = 1.0 / (h * h)
    nrec = 0
    steps = 0
    code = REACHED
    while t < t_end:
        umax = 0.0
        for i in range(n0):
            for j in range(n1):
                if u[i, j] > umax:
                    umax = u[i, j]
        if forced.size > 0:
            if fpos >= forced.size:
                code = FORCED_EXHAUSTED
                break
            dt = forced[fpos]
        else:
            dt = _stable_dt(umax, h, 2.0, m, p, source_on, safety)
            if dt < dt_min:
                code = UNDERFLOW
                break
        last = dt >= (t_end - t) * (1.0 - 1e-12)
        if last:
            dt = t_end - t

        if m == 1.0:
            for i in range(n0):
                for j in range(n1):
                    v[i, j] = u[i, j]
        else:
            for i in range(n0):
                for j in range(n1):
                    v[i, j] = u[i, j] ** m
        for i in range(n0):
            for j in range(n1):
                up = v[i - 1, j] if i > 0 else (v[n0 - 1, j] if periodic else v[0, j])
                dn = v[i + 1, j] if i < n0 - 1 else (v[0, j] if periodic else v[n0 - 1, j])
                lf = v[i, j - 1] if j > 0 else (v[i, n1 - 1] if periodic else v[i, 0])
                rt = v[i, j + 1] if j < n1 - 1 else (v[i, 0] if periodic else v[i, n1 - 1])
                inc[i, j] = (up + dn + lf + rt - 4.0 * v[i, j]) * inv_h2
        neg_tol = 1e-14 * umax
        linf = 0.0
        mass = 0.0
        ok = True
        for i in range(n0):
            if not ok:
                break
            for j in range(n1):
                un = u[i, j] + dt * inc[i, j]
                if source_on:
                    un += dt * u[i, j] ** p
                if un < 0.0:
                    if un >= -neg_tol:
                        un = 0.0
                    else:
                        ok = False
                        break
                if not np.isfinite(un):
                    ok = False
                    break
                u[i, j] = un
                if un > linf:
                    linf = un
                mass += un
        if not ok:
            code = UNSTABLE
            break
        mass *= h * h
        t = t_end if last else t + dt
        steps += 1
        if forced.size > 0:
            fpos += 1
        if linf >= u_max:
            code = BLOWUP
        if steps % stride == 0 or code != REACHED or t >= t_end:
            rec_t[nrec] = t
            rec_dt[nrec] = dt
            rec_linf[nrec] = linf
            rec_mass[nrec] = mass
            nrec += 1
        if code != REACHED:
            break
        if steps >= max_steps:
            code = STEP_CAP
            break
    return code, t, steps, fpos, nrec


@njit(cache=True)
def integrate_radial(u, h, dim, m, p, source_on, c_lo, c_hi, vols,
                     t, t_end, safety, u_max, dt_min, forced, fpos,
                     max_steps, rec_t, rec_dt, rec_linf, rec_mass, stride):
    """Conservative shell scheme: flux areas at faces, zero flux at r = 0
    and at the outer face.  c_lo/c_hi are the per-cell face coefficients
    A(r_k)/(vol_k h) and A(r_{k+1})/(vol_k h)."""
    n = u.shape[0]
    v = np.empty(n)
    inc = np.empty(n)
    nrec = 0
    steps = 0
    code = REACHED
    while t < t_end:
        umax = 0.0
        for i in range(n):
            if u[i] > umax:
                umax = u[i]
        if forced.size > 0:
            if fpos >= forced.size:
                code = FORCED_EXHAUSTED
                break
            dt = forced[fpos]
        else:
            dt = _stable_dt(umax, h, dim, m, p, source_on, safety)
            if dt < dt_min:
                code = UNDERFLOW
                break
        last = dt >= (t_end - t) * (1.0 - 1e-12)
        if last:
            dt = t_end - t

        if m == 1.0:
            for i in range(n):
                v[i] = u[i]
        else:
            for i in range(n):
                v[i] = u[i] ** m
        for i in range(n):
            flux = 0.0
            if i < n - 1:
                flux += c_hi[i] * (v[i + 1] - v[i])
            if i > 0:
                flux -= c_lo[i] * (v[i] - v[i - 1])
            inc[i] = flux
        neg_tol = 1e-14 * umax
        linf = 0.0
        mass = 0.0
        ok = True
        for i in range(n):
            un = u[i] + dt * inc[i]
            if source_on:
                un += dt * u[i] ** p
            if un < 0.0:
                if un >= -neg_tol:
                    un = 0.0
                else:
                    ok = False
                    break
            if not np.isfinite(un):
                ok = False
                break
            u[i] = un
            if un > linf:
                linf = un
            mass += un * vols[i]
        if not ok:
            code = UNSTABLE
            break
        t = t_end if last else t + dt
        steps += 1
        if forced.size > 0:
            fpos += 1
        if linf >= u_max:
            code = BLOWUP
        if steps % stride == 0 or code != REACHED or t >= t_end:
            rec_t[nrec] = t
            rec_dt[nrec] = dt
            rec_linf[nrec] = linf
            rec_mass[nrec] = mass
            nrec += 1
        if code != REACHED:
            break
        if steps >= max_steps:
            code = STEP_CAP
            break
    return code, t, steps, fpos, nrec
