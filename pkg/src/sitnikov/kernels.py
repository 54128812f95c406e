"""Hot numerical kernels: primary radii, right-hand sides and an adaptive
Dormand-Prince 5(4) integrator that lands exactly on a prescribed output grid.

All functions here are written in the numba-compatible subset so the same
source runs compiled or as plain Python (see ``_jit``).

Radius model layout (one row per primary):

    kind[j]   0 = constant radius fc[j, 0]
              1 = Keplerian, kep[j] = (a, e, M0), mean anomaly 2t + M0
              2 = trigonometric series with base frequency 2 (period pi):
                  r(t) = fc[j, 0] + sum_k fc[j, k] cos(2kt) + fs[j, k] sin(2kt)
    mass[j], beta[j]  mass and maximal radius
"""
import math

import numpy as np

from ._jit import jit

SYS_SATELLITE_VAR = 0   # (z, zd, y, yd, s, sd): state + d/dzeta + d/dlambda flows
SYS_SATELLITE = 1       # (z, zd)
SYS_PRUFER = 2          # (theta,), extra = (eta, scale, wscale, woffset)
SYS_LINEAR = 3          # (z, zd) for -z'' + z = eta * w(t) * z

STATUS_OK = 0
STATUS_MAX_STEPS = 1
STATUS_NONFINITE = 2
STATUS_STEP_UNDERFLOW = 3


@jit
def kepler_E(M, e):
    """Eccentric anomaly from mean anomaly (Newton with a Danby start)."""
    twopi = 2.0 * math.pi
    Mr = M - twopi * math.floor((M + math.pi) / twopi)
    if e == 0.0:
        return M
    s = 1.0 if math.sin(Mr) >= 0.0 else -1.0
    E = Mr + 0.85 * e * s
    for _ in range(60):
        f = E - e * math.sin(E) - Mr
        fp = 1.0 - e * math.cos(E)
        dE = -f / fp
        E += dE
        if abs(dE) <= 1e-15 * (1.0 + abs(E)):
            break
    return E + (M - Mr)


@jit
def radius(j, t, kind, kep, fc, fs):
    k = kind[j]
    if k == 0:
        return fc[j, 0]
    if k == 1:
        a = kep[j, 0]
        e = kep[j, 1]
        E = kepler_E(2.0 * t + kep[j, 2], e)
        return a * (1.0 - e * math.cos(E))
    # trigonometric series, cos/sin via angle-addition recurrence
    r = fc[j, 0]
    c1 = math.cos(2.0 * t)
    s1 = math.sin(2.0 * t)
    ck = c1
    sk = s1
    for m in range(1, fc.shape[1]):
        r += fc[j, m] * ck + fs[j, m] * sk
        ck, sk = ck * c1 - sk * s1, sk * c1 + ck * s1
    return r


@jit
def radii_grid(t, kind, kep, fc, fs):
    n = kind.shape[0]
    out = np.empty((n, t.shape[0]))
    for j in range(n):
        for i in range(t.shape[0]):
            out[j, i] = radius(j, t[i], kind, kep, fc, fs)
    return out


@jit
def weight_sum(t, lam, kind, mass, beta, kep, fc, fs):
    """sum_j m_j / rho_j(t; lam)^3."""
    acc = 0.0
    for j in range(kind.shape[0]):
        if lam == 0.0:
            rho = beta[j]
        else:
            rho = (1.0 - lam) * beta[j] + lam * radius(j, t, kind, kep, fc, fs)
        acc += mass[j] / (rho * rho * rho)
    return acc


@jit
def rhs(system, t, y, out, kind, mass, beta, kep, fc, fs, lam, extra):
    if system == SYS_PRUFER:
        eta = extra[0]
        sc = extra[1]
        w = extra[2] * weight_sum(t, lam, kind, mass, beta, kep, fc, fs) + extra[3]
        c = math.cos(y[0])
        s = math.sin(y[0])
        out[0] = sc * c * c + (eta * w - 1.0) / sc * s * s
        return
    if system == SYS_LINEAR:
        eta = extra[0]
        w = extra[2] * weight_sum(t, lam, kind, mass, beta, kep, fc, fs) + extra[3]
        out[0] = y[1]
        out[1] = (1.0 - eta * w) * y[0]
        return

    z = y[0]
    uz = 0.0
    uzz = 0.0
    uzl = 0.0
    for j in range(kind.shape[0]):
        if lam == 0.0:
            rho = beta[j]
            dr = 0.0
        else:
            rj = radius(j, t, kind, kep, fc, fs)
            rho = (1.0 - lam) * beta[j] + lam * rj
            dr = rj - beta[j]
        d2 = rho * rho + z * z
        inv3 = 1.0 / (d2 * math.sqrt(d2))
        mz = mass[j] * z
        uz += mz * inv3
        if system == SYS_SATELLITE_VAR:
            uzz += mass[j] * inv3 - 3.0 * mz * z * inv3 / d2
            uzl += -3.0 * mz * rho * inv3 / d2 * dr
    out[0] = y[1]
    out[1] = -uz
    if system == SYS_SATELLITE_VAR:
        out[2] = y[3]
        out[3] = -uzz * y[2]
        out[4] = y[5]
        out[5] = -uzz * y[4] - uzl


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@jit
def integrate_grid(system, y0, tgrid, rtol, atol, max_steps,
                   kind, mass, beta, kep, fc, fs, lam, extra):
    """Integrate from tgrid[0] and return the state at every grid time.

    Steps are clipped to land on the grid points, so samples carry the full
    step accuracy (no dense-output interpolation).

    Returns (Y, n_accepted, n_rejected, status).
    """
    dim = y0.shape[0]
    npts = tgrid.shape[0]
    Y = np.empty((npts, dim))
    Y[0, :] = y0
    y = y0.copy()
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    k5 = np.empty(dim)
    k6 = np.empty(dim)
    k7 = np.empty(dim)
    ytmp = np.empty(dim)
    ynew = np.empty(dim)

    t = tgrid[0]
    span = abs(tgrid[npts - 1] - tgrid[0])
    if npts < 2 or span == 0.0:
        for i in range(1, npts):
            Y[i, :] = y0
        return Y, 0, 0, STATUS_OK
    direction = 1.0 if tgrid[npts - 1] > tgrid[0] else -1.0

    rhs(system, t, y, k1, kind, mass, beta, kep, fc, fs, lam, extra)
    # initial step (Hairer-Wanner heuristic, simplified)
    d0 = 0.0
    d1 = 0.0
    for i in range(dim):
        sc = atol + rtol * abs(y[i])
        d0 += (y[i] / sc) ** 2
        d1 += (k1[i] / sc) ** 2
    d0 = math.sqrt(d0 / dim)
    d1 = math.sqrt(d1 / dim)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    h = min(h, 0.1 * span)
    h_min = 1e-14 * max(1.0, span)

    nacc = 0
    nrej = 0
    status = STATUS_OK
    for i in range(1, npts):
        t_target = tgrid[i]
        while direction * (t_target - t) > 0.0:
            if nacc + nrej >= max_steps:
                status = STATUS_MAX_STEPS
                break
            remaining = direction * (t_target - t)
            hs = h
            last = False
            if hs >= remaining:
                hs = remaining
                last = True
            hd = hs * direction
            for m in range(dim):
                ytmp[m] = y[m] + hd * _A21 * k1[m]
            rhs(system, t + _C2 * hd, ytmp, k2, kind, mass, beta, kep, fc, fs, lam, extra)
            for m in range(dim):
                ytmp[m] = y[m] + hd * (_A31 * k1[m] + _A32 * k2[m])
            rhs(system, t + _C3 * hd, ytmp, k3, kind, mass, beta, kep, fc, fs, lam, extra)
            for m in range(dim):
                ytmp[m] = y[m] + hd * (_A41 * k1[m] + _A42 * k2[m] + _A43 * k3[m])
            rhs(system, t + _C4 * hd, ytmp, k4, kind, mass, beta, kep, fc, fs, lam, extra)
            for m in range(dim):
                ytmp[m] = y[m] + hd * (_A51 * k1[m] + _A52 * k2[m] + _A53 * k3[m] + _A54 * k4[m])
            rhs(system, t + _C5 * hd, ytmp, k5, kind, mass, beta, kep, fc, fs, lam, extra)
            for m in range(dim):
                ytmp[m] = y[m] + hd * (_A61 * k1[m] + _A62 * k2[m] + _A63 * k3[m]
                                       + _A64 * k4[m] + _A65 * k5[m])
            rhs(system, t + hd, ytmp, k6, kind, mass, beta, kep, fc, fs, lam, extra)
            for m in range(dim):
                ynew[m] = y[m] + hd * (_B1 * k1[m] + _B3 * k3[m] + _B4 * k4[m]
                                       + _B5 * k5[m] + _B6 * k6[m])
            t_new = t_target if last else t + hd
            rhs(system, t_new, ynew, k7, kind, mass, beta, kep, fc, fs, lam, extra)

            err = 0.0
            finite = True
            for m in range(dim):
                if not math.isfinite(ynew[m]):
                    finite = False
                em = hd * (_E1 * k1[m] + _E3 * k3[m] + _E4 * k4[m] + _E5 * k5[m]
                           + _E6 * k6[m] + _E7 * k7[m])
                sc = atol + rtol * max(abs(y[m]), abs(ynew[m]))
                err += (em / sc) ** 2
            if not finite:
                status = STATUS_NONFINITE
                break
            err = math.sqrt(err / dim)

            if err <= 1.0:
                t = t_new
                for m in range(dim):
                    y[m] = ynew[m]
                    k1[m] = k7[m]
                nacc += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                hnew = hs * fac
                # a clipped final step must not shrink the proposed step
                if last:
                    h = max(h, hnew)
                else:
                    h = hnew
            else:
                nrej += 1
                h = hs * max(0.2, 0.9 * err ** -0.2)
                if h < h_min:
                    status = STATUS_STEP_UNDERFLOW
                    break
        if status != STATUS_OK:
            for r in range(i, npts):
                for m in range(dim):
                    Y[r, m] = math.nan
            break
        for m in range(dim):
            Y[i, m] = y[m]
    return Y, nacc, nrej, status


@jit
def satellite_rhs_grid(t, z, lam, kind, mass, beta, kep, fc, fs):
    """zddot = -dU/dz evaluated on sample arrays."""
    out = np.empty(t.shape[0])
    y = np.empty(2)
    d = np.empty(2)
    extra = np.zeros(4)
    for i in range(t.shape[0]):
        y[0] = z[i]
        y[1] = 0.0
        rhs(SYS_SATELLITE, t[i], y, d, kind, mass, beta, kep, fc, fs, lam, extra)
        out[i] = d[1]
    return out
