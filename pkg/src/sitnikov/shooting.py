"""Symmetric shooting on the quarter window [0, pi*q/2].

An even solution that is anti-periodic with anti-period pi*q is fixed by
z(0) = zeta, z'(0) = 0 and the single condition z(pi*q/2) = 0; the rest of
the orbit follows by reflection. With ``relaxed=True`` the class is even and
2*pi*q-periodic instead, and the condition becomes z'(pi*q) = 0 on the half
window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (CountMismatch, DegenerateProfile, IntegratorFailure, NonFiniteState,
                     ResidualTooLarge)
from .field import _check_lambda
from .primaries import PrimaryEnsemble

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-10
MAX_STEPS = 2_000_000

ANTIPERIODIC = "antiperiodic"
EVEN_PERIODIC = "even-periodic"


def default_quarter_points(p: int, q: int) -> int:
    return 64 * (p + q)


def _window(q, relaxed):
    return math.pi * q if relaxed else 0.5 * math.pi * q


def _run(system, y0, tgrid, ensemble, lam, rtol, atol, extra=None):
    m = ensemble.model
    Y, nacc, nrej, status = kernels.integrate_grid(
        system, np.ascontiguousarray(y0, dtype=float), np.ascontiguousarray(tgrid, dtype=float),
        float(rtol), float(atol), MAX_STEPS, *m.args(), float(lam),
        np.zeros(4) if extra is None else np.asarray(extra, dtype=float))
    if status == kernels.STATUS_NONFINITE:
        raise NonFiniteState("state became non-finite during integration")
    if status != kernels.STATUS_OK:
        raise IntegratorFailure(f"integrator stopped (status {status}) after {nacc} steps, "
                                f"rtol={rtol:g}")
    return Y, {"steps": int(nacc), "rejected": int(nrej), "rtol": float(rtol), "atol": float(atol)}


@dataclass(frozen=True, eq=False)
class ShotResult:
    zeta: float
    lam: float
    p: int
    q: int
    residual: float
    derivative_wrt_amplitude: float
    derivative_wrt_lambda: float
    t: np.ndarray
    z: np.ndarray
    zdot: np.ndarray
    integrator_stats: dict
    mode: str = ANTIPERIODIC

    @property
    def quarter_profile(self):
        return self.t, self.z, self.zdot


def shoot(ensemble: PrimaryEnsemble, zeta: float, lam: float, p: int, q: int,
          rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, n_points: int | None = None,
          relaxed: bool = False) -> ShotResult:
    """Integrate from (zeta, 0) over the reduced window with both variational flows.

    The residual is z(pi*q/2) (``relaxed``: z'(pi*q)); its derivatives with
    respect to zeta and lambda come from the linearized flows.
    """
    lam = _check_lambda(lam)
    K = n_points or default_quarter_points(p, q)
    if relaxed:
        K *= 2
    t = np.linspace(0.0, _window(q, relaxed), K + 1)
    Y, stats = _run(kernels.SYS_SATELLITE_VAR, [zeta, 0.0, 1.0, 0.0, 0.0, 0.0], t, ensemble, lam,
                    rtol, atol)
    last = Y[-1]
    if relaxed:
        res, dz, dl = last[1], last[3], last[5]
    else:
        res, dz, dl = last[0], last[2], last[4]
    return ShotResult(float(zeta), lam, int(p), int(q), float(res), float(dz), float(dl),
                      t, Y[:, 0].copy(), Y[:, 1].copy(), stats,
                      EVEN_PERIODIC if relaxed else ANTIPERIODIC)


# --------------------------------------------------------------------------
# full profiles
# --------------------------------------------------------------------------

@dataclass(eq=False)
class FullProfile:
    """Samples on the uniform grid over [0, 2*pi*q] (endpoint included).

    The grid has 4K intervals so that pi*q/2, pi*q and 3*pi*q/2 are nodes.
    """
    t: np.ndarray
    z: np.ndarray
    zdot: np.ndarray
    p: int
    q: int
    lam: float | None = None
    mode: str = ANTIPERIODIC
    zddot: np.ndarray | None = None
    zero_count: int | None = None
    junctions: dict = field(default_factory=dict)

    @property
    def K(self):
        return (len(self.t) - 1) // 4

    @property
    def period(self):
        return float(self.t[-1] - self.t[0])

    @property
    def sup_norm(self):
        return float(np.abs(self.z).max())

    def symmetry_residuals(self) -> dict:
        z, zd, K = self.z, self.zdot, self.K
        n = len(z) - 1
        even = float(np.abs(z - z[::-1]).max())
        anti = float(np.abs(z[2 * K:] + z[:2 * K + 1]).max())
        mid = float(max(abs(z[K]), abs(z[3 * K])))
        per = float(max(abs(z[n] - z[0]), abs(zd[n] - zd[0])))
        out = {"evenness": even, "periodicity": per}
        if self.mode == ANTIPERIODIC:
            out["antiperiodicity"] = anti
            out["midpoint_zero"] = mid
        return out

    def to_csv(self, path):
        data = np.column_stack([self.t, self.z, self.zdot])
        np.savetxt(path, data, delimiter=",", header="t,z,zdot", comments="", fmt="%.17g")


def _one_sided_slope(z, h):
    # 4th-order backward difference at the last sample
    return (25 * z[-1] - 48 * z[-2] + 36 * z[-3] - 16 * z[-4] + 3 * z[-5]) / (12 * h)


def reconstruct_full(t, z, zdot, p: int, q: int, lam: float | None = None,
                     residual_tol: float = 1e-8, junction_tol: float = 1e-4,
                     relaxed: bool = False) -> FullProfile:
    """Extend a reduced-window profile to [0, 2*pi*q] by the symmetries.

    ``junction_tol`` is relative to sup|z'|. Raises ResidualTooLarge when the
    end condition fails or the C1 junction check does.
    """
    t = np.asarray(t, dtype=float)
    z = np.asarray(z, dtype=float)
    zd = np.asarray(zdot, dtype=float)
    h = t[1] - t[0]
    end_value = zd[-1] if relaxed else z[-1]
    if abs(end_value) > residual_tol:
        raise ResidualTooLarge(f"end condition residual {abs(end_value):.3e} exceeds {residual_tol:.1e}")
    scale = max(1.0, float(np.abs(zd).max()))
    if relaxed:
        K2 = len(t) - 1                      # half window has 2K intervals
        zf = np.concatenate([z, z[-2::-1]])
        zdf = np.concatenate([zd, -zd[-2::-1]])
        jumps = {"derivative_at_half": 2.0 * abs(zd[-1]), "derivative_at_zero": 2.0 * abs(zd[0]),
                 "slope_mismatch_at_half": abs(_one_sided_slope(z, h) - zd[-1])}
        N = 2 * K2
    else:
        K = len(t) - 1
        half_z = np.concatenate([z, -z[-2::-1]])          # [0, pi q]
        half_zd = np.concatenate([zd, zd[-2::-1]])
        zf = np.concatenate([half_z, -half_z[1:]])
        zdf = np.concatenate([half_zd, -half_zd[1:]])
        jumps = {"value_at_quarter": 2.0 * abs(z[-1]), "derivative_at_half": 2.0 * abs(zd[0]),
                 "slope_mismatch_at_quarter": abs(_one_sided_slope(z, h) - zd[-1])}
        N = 4 * K
    worst = max(jumps.values())
    if worst > max(junction_tol * scale, 2.0 * residual_tol):
        raise ResidualTooLarge(f"C1 junction check failed: {jumps}")
    tf = np.linspace(0.0, 2.0 * math.pi * q, N + 1)
    return FullProfile(tf, zf, zdf, int(p), int(q), lam, EVEN_PERIODIC if relaxed else ANTIPERIODIC,
                       junctions=jumps)


def full_from_shot(shot: ShotResult, **kw) -> FullProfile:
    return reconstruct_full(shot.t, shot.z, shot.zdot, shot.p, shot.q, shot.lam,
                            relaxed=shot.mode == EVEN_PERIODIC, **kw)


def integrate_full(ensemble: PrimaryEnsemble, zeta: float, lam: float, p: int, q: int,
                   rtol: float = 1e-12, atol: float = 1e-12, n_points: int | None = None,
                   relaxed: bool = False) -> FullProfile:
    """Direct integration over the whole period (no symmetry used)."""
    lam = _check_lambda(lam)
    K = n_points or default_quarter_points(p, q)
    t = np.linspace(0.0, 2.0 * math.pi * q, 4 * K + 1)
    Y, _ = _run(kernels.SYS_SATELLITE, [zeta, 0.0], t, ensemble, lam, rtol, atol)
    prof = FullProfile(t, Y[:, 0].copy(), Y[:, 1].copy(), int(p), int(q), lam,
                       EVEN_PERIODIC if relaxed else ANTIPERIODIC)
    m = ensemble.model
    prof.zddot = kernels.satellite_rhs_grid(t, prof.z, lam, *m.args())
    return prof


# --------------------------------------------------------------------------
# zero counting
# --------------------------------------------------------------------------

def spectral_derivative(values: np.ndarray, period: float) -> np.ndarray:
    """Derivative of periodic samples (last sample = first, included)."""
    v = np.asarray(values[:-1], dtype=float)
    N = len(v)
    k = np.fft.fftfreq(N, d=1.0 / N) * (2.0 * math.pi / period)
    if N % 2 == 0:
        k[N // 2] = 0.0
    d = np.fft.ifft(1j * k * np.fft.fft(v)).real
    return np.append(d, d[0])


def _acceleration(profile: FullProfile, accel=None):
    if accel is not None:
        return np.asarray(accel(profile.t, profile.z), dtype=float)
    if profile.zddot is not None:
        return profile.zddot
    return spectral_derivative(profile.zdot, profile.period)


def winding_number(profile: FullProfile, accel=None, min_radius: float = 1e-12) -> float:
    """(1/pi) * integral of (z'^2 - z'' z) / (z^2 + z'^2) over one period."""
    z, zd = profile.z[:-1], profile.zdot[:-1]
    r2 = z * z + zd * zd
    if r2.min() < min_radius ** 2:
        raise DegenerateProfile(f"z^2 + z'^2 drops to {r2.min():.3e}")
    zdd = _acceleration(profile, accel)[:-1]
    integrand = (zd * zd - zdd * z) / r2
    h = profile.period / len(z)
    return float(integrand.sum() * h / math.pi)


def sign_changes(z: np.ndarray) -> int:
    """Cyclic sign changes of periodic samples (last sample = first)."""
    v = np.asarray(z[:-1], dtype=float)
    v = v[v != 0.0]
    if len(v) == 0:
        return 0
    s = np.sign(v)
    return int(np.count_nonzero(s != np.roll(s, -1)))


def count_zeros(profile: FullProfile, accel=None, min_radius: float = 1e-12,
                max_fraction: float = 0.25) -> int:
    """Zero count from the winding integral, cross-checked by sign changes."""
    w = winding_number(profile, accel, min_radius)
    n = int(round(w))
    if abs(w - n) > max_fraction:
        raise CountMismatch(f"winding integral {w:.6f} is not near an integer")
    sc = sign_changes(profile.z)
    if sc != n:
        raise CountMismatch(f"winding integral gives {n}, sign changes give {sc}")
    profile.zero_count = n
    return n


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------

@dataclass
class VerificationReport:
    lam: float
    ode_residual: float
    derivative_consistency: float
    symmetry: dict
    zero_count: int | None
    expected_zero_count: int
    sup_norm: float
    tol: float
    symmetry_tol: float
    flags: list
    passed: bool

    def to_json(self):
        return {"lambda": self.lam, "ode_residual": self.ode_residual,
                "derivative_consistency": self.derivative_consistency,
                "symmetry": self.symmetry, "zero_count": self.zero_count,
                "expected_zero_count": self.expected_zero_count, "sup_norm": self.sup_norm,
                "tol": self.tol, "symmetry_tol": self.symmetry_tol, "flags": list(self.flags),
                "passed": bool(self.passed)}


def verify_solution(profile: FullProfile, ensemble: PrimaryEnsemble, lam: float,
                    tol: float = 1e-6, symmetry_tol: float = 1e-8) -> VerificationReport:
    """Re-check a full profile against the ODE, the symmetries and the zero count.

    The ODE residual compares the spectral derivative of z' with the force
    evaluated on the samples; nothing from the integrator is reused.
    """
    lam = _check_lambda(lam)
    m = ensemble.model
    force = kernels.satellite_rhs_grid(np.ascontiguousarray(profile.t), np.ascontiguousarray(profile.z),
                                       lam, *m.args())
    zdd_num = spectral_derivative(profile.zdot, profile.period)
    zd_num = spectral_derivative(profile.z, profile.period)
    ode = float(np.abs(zdd_num - force).max())
    cons = float(np.abs(zd_num - profile.zdot).max())
    sym = profile.symmetry_residuals()
    flags = []
    zc = None
    try:
        zc = count_zeros(profile, accel=lambda t, z: force)
    except DegenerateProfile:
        flags.append("DegenerateProfile")
    except CountMismatch:
        flags.append("CountMismatch")
    expected = 2 * profile.p
    if zc is not None and zc != expected:
        flags.append("ZeroCountMismatch")
    if ode > tol or cons > tol:
        flags.append("OdeResidual")
    if max(sym.values()) > symmetry_tol:
        flags.append("SymmetryResidual")
    return VerificationReport(lam, ode, cons, sym, zc, expected, profile.sup_norm, tol, symmetry_tol,
                              flags, passed=not flags)
