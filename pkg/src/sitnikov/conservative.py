"""The autonomous problem at lambda = 0.

With every primary frozen at its maximal radius the satellite obeys
z'' = -U0'(z), U0(z) = -sum_j m_j / sqrt(z^2 + beta_j^2). Energies range over
(E_min, 0) with E_min = U0(0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import kernels
from .errors import (AntiperiodicityUnattainable, BracketFailure, EnergyOutOfRange, NoSeed,
                     SeedInvalid)
from .primaries import PrimaryEnsemble
from .shooting import (ANTIPERIODIC, EVEN_PERIODIC, FullProfile, _run, count_zeros,
                       default_quarter_points)

SEED_RTOL = 1e-12
SEED_ATOL = 1e-13


def _mb(ensemble):
    return ensemble.masses, np.asarray(ensemble.constants.beta_j, dtype=float)


def U0(ensemble: PrimaryEnsemble, z):
    m, b = _mb(ensemble)
    z = np.asarray(z, dtype=float)
    return -(m / np.sqrt(np.multiply.outer(z * z, np.ones_like(b)) + b * b)).sum(axis=-1)


def U0_derivatives(ensemble, z):
    """(U0', U0'') at z."""
    m, b = _mb(ensemble)
    z = np.asarray(z, dtype=float)[..., None]
    d2 = z * z + b * b
    inv3 = d2 ** -1.5
    return (m * z * inv3).sum(-1), (m * inv3 - 3.0 * m * z * z * inv3 / d2).sum(-1)


def energy_min(ensemble) -> float:
    return float(U0(ensemble, 0.0))


def _check_energy(ensemble, E):
    Emin = energy_min(ensemble)
    if not (Emin < E < 0.0):
        raise EnergyOutOfRange(f"E={E!r} outside ({Emin!r}, 0)")
    return Emin


def amplitude_of_energy(ensemble: PrimaryEnsemble, E: float) -> float:
    """Positive root of U0(zeta) = E."""
    _check_energy(ensemble, E)
    f = lambda z: float(U0(ensemble, z)) - E
    # U0(z) > -1/z for unit total mass, so the root lies below 1/|E|
    hi = 1.0 / abs(E) * max(1.0, float(ensemble.masses.sum()))
    zeta = brentq(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    d1, _ = U0_derivatives(ensemble, zeta)
    if d1 > 0:
        zeta -= f(zeta) / float(d1)
    return float(max(zeta, 0.0))


_GL_CACHE = {}


def _gauss_legendre(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.25 * math.pi * (x + 1.0), 0.25 * math.pi * w)
    return _GL_CACHE[n]


def period_of_amplitude(ensemble: PrimaryEnsemble, zeta: float, rtol: float = 1e-14) -> float:
    """Period of the oscillation with turning point ``zeta``.

    With z = zeta sin(phi) the period integral becomes
    2 sqrt(2) * int_0^{pi/2} G(phi)^(-1/2) dphi,
    G = sum_j m_j / (s_w s_zeta (s_w + s_zeta)), s_x = sqrt(beta_j^2 + x^2),
    which is smooth and free of the difference E - U0(z).
    """
    m, b = _mb(ensemble)
    s_zeta = np.sqrt(b * b + zeta * zeta)
    prev = None
    n = 32
    while n <= 4096:
        phi, w = _gauss_legendre(n)
        zw = zeta * np.sin(phi)[:, None]
        s_w = np.sqrt(b * b + zw * zw)
        G = (m / (s_w * s_zeta * (s_w + s_zeta))).sum(axis=1)
        T = 2.0 * math.sqrt(2.0) * float(np.sum(w / np.sqrt(G)))
        if prev is not None and abs(T - prev) <= rtol * T:
            return T
        prev = T
        n *= 2
    return prev


def period_function(ensemble: PrimaryEnsemble, E: float) -> float:
    _check_energy(ensemble, E)
    return period_of_amplitude(ensemble, amplitude_of_energy(ensemble, E))


def minimal_period(ensemble) -> float:
    """Small-oscillation limit 2*pi/sqrt(beta)."""
    return 2.0 * math.pi / math.sqrt(ensemble.constants.beta)


def period_by_integration(ensemble: PrimaryEnsemble, E: float, rtol: float = 1e-13,
                          atol: float = 1e-14) -> float:
    """Twice the time between consecutive zeros of the IVP (zeta(E), 0).

    Independent check of ``period_function`` (scipy DOP853 with event location).
    """
    zeta = amplitude_of_energy(ensemble, E)
    m, b = _mb(ensemble)

    def f(t, y):
        return [y[1], -float(np.sum(m * y[0] / (b * b + y[0] ** 2) ** 1.5))]

    def crossing(t, y):
        return y[0]
    crossing.terminal = 2

    horizon = 4.0 * period_of_amplitude(ensemble, zeta) + 10.0
    sol = solve_ivp(f, (0.0, horizon), [zeta, 0.0], method="DOP853", rtol=rtol, atol=atol,
                    events=crossing)
    tz = sol.t_events[0]
    if len(tz) < 2:
        raise BracketFailure("fewer than two zero crossings found")
    return float(2.0 * (tz[1] - tz[0]))


@dataclass(frozen=True)
class EnergyLevel:
    E: float
    zeta: float
    period: float


@dataclass(eq=False)
class SeedSolution:
    p: int
    q: int
    level: EnergyLevel
    profile: FullProfile
    zero_count: int
    relaxed: bool = False
    ensemble: PrimaryEnsemble = field(default=None, repr=False)

    @property
    def zeta(self):
        return self.level.zeta

    def energy_drift(self) -> float:
        E = 0.5 * self.profile.zdot ** 2 + U0(self.ensemble, self.profile.z)
        return float(np.abs(E - self.level.E).max())

    def to_json(self):
        return {"p": self.p, "q": self.q, "E": self.level.E, "zeta": self.level.zeta,
                "T": self.level.period, "zero_count": self.zero_count, "relaxed": self.relaxed,
                "symmetry": self.profile.symmetry_residuals(),
                "energy_drift": self.energy_drift()}


def conservative_profile(ensemble, zeta, p, q, n_points=None, rtol=SEED_RTOL, atol=SEED_ATOL,
                         relaxed=False) -> FullProfile:
    K = n_points or default_quarter_points(p, q)
    t = np.linspace(0.0, 2.0 * math.pi * q, 4 * K + 1)
    Y, _ = _run(kernels.SYS_SATELLITE, [zeta, 0.0], t, ensemble, 0.0, rtol, atol)
    zdd = -U0_derivatives(ensemble, Y[:, 0])[0]
    return FullProfile(t, Y[:, 0].copy(), Y[:, 1].copy(), int(p), int(q), 0.0,
                       EVEN_PERIODIC if relaxed else ANTIPERIODIC, zddot=zdd)


def solve_seed(ensemble: PrimaryEnsemble, p: int, q: int, relaxed: bool = False,
               n_points: int | None = None, symmetry_tol: float = 1e-8) -> SeedSolution:
    """lambda = 0 orbit with minimal period 2*pi*q/p and 2p zeros on [0, 2*pi*q].

    Raises NoSeed when p >= sqrt(beta) q (no admissible energy), and
    AntiperiodicityUnattainable for even p unless ``relaxed``.
    """
    if int(p) != p or int(q) != q or p < 1 or q < 1:
        raise ValueError("p and q must be positive integers")
    p, q = int(p), int(q)
    target = 2.0 * math.pi * q / p
    if target <= minimal_period(ensemble):
        raise NoSeed(f"p > sqrt(beta)*q: p={p}, q={q}, sqrt(beta)={math.sqrt(ensemble.constants.beta):.6g}")
    if p % 2 == 0 and not relaxed:
        raise AntiperiodicityUnattainable(
            f"even p={p}: the seed satisfies w(t + pi q) = w(t), not -w(t); use relaxed symmetry")

    Emin = energy_min(ensemble)
    E_lo = Emin + 1e-10 * abs(Emin)
    T = lambda E: period_function(ensemble, E) - target
    if T(E_lo) >= 0.0:
        raise BracketFailure(f"target period {target!r} too close to the minimal period")
    E_hi = 0.5 * Emin
    for _ in range(200):
        if T(E_hi) > 0.0:
            break
        E_hi *= 0.5
    else:
        raise BracketFailure("could not bracket the target period")
    E0 = brentq(T, E_lo, E_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    zeta = amplitude_of_energy(ensemble, E0)
    level = EnergyLevel(float(E0), zeta, period_of_amplitude(ensemble, zeta))

    prof = conservative_profile(ensemble, zeta, p, q, n_points, relaxed=relaxed)
    zc = count_zeros(prof)
    if zc != 2 * p:
        raise SeedInvalid(f"seed ({p},{q}) has {zc} zeros, expected {2 * p}")
    sym = prof.symmetry_residuals()
    bad = {k: v for k, v in sym.items() if v > symmetry_tol}
    if bad:
        raise SeedInvalid(f"seed ({p},{q}) symmetry residuals too large: {bad}")
    return SeedSolution(p, q, level, prof, zc, relaxed, ensemble)


@dataclass(frozen=True, eq=False)
class VariationalSolution:
    t: np.ndarray
    y: np.ndarray
    ydot: np.ndarray
    dR_dzeta: float


def variational_solution(seed: SeedSolution, rtol: float = SEED_RTOL,
                         atol: float = SEED_ATOL) -> VariationalSolution:
    """Solve y'' = -U0''(w(t)) y, y(0) = 1, y'(0) = 0, along the seed.

    The end value is the amplitude derivative of the shooting residual.
    """
    K = (len(seed.profile.t) - 1) // 4
    end = (math.pi if seed.relaxed else 0.5 * math.pi) * seed.q
    t = np.linspace(0.0, end, (2 * K if seed.relaxed else K) + 1)
    Y, _ = _run(kernels.SYS_SATELLITE_VAR, [seed.zeta, 0.0, 1.0, 0.0, 0.0, 0.0], t,
                seed.ensemble, 0.0, rtol, atol)
    dR = Y[-1, 3] if seed.relaxed else Y[-1, 2]
    return VariationalSolution(t, Y[:, 2].copy(), Y[:, 3].copy(), float(dR))
