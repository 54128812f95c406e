"""Homotopy field: radii interpolated between beta_j and r_j(t).

Only the modulus rho_j(t; lam) = (1 - lam) beta_j + lam r_j(t) enters the
satellite equation, so angles are never evaluated here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BoundsMismatch, LambdaOutOfRange
from .primaries import PERIOD, PrimaryEnsemble


def _check_lambda(lam):
    lam = float(lam)
    if not 0.0 <= lam <= 1.0 or math.isnan(lam):
        raise LambdaOutOfRange(f"lambda={lam} outside [0, 1]")
    return lam


@dataclass(frozen=True, eq=False)
class HomotopyField:
    ensemble: PrimaryEnsemble
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lam", _check_lambda(self.lam))

    def at(self, lam) -> "HomotopyField":
        return HomotopyField(self.ensemble, lam)

    @property
    def model(self):
        return self.ensemble.model

    def effective_radius(self, j, t, lam=None):
        lam = self.lam if lam is None else _check_lambda(lam)
        beta_j = self.ensemble.constants.beta_j[j]
        if lam == 0.0:
            return np.full(np.shape(t), beta_j, dtype=float) if np.ndim(t) else beta_j
        r = self.ensemble.orbits[j].radius(np.atleast_1d(t))
        out = (1.0 - lam) * beta_j + lam * r
        return out if np.ndim(t) else float(out[0])

    def rho(self, t, lam=None) -> np.ndarray:
        """(n, len(t)) effective radii."""
        lam = self.lam if lam is None else _check_lambda(lam)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        beta = np.asarray(self.ensemble.constants.beta_j)[:, None]
        if lam == 0.0:
            return np.broadcast_to(beta, (len(beta), len(t))).copy()
        return (1.0 - lam) * beta + lam * self.ensemble.radii(t)

    def potential(self, t, z, lam=None):
        """Return (U, dU/dz, d2U/dz2) broadcast over ``t`` and ``z``."""
        t, z = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(z, dtype=float))
        shape = t.shape
        rho = self.rho(t.ravel(), lam)
        zz = z.ravel()[None, :]
        m = self.ensemble.masses[:, None]
        d2 = rho ** 2 + zz ** 2
        inv1 = d2 ** -0.5
        inv3 = inv1 / d2
        U = -(m * inv1).sum(axis=0)
        Uz = (m * zz * inv3).sum(axis=0)
        Uzz = (m * inv3).sum(axis=0) - 3.0 * (m * zz ** 2 * inv3 / d2).sum(axis=0)
        if shape == ():
            return float(U[0]), float(Uz[0]), float(Uzz[0])
        return U.reshape(shape), Uz.reshape(shape), Uzz.reshape(shape)

    def acceleration(self, t, z, lam=None) -> np.ndarray:
        """-dU/dz via the integration kernel (same arithmetic as the shooting ODE)."""
        lam = self.lam if lam is None else _check_lambda(lam)
        m = self.model
        return kernels.satellite_rhs_grid(np.ascontiguousarray(t, dtype=float),
                                          np.ascontiguousarray(z, dtype=float), lam, *m.args())

    def weight_F(self, t, lam=None):
        """F(t) = sum_j m_j / rho_j^3 + 1."""
        rho = self.rho(t, lam)
        F = (self.ensemble.masses[:, None] / rho ** 3).sum(axis=0) + 1.0
        return F if np.ndim(t) else float(F[0])

    def lambda_lipschitz(self) -> float:
        """Bound L with |U_{lam+d}(t,z) - U_lam(t,z)| <= L d."""
        c = self.ensemble.constants
        return float(sum(o.mass * (b - a) / a ** 2
                         for o, a, b in zip(self.ensemble.orbits, c.alpha_j, c.beta_j)))


@dataclass(frozen=True)
class FieldBounds:
    """Weight bounds m <= F_lam(t) <= M over t and lam.

    ``m``/``M`` are the analytic values beta+1 and alpha+1; ``grid_min`` and
    ``grid_max`` are what a dense scan actually sees. The scan maximum can
    sit strictly below alpha+1 when the bodies do not reach their minimal
    radii simultaneously.
    """
    m: float
    M: float
    grid_min: float
    grid_max: float

    def excluded(self, p: int, q: int) -> bool:
        """True when (p/q)^2 lies outside [m, M]."""
        r = (p / q) ** 2
        return not (self.m <= r <= self.M)

    def to_json(self):
        return {"m": self.m, "M": self.M, "grid_min": self.grid_min, "grid_max": self.grid_max}


def field_bounds(ensemble: PrimaryEnsemble, n_t: int = 2048, n_lambda: int = 11,
                 tol: float = 1e-8) -> FieldBounds:
    """Analytic weight bounds with a grid-scan cross-check.

    Raises BoundsMismatch if the scan leaves [beta+1, alpha+1] by more than
    ``tol`` (relative), or if its infimum misses beta+1.
    """
    c = ensemble.constants
    m, M = c.beta + 1.0, c.alpha + 1.0
    fld = HomotopyField(ensemble, 0.0)
    t = np.arange(n_t) * PERIOD / n_t
    vals = np.concatenate([fld.weight_F(t, lam) for lam in np.linspace(0.0, 1.0, n_lambda)])
    lo, hi = float(vals.min()), float(vals.max())
    scale = max(1.0, M)
    if lo < m - tol * scale or hi > M + tol * scale or abs(lo - m) > tol * scale:
        raise BoundsMismatch(f"weight scan [{lo!r}, {hi!r}] inconsistent with [{m!r}, {M!r}]")
    return FieldBounds(m, M, lo, hi)
