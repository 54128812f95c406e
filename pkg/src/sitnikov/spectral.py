"""Neumann Sturm-Liouville problem for the linearization at z = 0.

    -z'' + z = eta * w(t) * z,   z'(0) = z'(pi q) = 0,

with w = F_lambda = sum_j m_j / rho_j^3 + 1 for the homotopy field, or any
weight of the form scale * sum_j m_j / rho_j^3 + offset built on a radius
model. Eigenvalues are found by shooting the scaled Prüfer angle
theta' = s cos^2 theta + ((eta w - 1)/s) sin^2 theta from theta(0) = pi/2;
the k-th eigenvalue is the eta with theta(pi q) = pi/2 + k pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from . import kernels
from .errors import BoundViolated, IndexNotBracketed, IntegratorFailure, WeightNotPositive
from .field import FieldBounds, _check_lambda, field_bounds
from .primaries import PERIOD, PrimaryEnsemble, RadiusModel

MAX_STEPS = 2_000_000


def _empty_model() -> RadiusModel:
    return RadiusModel(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0),
                       np.zeros((0, 3)), np.zeros((0, 1)), np.zeros((0, 1)))


@dataclass(frozen=True, eq=False)
class SLWeight:
    """w(t) = scale * sum_j m_j / rho_j(t; lam)^3 + offset (period pi in t)."""
    model: RadiusModel
    lam: float = 0.0
    scale: float = 1.0
    offset: float = 1.0
    known_bounds: tuple | None = None

    @classmethod
    def constant(cls, A: float) -> "SLWeight":
        return cls(_empty_model(), 0.0, 0.0, float(A), (float(A), float(A)))

    @classmethod
    def homotopy(cls, ensemble: PrimaryEnsemble, lam: float,
                 bounds: FieldBounds | None = None) -> "SLWeight":
        lam = _check_lambda(lam)
        kb = (bounds.m, bounds.M) if bounds is not None else None
        return cls(ensemble.model, lam, 1.0, 1.0, kb)

    def scaled(self, c: float) -> "SLWeight":
        kb = None if self.known_bounds is None else tuple(c * b for b in self.known_bounds)
        return SLWeight(self.model, self.lam, c * self.scale, c * self.offset, kb)

    def shifted(self, d: float) -> "SLWeight":
        kb = None if self.known_bounds is None else tuple(b + d for b in self.known_bounds)
        return SLWeight(self.model, self.lam, self.scale, self.offset + d, kb)

    def extra(self, eta: float, s: float) -> np.ndarray:
        return np.array([eta, s, self.scale, self.offset])

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        args = self.model.args()
        ws = np.array([kernels.weight_sum(ti, self.lam, *args) for ti in t])
        return self.scale * ws + self.offset

    def sampled_range(self, n: int = 4096) -> tuple[float, float]:
        w = self(np.arange(n) * PERIOD / n)
        return float(w.min()), float(w.max())

    def range(self) -> tuple[float, float]:
        return self.known_bounds if self.known_bounds is not None else self.sampled_range()

    def mean(self, n: int = 1024) -> float:
        return float(self(np.arange(n) * PERIOD / n).mean())


def _integrate(weight: SLWeight, system, y0, tgrid, extra, rtol, atol):
    Y, nacc, _, status = kernels.integrate_grid(
        system, np.ascontiguousarray(y0, dtype=float), np.ascontiguousarray(tgrid, dtype=float),
        float(rtol), float(atol), MAX_STEPS, *weight.model.args(), float(weight.lam), extra)
    if status != kernels.STATUS_OK:
        raise IntegratorFailure(f"Sturm-Liouville integration failed (status {status})")
    return Y


def prufer_phase(weight: SLWeight, eta: float, q: int, rtol: float = 1e-12,
                 atol: float = 1e-12, wbar: float | None = None) -> float:
    """theta(pi q) for the given eta, starting from theta(0) = pi/2."""
    wbar = weight.mean() if wbar is None else wbar
    s = math.sqrt(max(eta * wbar - 1.0, 1.0))
    Y = _integrate(weight, kernels.SYS_PRUFER, [0.5 * math.pi], np.array([0.0, math.pi * q]),
                   weight.extra(eta, s), rtol, atol)
    return float(Y[-1, 0])


def _eigenvalue(weight, k, q, wlo, whi, wbar, rtol, atol, eta_max):
    target = 0.5 * math.pi + k * math.pi
    g = lambda eta: prufer_phase(weight, eta, q, rtol, atol, wbar) - target
    base = 1.0 + (k / q) ** 2
    lo, hi = 0.98 * base / whi, min(1.02 * base / wlo, eta_max)
    if lo >= hi or g(lo) >= 0.0:
        lo = 0.0                 # theta(pi q) < pi/2 at eta = 0
    while g(hi) <= 0.0:
        if hi >= eta_max:
            raise IndexNotBracketed(f"index {k}: no sign change of the Prüfer phase below eta={eta_max:g}")
        hi = min(2.0 * hi, eta_max)
    return brentq(g, lo, hi, xtol=1e-300, rtol=1e-14, maxiter=200)


def eigenfunction(weight: SLWeight, eta: float, q: int, n_points: int = 2049,
                  rtol: float = 1e-12, atol: float = 1e-12):
    """(t, z, z') on [0, pi q] with z(0) = 1, z'(0) = 0, scaled to max|z| = 1."""
    t = np.linspace(0.0, math.pi * q, n_points)
    Y = _integrate(weight, kernels.SYS_LINEAR, [1.0, 0.0], t, weight.extra(eta, 1.0), rtol, atol)
    sc = np.abs(Y[:, 0]).max()
    return t, Y[:, 0] / sc, Y[:, 1] / sc


def interior_sign_changes(z: np.ndarray, rel_floor: float = 1e-9) -> int:
    """Sign changes of samples, ignoring values below rel_floor * max|z|."""
    v = z[np.abs(z) > rel_floor * np.abs(z).max()]
    return int(np.count_nonzero(np.sign(v[1:]) != np.sign(v[:-1])))


@dataclass
class SpectralReport:
    lam: float
    q: int
    etas: np.ndarray
    errors: np.ndarray
    weight_range: tuple
    zero_counts: list
    margin: float = 1e-6
    bounds_lo: np.ndarray = field(init=False)
    bounds_hi: np.ndarray = field(init=False)

    def __post_init__(self):
        base = 1.0 + (np.arange(len(self.etas)) / self.q) ** 2
        self.bounds_lo = base / self.weight_range[1]
        self.bounds_hi = base / self.weight_range[0]

    @property
    def p_max(self):
        return len(self.etas) - 1

    @property
    def mus(self):
        return 1.0 / self.etas

    @property
    def verdicts(self):
        """True where mu_p is bounded away from 1 (nondegenerate index)."""
        return [bool(abs(mu - 1.0) > self.margin) for mu in self.mus]

    def to_json(self):
        return {"lambda": self.lam, "q": self.q, "p_max": self.p_max,
                "etas": self.etas.tolist(), "mus": self.mus.tolist(),
                "error_estimates": self.errors.tolist(),
                "weight_range": list(self.weight_range),
                "bounds_lo": self.bounds_lo.tolist(), "bounds_hi": self.bounds_hi.tolist(),
                "eigenfunction_zeros": self.zero_counts, "nondegenerate": self.verdicts}


def default_p_max(M: float, q: int) -> int:
    return int(math.ceil(math.sqrt(M))) * q + 2


def sturm_eigenvalues(source, lam: float = 1.0, p_max: int | None = None, q: int = 1,
                      rtol: float = 1e-12, atol: float = 1e-12, eta_max: float = 1e8,
                      check_index: bool = True, bounds: FieldBounds | None = None) -> SpectralReport:
    """Eigenvalues eta_0 < ... < eta_pmax on [0, pi q].

    ``source`` is a PrimaryEnsemble (weight F_lam) or an SLWeight. The error
    estimate of each eigenvalue is its change when the integrator tolerance
    is loosened 10-fold.
    """
    if isinstance(source, PrimaryEnsemble):
        if bounds is None:
            bounds = field_bounds(source)
        weight = SLWeight.homotopy(source, lam, bounds)
    else:
        weight = source
    if q < 1 or int(q) != q:
        raise ValueError("q must be a positive integer")
    wlo_s, whi_s = weight.sampled_range()
    if wlo_s <= 0.0:
        raise WeightNotPositive(f"weight minimum {wlo_s:g} is not positive")
    wlo, whi = weight.range()
    wlo, whi = min(wlo, wlo_s), max(whi, whi_s)
    if p_max is None:
        p_max = default_p_max(whi, q)
    if p_max < 0:
        raise ValueError("p_max must be >= 0")
    wbar = weight.mean()
    etas, errs, zc = [], [], []
    for k in range(p_max + 1):
        eta = _eigenvalue(weight, k, q, wlo, whi, wbar, rtol, atol, eta_max)
        coarse = _eigenvalue(weight, k, q, wlo, whi, wbar, 10 * rtol, 10 * atol, eta_max)
        etas.append(eta)
        errs.append(max(abs(eta - coarse), 4 * np.finfo(float).eps * eta))
        if check_index:
            _, z, _ = eigenfunction(weight, eta, q, n_points=max(2049, 64 * (k + 2) * q + 1))
            zc.append(interior_sign_changes(z))
    etas = np.array(etas)
    if np.any(np.diff(etas) <= 0.0):
        raise IndexNotBracketed("eigenvalues are not strictly increasing")
    rep_range = weight.range()
    return SpectralReport(float(weight.lam), int(q), etas, np.array(errs),
                          (float(rep_range[0]), float(rep_range[1])), zc)


def finite_difference_eigenvalues(weight: SLWeight, q: int, n_cells: int = 2000,
                                  k: int = 10) -> np.ndarray:
    """Coarse cross-check: cell-centred second differences with Neumann
    reflection, generalized symmetric eigenproblem A z = eta W z."""
    L = math.pi * q
    h = L / n_cells
    t = (np.arange(n_cells) + 0.5) * h
    main = np.full(n_cells, 2.0 / h ** 2 + 1.0)
    main[0] -= 1.0 / h ** 2
    main[-1] -= 1.0 / h ** 2
    off = np.full(n_cells - 1, -1.0 / h ** 2)
    # W is diagonal, so W^(-1/2) A W^(-1/2) stays symmetric tridiagonal
    r = 1.0 / np.sqrt(weight(t))
    return eigh_tridiagonal(main * r * r, off * r[:-1] * r[1:], eigvals_only=True,
                            select="i", select_range=(0, k - 1))


@dataclass
class ComparisonVerdict:
    index: int
    eta: float
    mu: float
    lower: float
    upper: float
    excluded: bool
    nondegenerate: bool
    sandwich_holds: bool | None

    def to_json(self):
        return dict(self.__dict__)


def verify_comparison_bounds(report: SpectralReport, bounds: FieldBounds,
                             rtol: float = 1e-9, margin: float = 1e-6) -> list:
    """Check (1 + (p/q)^2)/M <= eta_p <= (1 + (p/q)^2)/m for every index.

    For indices with (p/q)^2 outside [m, M] mu_p must stay away from 1 by a
    relative ``margin``. The two-sided mu sandwich m/(m+1) <= mu <= M/(M+1)
    is reported per excluded index but not enforced. Raises BoundViolated.
    """
    m, M = bounds.m, bounds.M
    out = []
    for k, (eta, err) in enumerate(zip(report.etas, report.errors)):
        base = 1.0 + (k / report.q) ** 2
        lo, hi = base / M, base / m
        slack = max(rtol * eta, 10.0 * err)
        if not (lo - slack <= eta <= hi + slack):
            raise BoundViolated(f"eta_{k}={eta!r} outside [{lo!r}, {hi!r}]")
        mu = 1.0 / eta
        excluded = bounds.excluded(k, report.q) if k > 0 else not (m <= 0.0 <= M)
        nondeg = abs(mu - 1.0) > margin
        sandwich = None
        if excluded:
            if not nondeg:
                raise BoundViolated(f"mu_{k}={mu!r} within {margin:g} of 1 for an excluded index")
            sandwich = bool(m / (m + 1.0) <= mu <= M / (M + 1.0))
        out.append(ComparisonVerdict(k, float(eta), float(mu), float(lo), float(hi),
                                     bool(excluded), bool(nondeg), sandwich))
    return out
