"""Planar pi-periodic primary configurations.

Builders for regular polygons on circles and for the equal-mass Kepler pair,
ingestion of sampled trajectories, dihedral symmetry certification, the
radial constants alpha/beta and a direct n-body integrator.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import (CollisionDetected, EccentricityOutOfRange, InvalidTable, NotCertified,
                     NotPeriodic, OriginCrossing, ToleranceNotMet)

PERIOD = math.pi
OMEGA = 2.0  # angular frequency of a pi-periodic primary motion

ANALYTIC_TOL = 1e-8
INGEST_TOL = 1e-6


def kepler_eccentric_anomaly(M, e):
    """Solve ``E - e sin E = M`` (vectorized over ``M``)."""
    if not 0.0 <= e < 1.0:
        raise EccentricityOutOfRange(f"eccentricity {e} outside [0, 1)")
    M = np.asarray(M, dtype=float)
    out = np.array([kernels.kepler_E(float(m), float(e)) for m in M.ravel()])
    return out.reshape(M.shape) if M.ndim else float(out[0])


def _rot(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


# --------------------------------------------------------------------------
# orbits
# --------------------------------------------------------------------------

class MassedOrbit:
    """A primary: a mass and a pi-periodic planar path."""

    mass: float
    representation = "abstract"

    def position(self, t) -> np.ndarray:
        raise NotImplementedError

    def radius(self, t) -> np.ndarray:
        return np.hypot(*self.position(t).T)

    def angle(self, t) -> np.ndarray:
        q = self.position(t)
        return np.arctan2(q[..., 1], q[..., 0])

    def kernel_row(self, n_coeffs):
        """(kind, kep triple, cos coeffs, sin coeffs) for the radius kernels."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CircularOrbit(MassedOrbit):
    mass: float
    radius0: float
    omega: float = OMEGA
    phase: float = 0.0
    representation = "analytic-circular"

    def position(self, t):
        th = self.omega * np.asarray(t, dtype=float) + self.phase
        return self.radius0 * np.stack([np.cos(th), np.sin(th)], axis=-1)

    def radius(self, t):
        return np.full(np.shape(t), self.radius0, dtype=float)

    def angle(self, t):
        return self.omega * np.asarray(t, dtype=float) + self.phase

    def kernel_row(self, n_coeffs):
        fc = np.zeros(n_coeffs)
        fc[0] = self.radius0
        return 0, (0.0, 0.0, 0.0), fc, np.zeros(n_coeffs)

    def to_dict(self):
        return {"type": self.representation, "mass": self.mass, "radius": self.radius0,
                "omega": self.omega, "phase": self.phase}


@dataclass(frozen=True)
class KeplerOrbit(MassedOrbit):
    """Body on a Keplerian ellipse about the origin, mean motion 2.

    ``orientation`` rotates the ellipse; the pericentre is passed at
    ``t = -phase / 2``.
    """
    mass: float
    a: float
    e: float
    phase: float = 0.0
    orientation: float = 0.0
    representation = "analytic-kepler"

    def __post_init__(self):
        if not 0.0 <= self.e < 1.0:
            raise EccentricityOutOfRange(f"eccentricity {self.e} outside [0, 1)")

    def _E(self, t):
        return kepler_eccentric_anomaly(OMEGA * np.asarray(t, dtype=float) + self.phase, self.e)

    def position(self, t):
        E = np.asarray(self._E(t))
        x = self.a * (np.cos(E) - self.e)
        y = self.a * math.sqrt(1.0 - self.e ** 2) * np.sin(E)
        q = np.stack([x, y], axis=-1)
        return q @ _rot(self.orientation).T

    def radius(self, t):
        return self.a * (1.0 - self.e * np.cos(np.asarray(self._E(t))))

    def kernel_row(self, n_coeffs):
        return 1, (self.a, self.e, self.phase), np.zeros(n_coeffs), np.zeros(n_coeffs)

    def to_dict(self):
        return {"type": self.representation, "mass": self.mass, "a": self.a, "e": self.e,
                "phase": self.phase, "orientation": self.orientation}


def _trig_coefficients(samples):
    """Real trigonometric coefficients (base frequency 2) of uniform samples on [0, pi)."""
    N = samples.shape[-1]
    X = np.fft.rfft(samples, axis=-1) / N
    c = 2.0 * X.real
    s = -2.0 * X.imag
    c[..., 0] = X[..., 0].real
    s[..., 0] = 0.0
    if N % 2 == 0:
        c[..., -1] = X[..., -1].real
        s[..., -1] = 0.0
    return c, s


def _trig_eval(c, s, t):
    t = np.asarray(t, dtype=float)
    k = np.arange(c.shape[-1])
    ph = OMEGA * np.multiply.outer(t, k)
    return np.cos(ph) @ c + np.sin(ph) @ s


@dataclass(frozen=True, eq=False)
class SampledOrbit(MassedOrbit):
    """Trigonometric interpolant of a uniformly sampled pi-periodic path."""
    mass: float
    x_coef: tuple
    y_coef: tuple
    r_coef: tuple
    theta_coef: tuple
    winding: int
    representation = "sampled"

    @classmethod
    def from_samples(cls, mass, xy):
        """``xy``: (N, 2) samples at t_k = k*pi/N, k = 0..N-1."""
        xy = np.asarray(xy, dtype=float)
        r = np.hypot(xy[:, 0], xy[:, 1])
        th = np.unwrap(np.append(np.arctan2(xy[:, 1], xy[:, 0]), math.atan2(xy[0, 1], xy[0, 0])))
        winding = int(round((th[-1] - th[0]) / (2.0 * math.pi)))
        N = xy.shape[0]
        t = np.arange(N) * PERIOD / N
        return cls(mass=float(mass),
                   x_coef=_trig_coefficients(xy[:, 0]),
                   y_coef=_trig_coefficients(xy[:, 1]),
                   r_coef=_trig_coefficients(r),
                   theta_coef=_trig_coefficients(th[:-1] - OMEGA * winding * t),
                   winding=winding)

    def position(self, t):
        return np.stack([_trig_eval(*self.x_coef, t), _trig_eval(*self.y_coef, t)], axis=-1)

    def radius(self, t):
        return _trig_eval(*self.r_coef, t)

    def angle(self, t):
        return _trig_eval(*self.theta_coef, t) + OMEGA * self.winding * np.asarray(t, dtype=float)

    @property
    def n_coeffs(self):
        return len(self.r_coef[0])

    def kernel_row(self, n_coeffs):
        fc = np.zeros(n_coeffs)
        fs = np.zeros(n_coeffs)
        c, s = self.r_coef
        fc[:len(c)] = c
        fs[:len(s)] = s
        return 2, (0.0, 0.0, 0.0), fc, fs

    def to_dict(self):
        return {"type": self.representation, "mass": self.mass, "n_coeffs": self.n_coeffs,
                "winding": self.winding}


# --------------------------------------------------------------------------
# symmetry
# --------------------------------------------------------------------------

def _perm_power(perm, k):
    out = list(range(len(perm)))
    for _ in range(k):
        out = [perm[i] for i in out]
    return tuple(out)


@dataclass(frozen=True)
class SymmetrySpec:
    """Dihedral action data. Permutations are 0-based images: j -> zeta[j]."""
    d: int
    zeta1: tuple
    zeta2: tuple
    R: tuple = ((1.0, 0.0), (0.0, -1.0))

    def __post_init__(self):
        object.__setattr__(self, "zeta1", tuple(int(i) for i in self.zeta1))
        object.__setattr__(self, "zeta2", tuple(int(i) for i in self.zeta2))
        object.__setattr__(self, "R", tuple(tuple(float(v) for v in row) for row in self.R))
        n = len(self.zeta1)
        if self.d < 2:
            raise InvalidTable(f"d must be >= 2, got {self.d}")
        for name, p in (("zeta1", self.zeta1), ("zeta2", self.zeta2)):
            if sorted(p) != list(range(n)):
                raise InvalidTable(f"{name} is not a permutation of 0..{n - 1}: {p}")
        if _perm_power(self.zeta1, self.d) != tuple(range(n)):
            raise InvalidTable(f"order of zeta1 does not divide d={self.d}")
        if _perm_power(self.zeta2, 2) != tuple(range(n)):
            raise InvalidTable("zeta2 is not an involution")
        R = self.matrix
        if not (np.allclose(R @ R, np.eye(2), atol=1e-12) and np.allclose(R.T @ R, np.eye(2), atol=1e-12)):
            raise InvalidTable("R must be an orthogonal involution")

    @property
    def n(self):
        return len(self.zeta1)

    @property
    def matrix(self):
        return np.array(self.R)

    def group(self):
        """All permutations generated by zeta1 and zeta2."""
        ident = tuple(range(self.n))
        seen = {ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for g in frontier:
                for gen in (self.zeta1, self.zeta2):
                    h = tuple(gen[i] for i in g)
                    if h not in seen:
                        seen.add(h)
                        nxt.append(h)
            frontier = nxt
        return sorted(seen)

    def to_json(self, masses=None) -> dict:
        out = {"d": self.d, "zeta1": [i + 1 for i in self.zeta1],
               "zeta2": [i + 1 for i in self.zeta2], "R": [list(r) for r in self.R]}
        if masses is not None:
            out = {"masses": [float(m) for m in masses], **out}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SymmetrySpec":
        try:
            return cls(d=int(data["d"]), zeta1=[int(i) - 1 for i in data["zeta1"]],
                       zeta2=[int(i) - 1 for i in data["zeta2"]],
                       R=data.get("R", [[1.0, 0.0], [0.0, -1.0]]))
        except (KeyError, TypeError) as exc:
            raise InvalidTable(f"malformed symmetry spec: {exc}") from exc


@dataclass(frozen=True)
class SymmetryCertificate:
    passed: bool
    max_rotation_residual: float
    max_reversal_residual: float
    max_mass_residual: float
    tolerance: float
    grid_size: int

    def to_json(self):
        return {"passed": bool(self.passed),
                "max_rotation_residual": float(self.max_rotation_residual),
                "max_reversal_residual": float(self.max_reversal_residual),
                "max_mass_residual": float(self.max_mass_residual),
                "tolerance": float(self.tolerance), "grid_size": int(self.grid_size)}


def certify_symmetry(orbits: Sequence[MassedOrbit], spec: SymmetrySpec,
                     tol: float = ANALYTIC_TOL, n_grid: int = 2048) -> SymmetryCertificate:
    """Evaluate the three dihedral residuals on a uniform grid over one period.

    Never raises on failure; inspect ``passed``.
    """
    n = len(orbits)
    if spec.n != n:
        raise InvalidTable(f"symmetry spec acts on {spec.n} bodies, ensemble has {n}")
    t = np.arange(n_grid) * PERIOD / n_grid
    Q = np.stack([o.position(t) for o in orbits])          # (n, T, 2)
    Qr = np.stack([o.position(-t) for o in orbits])
    rot = _rot(2.0 * math.pi / spec.d)
    R = spec.matrix
    z1 = list(spec.zeta1)
    z2 = list(spec.zeta2)
    rot_res = np.linalg.norm(Q[z1] - Q @ rot.T, axis=-1).max()
    rev_res = np.linalg.norm(Q[z2] - Qr @ R.T, axis=-1).max()
    m = np.array([o.mass for o in orbits])
    mass_res = max(float(np.abs(m[list(g)] - m).max()) for g in spec.group())
    passed = bool(rot_res <= tol and rev_res <= tol and mass_res <= tol)
    return SymmetryCertificate(passed, float(rot_res), float(rev_res), float(mass_res), tol, n_grid)


def find_symmetry(orbits: Sequence[MassedOrbit], d: int, R=((1.0, 0.0), (0.0, -1.0)),
                  tol: float = ANALYTIC_TOL, n_grid: int = 256) -> SymmetrySpec | None:
    """Brute-force permutation search (n <= 8 only). Returns None if nothing fits."""
    n = len(orbits)
    if n > 8:
        raise ValueError("permutation search is limited to n <= 8")
    t = np.arange(n_grid) * PERIOD / n_grid
    Q = np.stack([o.position(t) for o in orbits])
    Qr = np.stack([o.position(-t) for o in orbits])
    target1 = Q @ _rot(2.0 * math.pi / d).T
    target2 = Qr @ np.array(R).T

    def best(target):
        for p in itertools.permutations(range(n)):
            if np.linalg.norm(Q[list(p)] - target, axis=-1).max() <= tol:
                yield p

    for p1 in best(target1):
        for p2 in best(target2):
            try:
                spec = SymmetrySpec(d, p1, p2, R)
            except InvalidTable:
                continue
            if certify_symmetry(orbits, spec, tol, n_grid).passed:
                return spec
    return None


# --------------------------------------------------------------------------
# radial constants and ensemble
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialConstants:
    alpha_j: tuple
    beta_j: tuple
    alpha: float
    beta: float
    alpha_min: float

    def to_json(self):
        return {"alpha_j": list(self.alpha_j), "beta_j": list(self.beta_j),
                "alpha": self.alpha, "beta": self.beta, "alpha_min": self.alpha_min}


def _refine_extremum(f, t0, h, find_max):
    sign = -1.0 if find_max else 1.0
    res = minimize_scalar(lambda t: sign * f(t), bounds=(t0 - h, t0 + h), method="bounded",
                          options={"xatol": 1e-13})
    return sign * float(res.fun)


def radial_constants(orbits: Sequence[MassedOrbit], n_grid: int = 4096) -> RadialConstants:
    """Per-body radius extrema by dense sampling plus bounded local refinement."""
    t = np.arange(n_grid) * PERIOD / n_grid
    h = PERIOD / n_grid
    a_j, b_j = [], []
    for o in orbits:
        if isinstance(o, CircularOrbit):
            a_j.append(float(o.radius0))
            b_j.append(float(o.radius0))
            continue
        r = o.radius(t)
        f = lambda s, o=o: float(o.radius(np.array([s]))[0])
        i_min, i_max = int(np.argmin(r)), int(np.argmax(r))
        lo = min(_refine_extremum(f, t[i_min], h, False), float(r[i_min]))
        hi = max(_refine_extremum(f, t[i_max], h, True), float(r[i_max]))
        a_j.append(lo)
        b_j.append(hi)
    m = np.array([o.mass for o in orbits])
    a_arr, b_arr = np.array(a_j), np.array(b_j)
    return RadialConstants(tuple(a_j), tuple(b_j), float(np.sum(m / a_arr ** 3)),
                           float(np.sum(m / b_arr ** 3)), float(a_arr.min()))


@dataclass(frozen=True)
class RadiusModel:
    """Packed arrays consumed by the kernels."""
    kind: np.ndarray
    mass: np.ndarray
    beta: np.ndarray
    kep: np.ndarray
    fc: np.ndarray
    fs: np.ndarray

    def args(self):
        return self.kind, self.mass, self.beta, self.kep, self.fc, self.fs


@dataclass(frozen=True, eq=False)
class PrimaryEnsemble:
    orbits: tuple
    symmetry: SymmetrySpec
    certificate: SymmetryCertificate
    constants: RadialConstants
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @classmethod
    def create(cls, orbits, symmetry, tol=ANALYTIC_TOL, name="custom", params=None,
               n_grid=2048):
        orbits = tuple(orbits)
        cert = certify_symmetry(orbits, symmetry, tol, n_grid)
        if not cert.passed:
            raise NotCertified(
                "symmetry certification failed: rotation {:.3e}, reversal {:.3e}, mass {:.3e} "
                "(tol {:.1e})".format(cert.max_rotation_residual, cert.max_reversal_residual,
                                      cert.max_mass_residual, tol), cert)
        return cls(orbits, symmetry, cert, radial_constants(orbits), name, dict(params or {}))

    @property
    def n(self):
        return len(self.orbits)

    @property
    def masses(self):
        return np.array([o.mass for o in self.orbits])

    @property
    def is_circular(self):
        return all(isinstance(o, CircularOrbit) for o in self.orbits)

    @cached_property
    def model(self) -> RadiusModel:
        n_coeffs = max([o.n_coeffs for o in self.orbits if isinstance(o, SampledOrbit)] or [1])
        rows = [o.kernel_row(n_coeffs) for o in self.orbits]
        return RadiusModel(
            kind=np.array([r[0] for r in rows], dtype=np.int64),
            mass=self.masses.astype(float),
            beta=np.array(self.constants.beta_j, dtype=float),
            kep=np.array([r[1] for r in rows], dtype=float).reshape(self.n, 3),
            fc=np.array([r[2] for r in rows], dtype=float).reshape(self.n, n_coeffs),
            fs=np.array([r[3] for r in rows], dtype=float).reshape(self.n, n_coeffs),
        )

    def radii(self, t) -> np.ndarray:
        """(n, len(t)) radii from the kernel model."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        m = self.model
        return kernels.radii_grid(t, m.kind, m.kep, m.fc, m.fs)

    def to_table(self, n_samples: int = 256) -> "TrajectoryTable":
        t = np.linspace(0.0, PERIOD, n_samples + 1)
        pos = np.stack([o.position(t) for o in self.orbits], axis=1)
        return TrajectoryTable(t, pos, self.masses)

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "n": self.n,
                "masses": self.masses.tolist(), "orbits": [o.to_dict() for o in self.orbits],
                "symmetry": self.symmetry.to_json(), "certificate": self.certificate.to_json(),
                "constants": self.constants.to_json()}


def circular_polygon_radius(n: int) -> float:
    """Radius of the equal-mass (1/n) regular n-gon rotating with angular velocity 2."""
    s = sum(1.0 / n * 0.25 / math.sin(math.pi * k / n) for k in range(1, n))
    return (s / OMEGA ** 2) ** (1.0 / 3.0)


def build_circular_polygon(n: int, d: int | None = None, tol: float = ANALYTIC_TOL) -> PrimaryEnsemble:
    """Regular n-gon of masses 1/n rotating rigidly with period pi.

    ``d`` (default n) must divide n; zeta1 shifts bodies by n/d vertices.
    """
    if n < 2:
        raise InvalidTable("need at least two primaries")
    d = n if d is None else int(d)
    if d < 2 or n % d:
        raise InvalidTable(f"d={d} must be >= 2 and divide n={n}")
    a = circular_polygon_radius(n)
    orbits = [CircularOrbit(1.0 / n, a, OMEGA, 2.0 * math.pi * j / n) for j in range(n)]
    shift = n // d
    spec = SymmetrySpec(d, [(j + shift) % n for j in range(n)], [(-j) % n for j in range(n)],
                        ((1.0, 0.0), (0.0, -1.0)))
    return PrimaryEnsemble.create(orbits, spec, tol, name="circular", params={"n": n, "d": d})


def build_kepler_pair(e: float, tol: float = ANALYTIC_TOL) -> PrimaryEnsemble:
    """Equal masses 1/2 on mirror Keplerian ellipses, period pi, pericentre at t = 0."""
    if not 0.0 <= e < 1.0:
        raise EccentricityOutOfRange(f"eccentricity {e} outside [0, 1)")
    a = 2.0 ** (-5.0 / 3.0)
    orbits = [KeplerOrbit(0.5, a, e, 0.0, 0.0), KeplerOrbit(0.5, a, e, 0.0, math.pi)]
    spec = SymmetrySpec(2, (1, 0), (0, 1), ((1.0, 0.0), (0.0, -1.0)))
    return PrimaryEnsemble.create(orbits, spec, tol, name="kepler", params={"e": e})


# --------------------------------------------------------------------------
# trajectory tables
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrajectoryTable:
    times: np.ndarray        # (K,) on [0, pi]
    positions: np.ndarray    # (K, n, 2)
    masses: np.ndarray       # (n,)
    energy_drift: float | None = None

    @property
    def n(self):
        return self.positions.shape[1]

    @property
    def closure_residual(self) -> float:
        return float(np.abs(self.positions[-1] - self.positions[0]).max())

    def validate(self, tol_closure=1e-6, tol_mass=1e-9, tol_com=1e-6, check_mass=True):
        t = np.asarray(self.times)
        if t.ndim != 1 or len(t) < 8:
            raise InvalidTable("need at least 8 time samples")
        if np.any(np.diff(t) <= 0):
            raise InvalidTable("times must be strictly increasing")
        if abs(t[0]) > 1e-12 or abs(t[-1] - PERIOD) > 1e-9:
            raise InvalidTable(f"time grid must span [0, pi], got [{t[0]}, {t[-1]}]")
        if np.any(np.asarray(self.masses) <= 0):
            raise InvalidTable("masses must be positive")
        if self.closure_residual > tol_closure:
            raise NotPeriodic(f"closure residual {self.closure_residual:.3e} exceeds {tol_closure:.1e}")
        if check_mass:
            self.check_normalization(tol_mass, tol_com)

    def check_normalization(self, tol_mass=1e-9, tol_com=1e-6):
        if abs(float(np.sum(self.masses)) - 1.0) > tol_mass:
            raise InvalidTable(f"masses sum to {np.sum(self.masses)!r}, expected 1")
        com = np.einsum("j,kjc->kc", np.asarray(self.masses), self.positions)
        if np.abs(com).max() > tol_com:
            raise InvalidTable(f"centre of mass off origin by {np.abs(com).max():.3e}")

    def uniform_samples(self) -> np.ndarray:
        """Positions on the uniform grid k*pi/N, k < N (spline-resampled if needed)."""
        t = np.asarray(self.times)
        N = len(t) - 1
        if np.allclose(np.diff(t), PERIOD / N, rtol=1e-9, atol=1e-12):
            return self.positions[:-1]
        pos = self.positions.copy()
        pos[-1] = pos[0]
        spline = CubicSpline(t, pos, axis=0, bc_type="periodic")
        return spline(np.arange(N) * PERIOD / N)

    def write(self, csv_path, json_path=None, spec: SymmetrySpec | None = None):
        csv_path = Path(csv_path)
        header = ["t"] + [f"{c}{j + 1}" for j in range(self.n) for c in ("x", "y")]
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k, tk in enumerate(self.times):
                w.writerow([repr(float(tk))] + [repr(float(v)) for v in self.positions[k].ravel()])
        if json_path is not None:
            data = spec.to_json(self.masses) if spec is not None else {"masses": list(map(float, self.masses))}
            Path(json_path).write_text(json.dumps(data, indent=2))


def read_trajectory(csv_path, json_path) -> tuple[TrajectoryTable, SymmetrySpec]:
    """Parse the CSV (``t,x1,y1,...``) plus JSON sidecar."""
    try:
        sidecar = json.loads(Path(json_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidTable(f"cannot read sidecar {json_path}: {exc}") from exc
    try:
        with Path(csv_path).open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InvalidTable(f"cannot read {csv_path}: {exc}") from exc
    if not rows:
        raise InvalidTable(f"{csv_path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or (len(header) - 1) % 2:
        raise InvalidTable(f"{csv_path}: header must be t,x1,y1,...,xn,yn; got {rows[0]}")
    n = (len(header) - 1) // 2
    expected = ["t"] + [f"{c}{j + 1}" for j in range(n) for c in ("x", "y")]
    if header != expected:
        raise InvalidTable(f"{csv_path}: header must be {','.join(expected)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidTable(f"{csv_path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise InvalidTable(f"{csv_path}: ragged rows")
    if not np.all(np.isfinite(data)):
        raise InvalidTable(f"{csv_path}: non-finite entry")
    masses = np.asarray(sidecar.get("masses", []), dtype=float)
    if masses.shape != (n,):
        raise InvalidTable(f"sidecar lists {masses.size} masses for {n} bodies")
    table = TrajectoryTable(data[:, 0], data[:, 1:].reshape(len(data), n, 2), masses)
    return table, SymmetrySpec.from_json(sidecar)


def ingest_trajectory(table: TrajectoryTable, spec: SymmetrySpec, tol: float = INGEST_TOL,
                      tol_origin: float = 1e-9, tol_closure: float = 1e-6,
                      tol_mass: float = 1e-9, tol_com: float = 1e-6,
                      name: str = "ingested") -> PrimaryEnsemble:
    """Build an ensemble from sampled positions.

    Order of checks: table shape, closure, origin crossing, symmetry
    certification, then mass/centre-of-mass normalization.
    """
    table.validate(tol_closure=tol_closure, check_mass=False)
    samples = table.uniform_samples()
    r = np.hypot(samples[..., 0], samples[..., 1])
    if r.min() < tol_origin:
        raise OriginCrossing(f"a primary passes within {r.min():.3e} of the origin")
    orbits = [SampledOrbit.from_samples(m, samples[:, j]) for j, m in enumerate(table.masses)]
    cert = certify_symmetry(orbits, spec, tol)
    if not cert.passed:
        raise NotCertified(
            "symmetry certification failed: rotation {:.3e}, reversal {:.3e}, mass {:.3e} "
            "(tol {:.1e})".format(cert.max_rotation_residual, cert.max_reversal_residual,
                                  cert.max_mass_residual, tol), cert)
    table.check_normalization(tol_mass, tol_com)
    consts = radial_constants(orbits)
    if consts.alpha_min < tol_origin:
        raise OriginCrossing(f"interpolated radius reaches {consts.alpha_min:.3e}")
    return PrimaryEnsemble(tuple(orbits), spec, cert, consts, name,
                           {"samples": int(samples.shape[0])})


# --------------------------------------------------------------------------
# n-body integration
# --------------------------------------------------------------------------

def nbody_energy(masses, q, v) -> float:
    masses = np.asarray(masses)
    kin = 0.5 * np.sum(masses[:, None] * v ** 2)
    pot = 0.0
    for i in range(len(masses)):
        for j in range(i + 1, len(masses)):
            pot -= masses[i] * masses[j] / np.linalg.norm(q[i] - q[j])
    return float(kin + pot)


def nbody_integrate(masses, initial_positions, initial_velocities, horizon: float = PERIOD,
                    n_samples: int = 256, rtol: float = 1e-12, atol: float = 1e-13,
                    tol_collision: float = 1e-6) -> TrajectoryTable:
    """Integrate the planar n-body problem (G = 1) with DOP853."""
    m = np.asarray(masses, dtype=float)
    q0 = np.asarray(initial_positions, dtype=float).reshape(len(m), 2)
    v0 = np.asarray(initial_velocities, dtype=float).reshape(len(m), 2)
    n = len(m)
    iu = np.triu_indices(n, 1)
    d0 = np.linalg.norm(q0[:, None] - q0[None], axis=-1)[iu]
    if d0.size and d0.min() < tol_collision:
        raise CollisionDetected("initial configuration has coincident bodies")

    def f(t, y):
        q = y[:2 * n].reshape(n, 2)
        diff = q[None, :, :] - q[:, None, :]            # q_i - q_j at [j, i]
        dist = np.linalg.norm(diff, axis=-1)
        np.fill_diagonal(dist, np.inf)
        acc = np.einsum("i,jic->jc", m, diff / dist[..., None] ** 3)
        return np.concatenate([y[2 * n:], acc.ravel()])

    def close(t, y):
        q = y[:2 * n].reshape(n, 2)
        return np.linalg.norm(q[:, None] - q[None], axis=-1)[iu].min() - tol_collision
    close.terminal = True

    t_eval = np.linspace(0.0, horizon, n_samples + 1)
    sol = solve_ivp(f, (0.0, horizon), np.concatenate([q0.ravel(), v0.ravel()]), method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, events=close)
    if sol.status == 1:
        raise CollisionDetected(f"pairwise distance below {tol_collision} at t={sol.t_events[0][0]:.6g}")
    if sol.status != 0:
        raise ToleranceNotMet(sol.message)
    Y = sol.y.T
    pos = Y[:, :2 * n].reshape(-1, n, 2)
    vel = Y[:, 2 * n:].reshape(-1, n, 2)
    e0 = nbody_energy(m, pos[0], vel[0])
    e1 = nbody_energy(m, pos[-1], vel[-1])
    return TrajectoryTable(sol.t, pos, m, energy_drift=abs(e1 - e0) / max(abs(e0), 1e-300))
