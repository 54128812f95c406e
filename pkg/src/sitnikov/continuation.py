"""Tracking the root curve R(zeta, lambda) = 0 of the shooting residual.

Natural-parameter steps in lambda are used while the curve is a graph over
lambda; when |dR/dlambda| / |dR/dzeta| grows past a threshold the tracker
switches to pseudo-arclength steps in (zeta, lambda), which lets it round
folds. Every accepted point is monitored for zero-count preservation, the
a-priori sup-norm bound and proximity to the trivial solution.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, kernels
from .conservative import SeedSolution
from .errors import CountMismatch, DegenerateProfile, SeedInvalid, ZeroCountBreach
from .field import FieldBounds
from .primaries import PrimaryEnsemble
from .shooting import FullProfile, count_zeros, full_from_shot, shoot, sign_changes, winding_number

REACHED = "ReachedLambdaOne"
FOLD = "FoldBeyondLimit"
TRIVIAL = "TrivialCollapse"
BOUND = "BoundExceeded"
STEP_FAILURE = "StepFailure"


@dataclass
class ContinuationConfig:
    step_initial: float = 0.01
    step_max: float = 0.05
    step_min: float = 1e-6
    shrink: float = 0.5
    grow: float = 1.3
    grow_after: int = 2
    corrector_tol: float = 1e-10
    max_newton: int = 8
    slope_threshold: float = 10.0
    rtol: float = 1e-10
    atol: float = 1e-10
    m_user: float | None = None          # default: m_user_factor * seed amplitude
    m_user_factor: float = 1e3
    epsilon1: float | None = None        # default: epsilon1_factor * seed amplitude
    epsilon1_factor: float = 1e-6
    max_folds: int = 2
    max_points: int = 5000
    n_points: int | None = None
    relaxed: bool = False

    def __post_init__(self):
        for name in ("step_initial", "step_max", "step_min", "corrector_tol", "rtol", "atol",
                     "slope_threshold", "m_user_factor", "epsilon1_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.m_user is not None and not self.m_user > 0:
            raise ValueError("m_user must be positive")
        if self.epsilon1 is not None and not self.epsilon1 > 0:
            raise ValueError("epsilon1 must be positive")
        if not 0 < self.shrink < 1 or self.grow < 1:
            raise ValueError("need 0 < shrink < 1 <= grow")

    def to_json(self):
        return asdict(self)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class BranchPoint:
    lam: float
    zeta: float
    residual: float
    dR_dzeta: float
    dR_dlambda: float
    zero_count: int | None
    winding: float | None
    sup_norm: float
    step_taken: float
    newton_iterations: int
    mode: str
    sign_changes: int | None = None
    profile: FullProfile | None = field(default=None, repr=False)

    def to_json(self):
        return {"lambda": self.lam, "zeta": self.zeta, "residual": self.residual,
                "dR_dzeta": self.dR_dzeta, "dR_dlambda": self.dR_dlambda,
                "zero_count": self.zero_count, "winding": self.winding,
                "sup_norm": self.sup_norm, "step_taken": self.step_taken,
                "newton_iterations": self.newton_iterations, "mode": self.mode,
                "sign_changes": self.sign_changes}


@dataclass
class Branch:
    p: int
    q: int
    seed: SeedSolution | None
    config: ContinuationConfig
    points: list = field(default_factory=list)
    status: str | None = None
    folds: list = field(default_factory=list)
    events: list = field(default_factory=list)
    message: str = ""

    @property
    def end(self) -> BranchPoint:
        return self.points[-1]

    @property
    def lambdas(self):
        return np.array([pt.lam for pt in self.points])

    @property
    def zetas(self):
        return np.array([pt.zeta for pt in self.points])

    def header(self, ensemble: PrimaryEnsemble | None = None) -> dict:
        head = {"type": "header", "p": self.p, "q": self.q, "version": __version__,
                "config": self.config.to_json(), "config_hash": self.config.hash()}
        if self.seed is not None:
            head["seed"] = self.seed.to_json()
        if ensemble is not None:
            head["ensemble"] = ensemble.describe()
        return head

    def write_jsonl(self, path, ensemble: PrimaryEnsemble | None = None, stamp: dict | None = None):
        head = self.header(ensemble)
        if stamp:
            head["run"] = stamp
        with open(path, "w") as fh:
            fh.write(json.dumps(head, sort_keys=True) + "\n")
            for pt in self.points:
                fh.write(json.dumps({"type": "point", **pt.to_json()}, sort_keys=True) + "\n")
            fh.write(json.dumps({"type": "status", "status": self.status, "message": self.message,
                                 "folds": self.folds, "events": self.events},
                                sort_keys=True) + "\n")


def read_branch_jsonl(path) -> tuple[dict, list, dict]:
    """Return (header, point records, status record)."""
    head, pts, status = None, [], None
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "header":
                head = rec
            elif kind == "point":
                pts.append(rec)
            else:
                status = rec
    return head, pts, status


# --------------------------------------------------------------------------
# residual problems
# --------------------------------------------------------------------------

class ShootingProblem:
    """R(zeta, lambda) from the symmetric shooting map."""

    def __init__(self, ensemble: PrimaryEnsemble, p: int, q: int, config: ContinuationConfig):
        self.ensemble = ensemble
        self.p = p
        self.q = q
        self.config = config

    def evaluate(self, zeta, lam):
        c = self.config
        shot = shoot(self.ensemble, zeta, lam, self.p, self.q, rtol=c.rtol, atol=c.atol,
                     n_points=c.n_points, relaxed=c.relaxed)
        return shot.residual, shot.derivative_wrt_amplitude, shot.derivative_wrt_lambda, shot

    def diagnostics(self, zeta, lam, shot) -> dict:
        prof = full_from_shot(shot, residual_tol=max(1e-6, 10 * self.config.corrector_tol),
                              junction_tol=1e-3)
        m = self.ensemble.model
        prof.zddot = kernels.satellite_rhs_grid(prof.t, prof.z, lam, *m.args())
        out = {"profile": prof, "sup_norm": prof.sup_norm, "zero_count": None, "winding": None,
               "sign_changes": sign_changes(prof.z)}
        try:
            out["winding"] = winding_number(prof)
            out["zero_count"] = count_zeros(prof)
        except (DegenerateProfile, CountMismatch) as exc:
            out["count_error"] = str(exc)
        return out


# --------------------------------------------------------------------------
# monitors
# --------------------------------------------------------------------------

@dataclass
class MonitorResult:
    status: str                     # "ok" or the triggered status
    value: float
    threshold: float
    contradicts_prop_neighborhood: bool = False

    @property
    def ok(self):
        return self.status == "ok"


def monitor_bound(point: BranchPoint, m_user: float) -> MonitorResult:
    """BoundExceeded when the sup-norm reaches the configured bound."""
    if not m_user > 0:
        raise ValueError("m_user must be positive")
    return MonitorResult(BOUND if point.sup_norm >= m_user else "ok", point.sup_norm, m_user)


def monitor_trivial(point: BranchPoint, epsilon1: float, bounds: FieldBounds | None = None,
                    p: int | None = None, q: int | None = None) -> MonitorResult:
    """TrivialCollapse when sup|z| <= epsilon1.

    If the (p, q) exclusion test holds, such a collapse cannot happen for
    exact solutions; it is then flagged as a contradiction (a numerical
    tolerance failure rather than a genuine branch ending).
    """
    if point.sup_norm > epsilon1:
        return MonitorResult("ok", point.sup_norm, epsilon1)
    contra = bool(bounds is not None and p is not None and q is not None and bounds.excluded(p, q))
    return MonitorResult(TRIVIAL, point.sup_norm, epsilon1, contra)


# --------------------------------------------------------------------------
# tracker
# --------------------------------------------------------------------------

def _newton_fixed_lambda(problem, zeta, lam, tol, max_iter):
    steps = []
    R, Rz, Rl, shot = problem.evaluate(zeta, lam)
    it = 0
    while abs(R) > tol:
        if it >= max_iter or Rz == 0.0 or not math.isfinite(R):
            return None
        dz = -R / Rz
        zeta += dz
        steps.append(abs(dz))
        it += 1
        R, Rz, Rl, shot = problem.evaluate(zeta, lam)
    if len(steps) >= 2 and steps[-1] >= steps[-2] and steps[-1] > 1e-13 * max(1.0, abs(zeta)):
        return None
    return zeta, R, Rz, Rl, shot, it


def _newton_arclength(problem, x_pred, tau, tol, max_iter):
    x = x_pred.copy()
    steps = []
    it = 0
    while True:
        if not 0.0 <= x[1] <= 1.0:
            return None
        R, Rz, Rl, shot = problem.evaluate(x[0], x[1])
        g = float(tau @ (x - x_pred))
        if abs(R) <= tol and abs(g) <= 1e-12:
            break
        if it >= max_iter or not math.isfinite(R):
            return None
        J = np.array([[Rz, Rl], [tau[0], tau[1]]])
        try:
            dx = np.linalg.solve(J, -np.array([R, g]))
        except np.linalg.LinAlgError:
            return None
        x = x + dx
        steps.append(float(np.abs(dx).max()))
        it += 1
    if len(steps) >= 2 and steps[-1] >= steps[-2] and steps[-1] > 1e-13:
        return None
    return x, R, Rz, Rl, shot, it


def _tangent(Rz, Rl, prev=None):
    tau = np.array([-Rl, Rz], dtype=float)
    nrm = np.linalg.norm(tau)
    if nrm == 0.0:
        return None
    tau /= nrm
    if prev is None:
        if tau[1] < 0:
            tau = -tau
    elif tau @ prev < 0:
        tau = -tau
    return tau


def _locate_fold(prev_points, zeta, lam, tau0, tau1):
    """Turning point estimate: vertex of the parabola lambda(zeta) through the
    last three points, falling back to the secant between the last two."""
    zs = [pt.zeta for pt in prev_points] + [zeta]
    ls = [pt.lam for pt in prev_points] + [lam]
    if len(zs) == 3 and len(set(zs)) == 3:
        a, b, c = np.polyfit(zs, ls, 2)
        if a != 0.0:
            zv = -b / (2.0 * a)
            if min(zs) <= zv <= max(zs):
                return {"lambda": float(c - b * b / (4.0 * a)), "zeta": float(zv)}
    s = tau0[1] / (tau0[1] - tau1[1])
    return {"lambda": float(ls[-2] + s * (ls[-1] - ls[-2])),
            "zeta": float(zs[-2] + s * (zs[-1] - zs[-2]))}


def _make_point(lam, zeta, R, Rz, Rl, diag, step, it, mode):
    return BranchPoint(float(lam), float(zeta), float(R), float(Rz), float(Rl),
                       diag.get("zero_count"), diag.get("winding"), float(diag["sup_norm"]),
                       float(step), int(it), mode, diag.get("sign_changes"), diag.get("profile"))


def continue_branch(seed: SeedSolution | None, ensemble: PrimaryEnsemble | None = None,
                    config: ContinuationConfig | None = None, problem=None,
                    bounds: FieldBounds | None = None, zeta0: float | None = None,
                    p: int | None = None, q: int | None = None) -> Branch:
    """Follow the branch that starts at ``seed`` from lambda = 0 to lambda = 1.

    ``problem`` may replace the shooting map with any object exposing
    ``evaluate(zeta, lam) -> (R, R_zeta, R_lambda, aux)`` and
    ``diagnostics(zeta, lam, aux) -> dict``; then ``zeta0``, ``p``, ``q``
    describe the start point.
    """
    config = config or ContinuationConfig()
    if seed is not None:
        p, q, zeta0 = seed.p, seed.q, seed.zeta
        ensemble = ensemble or seed.ensemble
        if seed.zero_count != 2 * p:
            raise SeedInvalid(f"seed zero count {seed.zero_count} != {2 * p}")
    if problem is None:
        if ensemble is None:
            raise ValueError("need an ensemble or a problem")
        problem = ShootingProblem(ensemble, p, q, config)
    branch = Branch(p, q, seed, config)
    expected = 2 * p
    tol = config.corrector_tol

    start = _newton_fixed_lambda(problem, float(zeta0), 0.0, tol, config.max_newton)
    if start is None:
        raise SeedInvalid("corrector failed at lambda = 0")
    zeta, R, Rz, Rl, aux, it = start
    diag = problem.diagnostics(zeta, 0.0, aux)
    if diag.get("zero_count") != expected:
        raise SeedInvalid(f"start point has {diag.get('zero_count')} zeros, expected {expected}")
    amp = abs(zeta)
    m_user = config.m_user if config.m_user is not None else config.m_user_factor * amp
    eps1 = config.epsilon1 if config.epsilon1 is not None else config.epsilon1_factor * amp
    pt = _make_point(0.0, zeta, R, Rz, Rl, diag, 0.0, it, "natural")
    branch.points.append(pt)

    def run_monitors(point):
        mb = monitor_bound(point, m_user)
        if not mb.ok:
            branch.events.append({"lambda": point.lam, "monitor": BOUND, "value": mb.value})
            return BOUND
        mt = monitor_trivial(point, eps1, bounds, p, q)
        if not mt.ok:
            branch.events.append({"lambda": point.lam, "monitor": TRIVIAL, "value": mt.value,
                                  "contradicts_prop_neighborhood": mt.contradicts_prop_neighborhood})
            return TRIVIAL
        return None

    status = run_monitors(pt)
    if status:
        branch.status = status
        return branch

    tau = _tangent(Rz, Rl)
    mode = "natural" if abs(Rl) <= config.slope_threshold * abs(Rz) else "arclength"
    ds = config.step_initial
    successes = 0
    lam = 0.0
    while True:
        if len(branch.points) >= config.max_points:
            branch.status = STEP_FAILURE
            branch.message = "max_points reached"
            break
        if mode == "natural":
            dl = min(ds, 1.0 - lam)
            z_pred = zeta - Rl / Rz * dl if Rz != 0.0 else zeta
            res = _newton_fixed_lambda(problem, z_pred, lam + dl, tol, config.max_newton)
            if res is not None:
                new_lam = lam + dl
                new_zeta, nR, nRz, nRl, aux, it = res
                step = dl
        else:
            x = np.array([zeta, lam])
            x_pred = x + ds * tau
            hit_end = False
            if x_pred[1] >= 1.0 and tau[1] > 0:
                frac = (1.0 - lam) / tau[1]
                z_pred = zeta + frac * tau[0]
                res = _newton_fixed_lambda(problem, z_pred, 1.0, tol, config.max_newton)
                hit_end = True
                if res is not None:
                    new_lam = 1.0
                    new_zeta, nR, nRz, nRl, aux, it = res
                    step = frac
            elif x_pred[1] < 0.0:
                branch.status = FOLD
                branch.message = "branch turned back to lambda = 0"
                break
            else:
                res = _newton_arclength(problem, x_pred, tau, tol, config.max_newton)
                if res is not None:
                    xn, nR, nRz, nRl, aux, it = res
                    new_zeta, new_lam = float(xn[0]), float(xn[1])
                    step = ds
            del hit_end

        if res is not None:
            diag = problem.diagnostics(new_zeta, new_lam, aux)
            if diag.get("zero_count") != expected and diag["sup_norm"] > eps1:
                res = None  # jumped off the branch or lost resolution; retry smaller

        if res is None:
            successes = 0
            ds *= config.shrink
            if ds < config.step_min:
                branch.status = STEP_FAILURE
                branch.message = f"step fell below {config.step_min:g} at lambda={lam:.6g}"
                break
            continue

        new_tau = _tangent(nRz, nRl, tau)
        if new_tau is not None and tau is not None and new_tau[1] * tau[1] < 0:
            branch.folds.append(_locate_fold(branch.points[-2:], new_zeta, new_lam,
                                             tau, new_tau))
        pt = _make_point(new_lam, new_zeta, nR, nRz, nRl, diag, step, it, mode)
        branch.points.append(pt)
        zeta, lam, Rz, Rl = new_zeta, new_lam, nRz, nRl
        tau = new_tau if new_tau is not None else tau

        status = run_monitors(pt)
        if status:
            branch.status = status
            break
        if len(branch.folds) > config.max_folds:
            branch.status = FOLD
            branch.message = f"more than {config.max_folds} folds"
            break
        if lam >= 1.0:
            branch.status = REACHED
            break

        steep = abs(Rl) > config.slope_threshold * abs(Rz)
        if mode == "natural" and steep:
            mode = "arclength"
        elif mode == "arclength" and not steep and tau[1] > 0:
            mode = "natural"

        successes += 1
        if successes >= config.grow_after:
            ds = min(ds * config.grow, config.step_max)
    return branch


# --------------------------------------------------------------------------
# distinctness
# --------------------------------------------------------------------------

def _resample(profile: FullProfile, N: int) -> np.ndarray:
    v = profile.z[:-1]
    n = len(v)
    if n == N:
        return v
    F = np.fft.rfft(v)
    G = np.zeros(N // 2 + 1, dtype=complex)
    k = min(len(F), len(G))
    G[:k] = F[:k]
    return np.fft.irfft(G, N) * (N / n)


@dataclass
class DistinctnessReport:
    pairs: list
    duplicates: list
    all_distinct: bool

    def to_json(self):
        return {"pairs": self.pairs, "duplicates": self.duplicates, "all_distinct": self.all_distinct}


def distinctness_check(branches, tol: float = 1e-8, lambda_tol: float = 1e-12) -> DistinctnessReport:
    """Pairwise sup-norm separation of branches with different p at shared lambdas.

    Branches with identical seeds are reported as duplicate input. A branch
    whose zero count varies along its points raises ZeroCountBreach.
    """
    for b in branches:
        counts = {pt.zero_count for pt in b.points if pt.zero_count is not None}
        if len(counts) > 1:
            raise ZeroCountBreach(f"branch ({b.p},{b.q}) has zero counts {sorted(counts)}")
    pairs, dups = [], []
    for i in range(len(branches)):
        for j in range(i + 1, len(branches)):
            a, b = branches[i], branches[j]
            if a.q != b.q:
                continue
            if a.p == b.p and abs(a.points[0].zeta - b.points[0].zeta) <= tol:
                dups.append([i, j])
                continue
            min_sep, common = math.inf, 0
            lb = b.lambdas
            for pa in a.points:
                k = int(np.argmin(np.abs(lb - pa.lam)))
                if abs(lb[k] - pa.lam) > lambda_tol:
                    continue
                pb = b.points[k]
                common += 1
                if pa.profile is None or pb.profile is None:
                    sep = abs(pa.zeta - pb.zeta)
                else:
                    N = max(len(pa.profile.z), len(pb.profile.z)) - 1
                    sep = float(np.abs(_resample(pa.profile, N) - _resample(pb.profile, N)).max())
                trivial = max(pa.sup_norm, pb.sup_norm) <= tol
                if not trivial:
                    min_sep = min(min_sep, sep)
            pairs.append({"branches": [i, j], "p": [a.p, b.p], "common_lambdas": common,
                          "min_separation": None if min_sep == math.inf else min_sep,
                          "distinct": bool(min_sep > tol)})
    return DistinctnessReport(pairs, dups, all(pr["distinct"] for pr in pairs))


# --------------------------------------------------------------------------
# endpoint
# --------------------------------------------------------------------------

def polish_endpoint(branch: Branch, ensemble: PrimaryEnsemble, rtol: float = 1e-12,
                    atol: float = 1e-12, tol: float = 1e-12, max_iter: int = 10):
    """Re-solve R(zeta, lam_end) = 0 with a tighter integrator.

    Returns (zeta, residual). The branch itself is left untouched.
    """
    pt = branch.end
    cfg = ContinuationConfig(**{**branch.config.to_json(), "rtol": rtol, "atol": atol})
    prob = ShootingProblem(ensemble, branch.p, branch.q, cfg)
    res = _newton_fixed_lambda(prob, pt.zeta, pt.lam, tol, max_iter)
    if res is None:
        R = prob.evaluate(pt.zeta, pt.lam)[0]
        return pt.zeta, float(R)
    return float(res[0]), float(res[1])
