"""Command line driver.

    sitnikov certify --builtin circular:2
    sitnikov pipeline --builtin kepler:0.2 --p 1 3 --q 1 --out run/

Exit codes: 0 success, 1 numerical failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conservative import amplitude_of_energy, energy_min, period_function, solve_seed
from .continuation import REACHED, ContinuationConfig, continue_branch, polish_endpoint
from .errors import InputError, NoSeed, NotCertified, NumericalError, SitnikovError
from .field import HomotopyField, field_bounds
from .primaries import (ANALYTIC_TOL, INGEST_TOL, PERIOD, PrimaryEnsemble, build_circular_polygon,
                        build_kepler_pair, ingest_trajectory, nbody_integrate, read_trajectory)
from .shooting import integrate_full, verify_solution
from .spectral import sturm_eigenvalues, verify_comparison_bounds

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2


@dataclass
class RunConfig:
    source: dict
    targets: list
    tol_integrator: float = 1e-10
    tol_corrector: float = 1e-10
    tol_cert: float | None = None
    tol_verify: float = 1e-6
    tol_symmetry: float = 1e-8
    m_user: float | None = None
    epsilon1: float | None = None
    relaxed: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("tol_integrator", "tol_corrector", "tol_verify", "tol_symmetry"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")
        if self.tol_cert is not None and not self.tol_cert > 0:
            raise InputError("tol_cert must be positive")
        for p, q in self.targets:
            if p < 1 or q < 1:
                raise InputError(f"need p >= 1 and q >= 1, got ({p}, {q})")

    def to_json(self):
        d = asdict(self)
        d["targets"] = [list(t) for t in self.targets]
        return d

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]

    def continuation(self) -> ContinuationConfig:
        return ContinuationConfig(corrector_tol=self.tol_corrector, rtol=self.tol_integrator,
                                  atol=self.tol_integrator, m_user=self.m_user,
                                  epsilon1=self.epsilon1, relaxed=self.relaxed)


# --------------------------------------------------------------------------
# ensemble construction
# --------------------------------------------------------------------------

def parse_builtin(text: str, tol: float | None = None) -> PrimaryEnsemble:
    parts = text.split(":")
    name, params = parts[0].lower(), parts[1:]
    tol = ANALYTIC_TOL if tol is None else tol
    try:
        if name == "circular":
            if not 1 <= len(params) <= 2:
                raise ValueError
            n = int(params[0])
            d = int(params[1]) if len(params) == 2 else None
            return build_circular_polygon(n, d, tol=tol)
        if name == "kepler":
            if len(params) != 1:
                raise ValueError
            return build_kepler_pair(float(params[0]), tol=tol)
    except ValueError as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"bad builtin parameters {text!r}: expected circular:n[:d] or kepler:e") from exc
    raise InputError(f"unknown builtin {name!r}; known: circular, kepler")


def build_ensemble(source: dict, tol: float | None = None) -> PrimaryEnsemble:
    if "builtin" in source:
        return parse_builtin(source["builtin"], tol)
    table, spec = read_trajectory(source["file"], source["spec"])
    return ingest_trajectory(table, spec, tol=INGEST_TOL if tol is None else tol,
                             name=Path(source["file"]).stem)


def _source_from_args(args) -> dict:
    if getattr(args, "ensemble", None):
        try:
            src = json.loads(Path(args.ensemble).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read ensemble file {args.ensemble}: {exc}") from exc
        src = src.get("source", src)
        if "builtin" not in src and not ("file" in src and "spec" in src):
            raise InputError("ensemble file needs 'builtin' or 'file' + 'spec'")
        return src
    if args.builtin and args.file:
        raise InputError("use either --builtin or --file, not both")
    if args.builtin:
        return {"builtin": args.builtin}
    if args.file:
        if not args.spec:
            raise InputError("--file requires --spec")
        return {"file": str(args.file), "spec": str(args.spec)}
    raise InputError("an ensemble is required: --builtin NAME:PARAMS, --file/--spec or --ensemble")


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

class Output:
    def __init__(self, directory, cfg: RunConfig):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.stamp = {"version": __version__, "config_hash": cfg.hash()}

    def json(self, name, payload) -> Path:
        path = self.dir / name
        path.write_text(json.dumps({**self.stamp, **payload}, indent=2, sort_keys=True,
                                   default=_json_default) + "\n")
        return path

    def csv(self, name, header, rows) -> Path:
        path = self.dir / name
        buf = io.StringIO()
        buf.write(f"# sitnikov {__version__} config_hash={self.stamp['config_hash']}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        path.write_text(buf.getvalue())
        return path

    def profile(self, name, prof) -> Path:
        return self.csv(name, ["t", "z", "zdot"], zip(prof.t, prof.z, prof.zdot))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _echo(msg):
    print(msg, flush=True)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_certify(cfg: RunConfig, out: Output, args) -> int:
    try:
        ens = build_ensemble(cfg.source, cfg.tol_cert)
    except NotCertified as exc:
        out.json("certificate.json", {"source": cfg.source, "certificate": exc.certificate.to_json()})
        _echo(f"certification FAILED: {exc}")
        return EXIT_INPUT
    out.json("certificate.json", {"source": cfg.source, "certificate": ens.certificate.to_json(),
                                  "ensemble": ens.describe()})
    out.json("ensemble.json", {"source": cfg.source})
    c = ens.certificate
    _echo(f"certified: rotation {c.max_rotation_residual:.3e}, reversal {c.max_reversal_residual:.3e}, "
          f"mass {c.max_mass_residual:.3e} (tol {c.tolerance:.1e})")
    return EXIT_OK


def cmd_bounds(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    b = field_bounds(ens)
    out.json("bounds.json", {"source": cfg.source, "bounds": b.to_json(),
                             "constants": ens.constants.to_json(),
                             "lambda_lipschitz": HomotopyField(ens).lambda_lipschitz(),
                             "sqrt_beta": math.sqrt(ens.constants.beta)})
    _echo(f"m = {b.m:.10g}, M = {b.M:.10g}, sqrt(beta) = {math.sqrt(ens.constants.beta):.10g}")
    return EXIT_OK


def cmd_period_table(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    Emin = energy_min(ens)
    rows = []
    for delta in np.geomspace(1e-8, 0.999, args.n_energies):
        E = Emin * (1.0 - delta)
        rows.append((E, amplitude_of_energy(ens, E), period_function(ens, E)))
    out.csv("period_table.csv", ["E", "zeta", "T"], rows)
    _echo(f"{len(rows)} energies written, T from {rows[0][2]:.8g} to {rows[-1][2]:.8g}")
    return EXIT_OK


def cmd_seed(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    for p, q in cfg.targets:
        s = solve_seed(ens, p, q, relaxed=cfg.relaxed)
        out.json(f"seed_p{p}_q{q}.json", {"seed": s.to_json()})
        out.profile(f"seed_p{p}_q{q}.csv", s.profile)
        _echo(f"seed ({p},{q}): E = {s.level.E:.12g}, zeta = {s.zeta:.12g}, zeros = {s.zero_count}")
    return EXIT_OK


def _run_target(ens, cfg: RunConfig, out: Output, p, q, bounds) -> dict:
    row = {"p": p, "q": q, "status": None, "reason": "", "zeta0": None, "zeta1": None,
           "zero_count": None, "ode_residual": None, "verified": False}
    try:
        seed = solve_seed(ens, p, q, relaxed=cfg.relaxed)
    except NoSeed:
        row.update(status="NoSeed", reason="p > sqrt(beta)*q")
        return row
    except SitnikovError as exc:
        row.update(status=type(exc).__name__, reason=str(exc))
        return row
    row["zeta0"] = seed.zeta
    try:
        branch = continue_branch(seed, ens, cfg.continuation(), bounds=bounds)
    except SitnikovError as exc:
        row.update(status=type(exc).__name__, reason=str(exc))
        return row
    branch.write_jsonl(out.dir / f"branch_p{p}_q{q}.jsonl", ens, out.stamp)
    row.update(status=branch.status, reason=branch.message)
    if branch.status != REACHED:
        return row
    try:
        zeta, _ = polish_endpoint(branch, ens)
        prof = integrate_full(ens, zeta, 1.0, p, q, relaxed=cfg.relaxed)
        rep = verify_solution(prof, ens, 1.0, tol=cfg.tol_verify, symmetry_tol=cfg.tol_symmetry)
    except SitnikovError as exc:
        row.update(status=type(exc).__name__, reason=str(exc))
        return row
    out.profile(f"profile_p{p}_q{q}.csv", prof)
    out.json(f"verify_p{p}_q{q}.json", {"p": p, "q": q, "zeta": zeta, "report": rep.to_json()})
    row.update(zeta1=zeta, zero_count=rep.zero_count, ode_residual=rep.ode_residual,
               verified=rep.passed)
    if not rep.passed:
        row["reason"] = "; ".join(rep.flags)
    return row


def _run_targets(ens, cfg, out, threads):
    bounds = field_bounds(ens)
    jobs = [tuple(t) for t in cfg.targets]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda t: _run_target(ens, cfg, out, t[0], t[1], bounds), jobs))
    else:
        rows = [_run_target(ens, cfg, out, p, q, bounds) for p, q in jobs]
    return sorted(rows, key=lambda r: (r["q"], r["p"])), bounds


def _row_failed(r):
    if r["status"] == "NoSeed":
        return False
    return r["status"] != REACHED or not r["verified"]


def cmd_continue(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    rows, _ = _run_targets(ens, cfg, out, args.threads)
    for r in rows:
        _echo(f"({r['p']},{r['q']}): {r['status']} {r['reason']}".rstrip())
    return EXIT_NUMERICAL if any(_row_failed(r) for r in rows) else EXIT_OK


def _spectra(ens, cfg, out, lambdas, q_values, p_max, bounds):
    ok = True
    for q in q_values:
        for lam in lambdas:
            rep = sturm_eigenvalues(ens, lam, p_max, q, bounds=bounds)
            verdicts = verify_comparison_bounds(rep, bounds)
            out.json(f"spectrum_q{q}_lam{lam:g}.json",
                     {"report": rep.to_json(), "bounds": bounds.to_json(),
                      "verdicts": [v.to_json() for v in verdicts]})
            ok &= all(v.nondegenerate for v in verdicts if v.excluded)
    return ok


def cmd_spectrum(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    bounds = field_bounds(ens)
    qs = sorted({q for _, q in cfg.targets}) or [1]
    _spectra(ens, cfg, out, args.lambdas, qs, args.p_max, bounds)
    _echo(f"spectral reports written for q in {qs}, lambda in {args.lambdas}")
    return EXIT_OK


def cmd_verify(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    if args.zeta is None:
        raise InputError("verify needs --zeta")
    fails = 0
    for p, q in cfg.targets:
        prof = integrate_full(ens, args.zeta, args.lam, p, q, relaxed=cfg.relaxed)
        rep = verify_solution(prof, ens, args.lam, tol=cfg.tol_verify, symmetry_tol=cfg.tol_symmetry)
        out.json(f"verify_p{p}_q{q}.json", {"p": p, "q": q, "zeta": args.zeta, "report": rep.to_json()})
        _echo(f"({p},{q}) lambda={args.lam}: {'passed' if rep.passed else 'FAILED ' + ', '.join(rep.flags)}")
        fails += not rep.passed
    return EXIT_NUMERICAL if fails else EXIT_OK


def _initial_state(ens: PrimaryEnsemble, h: float = 1e-3):
    """Positions and 4th-order central-difference velocities at t = 0."""
    pos = lambda t: np.stack([o.position(np.array([t]))[0] for o in ens.orbits])
    vel = (8.0 * (pos(h) - pos(-h)) - (pos(2 * h) - pos(-2 * h))) / (12.0 * h)
    return pos(0.0), vel


def cmd_nbody(cfg, out, args) -> int:
    if args.ic:
        try:
            ic = json.loads(Path(args.ic).read_text())
            masses, q0, v0 = ic["masses"], ic["positions"], ic["velocities"]
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise InputError(f"cannot read initial conditions {args.ic}: {exc}") from exc
        spec = None
    else:
        ens = build_ensemble(cfg.source, cfg.tol_cert)
        masses, spec = ens.masses, ens.symmetry
        q0, v0 = _initial_state(ens)
    table = nbody_integrate(masses, q0, v0, horizon=PERIOD, n_samples=args.samples)
    table.write(out.dir / "trajectory.csv", out.dir / "trajectory.json", spec)
    out.json("nbody.json", {"closure_residual": table.closure_residual,
                            "energy_drift": table.energy_drift, "samples": args.samples})
    _echo(f"closure {table.closure_residual:.3e}, relative energy drift {table.energy_drift:.3e}")
    return EXIT_OK


def cmd_pipeline(cfg, out, args) -> int:
    ens = build_ensemble(cfg.source, cfg.tol_cert)
    out.json("certificate.json", {"source": cfg.source, "certificate": ens.certificate.to_json(),
                                  "ensemble": ens.describe()})
    rows, bounds = _run_targets(ens, cfg, out, args.threads)
    out.json("bounds.json", {"bounds": bounds.to_json(), "constants": ens.constants.to_json()})
    qs = sorted({q for _, q in cfg.targets})
    spectral_ok = _spectra(ens, cfg, out, [0.0, 0.5, 1.0], qs, args.p_max, bounds)
    header = ["p", "q", "status", "reason", "zeta0", "zeta1", "zero_count", "ode_residual", "verified"]
    out.csv("summary.csv", header, [[r[h] for h in header] for r in rows])
    out.json("summary.json", {"rows": rows, "spectral_nondegenerate": spectral_ok})
    for r in rows:
        _echo(f"({r['p']},{r['q']}): {r['status']}"
              + (f" verified={r['verified']}" if r["status"] == REACHED else f" {r['reason']}"))
    return EXIT_NUMERICAL if any(_row_failed(r) for r in rows) or not spectral_ok else EXIT_OK


COMMANDS = {"certify": cmd_certify, "bounds": cmd_bounds, "period-table": cmd_period_table,
            "seed": cmd_seed, "continue": cmd_continue, "spectrum": cmd_spectrum,
            "verify": cmd_verify, "nbody": cmd_nbody, "pipeline": cmd_pipeline}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _common(sp):
    src = sp.add_argument_group("ensemble")
    src.add_argument("--builtin", metavar="NAME:PARAMS", help="circular:n[:d] or kepler:e")
    src.add_argument("--file", metavar="PATH", help="trajectory CSV t,x1,y1,...")
    src.add_argument("--spec", metavar="PATH", help="JSON sidecar with masses and symmetry")
    src.add_argument("--ensemble", metavar="FILE", help="JSON with a 'source' entry (from certify)")
    sp.add_argument("--p", type=int, nargs="+", default=[1])
    sp.add_argument("--q", type=int, default=1)
    sp.add_argument("--tol-integrator", type=float, default=1e-10)
    sp.add_argument("--tol-corrector", type=float, default=1e-10)
    sp.add_argument("--tol-cert", type=float, default=None)
    sp.add_argument("--tol-verify", type=float, default=1e-6)
    sp.add_argument("--tol-symmetry", type=float, default=1e-8)
    sp.add_argument("--m-user", type=float, default=None)
    sp.add_argument("--epsilon1", type=float, default=None)
    sp.add_argument("--relaxed-symmetry", action="store_true")
    sp.add_argument("--out", default=".", metavar="DIR")
    sp.add_argument("--threads", type=int, default=1, metavar="N")


def build_parser():
    ap = argparse.ArgumentParser(prog="sitnikov", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _common(sp)
        if name == "period-table":
            sp.add_argument("--n-energies", type=int, default=50)
        if name in ("spectrum", "pipeline"):
            sp.add_argument("--p-max", type=int, default=None)
        if name == "spectrum":
            sp.add_argument("--lambdas", type=float, nargs="+", default=[0.0, 0.5, 1.0])
        if name == "verify":
            sp.add_argument("--zeta", type=float, default=None)
            sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
        if name == "nbody":
            sp.add_argument("--ic", metavar="JSON", help="masses, positions, velocities")
            sp.add_argument("--samples", type=int, default=256)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        source = {} if (args.command == "nbody" and args.ic) else _source_from_args(args)
        cfg = RunConfig(source, [(p, args.q) for p in args.p], args.tol_integrator,
                        args.tol_corrector, args.tol_cert, args.tol_verify, args.tol_symmetry,
                        args.m_user, args.epsilon1, args.relaxed_symmetry,
                        {"command": args.command})
        if args.threads < 1:
            raise InputError("--threads must be >= 1")
        out = Output(args.out, cfg)
        return COMMANDS[args.command](cfg, out, args)
    except InputError as exc:
        print(f"input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
