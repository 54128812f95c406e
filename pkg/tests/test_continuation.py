import math

import numpy as np
import pytest

from sitnikov import (ContinuationConfig, continue_branch, distinctness_check, field_bounds,
                      integrate_full, monitor_bound, monitor_trivial, polish_endpoint, solve_seed,
                      verify_solution)
from sitnikov.continuation import (BOUND, FOLD, REACHED, STEP_FAILURE, TRIVIAL, BranchPoint,
                                   read_branch_jsonl)
from sitnikov.errors import SeedInvalid, ZeroCountBreach


class FoldProblem:
    """R = (zeta - 1)^2 + lam - c: the root curve turns back at lam = c."""

    def __init__(self, c=0.5):
        self.c = c

    def evaluate(self, zeta, lam):
        return (zeta - 1.0) ** 2 + lam - self.c, 2.0 * (zeta - 1.0), 1.0, None

    def diagnostics(self, zeta, lam, aux):
        return {"sup_norm": abs(zeta), "zero_count": 2, "winding": 2.0, "sign_changes": 2}


class DeadEndProblem:
    """A root for lam < 0.3, none beyond."""

    def evaluate(self, zeta, lam):
        if lam < 0.3:
            return zeta - 1.0, 1.0, 0.0, None
        return 1.0 + zeta ** 2, 2.0 * zeta, 0.0, None

    def diagnostics(self, zeta, lam, aux):
        return {"sup_norm": abs(zeta), "zero_count": 2, "winding": 2.0, "sign_changes": 2}


@pytest.fixture(scope="module")
def circ_branches(circ2):
    return [continue_branch(solve_seed(circ2, p, 1)) for p in (1, 3, 5)]


def test_circular_branches_are_constant(circ_branches):
    for b in circ_branches:
        assert b.status == REACHED
        assert b.end.lam == 1.0
        assert np.abs(b.zetas - b.zetas[0]).max() <= 1e-10
        assert {pt.zero_count for pt in b.points} == {2 * b.p}


def test_branch_invariants(circ_branches, kep02):
    b = continue_branch(solve_seed(kep02, 1, 1))
    for br in circ_branches + [b]:
        cfg = br.config
        assert all(abs(pt.residual) <= cfg.corrector_tol for pt in br.points)
        assert np.all(np.diff(br.lambdas) <= cfg.step_max + 1e-12)
        assert np.all(np.diff(br.lambdas) > 0)


def test_kepler_branch_endpoint_verifies(kep02):
    seed = solve_seed(kep02, 1, 1)
    b = continue_branch(seed)
    assert b.status == REACHED and not b.folds
    zeta, res = polish_endpoint(b, kep02)
    assert abs(res) <= 1e-11
    rep = verify_solution(integrate_full(kep02, zeta, 1.0, 1, 1), kep02, 1.0)
    assert rep.passed, rep.flags
    sup = max(pt.sup_norm for pt in b.points)
    assert sup < 100 * seed.zeta


def test_fold_is_rounded_and_reported():
    c = 0.5
    b = continue_branch(None, problem=FoldProblem(c), zeta0=1.0 - math.sqrt(c) + 1e-3, p=1, q=1)
    assert b.status == FOLD
    assert len(b.folds) == 1
    # oracle: dense residual map, largest lambda with a sign change in zeta
    zs = np.linspace(0.0, 2.0, 4001)
    lam_grid = np.linspace(0.0, 1.0, 10001)
    R = FoldProblem(c).evaluate(zs[None, :], lam_grid[:, None])[0]
    has_root = np.any(np.diff(np.sign(R), axis=1) != 0, axis=1)
    lam_turn = lam_grid[np.nonzero(has_root)[0].max()]
    assert b.folds[0]["lambda"] == pytest.approx(lam_turn, abs=2e-4)
    assert b.folds[0]["zeta"] == pytest.approx(1.0, abs=1e-3)
    assert {pt.mode for pt in b.points} == {"natural", "arclength"}


def test_fold_limit():
    cfg = ContinuationConfig(max_folds=0)
    b = continue_branch(None, config=cfg, problem=FoldProblem(), zeta0=0.3, p=1, q=1)
    assert b.status == FOLD and "more than 0 folds" in b.message


def test_step_failure():
    cfg = ContinuationConfig(step_min=1e-4)
    b = continue_branch(None, config=cfg, problem=DeadEndProblem(), zeta0=1.0, p=1, q=1)
    assert b.status == STEP_FAILURE
    assert 0.29 < b.end.lam < 0.3


def test_seed_invalid(circ2):
    seed = solve_seed(circ2, 3, 1)
    bad = type(seed)(seed.p, seed.q, seed.level, seed.profile, 4, seed.relaxed, seed.ensemble)
    with pytest.raises(SeedInvalid):
        continue_branch(bad)


def test_monitor_bound(circ2, circ_branches):
    b = circ_branches[0]
    z0 = b.points[0].zeta
    assert all(monitor_bound(pt, 10 * z0).ok for pt in b.points)
    assert monitor_bound(b.points[0], 0.5 * z0).status == BOUND
    cfg = ContinuationConfig(m_user=0.5 * z0)
    short = continue_branch(solve_seed(circ2, 1, 1), config=cfg)
    assert short.status == BOUND and len(short.points) == 1


def test_monitor_trivial(circ2, circ_branches):
    for pt in circ_branches[1].points:
        assert monitor_trivial(pt, 1e-6 * circ_branches[1].points[0].zeta).ok
    zero = BranchPoint(0.5, 0.0, 0.0, 1.0, 0.0, None, None, 0.0, 0.01, 0, "natural")
    r = monitor_trivial(zero, 1e-6)
    assert r.status == TRIVIAL and not r.contradicts_prop_neighborhood
    r = monitor_trivial(zero, 1e-6, field_bounds(circ2), 5, 1)
    assert r.status == TRIVIAL and r.contradicts_prop_neighborhood


def test_distinctness(circ2, circ_branches):
    rep = distinctness_check(circ_branches)
    assert rep.all_distinct and len(rep.pairs) == 3
    assert all(pr["common_lambdas"] == len(circ_branches[0].points) for pr in rep.pairs)
    dup = distinctness_check([circ_branches[0], continue_branch(solve_seed(circ2, 1, 1))])
    assert dup.duplicates == [[0, 1]] and dup.pairs == []


def test_zero_count_breach(circ_branches):
    b = continue_branch(circ_branches[0].seed)
    b.points[3].zero_count = 4
    with pytest.raises(ZeroCountBreach):
        distinctness_check([b, circ_branches[1]])


def test_branch_files_replay(kep02, tmp_path):
    seed = solve_seed(kep02, 3, 1)
    a = continue_branch(seed)
    b = continue_branch(seed)
    a.write_jsonl(tmp_path / "a.jsonl", kep02)
    b.write_jsonl(tmp_path / "b.jsonl", kep02)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    head, pts, status = read_branch_jsonl(tmp_path / "a.jsonl")
    assert head["config_hash"] == a.config.hash() and head["seed"]["p"] == 3
    assert len(pts) == len(a.points) and status["status"] == REACHED
    assert pts[-1]["lambda"] == 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        ContinuationConfig(step_initial=0.0)
    with pytest.raises(ValueError):
        ContinuationConfig(shrink=1.5)
    assert ContinuationConfig().hash() == ContinuationConfig().hash()
    assert ContinuationConfig().hash() != ContinuationConfig(step_max=0.04).hash()
