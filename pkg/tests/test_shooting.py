import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from sitnikov import (HomotopyField, count_zeros, full_from_shot, integrate_full, shoot, solve_seed,
                      verify_solution, winding_number)
from sitnikov.errors import CountMismatch, DegenerateProfile, ResidualTooLarge
from sitnikov.shooting import FullProfile, reconstruct_full, sign_changes, spectral_derivative


def _profile(fun, d1, d2, p, q, N=4096):
    t = np.linspace(0, 2 * math.pi * q, N + 1)
    return FullProfile(t, fun(t), d1(t), p, q, zddot=d2(t))


def test_trivial_shot_is_linearization(kep02):
    lam = 0.7
    s = shoot(kep02, 0.0, lam, 1, 1, rtol=1e-12, atol=1e-13)
    assert s.residual == 0.0
    fld = HomotopyField(kep02)
    sol = solve_ivp(lambda t, y: [y[1], -(fld.weight_F(t, lam) - 1.0) * y[0]], (0, math.pi / 2),
                    [1.0, 0.0], method="DOP853", rtol=1e-12, atol=1e-13)
    assert s.derivative_wrt_amplitude == pytest.approx(sol.y[0, -1], abs=1e-9)


def test_circular_residual_independent_of_lambda(circ2):
    r0 = shoot(circ2, 0.8, 0.0, 3, 1).residual
    for lam in (0.25, 0.5, 1.0):
        assert abs(shoot(circ2, 0.8, lam, 3, 1).residual - r0) <= 1e-12


def test_lambda_derivative(kep02):
    h = 1e-5
    s = shoot(kep02, 0.9, 0.4, 1, 1, rtol=1e-12, atol=1e-13)
    fd = (shoot(kep02, 0.9, 0.4 + h, 1, 1, rtol=1e-12, atol=1e-13).residual
          - shoot(kep02, 0.9, 0.4 - h, 1, 1, rtol=1e-12, atol=1e-13).residual) / (2 * h)
    assert s.derivative_wrt_lambda == pytest.approx(fd, abs=1e-6)


def test_reconstruct_cosine():
    K = 256
    t = np.linspace(0, math.pi / 2, K + 1)
    prof = reconstruct_full(t, np.cos(3 * t), -3 * np.sin(3 * t), 3, 1)
    assert np.abs(prof.z - np.cos(3 * prof.t)).max() < 1e-14
    assert np.abs(prof.zdot + 3 * np.sin(3 * prof.t)).max() < 1e-13
    assert max(prof.symmetry_residuals().values()) < 1e-14


def test_reconstruct_rejects_corruption():
    t = np.linspace(0, math.pi / 2, 257)
    z = np.cos(t)
    with pytest.raises(ResidualTooLarge):
        reconstruct_full(t, z + 1e-3, -np.sin(t), 1, 1)
    zd = -np.sin(t)
    zd[-1] *= 1.1                      # derivative no longer matches the samples
    with pytest.raises(ResidualTooLarge):
        reconstruct_full(t, z, zd, 1, 1)


def test_reflection_matches_direct_integration(kep02):
    s = solve_seed(kep02, 3, 1)
    shot = shoot(kep02, s.zeta, 0.0, 3, 1, rtol=1e-12, atol=1e-12)
    a = full_from_shot(shot)
    b = integrate_full(kep02, s.zeta, 0.0, 3, 1)
    assert np.abs(a.z - b.z).max() < 1e-8
    assert count_zeros(a, HomotopyField(kep02, 0.0).acceleration) == 6


def test_count_zeros_sines():
    prof = _profile(np.sin, np.cos, lambda t: -np.sin(t), 1, 1)
    assert count_zeros(prof) == 2
    for k, q in ((3, 1), (2, 3), (5, 2)):
        prof = _profile(lambda t: np.sin(k * t), lambda t: k * np.cos(k * t),
                        lambda t: -k * k * np.sin(k * t), k, q)
        assert winding_number(prof) == pytest.approx(2 * k * q, abs=1e-10)
        assert count_zeros(prof) == 2 * k * q


def test_count_zeros_stable_under_perturbation():
    rng = np.random.default_rng(1)
    prof = _profile(lambda t: np.cos(3 * t), lambda t: -3 * np.sin(3 * t),
                    lambda t: -9 * np.cos(3 * t), 3, 1)
    prof.z = prof.z + 1e-9 * rng.uniform(-1, 1, prof.z.shape)
    assert count_zeros(prof) == 6


def test_count_zeros_errors():
    prof = _profile(np.zeros_like, np.zeros_like, np.zeros_like, 1, 1)
    with pytest.raises(DegenerateProfile):
        count_zeros(prof)
    # wrong acceleration: the winding integral no longer matches the sign changes
    prof = _profile(np.sin, np.cos, lambda t: -9 * np.sin(t), 1, 1)
    with pytest.raises(CountMismatch):
        count_zeros(prof)


def test_sign_changes_cyclic():
    t = np.linspace(0, 2 * math.pi, 1001)
    assert sign_changes(np.cos(t)) == 2
    assert sign_changes(np.sin(5 * t) + 0.5) == 10


def test_spectral_derivative():
    t = np.linspace(0, 4 * math.pi, 513)
    assert np.abs(spectral_derivative(np.sin(3 * t / 2), 4 * math.pi) - 1.5 * np.cos(3 * t / 2)).max() < 1e-11


def test_verify_solution_paths(kep02, circ2):
    s = solve_seed(kep02, 1, 1)
    good = integrate_full(kep02, s.zeta, 0.0, 1, 1)
    rep = verify_solution(good, kep02, 0.0)
    assert rep.passed and rep.zero_count == 2 and rep.ode_residual < 1e-8

    trivial = FullProfile(good.t, np.zeros_like(good.z), np.zeros_like(good.z), 1, 1)
    rep = verify_solution(trivial, kep02, 0.0)
    assert rep.ode_residual == 0.0 and "DegenerateProfile" in rep.flags and not rep.passed

    broken = integrate_full(kep02, s.zeta * 1.01, 0.0, 1, 1)
    rep = verify_solution(broken, kep02, 0.0)
    assert not rep.passed and "SymmetryResidual" in rep.flags


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(0.0, 1.0))
def test_amplitude_derivative_property(zeta, lam):
    from sitnikov import build_kepler_pair
    ens = build_kepler_pair(0.3)
    h = 1e-5
    kw = dict(rtol=1e-12, atol=1e-13)
    s = shoot(ens, zeta, lam, 1, 1, **kw)
    fd = (shoot(ens, zeta + h, lam, 1, 1, **kw).residual
          - shoot(ens, zeta - h, lam, 1, 1, **kw).residual) / (2 * h)
    assert abs(s.derivative_wrt_amplitude - fd) <= 1e-6
