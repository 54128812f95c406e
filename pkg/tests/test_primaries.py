import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sitnikov import (CircularOrbit, PrimaryEnsemble, SymmetrySpec, TrajectoryTable,
                      build_circular_polygon, build_kepler_pair, certify_symmetry, find_symmetry,
                      ingest_trajectory, nbody_integrate, read_trajectory)
from sitnikov.errors import (CollisionDetected, EccentricityOutOfRange, InvalidTable, NotCertified,
                             NotPeriodic, OriginCrossing)
from sitnikov.primaries import PERIOD, circular_polygon_radius, kepler_eccentric_anomaly


def _accelerations(ens, t):
    """Newtonian accelerations (G = 1) of the primaries at time t."""
    q = np.stack([o.position(np.array([t]))[0] for o in ens.orbits])
    acc = np.zeros_like(q)
    for i in range(ens.n):
        for j in range(ens.n):
            if i != j:
                d = q[j] - q[i]
                acc[i] += ens.masses[j] * d / np.linalg.norm(d) ** 3
    return q, acc


def _second_derivative(orbit, t, h=1e-3):
    f = lambda s: orbit.position(np.array([s]))[0]
    return (-f(t + 2 * h) + 16 * f(t + h) - 30 * f(t) + 16 * f(t - h) - f(t - 2 * h)) / (12 * h * h)


def test_two_body_radius_and_constants(circ2):
    a = 2.0 ** (-5.0 / 3.0)
    assert circular_polygon_radius(2) == pytest.approx(a, rel=1e-15)
    assert circ2.constants.beta == pytest.approx(32.0, rel=1e-12)
    assert circ2.constants.alpha == pytest.approx(32.0, rel=1e-12)
    assert circ2.certificate.passed


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_polygon_force_balance(n):
    ens = build_circular_polygon(n)
    for t in (0.0, 0.4, 1.3):
        q, acc = _accelerations(ens, t)
        # rigid rotation with angular velocity 2: q'' = -4 q
        assert np.abs(acc + 4.0 * q).max() < 1e-10


def test_triangle_beta(circ3):
    a = circular_polygon_radius(3)
    assert circ3.constants.beta == pytest.approx(3 * (1 / 3) / a ** 3, rel=1e-12)


def test_kepler_constants_e05(kep05):
    c = kep05.constants
    assert c.beta == pytest.approx(32.0 / 1.5 ** 3, rel=1e-10)
    assert c.alpha == pytest.approx(256.0, rel=1e-9)
    t = np.linspace(0.0, PERIOD, 200001)
    r = kep05.orbits[0].radius(t)
    assert c.beta_j[0] == pytest.approx(r.max(), rel=1e-9)
    assert c.alpha_j[0] == pytest.approx(r.min(), rel=1e-9)


def test_kepler_equation():
    E = kepler_eccentric_anomaly(1.0, 0.5)
    assert E == pytest.approx(1.4987, abs=1e-4)
    assert abs(E - 0.5 * math.sin(E) - 1.0) < 1e-12


def test_kepler_two_body_equation(kep02):
    # relative vector r = q1 - q2 obeys r'' = -(m1 + m2) r / |r|^3
    o1, o2 = kep02.orbits
    for t in (0.1, 0.77, 2.0):
        r = o1.position(np.array([t]))[0] - o2.position(np.array([t]))[0]
        rdd = _second_derivative(o1, t) - _second_derivative(o2, t)
        assert np.abs(rdd + r / np.linalg.norm(r) ** 3).max() < 1e-7


def test_kepler_zero_eccentricity_is_circle(circ2):
    k = build_kepler_pair(0.0)
    t = np.linspace(0, PERIOD, 50)
    for ok, oc in zip(k.orbits, circ2.orbits):
        assert np.abs(ok.position(t) - oc.position(t)).max() < 1e-14
    assert k.constants.beta == pytest.approx(circ2.constants.beta, rel=1e-12)


def test_kepler_eccentricity_range():
    with pytest.raises(EccentricityOutOfRange):
        build_kepler_pair(1.0)
    with pytest.raises(EccentricityOutOfRange):
        build_kepler_pair(-0.1)


def test_certificate_tightness():
    for n in (2, 3, 6):
        c = build_circular_polygon(n).certificate
        assert max(c.max_rotation_residual, c.max_reversal_residual, c.max_mass_residual) <= 1e-12
    c = build_kepler_pair(0.7).certificate
    assert c.max_reversal_residual <= 1e-10


class _Noisy(CircularOrbit):
    def position(self, t):
        q = super().position(t)
        rng = np.random.default_rng(0)
        return q + 1e-6 * rng.uniform(-1, 1, q.shape) / math.sqrt(2)


def test_noise_shows_in_rotation_residual(circ3):
    orbits = list(circ3.orbits)
    o = orbits[0]
    orbits[0] = _Noisy(o.mass, o.radius0, o.omega, o.phase)
    cert = certify_symmetry(orbits, circ3.symmetry)
    assert 2e-7 < cert.max_rotation_residual < 2e-6


def test_find_symmetry_square():
    ens = build_circular_polygon(4)
    spec = find_symmetry(ens.orbits, 2)
    assert spec is not None
    assert spec.zeta1 == (2, 3, 0, 1)
    assert certify_symmetry(ens.orbits, spec).passed


def test_symmetry_spec_validation():
    with pytest.raises(InvalidTable):
        SymmetrySpec(2, (0, 0), (0, 1))
    with pytest.raises(InvalidTable):
        SymmetrySpec(2, (1, 2, 0), (0, 1, 2))          # order 3 does not divide 2
    with pytest.raises(InvalidTable):
        SymmetrySpec(3, (1, 2, 0), (1, 2, 0))          # zeta2 not an involution
    with pytest.raises(InvalidTable):
        SymmetrySpec(2, (1, 0), (0, 1), ((1, 1), (0, 1)))


def test_symmetry_json_round_trip():
    spec = SymmetrySpec(2, (2, 3, 0, 1), (0, 3, 2, 1))
    data = spec.to_json([0.25] * 4)
    assert data["zeta1"] == [3, 4, 1, 2]
    assert SymmetrySpec.from_json(json.loads(json.dumps(data))) == spec


def test_create_refuses_uncertified(circ2):
    o1, o2 = circ2.orbits
    bad = [CircularOrbit(0.6, o1.radius0, o1.omega, o1.phase), o2]
    with pytest.raises(NotCertified) as info:
        PrimaryEnsemble.create(bad, circ2.symmetry)
    assert info.value.certificate.max_mass_residual == pytest.approx(0.1)


def test_ingest_round_trip_circular(circ2, tmp_path):
    table = circ2.to_table(256)
    table.write(tmp_path / "c.csv", tmp_path / "c.json", circ2.symmetry)
    t2, spec = read_trajectory(tmp_path / "c.csv", tmp_path / "c.json")
    ens = ingest_trajectory(t2, spec)
    assert ens.constants.beta == pytest.approx(32.0, abs=1e-8)
    assert ens.constants.alpha == pytest.approx(32.0, abs=1e-8)


def test_ingest_kepler_constants():
    k = build_kepler_pair(0.3)
    ens = ingest_trajectory(k.to_table(512), k.symmetry)
    assert ens.constants.beta == pytest.approx(k.constants.beta, rel=1e-8)
    assert ens.constants.alpha == pytest.approx(k.constants.alpha, rel=1e-8)
    t = np.linspace(0, PERIOD, 333)
    assert np.abs(ens.radii(t) - k.radii(t)).max() < 1e-9


def test_ingest_square_d2_table():
    # four equal masses on a rotating square with the D2 action (1 3)(2 4)
    sq = build_circular_polygon(4)
    spec = SymmetrySpec(2, (2, 3, 0, 1), (0, 3, 2, 1))
    ens = ingest_trajectory(sq.to_table(256), spec)
    assert ens.certificate.passed


def test_ingest_mass_perturbation_fails(circ2):
    table = circ2.to_table(128)
    bad = TrajectoryTable(table.times, table.positions, table.masses * np.array([1.01, 1.0]))
    with pytest.raises(NotCertified):
        ingest_trajectory(bad, circ2.symmetry)


def test_ingest_closure_and_origin(circ2):
    table = circ2.to_table(128)
    pos = table.positions.copy()
    pos[-1] += 1e-3
    with pytest.raises(NotPeriodic):
        ingest_trajectory(TrajectoryTable(table.times, pos, table.masses), circ2.symmetry)
    pos = table.positions.copy()
    pos[:, 0, :] *= 0.0
    pos[:, 0, 0] = 1e-12
    with pytest.raises(OriginCrossing):
        ingest_trajectory(TrajectoryTable(table.times, pos, table.masses), circ2.symmetry)


def test_read_trajectory_malformed(tmp_path):
    (tmp_path / "s.json").write_text(json.dumps({"masses": [0.5, 0.5], "d": 2, "zeta1": [2, 1],
                                                 "zeta2": [1, 2]}))
    (tmp_path / "a.csv").write_text("t,x1,y1,x2\n0,1,2,3\n")
    with pytest.raises(InvalidTable):
        read_trajectory(tmp_path / "a.csv", tmp_path / "s.json")
    (tmp_path / "b.csv").write_text("t,x1,y1,x2,y2\n0,1,2,oops,3\n")
    with pytest.raises(InvalidTable):
        read_trajectory(tmp_path / "b.csv", tmp_path / "s.json")
    with pytest.raises(InvalidTable):
        read_trajectory(tmp_path / "missing.csv", tmp_path / "s.json")


def _circular_ic(ens):
    q0 = np.stack([o.position(np.array([0.0]))[0] for o in ens.orbits])
    v0 = np.stack([2.0 * np.array([-q[1], q[0]]) for q in q0])
    return q0, v0


def test_nbody_circular_closure(circ2):
    q0, v0 = _circular_ic(circ2)
    table = nbody_integrate(circ2.masses, q0, v0)
    assert table.closure_residual <= 1e-9
    assert table.energy_drift <= 1e-9
    exact = np.stack([o.position(table.times) for o in circ2.orbits], axis=1)
    assert np.abs(table.positions - exact).max() < 1e-9


def test_nbody_conserves_momentum_and_com(circ3):
    q0, v0 = _circular_ic(circ3)
    v0 = v0 * 0.9
    table = nbody_integrate(circ3.masses, q0, v0)
    com = np.einsum("j,kjc->kc", circ3.masses, table.positions)
    assert np.abs(com).max() < 1e-9


def test_nbody_collision():
    with pytest.raises(CollisionDetected):
        nbody_integrate([0.5, 0.5], [[0.3, 0.0], [-0.3, 0.0]], [[0, 0], [0, 0]])


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.9))
def test_weight_sum_between_radial_constants(e):
    ens = build_kepler_pair(e)
    t = np.linspace(0, PERIOD, 1001)
    r = ens.radii(t)
    s = (ens.masses[:, None] / r ** 3).sum(0)
    c = ens.constants
    assert np.all(s >= c.beta * (1 - 1e-9)) and np.all(s <= c.alpha * (1 + 1e-9))
    a = 2.0 ** (-5.0 / 3.0)
    assert np.all(r >= a * (1 - e) * (1 - 1e-12)) and np.all(r <= a * (1 + e) * (1 + 1e-12))
