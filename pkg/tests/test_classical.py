"""Classical containers: Hamiltonian, quadrature free energy, Metropolis."""

import math

import numpy as np
import pytest
from scipy import stats

from casimir_stability import (
    CapabilityError,
    ClassicalConfig,
    Container,
    McEstimate,
    ValidationError,
    free_energy_quadrature,
    grad_d_hamiltonian,
    hamiltonian,
    laplacian_F_estimator,
    metropolis_run,
)
from casimir_stability.classical import _shifted


def two_fixed_units(distance=1.0):
    a = Container("a", "sphere", (0, 0, 0), 0.3, fixed_charges=[(1.0, (0, 0, 0))])
    b = Container(
        "b", "sphere", (0, 0, distance), 0.3, fixed_charges=[(1.0, (0, 0, 0))]
    )
    return ClassicalConfig((a, b), 1.0, 1.0)


def tethered_toy(beta=2.0, k=5.0, q=1.0):
    a = Container(
        "a", "sphere", (0, 0, 0), 0.3, mobile_charges=[(q, ("harmonic", k, (0, 0, 0)))]
    )
    b = Container(
        "b",
        "sphere",
        (0, 0, 1.2),
        0.3,
        mobile_charges=[(-q, ("harmonic", k, (0, 0, 0)))],
    )
    return ClassicalConfig((a, b), 1.0, beta)


def test_validation():
    with pytest.raises(ValidationError):
        Container("a", "cylinder", (0, 0, 0), 1.0)
    with pytest.raises(ValidationError):
        Container("a", "sphere", (0, 0, 0), -1.0)
    a = Container("a", "sphere", (0, 0, 0), 1.0)
    b = Container("b", "sphere", (0, 0, 1.5), 1.0)
    with pytest.raises(ValidationError):
        ClassicalConfig((a, b), 1.0, 1.0)
    with pytest.raises(ValidationError):
        ClassicalConfig((a,), -1.0, 1.0)


def test_coulomb_between_unit_charges():
    cfg = two_fixed_units(1.0)
    assert hamiltonian(cfg, np.zeros((0, 3))) == pytest.approx(1.0 / (4 * math.pi))
    assert hamiltonian(two_fixed_units(2.0), np.zeros((0, 3))) == pytest.approx(
        1.0 / (8 * math.pi)
    )


def test_zero_charges_leave_only_tethers():
    a = Container(
        "a",
        "sphere",
        (0, 0, 0),
        0.5,
        mobile_charges=[(0.0, ("harmonic", 4.0, (0, 0, 0)))],
    )
    b = Container("b", "sphere", (0, 0, 2.0), 0.5, fixed_charges=[(0.0, (0, 0, 0))])
    cfg = ClassicalConfig((a, b), 1.0, 1.0)
    pos = np.array([[0.1, 0.0, 0.2]])
    assert hamiltonian(cfg, pos) == pytest.approx(0.5 * 4.0 * (0.1**2 + 0.2**2))


def test_hard_wall_is_infinite():
    cfg = tethered_toy()
    pos = np.array([[0.0, 0.0, 0.4], [0.0, 0.0, 1.2]])  # first outside
    assert hamiltonian(cfg, pos) == math.inf


def test_rigid_shift_leaves_internal_energy_unchanged():
    # moving a container with its contents changes only cross terms
    a = Container(
        "a",
        "sphere",
        (0, 0, 0),
        0.5,
        fixed_charges=[(1.0, (0.1, 0, 0))],
        mobile_charges=[(1.0, ("harmonic", 3.0, (0, 0, 0.1)))],
        include_intra=True,
    )
    b = Container("b", "sphere", (0, 0, 3.0), 0.5, fixed_charges=[(2.0, (0, 0, 0))])
    cfg = ClassicalConfig((a, b), 1.0, 1.0)
    pos = np.array([[0.05, -0.03, 0.2]])
    d = np.array([0.2, -0.1, 0.3])
    shifted = _shifted(cfg, "a", d)
    # cross term only: 1*2/(4 pi r_fb) + 1*2/(4 pi r_mb)
    def cross(config, p):
        c_a, c_b = config.containers
        out = 0.0
        for q, rel in [(1.0, np.array([0.1, 0, 0])), (1.0, None)]:
            pa = p[0] if rel is None else np.asarray(c_a.center) + rel
            r = np.linalg.norm(pa - np.asarray(c_b.center))
            out += q * 2.0 / (4 * math.pi * r)
        return out

    internal = hamiltonian(cfg, pos) - cross(cfg, pos)
    internal_shifted = hamiltonian(shifted, pos + d) - cross(shifted, pos + d)
    assert internal_shifted == pytest.approx(internal, abs=1e-14)


def test_gradient_analytic_values_and_fd():
    # opposite unit charges at separation r: |grad| = 1/(4 pi r^2), attractive
    a = Container("a", "sphere", (0, 0, 0), 0.3, fixed_charges=[(1.0, (0, 0, 0))])
    b = Container("b", "sphere", (0, 0, 2.0), 0.3, fixed_charges=[(-1.0, (0, 0, 0))])
    cfg = ClassicalConfig((a, b), 1.0, 1.0)
    g = grad_d_hamiltonian(cfg, np.zeros((0, 3)), "a")
    assert g[0] == pytest.approx(0.0, abs=1e-15)
    assert g[1] == pytest.approx(0.0, abs=1e-15)
    # attractive: energy decreases as a moves toward b, so grad_z < 0
    assert g[2] == pytest.approx(-1.0 / (4 * math.pi * 4.0))

    cfg2 = tethered_toy()
    pos = np.array([[0.05, 0.02, -0.03], [0.1, -0.04, 1.15]])
    g2 = grad_d_hamiltonian(cfg2, pos, "a")
    h = 1e-6
    for axis in range(3):
        d = np.zeros(3)
        d[axis] = h
        hp = hamiltonian(_shifted(cfg2, "a", d), pos + np.array([d, [0, 0, 0]]))
        hm = hamiltonian(_shifted(cfg2, "a", -d), pos + np.array([-d, [0, 0, 0]]))
        assert g2[axis] == pytest.approx((hp - hm) / (2 * h), abs=1e-8)


def test_free_energy_no_mobiles_is_plain_energy():
    cfg = two_fixed_units(1.0)
    assert free_energy_quadrature(cfg, (0, 0, 0)) == pytest.approx(
        1.0 / (4 * math.pi)
    )
    # displacement enters through the cross term (shift away to keep the
    # containers disjoint)
    assert free_energy_quadrature(cfg, (0, 0, -0.5)) == pytest.approx(
        1.0 / (4 * math.pi * 1.5)
    )


def test_free_energy_high_temperature_limit():
    # one free mobile, no interactions: F -> -ln(V) / beta
    a = Container("a", "sphere", (0, 0, 0), 0.5, mobile_charges=[(0.0, None)])
    b = Container("b", "sphere", (0, 0, 2.0), 0.5, fixed_charges=[(0.0, (0, 0, 0))])
    for beta in (1e-3, 1e-2):
        cfg = ClassicalConfig((a, b), 1.0, beta)
        volume = 4.0 / 3.0 * math.pi * 0.5**3
        assert free_energy_quadrature(cfg, (0, 0, 0)) == pytest.approx(
            -math.log(volume) / beta, rel=1e-9
        )


def test_free_energy_mobile_cap():
    a = Container(
        "a",
        "sphere",
        (0, 0, 0),
        0.3,
        mobile_charges=[(1.0, None), (1.0, None)],
    )
    b = Container("b", "sphere", (0, 0, 2.0), 0.3, mobile_charges=[(1.0, None)])
    cfg = ClassicalConfig((a, b), 1.0, 1.0)
    with pytest.raises(CapabilityError):
        free_energy_quadrature(cfg, (0, 0, 0))


def test_metropolis_deterministic_and_seed_dependent():
    cfg = tethered_toy()
    s1 = metropolis_run(cfg, 5000, 0.25, seed=42)
    s2 = metropolis_run(cfg, 5000, 0.25, seed=42)
    s3 = metropolis_run(cfg, 5000, 0.25, seed=43)
    assert np.array_equal(s1.positions, s2.positions)
    assert not np.array_equal(s1.positions, s3.positions)


def test_metropolis_uniform_law_in_box():
    # free particle in a box: coordinates uniform; chi-square on z-bins
    a = Container("a", "box", (0, 0, 0), (1.0, 1.0, 1.0), mobile_charges=[(0.0, None)])
    b = Container("b", "sphere", (0, 0, 3.0), 0.5, fixed_charges=[(0.0, (0, 0, 0))])
    cfg = ClassicalConfig((a, b), 1.0, 1.0)
    stream = metropolis_run(cfg, 400000, 0.3, seed=5)
    z = stream.positions[::40, 0, 2]  # thin to reduce autocorrelation
    counts, _ = np.histogram(z, bins=8, range=(-0.5, 0.5))
    assert stats.chisquare(counts).pvalue > 1e-3
    assert np.all(np.abs(stream.positions[:, 0, :]) <= 0.5)


def test_metropolis_concentrates_at_low_temperature():
    cfg = tethered_toy(beta=5e4, k=5.0)
    stream = metropolis_run(cfg, 40000, 0.01, seed=9)
    # tethered minimum near the anchor (slightly polarized by attraction)
    tail = stream.positions[-1000:, 0, :]
    assert np.linalg.norm(tail.mean(axis=0)) < 0.05
    assert tail.std() < 0.02


def test_metropolis_acceptance_warning():
    cfg = tethered_toy()
    with pytest.warns(UserWarning):
        metropolis_run(cfg, 2000, 50.0, seed=1)  # huge steps: mostly rejected


def test_estimator_frozen_charges_vanish():
    cfg = tethered_toy(beta=2.0, k=1e9)  # effectively frozen at the anchors
    stream = metropolis_run(cfg, 20000, 1e-5, seed=2)
    est = laplacian_F_estimator(cfg, "a", stream)
    assert est.mean == pytest.approx(0.0, abs=1e-8)
    assert est.mean <= 0.0


def test_estimator_nonpositive_and_seed_consistent():
    cfg = tethered_toy()
    e1 = laplacian_F_estimator(cfg, "a", metropolis_run(cfg, 150000, 0.25, seed=3))
    e2 = laplacian_F_estimator(cfg, "a", metropolis_run(cfg, 150000, 0.25, seed=4))
    assert e1.mean <= 0.0 and e2.mean <= 0.0
    assert abs(e1.mean - e2.mean) <= 3.0 * math.hypot(e1.stderr, e2.stderr)
    assert e1.n_samples == 135000
    assert e1.autocorrelation_time >= 0.5


def test_mcestimate_validation():
    with pytest.raises(ValidationError):
        McEstimate(0.0, -1.0, 10, 1.0)
