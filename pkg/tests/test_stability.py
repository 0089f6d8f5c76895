"""Forces, Laplacians, the trace decomposition, and equilibrium search."""

import numpy as np
import pytest

from casimir_stability import (
    Configuration,
    Medium,
    ToleranceError,
    ValidationError,
    find_axial_equilibrium,
    force,
    laplacian_decomposition,
    laplacian_fd,
    stability_report,
)
from conftest import dielectric_sphere, pec_pair, pec_sphere

L_MAX = 6
NODES = 24


def test_force_points_toward_partner():
    cfg = pec_pair(4.0)
    f = force(cfg, "a", l_max=L_MAX, n_nodes=NODES)
    assert f[2] > 0.0
    assert abs(f[0]) < 1e-10 * f[2]
    assert abs(f[1]) < 1e-10 * f[2]
    f_b = force(cfg, "b", l_max=L_MAX, n_nodes=NODES)
    assert f_b[2] == pytest.approx(-f[2], rel=1e-6)


def test_force_matches_energy_slope():
    from casimir_stability import energy_T0
    from casimir_stability.stability import _with_displacement

    cfg = pec_pair(5.0)
    f = force(cfg, "a", l_max=5, n_nodes=32)
    h = 0.02
    ep = energy_T0(_with_displacement(cfg, "a", 2, +h), tol=1e-9, l_max=5).value
    em = energy_T0(_with_displacement(cfg, "a", 2, -h), tol=1e-9, l_max=5).value
    assert f[2] == pytest.approx(-(ep - em) / (2 * h), rel=1e-3)


def test_unknown_label_rejected():
    cfg = pec_pair(4.0)
    with pytest.raises(ValidationError):
        force(cfg, "missing", l_max=3, n_nodes=8)


def test_step_validation():
    cfg = pec_pair(4.0)
    with pytest.raises(ToleranceError):
        laplacian_fd(cfg, "a", h=1.5, l_max=3, n_nodes=8)


def test_laplacian_negative_for_same_class_pair():
    lap = laplacian_fd(pec_pair(3.0), "a", l_max=L_MAX, n_nodes=NODES)
    assert lap < 0.0


def test_decomposition_matches_fd_two_body():
    cfg = pec_pair(3.0)
    lap = laplacian_fd(cfg, "a", l_max=L_MAX, n_nodes=NODES)
    t1, t2, t3 = laplacian_decomposition(cfg, "a", l_max=L_MAX, n_nodes=NODES)
    assert t1 + t2 + t3 == pytest.approx(lap, rel=1e-4)
    # stored terms carry the physical (negative) prefactor; the square-of-
    # symmetric-matrix positivity statement applies to -term3
    assert -t3 >= -1e-12 * abs(lap)
    assert np.sign(t1) == np.sign(t2)


def test_decomposition_matches_fd_three_body_schur():
    a = pec_sphere((0, 0, 0), 1.0, "a")
    b = pec_sphere((0, 0, 3.0), 1.0, "b")
    c = pec_sphere((4.0, 0, 0), 0.5, "c")
    cfg = Configuration((a, b, c), Medium(), 0.0)
    lap = laplacian_fd(cfg, "a", l_max=5, n_nodes=20)
    t1, t2, t3 = laplacian_decomposition(cfg, "a", l_max=5, n_nodes=20)
    assert t1 + t2 + t3 == pytest.approx(lap, rel=1e-4)


def test_laplacian_rotation_invariance():
    from scipy.spatial.transform import Rotation

    rot = Rotation.from_rotvec([0.4, 0.9, -0.2]).as_matrix()
    centers = [np.zeros(3), np.array([0, 0, 3.0]), np.array([4.0, 0, 0])]
    radii = [1.0, 1.0, 0.5]
    objs = tuple(
        pec_sphere(c, r, lbl) for c, r, lbl in zip(centers, radii, "abc")
    )
    objs_rot = tuple(
        pec_sphere(rot @ c, r, lbl) for c, r, lbl in zip(centers, radii, "abc")
    )
    lap = laplacian_fd(Configuration(objs, Medium(), 0.0), "a", l_max=5, n_nodes=24)
    lap_rot = laplacian_fd(
        Configuration(objs_rot, Medium(), 0.0), "a", l_max=5, n_nodes=24
    )
    assert lap_rot == pytest.approx(lap, rel=1e-6)


def test_report_fields_and_sign_prediction():
    rep = stability_report(pec_pair(3.0), "a", l_max=5, n_nodes=20)
    assert rep.object_label == "a"
    assert rep.laplacian < 0
    assert rep.predicted_sign_product == +1
    assert rep.h_used > 0
    assert rep.est_error >= 0
    assert rep.est_error < 1e-3 * abs(rep.laplacian)
    # opposite classes: eps < medium inside a dense medium partner
    from casimir_stability import DispersionModel

    med = Medium(eps_model=DispersionModel.constant(2.0))
    hi = dielectric_sphere((0, 0, 0), 1.0, 5.0, "a")
    lo = dielectric_sphere((0, 0, 4.0), 1.0, 1.2, "b")
    rep2 = stability_report(Configuration((hi, lo), med, 0.0), "a", l_max=4, n_nodes=16)
    assert rep2.predicted_sign_product == -1


def test_equilibrium_between_identical_spheres():
    # middle sphere between two identical partners: force vanishes midway
    a = pec_sphere((0, 0, -4.0), 1.0, "left")
    b = pec_sphere((0, 0, 0.6), 0.5, "mid")
    c = pec_sphere((0, 0, 4.0), 1.0, "right")
    cfg = Configuration((a, b, c), Medium(), 0.0)
    res = find_axial_equilibrium(
        cfg, "mid", 2, (-1.2, 0.4), tol=1e-4, l_max=4, n_nodes=16
    )
    assert res.found
    assert res.position == pytest.approx(0.0, abs=1e-3)
    # saddle or maximum along the line but unstable overall: laplacian <= 0
    assert res.report.laplacian < 0


def test_no_equilibrium_reported_for_plain_pair():
    cfg = pec_pair(5.0)
    res = find_axial_equilibrium(
        cfg, "a", 2, (-0.5, 0.5), tol=1e-3, l_max=3, n_nodes=12
    )
    assert not res.found
    assert res.position is None
    assert res.report is None
