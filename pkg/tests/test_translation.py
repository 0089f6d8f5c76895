"""Translation matrices validated against independent field evaluations.

The oracles here never use the coefficient formulas under test: scalar
coefficients are checked against the closed-form medium Green's function,
and vector coefficients against direct numerical evaluation of the
multipole fields on scattered points.
"""

import math

import numpy as np
import pytest
from scipy.special import sph_harm_y

from casimir_stability import (
    GeometryError,
    Medium,
    ToleranceError,
    momentum_space_G,
    translation_gradient,
    translation_matrix,
)
from casimir_stability.specfun import mod_sph_bessel_i, mod_sph_bessel_k
from casimir_stability.translation import (
    _real_basis,
    real_sph_harm,
    scalar_translation_matrix,
    sector_indices,
    sector_size,
)

MED = Medium()


# --- independent multipole-field evaluators (oracle, complex basis) -------


def _radial(kind, l, z):
    f = mod_sph_bessel_i if kind == "i" else mod_sph_bessel_k
    out = f(l, z)
    return out[0], out[1]


def _y(l, m, th, ph):
    if abs(m) > l:
        return np.zeros_like(np.asarray(th, dtype=complex))
    return sph_harm_y(l, m, th, ph)


def _angles(x):
    x = np.asarray(x, float)
    r = np.linalg.norm(x, axis=-1)
    th = np.arccos(np.clip(x[..., 2] / r, -1, 1))
    ph = np.arctan2(x[..., 1], x[..., 0])
    return r, th, ph


def _x_lm(l, m, th, ph):
    # X = L Y / sqrt(l(l+1)) via ladder operators, cartesian components
    lp = math.sqrt(max(l * (l + 1) - m * (m + 1), 0.0)) * _y(l, m + 1, th, ph)
    lm = math.sqrt(max(l * (l + 1) - m * (m - 1), 0.0)) * _y(l, m - 1, th, ph)
    lz = m * _y(l, m, th, ph)
    fac = 1.0 / math.sqrt(l * (l + 1))
    return np.stack([(lp + lm) / 2.0, (lp - lm) / 2.0j, lz], axis=-1) * fac


def _psi_lm(l, m, th, ph):
    y = _y(l, m, th, ph)
    dth = m * (np.cos(th) / np.sin(th)) * y + math.sqrt(
        max((l - m) * (l + m + 1), 0.0)
    ) * np.exp(-1j * ph) * _y(l, m + 1, th, ph)
    dph_over_sin = 1j * m * y / np.sin(th)
    that = np.stack(
        [np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1
    )
    phat = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=-1)
    fac = 1.0 / math.sqrt(l * (l + 1))
    return (dth[..., None] * that + dph_over_sin[..., None] * phat) * fac


def _m_wave(kind, l, m, kap, x, center=None):
    x = np.asarray(x, float)
    if center is not None:
        x = x - np.asarray(center, float)
    r, th, ph = _angles(x)
    fv = np.vectorize(lambda rr: _radial(kind, l, kap * rr)[0])(r)
    return fv[..., None] * _x_lm(l, m, th, ph)


def _n_wave(kind, l, m, kap, x, center=None):
    x = np.asarray(x, float)
    if center is not None:
        x = x - np.asarray(center, float)
    r, th, ph = _angles(x)
    z = kap * r
    fv = np.vectorize(lambda zz: _radial(kind, l, zz)[0])(z)
    fd = np.vectorize(lambda zz: _radial(kind, l, zz)[1])(z)
    rhat = x / r[..., None]
    rad = math.sqrt(l * (l + 1)) * (fv / z) * _y(l, m, th, ph)
    return rad[..., None] * rhat + ((fv + z * fd) / z)[..., None] * _psi_lm(
        l, m, th, ph
    )


def _real_basis_field(kind, l, mu, kap, pts, center, sector):
    # electric sector: N-type wave on R_{l mu}; magnetic sector: i * M-type
    # wave on R_{l,-mu} (the conventions that make the matrix real)
    if sector == "E":
        coef = _real_basis(l)[l + mu]
        wave = _n_wave
        phase = 1.0
    else:
        coef = _real_basis(l)[l - mu]
        wave = _m_wave
        phase = 1j
    f = sum(
        coef[l + m] * wave(kind, l, m, kap, pts, center=center)
        for m in range(-l, l + 1)
    )
    return phase * f


# --- tests ----------------------------------------------------------------


def test_scalar_contraction_reproduces_greens_function(rng):
    kap = 1.3
    d = np.array([0.9, -0.6, 1.4])
    l_max = 14
    x_mat = scalar_translation_matrix(MED, kap, d, l_max).dense()
    idx = sector_indices(l_max, l_min=0)
    worst = 0.0
    for _ in range(10):
        x = 0.1 * rng.standard_normal(3)
        xp = d + 0.1 * rng.standard_normal(3)
        u = np.linalg.norm(x - xp)
        exact = math.exp(-kap * u) / (4 * math.pi * u)
        rpd, thp, php = _angles(xp - d)
        rx, thx, phx = _angles(x)
        vout = np.array(
            [
                mod_sph_bessel_i(l, kap * rpd)[0] * real_sph_harm(l, m, thp, php)
                for (l, m) in idx
            ]
        )
        vreg = np.array(
            [
                mod_sph_bessel_i(l, kap * rx)[0] * real_sph_harm(l, m, thx, phx)
                for (l, m) in idx
            ]
        )
        approx = kap * vout @ x_mat @ vreg
        worst = max(worst, abs(approx - exact) / abs(exact))
    assert worst < 1e-9


def test_vector_matrix_expands_outgoing_waves(rng):
    kap = 1.3
    d = np.array([0.7, -0.5, 1.2])
    l_max = 8
    x_mat = translation_matrix(MED, kap, d, l_max).dense()
    nb = sector_size(l_max)
    vidx = [("E",) + t for t in sector_indices(l_max)] + [
        ("M",) + t for t in sector_indices(l_max)
    ]
    pts = 0.1 * rng.standard_normal((5, 3))
    # low-l rows: the column truncation error at fixed l_max grows with the
    # row order, so high-l rows test truncation rather than coefficients
    for row in [0, 2, 5, nb, nb + 4, nb + 10]:
        sec, l, mu = vidx[row]
        exact = _real_basis_field("k", l, mu, kap, pts, d, sec)
        approx = np.zeros_like(exact)
        for col in range(2 * nb):
            c = x_mat[row, col]
            if c == 0.0:
                continue
            sec_c, lc, mc = vidx[col]
            approx = approx + c * _real_basis_field("i", lc, mc, kap, pts, None, sec_c)
        err = np.abs(approx - exact).max() / np.abs(exact).max()
        # residual is multipole truncation (decays geometrically with l_max);
        # a wrong coefficient would show up at the percent level or worse
        assert err < 1e-4


def test_matrix_is_real_and_finite(rng):
    x = translation_matrix(MED, 0.9, rng.standard_normal(3) * 2.0 + 4.0, 5)
    dense = x.scaled
    assert dense.dtype == np.float64
    assert np.all(np.isfinite(dense))
    assert np.all(np.isfinite(x.exponent))


def test_axial_displacement_is_m_diagonal():
    l_max = 3
    x = translation_matrix(MED, 1.3, np.array([0.0, 0.0, 1.7]), l_max).dense()
    vidx = [("E",) + t for t in sector_indices(l_max)] + [
        ("M",) + t for t in sector_indices(l_max)
    ]
    for i, (_, _, mi) in enumerate(vidx):
        for j, (_, _, mj) in enumerate(vidx):
            if mi != mj:
                assert x[i, j] == 0.0


def test_reciprocity_transpose_image():
    l_max = 3
    d = np.array([0.7, -0.5, 1.2])
    xp = translation_matrix(MED, 1.3, d, l_max).dense()
    xm = translation_matrix(MED, 1.3, -d, l_max).dense()
    nb = sector_size(l_max)
    d_sign = np.ones(2 * nb)
    d_sign[nb:] = -1.0
    image = d_sign[:, None] * xp.T * d_sign[None, :]
    assert np.abs(image - xm).max() < 1e-12 * np.abs(xp).max()


def test_scaling_with_refractive_index():
    # X depends on the medium only through n kappa: a medium with n = 2 at
    # kappa matches vacuum at 2 kappa
    from casimir_stability import DispersionModel

    dense_medium = Medium(eps_model=DispersionModel.constant(4.0))
    d = np.array([0.4, 0.1, 1.0])
    a = translation_matrix(dense_medium, 0.7, d, 3).dense()
    b = translation_matrix(MED, 1.4, d, 3).dense()
    assert a == pytest.approx(b, rel=1e-12)


def test_zero_displacement_rejected():
    with pytest.raises(GeometryError):
        translation_matrix(MED, 1.0, np.zeros(3), 3)


def test_gradient_matches_directional_difference():
    kap = 1.1
    d = np.array([0.5, -0.3, 1.4])
    l_max = 3
    h = 1e-3
    grads = translation_gradient(MED, kap, d, l_max, h, richardson=True)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1e-5
        fd = (
            translation_matrix(MED, kap, d + e, l_max).dense()
            - translation_matrix(MED, kap, d - e, l_max).dense()
        ) / (2e-5)
        g = grads[axis].dense()
        assert np.abs(g - fd).max() < 1e-6 * max(np.abs(fd).max(), 1.0)


def test_gradient_step_validation():
    d = np.array([0.0, 0.0, 1.0])
    with pytest.raises(ToleranceError):
        translation_gradient(MED, 1.0, d, 2, 0.5)
    with pytest.raises(ToleranceError):
        translation_gradient(MED, 1.0, d, 2, 1e-12)


def test_momentum_space_G_psd(rng):
    for _ in range(50):
        kappa = float(10.0 ** rng.uniform(-2, 2))
        k = rng.standard_normal(3) * 10.0 ** rng.uniform(-1, 1)
        g = momentum_space_G(MED, kappa, k)
        assert np.allclose(g, g.T)
        assert np.linalg.eigvalsh(g).min() >= 0.0


def test_momentum_space_G_value_at_zero_k():
    g = momentum_space_G(MED, 2.0, np.zeros(3))
    assert g == pytest.approx(np.eye(3) / 4.0)
