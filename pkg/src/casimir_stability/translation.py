"""Multipole translation matrices for a uniform medium at imaginary frequency.

A translation matrix converts outgoing vector multipole waves centered at a
point ``d`` into regular waves about the origin (valid for |x| < |d|).  These
matrices carry all of the geometry dependence of the scattering formulation
of the interaction energy; the material response of individual objects lives
in the T-matrices of the scattering module.

Basis
-----
Waves are labeled by (P, l, m) with polarization P in {"E", "M"},
l = 1..l_max and m = -l..l.  The angular dependence uses real spherical
harmonics R_lm (see :func:`real_sph_harm`).  Two further conventions make
every matrix entry real at imaginary wavenumber and keep axial displacements
block-diagonal in m:

* the magnetic-sector basis wave carries a relative factor i with respect to
  the curl relation that generates it from the electric sector;
* the magnetic-sector label m refers to the real harmonic R_{l,-m}.

Scaling
-------
Entries grow like k_lambda(n kappa |d|) ~ (lambda/x)^lambda at small
argument and would overflow float64 well inside the physically relevant
range, so a :class:`TranslationMatrix` stores ``scaled`` values together
with a per-entry natural-log ``exponent``; the true entry is
``scaled * exp(exponent)``.  :meth:`TranslationMatrix.dense` materializes
plain floats when they are representable.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .errors import GeometryError, ToleranceError
from .specfun import log_bessel_k_array, wigner3j

__all__ = [
    "TranslationMatrix",
    "translation_matrix",
    "translation_gradient",
    "scalar_translation_matrix",
    "momentum_space_G",
    "real_sph_harm",
]


def real_sph_harm(l, m, theta, phi):
    """Real spherical harmonic R_lm used as the angular basis.

    R_l0 = Y_l0; for m > 0, R_lm = sqrt(2) (-1)^m Re Y_lm; for m < 0,
    R_lm = sqrt(2) (-1)^m Im Y_{l|m|}.  Orthonormal on the unit sphere.
    """
    if m == 0:
        return np.real(sph_harm_y(l, 0, theta, phi))
    y = sph_harm_y(l, abs(m), theta, phi)
    s = math.sqrt(2.0) * (-1) ** abs(m)
    return s * (np.real(y) if m > 0 else np.imag(y))


def momentum_space_G(medium, kappa, k):
    """Medium Green's function in momentum space, a 3x3 PSD matrix.

    mu_M (I + k k^T / (n^2 kappa^2)) / (k^2 + n^2 kappa^2), evaluated at
    imaginary frequency where it is real and positive semidefinite.
    """
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    k = np.asarray(k, float)
    n2k2 = (medium.refractive_index(kappa) * kappa) ** 2
    mu_m = medium.mu(kappa)
    return mu_m * (np.eye(3) + np.outer(k, k) / n2k2) / (k @ k + n2k2)


# ---------------------------------------------------------------------------
# Index bookkeeping and basis change


def sector_indices(l_max, l_min=1):
    """(l, m) pairs in storage order for one polarization sector."""
    return [(l, m) for l in range(l_min, l_max + 1) for m in range(-l, l + 1)]


def sector_size(l_max, l_min=1):
    return (l_max + 1) ** 2 - l_min**2


@lru_cache(maxsize=None)
def _real_basis(l):
    """Unitary U with R_{l mu} = sum_m U[mu, m] Y_lm (indices offset by l)."""
    n = 2 * l + 1
    u = np.zeros((n, n), complex)
    u[l, l] = 1.0
    rt = 1.0 / math.sqrt(2.0)
    for s in range(1, l + 1):
        u[l + s, l + s] = (-1) ** s * rt
        u[l + s, l - s] = rt
        u[l - s, l - s] = 1j * rt
        u[l - s, l + s] = -1j * (-1) ** s * rt
    return u


# ---------------------------------------------------------------------------
# kappa- and direction-independent coefficient tables

# The addition theorem at imaginary wavenumber reads, in the complex basis,
#   out_{lm}(x - d) = sum_{l'm'} S_{(lm)(l'm')} reg_{l'm'}(x),  |x| < |d|,
# with every coefficient a finite sum over lambda of
#   t_lambda = 4 pi (-1)^(l+m) sqrt((2l+1)(2l'+1)(2lam+1)/4pi)
#              * (l l' lam; 0 0 0) * (l l' lam; m -m' m'-m)
#              * k_lam(n kappa |d|) * Y_{lam, m-m'}(dhat).
# Scalar waves use t_lambda itself (lambda of the same parity as l+l').
# Vector waves mix polarizations:
#   same polarization: weight [l(l+1)+l'(l'+1)-lam(lam+1)] / (2 sqrt(..))
#       on even-parity lambda;
#   cross polarization: weight -sqrt((lam^2-(l-l')^2)((l+l'+1)^2-lam^2))
#       / (2 sqrt(..)) on odd-parity lambda, with the (l l' lam; 0 0 0)
#       symbol evaluated at lambda - 1.
# Both closed forms are certified against direct numerical projection of the
# translated waves (see the unit tests).


def _lambda_terms(l, lp, m, mp, kind):
    """List of (lam, coeff) for one matrix entry; coeff excludes k and Y."""
    root = math.sqrt((2 * l + 1) * (2 * lp + 1) / (4.0 * math.pi))
    phase = 4.0 * math.pi * (-1) ** (l + m)
    mu = m - mp
    out = []
    parity = (l + lp) % 2 if kind != "cross" else (l + lp + 1) % 2
    for lam in range(abs(l - lp), l + lp + 2):
        if lam % 2 != parity or lam > l + lp + (1 if kind == "cross" else 0):
            continue
        if abs(mu) > lam:
            continue
        if kind == "cross":
            if lam < 1 or not (abs(l - lp) <= lam - 1 <= l + lp):
                continue
            w0 = wigner3j(l, lp, lam - 1, 0, 0, 0)
        else:
            w0 = wigner3j(l, lp, lam, 0, 0, 0)
        if w0 == 0.0:
            continue
        wm = wigner3j(l, lp, lam, m, -mp, -mu)
        if wm == 0.0:
            continue
        coeff = phase * root * math.sqrt(2 * lam + 1) * w0 * wm
        if kind == "same":
            coeff *= (l * (l + 1) + lp * (lp + 1) - lam * (lam + 1)) / (
                2.0 * math.sqrt(l * (l + 1) * lp * (lp + 1))
            )
        elif kind == "cross":
            under = (lam**2 - (l - lp) ** 2) * ((l + lp + 1) ** 2 - lam**2)
            coeff *= -math.sqrt(under) / (
                2.0 * math.sqrt(l * (l + 1) * lp * (lp + 1))
            )
        out.append((lam, coeff))
    return out


@lru_cache(maxsize=8)
def _coeff_tables(l_max, spin):
    """Per-(l, l') arrays: lambda indices, mu indices and stacked coefficients.

    Returns dict[(l, lp)] -> (lams, mus, C) with C of shape
    (n_kinds, (2l+1)(2lp+1), n_lams); kinds are (same,) for scalar and
    (same, cross) for vector.
    """
    l_min = 0 if spin == "scalar" else 1
    kinds = ("scalar",) if spin == "scalar" else ("same", "cross")
    tables = {}
    for l in range(l_min, l_max + 1):
        for lp in range(l_min, l_max + 1):
            lams = sorted(
                {
                    lam
                    for kind in kinds
                    for m in range(-l, l + 1)
                    for mp in range(-lp, lp + 1)
                    for lam, _ in _lambda_terms(l, lp, m, mp, kind)
                }
            )
            pos = {lam: j for j, lam in enumerate(lams)}
            n_pairs = (2 * l + 1) * (2 * lp + 1)
            c = np.zeros((len(kinds), n_pairs, len(lams)))
            mus = np.zeros(n_pairs, int)
            p = 0
            for m in range(-l, l + 1):
                for mp in range(-lp, lp + 1):
                    mus[p] = m - mp
                    for ik, kind in enumerate(kinds):
                        for lam, coeff in _lambda_terms(l, lp, m, mp, kind):
                            c[ik, p, pos[lam]] = coeff
                    p += 1
            tables[(l, lp)] = (np.asarray(lams, int), mus, c)
    return tables


# ---------------------------------------------------------------------------
# Matrix construction


@dataclass(frozen=True)
class TranslationMatrix:
    """Outgoing-to-regular wave conversion across a displacement.

    True entries equal ``scaled * exp(exponent)``; the split keeps small-
    wavenumber matrices representable.  ``spin`` is "vector" (two
    polarization sectors, electric first) or "scalar".
    """

    kappa: float
    displacement: np.ndarray
    l_max: int
    scaled: np.ndarray
    exponent: np.ndarray
    spin: str = "vector"

    @property
    def dim(self):
        return self.scaled.shape[0]

    def dense(self):
        """Plain float entries (overflows to inf outside float64 range)."""
        with np.errstate(over="ignore"):
            return self.scaled * np.exp(self.exponent)

    def signed_log(self):
        """(sign, log|entry|) arrays; log of a zero entry is -inf."""
        with np.errstate(divide="ignore"):
            return np.sign(self.scaled), np.log(np.abs(self.scaled)) + self.exponent


def _direction(d):
    d = np.asarray(d, float)
    c = float(np.linalg.norm(d))
    if c == 0.0:
        raise GeometryError("translation displacement must be nonzero")
    theta = math.acos(max(-1.0, min(1.0, d[2] / c)))
    phi = math.atan2(d[1], d[0])
    return d, c, theta, phi


def _harmonic_table(l_top, theta, phi):
    """Yc[lam, l_top + mu] = Y_{lam, mu}(theta, phi), zero outside |mu|<=lam."""
    yc = np.zeros((l_top + 1, 2 * l_top + 1), complex)
    for lam in range(l_top + 1):
        mus = np.arange(-lam, lam + 1)
        yc[lam, l_top + mus] = sph_harm_y(lam, mus, theta, phi)
    return yc


def _build(medium, kappa, d, l_max, spin):
    d, c, theta, phi = _direction(d)
    if kappa <= 0.0:
        raise ValueError("kappa must be positive")
    x = medium.refractive_index(kappa) * kappa * c
    l_top = 2 * l_max + (1 if spin == "vector" else 0)
    logk = log_bessel_k_array(l_top, x)
    yc = _harmonic_table(l_top, theta, phi)
    tables = _coeff_tables(l_max, spin)

    l_min = 0 if spin == "scalar" else 1
    nb = sector_size(l_max, l_min)
    dim = nb if spin == "scalar" else 2 * nb
    scaled = np.zeros((dim, dim))
    exponent = np.zeros((dim, dim))

    def offset(l):
        return l * l - l_min * l_min

    for (l, lp), (lams, mus, c_tab) in tables.items():
        if lams.size == 0:
            continue
        s = float(logk[lams].max())
        kv = np.exp(logk[lams] - s)
        ysel = yc[lams[None, :], l_top + mus[:, None]]
        blocks = np.einsum("kpj,j,pj->kp", c_tab, kv, ysel).reshape(
            c_tab.shape[0], 2 * l + 1, 2 * lp + 1
        )
        u_l = _real_basis(l)
        u_lp = _real_basis(lp)
        a_r = u_l @ blocks[0] @ u_lp.conj().T
        r0, c0 = offset(l), offset(lp)
        rows = slice(r0, r0 + 2 * l + 1)
        cols = slice(c0, c0 + 2 * lp + 1)
        tol = 1e-10 * max(1.0, np.abs(a_r).max())
        if spin == "scalar":
            if np.abs(a_r.imag).max() > tol:
                raise RuntimeError("real-basis entries acquired imaginary parts")
            scaled[rows, cols] = a_r.real
            exponent[rows, cols] = s
            continue
        b_r = u_l @ blocks[1] @ u_lp.conj().T
        # electric sector first; magnetic labels refer to R_{l,-m} and carry
        # the relative factor i, which makes the four blocks below real
        ee = a_r
        mm = a_r[::-1, ::-1]
        me = 1j * b_r[::-1, :]
        em = -1j * b_r[:, ::-1]
        scale = max(np.abs(a_r).max(), np.abs(b_r).max(), 1e-300)
        if max(np.abs(a_r.imag).max(), np.abs(b_r.real).max()) > 1e-9 * scale:
            raise RuntimeError("real-basis entries acquired imaginary parts")
        rows_m = slice(nb + r0, nb + r0 + 2 * l + 1)
        cols_m = slice(nb + c0, nb + c0 + 2 * lp + 1)
        scaled[rows, cols] = ee.real
        scaled[rows_m, cols_m] = mm.real
        scaled[rows_m, cols] = me.real
        scaled[rows, cols_m] = em.real
        for blk in (
            (rows, cols),
            (rows_m, cols_m),
            (rows_m, cols),
            (rows, cols_m),
        ):
            exponent[blk] = s
    return TranslationMatrix(
        kappa=float(kappa),
        displacement=d,
        l_max=l_max,
        scaled=scaled,
        exponent=exponent,
        spin=spin,
    )


def translation_matrix(medium, kappa, d, l_max):
    """Vector-wave translation matrix for displacement ``d``.

    Converts outgoing waves about the point ``d`` into regular waves about
    the origin, at imaginary wavenumber n_M kappa.
    """
    return _build(medium, kappa, d, l_max, "vector")


def scalar_translation_matrix(medium, kappa, d, l_max):
    """Scalar-wave reduction of the translation matrix (validation aid).

    Contracting these coefficients with regular/outgoing scalar waves
    reproduces the closed-form medium Green's function
    exp(-n kappa |x - x'|) / (4 pi |x - x'|).
    """
    return _build(medium, kappa, d, l_max, "scalar")


def _combine(mats, weights):
    """Weighted sum of equally-shaped scaled matrices, rescaled safely."""
    exponent = np.maximum.reduce([m.exponent for m in mats])
    scaled = np.zeros_like(mats[0].scaled)
    for w, m in zip(weights, mats):
        scaled += w * m.scaled * np.exp(m.exponent - exponent)
    ref = mats[0]
    return TranslationMatrix(
        kappa=ref.kappa,
        displacement=ref.displacement,
        l_max=ref.l_max,
        scaled=scaled,
        exponent=exponent,
        spin=ref.spin,
    )


def translation_gradient(medium, kappa, d, l_max, h, richardson=False, spin="vector"):
    """Displacement gradient (dX/dd_x, dX/dd_y, dX/dd_z) of the matrix.

    Central finite differences with step ``h``; with ``richardson`` the
    half-step evaluation is combined to cancel the leading error term.
    """
    d = np.asarray(d, float)
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise GeometryError("translation displacement must be nonzero")
    if h >= 0.1 * dist:
        raise ToleranceError("finite-difference step must be below 0.1*|d|")
    if h <= 1e-8 * dist:
        raise ToleranceError("finite-difference step underflows below 1e-8*|d|")

    def central(step):
        grads = []
        for axis in range(3):
            e = np.zeros(3)
            e[axis] = step
            plus = _build(medium, kappa, d + e, l_max, spin)
            minus = _build(medium, kappa, d - e, l_max, spin)
            grads.append(_combine([plus, minus], [0.5 / step, -0.5 / step]))
        return grads

    grads = central(h)
    if richardson:
        half = central(0.5 * h)
        grads = [
            _combine([g2, g1], [4.0 / 3.0, -1.0 / 3.0])
            for g1, g2 in zip(grads, half)
        ]
    return tuple(grads)
