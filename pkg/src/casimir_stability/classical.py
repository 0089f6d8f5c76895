"""Classical fluctuating charges in disjoint containers.

Charges live in rigid containers (spheres or axis-aligned boxes).  Mobile
charges explore their container under hard walls and optional harmonic
tethers; fixed charges ride with the container.  The inter-container
interaction is the bare Coulomb potential q q' / (4 pi eps_M r).

For the free energy F(d) of the configuration with the labeled container
rigidly shifted by d, the displacement Laplacian obeys

    lap F = <lap H> - beta * Var(grad_d H) = -beta * Var(grad_d H),

because the cross-container Green's function is harmonic away from
coincident points, so <lap H> vanishes identically.  The variance is
nonnegative, hence lap F <= 0: thermal fluctuations can only destabilize.
Both sides are computed independently here (Metropolis estimator versus
finite differences of a deterministic quadrature) so the identity can be
verified numerically.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (
    CapabilityError,
    ConvergenceBudgetError,
    PrecisionError,
    ValidationError,
)

__all__ = [
    "Container",
    "ClassicalConfig",
    "McEstimate",
    "SampleStream",
    "hamiltonian",
    "grad_d_hamiltonian",
    "free_energy_quadrature",
    "metropolis_run",
    "laplacian_F_estimator",
]

_COULOMB = 1.0 / (4.0 * math.pi)


@dataclass(frozen=True)
class Container:
    """Rigid container of charges.

    ``shape`` is "sphere" or "box"; ``size`` is the radius for a sphere and
    the (full) edge lengths for a box.  ``fixed_charges`` is a sequence of
    (charge, position) with positions relative to the center.
    ``mobile_charges`` is a sequence of (charge, tether) where tether is
    None or ("harmonic", k, anchor) with the anchor relative to the center.
    ``include_intra`` adds the intra-container Coulomb pairs to the
    container's internal energy U_J.
    """

    label: str
    shape: str
    center: tuple
    size: object
    fixed_charges: tuple = ()
    mobile_charges: tuple = ()
    include_intra: bool = False

    def __post_init__(self):
        if self.shape not in ("sphere", "box"):
            raise ValidationError("container shape must be 'sphere' or 'box'")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 3:
            raise ValidationError("container center must be a 3-vector")
        if self.shape == "sphere":
            size = float(self.size)
            if size <= 0.0:
                raise ValidationError("sphere radius must be positive")
        else:
            size = tuple(float(s) for s in self.size)
            if len(size) != 3 or any(s <= 0.0 for s in size):
                raise ValidationError("box size must be three positive lengths")
        object.__setattr__(self, "size", size)
        fixed = tuple(
            (float(q), tuple(float(x) for x in pos)) for q, pos in self.fixed_charges
        )
        object.__setattr__(self, "fixed_charges", fixed)
        mobiles = []
        for q, tether in self.mobile_charges:
            if tether is not None:
                kind, k, anchor = tether
                if kind != "harmonic":
                    raise ValidationError("tether must be None or harmonic")
                if k < 0.0:
                    raise ValidationError("tether stiffness must be nonnegative")
                tether = ("harmonic", float(k), tuple(float(a) for a in anchor))
            mobiles.append((float(q), tether))
        object.__setattr__(self, "mobile_charges", tuple(mobiles))

    # --- geometry -------------------------------------------------------
    def bounding_radius(self):
        if self.shape == "sphere":
            return self.size
        return 0.5 * math.sqrt(sum(s**2 for s in self.size))

    def contains(self, points):
        """Boolean mask: which absolute points lie inside the container."""
        p = np.atleast_2d(np.asarray(points, float)) - np.asarray(self.center)
        if self.shape == "sphere":
            return np.einsum("ij,ij->i", p, p) <= self.size**2
        half = 0.5 * np.asarray(self.size)
        return np.all(np.abs(p) <= half, axis=1)

    def fixed_absolute(self):
        c = np.asarray(self.center)
        return [(q, c + np.asarray(pos)) for q, pos in self.fixed_charges]

    def tether_energy(self, idx, point):
        """Harmonic tether energy of mobile ``idx`` at absolute ``point``."""
        _, tether = self.mobile_charges[idx]
        if tether is None:
            return 0.0
        _, k, anchor = tether
        r = np.asarray(point) - (np.asarray(self.center) + np.asarray(anchor))
        return 0.5 * k * float(r @ r)


@dataclass(frozen=True)
class ClassicalConfig:
    """Containers in a uniform dielectric at inverse temperature beta."""

    containers: tuple
    eps_M: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "containers", tuple(self.containers))
        if self.eps_M <= 0.0:
            raise ValidationError("eps_M must be positive")
        if self.beta <= 0.0:
            raise ValidationError("beta must be positive")
        labels = [c.label for c in self.containers]
        if len(set(labels)) != len(labels):
            raise ValidationError("container labels must be unique")
        for i, a in enumerate(self.containers):
            for b in self.containers[i + 1 :]:
                if not _disjoint(a, b):
                    raise ValidationError(
                        f"containers {a.label!r} and {b.label!r} touch or overlap"
                    )

    def container(self, label):
        for c in self.containers:
            if c.label == label:
                return c
        raise ValidationError(f"unknown container label {label!r}")

    def mobile_index(self):
        """Flattened (container_index, mobile_index) list, in order."""
        out = []
        for ci, c in enumerate(self.containers):
            for mi in range(len(c.mobile_charges)):
                out.append((ci, mi))
        return out


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo estimate with blocking error bar."""

    mean: float
    stderr: float
    n_samples: int
    autocorrelation_time: float

    def __post_init__(self):
        if self.stderr < 0.0:
            raise ValidationError("stderr must be nonnegative")


@dataclass(frozen=True)
class SampleStream:
    """Mobile-position samples from one Metropolis chain."""

    positions: np.ndarray  # (n_kept, n_mobiles, 3), absolute coordinates
    acceptance_rate: float
    seed: int
    step_size: float
    burn_in: int


def _point_box_distance(p, center, size):
    d = np.abs(np.asarray(p) - np.asarray(center)) - 0.5 * np.asarray(size)
    return float(np.linalg.norm(np.clip(d, 0.0, None)))


def _disjoint(a, b):
    ca, cb = np.asarray(a.center), np.asarray(b.center)
    if a.shape == "sphere" and b.shape == "sphere":
        return np.linalg.norm(ca - cb) > a.size + b.size
    if a.shape == "box" and b.shape == "box":
        gap = np.abs(ca - cb) - 0.5 * (np.asarray(a.size) + np.asarray(b.size))
        return bool(np.any(gap > 0.0))
    sph, box = (a, b) if a.shape == "sphere" else (b, a)
    return _point_box_distance(sph.center, box.center, box.size) > sph.size


def _charges(config, positions):
    """Per container: list of (q, absolute position) including mobiles."""
    positions = np.asarray(positions, float).reshape(-1, 3)
    index = config.mobile_index()
    if len(positions) != len(index):
        raise ValidationError(
            f"expected {len(index)} mobile positions, got {len(positions)}"
        )
    per = [list(c.fixed_absolute()) for c in config.containers]
    for flat, (ci, mi) in enumerate(index):
        q, _ = config.containers[ci].mobile_charges[mi]
        per[ci].append((q, positions[flat]))
    return per, positions, index


def _coulomb(q1, p1, q2, p2, eps_m):
    r = np.linalg.norm(np.asarray(p1) - np.asarray(p2))
    return _COULOMB * q1 * q2 / (eps_m * r)


def hamiltonian(config, positions):
    """Total configurational energy; +inf if a mobile violates a hard wall.

    Cross-container Coulomb over all charge pairs, plus each container's
    internal energy (tethers and, when configured, intra-container pairs).
    """
    per, positions, index = _charges(config, positions)
    for flat, (ci, mi) in enumerate(index):
        if not config.containers[ci].contains(positions[flat])[0]:
            return math.inf
    total = 0.0
    n = len(config.containers)
    for i in range(n):
        for j in range(i + 1, n):
            for qa, pa in per[i]:
                for qb, pb in per[j]:
                    total += _coulomb(qa, pa, qb, pb, config.eps_M)
    for ci, c in enumerate(config.containers):
        for flat, (cj, mi) in enumerate(index):
            if cj == ci:
                total += c.tether_energy(mi, positions[flat])
        if c.include_intra:
            charges = per[ci]
            for i in range(len(charges)):
                for j in range(i + 1, len(charges)):
                    total += _coulomb(*charges[i], *charges[j], config.eps_M)
    return total


def grad_d_hamiltonian(config, positions, label):
    """Gradient of H under rigid displacement of the labeled container.

    Only cross-container Coulomb terms depend on the displacement:
    grad = -sum q_a q_b (x_a - x_b) / (4 pi eps_M |x_a - x_b|^3) over pairs
    with a in the labeled container and b outside it.
    """
    per, _, _ = _charges(config, positions)
    idx = [c.label for c in config.containers].index(
        config.container(label).label
    )
    grad = np.zeros(3)
    for qa, pa in per[idx]:
        for j, charges in enumerate(per):
            if j == idx:
                continue
            for qb, pb in charges:
                r = np.asarray(pa) - np.asarray(pb)
                dist = np.linalg.norm(r)
                grad -= _COULOMB * qa * qb / config.eps_M * r / dist**3
    return grad


def _shifted(config, label, d):
    containers = []
    for c in config.containers:
        if c.label == label:
            containers.append(
                replace(c, center=tuple(np.asarray(c.center) + np.asarray(d)))
            )
        else:
            containers.append(c)
    return ClassicalConfig(tuple(containers), config.eps_M, config.beta)


def _shape_nodes(container, n):
    """Quadrature nodes/weights of the container volume, n points per axis.

    Boxes use a tensor Gauss-Legendre rule; spheres use Gauss-Legendre in
    radius and polar cosine with a uniform periodic rule in azimuth (all
    factors smooth, so the rule converges spectrally).
    """
    t, w = leggauss(n)
    c = np.asarray(container.center)
    if container.shape == "box":
        half = 0.5 * np.asarray(container.size)
        axes = [(c[k] + half[k] * t, half[k] * w) for k in range(3)]
        pts = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), -1)
        wts = (
            axes[0][1][:, None, None]
            * axes[1][1][None, :, None]
            * axes[2][1][None, None, :]
        )
        return pts.reshape(-1, 3), wts.reshape(-1)
    radius = container.size
    r = 0.5 * radius * (t + 1.0)
    wr = 0.5 * radius * w * r**2
    ct = t
    wt = w
    phi = 2.0 * math.pi * np.arange(n) / n
    wp = np.full(n, 2.0 * math.pi / n)
    st = np.sqrt(1.0 - ct**2)
    x = r[:, None, None] * st[None, :, None] * np.cos(phi)[None, None, :]
    y = r[:, None, None] * st[None, :, None] * np.sin(phi)[None, None, :]
    z = r[:, None, None] * ct[None, :, None] * np.ones_like(phi)[None, None, :]
    pts = np.stack([x, y, z], -1).reshape(-1, 3) + c
    wts = (wr[:, None, None] * wt[None, :, None] * wp[None, None, :]).reshape(-1)
    return pts, wts


def _one_body(config, ci, mi, points):
    """Energy terms linear in one mobile's position, vectorized over points.

    Tether, Coulomb with every charge of the other containers and, when
    the container is configured with intra pairs, with its own fixed
    charges.
    """
    c = config.containers[ci]
    q, tether = c.mobile_charges[mi]
    pts = np.asarray(points, float)
    u = np.zeros(len(pts))
    if tether is not None:
        _, k, anchor = tether
        r = pts - (np.asarray(c.center) + np.asarray(anchor))
        u += 0.5 * k * np.einsum("ij,ij->i", r, r)
    for cj, other in enumerate(config.containers):
        if cj == ci and not c.include_intra:
            continue
        for qb, pb in other.fixed_absolute():
            dist = np.linalg.norm(pts - pb, axis=1)
            u += _COULOMB * q * qb / (config.eps_M * dist)
    return u


def free_energy_quadrature(config, d, tol=1e-8, max_n=64):
    """F(d): free energy with the first container rigidly shifted by d.

    Deterministic tensor-product quadrature of exp(-beta H) over the
    mobile-charge volumes; supports at most two mobile charges in total.
    The per-axis node count is doubled until the result is stable to
    ``tol`` relative; exceeding ``max_n`` raises ConvergenceBudgetError.
    """
    cfg = _shifted(config, config.containers[0].label, d)
    index = cfg.mobile_index()
    if len(index) > 2:
        raise CapabilityError("quadrature free energy supports at most 2 mobiles")
    # constant part: fixed-fixed cross-container + configured intra pairs
    e0 = hamiltonian(
        ClassicalConfig(
            tuple(
                replace(c, mobile_charges=()) for c in cfg.containers
            ),
            cfg.eps_M,
            cfg.beta,
        ),
        np.zeros((0, 3)),
    )
    if not index:
        return e0
    beta = cfg.beta

    def evaluate(n):
        grids = [
            _shape_nodes(cfg.containers[ci], n) for ci, mi in index
        ]
        ones = [
            _one_body(cfg, ci, mi, grids[k][0]) for k, (ci, mi) in enumerate(index)
        ]
        if len(index) == 1:
            z = float(np.sum(grids[0][1] * np.exp(-beta * ones[0])))
        else:
            (ci, mi), (cj, mj) = index
            qa = cfg.containers[ci].mobile_charges[mi][0]
            qb = cfg.containers[cj].mobile_charges[mj][0]
            fa = grids[0][1] * np.exp(-beta * ones[0])
            fb = grids[1][1] * np.exp(-beta * ones[1])
            interacting = ci != cj or cfg.containers[ci].include_intra
            z = 0.0
            chunk = max(1, 10_000_000 // max(len(fb), 1))
            for start in range(0, len(fa), chunk):
                pa = grids[0][0][start : start + chunk]
                if interacting:
                    dist = np.linalg.norm(
                        pa[:, None, :] - grids[1][0][None, :, :], axis=2
                    )
                    pair = _COULOMB * qa * qb / (cfg.eps_M * dist)
                    kern = np.exp(-beta * pair)
                    z += float(fa[start : start + chunk] @ kern @ fb)
                else:
                    z += float(np.sum(fa[start : start + chunk])) * float(
                        np.sum(fb)
                    )
        if z <= 0.0:
            raise ConvergenceBudgetError("partition integral not resolvable")
        return e0 - math.log(z) / beta

    n = 8
    prev = evaluate(n)
    while n <= max_n:
        n *= 2
        cur = evaluate(n)
        if abs(cur - prev) <= tol * max(abs(cur), 1.0):
            return cur
        prev = cur
    raise ConvergenceBudgetError(
        "free-energy quadrature did not stabilize within the node budget"
    )


def _mobile_delta_energy(config, positions, flat, point):
    """Energy terms involving mobile ``flat`` evaluated at ``point``."""
    index = config.mobile_index()
    ci, mi = index[flat]
    c = config.containers[ci]
    q, _ = c.mobile_charges[mi]
    # _one_body already contains the tether term
    e = float(_one_body(config, ci, mi, np.asarray(point)[None, :])[0])
    # interactions with the other mobiles
    for other, (cj, mj) in enumerate(index):
        if other == flat:
            continue
        if cj == ci and not c.include_intra:
            continue
        qb, _ = config.containers[cj].mobile_charges[mj]
        dist = np.linalg.norm(np.asarray(point) - positions[other])
        e += _COULOMB * q * qb / (config.eps_M * dist)
    return e


def metropolis_run(config, steps, step_size, seed, burn_in=None):
    """Single-particle-move Metropolis chain over the mobile charges.

    Deterministic for a given seed.  Proposals are uniform cube moves of
    half-width ``step_size``; moves outside the hard walls are rejected.
    An acceptance rate outside [0.1, 0.9] triggers a warning (tune
    step_size), not a failure.
    """
    index = config.mobile_index()
    if not index:
        raise ValidationError("no mobile charges to sample")
    if burn_in is None:
        burn_in = max(1, steps // 10)
    if steps <= burn_in:
        raise ValidationError("steps must exceed the burn-in")
    rng = np.random.default_rng(seed)
    positions = np.zeros((len(index), 3))
    for flat, (ci, mi) in enumerate(index):
        c = config.containers[ci]
        _, tether = c.mobile_charges[mi]
        if tether is not None:
            positions[flat] = np.asarray(c.center) + np.asarray(tether[2])
        else:
            positions[flat] = np.asarray(c.center)
    energies = [
        _mobile_delta_energy(config, positions, flat, positions[flat])
        for flat in range(len(index))
    ]
    kept = np.empty((steps - burn_in, len(index), 3))
    accepted = 0
    beta = config.beta
    for step in range(steps):
        flat = int(rng.integers(len(index)))
        ci, _ = index[flat]
        proposal = positions[flat] + step_size * rng.uniform(-1.0, 1.0, 3)
        if config.containers[ci].contains(proposal)[0]:
            e_new = _mobile_delta_energy(config, positions, flat, proposal)
            delta = e_new - energies[flat]
            if delta <= 0.0 or rng.random() < math.exp(-beta * delta):
                positions[flat] = proposal
                accepted += 1
                # energies of the other mobiles shift too; recompute lazily
                energies = [
                    _mobile_delta_energy(config, positions, k, positions[k])
                    for k in range(len(index))
                ]
        if step >= burn_in:
            kept[step - burn_in] = positions
    rate = accepted / steps
    if not 0.1 <= rate <= 0.9:
        warnings.warn(
            f"Metropolis acceptance rate {rate:.3f} outside [0.1, 0.9]; "
            "adjust step_size",
            stacklevel=2,
        )
    return SampleStream(
        positions=kept,
        acceptance_rate=rate,
        seed=seed,
        step_size=step_size,
        burn_in=burn_in,
    )


def _grad_samples(config, stream, label):
    """grad_d H for every sample, vectorized over the chain."""
    pos = stream.positions
    idx = [c.label for c in config.containers].index(
        config.container(label).label
    )
    index = config.mobile_index()
    t = len(pos)
    grads = np.zeros((t, 3))
    # charge inventory: (is_mobile, flat index or absolute position, q)
    inventory = []
    for ci, c in enumerate(config.containers):
        for q, p in c.fixed_absolute():
            inventory.append((ci, False, q, p))
    for flat, (ci, mi) in enumerate(index):
        q, _ = config.containers[ci].mobile_charges[mi]
        inventory.append((ci, True, q, flat))
    for ai, (ca, mob_a, qa, ra) in enumerate(inventory):
        if ca != idx:
            continue
        pa = pos[:, ra, :] if mob_a else np.broadcast_to(ra, (t, 3))
        for cb, mob_b, qb, rb in inventory:
            if cb == idx:
                continue
            pb = pos[:, rb, :] if mob_b else np.broadcast_to(rb, (t, 3))
            r = pa - pb
            dist = np.linalg.norm(r, axis=1)
            grads -= (
                _COULOMB * qa * qb / config.eps_M / dist**3
            )[:, None] * r
    return grads


def _blocking_stderr(series):
    """(stderr, autocorrelation_time) of the mean by block doubling.

    Blocks are doubled until the error estimate plateaus; failure to
    plateau with at least 16 blocks raises PrecisionError.
    """
    x = np.asarray(series, float)
    n = len(x)
    if n < 64:
        raise PrecisionError("too few samples for a blocking analysis")
    naive = float(np.std(x, ddof=1) / math.sqrt(n))
    prev = naive
    best = naive
    plateaued = False
    block = 1
    while n // (2 * block) >= 16:
        block *= 2
        m = n // block
        means = x[: m * block].reshape(m, block).mean(axis=1)
        err = float(np.std(means, ddof=1) / math.sqrt(m))
        best = max(best, err)
        # the blocking curve rises until the blocks decorrelate; stop once
        # it no longer grows beyond its own statistical scatter
        if prev > 0.0 and err <= prev * (1.0 + 1.0 / math.sqrt(2.0 * (m - 1))):
            plateaued = True
            break
        prev = err
    if not plateaued:
        raise PrecisionError(
            "blocking analysis did not plateau; samples too correlated"
        )
    tau = 0.5 * (best / naive) ** 2 if naive > 0.0 else 0.5
    return best, max(tau, 0.5)


def laplacian_F_estimator(config, label, samples):
    """Estimate lap F = -beta * Var(grad_d H) from a sample stream.

    The missing <lap H> term vanishes identically because all interacting
    charge pairs sit in disjoint containers, where the Coulomb kernel is
    harmonic.  The estimate is <= 0 by construction; the error bar comes
    from a blocking analysis of the per-sample variance contributions.
    """
    grads = _grad_samples(config, samples, label)
    center = grads.mean(axis=0)
    contrib = np.einsum("ij,ij->i", grads - center, grads - center)
    if float(contrib.max(initial=0.0)) == 0.0:
        return McEstimate(0.0, 0.0, len(grads), 0.5)
    stderr, tau = _blocking_stderr(contrib)
    beta = config.beta
    return McEstimate(
        mean=-beta * float(contrib.mean()),
        stderr=beta * stderr,
        n_samples=len(grads),
        autocorrelation_time=tau,
    )
