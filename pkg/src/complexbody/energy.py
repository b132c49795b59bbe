"""Stored energy of the body, its polyconvex representation and global energy.

The built-in internal density (per unit reference volume, before the
weight ``w(x)``) is

    mu/2 (|F|^2 - d) + delta (|cof F|^r - d^(r/2)) - p0 ln J
    + c4 ((J^2 - 1)/2 - ln J) + kappa/s |N|^s + alpha/2 |F^T a|^2

with ``J = det F``, ``a`` the first ``d`` components of the descriptor
(or a fixed spatial axis for the frame-breaking variant) and
``p0 = mu + delta r (d-1) d^((r-2)/2)``. The constant shifts and the
``-p0 ln J`` term make the identity state energy- and stress-free. The
external part is the dead-load potential ``-b0.u - beta0.nu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import JetSample, MinorsVector, cofactor, compute_jets, minors
from .manifold import ManifoldSpec, project_point

__all__ = [
    "OrientationError",
    "Weight",
    "EnergyModel",
    "ProbeReport",
    "density_eval",
    "polyconvex_density",
    "barrier",
    "total_energy",
    "cell_energies",
    "growth_constants",
    "polyconvex_probe",
]


class OrientationError(ValueError):
    """det F <= 0 where the energy is evaluated."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class Weight:
    """Scalar modulation ``w(x) = base + slope . x`` of the internal energy."""

    base: float = 1.0
    slope: tuple = None

    @property
    def is_constant(self):
        return self.slope is None or not np.any(self.slope)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.full(x.shape[:-1], float(self.base))
        return self.base + x @ np.asarray(self.slope, dtype=float)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        slope = np.zeros(x.shape[-1]) if self.is_constant else np.asarray(self.slope, dtype=float)
        return np.broadcast_to(slope, x.shape).copy()

    def bounds(self, lower, upper):
        """Min and max of w over the box [lower, upper]."""
        if self.is_constant:
            return float(self.base), float(self.base)
        slope = np.asarray(self.slope, dtype=float)
        lo = self.base + np.sum(np.minimum(slope * lower, slope * upper))
        hi = self.base + np.sum(np.maximum(slope * lower, slope * upper))
        return float(lo), float(hi)


@dataclass(frozen=True)
class EnergyModel:
    mu: float = 1.0
    delta: float = 0.5
    c4: float = 1.0
    kappa: float = 0.1
    alpha: float = 0.0
    r: float = 1.5
    s: float = 2.0
    body_force: tuple = None
    micro_force: tuple = None
    weight: Weight = field(default_factory=Weight)
    coupling_axis: tuple = None

    def __post_init__(self):
        if not (self.r > 1 and self.s > 1):
            raise ValueError(f"exponents must exceed 1, got r={self.r}, s={self.s}")
        for name in ("mu", "delta", "c4", "kappa", "alpha"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} is not finite")
        if self.c4 <= 0:
            raise ValueError("the determinant barrier coefficient c4 must be positive")

    def p0(self, d):
        """Pressure offset that cancels the stress of the identity state."""
        return self.mu + self.delta * self.r * (d - 1) * d ** ((self.r - 2) / 2)

    def b0(self, d):
        return np.zeros(d) if self.body_force is None else np.asarray(self.body_force, dtype=float)

    def beta0(self, n):
        return np.zeros(n) if self.micro_force is None else np.asarray(self.micro_force, dtype=float)

    def coupling_vector(self, nu, d):
        """Vector entering the coupling term: the descriptor (first d comps) or a fixed axis."""
        if self.coupling_axis is not None:
            a = np.asarray(self.coupling_axis, dtype=float)[:d]
            return np.broadcast_to(a, np.shape(nu)[:-1] + (d,))
        nu = np.asarray(nu)
        if nu.shape[-1] < d:
            if self.alpha != 0:
                raise ValueError("coupling needs a descriptor with at least d components")
            return np.zeros(nu.shape[:-1] + (d,))
        return nu[..., :d]

    def to_dict(self):
        return {
            "mu": self.mu, "delta": self.delta, "c4": self.c4, "kappa": self.kappa,
            "alpha": self.alpha, "r": self.r, "s": self.s,
            "body_force": None if self.body_force is None else list(self.body_force),
            "micro_force": None if self.micro_force is None else list(self.micro_force),
            "weight": {"base": self.weight.base,
                       "slope": None if self.weight.slope is None else list(self.weight.slope)},
            "coupling_axis": None if self.coupling_axis is None else list(self.coupling_axis),
        }


def barrier(model: EnergyModel, t):
    """Determinant barrier c4 ((t^2 - 1)/2 - ln t)."""
    t = np.asarray(t, dtype=float)
    return model.c4 * (0.5 * (t * t - 1.0) - np.log(t))


def _frob2(A):
    return np.sum(A * A, axis=(-2, -1))


def _internal_terms(model, d, Fmat, frob_excess, cof_excess, Jm1, N, a):
    """Internal density e^i / w from the excesses over the identity.

    ``frob_excess = |F|^2 - d``, ``cof_excess = |cof F|^2 - d`` and
    ``Jm1 = det F - 1``. Written with log1p/expm1 so that the first-order
    parts, which cancel at the identity, do not swamp second-order ones.
    """
    r, s = model.r, model.s
    log_j = np.log1p(Jm1)
    terms = 0.5 * model.mu * frob_excess
    terms = terms + model.delta * d ** (r / 2) * np.expm1(0.5 * r * np.log1p(cof_excess / d))
    terms = terms - model.p0(d) * log_j + model.c4 * (Jm1 + 0.5 * Jm1 * Jm1 - log_j)
    nn = np.sqrt(_frob2(N))
    terms = terms + model.kappa / s * nn**s
    Fta = np.einsum("...ij,...i->...j", Fmat, a)
    terms = terms + 0.5 * model.alpha * np.sum(Fta * Fta, axis=-1)
    return terms


def _excesses(H):
    """(|F|^2 - d, |cof F|^2 - d, det F - 1) for F = I + H, first order exact."""
    d = H.shape[-1]
    tr = np.trace(H, axis1=-2, axis2=-1)
    frob = 2.0 * tr + _frob2(H)
    if d == 2:
        return frob, frob, tr + np.linalg.det(H)
    cofH = cofactor(H)
    # cof(I + H) = I + K and det(I + H) = 1 + tr H + tr cof H + det H
    K = tr[..., None, None] * np.eye(3) - np.swapaxes(H, -1, -2) + cofH
    cof_ex = 2.0 * np.trace(K, axis1=-2, axis2=-1) + _frob2(K)
    Jm1 = tr + np.trace(cofH, axis1=-2, axis2=-1) + np.linalg.det(H)
    return frob, cof_ex, Jm1


def _check_orientation(J):
    if np.any(~(J > 0)):
        raise OrientationError(f"det F = {np.min(J):.3e} is not positive")


def density_eval(model: EnergyModel, jet: JetSample, part: str = "total"):
    """Energy density at a jet (broadcast over batch axes).

    ``part`` selects ``"internal"`` (w(x) e^i), ``"external"`` (e^e) or
    ``"total"``.
    """
    d = jet.dim
    out = 0.0
    if part in ("internal", "total"):
        frob, cof_ex, Jm1 = _excesses(jet.H)
        _check_orientation(1.0 + Jm1)
        a = model.coupling_vector(jet.nu, d)
        out = model.weight.value(jet.x) * _internal_terms(model, d, jet.F, frob, cof_ex, Jm1, jet.Ngrad, a)
    if part in ("external", "total"):
        out = out - jet.u @ model.b0(d) - jet.nu @ model.beta0(jet.nu.shape[-1])
    elif part != "internal":
        raise ValueError(f"unknown energy part {part!r}")
    return out


def polyconvex_density(model: EnergyModel, x, u, nu, xi: MinorsVector, N):
    """Pe(x, u, nu, xi, N): the density as a convex function of (xi, N).

    ``xi`` holds independent F, cof and det blocks; on the image of the
    minors map it coincides with :func:`density_eval`.
    """
    Fb = np.asarray(xi.F, dtype=float)
    d = Fb.shape[-1]
    Jb = np.asarray(xi.det, dtype=float)
    outside = ~(Jb > 0)
    Jb = np.where(outside, 1.0, Jb)
    cof_block = np.asarray(xi.cof if d == 3 else Fb, dtype=float)
    a = model.coupling_vector(np.asarray(nu, dtype=float), d)
    x = np.asarray(x, dtype=float)
    out = model.weight.value(x) * _internal_terms(model, d, Fb, _frob2(Fb) - d, _frob2(cof_block) - d,
                                                  Jb - 1.0, np.asarray(N), a)
    out = out - np.asarray(u) @ model.b0(d) - np.asarray(nu) @ model.beta0(np.shape(nu)[-1])
    # +inf outside the effective domain det > 0
    return np.where(outside, np.inf, out)


def cell_energies(model, grid, manifold, u, nu, cells=None):
    """Quadrature energy of each cell."""
    jets = compute_jets(grid, manifold, u, nu, cells)
    J = minors(jets.F).det
    bad = np.flatnonzero(~np.all(J > 0, axis=1))
    if bad.size:
        cell = int(grid._cells(cells)[bad[0]])
        raise OrientationError(f"det F <= 0 in cell {cell}", cell=cell)
    dens = density_eval(model, jets)
    return dens @ grid.gauss_weights


def total_energy(model, grid, manifold, u, nu, cells=None) -> float:
    """Global energy: quadrature of the density over the (selected) cells."""
    return float(np.sum(cell_energies(model, grid, manifold, u, nu, cells)))


# --- polyconvexity and growth probe ----------------------------------------


@dataclass
class ProbeReport:
    samples: int
    consistency_violations: int = 0
    convexity_violations: int = 0
    growth_violations: int = 0
    C1: float = 0.0
    C0: float = 0.0
    coercive: bool = True
    witnesses: list = field(default_factory=list)

    @property
    def passed(self):
        return not (self.consistency_violations or self.convexity_violations or self.growth_violations)

    def summary(self):
        if self.passed:
            return f"probe passed on {self.samples} samples"
        kinds = [
            name for name, n in (
                ("consistency", self.consistency_violations),
                ("convexity", self.convexity_violations),
                ("growth condition", self.growth_violations),
            ) if n
        ]
        return f"probe found violations of: {', '.join(kinds)}"

    def to_dict(self):
        return {
            "samples": self.samples,
            "passed": self.passed,
            "consistency_violations": self.consistency_violations,
            "convexity_violations": self.convexity_violations,
            "growth_violations": self.growth_violations,
            "C1": self.C1,
            "C0": self.C0,
            "coercive": self.coercive,
            "summary": self.summary(),
            "witnesses": self.witnesses,
        }


def growth_constants(model: EnergyModel, d: int, w_bounds=(1.0, 1.0)):
    """Constants of the lower bound e^i >= C1 (|M(F)|^r + |N|^s) + theta(J) - C0.

    Returns ``(C1, C0, theta)`` with ``theta`` a non-negative convex
    function blowing up at 0+. The bound is proved for 1 < r <= 2 and
    non-negative coefficients; outside that range the probe is expected
    to find witnesses.
    """
    w_min, w_max = w_bounds
    coeffs = [model.mu / 2, model.c4 / 4, model.kappa / model.s]
    if d == 3:
        coeffs.append(model.delta)
    C1 = max(0.0, w_min * min(coeffs))
    lam = max(model.c4 + model.p0(d), 1e-12)
    # minimum of c4/4 t^2 - lam ln t, reached at t^2 = 2 lam / c4
    t2 = 2.0 * lam / model.c4
    m = model.c4 / 4 * t2 - 0.5 * lam * math.log(t2)
    K = model.mu * d / 2 + model.delta * d ** (model.r / 2) + model.c4 / 2
    C0 = 2 * C1 - min((m - K) * w_min, (m - K) * w_max)

    def theta(t):
        t = np.asarray(t, dtype=float)
        return w_min * (model.c4 / 4 * t * t - lam * np.log(t) - m)

    return C1, C0, theta


def _random_rotation(rng, d, size):
    A = rng.standard_normal((size, d, d))
    Q, R = np.linalg.qr(A)
    Q = Q * np.sign(np.diagonal(R, axis1=-2, axis2=-1))[:, None, :]
    flip = np.linalg.det(Q) < 0
    Q[flip, :, 0] *= -1
    return Q


def _random_F(rng, d, size, spread=1.5):
    sig = np.exp(rng.uniform(-spread, spread, (size, d)))
    U = _random_rotation(rng, d, size)
    V = _random_rotation(rng, d, size)
    return np.einsum("nij,nj,nkj->nik", U, sig, V)


def _random_N(rng, manifold, nu, d, size, spread=4.6):
    N = rng.standard_normal((size, manifold.dim, d))
    if manifold.is_sphere:
        N = N - nu[:, :, None] * np.einsum("ni,nik->nk", nu, N)[:, None, :]
    scale = np.exp(rng.uniform(-spread, spread, size))
    return N * (scale / np.maximum(np.sqrt(_frob2(N)), 1e-300))[:, None, None]


def polyconvex_probe(model: EnergyModel, manifold: ManifoldSpec, d: int, samples: int = 10_000,
                     seed: int = 0, box=None, max_witnesses: int = 5) -> ProbeReport:
    """Sample consistency, convexity and growth of the polyconvex representation.

    ``box`` is ``(lower, upper)`` for the reference positions sampled
    (defaults to the unit box). Counts of violating samples and the first
    few witnesses are returned.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    lower, upper = (np.zeros(d), np.ones(d)) if box is None else map(np.asarray, box)
    n = samples
    x = rng.uniform(lower, upper, (n, d))
    u = rng.uniform(-10.0, 10.0, (n, d))
    raw = rng.standard_normal((n, manifold.dim))
    nu = project_point(manifold, raw) if manifold.is_sphere else raw
    F = _random_F(rng, d, n)
    N = _random_N(rng, manifold, nu, d, n)
    report = ProbeReport(samples=n)

    def witness(kind, i, **extra):
        if len(report.witnesses) < max_witnesses:
            item = {"kind": kind, "x": x[i].tolist(), "u": u[i].tolist(), "nu": nu[i].tolist()}
            item.update({k: np.asarray(v).tolist() for k, v in extra.items()})
            report.witnesses.append(item)

    # (a) Pe(M(F), N) == e(F, N)
    jets = JetSample(x, u, F, nu, N)
    e = density_eval(model, jets)
    pe = polyconvex_density(model, x, u, nu, minors(F), N)
    scale = np.maximum(1.0, np.abs(e))
    bad = np.abs(pe - e) > 1e-12 * scale
    report.consistency_violations = int(bad.sum())
    for i in np.flatnonzero(bad)[:max_witnesses]:
        witness("consistency", i, F=F[i], N=N[i], e=e[i], Pe=pe[i])

    # (b) midpoint convexity along segments in (xi, N); three families:
    # both blocks moving, N only (N -> 2N), xi only
    def random_xi(size):
        Fb = _random_F(rng, d, size)
        cof = rng.standard_normal((size, d, d)) * np.exp(rng.uniform(-1, 1, (size, 1, 1))) if d == 3 else None
        det = np.exp(rng.uniform(-3, 3, size))
        return MinorsVector(Fb, cof, det)

    def mid(a, b):
        return MinorsVector(0.5 * (a.F + b.F), None if a.cof is None else 0.5 * (a.cof + b.cof),
                            0.5 * (a.det + b.det))

    xi1, xi2 = random_xi(n), random_xi(n)
    N1 = _random_N(rng, manifold, nu, d, n)
    N2 = _random_N(rng, manifold, nu, d, n)
    families = (
        ("xi and N", xi1, xi2, N1, N2),
        ("N only", xi1, xi1, N1, 2.0 * N1),
        ("xi only", xi1, xi2, N1, N1),
    )
    for label, xa, xb, Na, Nb in families:
        pa = polyconvex_density(model, x, u, nu, xa, Na)
        pb = polyconvex_density(model, x, u, nu, xb, Nb)
        pm = polyconvex_density(model, x, u, nu, mid(xa, xb), 0.5 * (Na + Nb))
        avg = 0.5 * (pa + pb)
        tol = 1e-10 * np.maximum(1.0, np.maximum(np.abs(pa), np.abs(pb)))
        bad = pm > avg + tol
        report.convexity_violations += int(bad.sum())
        for i in np.flatnonzero(bad)[:max_witnesses]:
            witness("convexity", i, segment=label, N_start=Na[i], N_end=Nb[i],
                    Pe_mid=pm[i], Pe_avg=avg[i])

    # (c) growth bound, with external potentials bounded on the sampled box
    w_bounds = model.weight.bounds(lower, upper)
    C1, C0, theta = growth_constants(model, d, w_bounds)
    C0 += np.abs(model.b0(d)).sum() * 10.0 + np.abs(model.beta0(manifold.dim)) @ np.max(np.abs(nu), axis=0)
    report.C1, report.C0 = float(C1), float(C0)
    report.coercive = C1 > 0
    m = minors(F)
    rhs = C1 * (m.norm() ** model.r + np.sqrt(_frob2(N)) ** model.s) + theta(m.det) - C0
    bad = e < rhs - 1e-10 * np.maximum(1.0, np.abs(rhs))
    report.growth_violations = int(bad.sum())
    for i in np.flatnonzero(bad)[:max_witnesses]:
        witness("growth", i, F=F[i], N=N[i], e=e[i], bound=rhs[i])
    return report
