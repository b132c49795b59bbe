"""Manifolds of substructural shapes embedded in R^N.

Points, tangent vectors and covectors are plain numpy arrays whose last
axis has length ``N`` (the embedding dimension); every function here
broadcasts over leading axes. Tangent and cotangent spaces are identified
through the ambient (embedded) metric.

Two manifolds are built in, the unit sphere S^2 in R^3 and the flat space
R^k, each paired with either the natural SO(3) action on vectors
(``q x nu``) or the trivial action.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Kind",
    "Action",
    "ManifoldSpec",
    "ManifoldError",
    "parse_manifold",
    "project_point",
    "project_tangent",
    "tangent_basis",
    "rotation_generator",
    "rotation_adjoint",
    "rotation_adjoint_bundle",
    "kernel_basis",
    "check_point",
]

POINT_TOL = 1e-12


class ManifoldError(ValueError):
    """Invalid manifold key, point or retraction."""


class Kind(enum.Enum):
    SPHERE = "s2"
    EUCLIDEAN = "rk"


class Action(enum.Enum):
    VECTOR = "vector"
    TRIVIAL = "trivial"


@dataclass(frozen=True)
class ManifoldSpec:
    kind: Kind
    dim: int  # embedding dimension N
    action: Action

    def __post_init__(self):
        if self.dim < 1:
            raise ManifoldError(f"embedding dimension must be positive, got {self.dim}")
        if self.kind is Kind.SPHERE and self.dim != 3:
            raise ManifoldError("the sphere is only available as S^2 in R^3")
        if self.action is Action.VECTOR and self.dim != 3:
            raise ManifoldError("the vector SO(3) action needs N = 3")

    @property
    def key(self) -> str:
        if self.kind is Kind.SPHERE:
            return f"s2-{self.action.value}"
        return f"rk-{self.action.value}:{self.dim}"

    @property
    def is_sphere(self) -> bool:
        return self.kind is Kind.SPHERE

    @property
    def tangent_dim(self) -> int:
        return 2 if self.is_sphere else self.dim


def parse_manifold(key: str) -> ManifoldSpec:
    """Build a :class:`ManifoldSpec` from its configuration key.

    Accepted keys are ``"s2-vector"``, ``"s2-trivial"``, ``"rk-trivial:<k>"``
    and ``"rk-vector:3"``.
    """
    key = key.strip().lower()
    if key in ("s2-vector", "s2-trivial"):
        return ManifoldSpec(Kind.SPHERE, 3, Action(key.split("-")[1]))
    if key.startswith("rk-"):
        head, _, k = key.partition(":")
        action = head[3:]
        try:
            dim = int(k)
            return ManifoldSpec(Kind.EUCLIDEAN, dim, Action(action))
        except ValueError as exc:
            raise ManifoldError(f"bad manifold key {key!r}: {exc}") from None
    raise ManifoldError(f"unknown manifold key {key!r}")


def project_point(spec: ManifoldSpec, p):
    """Nearest point of the manifold to ``p`` in the ambient metric."""
    p = np.asarray(p, dtype=float)
    if not spec.is_sphere:
        return p.copy()
    norm = np.linalg.norm(p, axis=-1, keepdims=True)
    if np.any(norm == 0.0):
        raise ManifoldError("cannot retract the zero vector onto the sphere")
    return p / norm


def project_tangent(spec: ManifoldSpec, nu, w):
    """Orthogonal projection of ambient vectors ``w`` onto T_nu M."""
    w = np.asarray(w, dtype=float)
    if not spec.is_sphere:
        return w.copy()
    nu = np.asarray(nu, dtype=float)
    return w - np.sum(w * nu, axis=-1, keepdims=True) * nu


def tangent_basis(spec: ManifoldSpec, nu):
    """Orthonormal basis of T_nu M, returned as columns: shape (..., N, k)."""
    nu = np.asarray(nu, dtype=float)
    if not spec.is_sphere:
        eye = np.eye(spec.dim)
        return np.broadcast_to(eye, nu.shape[:-1] + eye.shape).copy()
    # pick the coordinate axis least aligned with nu as a seed
    seed = np.zeros_like(nu)
    idx = np.argmin(np.abs(nu), axis=-1)
    np.put_along_axis(seed, idx[..., None], 1.0, axis=-1)
    t1 = project_tangent(spec, nu, seed)
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(nu, t1)
    return np.stack([t1, t2], axis=-1)


def rotation_generator(spec: ManifoldSpec, nu, q):
    """Infinitesimal generator A(nu) q of the SO(3) action on M."""
    nu = np.asarray(nu, dtype=float)
    q = np.asarray(q, dtype=float)
    if spec.action is Action.TRIVIAL:
        return np.zeros(np.broadcast_shapes(nu.shape, q.shape[:-1] + (spec.dim,)))
    return np.cross(q, nu)


def rotation_adjoint(spec: ManifoldSpec, nu, mu):
    """A*(nu) mu in R^3, defined by <mu, A(nu) q> = A*(nu) mu . q."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if spec.action is Action.TRIVIAL:
        return np.zeros(np.broadcast_shapes(nu.shape[:-1], mu.shape[:-1]) + (3,))
    return np.cross(nu, mu)


def rotation_adjoint_bundle(spec: ManifoldSpec, nu, mu, S, Ncols):
    """Return ``(A* mu, (DA*) S)``.

    ``S`` and ``Ncols`` are (..., N, d) matrices whose columns are the
    microstress and the descriptor gradient along each reference axis.
    The second output is the contraction of the spatial derivative of A*
    with the microstress, sum_k N_k x S_k for the vector action.
    """
    S = np.asarray(S, dtype=float)
    Ncols = np.asarray(Ncols, dtype=float)
    if S.shape[-2:] != Ncols.shape[-2:]:
        raise ManifoldError(
            f"microstress {S.shape[-2:]} and descriptor gradient "
            f"{Ncols.shape[-2:]} have different shapes"
        )
    astar = rotation_adjoint(spec, nu, mu)
    if spec.action is Action.TRIVIAL:
        lead = np.broadcast_shapes(S.shape[:-2], Ncols.shape[:-2])
        return astar, np.zeros(lead + (3,))
    dastar = np.cross(Ncols, S, axisa=-2, axisb=-2).sum(axis=-2)
    return astar, dastar


def kernel_basis(spec: ManifoldSpec, nu, tol: float = 1e-10):
    """Orthonormal basis (columns) of Ker A*(nu) restricted to T*_nu M.

    Computed from the singular values of the matrix of A* on a tangent
    basis, so it only works for a single point ``nu``.
    """
    nu = np.asarray(nu, dtype=float)
    basis = tangent_basis(spec, nu)
    images = rotation_adjoint(spec, nu, basis.T).T  # (3, k)
    _, sing, vt = np.linalg.svd(images)
    rank = int(np.sum(sing > tol))
    return basis @ vt[rank:].T


def check_point(spec: ManifoldSpec, nu, tol: float = POINT_TOL):
    """Raise :class:`ManifoldError` unless every row of ``nu`` lies on M."""
    nu = np.asarray(nu, dtype=float)
    if nu.shape[-1] != spec.dim:
        raise ManifoldError(f"expected {spec.dim} coordinates, got {nu.shape[-1]}")
    if not np.all(np.isfinite(nu)):
        raise ManifoldError("non-finite descriptor values")
    if spec.is_sphere:
        dev = np.abs(np.linalg.norm(nu, axis=-1) - 1.0)
        if dev.size and dev.max() > tol:
            raise ManifoldError(f"descriptor off the sphere by {dev.max():.3e}")
