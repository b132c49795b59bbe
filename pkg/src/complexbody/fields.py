"""Reference grid, Q1 interpolation and first-prolongation samples.

Nodal fields are stored flat, shape ``(n_nodes, k)``, with nodes ordered
lexicographically by their integer index ``(i, j[, l])``, last index
fastest (numpy C order). Each cell carries ``2**d`` local nodes ordered the
same way over the corner offsets ``{0, 1}**d``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .manifold import ManifoldSpec

__all__ = [
    "FACES",
    "BOUNDARY_FLAGS",
    "ReferenceGrid",
    "JetSample",
    "MinorsVector",
    "DiagnosticsReport",
    "compute_jets",
    "compute_jet",
    "minors",
    "cofactor",
    "field_diagnostics",
    "nodal_gradients",
]

_AXES = "xyz"
FACES = tuple(f"{a}-{side}" for a in _AXES for side in ("min", "max"))
BOUNDARY_FLAGS = ("free", "dirichlet-u", "dirichlet-nu", "dirichlet-both")

_G = 0.5 / np.sqrt(3.0)
GAUSS_1D = np.array([0.5 - _G, 0.5 + _G])


def _face_axis(face: str) -> tuple[int, int]:
    axis = _AXES.index(face[0])
    return axis, (0 if face.endswith("min") else 1)


@dataclass(frozen=True, eq=False)
class ReferenceGrid:
    """Uniform Cartesian grid over an axis-aligned box.

    ``boundary`` maps face names (``"x-min"``, ``"y-max"``, ...) to one of
    :data:`BOUNDARY_FLAGS`; faces not listed are free.
    """

    dim: int
    cells: tuple
    origin: tuple = None
    extents: tuple = None
    boundary: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {self.dim}")
        cells = tuple(int(c) for c in self.cells)
        if len(cells) != self.dim or min(cells) < 1:
            raise ValueError(f"need {self.dim} positive cell counts, got {self.cells}")
        origin = (0.0,) * self.dim if self.origin is None else tuple(map(float, self.origin))
        extents = (1.0,) * self.dim if self.extents is None else tuple(map(float, self.extents))
        if len(origin) != self.dim or len(extents) != self.dim:
            raise ValueError("origin and extents must have one entry per axis")
        if min(extents) <= 0.0:
            raise ValueError("extents must be positive")
        for face, flag in self.boundary.items():
            if face not in FACES or _AXES.index(face[0]) >= self.dim:
                raise ValueError(f"unknown boundary face {face!r} for a {self.dim}-d grid")
            if flag not in BOUNDARY_FLAGS:
                raise ValueError(f"unknown boundary flag {flag!r} on {face}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "boundary", dict(self.boundary))
        self._build()

    # cached geometry; frozen dataclass so write through object.__setattr__
    def _build(self):
        d = self.dim
        cells = np.array(self.cells)
        spacing = np.array(self.extents) / cells
        node_shape = tuple(cells + 1)
        axes = [self.origin[i] + spacing[i] * np.arange(node_shape[i]) for i in range(d)]
        coords = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)

        corners = np.array(list(itertools.product((0, 1), repeat=d)))
        cell_idx = np.array(list(itertools.product(*[range(c) for c in cells])))
        conn = np.ravel_multi_index(
            tuple((cell_idx[:, None, :] + corners[None, :, :]).transpose(2, 0, 1)), node_shape
        )

        gauss = np.array(list(itertools.product(GAUSS_1D, repeat=d)))
        cell_volume = float(np.prod(spacing))
        gauss_w = np.full(len(gauss), cell_volume / len(gauss))

        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        put("spacing", spacing)
        put("node_shape", node_shape)
        put("n_nodes", int(np.prod(node_shape)))
        put("n_cells", int(np.prod(cells)))
        put("coords", coords)
        put("corners", corners)
        put("cell_index", cell_idx)
        put("connectivity", conn)
        put("gauss_points", gauss)
        put("gauss_weights", gauss_w)
        put("cell_volume", cell_volume)
        put("volume", float(np.prod(self.extents)))
        put("lumped_mass", self._lumped_mass())
        u_mask, nu_mask = self._dirichlet_masks()
        put("dirichlet_u", u_mask)
        put("dirichlet_nu", nu_mask)
        put("boundary_nodes", self._boundary_node_mask())

    def __hash__(self):
        return hash((self.dim, self.cells, self.origin, self.extents, tuple(sorted(self.boundary.items()))))

    def __eq__(self, other):
        if not isinstance(other, ReferenceGrid):
            return NotImplemented
        return (self.dim, self.cells, self.origin, self.extents, self.boundary) == (
            other.dim, other.cells, other.origin, other.extents, other.boundary)

    # --- shape functions -------------------------------------------------

    def shape_values(self, local):
        """Q1 shape functions at local points in [0, 1]^d: shape (P, 2^d)."""
        local = np.atleast_2d(local)
        c = self.corners[None, :, :]
        xi = local[:, None, :]
        return np.prod(np.where(c == 1, xi, 1.0 - xi), axis=-1)

    def shape_gradients(self, local):
        """Physical gradients of the shape functions: shape (P, 2^d, d)."""
        local = np.atleast_2d(local)
        c = self.corners[None, :, :]
        xi = local[:, None, :]
        factors = np.where(c == 1, xi, 1.0 - xi)
        dfac = np.where(c == 1, 1.0, -1.0)
        d = self.dim
        out = np.empty((local.shape[0], len(self.corners), d))
        for k in range(d):
            others = [i for i in range(d) if i != k]
            prod = np.prod(factors[..., others], axis=-1) if others else 1.0
            out[..., k] = dfac[..., k] * prod / self.spacing[k]
        return out

    def cell_origins(self, cells=None):
        cells = self._cells(cells)
        return np.array(self.origin) + self.cell_index[cells] * self.spacing

    def points(self, cells=None, local=None):
        """Physical coordinates of local points in the given cells: (C, P, d)."""
        local = self.gauss_points if local is None else np.atleast_2d(local)
        return self.cell_origins(cells)[:, None, :] + local[None, :, :] * self.spacing

    def _cells(self, cells):
        if cells is None:
            return np.arange(self.n_cells)
        cells = np.asarray(cells)
        if cells.dtype == bool:
            return np.flatnonzero(cells)
        return cells.ravel()

    # --- nodal bookkeeping ----------------------------------------------

    def _lumped_mass(self):
        mass = np.zeros(self.n_nodes)
        share = self.cell_volume / len(self.corners)
        np.add.at(mass, self.connectivity.ravel(), share)
        return mass

    def node_multi_index(self):
        return np.stack(np.unravel_index(np.arange(self.n_nodes), self.node_shape), axis=-1)

    def face_nodes(self, face):
        axis, side = _face_axis(face)
        idx = self.node_multi_index()[:, axis]
        return idx == (0 if side == 0 else self.cells[axis])

    def _boundary_node_mask(self):
        mask = np.zeros(self.n_nodes, dtype=bool)
        for face in FACES[: 2 * self.dim]:
            mask |= self.face_nodes(face)
        return mask

    def _dirichlet_masks(self):
        u_mask = np.zeros(self.n_nodes, dtype=bool)
        nu_mask = np.zeros(self.n_nodes, dtype=bool)
        for face, flag in self.boundary.items():
            nodes = self.face_nodes(face)
            if flag in ("dirichlet-u", "dirichlet-both"):
                u_mask |= nodes
            if flag in ("dirichlet-nu", "dirichlet-both"):
                nu_mask |= nodes
        return u_mask, nu_mask

    def interpolate(self, values, cells=None, local=None):
        """Q1 interpolant of nodal ``values`` at local points: (C, P, k)."""
        local = self.gauss_points if local is None else np.atleast_2d(local)
        cells = self._cells(cells)
        phi = self.shape_values(local)
        return np.matmul(phi, np.asarray(values, dtype=float)[self.connectivity[cells]])

    def gradient(self, values, cells=None, local=None):
        """Gradient of the Q1 interpolant: (C, P, k, d)."""
        local = self.gauss_points if local is None else np.atleast_2d(local)
        cells = self._cells(cells)
        dphi = self.shape_gradients(local)
        vals = np.asarray(values, dtype=float)[self.connectivity[cells]]  # (C, A, k)
        P, A, d = dphi.shape
        out = np.matmul(dphi.transpose(0, 2, 1).reshape(P * d, A), vals)  # (C, P*d, k)
        return out.reshape(len(vals), P, d, -1).transpose(0, 1, 3, 2)

    def assemble(self, cell_contrib, cells=None):
        """Scatter-add per-cell local-node contributions (C, 2^d, k) to nodes."""
        cells = self._cells(cells)
        contrib = np.asarray(cell_contrib)
        tail = contrib.shape[2:]
        flat = contrib.reshape(-1, int(np.prod(tail, dtype=int)))
        idx = self.connectivity[cells].ravel()
        cols = [np.bincount(idx, weights=flat[:, j], minlength=self.n_nodes) for j in range(flat.shape[1])]
        return np.stack(cols, axis=1).reshape((self.n_nodes,) + tail)

    # --- parts -----------------------------------------------------------

    def cell_mask(self, lower=None, upper=None):
        """Boolean mask of cells whose integer index lies in [lower, upper)."""
        lower = np.zeros(self.dim, int) if lower is None else np.asarray(lower)
        upper = np.array(self.cells) if upper is None else np.asarray(upper)
        idx = self.cell_index
        return np.all((idx >= lower) & (idx < upper), axis=1)

    def part_faces(self, part):
        """Boundary faces of a union of cells.

        Returns ``(cells, axis, side)`` arrays, one entry per face lying on
        the boundary of the part, with ``side`` 0 for the lower face.
        """
        mask = np.zeros(self.n_cells, dtype=bool)
        mask[self._cells(part)] = True
        shaped = mask.reshape(self.cells)
        out_cells, out_axis, out_side = [], [], []
        for axis in range(self.dim):
            for side, shift in ((0, -1), (1, 1)):
                neighbour = np.zeros_like(shaped)
                src = [slice(None)] * self.dim
                dst = [slice(None)] * self.dim
                if shift == -1:
                    dst[axis], src[axis] = slice(1, None), slice(None, -1)
                else:
                    dst[axis], src[axis] = slice(None, -1), slice(1, None)
                neighbour[tuple(dst)] = shaped[tuple(src)]
                faces = np.flatnonzero((shaped & ~neighbour).ravel())
                out_cells.append(faces)
                out_axis.append(np.full(len(faces), axis))
                out_side.append(np.full(len(faces), side))
        return np.concatenate(out_cells), np.concatenate(out_axis), np.concatenate(out_side)

    def face_quadrature(self, axis, side):
        """Local points and weights of the 2^(d-1)-point Gauss rule on a face."""
        others = [i for i in range(self.dim) if i != axis]
        pts = np.array(list(itertools.product(GAUSS_1D, repeat=self.dim - 1)))
        local = np.empty((len(pts), self.dim))
        local[:, others] = pts
        local[:, axis] = float(side)
        area = float(np.prod(self.spacing[others]))
        return local, np.full(len(pts), area / len(pts))

    def describe(self):
        return {
            "dim": self.dim,
            "cells": list(self.cells),
            "origin": list(self.origin),
            "extents": list(self.extents),
            "spacing": self.spacing.tolist(),
            "n_nodes": self.n_nodes,
            "boundary": dict(self.boundary),
        }


@dataclass
class JetSample:
    """First prolongation (x, u, F, nu, N) at one or many points.

    Arrays may carry leading batch axes. ``nu_raw_norm`` and
    ``nu_normal_rate`` describe the interpolant before retraction onto the
    sphere (its length and the normal component of its gradient); they
    default to the values of an exact jet (1 and 0). ``H`` is the
    displacement gradient ``F - I``; grids compute it from ``u - x`` so that
    energies near the identity keep their second-order digits.
    """

    x: np.ndarray
    u: np.ndarray
    F: np.ndarray
    nu: np.ndarray
    Ngrad: np.ndarray
    nu_raw_norm: np.ndarray = None
    nu_normal_rate: np.ndarray = None
    H: np.ndarray = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.F = np.asarray(self.F, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.Ngrad = np.asarray(self.Ngrad, dtype=float)
        if self.nu_raw_norm is None:
            self.nu_raw_norm = np.ones(self.F.shape[:-2])
        if self.nu_normal_rate is None:
            self.nu_normal_rate = np.zeros(self.F.shape[:-1])
        if self.H is None:
            self.H = self.F - np.eye(self.F.shape[-1])

    @property
    def dim(self):
        return self.F.shape[-1]

    @property
    def batch_shape(self):
        return self.F.shape[:-2]

    def __getitem__(self, idx):
        return JetSample(
            self.x[idx], self.u[idx], self.F[idx], self.nu[idx], self.Ngrad[idx],
            self.nu_raw_norm[idx], self.nu_normal_rate[idx], self.H[idx],
        )


def compute_jets(grid: ReferenceGrid, manifold: ManifoldSpec, u, nu, cells=None, local=None):
    """Jets of the discrete pair (u, nu) at local points of the given cells.

    The descriptor is interpolated in ambient coordinates and retracted
    onto M; ``Ngrad`` is the exact derivative of that retracted
    interpolant, hence tangent at the retracted value.
    Batch shape of the result is ``(n_cells, n_points)``.
    """
    x = grid.points(cells, local)
    uu = grid.interpolate(u, cells, local)
    H = grid.gradient(np.asarray(u, dtype=float) - grid.coords, cells, local)
    F = H + np.eye(grid.dim)
    y = grid.interpolate(nu, cells, local)
    Dy = grid.gradient(nu, cells, local)
    if manifold.is_sphere:
        norm = np.linalg.norm(y, axis=-1)
        nuv = y / norm[..., None]
        normal = np.einsum("...n,...nk->...k", nuv, Dy)
        Ngrad = (Dy - nuv[..., :, None] * normal[..., None, :]) / norm[..., None, None]
    else:
        norm = np.ones(y.shape[:-1])
        nuv = y
        normal = np.zeros(F.shape[:-1])
        Ngrad = Dy
    return JetSample(x, uu, F, nuv, Ngrad, norm, normal, H)


def compute_jet(grid, manifold, u, nu, cell: int, point: int) -> JetSample:
    """Jet at Gauss point ``point`` of cell ``cell``."""
    jets = compute_jets(grid, manifold, u, nu, cells=[cell], local=grid.gauss_points[point])
    return jets[0, 0]


@dataclass
class MinorsVector:
    """Minors of a deformation gradient: (F, cof F, det F); cof is None for d = 2."""

    F: np.ndarray
    cof: np.ndarray
    det: np.ndarray

    def norm(self):
        sq = np.sum(self.F**2, axis=(-2, -1)) + self.det**2
        if self.cof is not None:
            sq = sq + np.sum(self.cof**2, axis=(-2, -1))
        return np.sqrt(sq)

    def flat(self):
        parts = [self.F.reshape(self.F.shape[:-2] + (-1,))]
        if self.cof is not None:
            parts.append(self.cof.reshape(self.cof.shape[:-2] + (-1,)))
        parts.append(np.asarray(self.det)[..., None])
        return np.concatenate(parts, axis=-1)


def cofactor(F):
    """Cofactor matrix, cof F = det(F) F^{-T}, by explicit minors."""
    F = np.asarray(F, dtype=float)
    if F.shape[-1] == 2:
        cof = np.empty_like(F)
        cof[..., 0, 0] = F[..., 1, 1]
        cof[..., 0, 1] = -F[..., 1, 0]
        cof[..., 1, 0] = -F[..., 0, 1]
        cof[..., 1, 1] = F[..., 0, 0]
        return cof
    r0, r1, r2 = F[..., 0, :], F[..., 1, :], F[..., 2, :]
    return np.stack([np.cross(r1, r2), np.cross(r2, r0), np.cross(r0, r1)], axis=-2)


def _det(F):
    if F.shape[-1] == 2:
        return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    return np.sum(F[..., 0, :] * np.cross(F[..., 1, :], F[..., 2, :]), axis=-1)


def minors(F) -> MinorsVector:
    F = np.asarray(F, dtype=float)
    det = _det(F)
    cof = cofactor(F) if F.shape[-1] == 3 else None
    return MinorsVector(F.copy(), cof, det)


@dataclass
class DiagnosticsReport:
    min_det: float
    minors_norm_Lr: float
    ngrad_norm_Ls: float
    orientation_ok: bool
    r: float
    s: float

    def to_dict(self):
        return {
            "min_det": self.min_det,
            "minors_norm_Lr": self.minors_norm_Lr,
            "ngrad_norm_Ls": self.ngrad_norm_Ls,
            "orientation_ok": self.orientation_ok,
            "r": self.r,
            "s": self.s,
            "out_of_scope": ["null current boundary", "area inequality"],
        }


def field_diagnostics(grid, manifold, u, nu, r=2.0, s=2.0) -> DiagnosticsReport:
    """Discrete weak-diffeomorphism diagnostics over all Gauss points."""
    if r <= 1 or s <= 1:
        raise ValueError("exponents r and s must exceed 1")
    jets = compute_jets(grid, manifold, u, nu)
    m = minors(jets.F)
    w = grid.gauss_weights[None, :]
    minors_Lr = float(np.sum(w * m.norm() ** r) ** (1.0 / r))
    nnorm = np.sqrt(np.sum(jets.Ngrad**2, axis=(-2, -1)))
    ngrad_Ls = float(np.sum(w * nnorm**s) ** (1.0 / s))
    min_det = float(m.det.min())
    return DiagnosticsReport(min_det, minors_Lr, ngrad_Ls, bool(min_det > 0.0), float(r), float(s))


def nodal_gradients(grid, manifold, u, nu):
    """Node-averaged F and Ngrad, from corner values of every adjacent cell."""
    corner_jets = compute_jets(grid, manifold, u, nu, local=grid.corners.astype(float))
    F = grid.assemble(corner_jets.F)
    N = grid.assemble(corner_jets.Ngrad)
    count = grid.assemble(np.ones((grid.n_cells, len(grid.corners), 1)))[:, 0]
    return F / count[:, None, None], N / count[:, None, None]
