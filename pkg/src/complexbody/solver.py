"""Projected-gradient minimization of the discrete energy.

Each iteration moves along the lumped-mass preconditioned negative
gradient, ``u -= t a_u R_u / m`` and ``nu <- pi(nu - t a_nu R_nu / m)``,
where ``a_u`` and ``a_nu`` are Barzilai-Borwein lengths computed per field
and ``t`` starts at 1 and backtracks until Armijo's condition holds. Dirichlet nodes never
move. Trial states with ``det F <= det_floor`` at any quadrature point are
rejected.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .balances import energy_and_residuals, residual_norm
from .energy import OrientationError
from .fields import compute_jets
from .manifold import check_point, project_point

__all__ = [
    "SolverConfig",
    "BoundaryData",
    "SolveResult",
    "project_fields",
    "check_feasible",
    "descent_direction",
    "minimize",
    "history_csv",
]


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    tol_stat: float = 1e-8
    initial_step: float = 1e-2
    backtrack: float = 0.5
    armijo: float = 1e-4
    seed: int = 0
    max_backtracks: int = 60
    det_floor: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if not self.tol_stat > 0:
            raise ValueError("tol_stat must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")


@dataclass
class BoundaryData:
    """Nodal Dirichlet values; rows off the Dirichlet sets are ignored."""

    u: np.ndarray
    nu: np.ndarray


@dataclass
class SolveResult:
    u: np.ndarray
    nu: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    status: str
    history: list = field(default_factory=list)


def project_fields(grid, manifold, u, nu, boundary: BoundaryData | None = None):
    """Impose Dirichlet values and retract the descriptor onto M."""
    u = np.array(u, dtype=float)
    nu = np.array(nu, dtype=float)
    if boundary is not None:
        u[grid.dirichlet_u] = boundary.u[grid.dirichlet_u]
        nu[grid.dirichlet_nu] = boundary.nu[grid.dirichlet_nu]
    return u, project_point(manifold, nu)


def check_feasible(grid, manifold, u, nu, det_floor=0.0):
    """Raise OrientationError unless det F > det_floor at every Gauss point."""
    J = np.linalg.det(compute_jets(grid, manifold, u, nu).F)
    bad = ~(J > det_floor)
    if np.any(bad):
        cell = int(np.argwhere(bad)[0][0])
        raise OrientationError(f"det F = {J.min():.3e} at or below {det_floor:g} in cell {cell}", cell=cell)


def descent_direction(grid, Ru, Rn):
    """Lumped-mass preconditioned steepest descent direction."""
    m = grid.lumped_mass[:, None]
    return -Ru / m, -Rn / m


def _bb_scales(grid, prev, scale_u, scale_nu):
    """Barzilai-Borwein step lengths, one per field, in the lumped-mass metric."""
    m = grid.lumped_mass[:, None]
    out = []
    for s, y, old in ((prev[0], prev[2], scale_u), (prev[1], prev[3], scale_nu)):
        sy = float(np.sum(s * y))
        ss = float(np.sum(s * s * m))
        out.append(float(np.clip(ss / sy, 1e-12, 1e6)) if sy > 0 and ss > 0 else old)
    return out


def _trial(grid, manifold, u, nu, du, dnu, t):
    return u + t * du, project_point(manifold, nu + t * dnu)


def minimize(model, grid, manifold, u, nu, boundary: BoundaryData | None = None,
             config: SolverConfig = SolverConfig()) -> SolveResult:
    """Minimize the energy from the initial state ``(u, nu)``.

    The initial state is projected onto the constraints first and must be
    orientation preserving. Status is ``"converged"``, ``"max-iterations"``
    or ``"line-search-failure"``.
    """
    u, nu = project_fields(grid, manifold, u, nu, boundary)
    check_point(manifold, nu, tol=1e-10)
    check_feasible(grid, manifold, u, nu, config.det_floor)

    energy, Ru, Rn = energy_and_residuals(model, grid, manifold, u, nu)
    gnorm = residual_norm(grid, Ru, Rn)
    history = [(0, energy, gnorm, 0.0)]
    prev = None
    scale_u = scale_nu = config.initial_step
    roundoff = 1e-13

    for it in range(1, config.max_iterations + 1):
        if gnorm <= config.tol_stat:
            return SolveResult(u, nu, energy, gnorm, it - 1, True, "converged", history)
        du, dnu = descent_direction(grid, Ru, Rn)
        if prev is not None:
            scale_u, scale_nu = _bb_scales(grid, prev, scale_u, scale_nu)
        du, dnu = scale_u * du, scale_nu * dnu
        slope = float(np.sum(Ru * du) + np.sum(Rn * dnu))  # negative
        t = 1.0 if prev is not None else config.initial_step
        accepted = None
        for _ in range(config.max_backtracks):
            un, nun = _trial(grid, manifold, u, nu, du, dnu, t)
            try:
                e_new, Ru_new, Rn_new = energy_and_residuals(model, grid, manifold, un, nun,
                                                             det_floor=config.det_floor)
            except OrientationError:
                t *= config.backtrack
                continue
            if e_new <= energy + config.armijo * t * slope:
                accepted = (un, nun, e_new, Ru_new, Rn_new)
                break
            # decrease below the energy's round-off: judge it by the
            # trapezoidal estimate from the directional derivatives
            slope_new = float(np.sum(Ru_new * du) + np.sum(Rn_new * dnu))
            if (abs(e_new - energy) <= roundoff * max(1.0, abs(energy))
                    and 0.5 * (slope + slope_new) <= config.armijo * slope):
                accepted = (un, nun, e_new, Ru_new, Rn_new)
                break
            t *= config.backtrack
        if accepted is None:
            return SolveResult(u, nu, energy, gnorm, it - 1, False, "line-search-failure", history)
        un, nun, energy, Ru_new, Rn_new = accepted
        prev = (un - u, nun - nu, Ru_new - Ru, Rn_new - Rn)
        u, nu, Ru, Rn = un, nun, Ru_new, Rn_new
        gnorm = residual_norm(grid, Ru, Rn)
        history.append((it, energy, gnorm, t * max(scale_u, scale_nu)))

    converged = gnorm <= config.tol_stat
    status = "converged" if converged else "max-iterations"
    return SolveResult(u, nu, energy, gnorm, config.max_iterations, converged, status, history)


def history_csv(history) -> str:
    """Render history rows as CSV text; floats use repr for exact round trips."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iter", "energy", "grad_norm", "step"])
    for it, e, g, t in history:
        writer.writerow([int(it), repr(float(e)), repr(float(g)), repr(float(t))])
    return buf.getvalue()
