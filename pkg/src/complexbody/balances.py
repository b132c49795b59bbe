"""Discrete verification of the balance laws on a grid state.

All integrals use the grid's tensor-product Gauss rules: two points per
axis in cells, two points per in-plane axis on cell faces. Contact
actions on the boundary of a part are evaluated from the cell inside the
part. Rigid rates act on the actual place, ``h = c + q x u(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .actions import compute_actions, explicit_x_derivative
from .energy import OrientationError
from .fields import compute_jets, nodal_gradients
from .manifold import (
    Action,
    project_tangent,
    rotation_adjoint,
    rotation_adjoint_bundle,
    rotation_generator,
)

__all__ = [
    "BalanceReport",
    "Tolerances",
    "evaluate_state",
    "assembly_actions",
    "energy_and_residuals",
    "local_residuals",
    "residual_norm",
    "external_power",
    "power_invariance_gap",
    "integral_balances",
    "skew_defect",
    "skew_residual",
    "skew_applicable",
    "weak_residuals",
    "random_test_basis",
    "configurational_residual",
    "rigid_rate_power",
    "discrete_rigid_power",
    "observer_axes",
    "verify_state",
]

_EPS = np.zeros((3, 3, 3))
_EPS[0, 1, 2] = _EPS[1, 2, 0] = _EPS[2, 0, 1] = 1.0
_EPS[0, 2, 1] = _EPS[2, 1, 0] = _EPS[1, 0, 2] = -1.0


def _pad3(v):
    v = np.asarray(v, dtype=float)
    if v.shape[-1] == 3:
        return v
    out = np.zeros(v.shape[:-1] + (3,))
    out[..., : v.shape[-1]] = v
    return out


def evaluate_state(model, grid, manifold, u, nu, cells=None, local=None):
    """Jets and actions at local points (Gauss points by default) of cells."""
    jets = compute_jets(grid, manifold, u, nu, cells, local)
    return jets, compute_actions(model, manifold, jets)


def assembly_actions(manifold, jets, actions):
    """Microstress and (z - beta) as they enter the discrete weak form.

    On the sphere the descriptor at a quadrature point is the retraction of
    the Q1 interpolant ``y``; differentiating through the retraction
    rescales S by ``1/|y|`` and adds a curvature term to ``z - beta``.
    With these, the assembled weak form is the exact gradient of the
    discrete energy.
    """
    zb = actions.z - actions.beta
    if not manifold.is_sphere:
        return actions.S, zb
    S = actions.S
    norm = jets.nu_raw_norm
    S_asm = S / norm[..., None, None]
    SN = np.sum(S * jets.Ngrad, axis=(-2, -1))
    curv = (-np.einsum("...nk,...k->...n", S, jets.nu_normal_rate) / (norm**2)[..., None]
            - (SN / norm)[..., None] * jets.nu)
    return S_asm, zb / norm[..., None] + curv


def _weak_form(grid, flux, source):
    """Cell contributions int(flux Dphi_a + source phi_a) at Gauss points.

    ``flux`` is (C, P, k, d) and ``source`` (C, P, k); returns (C, 2^d, k).
    """
    wg = grid.gauss_weights
    dphi = grid.shape_gradients(grid.gauss_points) * wg[:, None, None]  # (P, A, d)
    phi = grid.shape_values(grid.gauss_points) * wg[:, None]  # (P, A)
    C, P, k, d = flux.shape
    A = phi.shape[1]
    lhs = flux.transpose(0, 2, 1, 3).reshape(C * k, P * d)
    out = lhs @ dphi.transpose(0, 2, 1).reshape(P * d, A)
    out = out + source.transpose(0, 2, 1).reshape(C * k, P) @ phi
    return out.reshape(C, k, A).transpose(0, 2, 1)


def _nodal_forms(grid, P, b, S, zb, cells=None):
    """Unprojected nodal forms int(P Dphi - b phi) and int(S Dphi + zb phi)."""
    Ru = _weak_form(grid, P, -b)
    Rn = _weak_form(grid, S, zb)
    return grid.assemble(Ru, cells), grid.assemble(Rn, cells)


def energy_and_residuals(model, grid, manifold, u, nu, mask=True, det_floor=0.0):
    """Discrete energy and its nodal gradient ``(E, R_u, R_nu)``.

    ``R_nu`` is tangent-projected at the nodal descriptor. Dirichlet rows
    are zeroed when ``mask`` is true. Free boundary nodes carry no traction
    term. Raises OrientationError when det F <= det_floor at a Gauss point.
    """
    jets = compute_jets(grid, manifold, u, nu)
    J = np.linalg.det(jets.F)
    bad = ~(J > det_floor)
    if np.any(bad):
        cell = int(np.argwhere(bad)[0][0])
        raise OrientationError(f"det F = {J.min():.3e} at or below {det_floor:g} in cell {cell}", cell=cell)
    act = compute_actions(model, manifold, jets)
    energy = float(np.einsum("cp,p->", act.energy, grid.gauss_weights))
    S_asm, zb_asm = assembly_actions(manifold, jets, act)
    Ru, Rn = _nodal_forms(grid, act.P, act.b, S_asm, zb_asm)
    Rn = project_tangent(manifold, np.asarray(nu), Rn)
    if mask:
        Ru[grid.dirichlet_u] = 0.0
        Rn[grid.dirichlet_nu] = 0.0
    return energy, Ru, Rn


def local_residuals(model, grid, manifold, u, nu, mask=True):
    """Assembled weak residuals (R_u, R_nu) at the nodes."""
    _, Ru, Rn = energy_and_residuals(model, grid, manifold, u, nu, mask)
    return Ru, Rn


def residual_norm(grid, Ru, Rn):
    """max_a |(R_u, R_nu)_a| / m_a, the stationarity measure."""
    sq = np.sum(Ru**2, axis=1) + np.sum(Rn**2, axis=1)
    return float(np.max(np.sqrt(sq) / grid.lumped_mass))


# --- external power and integral balances -----------------------------------


def _part_cells(grid, part):
    if part is None:
        return np.arange(grid.n_cells)
    return grid._cells(part)


def _check_tangent(manifold, nu, upsilon, tol=1e-10):
    if upsilon is None or not manifold.is_sphere:
        return
    dots = np.abs(np.sum(np.asarray(upsilon) * np.asarray(nu), axis=-1))
    if dots.size and dots.max() > tol:
        raise ValueError(f"substructural rate is not tangent (|v.nu| = {dots.max():.2e})")


def _rates(grid, manifold, jets, cells, local, h, upsilon, c, q):
    d = grid.dim
    hp = np.zeros(jets.u.shape)
    vp = np.zeros(jets.nu.shape)
    if h is not None:
        hp = hp + grid.interpolate(h, cells, local)
    if upsilon is not None:
        vp = vp + grid.interpolate(upsilon, cells, local)
    if c is not None:
        hp = hp + np.asarray(c, dtype=float)[:d]
    if q is not None:
        q = np.asarray(q, dtype=float)
        hp = hp + np.cross(q, _pad3(jets.u))[..., :d]
        vp = vp + rotation_generator(manifold, jets.nu, q)
    return hp, vp


def _face_groups(grid, cells):
    fcells, faxis, fside = grid.part_faces(cells)
    for axis in range(grid.dim):
        for side in (0, 1):
            sel = (faxis == axis) & (fside == side)
            if np.any(sel):
                yield fcells[sel], axis, side


def _contact(act, axis, side):
    sign = 1.0 if side == 1 else -1.0
    return sign * act.P[..., :, axis], sign * act.S[..., :, axis]


def external_power(model, grid, manifold, u, nu, part=None, h=None, upsilon=None, c=None, q=None):
    """Power of bulk and contact actions on a part over the rates (h, upsilon).

    ``h`` and ``upsilon`` are nodal fields (Q1-interpolated); ``c`` and
    ``q`` add the rigid rates ``c + q x u(x)`` and ``A(nu) q`` pointwise.
    """
    _check_tangent(manifold, nu, upsilon)
    cells = _part_cells(grid, part)
    jets, act = evaluate_state(model, grid, manifold, u, nu, cells)
    hp, vp = _rates(grid, manifold, jets, cells, None, h, upsilon, c, q)
    bulk = np.einsum("cpi,cpi,p->", act.b, hp, grid.gauss_weights)
    bulk += np.einsum("cpi,cpi,p->", act.beta, vp, grid.gauss_weights)
    contact = 0.0
    for fcells, axis, side in _face_groups(grid, cells):
        local, wf = grid.face_quadrature(axis, side)
        fj, fa = evaluate_state(model, grid, manifold, u, nu, fcells, local)
        fh, fv = _rates(grid, manifold, fj, fcells, local, h, upsilon, c, q)
        Pn, Sn = _contact(fa, axis, side)
        contact += np.einsum("cpi,cpi,p->", Pn, fh, wf) + np.einsum("cpi,cpi,p->", Sn, fv, wf)
    return float(bulk + contact)


def power_invariance_gap(model, grid, manifold, u, nu, part=None, h=None, upsilon=None, c=None, q=None):
    """P(h*, upsilon*) - P(h, upsilon) under the observer change (c, q)."""
    moved = external_power(model, grid, manifold, u, nu, part, h, upsilon, c, q)
    return moved - external_power(model, grid, manifold, u, nu, part, h, upsilon)


def integral_balances(model, grid, manifold, u, nu, part=None, x0=None):
    """Left-hand sides of the integral force and torque balances on a part.

    Returns ``(force, torque)``; ``force`` has d components and ``torque``
    three, with lever arms measured in the actual place from ``x0``.
    """
    cells = _part_cells(grid, part)
    x0 = np.zeros(3) if x0 is None else _pad3(x0)
    jets, act = evaluate_state(model, grid, manifold, u, nu, cells)
    wg = grid.gauss_weights
    force = np.einsum("cpi,p->i", act.b, wg)
    arm = _pad3(jets.u) - x0
    torque = np.einsum("cpi,p->i", np.cross(arm, _pad3(act.b)), wg)
    torque += np.einsum("cpi,p->i", rotation_adjoint(manifold, jets.nu, act.beta), wg)
    for fcells, axis, side in _face_groups(grid, cells):
        local, wf = grid.face_quadrature(axis, side)
        fj, fa = evaluate_state(model, grid, manifold, u, nu, fcells, local)
        Pn, Sn = _contact(fa, axis, side)
        force += np.einsum("cpi,p->i", Pn, wf)
        torque += np.einsum("cpi,p->i", np.cross(_pad3(fj.u) - x0, _pad3(Pn)), wf)
        torque += np.einsum("cpi,p->i", rotation_adjoint(manifold, fj.nu, Sn), wf)
    return force, torque


def observer_axes(model, manifold, d):
    """Rotation axes q under which the internal energy is invariant.

    In two dimensions only rotations about e3 keep the body in its plane;
    none qualify when the coupling breaks frame indifference.
    """
    if not skew_applicable(model, manifold):
        return []
    return [np.array([0.0, 0.0, 1.0])] if d == 2 else list(np.eye(3))


def rigid_rate_power(model, grid, manifold, u, nu, part=None):
    """Largest |P_ext(c + q x u, A q)| over unit translations c and unit
    observer rotation axes q."""
    d = grid.dim
    worst = 0.0
    for k in range(d):
        c = np.zeros(d)
        c[k] = 1.0
        worst = max(worst, abs(external_power(model, grid, manifold, u, nu, part, c=c)))
    for q in observer_axes(model, manifold, d):
        worst = max(worst, abs(external_power(model, grid, manifold, u, nu, part, q=q)))
    return worst


def _rigid_rates(grid, manifold, u, nu, model):
    d = grid.dim
    for k in range(d):
        c = np.zeros(d)
        c[k] = 1.0
        yield np.broadcast_to(c, u.shape), np.zeros(np.shape(nu))
    for q in observer_axes(model, manifold, d):
        yield np.cross(q, _pad3(u))[:, :d], rotation_generator(manifold, np.asarray(nu), q)


def discrete_rigid_power(model, grid, manifold, u, nu):
    """Largest power of the discrete external actions over unit rigid rates.

    The external actions are the nodal loads plus the reactions at
    Dirichlet nodes, the tractions consistent with the discrete weak form.
    Each power is divided by the lumped L1 norm of the rate, so at a
    stationary state it is bounded by the residual norm on free nodes
    whenever the discrete internal energy is invariant under the rate.
    """
    _, Ru, Rn = energy_and_residuals(model, grid, manifold, u, nu, mask=False)
    unloaded = replace(model, body_force=None, micro_force=None)
    _, Iu, In = energy_and_residuals(unloaded, grid, manifold, u, nu, mask=False)
    Lu, Ln = Iu - Ru, In - Rn
    Du, Dn = grid.dirichlet_u[:, None], grid.dirichlet_nu[:, None]
    worst = 0.0
    for hu, hn in _rigid_rates(grid, manifold, u, nu, model):
        power = np.sum((Lu + np.where(Du, Ru, 0.0)) * hu) + np.sum((Ln + np.where(Dn, Rn, 0.0)) * hn)
        norm = _lumped_l1(grid, (hu, hn))
        worst = max(worst, abs(float(power)) / norm)
    return worst


# --- skew identity -----------------------------------------------------------


def skew_applicable(model, manifold):
    """True when the internal energy is invariant under the observer action."""
    if model.coupling_axis is not None and model.alpha != 0.0:
        return False
    return manifold.action is Action.VECTOR or model.alpha == 0.0


def skew_defect(model, manifold, jet, actions=None):
    """Per-jet ``(|skw(P F^T) - (1/2) e w|, |P||F|)``, w = A* z + (DA*) S.

    ``(e w)_ij = eps_ijk w_k``. In two dimensions only the in-plane
    rotation is an observer change, so only the third component of w
    enters.
    """
    act = compute_actions(model, manifold, jet) if actions is None else actions
    d = jet.dim
    PFt = act.P @ np.swapaxes(jet.F, -1, -2)
    skw = 0.5 * (PFt - np.swapaxes(PFt, -1, -2))
    astar, dastar = rotation_adjoint_bundle(manifold, jet.nu, act.z, act.S, jet.Ngrad)
    w = astar + dastar
    target = 0.5 * np.einsum("ijk,...k->...ij", _EPS, w)
    if d == 2:
        target = target[..., :2, :2]
    defect = np.sqrt(np.sum((skw - target) ** 2, axis=(-2, -1)))
    scale = np.linalg.norm(act.P, axis=(-2, -1)) * np.linalg.norm(jet.F, axis=(-2, -1))
    return defect, scale


def _relative(defect, scale):
    """defect / scale, read as 0 where both vanish."""
    safe = np.where(scale > 0, scale, 1.0)
    return np.where(scale > 0, defect / safe, np.where(defect > 0, np.inf, 0.0))


def skew_residual(model, grid, manifold, u, nu):
    """Per-cell maximum over Gauss points of the skew-identity defect.

    Returns ``(defect, relative)`` arrays of length ``n_cells``; the
    relative defect divides by ``|P||F| + |z| + |N||S|``, the size of the
    two sides of the identity.
    """
    jets, act = evaluate_state(model, grid, manifold, u, nu)
    defect, scale = skew_defect(model, manifold, jets, act)
    scale = (scale + np.linalg.norm(act.z, axis=-1)
             + np.linalg.norm(jets.Ngrad, axis=(-2, -1)) * np.linalg.norm(act.S, axis=(-2, -1)))
    rel = _relative(defect, scale)
    return defect.max(axis=1), rel.max(axis=1)


# --- weak residuals ----------------------------------------------------------


def _lumped_l1(grid, fields):
    total = np.zeros(grid.n_nodes)
    for f in fields:
        if f is not None:
            total += np.linalg.norm(np.asarray(f), axis=-1)
    return float(grid.lumped_mass @ total)


def weak_residuals(model, grid, manifold, u, nu, test_pairs=(), xi_fields=()):
    """Normalized weak Euler-Lagrange and substructural residuals.

    ``test_pairs`` holds nodal pairs ``(h, upsilon)`` and ``xi_fields``
    nodal tangent fields. Test fields are set to zero on Dirichlet nodes.
    Each residual is ``|int(...)|`` divided by the lumped L1 norm of the
    test field, and the maximum over the basis is returned.
    """
    Ru, Rn = local_residuals(model, grid, manifold, u, nu, mask=False)
    weak_el = 0.0
    for h, ups in test_pairs:
        _check_tangent(manifold, nu, ups)
        h = np.zeros_like(Ru) if h is None else np.where(grid.dirichlet_u[:, None], 0.0, h)
        ups = np.zeros_like(Rn) if ups is None else np.where(grid.dirichlet_nu[:, None], 0.0, ups)
        norm = _lumped_l1(grid, (h, ups))
        if norm > 0:
            weak_el = max(weak_el, abs(float(np.sum(Ru * h) + np.sum(Rn * ups))) / norm)
    weak_sub = 0.0
    for xi in xi_fields:
        _check_tangent(manifold, nu, xi)
        xi = np.where(grid.dirichlet_nu[:, None], 0.0, xi)
        norm = _lumped_l1(grid, (xi,))
        if norm > 0:
            weak_sub = max(weak_sub, abs(float(np.sum(Rn * xi))) / norm)
    return weak_el, weak_sub


def random_test_basis(grid, manifold, nu, size=20, seed=0):
    """Hat functions at random interior nodes plus three smooth bumps.

    Returns ``(test_pairs, xi_fields)`` with ``size`` entries each; the
    substructural components are tangent at the nodal descriptor.
    """
    rng = np.random.default_rng(seed)
    nu = np.asarray(nu)
    d, n = grid.dim, manifold.dim
    interior = np.flatnonzero(~grid.boundary_nodes)
    if interior.size == 0:
        interior = np.arange(grid.n_nodes)
    lo = np.array(grid.origin)
    L = np.array(grid.extents)
    bump_base = np.prod(np.sin(np.pi * (grid.coords - lo) / L), axis=1)
    pairs, xis = [], []
    n_bumps = min(3, size)
    for k in range(size):
        if k < size - n_bumps:
            profile = np.zeros(grid.n_nodes)
            profile[rng.choice(interior)] = 1.0
        else:
            freq = rng.integers(1, 3, d)
            profile = np.prod(np.sin(np.pi * freq * (grid.coords - lo) / L), axis=1) * bump_base
        h = profile[:, None] * rng.standard_normal(d)
        ups = project_tangent(manifold, nu, profile[:, None] * rng.standard_normal(n))
        xi = project_tangent(manifold, nu, profile[:, None] * rng.standard_normal(n))
        pairs.append((h, ups))
        xis.append(xi)
    return pairs, xis


# --- configurational balance -------------------------------------------------


def configurational_residual(model, grid, manifold, u, nu):
    """Lumped nodal ``Div P_esh - d_x e`` and the chain-rule identity defect.

    Returns ``(residual, defect, interior)``: (n_nodes, d) arrays, zero on
    boundary nodes, and the interior-node mask. The defect adds
    ``F^T (Div P + b) + N^T (Div S - z + beta)`` with the same lumped
    divergences and vanishes at discretization order for any smooth state.
    """
    jets, act = evaluate_state(model, grid, manifold, u, nu)
    phi = grid.shape_values(grid.gauss_points)
    dphi = grid.shape_gradients(grid.gauss_points)
    wg = grid.gauss_weights
    mass = grid.lumped_mass[:, None]
    dxe = explicit_x_derivative(model, jets)
    div_esh = -grid.assemble(np.einsum("cpij,paj,p->cai", act.eshelby, dphi, wg)) / mass
    dx_term = grid.assemble(np.einsum("cpi,pa,p->cai", dxe, phi, wg)) / mass
    Ru, Rn = _nodal_forms(grid, act.P, act.b, act.S, act.z - act.beta)
    momentum = -Ru / mass
    micro = -Rn / mass
    Fn, Nn = nodal_gradients(grid, manifold, u, nu)
    residual = div_esh - dx_term
    defect = (residual + np.einsum("aki,ak->ai", Fn, momentum)
              + np.einsum("aki,ak->ai", Nn, micro))
    interior = ~grid.boundary_nodes
    residual[~interior] = 0.0
    defect[~interior] = 0.0
    return residual, defect, interior


def _rms(field, mask):
    if not np.any(mask):
        return 0.0
    return float(np.sqrt(np.mean(np.sum(field[mask] ** 2, axis=-1))))


# --- report ------------------------------------------------------------------


# configurational tolerance C h: C is pinned from the identity-defect study
# on manufactured smooth fields (defect / h stays below 0.14 from 16^2 on)
CONFIG_CONSTANT = 0.25


@dataclass(frozen=True)
class Tolerances:
    """Pass thresholds of :func:`verify_state`.

    ``equilibrium`` applies to quantities built from the exact discrete
    gradient: nodal and weak residuals and the rigid-rate power of the
    consistent discrete actions. ``discretization`` and
    ``configurational`` multiply the grid spacing and the stress scale for
    quantities that only converge with the mesh: the integral balances and
    rigid-rate power evaluated with face quadrature, and the lumped
    configurational residual.
    """

    equilibrium: float = 1e-7
    discretization: float = 2.0
    configurational: float = CONFIG_CONSTANT
    skew: float = 1e-8
    identity: float = 1e-12

    @classmethod
    def from_solver(cls, tol_stat, scale=1.0):
        return cls(equilibrium=10.0 * tol_stat * scale, discretization=2.0 * scale,
                   configurational=CONFIG_CONSTANT * scale, skew=1e-8 * scale,
                   identity=1e-12 * scale)


@dataclass
class BalanceReport:
    force_residual: list
    force_norm: float
    torque_residual: list
    torque_norm: float
    momentum_residual_norm: float
    micro_residual_norm: float
    skew_residual_norm: float
    skew_applicable: bool
    weak_el_residual: float
    weak_sub_residual: float
    config_residual_norm: float
    config_identity_defect: float
    rigid_power: float
    rigid_power_quadrature: float
    observer_gap_defect: float
    micro_integral: list
    thresholds: dict
    per_part: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        out = dict(self.__dict__)
        out["passed"] = self.passed
        return out


def _parts(grid):
    half = np.array(grid.cells)
    half[0] = max(1, half[0] // 2)
    lower = grid.cell_mask(upper=half)
    parts = {"body": np.ones(grid.n_cells, dtype=bool)}
    if np.any(~lower):
        parts["lower-x"] = lower
        parts["upper-x"] = ~lower
    return parts


def verify_state(model, grid, manifold, u, nu, tolerances: Tolerances = None, basis_size=20, seed=0):
    """Evaluate every balance on a state and compare against tolerances."""
    tol = Tolerances() if tolerances is None else tolerances
    h = float(np.max(grid.spacing))
    mass = grid.lumped_mass

    Ru, Rn = local_residuals(model, grid, manifold, u, nu)
    mom = float(np.max(np.linalg.norm(Ru, axis=1) / mass))
    micro = float(np.max(np.linalg.norm(Rn, axis=1) / mass))

    pairs, xis = random_test_basis(grid, manifold, nu, basis_size, seed)
    weak_el, weak_sub = weak_residuals(model, grid, manifold, u, nu, pairs, xis)

    jets, act = evaluate_state(model, grid, manifold, u, nu)
    stress_scale = max(1.0, float(np.max(np.abs(act.P))), float(np.max(np.abs(act.eshelby))),
                       float(np.max(np.abs(act.S))))
    disc = tol.discretization * h * stress_scale + tol.equilibrium
    tol_config = tol.configurational * h * stress_scale

    applicable = skew_applicable(model, manifold)
    _, skew_rel = skew_residual(model, grid, manifold, u, nu)
    skew = float(skew_rel.max())

    residual, defect, interior = configurational_residual(model, grid, manifold, u, nu)
    conf = _rms(residual, interior)
    conf_defect = _rms(defect, interior)

    per_part = {}
    force = torque = None
    power = 0.0
    gap_defect = 0.0
    rng = np.random.default_rng(seed)
    for name, part in _parts(grid).items():
        f, t = integral_balances(model, grid, manifold, u, nu, part)
        p = rigid_rate_power(model, grid, manifold, u, nu, part)
        c = rng.standard_normal(grid.dim)
        q = rng.standard_normal(3)
        gap = power_invariance_gap(model, grid, manifold, u, nu, part, c=c, q=q)
        gd = abs(gap - (c @ f + q @ t)) / max(1.0, abs(gap))
        per_part[name] = {"force": f.tolist(), "torque": t.tolist(), "rigid_power_quadrature": p,
                          "observer_gap_defect": gd}
        if name == "body":
            force, torque = f, t
        power = max(power, p)
        gap_defect = max(gap_defect, gd)

    _, Rraw = _nodal_forms(grid, act.P, act.b, act.S, act.z - act.beta)
    micro_integral = (-Rraw.sum(axis=0)).tolist()
    rigid = discrete_rigid_power(model, grid, manifold, u, nu)

    vol = grid.volume
    diam = float(np.linalg.norm(grid.extents))
    axes = observer_axes(model, manifold, grid.dim)
    torque_obs = max((abs(float(q @ torque)) for q in axes), default=0.0)
    thresholds = {
        "equilibrium": tol.equilibrium,
        "discretization": disc,
        "configurational": tol_config,
        "skew": tol.skew,
        "identity": tol.identity,
    }
    checks = [
        ("momentum", mom, tol.equilibrium),
        ("micro", micro, tol.equilibrium),
        ("weak_el", weak_el, tol.equilibrium),
        ("weak_sub", weak_sub, tol.equilibrium),
        ("force", float(np.linalg.norm(force)) / vol, disc),
        ("torque", torque_obs / (vol * diam), disc),
        ("rigid_rate_power", rigid, tol.equilibrium),
        ("rigid_rate_power_quadrature", power / (vol * diam), disc),
        ("configurational", conf, tol_config),
        ("observer_gap_identity", gap_defect, tol.identity),
    ]
    if applicable:
        checks.append(("skew", skew, tol.skew))
    failures = [name for name, value, limit in checks if not value <= limit]

    return BalanceReport(
        force_residual=force.tolist(),
        force_norm=float(np.linalg.norm(force)),
        torque_residual=torque.tolist(),
        torque_norm=float(np.linalg.norm(torque)),
        momentum_residual_norm=mom,
        micro_residual_norm=micro,
        skew_residual_norm=skew,
        skew_applicable=applicable,
        weak_el_residual=weak_el,
        weak_sub_residual=weak_sub,
        config_residual_norm=conf,
        config_identity_defect=conf_defect,
        rigid_power=rigid,
        rigid_power_quadrature=power / (vol * diam),
        observer_gap_defect=gap_defect,
        micro_integral=micro_integral,
        thresholds=thresholds,
        per_part=per_part,
        failures=failures,
    )
