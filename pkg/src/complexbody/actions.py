"""Standard and substructural actions derived from the energy.

``P = d_F e``, ``b = -d_u e``, ``S = d_N e``, ``z = d_nu e^i`` and
``beta = -d_nu e^e``, where derivatives in ``nu`` are tangent-projected
ambient gradients. :func:`fd_oracle` recomputes every one of them by
central differences of :func:`~complexbody.energy.density_eval`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel, _check_orientation, density_eval
from .fields import JetSample, cofactor, minors
from .manifold import ManifoldSpec, kernel_basis, project_point, project_tangent, tangent_basis

__all__ = [
    "ActionState",
    "compute_actions",
    "fd_oracle",
    "decompose_self_action",
    "eshelby_tensor",
    "explicit_x_derivative",
    "max_relative_deviation",
    "random_jets",
]


@dataclass
class ActionState:
    P: np.ndarray
    S: np.ndarray
    z: np.ndarray
    beta: np.ndarray
    b: np.ndarray
    eshelby: np.ndarray
    energy: np.ndarray

    def components(self):
        return {"P": self.P, "S": self.S, "z": self.z, "beta": self.beta, "b": self.b,
                "eshelby": self.eshelby}


def _tangent_columns(manifold, nu, A):
    """Project every column of (..., N, d) matrices onto T_nu M."""
    if not manifold.is_sphere:
        return A
    return A - nu[..., :, None] * np.einsum("...n,...nk->...k", nu, A)[..., None, :]


def compute_actions(model: EnergyModel, manifold: ManifoldSpec, jet: JetSample) -> ActionState:
    """Closed-form actions of the built-in density at a (batched) jet."""
    d = jet.dim
    F, N, nu = jet.F, jet.Ngrad, jet.nu
    m = minors(F)
    J = m.det
    _check_orientation(J)
    w = model.weight.value(jet.x)[..., None, None]
    cof = m.cof if d == 3 else cofactor(F)

    # delta |cof F|^r: d(|cof|^2 / 2)/dF is F(|F|^2 I - F^T F) in 3-d and F in 2-d
    if d == 3:
        C = np.swapaxes(F, -1, -2) @ F
        trC = np.trace(C, axis1=-2, axis2=-1)[..., None, None]
        G = trC * F - F @ C
        cnorm = np.sqrt(np.sum(cof * cof, axis=(-2, -1)))
    else:
        G = F
        cnorm = np.sqrt(np.sum(F * F, axis=(-2, -1)))
    dJ = model.c4 * (J - 1.0 / J) - model.p0(d) / J
    a = model.coupling_vector(nu, d)
    aa = a[..., :, None] * a[..., None, :]
    P = model.mu * F + model.delta * model.r * (cnorm ** (model.r - 2))[..., None, None] * G
    P = P + dJ[..., None, None] * cof + model.alpha * aa @ F
    P = w * P

    nn = np.sqrt(np.sum(N * N, axis=(-2, -1)))
    s = model.s
    if s == 2.0:
        fac = np.ones_like(nn)
    else:
        fac = np.where(nn > 0, np.where(nn > 0, nn, 1.0) ** (s - 2), 0.0)
    S = _tangent_columns(manifold, nu, w * model.kappa * fac[..., None, None] * N)

    zamb = np.zeros(nu.shape)
    if model.coupling_axis is None and model.alpha != 0.0:
        zamb[..., :d] = model.alpha * np.einsum("...ij,...kj,...k->...i", F, F, a)
    z = project_tangent(manifold, nu, w[..., 0] * zamb)
    beta = project_tangent(manifold, nu, np.broadcast_to(model.beta0(nu.shape[-1]), nu.shape))
    b = np.broadcast_to(model.b0(d), jet.u.shape).copy()

    e = density_eval(model, jet)
    esh = _eshelby(e, F, P, N, S)
    return ActionState(P, S, z, beta, b, esh, e)


def _eshelby(e, F, P, N, S):
    d = F.shape[-1]
    eye = np.eye(d)
    return (np.asarray(e)[..., None, None] * eye
            - np.swapaxes(F, -1, -2) @ P
            - np.swapaxes(N, -1, -2) @ S)


def eshelby_tensor(model, manifold, jet) -> np.ndarray:
    """Extended Hamilton-Eshelby tensor e I - F^T P - N^T S."""
    return compute_actions(model, manifold, jet).eshelby


def explicit_x_derivative(model, jet):
    """Partial derivative of the density in x at fixed (u, F, nu, N)."""
    w = model.weight.value(jet.x)
    if model.weight.is_constant:
        return np.zeros(jet.x.shape)
    internal = density_eval(model, jet, part="internal") / w
    return model.weight.gradient(jet.x) * internal[..., None]


def fd_oracle(model: EnergyModel, manifold: ManifoldSpec, jet: JetSample, step: float = 1e-5) -> ActionState:
    """Central-difference actions at a single (unbatched) jet.

    Derivatives in nu follow retracted curves pi(nu +- t tau) along an
    orthonormal tangent basis; the descriptor gradient is held fixed.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    if jet.F.ndim != 2:
        raise ValueError("fd_oracle works on one jet at a time")
    n = jet.nu.shape[-1]

    def batch(**changes):
        # every perturbed jet in one batched evaluation
        k = len(next(iter(changes.values())))
        fields = {name: np.broadcast_to(getattr(jet, name), (k,) + getattr(jet, name).shape)
                  for name in ("x", "u", "F", "nu", "Ngrad")}
        fields.update(changes)
        return JetSample(**fields)

    def diff(name, part="total"):
        base = getattr(jet, name)
        k = base.size
        E = step * np.eye(k).reshape((k,) + base.shape)
        try:
            vals = density_eval(model, batch(**{name: np.concatenate([base + E, base - E])}), part)
        except ValueError as exc:
            raise ValueError(f"finite-difference step {step} leaves the domain det F > 0") from exc
        return ((vals[:k] - vals[k:]) / (2 * step)).reshape(base.shape)

    P = diff("F")
    b = -diff("u")
    S = _tangent_columns(manifold, jet.nu, diff("Ngrad"))

    basis = tangent_basis(manifold, jet.nu)
    tau = basis.T  # (k, n)
    k = tau.shape[0]
    z = np.zeros(n)
    beta = np.zeros(n)
    if k:
        nus = project_point(manifold, np.concatenate([jet.nu + step * tau, jet.nu - step * tau]))
        moved = batch(nu=nus)
        dz = density_eval(model, moved, "internal")
        db = density_eval(model, moved, "external")
        z = ((dz[:k] - dz[k:]) / (2 * step)) @ tau
        beta = -((db[:k] - db[k:]) / (2 * step)) @ tau
    e = density_eval(model, jet)
    return ActionState(P, S, z, beta, b, _eshelby(e, jet.F, P, jet.Ngrad, S), e)


def random_jets(manifold: ManifoldSpec, d: int, count: int, rng, spread: float = 0.4):
    """Random single-point jets with det F > 0 for derivative checks.

    F has log-uniform singular values in [exp(-spread), exp(spread)] between
    random rotations; Ngrad has tangent columns.
    """
    jets = []
    for _ in range(count):
        U, _, Vt = np.linalg.svd(rng.standard_normal((d, d)))
        if np.linalg.det(U) < 0:
            U[:, 0] *= -1
        if np.linalg.det(Vt) < 0:
            Vt[0] *= -1
        F = U @ np.diag(np.exp(rng.uniform(-spread, spread, d))) @ Vt
        raw = rng.standard_normal(manifold.dim)
        nu = project_point(manifold, raw) if manifold.is_sphere else raw
        N = _tangent_columns(manifold, nu, rng.standard_normal((manifold.dim, d)))
        jets.append(JetSample(rng.uniform(0.0, 1.0, d), rng.standard_normal(d), F, nu, N))
    return jets


def max_relative_deviation(a: ActionState, b: ActionState, floor: float = 1.0) -> float:
    """Largest ||a_k - b_k|| / max(||b_k||, floor) over the action components."""
    worst = 0.0
    for key, ref in b.components().items():
        got = a.components()[key]
        ref_norm = float(np.linalg.norm(ref))
        worst = max(worst, float(np.linalg.norm(np.asarray(got) - ref)) / max(ref_norm, floor))
    return worst


def decompose_self_action(manifold: ManifoldSpec, nu, z):
    """Split z = z1 + z2 with z2 the orthogonal projection onto Ker A*(nu)."""
    nu = np.asarray(nu, dtype=float)
    z = np.asarray(z, dtype=float)
    K = kernel_basis(manifold, nu)
    z2 = K @ (K.T @ z)
    return z - z2, z2
