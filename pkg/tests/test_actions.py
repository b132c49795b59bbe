import numpy as np
import pytest

from complexbody.actions import (
    compute_actions,
    decompose_self_action,
    eshelby_tensor,
    explicit_x_derivative,
    fd_oracle,
    max_relative_deviation,
    random_jets,
)
from complexbody.energy import EnergyModel, Weight, density_eval
from complexbody.fields import JetSample
from complexbody.manifold import parse_manifold, rotation_adjoint

from conftest import full_model


@pytest.mark.parametrize("d", [2, 3])
def test_closed_form_matches_oracle(d, rng, manifold):
    model = full_model(d, manifold.dim)
    for jet in random_jets(manifold, d, 10, rng):
        dev = max_relative_deviation(compute_actions(model, manifold, jet), fd_oracle(model, manifold, jet))
        assert dev < 1e-7


def test_oracle_error_is_second_order(rng):
    m = parse_manifold("s2-vector")
    model = full_model(3, 3, s=3.0)
    jet = random_jets(m, 3, 1, rng)[0]
    exact = compute_actions(model, m, jet)
    e1 = max_relative_deviation(exact, fd_oracle(model, m, jet, step=4e-3))
    e2 = max_relative_deviation(exact, fd_oracle(model, m, jet, step=2e-3))
    assert 3.0 < e1 / e2 < 5.0


def test_oracle_rejects_bad_input(rng):
    m = parse_manifold("s2-vector")
    model = EnergyModel()
    jet = random_jets(m, 3, 1, rng)[0]
    with pytest.raises(ValueError):
        fd_oracle(model, m, jet, step=0.0)
    # a step that flips the orientation
    thin = JetSample(jet.x, jet.u, np.diag([1.0, 1.0, 1e-6]), jet.nu, jet.Ngrad)
    with pytest.raises(ValueError, match="det F"):
        fd_oracle(model, m, thin, step=1e-5)


def test_identity_is_stress_free():
    m = parse_manifold("s2-vector")
    model = EnergyModel(mu=1.3, delta=0.7, c4=2.0, kappa=0.5, alpha=0.0, r=1.7)
    for d in (2, 3):
        jet = JetSample(np.zeros(d), np.zeros(d), np.eye(d), np.array([0.0, 0.0, 1.0]), np.zeros((3, d)))
        act = compute_actions(model, m, jet)
        assert np.abs(act.P).max() < 1e-14
        assert np.abs(act.eshelby).max() < 1e-14


def test_actions_are_tangent(rng):
    m = parse_manifold("s2-vector")
    model = full_model(3, 3)
    jets = random_jets(m, 3, 20, rng)
    for jet in jets:
        act = compute_actions(model, m, jet)
        assert abs(act.z @ jet.nu) < 1e-14
        assert abs(act.beta @ jet.nu) < 1e-14
        assert np.abs(jet.nu @ act.S).max() < 1e-14


def test_batched_matches_single(rng):
    m = parse_manifold("rk-vector:3")
    model = full_model(3, 3)
    jets = random_jets(m, 3, 4, rng)
    batch = JetSample(*(np.stack([getattr(j, k) for j in jets]) for k in ("x", "u", "F", "nu", "Ngrad")))
    act = compute_actions(model, m, batch)
    for i, j in enumerate(jets):
        assert np.allclose(act.P[i], compute_actions(model, m, j).P)


def _rotation(rng):
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    return Q if np.linalg.det(Q) > 0 else -Q


def test_equivariance_under_observer_rotation(rng):
    # P(QF, Q nu, Q N) = Q P, S -> Q S, z -> Q z for a frame-indifferent internal energy
    m = parse_manifold("s2-vector")
    model = EnergyModel(mu=1.0, delta=0.4, c4=1.0, kappa=0.3, alpha=0.6, s=2.5)
    jet = random_jets(m, 3, 1, rng)[0]
    Q = _rotation(rng)
    moved = JetSample(jet.x, jet.u, Q @ jet.F, Q @ jet.nu, Q @ jet.Ngrad)
    a, b = compute_actions(model, m, jet), compute_actions(model, m, moved)
    assert np.allclose(b.P, Q @ a.P, atol=1e-12)
    assert np.allclose(b.S, Q @ a.S, atol=1e-12)
    assert np.allclose(b.z, Q @ a.z, atol=1e-12)


def test_self_action_decomposition(rng):
    jet = random_jets(parse_manifold("s2-trivial"), 3, 1, rng)[0]
    model = full_model(3, 3)
    triv = parse_manifold("s2-trivial")
    z = compute_actions(model, triv, jet).z
    z1, z2 = decompose_self_action(triv, jet.nu, z)
    # trivial action: all of z lies in Ker A*
    assert np.allclose(z1, 0.0) and np.allclose(z2, z)
    vec = parse_manifold("s2-vector")
    z1, z2 = decompose_self_action(vec, jet.nu, z)
    assert np.allclose(z2, 0.0) and np.allclose(z1, z)
    rk = parse_manifold("rk-vector:3")
    w = rng.standard_normal(3)
    nu = rng.standard_normal(3)
    z1, z2 = decompose_self_action(rk, nu, w)
    assert np.allclose(z1 + z2, w)
    assert np.allclose(rotation_adjoint(rk, nu, z2), 0.0)
    assert abs(z1 @ z2) < 1e-12


def test_eshelby_uniaxial_example():
    # F = diag(l, 1, 1) and no descriptor gradient, so E = e I - F^T P
    m = parse_manifold("rk-trivial:1")
    model = EnergyModel(mu=1.0, delta=0.0, c4=1.0, kappa=0.0)
    lam = 1.2
    F = np.diag([lam, 1.0, 1.0])
    jet = JetSample(np.zeros(3), np.zeros(3), F, np.zeros(1), np.zeros((1, 3)))
    E = eshelby_tensor(model, m, jet)
    e = density_eval(model, jet)
    p0 = model.p0(3)
    # P = mu F + (c4 (J - 1/J) - p0 / J) cof F with J = l, cof F = diag(1, l, l)
    dJ = model.c4 * (lam - 1 / lam) - p0 / lam
    P11 = model.mu * lam + dJ
    P22 = model.mu + dJ * lam
    assert np.isclose(E[0, 0], e - lam * P11)
    assert np.isclose(E[1, 1], e - P22) and np.isclose(E[2, 2], e - P22)
    assert np.allclose(E - np.diag(np.diag(E)), 0.0)


def test_explicit_x_derivative(rng):
    m = parse_manifold("s2-vector")
    model = full_model(3, 3)
    jet = random_jets(m, 3, 1, rng)[0]
    h = 1e-6
    fd = np.zeros(3)
    for k in range(3):
        dx = np.zeros(3)
        dx[k] = h
        plus = JetSample(jet.x + dx, jet.u, jet.F, jet.nu, jet.Ngrad)
        minus = JetSample(jet.x - dx, jet.u, jet.F, jet.nu, jet.Ngrad)
        fd[k] = (density_eval(model, plus) - density_eval(model, minus)) / (2 * h)
    assert np.allclose(explicit_x_derivative(model, jet), fd, atol=1e-8)
    flat = EnergyModel(weight=Weight(2.0))
    assert np.all(explicit_x_derivative(flat, jet) == 0.0)
