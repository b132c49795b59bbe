import numpy as np
import pytest

from complexbody.balances import (
    Tolerances,
    configurational_residual,
    discrete_rigid_power,
    energy_and_residuals,
    external_power,
    integral_balances,
    local_residuals,
    observer_axes,
    power_invariance_gap,
    random_test_basis,
    residual_norm,
    skew_applicable,
    skew_residual,
    verify_state,
    weak_residuals,
    _rms,
)
from complexbody.energy import EnergyModel, OrientationError, total_energy
from complexbody.fields import ReferenceGrid
from complexbody.manifold import parse_manifold, project_point, project_tangent

from conftest import full_model, random_state, smooth_state, solved


def _tangent_field(grid, manifold, nu, rng):
    return project_tangent(manifold, nu, rng.standard_normal((grid.n_nodes, manifold.dim)))


@pytest.mark.parametrize("d", [2, 3])
def test_residuals_are_the_discrete_gradient(d, rng, manifold):
    g = ReferenceGrid(d, (3,) * d, boundary={"x-min": "dirichlet-u"})
    model = full_model(d, manifold.dim)
    u, nu = random_state(g, manifold, rng)
    E, Ru, Rn = energy_and_residuals(model, g, manifold, u, nu, mask=False)
    assert np.isclose(E, total_energy(model, g, manifold, u, nu), rtol=1e-13)
    du = rng.standard_normal(u.shape)
    dnu = _tangent_field(g, manifold, nu, rng)
    eps = 1e-6

    def energy(t):
        return total_energy(model, g, manifold, u + t * du, project_point(manifold, nu + t * dnu))

    fd = (energy(eps) - energy(-eps)) / (2 * eps)
    exact = np.sum(Ru * du) + np.sum(Rn * dnu)
    assert abs(fd - exact) <= 1e-7 * max(1.0, abs(exact))
    # masked residuals vanish on Dirichlet nodes
    Ru_m, _ = local_residuals(model, g, manifold, u, nu)
    assert np.all(Ru_m[g.dirichlet_u] == 0.0)
    assert residual_norm(g, Ru_m, Rn) > 0


def test_energy_and_residuals_det_floor(rng):
    g = ReferenceGrid(2, (2, 2))
    m = parse_manifold("rk-trivial:1")
    u = g.coords * [1.0, 1e-12]
    with pytest.raises(OrientationError):
        energy_and_residuals(EnergyModel(), g, m, u, np.zeros((g.n_nodes, 1)), det_floor=1e-10)


@pytest.mark.parametrize("frame_breaking", [False, True])
def test_power_gap_equals_force_and_torque(rng, manifold, frame_breaking):
    g = ReferenceGrid(3, (3, 2, 2), extents=(1.5, 1.0, 1.0))
    axis = (1.0, 0.0, 0.0) if frame_breaking else None
    model = full_model(3, manifold.dim, coupling_axis=axis)
    u, nu = random_state(g, manifold, rng, amp=0.1)
    part = g.cell_mask(upper=(2, 2, 2))
    h = rng.standard_normal(u.shape)
    ups = _tangent_field(g, manifold, nu, rng)
    for p in (None, part):
        f, t = integral_balances(model, g, manifold, u, nu, p)
        for _ in range(5):
            c = rng.standard_normal(3)
            q = rng.standard_normal(3)
            gap = power_invariance_gap(model, g, manifold, u, nu, p, h, ups, c, q)
            assert abs(gap - (c @ f + q @ t)) <= 1e-12 * max(1.0, abs(gap))


def test_power_gap_in_two_dimensions(rng):
    g = ReferenceGrid(2, (4, 3))
    m = parse_manifold("s2-vector")
    model = full_model(2, 3)
    u, nu = random_state(g, m, rng, amp=0.1)
    f, t = integral_balances(model, g, m, u, nu)
    assert f.shape == (2,) and t.shape == (3,)
    c, q = rng.standard_normal(2), rng.standard_normal(3)
    gap = power_invariance_gap(model, g, m, u, nu, c=c, q=q)
    assert abs(gap - (c @ f + q @ t)) <= 1e-12 * max(1.0, abs(gap))


def test_external_power_rejects_non_tangent_rate(rng):
    g = ReferenceGrid(2, (2, 2))
    m = parse_manifold("s2-vector")
    u, nu = random_state(g, m, rng)
    with pytest.raises(ValueError, match="tangent"):
        external_power(EnergyModel(), g, m, u, nu, upsilon=nu)


@pytest.mark.parametrize("key,alpha", [("s2-vector", 0.7), ("rk-vector:3", 0.7), ("s2-trivial", 0.0),
                                       ("rk-trivial:3", 0.0)])
@pytest.mark.parametrize("d", [2, 3])
def test_skew_identity_holds(rng, key, alpha, d):
    m = parse_manifold(key)
    g = ReferenceGrid(d, (3,) * d)
    model = full_model(d, 3, alpha=alpha)
    assert skew_applicable(model, m)
    u, nu = random_state(g, m, rng, amp=0.2)
    _, rel = skew_residual(model, g, m, u, nu)
    assert rel.max() <= 1e-8


def test_skew_identity_fails_without_invariance(rng):
    g = ReferenceGrid(3, (2, 2, 2))
    # trivial action with coupling: nu does not rotate with the observer
    triv = parse_manifold("s2-trivial")
    model = full_model(3, 3, alpha=0.7)
    assert not skew_applicable(model, triv)
    u, nu = random_state(g, triv, rng, amp=0.2)
    _, rel = skew_residual(model, g, triv, u, nu)
    assert rel.max() > 1e-3
    assert observer_axes(model, triv, 3) == []
    broken = full_model(3, 3, alpha=0.7, coupling_axis=(0.0, 1.0, 0.0))
    assert not skew_applicable(broken, parse_manifold("s2-vector"))


def test_observer_axes():
    m = parse_manifold("s2-vector")
    assert len(observer_axes(EnergyModel(), m, 3)) == 3
    axes = observer_axes(EnergyModel(), m, 2)
    assert len(axes) == 1 and np.allclose(axes[0], [0, 0, 1])


def test_weak_residuals_detect_non_equilibrium(rng):
    g = ReferenceGrid(2, (5, 5))
    m = parse_manifold("s2-vector")
    model = full_model(2, 3)
    u, nu = random_state(g, m, rng, amp=0.2)
    pairs, xis = random_test_basis(g, m, nu, size=20, seed=3)
    assert len(pairs) == 20 and len(xis) == 20
    for _, ups in pairs:
        assert np.abs(np.sum(ups * nu, axis=1)).max() < 1e-14
    el, sub = weak_residuals(model, g, m, u, nu, pairs, xis)
    assert el > 1e-3 and sub > 1e-3
    # the same basis is deterministic in the seed
    again = random_test_basis(g, m, nu, size=20, seed=3)
    assert np.array_equal(again[0][0][0], pairs[0][0])


def test_config_identity_defect_converges():
    m = parse_manifold("s2-vector")
    model = full_model(2, 3, alpha=0.5)
    errs = []
    for n in (16, 32, 64):
        g = ReferenceGrid(2, (n, n))
        u, nu = smooth_state(g, m)
        _, defect, interior = configurational_residual(model, g, m, u, nu)
        errs.append(_rms(defect, interior))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9), (errs, rates)
    # the tolerance constant covers the defect from h = 1/16 on
    assert errs[0] <= Tolerances().configurational / 16


def test_tolerances_from_solver():
    t = Tolerances.from_solver(1e-9, 2.0)
    assert np.isclose(t.equilibrium, 2e-8)
    assert np.isclose(t.skew, 2e-8)


def test_minimizer_passes_and_perturbation_fails(rng):
    cfg, res = solved("reduced")
    assert res.converged
    tol = Tolerances.from_solver(cfg.solver.tol_stat)
    rep = verify_state(cfg.model, cfg.grid, cfg.manifold, res.u, res.nu, tol)
    assert rep.passed, rep.failures
    assert rep.weak_el_residual <= tol.equilibrium
    bad = res.u + 1e-3 * rng.standard_normal(res.u.shape) * ~cfg.grid.dirichlet_u[:, None]
    rep = verify_state(cfg.model, cfg.grid, cfg.manifold, bad, res.nu, tol)
    assert not rep.passed
    assert "momentum" in rep.failures
    d = rep.to_dict()
    assert d["passed"] is False and "thresholds" in d


@pytest.mark.parametrize("name", ["reduced", "stretch", "zeeman"])
def test_discrete_rigid_power_vanishes_at_minimizers(name):
    cfg, res = solved(name)
    p = discrete_rigid_power(cfg.model, cfg.grid, cfg.manifold, res.u, res.nu)
    assert p <= res.grad_norm * 1.0001


def test_discrete_rigid_power_sees_unbalanced_loads(rng):
    g = ReferenceGrid(2, (3, 3))
    m = parse_manifold("s2-vector")
    model = EnergyModel(body_force=(0.5, 0.0))
    nu = np.tile([0.0, 0.0, 1.0], (g.n_nodes, 1))
    # free body at rest under a net load: translation power is the load itself
    assert np.isclose(discrete_rigid_power(model, g, m, g.coords, nu), 0.5)
