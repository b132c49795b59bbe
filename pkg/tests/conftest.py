import json
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from complexbody.energy import EnergyModel, Weight
from complexbody.config import RunConfig
from complexbody.manifold import parse_manifold, project_point
from complexbody.solver import minimize

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

MANIFOLD_KEYS = ["s2-vector", "s2-trivial", "rk-trivial:3", "rk-vector:3"]


def full_model(d, n, alpha=0.7, s=2.5, **kw):
    """Every term switched on, including an x-dependent weight."""
    params = dict(
        mu=1.0, delta=0.4, c4=1.2, kappa=0.3, alpha=alpha, r=1.5, s=s,
        body_force=tuple([0.1, -0.2, 0.3][:d]),
        micro_force=tuple(([0.2, -0.1, 0.4] + [0.1] * n)[:n]),
        weight=Weight(1.0, tuple([0.3, 0.1, 0.2][:d])),
    )
    params.update(kw)
    return EnergyModel(**params)


def random_state(grid, manifold, rng, amp=0.05, stretch=None):
    d = grid.dim
    A = np.diag(stretch if stretch is not None else [1.1, 0.9, 1.05][:d])
    u = grid.coords @ A.T + amp * rng.standard_normal(grid.coords.shape) * np.min(grid.spacing)
    raw = rng.standard_normal((grid.n_nodes, manifold.dim)) * 0.3
    raw[:, -1] += 1.0
    nu = project_point(manifold, raw)
    return u, nu


def smooth_state(grid, manifold, seed=0):
    """Smooth non-equilibrium fields on the unit square with seeded random
    amplitudes and phases; the same seed gives the same fields on any grid."""
    a = np.random.default_rng(seed).uniform(0.5, 1.5, 8)
    X = grid.coords
    x, y = X[:, 0], X[:, 1]
    u = X + 0.05 * np.stack([a[0] * np.sin(2 * np.pi * x + a[1]) * np.cos(np.pi * y),
                             a[2] * np.sin(np.pi * y + a[3] * x)], 1)
    raw = np.stack([np.sin(a[4] * x + 0.2 * y), np.cos(2 * a[5] * y),
                    1.5 + 0.3 * np.sin(3 * a[6] * x + a[7])], 1)
    return u, project_point(manifold, raw[:, :manifold.dim])


@lru_cache(maxsize=None)
def solved(name, cells=None):
    """Load a shipped config, optionally regrid it, and minimize."""
    raw = load_raw(name)
    if cells is not None:
        raw["grid"]["cells"] = [cells] * raw["grid"]["dim"]
    cfg = RunConfig.from_dict(raw, CONFIGS)
    u, nu = cfg.initial_state()
    return cfg, minimize(cfg.model, cfg.grid, cfg.manifold, u, nu, cfg.boundary_data(), cfg.solver)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=MANIFOLD_KEYS)
def manifold(request):
    return parse_manifold(request.param)


def load_raw(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def write_config(tmp_path, raw, name="run.json"):
    raw = dict(raw)
    raw["output_dir"] = str(tmp_path / "out")
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


# acceptance results, printed after the run as one PASS/FAIL line each
ACCEPTANCE = {}


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[criterion]
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
