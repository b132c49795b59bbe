import json

import numpy as np
import pytest

from complexbody.config import ConfigError, RunConfig, load_config
from complexbody.fields import ReferenceGrid
from complexbody.io import StateError, read_field, read_state, write_actions, write_field, write_json, write_state
from complexbody.manifold import parse_manifold

from conftest import CONFIGS, full_model, load_raw, random_state


@pytest.mark.parametrize("name", ["identity", "zeeman", "stretch", "reduced", "ramp"])
def test_shipped_configs_load(name):
    cfg = load_config(CONFIGS / f"{name}.json")
    assert cfg.output_dir.name == name
    u, nu = cfg.initial_state()
    assert u.shape == (cfg.grid.n_nodes, cfg.grid.dim)
    assert nu.shape == (cfg.grid.n_nodes, cfg.manifold.dim)
    # the echo reproduces the same configuration
    again = RunConfig.from_dict(cfg.echo(), CONFIGS)
    assert again.model == cfg.model and again.solver == cfg.solver


def test_relative_paths_resolve_against_config_dir(tmp_path):
    raw = load_raw("reduced")
    raw["output_dir"] = "out"
    raw["initial"] = {"state_dir": "start"}
    (tmp_path / "c.json").write_text(json.dumps(raw))
    cfg = load_config(tmp_path / "c.json")
    assert cfg.output_dir == tmp_path / "out"
    assert cfg.initial["state_dir"] == str(tmp_path / "start")


@pytest.mark.parametrize("mutate,message", [
    (lambda r: r.update(extra=1), "unknown"),
    (lambda r: r["grid"].update(dim=4), "grid.dim"),
    (lambda r: r["grid"].update(cells=[0, 2]), "grid.cells"),
    (lambda r: r["energy"].update(lam=1.0), "unknown"),
    (lambda r: r["grid"]["boundary"].update({"z-min": "dirichlet-u"}), "face"),
    (lambda r: r["grid"]["boundary"].update({"x-min": "glued"}), "flag"),
    (lambda r: r["boundary"].update(u0={"type": "affine", "matrix": [[1, 0], [0, -1]]}), "determinant"),
    (lambda r: r["boundary"].update(u0={"type": "shear"}), "u0 type"),
    (lambda r: r["boundary"].update(nu0=[0.0, 0.0, 2.0]), "unit"),
    (lambda r: r["energy"].update(weight={"type": "linear-ramp", "base": 0.1, "slope": [-1.0, 0.0]}),
     "positive"),
    (lambda r: r["solver"].update(tol_stat=-1.0), "tol_stat"),
    (lambda r: r.pop("manifold"), "manifold"),
    (lambda r: r.update(manifold="s4-vector"), "manifold"),
])
def test_bad_configs_are_rejected(mutate, message):
    raw = load_raw("reduced")
    mutate(raw)
    with pytest.raises(Exception, match=message) as err:
        RunConfig.from_dict(raw, CONFIGS)
    assert isinstance(err.value, ValueError)


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(tmp_path / "bad.json")


def test_initial_state_is_seeded():
    cfg = load_config(CONFIGS / "identity.json")
    a, _ = cfg.initial_state()
    b, _ = cfg.initial_state()
    c, _ = cfg.initial_state(seed=cfg.solver.seed + 1)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_state_round_trip_is_exact(tmp_path, rng):
    g = ReferenceGrid(3, (2, 3, 2), extents=(1.0, 0.7, 2.0))
    m = parse_manifold("s2-vector")
    u, nu = random_state(g, m, rng)
    write_state(tmp_path, g, u, nu)
    u2, nu2 = read_state(tmp_path, g, m)
    assert np.array_equal(u, u2) and np.array_equal(nu, nu2)


def test_read_field_checks(tmp_path):
    g = ReferenceGrid(2, (2, 2))
    write_field(tmp_path / "f.csv", g, np.ones(g.n_nodes))
    assert np.array_equal(read_field(tmp_path / "f.csv", g, 1)[:, 0], np.ones(g.n_nodes))
    with pytest.raises(StateError, match="header"):
        read_field(tmp_path / "f.csv", g, 2)
    with pytest.raises(StateError, match="rows"):
        read_field(tmp_path / "f.csv", ReferenceGrid(2, (3, 2)), 1)
    with pytest.raises(StateError, match="coordinates"):
        read_field(tmp_path / "f.csv", ReferenceGrid(2, (2, 2), extents=(2.0, 1.0)), 1)
    with pytest.raises(StateError, match="does not exist"):
        read_state(tmp_path / "missing", g, parse_manifold("s2-vector"))
    (tmp_path / "g.csv").write_text("x,y,v1\n0,0,abc\n")
    with pytest.raises(StateError):
        read_field(tmp_path / "g.csv", g, 1)


def test_write_actions_and_json(tmp_path, rng):
    g = ReferenceGrid(2, (2, 3))
    m = parse_manifold("s2-vector")
    u, nu = random_state(g, m, rng)
    write_actions(tmp_path / "a.csv", full_model(2, 3), g, m, u, nu)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 1 + g.n_cells
    assert lines[0].startswith("cell,x,y,energy,P00")
    write_json(tmp_path / "r.json", {"a": np.float64(1.5), "b": np.array([1, 2]), "c": float("inf"),
                                     "d": np.bool_(True)})
    data = json.loads((tmp_path / "r.json").read_text())
    assert data == {"a": 1.5, "b": [1, 2], "c": "inf", "d": True}
