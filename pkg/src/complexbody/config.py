"""Run configuration: a single JSON document describing one job.

Sections: ``grid``, ``manifold``, ``energy``, ``boundary``, ``initial``,
``solver`` and ``output_dir``. Unknown keys are rejected so that typos do
not silently fall back to defaults. A relative ``output_dir`` (or
``initial.state_dir``) is resolved against the directory of the config
file.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .energy import EnergyModel, Weight
from .fields import BOUNDARY_FLAGS, FACES, ReferenceGrid
from .manifold import ManifoldSpec, parse_manifold
from .solver import BoundaryData, SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config"]

_SECTIONS = {"grid", "manifold", "energy", "boundary", "initial", "solver", "output_dir"}
_GRID_KEYS = {"dim", "cells", "origin", "extents", "boundary"}
_ENERGY_KEYS = {"mu", "delta", "c4", "kappa", "alpha", "r", "s", "body_force", "micro_force",
                "weight", "coupling_axis"}
_BOUNDARY_KEYS = {"u0", "nu0"}
_INITIAL_KEYS = {"nu", "nu_noise", "u_noise", "state_dir"}


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def _check_keys(section, data, allowed):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")


def _vector(name, value, length=None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of numbers") from None
    if arr.ndim != 1 or (length is not None and arr.size != length):
        want = f"{length} numbers" if length is not None else "a flat list"
        raise ConfigError(f"{name} must be {want}, got {value!r}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} has non-finite entries")
    return arr


def _weight(spec, d):
    if spec is None:
        return Weight()
    kind = spec.get("type", "constant")
    if kind == "constant":
        _check_keys("energy.weight", spec, {"type", "value"})
        return Weight(float(spec.get("value", 1.0)))
    if kind == "linear-ramp":
        _check_keys("energy.weight", spec, {"type", "base", "slope"})
        slope = _vector("energy.weight.slope", spec.get("slope", [0.0] * d), d)
        return Weight(float(spec.get("base", 1.0)), tuple(slope.tolist()))
    raise ConfigError(f"unknown weight type {kind!r}; expected constant or linear-ramp")


@dataclass
class RunConfig:
    grid: ReferenceGrid
    manifold: ManifoldSpec
    model: EnergyModel
    u0: dict
    nu0: np.ndarray
    initial: dict
    solver: SolverConfig
    output_dir: Path
    raw: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, data, base_dir=None):
        base_dir = Path(".") if base_dir is None else Path(base_dir)
        _check_keys("config", data, _SECTIONS)
        for key in ("grid", "manifold", "energy"):
            if key not in data:
                raise ConfigError(f"missing section {key!r}")
        try:
            return cls._build(data, base_dir)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def _build(cls, data, base_dir):
        g = data["grid"]
        _check_keys("grid", g, _GRID_KEYS)
        d = int(g.get("dim", 0))
        if d not in (2, 3):
            raise ConfigError(f"grid.dim must be 2 or 3, got {g.get('dim')!r}")
        boundary = g.get("boundary", {})
        for face, flag in boundary.items():
            if face not in FACES[: 2 * d]:
                raise ConfigError(f"unknown face {face!r} for a {d}-d grid")
            if flag not in BOUNDARY_FLAGS:
                raise ConfigError(f"unknown boundary flag {flag!r} on {face}")
        cells = [int(c) for c in g.get("cells", [])]
        if len(cells) != d or min(cells) < 1:
            raise ConfigError(f"grid.cells must hold {d} positive integers")
        grid = ReferenceGrid(d, tuple(cells), g.get("origin"), g.get("extents"), boundary)

        manifold = parse_manifold(str(data["manifold"]))
        n = manifold.dim

        e = data["energy"]
        _check_keys("energy", e, _ENERGY_KEYS)
        kwargs = {k: float(e[k]) for k in ("mu", "delta", "c4", "kappa", "alpha", "r", "s") if k in e}
        if e.get("body_force") is not None:
            kwargs["body_force"] = tuple(_vector("energy.body_force", e["body_force"], d).tolist())
        if e.get("micro_force") is not None:
            kwargs["micro_force"] = tuple(_vector("energy.micro_force", e["micro_force"], n).tolist())
        if e.get("coupling_axis") is not None:
            kwargs["coupling_axis"] = tuple(_vector("energy.coupling_axis", e["coupling_axis"], d).tolist())
        elif float(e.get("alpha", 0.0)) != 0.0 and n < d:
            raise ConfigError("coupling (alpha != 0) needs a descriptor with at least dim components")
        model = EnergyModel(weight=_weight(e.get("weight"), d), **kwargs)
        lo, hi = model.weight.bounds(np.array(grid.origin), np.array(grid.origin) + grid.extents)
        if lo <= 0:
            raise ConfigError(f"weight w(x) must be positive on the body, minimum is {lo:g}")

        b = data.get("boundary", {})
        _check_keys("boundary", b, _BOUNDARY_KEYS)
        u0 = dict(b.get("u0", {"type": "identity"}))
        _u0_values(u0, grid)  # validate early
        default_nu = [0.0] * (n - 1) + [1.0]
        nu0 = _vector("boundary.nu0", b.get("nu0", default_nu), n)
        if manifold.is_sphere and abs(np.linalg.norm(nu0) - 1.0) > 1e-12:
            raise ConfigError("boundary.nu0 must be a unit vector on the sphere")

        init = dict(data.get("initial", {}))
        _check_keys("initial", init, _INITIAL_KEYS)
        if "nu" in init:
            _vector("initial.nu", init["nu"], n)
        for key in ("nu_noise", "u_noise"):
            if float(init.get(key, 0.0)) < 0:
                raise ConfigError(f"initial.{key} must be non-negative")
        if init.get("state_dir") is not None:
            init["state_dir"] = os.path.normpath(base_dir / init["state_dir"])

        s = data.get("solver", {})
        known = set(SolverConfig.__dataclass_fields__)
        _check_keys("solver", s, known)
        solver = SolverConfig(**s)

        out = Path(data.get("output_dir", "output"))
        if not out.is_absolute():
            out = Path(os.path.normpath(base_dir / out))
        return cls(grid, manifold, model, u0, nu0, init, solver, out, raw=data, base_dir=base_dir)

    def boundary_data(self) -> BoundaryData:
        u = _u0_values(self.u0, self.grid)
        nu = np.broadcast_to(self.nu0, (self.grid.n_nodes, self.manifold.dim)).copy()
        return BoundaryData(u, nu)

    def initial_state(self, seed=None):
        """Initial fields: boundary data extended inward plus seeded noise."""
        seed = self.solver.seed if seed is None else seed
        rng = np.random.default_rng(seed)
        bd = self.boundary_data()
        u = bd.u.copy()
        nu_start = np.asarray(self.initial.get("nu", self.nu0), dtype=float)
        nu = np.broadcast_to(nu_start, bd.nu.shape).copy()
        u_noise = float(self.initial.get("u_noise", 0.0))
        nu_noise = float(self.initial.get("nu_noise", 0.0))
        if u_noise:
            u += u_noise * np.min(self.grid.spacing) * rng.standard_normal(u.shape)
        if nu_noise:
            nu += nu_noise * rng.standard_normal(nu.shape)
        return u, nu

    def echo(self):
        """Configuration as a JSON-ready dict, sufficient to rerun the job."""
        out = json.loads(json.dumps(self.raw))
        out["solver"] = asdict(self.solver)
        return out


def _u0_values(spec, grid):
    kind = spec.get("type", "identity")
    x = grid.coords
    d = grid.dim
    if kind == "identity":
        _check_keys("boundary.u0", spec, {"type"})
        return x.copy()
    if kind == "translation":
        _check_keys("boundary.u0", spec, {"type", "vector"})
        return x + _vector("boundary.u0.vector", spec.get("vector"), d)
    if kind == "affine":
        _check_keys("boundary.u0", spec, {"type", "matrix", "offset"})
        try:
            A = np.asarray(spec.get("matrix"), dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("boundary.u0.matrix must be a numeric matrix") from None
        if A.shape != (d, d):
            raise ConfigError(f"boundary.u0.matrix must be {d}x{d}")
        if not np.linalg.det(A) > 0:
            raise ConfigError("boundary.u0.matrix must have positive determinant")
        c = _vector("boundary.u0.offset", spec.get("offset", [0.0] * d), d)
        return x @ A.T + c
    raise ConfigError(f"unknown u0 type {kind!r}; expected identity, translation or affine")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(data, base_dir=path.parent)
