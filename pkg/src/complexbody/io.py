"""CSV and JSON input/output for fields, histories and reports.

Field dumps carry one row per node in lexicographic node order with the
header ``x,y[,z],v1..vk``. Floats are written with ``repr`` so dumps
round-trip exactly and never depend on the locale.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .actions import compute_actions
from .fields import compute_jets

__all__ = [
    "StateError",
    "write_field",
    "read_field",
    "write_state",
    "read_state",
    "write_actions",
    "write_json",
]

_COORDS = ("x", "y", "z")


class StateError(ValueError):
    """Missing or malformed state files."""


def _fmt(v):
    return repr(float(v))


def write_field(path, grid, values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    header = list(_COORDS[: grid.dim]) + [f"v{i + 1}" for i in range(values.shape[1])]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for x, v in zip(grid.coords, values):
            writer.writerow([_fmt(c) for c in x] + [_fmt(c) for c in v])


def read_field(path, grid, components):
    """Read a field dump and check it matches ``grid`` node for node."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise StateError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not rows:
        raise StateError(f"{path} is empty")
    expected = list(_COORDS[: grid.dim]) + [f"v{i + 1}" for i in range(components)]
    if rows[0] != expected:
        raise StateError(f"{path.name}: header {rows[0]} does not match {expected}")
    try:
        data = np.array([[float(c) for c in row] for row in rows[1:]])
    except ValueError as exc:
        raise StateError(f"{path.name}: {exc}") from None
    if data.shape != (grid.n_nodes, grid.dim + components):
        raise StateError(f"{path.name}: expected {grid.n_nodes} rows, found {len(rows) - 1}")
    if not np.allclose(data[:, : grid.dim], grid.coords, rtol=0, atol=1e-9 * max(grid.extents)):
        raise StateError(f"{path.name}: node coordinates do not match the grid")
    return data[:, grid.dim:]


def write_state(directory, grid, u, nu):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field(directory / "u.csv", grid, u)
    write_field(directory / "nu.csv", grid, nu)


def read_state(directory, grid, manifold):
    directory = Path(directory)
    if not directory.is_dir():
        raise StateError(f"state directory {directory} does not exist")
    return read_field(directory / "u.csv", grid, grid.dim), read_field(directory / "nu.csv", grid, manifold.dim)


def write_actions(path, model, grid, manifold, u, nu):
    """Per-cell actions at the cell centre, one row per cell."""
    centre = np.full((1, grid.dim), 0.5)
    jets = compute_jets(grid, manifold, u, nu, local=centre)
    act = compute_actions(model, manifold, jets)
    d, n = grid.dim, manifold.dim
    header = ["cell"] + list(_COORDS[:d]) + ["energy"]
    header += [f"P{i}{j}" for i in range(d) for j in range(d)]
    header += [f"S{i}{j}" for i in range(n) for j in range(d)]
    header += [f"z{i}" for i in range(n)] + [f"beta{i}" for i in range(n)] + [f"b{i}" for i in range(d)]
    header += [f"E{i}{j}" for i in range(d) for j in range(d)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for c in range(grid.n_cells):
            row = [c] + [_fmt(v) for v in jets.x[c, 0]] + [_fmt(act.energy[c, 0])]
            for arr in (act.P, act.S, act.z, act.beta, act.b, act.eshelby):
                row += [_fmt(v) for v in np.ravel(arr[c, 0])]
            writer.writerow(row)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(data), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
