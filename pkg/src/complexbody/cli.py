"""Command line entry point: ``complexbody solve|verify|gradcheck|probe``.

Exit codes: 0 success, 1 configuration, state or feasibility error,
2 solver did not converge, 3 a balance or check exceeded its tolerance.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .actions import compute_actions, fd_oracle, max_relative_deviation, random_jets
from .balances import Tolerances, configurational_residual, local_residuals, verify_state
from .config import ConfigError, load_config
from .energy import OrientationError, polyconvex_probe
from .fields import field_diagnostics
from .io import StateError, read_state, write_actions, write_field, write_json, write_state
from .manifold import ManifoldError, check_point
from .solver import check_feasible, history_csv, minimize

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_CHECK_FAILED = 3

GRADCHECK_TOL = 1e-6
GRADCHECK_STEP = 1e-5
SOLVE_PROBE_SAMPLES = 2000


def _error(msg):
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _load(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.solver = replace(cfg.solver, seed=args.seed)
    return cfg


def _box(cfg):
    lo = np.array(cfg.grid.origin)
    return lo, lo + np.array(cfg.grid.extents)


def cmd_solve(args):
    cfg = _load(args)
    probe = polyconvex_probe(cfg.model, cfg.manifold, cfg.grid.dim, samples=SOLVE_PROBE_SAMPLES,
                             seed=cfg.solver.seed, box=_box(cfg))
    if not probe.passed:
        return _error(f"energy model rejected, {probe.summary()}")
    if not probe.coercive:
        print("warning: energy is not coercive in the descriptor gradient (C1 = 0)", file=sys.stderr)

    boundary = cfg.boundary_data()
    if cfg.initial.get("state_dir"):
        u, nu = read_state(cfg.initial["state_dir"], cfg.grid, cfg.manifold)
    else:
        u, nu = cfg.initial_state()
    start = time.perf_counter()
    result = minimize(cfg.model, cfg.grid, cfg.manifold, u, nu, boundary, cfg.solver)
    elapsed = time.perf_counter() - start

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "history.csv").write_text(history_csv(result.history), encoding="utf-8")
    write_state(out, cfg.grid, result.u, result.nu)
    diag = field_diagnostics(cfg.grid, cfg.manifold, result.u, result.nu, cfg.model.r, cfg.model.s)
    report = {
        "config": cfg.echo(),
        "grid": cfg.grid.describe(),
        "status": result.status,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_energy": result.energy,
        "grad_norm": result.grad_norm,
        "diagnostics": diag.to_dict(),
        "probe": {k: v for k, v in probe.to_dict().items() if k != "witnesses"},
        "runtime_seconds": elapsed,
    }
    write_json(out / "report.json", report)
    print(f"{result.status}: {result.iterations} iterations, energy {result.energy:.12g}, "
          f"grad norm {result.grad_norm:.3e}; output in {out}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_verify(args):
    cfg = _load(args)
    state_dir = Path(args.state_dir)
    u, nu = read_state(state_dir, cfg.grid, cfg.manifold)
    check_point(cfg.manifold, nu, tol=1e-10)
    check_feasible(cfg.grid, cfg.manifold, u, nu)
    tol = Tolerances.from_solver(cfg.solver.tol_stat, args.tol_scale)
    report = verify_state(cfg.model, cfg.grid, cfg.manifold, u, nu, tol, seed=cfg.solver.seed)
    write_json(state_dir / "balance_report.json", report.to_dict())
    if args.dump_actions:
        write_actions(state_dir / "actions.csv", cfg.model, cfg.grid, cfg.manifold, u, nu)
        Ru, Rn = local_residuals(cfg.model, cfg.grid, cfg.manifold, u, nu)
        m = cfg.grid.lumped_mass[:, None]
        write_field(state_dir / "residual_u.csv", cfg.grid, Ru / m)
        write_field(state_dir / "residual_nu.csv", cfg.grid, Rn / m)
        residual, _, _ = configurational_residual(cfg.model, cfg.grid, cfg.manifold, u, nu)
        write_field(state_dir / "residual_config.csv", cfg.grid, residual)
    if report.passed:
        print(f"all balances within tolerance; report in {state_dir / 'balance_report.json'}")
        return EXIT_OK
    print(f"balance failures: {', '.join(report.failures)}")
    return EXIT_CHECK_FAILED


def cmd_gradcheck(args):
    cfg = _load(args)
    rng = np.random.default_rng(cfg.solver.seed)
    worst = 0.0
    for jet in random_jets(cfg.manifold, cfg.grid.dim, args.samples, rng):
        exact = compute_actions(cfg.model, cfg.manifold, jet)
        worst = max(worst, max_relative_deviation(exact, fd_oracle(cfg.model, cfg.manifold, jet,
                                                                   GRADCHECK_STEP)))
    limit = GRADCHECK_TOL * args.tol_scale
    print(f"gradcheck on {args.samples} jets: max relative deviation {worst:.3e} (limit {limit:.1e})")
    return EXIT_OK if worst <= limit else EXIT_CHECK_FAILED


def cmd_probe(args):
    cfg = _load(args)
    probe = polyconvex_probe(cfg.model, cfg.manifold, cfg.grid.dim, samples=args.samples,
                             seed=cfg.solver.seed, box=_box(cfg))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_json(cfg.output_dir / "probe_report.json", probe.to_dict())
    print(probe.summary())
    return EXIT_OK if probe.passed else EXIT_CHECK_FAILED


def build_parser():
    parser = argparse.ArgumentParser(prog="complexbody", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    common.add_argument("--dump-actions", action="store_true", help="write per-cell actions and residual fields")
    common.add_argument("--seed", type=int, default=None, help="override solver.seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="minimize the energy")
    p.add_argument("config")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("verify", parents=[common], help="check balance laws on a saved state")
    p.add_argument("config")
    p.add_argument("state_dir")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("gradcheck", parents=[common], help="closed-form actions against finite differences")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=100)
    p.set_defaults(func=cmd_gradcheck)
    p = sub.add_parser("probe", parents=[common], help="sample polyconvexity and growth")
    p.add_argument("config")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if not args.tol_scale > 0:
        return _error("--tol-scale must be positive")
    if args.seed is not None and args.seed < 0:
        return _error("--seed must be non-negative")
    try:
        return args.func(args)
    except (ConfigError, StateError, ManifoldError, OrientationError) as exc:
        return _error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
