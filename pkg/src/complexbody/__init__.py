"""Ground states and balance-law verification for complex bodies.

A complex body carries a deformation ``u`` and a descriptor field ``nu``
with values on a manifold (the unit sphere or R^k). The package minimizes
a polyconvex energy over both fields on a uniform Q1 grid and checks the
standard, substructural and configurational balances on the result.
"""

__version__ = "0.1.0"

from .actions import ActionState, compute_actions, fd_oracle
from .balances import BalanceReport, verify_state
from .energy import EnergyModel, Weight, polyconvex_probe, total_energy
from .fields import ReferenceGrid, compute_jets
from .manifold import parse_manifold
from .solver import BoundaryData, SolverConfig, minimize

__all__ = [
    "ActionState",
    "BalanceReport",
    "BoundaryData",
    "EnergyModel",
    "ReferenceGrid",
    "SolverConfig",
    "Weight",
    "compute_actions",
    "compute_jets",
    "fd_oracle",
    "minimize",
    "parse_manifold",
    "polyconvex_probe",
    "total_energy",
    "verify_state",
]
