"""Sound value iteration for turn-based stochastic reachability games."""

from __future__ import annotations

from .baselines import BaselineResult, run_bvi, run_vi
from .graph import compute_partition, mec_decomposition, sccs
from .model import ModelError, Owner, StochasticGame, build_game, load_model, parse_model, serialize
from .oracle import OracleTooLarge, exact_value
from .solver import SolveOptions, SolveResult, Status, Stopping, solve, solve_topological

__all__ = [
    "BaselineResult", "ModelError", "OracleTooLarge", "Owner", "SolveOptions", "SolveResult",
    "Status", "Stopping", "StochasticGame", "build_game", "compute_partition", "exact_value",
    "load_model", "mec_decomposition", "parse_model", "run_bvi", "run_vi", "sccs", "serialize",
    "solve", "solve_topological",
]
