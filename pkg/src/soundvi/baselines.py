"""Baselines: classical value iteration and bounded value iteration (BVI).

VI iterates a lower bound only and stops when it stops moving, so it has no
precision guarantee.  BVI runs a second, upper sequence that is deflated on
end components every iteration, and stops when the two meet within 2 eps.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Iterable

from .graph import compute_partition, mec_decomposition
from .model import Owner, StochasticGame, normalize
from .solver import SolveResult, Status, best_exit_set

BaselineResult = SolveResult


@dataclass(frozen=True)
class BaselineTraceRow:
    k: int
    state: int
    action: str
    lower: float
    upper: float | None


def baseline_trace_to_csv(rows: Iterable[BaselineTraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("k", "state", "action", "lower", "upper"))
    for r in rows:
        w.writerow([r.k, r.state, r.action, repr(r.lower), "" if r.upper is None else repr(r.upper)])
    return buf.getvalue()


def _bellman(game: StochasticGame, s: int, x: list[float]) -> tuple[float, int]:
    st = game.states[s]
    maximize = st.owner is Owner.MAX
    best_a, best = 0, None
    for a, act in enumerate(st.actions):
        v = sum(t.weight * x[t.successor] for t in act.transitions)
        if best is None or ((v > best) if maximize else (v < best)):
            best_a, best = a, v
    return best, best_a


def _initial_lower(game: StochasticGame) -> list[float]:
    targets = game.targets
    return [1.0 if s in targets else 0.0 for s in range(len(game))]


def run_vi(game: StochasticGame, epsilon_stop: float = 1e-6, max_iterations: int = 10**7,
           trace: bool = False) -> BaselineResult:
    game = normalize(game)
    part = compute_partition(game)
    unknown = sorted(part.unknown)
    lower = _initial_lower(game)
    actions: list[int | None] = [0 if s in part.targets else None for s in range(len(game))]
    rows: list[BaselineTraceRow] | None = [] if trace else None
    k = 0
    status = Status.CONVERGED
    while unknown:
        if k >= max_iterations:
            status = Status.MAX_ITERATIONS
            break
        new = list(lower)
        for s in unknown:
            new[s], actions[s] = _bellman(game, s, lower)
        change = max(abs(new[s] - lower[s]) for s in unknown)
        lower = new
        k += 1
        if rows is not None:
            rows.extend(BaselineTraceRow(k, s, game.label(s, actions[s]), lower[s], None)
                        for s in unknown)
        if change < epsilon_stop:
            break
    return SolveResult(list(lower), list(lower), None, k, actions, status,
                       epsilon_stop, "vi", rows)


def deflate(game: StochasticGame, upper: list[float], mecs) -> list[float]:
    """Lower ``upper`` on every (sub-)EC to its best exit; traps drop to 0."""
    valuation = list(upper)
    out = list(upper)

    def visit(region, best):
        cap = 0.0 if best is None else best
        for s in region:
            out[s] = min(out[s], cap)

    for mec in mecs:
        best_exit_set(game, valuation, mec.states, visit=visit)
    return out


def run_bvi(game: StochasticGame, epsilon: float = 1e-6, max_iterations: int = 10**7,
            trace: bool = False,
            observer: Callable[[int, list[float], list[float]], None] | None = None) -> BaselineResult:
    game = normalize(game)
    part = compute_partition(game)
    unknown = sorted(part.unknown)
    n = len(game)
    lower = _initial_lower(game)
    upper = [0.0 if s in part.sinks else 1.0 for s in range(n)]
    mecs = mec_decomposition(game, part.unknown)
    actions: list[int | None] = [0 if s in part.targets else None for s in range(n)]
    rows: list[BaselineTraceRow] | None = [] if trace else None
    two_eps = 2 * epsilon
    k = 0
    status = Status.CONVERGED
    while unknown and not all(upper[s] - lower[s] < two_eps for s in unknown):
        if k >= max_iterations:
            status = Status.MAX_ITERATIONS
            break
        new_lower, new_upper = list(lower), list(upper)
        for s in unknown:
            new_lower[s], actions[s] = _bellman(game, s, lower)
            new_upper[s], _ = _bellman(game, s, upper)
        lower, upper = new_lower, deflate(game, new_upper, mecs)
        k += 1
        if rows is not None:
            rows.extend(BaselineTraceRow(k, s, game.label(s, actions[s]), lower[s], upper[s])
                        for s in unknown)
        if observer is not None:
            observer(k, list(lower), list(upper))
    values = [(lo + hi) / 2 for lo, hi in zip(lower, upper)]
    return SolveResult(values, list(lower), list(upper), k, actions, status, epsilon, "bvi", rows)
