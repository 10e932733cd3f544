"""Exact ground truth for small games.

Memoryless deterministic strategies suffice for reachability in turn-based
stochastic games, so the value is the max-min over MD profiles of the
reachability probability of the induced Markov chain.  Everything here uses
``Fraction``; nothing is shared with the iterative solvers except the game
data itself.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .model import Owner, StochasticGame

PROFILE_LIMIT = 10**6


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class ExactValues:
    values: list[Fraction]
    max_strategy: list[int | None]  # witness action per Maximizer state
    min_strategy: list[int | None]


def _can_reach(n: int, edges: dict[int, set[int]], targets: Iterable[int]) -> set[int]:
    preds: dict[int, set[int]] = {s: set() for s in range(n)}
    for s, succ in edges.items():
        for t in succ:
            preds[t].add(s)
    seen = set(targets)
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    return seen


def _solve_linear(a: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    """Gauss-Jordan elimination with exact pivots; the system must be regular."""
    m = len(b)
    rows = [row[:] + [rhs] for row, rhs in zip(a, b)]
    for col in range(m):
        pivot = next(r for r in range(col, m) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        p = rows[col][col]
        rows[col] = [x / p for x in rows[col]]
        for r in range(m):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return [rows[i][m] for i in range(m)]


def mc_reach(chain: dict[int, dict[int, Fraction]] | StochasticGame,
             targets: Iterable[int]) -> list[Fraction]:
    """Exact reachability probabilities of a Markov chain.

    ``chain`` maps each state to its successor distribution, or is a game
    whose states all have exactly one action.
    """
    if isinstance(chain, StochasticGame):
        dists = {}
        for st in chain.states:
            if len(st.actions) != 1:
                raise ValueError(f"state {st.id} has {len(st.actions)} actions, expected 1")
            dists[st.id] = {t.successor: t.probability for t in st.actions[0].transitions}
        chain = dists
    n = len(chain)
    targets = set(targets)
    good = _can_reach(n, {s: set(d) for s, d in chain.items()}, targets)
    unknown = sorted(good - targets)
    pos = {s: i for i, s in enumerate(unknown)}
    a = [[Fraction(0)] * len(unknown) for _ in unknown]
    b = [Fraction(0)] * len(unknown)
    for s in unknown:
        i = pos[s]
        a[i][i] += 1
        for t, p in chain[s].items():
            if t in targets:
                b[i] += p
            elif t in pos:
                a[i][pos[t]] -= p
    x = _solve_linear(a, b) if unknown else []
    out = [Fraction(0)] * n
    for s in targets:
        out[s] = Fraction(1)
    for s in unknown:
        out[s] = x[pos[s]]
    return out


def exact_value(game: StochasticGame, limit: int = PROFILE_LIMIT) -> ExactValues:
    n = len(game)
    targets = game.targets
    edges = {s: {t.successor for act in game.states[s].actions for t in act.transitions}
             for s in range(n)}
    relevant = _can_reach(n, edges, targets) - targets
    # only states with a real choice that can still matter are enumerated
    max_states = [s for s in sorted(relevant)
                  if game.states[s].owner is Owner.MAX and len(game.states[s].actions) > 1]
    min_states = [s for s in sorted(relevant)
                  if game.states[s].owner is Owner.MIN and len(game.states[s].actions) > 1]
    size = 1
    for s in max_states + min_states:
        size *= len(game.states[s].actions)
    if size > limit:
        raise OracleTooLarge(f"game too large for oracle: {size} strategy profiles exceed {limit}")

    sigmas = list(itertools.product(*(range(len(game.states[s].actions)) for s in max_states)))
    taus = list(itertools.product(*(range(len(game.states[s].actions)) for s in min_states)))

    def chain_for(sigma, tau):
        choice = dict(zip(max_states, sigma))
        choice.update(zip(min_states, tau))
        return {s: {t.successor: t.probability
                    for t in game.states[s].actions[choice.get(s, 0)].transitions}
                for s in range(n)}

    table = [[mc_reach(chain_for(sg, tu), targets) for tu in taus] for sg in sigmas]
    idx = range(n)
    inner_min = [[min(table[i][j][s] for j in range(len(taus))) for s in idx]
                 for i in range(len(sigmas))]
    inner_max = [[max(table[i][j][s] for i in range(len(sigmas))) for s in idx]
                 for j in range(len(taus))]
    maxmin = [max(inner_min[i][s] for i in range(len(sigmas))) for s in idx]
    minmax = [min(inner_max[j][s] for j in range(len(taus))) for s in idx]
    if maxmin != minmax:
        raise AssertionError(f"max-min {maxmin} differs from min-max {minmax}")

    # uniform witnesses: a single profile attaining the value at every state
    best_sigma = next(i for i in range(len(sigmas)) if inner_min[i] == maxmin)
    best_tau = next(j for j in range(len(taus)) if inner_max[j] == minmax)
    max_strategy: list[int | None] = [None] * n
    min_strategy: list[int | None] = [None] * n
    for s in range(n):
        if game.states[s].owner is Owner.MAX:
            max_strategy[s] = 0
        else:
            min_strategy[s] = 0
    for s, a in zip(max_states, sigmas[best_sigma]):
        max_strategy[s] = a
    for s, a in zip(min_states, taus[best_tau]):
        min_strategy[s] = a
    return ExactValues(maxmin, max_strategy, min_strategy)


def brute_force_end_components(game: StochasticGame, within: Iterable[int] | None = None
                               ) -> list[frozenset[int]]:
    """Every end component inside ``within``, by enumerating all subsets.

    T is an EC if every state of T keeps at least one action whose support
    stays in T, and T is strongly connected using only those actions.
    """
    pool = sorted(range(len(game)) if within is None else set(within))
    out = []
    for r in range(1, len(pool) + 1):
        for combo in itertools.combinations(pool, r):
            t = frozenset(combo)
            staying = {s: [act for act in game.states[s].actions
                           if all(x.successor in t for x in act.transitions)] for s in t}
            if any(not acts for acts in staying.values()):
                continue
            succ = {s: {x.successor for act in acts for x in act.transitions}
                    for s, acts in staying.items()}
            if all(_reaches_all(s, t, succ) for s in t):
                out.append(t)
    return out


def _reaches_all(start: int, region: frozenset[int], succ: dict[int, set[int]]) -> bool:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen >= region
