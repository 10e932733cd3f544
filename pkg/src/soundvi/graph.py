"""Structural analysis of games: partition, SCCs, MECs, induced views.

Edges are the union over all actions of both players, so every result here
is independent of strategies and of probabilities (only supports matter).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

from .model import StatePartition, StochasticGame


@dataclass(frozen=True)
class SccDecomposition:
    components: tuple[frozenset[int], ...]  # successors before predecessors
    index: dict[int, int]


@dataclass(frozen=True)
class Mec:
    states: frozenset[int]
    actions: dict[int, tuple[int, ...]]  # retained (staying) actions per state


@dataclass(frozen=True)
class GameView:
    states: frozenset[int]
    actions: dict[int, tuple[int, ...]]


def compute_partition(game: StochasticGame) -> StatePartition:
    targets = game.targets
    preds: dict[int, set[int]] = {s: set() for s in range(len(game))}
    for s in range(len(game)):
        for t in game.successors(s):
            preds[t].add(s)
    seen = set(targets)
    queue = deque(targets)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in seen:
                seen.add(s)
                queue.append(s)
    every = frozenset(range(len(game)))
    sinks = every - seen
    return StatePartition(targets, sinks, every - sinks - targets)


def reachable_from(game: StochasticGame, s: int) -> frozenset[int]:
    seen = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for v in game.successors(u):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def _tarjan(nodes: Iterable[int], succ: Callable[[int], Iterable[int]]) -> list[list[int]]:
    """Iterative Tarjan; components come out successors-first."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def _canonical_order(comps: list[list[int]], succ: Callable[[int], Iterable[int]]) -> list[frozenset[int]]:
    # Reverse topological order; among ready components the smallest state wins.
    comp_of = {s: i for i, c in enumerate(comps) for s in c}
    downstream = [set() for _ in comps]
    upstream = [set() for _ in comps]
    for i, c in enumerate(comps):
        for s in c:
            for t in succ(s):
                j = comp_of[t]
                if j != i:
                    downstream[i].add(j)
                    upstream[j].add(i)
    pending = [len(d) for d in downstream]
    ready = [(min(c), i) for i, c in enumerate(comps) if pending[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        _, i = heapq.heappop(ready)
        order.append(frozenset(comps[i]))
        for j in upstream[i]:
            pending[j] -= 1
            if pending[j] == 0:
                heapq.heappush(ready, (min(comps[j]), j))
    return order


def sccs(game: StochasticGame, restrict_to: Iterable[int] | None = None) -> SccDecomposition:
    nodes = sorted(range(len(game)) if restrict_to is None else set(restrict_to))
    keep = set(nodes)

    def succ(s):
        return sorted(t for t in game.successors(s) if t in keep)

    order = _canonical_order(_tarjan(nodes, succ), succ)
    return SccDecomposition(tuple(order), {s: i for i, c in enumerate(order) for s in c})


def _mecs_of(game: StochasticGame, actions: dict[int, set[int]]) -> list[Mec]:
    actions = {s: set(a) for s, a in actions.items()}
    while True:
        # drop states without actions, then actions pointing at dropped states
        changed = True
        while changed:
            changed = False
            for s in [s for s, acts in actions.items() if not acts]:
                del actions[s]
                changed = True
            for s, acts in actions.items():
                bad = {a for a in acts if not game.post(s, a) <= actions.keys()}
                if bad:
                    acts -= bad
                    changed = True

        def succ(s):
            out = set()
            for a in actions[s]:
                out |= game.post(s, a)
            return sorted(out)

        comps = _tarjan(sorted(actions), succ)
        comp_of = {s: i for i, c in enumerate(comps) for s in c}
        changed = False
        for s, acts in actions.items():
            bad = {a for a in acts if any(comp_of[t] != comp_of[s] for t in game.post(s, a))}
            if bad:
                acts -= bad
                changed = True
        if not changed:
            break
    mecs = [
        Mec(frozenset(c), {s: tuple(sorted(actions[s])) for s in sorted(c)})
        for c in comps
    ]
    return sorted(mecs, key=lambda m: min(m.states))


def mec_decomposition(game: StochasticGame, restrict_to: Iterable[int] | None = None) -> list[Mec]:
    region = set(range(len(game)) if restrict_to is None else restrict_to)
    actions = {
        s: {a for a in range(len(game.states[s].actions)) if game.post(s, a) <= region}
        for s in region
    }
    return _mecs_of(game, actions)


def induced_subgame(game: StochasticGame, removed: Iterable[int]) -> GameView:
    removed = set(removed)
    acts = {}
    for s in range(len(game)):
        if s in removed:
            continue
        keep = tuple(a for a in range(len(game.states[s].actions))
                     if not game.post(s, a) & removed)
        if keep:
            acts[s] = keep
    return GameView(frozenset(acts), acts)
