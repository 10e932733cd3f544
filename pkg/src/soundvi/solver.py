"""Sound value iteration (SVI) for turn-based stochastic games.

The engine keeps, for every state, the probability ``reach`` of having hit a
target within k steps and the probability ``stay`` of still being undecided,
under k-step strategies that optimise ``reach + stay * b`` where ``b`` is the
player's global bound (upper for Maximizer, lower for Minimizer).  End
components are handled by forcing best exits and by a delay action that
keeps ``reach + stay * u`` from increasing.

Bounds live in *groups*.  The plain solver has one group holding every
unknown state; the topological solver has one group per SCC whose candidate
set is restricted to the unknown states reachable from it.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .graph import Mec, compute_partition, mec_decomposition, reachable_from, sccs
from .model import Owner, StatePartition, StochasticGame, normalize

DELAY = -1
# The bounds are floats and can land an ulp or two below a true value of 1 (or
# any value); with an exact comparison, every genuine update of such a state
# then looks like an increase and the state delays forever.  Increases below
# this slack are rounding artefacts, not the oscillation the guard exists for.
DELAY_SLACK = 1e-12
NEG_INF = float("-inf")
POS_INF = float("inf")


class Stopping(enum.Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"


@dataclass
class SolveOptions:
    epsilon: float = 1e-6
    stopping: Stopping = Stopping.ABSOLUTE
    ec_handling: bool = True
    topological: bool = False
    max_iterations: int = 10**7
    trace: bool = False
    # Only for mutation testing; switching it off reintroduces the EC oscillation.
    delay_guard: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class BestExitSet:
    pairs: frozenset[tuple[int, int]] = frozenset()
    trap_states: frozenset[int] = frozenset()

    def forced_action(self, s: int) -> int | None:
        acts = [a for (t, a) in self.pairs if t == s]
        return min(acts) if acts else None

    @property
    def states(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.pairs)


@dataclass
class IterationState:
    k: int
    reach: list[float]
    stay: list[float]
    group: list[int]  # bound group of each state, -1 outside the unknown set
    lower: list[float]  # per group
    upper: list[float]
    decval_lower: list[float]
    decval_upper: list[float]
    unknown: set[int]  # S? (shrinks when trap ECs are found)
    active: set[int]  # unknown states still being updated
    sinks: set[int]
    targets: frozenset[int]
    chosen: list[int | None] = field(default_factory=list)
    delayed: list[bool] = field(default_factory=list)
    forced: list[bool] = field(default_factory=list)

    @property
    def l(self) -> float:
        return self.lower[0] if self.lower else 0.0

    @property
    def u(self) -> float:
        return self.upper[0] if self.upper else 1.0

    def lower_of(self, s: int) -> float:
        g = self.group[s]
        return self.lower[g] if g >= 0 else 0.0

    def upper_of(self, s: int) -> float:
        g = self.group[s]
        return self.upper[g] if g >= 0 else 1.0

    def over(self, s: int) -> float:
        """Current over-approximation ``reach + stay * u`` of state ``s``."""
        return self.reach[s] + self.stay[s] * self.upper_of(s)


@dataclass(frozen=True)
class TraceRow:
    k: int
    state: int
    action: str
    reach: float
    stay: float
    l: float
    u: float
    decval_l: float
    decval_u: float
    bes_member: bool
    delayed: bool


TRACE_HEADER = ("k", "state", "action", "reach", "stay", "l", "u",
                "decval_l", "decval_u", "bes_member", "delayed")


def trace_to_csv(rows: Iterable[TraceRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in rows:
        w.writerow([r.k, r.state, r.action, repr(r.reach), repr(r.stay), repr(r.l), repr(r.u),
                    repr(r.decval_l), repr(r.decval_u),
                    str(r.bes_member).lower(), str(r.delayed).lower()])
    return buf.getvalue()


@dataclass
class IterationRecord:
    """Snapshot handed to observers after each iteration (k is the new step)."""

    k: int
    reach_before: list[float]
    stay_before: list[float]
    lower_before: list[float]  # per state
    upper_before: list[float]
    reach: list[float]
    stay: list[float]
    lower: list[float]
    upper: list[float]
    unknown_before: frozenset[int]
    unknown: frozenset[int]
    bes_region: frozenset[int]  # states the best exits were computed over, traps removed
    bes: BestExitSet
    valuation: list[float]
    chosen: list[int | None]
    delayed: list[bool]
    forced: list[bool]


@dataclass
class SolveResult:
    values: list[float]
    lower: list[float]
    upper: list[float] | None
    iterations: int
    actions: list[int | None]
    status: Status
    epsilon: float
    algorithm: str = "svi"
    trace: list | None = None

    def to_json(self, game: StochasticGame) -> dict:
        values = {}
        for s in range(len(self.values)):
            entry = {"value": self.values[s], "lower": self.lower[s],
                     "upper": None if self.upper is None else self.upper[s],
                     "action": game.label(s, self.actions[s])}
            if game.states[s].name is not None:
                entry["name"] = game.states[s].name
            values[str(s)] = entry
        return {"algorithm": self.algorithm, "status": self.status.value,
                "iterations": self.iterations, "epsilon": self.epsilon, "values": values}


# --- operations ------------------------------------------------------------


def init_iteration(game: StochasticGame, partition: StatePartition,
                   groups: list[frozenset[int]] | None = None) -> IterationState:
    n = len(game)
    if groups is None:
        groups = [partition.unknown] if partition.unknown else []
    group = [-1] * n
    for g, members in enumerate(groups):
        for s in members:
            group[s] = g
    reach = [1.0 if s in partition.targets else 0.0 for s in range(n)]
    stay = [1.0 if s in partition.unknown else 0.0 for s in range(n)]
    m = len(groups)
    return IterationState(
        k=0, reach=reach, stay=stay, group=group,
        lower=[0.0] * m, upper=[1.0] * m,
        decval_lower=[POS_INF] * m, decval_upper=[NEG_INF] * m,
        unknown=set(partition.unknown), active=set(partition.unknown),
        sinks=set(partition.sinks), targets=partition.targets,
        chosen=[None] * n, delayed=[False] * n, forced=[False] * n,
    )


def _score(game: StochasticGame, s: int, a: int, it: IterationState, b: float) -> float:
    reach, stay = it.reach, it.stay
    return sum(t.weight * (reach[t.successor] + stay[t.successor] * b)
               for t in game.states[s].actions[a].transitions)


def candidate_action(game: StochasticGame, s: int, it: IterationState,
                     bes: BestExitSet | None = None, ec_handling: bool = True) -> int:
    if ec_handling and bes is not None:
        forced = bes.forced_action(s)
        if forced is not None:
            return forced
    st = game.states[s]
    maximize = st.owner is Owner.MAX
    b = it.upper_of(s) if maximize else it.lower_of(s)
    best_a, best = 0, _score(game, s, 0, it, b)
    for a in range(1, len(st.actions)):
        v = _score(game, s, a, it, b)
        if (v > best) if maximize else (v < best):
            best_a, best = a, v
    return best_a


def bellman_candidate(game: StochasticGame, s: int, a: int, it: IterationState) -> tuple[float, float]:
    r = st = 0.0
    for t in game.states[s].actions[a].transitions:
        r += t.weight * it.reach[t.successor]
        st += t.weight * it.stay[t.successor]
    return r, st


def apply_update(game: StochasticGame, s: int, a: int, it: IterationState,
                 ec_handling: bool = True, delay_guard: bool = True) -> tuple[float, float, bool]:
    """Candidate (reach, stay) for ``s`` under ``a``, or the old pair plus a delay flag."""
    r, st = bellman_candidate(game, s, a, it)
    if ec_handling and delay_guard and game.states[s].owner is Owner.MAX:
        u = it.upper_of(s)
        if r + st * u > it.reach[s] + it.stay[s] * u + DELAY_SLACK:
            return it.reach[s], it.stay[s], True
    return r, st, False


def _crossings(game: StochasticGame, s: int, alpha_index: int, it: IterationState) -> list[float]:
    st = game.states[s]
    alpha = st.actions[alpha_index]
    out = []
    for b, beta in enumerate(st.actions):
        if b == alpha_index:
            continue
        diff: dict[int, float] = {}
        for t in alpha.transitions:
            diff[t.successor] = diff.get(t.successor, 0.0) + t.weight
        for t in beta.transitions:
            diff[t.successor] = diff.get(t.successor, 0.0) - t.weight
        d_stay = sum(w * it.stay[x] for x, w in diff.items())
        if d_stay > 0:
            out.append(-sum(w * it.reach[x] for x, w in diff.items()) / d_stay)
    return out


def update_decision_values(game: StochasticGame, it: IterationState, chosen: dict[int, int],
                           skip: Iterable[int] = (), scopes: list[frozenset[int]] | None = None
                           ) -> tuple[list[float], list[float]]:
    """Fold this iteration's crossing points into the decision values.

    A group's decision values range over the same states as its bound
    candidates (its scope); Maximizer states feed the upper one, Minimizer
    states the lower one.
    """
    if scopes is None:
        scopes = [frozenset(it.unknown)] * len(it.lower)
    skip = set(skip)
    lo: dict[int, float] = {}
    hi: dict[int, float] = {}
    for s in sorted(chosen):
        if s in skip:
            continue
        xs = _crossings(game, s, chosen[s], it)
        if not xs:
            continue
        if game.states[s].owner is Owner.MAX:
            hi[s] = max(xs)
        else:
            lo[s] = min(xs)
    dl, du = list(it.decval_lower), list(it.decval_upper)
    for g, scope in enumerate(scopes):
        for s in sorted(scope):
            if s in hi:
                du[g] = max(du[g], hi[s])
            if s in lo:
                dl[g] = min(dl[g], lo[s])
    return dl, du


def update_global_bounds(it: IterationState, scopes: list[frozenset[int]] | None = None
                         ) -> tuple[list[float], list[float]]:
    """Dynamic bounds per group; a group keeps its bounds unless every state in
    its scope has ``stay < 1`` and none of them was delayed this iteration."""
    if scopes is None:
        scopes = [frozenset(it.unknown)] * len(it.lower)
    lower, upper = list(it.lower), list(it.upper)
    for g, scope in enumerate(scopes):
        members = [s for s in sorted(scope) if s in it.unknown]
        if not members:
            continue
        if any(it.stay[s] >= 1.0 or it.delayed[s] for s in members):
            continue
        # ratios are probabilities; rounding may push them just outside [0, 1]
        ratios = [min(1.0, max(0.0, it.reach[s] / (1.0 - it.stay[s]))) for s in members]
        upper[g] = min(upper[g], max(max(ratios), it.decval_upper[g]))
        lower[g] = min(max(lower[g], min(min(ratios), it.decval_lower[g])), upper[g])
    return lower, upper


def best_exit_set(game: StochasticGame, valuation: list[float], region: Iterable[int],
                  pairs: set | None = None, traps: set | None = None,
                  visit: Callable[[frozenset[int], float | None], None] | None = None
                  ) -> tuple[set, set]:
    """Best exits of ``region`` and, recursively, of every sub-EC left after
    removing the best-exit states.  Exit tests always use the full game.

    ``visit(region, best)`` is called for every (sub-)EC processed, with the
    best exit value or None for a trap; deflation hooks in here.
    """
    pairs = set() if pairs is None else pairs
    traps = set() if traps is None else traps
    region = frozenset(region)
    exits = []
    for s in sorted(region):
        st = game.states[s]
        if st.owner is not Owner.MAX:
            continue
        for a, act in enumerate(st.actions):
            if not act.post <= region:
                exits.append((sum(t.weight * valuation[t.successor] for t in act.transitions), s, a))
    if not exits:
        traps.update(region)
        if visit is not None:
            visit(region, None)
        return pairs, traps
    top = max(v for v, _, _ in exits)
    if visit is not None:
        visit(region, top)
    best = [(s, a) for v, s, a in exits if v == top]
    pairs.update(best)
    removed = {s for s, _ in best}
    for mec in mec_decomposition(game, region - removed):
        best_exit_set(game, valuation, mec.states, pairs, traps, visit)
    return pairs, traps


def compute_bes(game: StochasticGame, it: IterationState, mecs: list[Mec]) -> BestExitSet:
    valuation = [it.over(s) for s in range(len(game))]
    pairs: set = set()
    traps: set = set()
    for mec in mecs:
        best_exit_set(game, valuation, mec.states, pairs, traps)
    return BestExitSet(frozenset(pairs), frozenset(traps))


def check_termination(it: IterationState, options: SolveOptions) -> bool:
    two_eps = 2 * options.epsilon
    for s in it.unknown:
        gap = it.stay[s] * (it.upper_of(s) - it.lower_of(s))
        if options.stopping is Stopping.RELATIVE and gap > 0:
            gap /= it.reach[s] + it.stay[s] * it.upper_of(s)
        if not gap < two_eps:
            return False
    return True


# --- driver ----------------------------------------------------------------


class _Engine:
    def __init__(self, game: StochasticGame, options: SolveOptions, topological: bool,
                 observer: Callable[[IterationRecord], None] | None):
        self.game = game
        self.options = options
        self.topological = topological
        self.observer = observer
        self.partition = compute_partition(game)
        unknown = self.partition.unknown
        if topological:
            groups = list(sccs(game, unknown).components)
            self.scopes = [
                frozenset().union(*(reachable_from(game, s) for s in comp)) & unknown
                for comp in groups
            ]
        else:
            groups = [unknown] if unknown else []
            self.scopes = [unknown] * len(groups)
        self.groups = groups
        self.frozen = [False] * len(groups)
        self.it = init_iteration(game, self.partition, groups)
        self.mecs = mec_decomposition(game, self.it.active) if options.ec_handling else []
        self.trace: list[TraceRow] | None = [] if options.trace else None
        self.last_action: list[int | None] = [
            0 if s in self.partition.targets else None for s in range(len(game))]

    def _per_state(self, values: list[float], default: float) -> list[float]:
        it = self.it
        return [values[it.group[s]] if it.group[s] >= 0 else default for s in range(len(self.game))]

    def step(self) -> None:
        game, it, opts = self.game, self.it, self.options
        n = len(game)
        watching = self.observer is not None
        if watching:
            reach_before, stay_before = list(it.reach), list(it.stay)
            lower_before = self._per_state(it.lower, 0.0)
            upper_before = self._per_state(it.upper, 1.0)
            unknown_before = frozenset(it.unknown)
        bes = BestExitSet()
        if opts.ec_handling and self.mecs:
            bes = self._best_exits()
        region = frozenset(it.active)
        valuation = [it.over(s) for s in range(n)]

        new_reach, new_stay = list(it.reach), list(it.stay)
        delayed, forced = [False] * n, [False] * n
        chosen: dict[int, int] = {}
        for s in sorted(it.active):
            a = candidate_action(game, s, it, bes, opts.ec_handling)
            forced[s] = opts.ec_handling and bes.forced_action(s) is not None
            new_reach[s], new_stay[s], delayed[s] = apply_update(
                game, s, a, it, opts.ec_handling, opts.delay_guard)
            chosen[s] = a

        skip = [s for s in chosen if delayed[s]]
        it.decval_lower, it.decval_upper = update_decision_values(game, it, chosen, skip, self.scopes)
        it.reach, it.stay = new_reach, new_stay
        it.delayed, it.forced = delayed, forced
        it.chosen = [None] * n
        for s, a in chosen.items():
            it.chosen[s] = DELAY if delayed[s] else a
            if not delayed[s]:
                self.last_action[s] = a
        it.k += 1
        scopes = [frozenset() if done else scope for done, scope in zip(self.frozen, self.scopes)]
        it.lower, it.upper = update_global_bounds(it, scopes)
        if self.topological:
            self._freeze_solved_groups()

        if self.trace is not None:
            bes_states = bes.states
            for s in sorted(chosen):
                g = it.group[s]
                label = "DELAY" if delayed[s] else game.label(s, chosen[s])
                self.trace.append(TraceRow(
                    it.k, s, label, it.reach[s], it.stay[s], it.lower[g], it.upper[g],
                    it.decval_lower[g], it.decval_upper[g], s in bes_states, delayed[s]))
        if watching:
            self.observer(IterationRecord(
                k=it.k, reach_before=reach_before, stay_before=stay_before,
                lower_before=lower_before, upper_before=upper_before,
                reach=list(it.reach), stay=list(it.stay),
                lower=self._per_state(it.lower, 0.0), upper=self._per_state(it.upper, 1.0),
                unknown_before=unknown_before, unknown=frozenset(it.unknown),
                bes_region=region, bes=bes, valuation=valuation,
                chosen=list(it.chosen), delayed=delayed, forced=forced))

    def _best_exits(self) -> BestExitSet:
        # Exits found next to a trap were ranked with the trap's stale
        # valuation; once traps sit in Z the ranking is redone.
        game, it = self.game, self.it
        traps: set[int] = set()
        while True:
            bes = compute_bes(game, it, self.mecs)
            if not bes.trap_states:
                return BestExitSet(bes.pairs, frozenset(traps))
            for t in bes.trap_states:
                it.reach[t] = it.stay[t] = 0.0
                it.unknown.discard(t)
                it.active.discard(t)
                it.sinks.add(t)
                self.last_action[t] = None
            traps |= bes.trap_states
            self.mecs = mec_decomposition(game, it.active)

    def _freeze_solved_groups(self) -> None:
        # l == u pins the value of every state in the scope; collapse the
        # group to exact values so upstream groups see a decided state.
        it = self.it
        for g, members in enumerate(self.groups):
            if self.frozen[g] or it.lower[g] != it.upper[g]:
                continue
            self.frozen[g] = True
            for s in members:
                if s in it.active:
                    it.reach[s] = it.reach[s] + it.stay[s] * it.lower[g]
                    it.stay[s] = 0.0
                    it.active.discard(s)
        if self.mecs:
            self.mecs = [m for m in self.mecs if m.states <= it.active]

    def run(self, algorithm: str) -> SolveResult:
        it, opts = self.it, self.options
        status = Status.CONVERGED
        if it.unknown:
            while True:
                if it.k >= opts.max_iterations:
                    status = Status.MAX_ITERATIONS
                    break
                self.step()
                if check_termination(it, opts):
                    break
        n = len(self.game)
        values, lower, upper = [0.0] * n, [0.0] * n, [0.0] * n
        for s in range(n):
            if s in it.targets:
                values[s] = lower[s] = upper[s] = 1.0
            elif s in it.unknown:
                lo, hi = it.lower_of(s), it.upper_of(s)
                lower[s] = it.reach[s] + it.stay[s] * lo
                upper[s] = it.reach[s] + it.stay[s] * hi
                values[s] = it.reach[s] + it.stay[s] * (lo + hi) / 2
        return SolveResult(values, lower, upper, it.k, list(self.last_action), status,
                           opts.epsilon, algorithm, self.trace)


def solve(game: StochasticGame, options: SolveOptions | None = None,
          observer: Callable[[IterationRecord], None] | None = None) -> SolveResult:
    options = options or SolveOptions()
    if options.topological:
        return solve_topological(game, options, observer)
    return _Engine(normalize(game), options, False, observer).run("svi")


def solve_topological(game: StochasticGame, options: SolveOptions | None = None,
                      observer: Callable[[IterationRecord], None] | None = None) -> SolveResult:
    options = options or SolveOptions(topological=True)
    return _Engine(normalize(game), options, True, observer).run("svi-topo")
