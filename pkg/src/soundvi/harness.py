"""Random-game test harness: oracle comparison plus per-iteration invariants."""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .baselines import run_bvi, run_vi
from .graph import compute_partition
from .model import ActionRecord, Owner, StateRecord, StochasticGame, Transition, validate
from .oracle import brute_force_end_components, exact_value
from .solver import IterationRecord, SolveOptions, Status, solve

# Slack for float-vs-exact comparisons; the solvers run in double precision.
TOL = 1e-9
LABELS = "abc"


def _distribution(rng: random.Random, support: list[int]) -> dict[int, Fraction]:
    weights = [rng.randint(1, 4) for _ in support]
    total = sum(weights)
    return {s: Fraction(w, total) for s, w in zip(support, weights)}


def random_game(rng: random.Random) -> StochasticGame:
    """3 to 6 states, 1 to 3 actions, small-denominator probabilities.

    Half of the games force every action of a non-target state to put mass on
    a target; half get a self-loop or a deterministic 2-cycle injected, which
    creates end components.
    """
    n = rng.randint(3, 6)
    owners = [rng.choice((Owner.MAX, Owner.MIN)) for _ in range(n)]
    targets = set(rng.sample(range(n), rng.randint(1, max(1, n // 3))))
    forced = rng.random() < 0.5
    inject = rng.random() < 0.5

    dists: list[list[dict[int, Fraction]]] = []
    for s in range(n):
        acts = []
        for _ in range(rng.randint(1, 3)):
            support = rng.sample(range(n), rng.randint(1, min(3, n)))
            if forced and s not in targets and not targets & set(support):
                support.append(rng.choice(sorted(targets)))
            acts.append(_distribution(rng, support))
        dists.append(acts)

    if inject:
        others = [s for s in range(n) if s not in targets]
        cycle = rng.sample(others, min(len(others), rng.randint(1, 2)))
        for i, s in enumerate(cycle):
            loop = {cycle[(i + 1) % len(cycle)]: Fraction(1)}
            if len(dists[s]) < 3:
                dists[s].append(loop)
            else:
                dists[s][-1] = loop

    states = tuple(
        StateRecord(s, owners[s], tuple(
            ActionRecord(LABELS[a], tuple(Transition(t, p) for t, p in sorted(d.items())))
            for a, d in enumerate(dists[s])), s in targets)
        for s in range(n))
    game = StochasticGame(states, 0)
    assert not validate(game)
    return game


# Which invariant a violation belongs to.  "monotone-min" is the
# over-approximation monotonicity checked at Minimizer states; it is kept
# separate from "monotone" (Maximizer states, enforced by the delay guard).
ORACLE_CATEGORIES = ("oracle", "convergence", "partition")
INVARIANT_CATEGORIES = ("subdistribution", "fixed-states", "bounds-order", "bounds-monotone",
                        "sandwich", "monotone", "monotone-min", "bes-sound", "bes-complete",
                        "trap", "bvi-sandwich", "bvi-monotone", "vi-lower")
AGREEMENT_CATEGORIES = ("topo-agree", "bvi-agree")


@dataclass(frozen=True)
class Violation:
    category: str
    message: str

    def __str__(self) -> str:
        return f"[{self.category}] {self.message}"


@dataclass
class GameReport:
    index: int
    game: StochasticGame
    violations: list[Violation] = field(default_factory=list)
    iterations: dict[str, int] = field(default_factory=dict)

    def categories(self) -> set[str]:
        return {v.category for v in self.violations}


class _SviWatcher:
    """Checks the per-iteration invariants of one SVI run against exact values."""

    def __init__(self, game: StochasticGame, exact: list[Fraction], name: str, ec_cache: dict):
        self.game = game
        self.exact = exact
        self.v = [float(x) for x in exact]
        self.name = name
        self.ec_cache = ec_cache
        self.part = compute_partition(game)
        self.violations: list[Violation] = []
        self._seen: dict[str, int] = {}

    def _fail(self, category: str, k: int, msg: str) -> None:
        # a broken invariant tends to repeat every iteration; keep a few
        n = self._seen.get(category, 0)
        self._seen[category] = n + 1
        if n < 3:
            self.violations.append(Violation(category, f"{self.name} k={k}: {msg}"))

    def _ecs(self, region: frozenset[int]) -> list[frozenset[int]]:
        if region not in self.ec_cache:
            self.ec_cache[region] = brute_force_end_components(self.game, region)
        return self.ec_cache[region]

    def __call__(self, rec: IterationRecord) -> None:
        k, v, game = rec.k, self.v, self.game
        for s in range(len(game)):
            r, st = rec.reach[s], rec.stay[s]
            if not (-TOL <= r <= 1 + TOL and -TOL <= st <= 1 + TOL and r + st <= 1 + TOL):
                self._fail("subdistribution", k, f"state {s}: reach {r} stay {st}")
            if s in self.part.targets and (r, st) != (1.0, 0.0):
                self._fail("fixed-states", k, f"target {s} has reach {r} stay {st}")
            if s in self.part.sinks and (r, st) != (0.0, 0.0):
                self._fail("fixed-states", k, f"sink {s} has reach {r} stay {st}")
        for s in rec.unknown:
            lo, hi = rec.lower[s], rec.upper[s]
            if not 0.0 <= lo <= hi <= 1.0:
                self._fail("bounds-order", k, f"state {s}: l={lo} u={hi}")
            if lo < rec.lower_before[s] - TOL or hi > rec.upper_before[s] + TOL:
                self._fail("bounds-monotone", k, f"state {s}: l {rec.lower_before[s]} -> {lo}, "
                                                 f"u {rec.upper_before[s]} -> {hi}")
            low = rec.reach[s] + rec.stay[s] * lo
            high = rec.reach[s] + rec.stay[s] * hi
            if not low - TOL <= v[s] <= high + TOL:
                self._fail("sandwich", k, f"state {s}: V={self.exact[s]} outside [{low}, {high}]")
            if s in rec.unknown_before:
                u = rec.upper_before[s]
                before = rec.reach_before[s] + rec.stay_before[s] * u
                after = rec.reach[s] + rec.stay[s] * u
                if after > before + TOL:
                    cat = "monotone" if game.states[s].owner is Owner.MAX else "monotone-min"
                    self._fail(cat, k, f"state {s}: reach+stay*u rose from {before} to {after}")
        for s, a in sorted(rec.bes.pairs):
            fsa = sum(t.weight * rec.valuation[t.successor]
                      for t in game.states[s].actions[a].transitions)
            if fsa < v[s] - TOL:
                self._fail("bes-sound", k, f"best exit ({s},{a}) scores {fsa} below V={self.exact[s]}")
        for t in sorted(rec.bes.trap_states):
            if self.exact[t] != 0:
                self._fail("trap", k, f"trap state {t} has value {self.exact[t]}")
        for ec in self._ecs(rec.bes_region):
            exited = any(s in ec and not game.post(s, a) <= ec for s, a in rec.bes.pairs)
            if not exited and not ec <= rec.bes.trap_states:
                self._fail("bes-complete", k, f"end component {sorted(ec)} neither exited nor trapped")


def check_game(game: StochasticGame, index: int = 0, epsilon: float = 1e-6,
               delay_guard: bool = True, max_iterations: int = 100_000) -> GameReport:
    report = GameReport(index, game)
    out = report.violations

    def fail(category, msg):
        out.append(Violation(category, msg))

    exact = exact_value(game).values
    v = [float(x) for x in exact]
    n = len(game)
    part = compute_partition(game)
    for s in sorted(part.sinks):
        if exact[s] != 0:
            fail("partition", f"sink {s} has value {exact[s]}")
    for s in sorted(part.targets):
        if exact[s] != 1:
            fail("partition", f"target {s} has value {exact[s]}")

    ec_cache: dict = {}
    results = {}
    for name, topo in (("svi", False), ("svi-topo", True)):
        watcher = _SviWatcher(game, exact, name, ec_cache)
        opts = SolveOptions(epsilon=epsilon, topological=topo, max_iterations=max_iterations,
                            delay_guard=delay_guard)
        res = solve(game, opts, observer=watcher)
        out.extend(watcher.violations)
        results[name] = res
        report.iterations[name] = res.iterations
        if res.status is not Status.CONVERGED:
            fail("convergence", f"{name}: no convergence within {max_iterations} iterations")
            continue
        for s in range(n):
            if abs(res.values[s] - v[s]) > epsilon:
                fail("oracle", f"{name}: state {s} value {res.values[s]} vs exact {exact[s]}")
            if not res.lower[s] - TOL <= v[s] <= res.upper[s] + TOL:
                fail("sandwich", f"{name}: state {s} exact {exact[s]} outside final bounds")

    prev: list = []

    def bvi_watch(k, lower, upper):
        for s in range(n):
            if not lower[s] - TOL <= v[s] <= upper[s] + TOL:
                fail("bvi-sandwich", f"bvi k={k}: state {s} V={exact[s]} outside [{lower[s]}, {upper[s]}]")
            if prev and (upper[s] > prev[1][s] + TOL or lower[s] < prev[0][s] - TOL):
                fail("bvi-monotone", f"bvi k={k}: state {s} bounds moved the wrong way")
        prev[:] = [lower, upper]

    bvi = run_bvi(game, epsilon, max_iterations, observer=bvi_watch)
    report.iterations["bvi"] = bvi.iterations
    if bvi.status is not Status.CONVERGED:
        fail("convergence", f"bvi: no convergence within {max_iterations} iterations")
    else:
        for s in range(n):
            if abs(bvi.values[s] - v[s]) > epsilon:
                fail("oracle", f"bvi: state {s} value {bvi.values[s]} vs exact {exact[s]}")

    vi = run_vi(game, epsilon, max_iterations)
    for s in range(n):
        if vi.lower[s] > v[s] + TOL:
            fail("vi-lower", f"vi: state {s} lower {vi.lower[s]} above exact {exact[s]}")

    svi, topo = results["svi"], results["svi-topo"]
    if svi.status is Status.CONVERGED:
        for s in range(n):
            if topo.status is Status.CONVERGED and abs(topo.values[s] - svi.values[s]) > 2 * epsilon:
                fail("topo-agree", f"state {s}: svi-topo {topo.values[s]} vs svi {svi.values[s]}")
            if bvi.status is Status.CONVERGED and abs(bvi.values[s] - svi.values[s]) > 2 * epsilon:
                fail("bvi-agree", f"state {s}: bvi {bvi.values[s]} vs svi {svi.values[s]}")
    return report


@dataclass
class HarnessReport:
    seed: int
    games: list[GameReport]

    @property
    def failures(self) -> list[GameReport]:
        return [g for g in self.games if g.violations]

    @property
    def ok(self) -> bool:
        return not self.failures

    def counts(self) -> dict[str, int]:
        """Number of games with at least one violation, per category."""
        out: dict[str, int] = {}
        for g in self.games:
            for c in g.categories():
                out[c] = out.get(c, 0) + 1
        return dict(sorted(out.items()))

    def failing(self, categories) -> list[GameReport]:
        wanted = set(categories)
        return [g for g in self.games if g.categories() & wanted]


def game_for(seed: int, index: int) -> StochasticGame:
    return random_game(random.Random(f"{seed}:{index}"))


def run_harness(seed: int, n: int, workers: int = 1, delay_guard: bool = True,
                max_iterations: int = 100_000, epsilon: float = 1e-6) -> HarnessReport:
    def one(i):
        return check_game(game_for(seed, i), i, epsilon, delay_guard, max_iterations)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            games = list(pool.map(one, range(n)))
    else:
        games = [one(i) for i in range(n)]
    return HarnessReport(seed, games)
