from __future__ import annotations

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fig
from soundvi.graph import (compute_partition, induced_subgame, mec_decomposition,
                           reachable_from, sccs)
from soundvi.harness import random_game
from soundvi.model import build_game
from soundvi.oracle import brute_force_end_components, exact_value


def test_partition_examples():
    p = compute_partition(fig(1))
    assert (p.targets, p.sinks, p.unknown) == ({1}, {2}, {0})
    p = compute_partition(fig(2))
    assert p.sinks == frozenset(range(len(fig(2)))) and not p.unknown
    p = compute_partition(fig(5))
    assert (p.targets, p.sinks, p.unknown) == ({3}, {4}, {0, 1, 2})


def test_scc_examples():
    assert sccs(fig(4), {0, 1}).components == (frozenset({0, 1}),)
    chain = build_game([("max", False, [("a", {1: 1})]), ("max", False, [("a", {2: 1})]),
                        ("max", False, [("a", {2: 1})])])
    assert sccs(chain).components == (frozenset({2}), frozenset({1}), frozenset({0}))
    loop = build_game([("max", False, [("a", {0: 1})])])
    assert sccs(loop).components == (frozenset({0}),)


def test_mec_examples():
    [m] = mec_decomposition(fig(4), {0, 1})
    assert m.states == {0, 1}
    assert m.actions == {0: (0,), 1: (0,)}
    [m] = mec_decomposition(fig(3), {0})
    assert m.states == {0} and m.actions == {0: (0,)}
    acyclic = build_game([("max", False, [("a", {1: 1})]), ("max", True, [("a", {1: 1})])])
    assert mec_decomposition(acyclic, {0}) == []


def test_induced_subgame_examples():
    g = fig(4)
    view = induced_subgame(g, {1})
    assert 1 not in view.states
    assert view.actions[0] == (1,)
    assert induced_subgame(g, set()).actions == {s: tuple(range(len(g.states[s].actions)))
                                                 for s in range(len(g))}
    assert induced_subgame(g, range(len(g))).states == frozenset()


def test_reachable_examples():
    g = fig(5)
    assert reachable_from(g, 2) == {2, 3}
    assert reachable_from(g, 3) == {3}
    assert reachable_from(g, 0) == set(range(5))


def _succ_closed_order(game, comps):
    """Successors-first: no edge from an earlier component to a later one."""
    pos = {s: i for i, c in enumerate(comps) for s in c}
    return all(pos[t] <= pos[s] for s in pos for t in game.successors(s) if t in pos)


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_scc_properties(rnd):
    g = random_game(rnd)
    dec = sccs(g)
    assert sorted(s for c in dec.components for s in c) == list(range(len(g)))
    assert _succ_closed_order(g, dec.components)
    for c in dec.components:
        for s in c:
            assert c <= reachable_from(g, s)
            assert all(s in reachable_from(g, t) for t in c)


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_mecs_match_brute_force(rnd):
    g = random_game(rnd)
    region = compute_partition(g).unknown
    ecs = brute_force_end_components(g, region)
    maximal = {e for e in ecs if not any(e < f for f in ecs)}
    mecs = mec_decomposition(g, region)
    assert {m.states for m in mecs} == maximal
    for m in mecs:
        for s in m.states:
            staying = tuple(a for a in range(len(g.states[s].actions)) if g.post(s, a) <= m.states)
            assert m.actions[s] == staying


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False))
def test_partition_matches_oracle(rnd):
    g = random_game(rnd)
    p = compute_partition(g)
    v = exact_value(g).values
    assert all(v[s] == 0 for s in p.sinks)
    assert all(v[s] == 1 for s in p.targets)
