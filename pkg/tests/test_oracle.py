from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fig
from soundvi.graph import compute_partition
from soundvi.harness import random_game
from soundvi.model import Owner, build_game
from soundvi.oracle import OracleTooLarge, exact_value, mc_reach


def test_mc_reach_fig1():
    assert mc_reach(fig(1), {1}) == [Fraction(1, 2), 1, 0]


def test_mc_reach_dict_chain():
    chain = {0: {0: Fraction(1, 2), 1: Fraction(1, 2)}, 1: {1: Fraction(1)}, 2: {2: Fraction(1)}}
    assert mc_reach(chain, {1}) == [1, 1, 0]


def test_mc_reach_rejects_choices():
    with pytest.raises(ValueError):
        mc_reach(fig(3), {1})


def test_figure_values():
    h = Fraction(1, 2)
    assert exact_value(fig(5)).values == [h, h, 1, 1, 0]
    assert exact_value(fig(4)).values[:2] == [h, h]
    assert exact_value(fig(3)).values[0] == h
    assert exact_value(fig(2)).values == [0, 0, 0]


def test_fig5_witnesses():
    ev = exact_value(fig(5))
    assert ev.min_strategy[0] == 0  # p plays a: b would give 1
    assert ev.max_strategy[1] == 0  # q plays a: b gives 0


def test_guard():
    # 21 two-action states: 2**21 > 10**6 profiles
    n = 21
    rows = [("max", False, [("a", {i + 1: 1}), ("b", {n: 1})]) for i in range(n)]
    rows.append(("max", True, [("a", {n: 1})]))
    with pytest.raises(OracleTooLarge, match="game too large for oracle"):
        exact_value(build_game(rows))


def _bellman_exact(game, s, v):
    vals = [sum(t.probability * v[t.successor] for t in act.transitions)
            for act in game.states[s].actions]
    return max(vals) if game.states[s].owner is Owner.MAX else min(vals)


@settings(max_examples=300, deadline=None)
@given(st.randoms(use_true_random=False))
def test_values_are_fixpoints(rnd):
    g = random_game(rnd)
    v = exact_value(g).values
    part = compute_partition(g)
    for s in range(len(g)):
        assert 0 <= v[s] <= 1
        if s in part.unknown:
            assert v[s] == _bellman_exact(g, s, v)
