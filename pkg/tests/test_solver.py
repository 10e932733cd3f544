from __future__ import annotations

import pytest

from conftest import fig
from soundvi.graph import compute_partition, mec_decomposition
from soundvi.model import build_game
from soundvi.oracle import exact_value
from soundvi.solver import (DELAY, BestExitSet, SolveOptions, Status, Stopping, apply_update,
                            bellman_candidate, best_exit_set, candidate_action, check_termination,
                            compute_bes, init_iteration, solve, solve_topological, trace_to_csv,
                            update_decision_values, update_global_bounds)


def _init(game):
    return init_iteration(game, compute_partition(game))


def test_init_fig1():
    it = _init(fig(1))
    assert it.reach == [0.0, 1.0, 0.0]
    assert it.stay == [1.0, 0.0, 0.0]


def test_init_fig4():
    it = _init(fig(4))
    assert it.reach[:2] == [0.0, 0.0] and it.stay[:2] == [1.0, 1.0]
    assert (it.l, it.u) == (0.0, 1.0)


def test_empty_unknown_set_terminates_immediately():
    res = solve(fig(2))
    assert res.iterations == 0 and res.status is Status.CONVERGED
    assert res.values == [0.0, 0.0, 0.0]


def test_candidate_action_fig3():
    g = fig(3)
    it = _init(g)
    assert candidate_action(g, 0, it, None) == 0
    assert candidate_action(g, 0, it, BestExitSet(frozenset({(0, 1)}))) == 1


def test_candidate_action_min_tie_lowest_index():
    g = fig(5)
    assert candidate_action(g, 0, _init(g), None) == 0


def test_candidate_action_fig4():
    g = fig(4)
    it = _init(g)
    assert candidate_action(g, 0, it, None) == 0
    assert candidate_action(g, 0, it, BestExitSet(frozenset({(0, 1)}))) == 1


def test_bellman_candidate_examples():
    it = _init(fig(1))
    assert bellman_candidate(fig(1), 0, 0, it) == pytest.approx((0.01, 0.98))
    it4 = _init(fig(4))
    assert bellman_candidate(fig(4), 0, 1, it4) == pytest.approx((1 / 3, 1 / 3))
    assert bellman_candidate(fig(1), 1, 0, it) == (1.0, 0.0)


def test_apply_update_commits_fig4_first_step():
    g = fig(4)
    r, st, delayed = apply_update(g, 0, 1, _init(g))
    assert (r, st) == pytest.approx((1 / 3, 1 / 3)) and not delayed


def test_apply_update_delays_fig4_s1():
    # s1 sits at (0.4, 0.2); action a would bring back stay 1, raising 0.6 to 1
    g = fig(4)
    it = _init(g)
    it.reach[:2] = [1 / 3, 0.4]
    it.stay[:2] = [1 / 3, 0.2]
    it.reach[0], it.stay[0] = 0.0, 1.0
    r, st, delayed = apply_update(g, 1, 0, it)
    assert delayed and (r, st) == (0.4, 0.2)
    assert apply_update(g, 1, 0, it, delay_guard=False) == (0.0, 1.0, False)


def test_fig4_trace_shows_delay_at_iteration_3():
    res = solve(fig(4), SolveOptions(trace=True))
    row = next(r for r in res.trace if r.k == 3 and r.state == 1)
    assert row.delayed and row.action == "DELAY"
    assert (row.reach, row.stay) == pytest.approx((0.4, 0.2))


@pytest.mark.parametrize("n", [1, 5])
def test_no_delays_without_end_components(n):
    res = solve(fig(n), SolveOptions(trace=True))
    assert not any(r.delayed for r in res.trace)


def test_decision_value_crossing():
    # alpha: 0.2 reach-part, 0.6 stay-part; beta: 0.4, 0.1 -> crossing 0.4
    g = build_game([
        ("max", False, [("alpha", {1: "0.2", 2: "0.6", 3: "0.2"}),
                        ("beta", {1: "0.4", 2: "0.1", 3: "0.5"})]),
        ("max", True, [("l", {1: 1})]),
        ("max", False, [("l", {2: 1}), ("x", {1: 1})]),
        ("max", False, [("l", {3: 1})]),
    ])
    it = _init(g)
    it.reach[2], it.stay[2] = 0.0, 1.0
    dl, du = update_decision_values(g, it, {0: 0})
    assert du[0] == pytest.approx(0.4)
    assert dl == it.decval_lower


def test_decision_value_single_action_and_negative_delta():
    g = fig(1)
    it = _init(g)
    assert update_decision_values(g, it, {0: 0}) == (it.decval_lower, it.decval_upper)
    g3 = fig(3)
    it3 = _init(g3)
    # alpha = b (stay 0) vs beta = a (stay 1): delta stay < 0, no crossing
    assert update_decision_values(g3, it3, {0: 1}) == (it3.decval_lower, it3.decval_upper)


def test_global_bounds_fig1():
    g = fig(1)
    it = _init(g)
    it.reach[0], it.stay[0] = 0.01, 0.98
    lo, hi = update_global_bounds(it)
    assert lo[0] == pytest.approx(0.5) and hi[0] == pytest.approx(0.5)


def test_global_bounds_blocked_by_stay_one():
    g = fig(4)
    it = _init(g)
    it.reach[0], it.stay[0] = 1 / 3, 1 / 3
    assert update_global_bounds(it) == ([0.0], [1.0])


def test_fig4_unguarded_bounds_never_move():
    res = solve(fig(4), SolveOptions(delay_guard=False, max_iterations=200, trace=True))
    assert res.status is Status.MAX_ITERATIONS
    assert all((r.l, r.u) == (0.0, 1.0) for r in res.trace)


def test_bes_fig3():
    g = fig(3)
    it = _init(g)
    bes = compute_bes(g, it, mec_decomposition(g, {0}))
    assert bes.pairs == {(0, 1)} and not bes.trap_states


def test_bes_fig4_first_iteration():
    g = fig(4)
    it = _init(g)
    bes = compute_bes(g, it, mec_decomposition(g, {0, 1}))
    assert bes.pairs == {(0, 1)}


def test_bes_min_only_trap():
    g = build_game([("min", False, [("a", {1: 1}), ("b", {2: 1})]),
                    ("min", False, [("a", {0: 1})]),
                    ("max", True, [("a", {2: 1})])])
    region = compute_partition(g).unknown
    [mec] = mec_decomposition(g, region)
    pairs, traps = best_exit_set(g, [0.0, 0.0, 1.0], mec.states)
    assert pairs == set() and traps == {0, 1}
    res = solve(g)
    assert res.values[:2] == [0.0, 0.0]


def test_termination_examples():
    g = fig(1)
    it = _init(g)
    opts = SolveOptions()
    assert not check_termination(it, opts)
    it.lower, it.upper = [0.3], [0.3]
    assert check_termination(it, opts)
    it.lower, it.upper = [0.0], [1.0]
    it.stay[0] = 0.0
    assert check_termination(it, opts)
    assert check_termination(it, SolveOptions(stopping=Stopping.RELATIVE))


def test_solve_fig1():
    res = solve(fig(1))
    assert res.values[0] == pytest.approx(0.5, abs=1e-12)
    assert res.iterations <= 3


def test_solve_fig3_with_and_without_ec_handling():
    res = solve(fig(3))
    assert res.values[0] == 0.5 and res.upper[0] - res.lower[0] == 0.0
    assert res.iterations <= 3
    stuck = solve(fig(3), SolveOptions(ec_handling=False, max_iterations=100, trace=True))
    assert stuck.status is Status.MAX_ITERATIONS
    assert all(r.u == 1.0 for r in stuck.trace)


def test_solve_fig4():
    res = solve(fig(4))
    assert res.status is Status.CONVERGED
    assert res.values[:2] == pytest.approx([0.5, 0.5], abs=1e-6)
    assert res.iterations <= 1000


def test_relative_stopping():
    res = solve(fig(5), SolveOptions(stopping=Stopping.RELATIVE))
    assert res.status is Status.CONVERGED
    assert res.values[0] == pytest.approx(0.5, rel=1e-5)


def test_topological_fig5():
    res = solve_topological(fig(5))
    plain = solve(fig(5))
    assert res.algorithm == "svi-topo"
    assert res.values == pytest.approx([0.5, 0.5, 1.0, 1.0, 0.0], abs=1e-6)
    assert all(abs(a - b) <= 2e-6 for a, b in zip(res.values, plain.values))
    assert res.iterations <= 5


def test_topological_single_scc_matches_plain():
    a = solve(fig(4), SolveOptions(trace=True))
    b = solve_topological(fig(4), SolveOptions(topological=True, trace=True))
    assert a.values == b.values and a.iterations == b.iterations


def test_topological_acyclic_is_exact():
    g = build_game([("max", False, [("a", {1: "1/2", 3: "1/2"}), ("b", {2: 1})]),
                    ("min", False, [("a", {2: "1/4", 3: "3/4"}), ("b", {3: 1})]),
                    ("max", False, [("a", {3: "1/5", 4: "4/5"})]),
                    ("max", True, [("a", {3: 1})]),
                    ("max", False, [("a", {4: 1})])])
    res = solve_topological(g)
    exact = [float(v) for v in exact_value(g).values]
    assert res.values == pytest.approx(exact, abs=1e-12)
    assert res.upper[:3] == res.lower[:3]


def test_chosen_uses_delay_marker():
    seen = []
    solve(fig(4), observer=lambda rec: seen.append(rec.chosen[:2]))
    assert [DELAY, 1] in seen or [1, DELAY] in seen


def test_trace_csv_format():
    res = solve(fig(1), SolveOptions(trace=True))
    text = trace_to_csv(res.trace)
    lines = text.splitlines()
    assert lines[0] == "k,state,action,reach,stay,l,u,decval_l,decval_u,bes_member,delayed"
    assert lines[1].startswith("1,0,a,0.01,0.98,")
    assert lines[1].endswith(",false,false")


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(epsilon=0)
    with pytest.raises(ValueError):
        SolveOptions(max_iterations=0)


def test_result_json_schema():
    res = solve(fig(1))
    out = res.to_json(fig(1))
    assert out["algorithm"] == "svi" and out["status"] == "converged"
    assert out["values"]["0"]["name"] == "s"
    assert set(out["values"]["0"]) == {"value", "lower", "upper", "action", "name"}
