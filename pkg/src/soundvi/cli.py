"""Command-line front end.

    soundvi solve   --alg svi --epsilon 1e-6 models/fig1.json
    soundvi compare --algs svi,bvi models/fig5.json
    soundvi inspect models/fig3.json
    soundvi oracle  models/fig4.json
    soundvi harness --seed 42 --n 500

Exit codes: 0 converged / all good, 1 input error, 2 iteration cap hit,
3 harness found a violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .baselines import baseline_trace_to_csv, run_bvi, run_vi
from .graph import compute_partition, mec_decomposition, sccs
from .harness import run_harness
from .model import ModelError, StochasticGame, load_model, normalize, serialize
from .oracle import OracleTooLarge, exact_value
from .solver import SolveOptions, SolveResult, Status, Stopping, solve, trace_to_csv

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_HARNESS = 0, 1, 2, 3
ALGORITHMS = ("svi", "svi-topo", "bvi", "vi", "oracle")


def _options(args, topological: bool = False) -> SolveOptions:
    return SolveOptions(
        epsilon=args.epsilon,
        stopping=Stopping.RELATIVE if args.relative else Stopping.ABSOLUTE,
        ec_handling=not args.no_ec_handling,
        topological=topological or args.topological,
        max_iterations=args.max_iter,
        trace=bool(getattr(args, "trace", None)),
        delay_guard=not args.no_delay_guard,
    )


def run_algorithm(game: StochasticGame, alg: str, args) -> SolveResult:
    if alg == "svi":
        return solve(game, _options(args))
    if alg == "svi-topo":
        return solve(game, _options(args, topological=True))
    if alg == "bvi":
        return run_bvi(game, args.epsilon, args.max_iter, trace=bool(getattr(args, "trace", None)))
    if alg == "vi":
        return run_vi(game, args.epsilon, args.max_iter, trace=bool(getattr(args, "trace", None)))
    raise ValueError(f"unknown algorithm {alg!r}")


def _oracle_json(game: StochasticGame) -> dict:
    exact = exact_value(game)
    values = {}
    for s, v in enumerate(exact.values):
        act = exact.max_strategy[s] if exact.max_strategy[s] is not None else exact.min_strategy[s]
        entry = {"value": str(v), "action": game.label(s, act)}
        if game.states[s].name is not None:
            entry["name"] = game.states[s].name
        values[str(s)] = entry
    return {"algorithm": "oracle", "values": values}


def _load(path: str) -> StochasticGame:
    try:
        return normalize(load_model(path))
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror or exc}") from None


def cmd_solve(args) -> int:
    game = _load(args.model)
    if args.alg == "oracle":
        print(json.dumps(_oracle_json(game), indent=2))
        return EXIT_OK
    result = run_algorithm(game, args.alg, args)
    print(json.dumps(result.to_json(game), indent=2))
    if args.trace:
        writer = trace_to_csv if args.alg.startswith("svi") else baseline_trace_to_csv
        Path(args.trace).write_text(writer(result.trace or []))
    return EXIT_OK if result.status is Status.CONVERGED else EXIT_CAP


def cmd_compare(args) -> int:
    game = _load(args.model)
    algs = [a.strip() for a in args.algs.split(",") if a.strip()]
    for a in algs:
        if a not in ALGORITHMS or a == "oracle":
            raise ModelError(f"unknown algorithm {a!r} for compare")
    s0 = game.initial if game.initial is not None else 0
    print("algorithm,iterations,value,width,millis")
    status = EXIT_OK
    for a in algs:
        start = time.perf_counter()
        res = run_algorithm(game, a, args)
        millis = (time.perf_counter() - start) * 1000
        width = "" if res.upper is None else repr(res.upper[s0] - res.lower[s0])
        print(f"{a},{res.iterations},{res.values[s0]!r},{width},{millis:.3f}")
        if res.status is not Status.CONVERGED:
            status = EXIT_CAP
    return status


def cmd_inspect(args) -> int:
    game = _load(args.model)
    part = compute_partition(game)
    report = {
        "states": len(game),
        "targets": sorted(part.targets),
        "sinks": sorted(part.sinks),
        "unknown": sorted(part.unknown),
        "sccs": [sorted(c) for c in sccs(game, part.unknown).components],
        "mecs": [
            {"states": sorted(m.states),
             "actions": {str(s): [game.label(s, a) for a in acts] for s, acts in m.actions.items()}}
            for m in mec_decomposition(game, part.unknown)
        ],
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_oracle(args) -> int:
    game = _load(args.model)
    try:
        print(json.dumps(_oracle_json(game), indent=2))
    except OracleTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_harness(args) -> int:
    report = run_harness(args.seed, args.n, workers=args.workers,
                         delay_guard=not args.no_delay_guard, max_iterations=args.max_iter,
                         epsilon=args.epsilon)
    failures = report.failures
    print(f"seed {args.seed}: {args.n - len(failures)}/{args.n} games passed")
    for cat, count in report.counts().items():
        print(f"  {cat}: {count} game(s)")
    for g in failures:
        print(f"--- game {g.index}")
        for v in g.violations:
            print(f"  {v}")
        print(serialize(g.game))
    return EXIT_OK if report.ok else EXIT_HARNESS


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--relative", action="store_true", help="relative stopping criterion")
    p.add_argument("--no-ec-handling", action="store_true")
    p.add_argument("--topological", action="store_true")
    p.add_argument("--max-iter", type=int, default=10**7)
    p.add_argument("--no-delay-guard", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soundvi", description="Sound value iteration for stochastic games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one model and print JSON")
    p.add_argument("model")
    p.add_argument("--alg", choices=ALGORITHMS, default="svi")
    p.add_argument("--trace", metavar="PATH", help="write the per-iteration trace as CSV")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("compare", help="run several algorithms and print a CSV table")
    p.add_argument("model")
    p.add_argument("--algs", default="svi,svi-topo,bvi,vi")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("inspect", help="partition, SCCs and MECs as JSON")
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("oracle", help="exact values as fractions")
    p.add_argument("model")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("harness", help="random games against the oracle")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--no-delay-guard", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_harness)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "epsilon", 1) <= 0:
            raise ModelError("--epsilon must be positive")
        if getattr(args, "max_iter", 1) < 1:
            raise ModelError("--max-iter must be at least 1")
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
