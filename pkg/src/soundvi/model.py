"""Stochastic game data model and the JSON model-file format.

A model file looks like::

    {
      "initial": 0,
      "states": [
        {"owner": "max", "actions": [{"label": "a", "to": {"0": "0.98", "1": "1/100", "2": "1/100"}}]},
        {"owner": "max", "target": true, "actions": [{"label": "loop", "to": {"1": "1"}}]},
        {"owner": "max", "actions": [{"label": "loop", "to": {"2": "1"}}]}
      ]
    }

Probabilities are decimal (``"0.25"``) or fraction (``"1/3"``) strings and are
kept as exact rationals; a float copy is cached for the iterative solvers.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable


class Owner(enum.Enum):
    MAX = "max"
    MIN = "min"


class ModelError(ValueError):
    """Raised when a model file cannot be parsed or fails validation."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 violations: list[str] | None = None):
        self.line = line
        self.column = column
        self.violations = violations or []
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Transition:
    successor: int
    probability: Fraction
    weight: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.weight is None:
            object.__setattr__(self, "weight", float(self.probability))


@dataclass(frozen=True)
class ActionRecord:
    label: str
    transitions: tuple[Transition, ...]

    @property
    def post(self) -> frozenset[int]:
        return frozenset(t.successor for t in self.transitions)


@dataclass(frozen=True)
class StateRecord:
    id: int
    owner: Owner
    actions: tuple[ActionRecord, ...]
    is_target: bool = False
    name: str | None = None

    @property
    def is_max(self) -> bool:
        return self.owner is Owner.MAX


@dataclass(frozen=True)
class StochasticGame:
    states: tuple[StateRecord, ...]
    initial: int | None = None

    def __len__(self) -> int:
        return len(self.states)

    @property
    def targets(self) -> frozenset[int]:
        return frozenset(s.id for s in self.states if s.is_target)

    def post(self, s: int, a: int) -> frozenset[int]:
        return self.states[s].actions[a].post

    def successors(self, s: int) -> set[int]:
        """Union of successors over every action of ``s``."""
        out: set[int] = set()
        for act in self.states[s].actions:
            out.update(t.successor for t in act.transitions)
        return out

    def label(self, s: int, a: int | None) -> str | None:
        if a is None:
            return None
        return self.states[s].actions[a].label

    def state_name(self, s: int) -> str:
        return self.states[s].name or str(s)


@dataclass(frozen=True)
class StatePartition:
    targets: frozenset[int]
    sinks: frozenset[int]
    unknown: frozenset[int]


def parse_probability(raw: Any) -> Fraction:
    """Exact rational from a decimal/fraction string or a JSON integer.

    JSON floats are rejected: they have already lost the exact decimal the
    author wrote.
    """
    if isinstance(raw, bool) or isinstance(raw, float):
        raise ValueError(f"probability {raw!r} must be a decimal or fraction string")
    if isinstance(raw, int):
        return Fraction(raw)
    if not isinstance(raw, str):
        raise ValueError(f"probability {raw!r} must be a decimal or fraction string")
    try:
        return Fraction(raw.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed probability {raw!r}") from None


def _no_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise ValueError(f"duplicate key {key!r}")
        obj[key] = value
    return obj


def _state_index(key: str) -> int:
    if not key.strip().isdigit():
        raise ValueError(f"successor {key!r} is not a state index")
    return int(key)


def parse_model(text: str) -> StochasticGame:
    try:
        data = json.loads(text, object_pairs_hook=_no_duplicate_keys)
    except json.JSONDecodeError as exc:
        raise ModelError(exc.msg, exc.lineno, exc.colno) from None
    except ValueError as exc:
        # duplicate keys: json does not report a position for hook errors
        raise ModelError(f"syntax error: {exc}") from None

    if not isinstance(data, dict) or not isinstance(data.get("states"), list):
        raise ModelError('top-level object must have a "states" array')

    states = []
    for i, raw in enumerate(data["states"]):
        where = f"state {i}"
        if not isinstance(raw, dict):
            raise ModelError(f"{where}: expected an object")
        try:
            owner = Owner(raw.get("owner"))
        except ValueError:
            raise ModelError(f'{where}: owner must be "max" or "min", got {raw.get("owner")!r}') from None
        target = raw.get("target", False)
        if not isinstance(target, bool):
            raise ModelError(f"{where}: target must be a boolean")
        name = raw.get("name")
        if name is not None and not isinstance(name, str):
            raise ModelError(f"{where}: name must be a string")
        raw_actions = raw.get("actions", [])
        if not isinstance(raw_actions, list):
            raise ModelError(f"{where}: actions must be an array")
        actions = []
        for j, ra in enumerate(raw_actions):
            if not isinstance(ra, dict) or not isinstance(ra.get("to"), dict):
                raise ModelError(f'{where} action {j}: expected {{"label": ..., "to": {{...}}}}')
            label = ra.get("label", str(j))
            if not isinstance(label, str):
                raise ModelError(f"{where} action {j}: label must be a string")
            transitions = []
            for key, prob in ra["to"].items():
                try:
                    transitions.append(Transition(_state_index(key), parse_probability(prob)))
                except ValueError as exc:
                    raise ModelError(f"{where} action {label}: {exc}") from None
            actions.append(ActionRecord(label, tuple(transitions)))
        states.append(StateRecord(i, owner, tuple(actions), target, name))

    initial = data.get("initial")
    if initial is not None and (isinstance(initial, bool) or not isinstance(initial, int)):
        raise ModelError("initial must be a state index")
    game = StochasticGame(tuple(states), initial)
    problems = validate(game)
    if problems:
        raise ModelError("; ".join(problems), violations=problems)
    return game


def load_model(path) -> StochasticGame:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def serialize(game: StochasticGame) -> str:
    out: dict[str, Any] = {}
    if game.initial is not None:
        out["initial"] = game.initial
    states = []
    for st in game.states:
        rec: dict[str, Any] = {"owner": st.owner.value}
        if st.name is not None:
            rec["name"] = st.name
        if st.is_target:
            rec["target"] = True
        rec["actions"] = [
            {"label": act.label,
             "to": {str(t.successor): str(t.probability) for t in act.transitions}}
            for act in st.actions
        ]
        states.append(rec)
    out["states"] = states
    return json.dumps(out, indent=2)


def validate(game: StochasticGame) -> list[str]:
    n = len(game.states)
    problems = []
    if game.initial is not None and not 0 <= game.initial < n:
        problems.append(f"initial state {game.initial} out of range")
    for i, st in enumerate(game.states):
        if st.id != i:
            problems.append(f"state {i}: id {st.id} does not match its position")
        if not isinstance(st.owner, Owner):
            problems.append(f"state {i}: unknown owner {st.owner!r}")
        if not st.actions:
            problems.append(f"state {i}: no available actions")
        for act in st.actions:
            where = f"state {i} action {act.label}"
            seen = set()
            in_range = True
            for t in act.transitions:
                if not 0 <= t.successor < n:
                    problems.append(f"{where}: successor {t.successor} out of range")
                if t.successor in seen:
                    problems.append(f"{where}: duplicate successor {t.successor}")
                seen.add(t.successor)
                if not 0 < t.probability <= 1:
                    in_range = False
                elif abs(t.weight - float(t.probability)) > math.ulp(t.weight):
                    problems.append(f"{where}: cached float {t.weight!r} disagrees with {t.probability}")
            if not in_range:
                problems.append(f"{where}: probability out of range")
                continue
            total = sum((t.probability for t in act.transitions), Fraction(0))
            if total != 1:
                problems.append(f"{where}: distribution sum is {total}, expected 1")
    return problems


def _is_absorbing(st: StateRecord) -> bool:
    return (len(st.actions) == 1 and len(st.actions[0].transitions) == 1
            and st.actions[0].transitions[0].successor == st.id)


def normalize(game: StochasticGame) -> StochasticGame:
    """Make every target absorbing: its actions become a single self-loop."""
    states = []
    for st in game.states:
        if st.is_target and not _is_absorbing(st):
            loop = ActionRecord("loop", (Transition(st.id, Fraction(1)),))
            st = replace(st, actions=(loop,))
        states.append(st)
    return replace(game, states=tuple(states))


def build_game(rows: Iterable[tuple], initial: int | None = 0) -> StochasticGame:
    """Convenience constructor used by tests and the random generator.

    ``rows`` yields ``(owner, is_target, [(label, {succ: prob, ...}), ...])``
    where ``owner`` is ``"max"``/``"min"`` and probabilities are anything
    ``Fraction`` accepts.
    """
    states = []
    for i, (owner, target, actions) in enumerate(rows):
        acts = tuple(
            ActionRecord(label, tuple(Transition(int(s), Fraction(p)) for s, p in dist.items()))
            for label, dist in actions
        )
        states.append(StateRecord(i, Owner(owner), acts, bool(target)))
    return StochasticGame(tuple(states), initial)
