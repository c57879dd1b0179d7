"""Game model: actions, chance variables, decisions, utility functions.

Tables are stored flat. A table over a parent list is ordered
lexicographically over parent configurations with the last parent varying
fastest. Action parents range over tightened counts: an action observed or
used at time ``t`` takes values ``0..max_count(A, t)``, where ``max_count``
is the number of decisions at or before ``t`` that can choose ``A``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12

Configuration = dict  # node id -> value


@dataclass(frozen=True)
class ChanceVariable:
    id: str
    domain: tuple
    parents: tuple[str, ...]
    time: int
    cpt: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "cpt", tuple(tuple(float(p) for p in row) for row in self.cpt))


@dataclass(frozen=True)
class Decision:
    id: str
    player: int
    time: int
    actions: tuple[str, ...]
    payoff_times: tuple[int, ...]
    observations: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "payoff_times", tuple(sorted(set(self.payoff_times))))
        object.__setattr__(self, "observations", tuple(self.observations))


@dataclass(frozen=True)
class UtilityFunction:
    action: str
    time: int
    parents: tuple[str, ...]
    table: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "table", tuple(float(u) for u in self.table))


@dataclass(frozen=True)
class TaggGame:
    """A temporal action-graph game.

    ``utilities`` is keyed by ``(action, time)``. Pairs without an entry are
    the constant-zero utility.
    """

    num_players: int
    duration: int
    actions: tuple[str, ...]
    chance_vars: tuple[ChanceVariable, ...] = ()
    decisions: tuple[Decision, ...] = ()
    utilities: Mapping[tuple[str, int], UtilityFunction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "chance_vars", tuple(self.chance_vars))
        object.__setattr__(self, "decisions", tuple(self.decisions))
        object.__setattr__(self, "utilities", dict(self.utilities))

    def __hash__(self):
        return id(self)

    def decision(self, d: str) -> Decision:
        for dec in self.decisions:
            if dec.id == d:
                return dec
        raise KeyError(f"unknown decision {d!r}")

    def chance(self, x: str) -> ChanceVariable:
        for cv in self.chance_vars:
            if cv.id == x:
                return cv
        raise KeyError(f"unknown chance variable {x!r}")

    def decisions_of(self, player: int) -> list[Decision]:
        return [d for d in self.decisions if d.player == player]

    def utility(self, action: str, time: int) -> UtilityFunction | None:
        return self.utilities.get((action, time))

    def max_count(self, action: str, time: int) -> int:
        """Largest reachable count of ``action`` after ``time`` steps."""
        return sum(1 for d in self.decisions if d.time <= time and action in d.actions)

    def node_domain(self, node: str, time: int) -> tuple:
        """Values node ``node`` can take in a configuration at ``time``."""
        if node in self.actions:
            return tuple(range(self.max_count(node, time) + 1))
        for cv in self.chance_vars:
            if cv.id == node:
                return cv.domain
        return self.decision(node).actions

    def configurations(self, nodes: Sequence[str], time: int) -> Iterator[tuple]:
        """Configurations over ``nodes`` at ``time``, last node fastest."""
        return itertools.product(*(self.node_domain(b, time) for b in nodes))

    def num_configurations(self, nodes: Sequence[str], time: int) -> int:
        return math.prod(len(self.node_domain(b, time)) for b in nodes)


@dataclass(frozen=True)
class DecisionStrategy:
    """Behavior strategy at one decision.

    ``rules`` pairs an observation context (a tuple of ``(node, value)``
    pairs) with a distribution over the decision's actions; contexts that are
    not listed use ``default``.
    """

    default: tuple[float, ...]
    rules: tuple[tuple[tuple[tuple[str, Any], ...], tuple[float, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "default", tuple(float(p) for p in self.default))
        rules = []
        for ctx, probs in self.rules:
            items = ctx.items() if isinstance(ctx, Mapping) else ctx
            rules.append((tuple(sorted(items)), tuple(float(p) for p in probs)))
        object.__setattr__(self, "rules", tuple(rules))

    def lookup(self, observations: Sequence[str]) -> dict[tuple, tuple[float, ...]]:
        """Rule table keyed by value tuples in ``observations`` order."""
        table = {}
        for ctx, probs in self.rules:
            ctx = dict(ctx)
            if set(ctx) == set(observations):
                table[tuple(ctx[o] for o in observations)] = probs
        return table


@dataclass(frozen=True)
class BehaviorProfile:
    strategies: Mapping[str, DecisionStrategy]

    def __post_init__(self):
        object.__setattr__(self, "strategies", dict(self.strategies))

    def __hash__(self):
        return id(self)

    def __getitem__(self, d: str) -> DecisionStrategy:
        return self.strategies[d]

    def replace(self, d: str, strategy: DecisionStrategy) -> "BehaviorProfile":
        strategies = dict(self.strategies)
        strategies[d] = strategy
        return BehaviorProfile(strategies)


@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str

    def __str__(self):
        return f"{self.element}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    sizes: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, element: str, message: str) -> None:
        self.violations.append(Violation(code, element, message))

    def codes(self) -> set[str]:
        return {v.code for v in self.violations}

    def __str__(self):
        lines = [str(v) for v in self.violations] or ["valid"]
        lines += [f"{k} = {v}" for k, v in self.sizes.items()]
        return "\n".join(lines)


def _chance_cycle(chance_vars) -> list[str]:
    graph = {cv.id: [p for p in cv.parents] for cv in chance_vars}
    state: dict[str, int] = {}
    cyclic = []

    def visit(x):
        state[x] = 1
        for p in graph.get(x, ()):
            if p not in graph:
                continue
            if state.get(p) == 1:
                cyclic.append(x)
            elif p not in state:
                visit(p)
        state[x] = 2

    for x in graph:
        if x not in state:
            visit(x)
    return cyclic


def validate_game(game: TaggGame) -> ValidationReport:
    """Check every structural constraint of ``game``.

    Violations are collected, never raised. The report also carries the size
    accounting used to judge compactness: the largest chance-variable and
    utility parent sets and the total number of table cells.
    """
    rep = ValidationReport()
    T = game.duration
    if game.num_players < 1:
        rep.add("players", "game", "need at least one player")
    if T < 1:
        rep.add("duration", "game", "duration must be at least 1")

    seen: set[str] = set()
    for node in (*game.actions, *(c.id for c in game.chance_vars), *(d.id for d in game.decisions)):
        if node in seen:
            rep.add("duplicate_id", node, "duplicate id")
        seen.add(node)
    actions = set(game.actions)
    chance = {c.id: c for c in game.chance_vars}
    decisions = {d.id: d for d in game.decisions}

    for cv in game.chance_vars:
        if not cv.domain:
            rep.add("empty_domain", cv.id, "empty domain")
        if not 0 <= cv.time <= T:
            rep.add("time_range", cv.id, f"instantiation time {cv.time} outside 0..{T}")
        bad = [p for p in cv.parents if p not in actions and p not in chance]
        for p in bad:
            rep.add("unknown_parent", cv.id, f"unknown parent {p!r}")
        for p in cv.parents:
            if p in chance and chance[p].time > cv.time:
                rep.add("parent_after_child", cv.id, f"parent instantiated after child ({p})")
        if bad:
            continue
        rows = game.num_configurations(cv.parents, cv.time)
        if len(cv.cpt) != rows:
            rep.add("cpt_shape", cv.id, f"cpt has {len(cv.cpt)} rows, expected {rows}")
        for i, row in enumerate(cv.cpt):
            if len(row) != len(cv.domain):
                rep.add("cpt_shape", cv.id, f"cpt row {i} has {len(row)} entries, expected {len(cv.domain)}")
            elif any(p < 0 for p in row) or abs(sum(row) - 1.0) > PROB_TOL:
                rep.add("cpt_normalization", cv.id, f"cpt row {i} is not a distribution")
    for x in _chance_cycle(game.chance_vars):
        rep.add("chance_cycle", x, "chance variables form a cycle")

    slots: set[tuple[int, int]] = set()
    for d in game.decisions:
        if not 1 <= d.player <= game.num_players:
            rep.add("player_range", d.id, f"player {d.player} outside 1..{game.num_players}")
        if not 1 <= d.time <= T:
            rep.add("time_range", d.id, f"decision time {d.time} outside 1..{T}")
        if (d.player, d.time) in slots:
            rep.add("player_time_clash", d.id, f"player {d.player} has two decisions at time {d.time}")
        slots.add((d.player, d.time))
        if not d.actions:
            rep.add("empty_action_set", d.id, "empty action set")
        if len(set(d.actions)) != len(d.actions):
            rep.add("duplicate_action", d.id, "repeated action in action set")
        for a in d.actions:
            if a not in actions:
                rep.add("unknown_action", d.id, f"action {a!r} not in game")
        if not d.payoff_times:
            rep.add("payoff_times", d.id, "no payoff times")
        for tau in d.payoff_times:
            if not d.time <= tau <= T:
                rep.add("payoff_times", d.id, f"payoff time {tau} outside {d.time}..{T}")
        for o in d.observations:
            if o in decisions:
                if decisions[o].time >= d.time:
                    rep.add("observation_time", d.id, f"observed decision not earlier ({o})")
            elif o in chance:
                if chance[o].time >= d.time:
                    rep.add("observation_time", d.id, f"observed chance variable not earlier ({o})")
            elif o not in actions:
                rep.add("unknown_observation", d.id, f"unknown observation {o!r}")

    for key, u in game.utilities.items():
        name = f"U[{u.action},{u.time}]"
        if key != (u.action, u.time):
            rep.add("utility_key", name, f"stored under mismatched key {key}")
        if u.action not in actions:
            rep.add("unknown_action", name, f"action {u.action!r} not in game")
        if not 1 <= u.time <= T:
            rep.add("time_range", name, f"time {u.time} outside 1..{T}")
        bad = [p for p in u.parents if p not in actions and p not in chance]
        for p in bad:
            rep.add("unknown_parent", name, f"unknown parent {p!r}")
        for p in u.parents:
            if p in chance and chance[p].time > u.time:
                rep.add("parent_after_child", name, f"parent instantiated after child ({p})")
        if bad:
            continue
        cells = game.num_configurations(u.parents, u.time)
        if len(u.table) != cells:
            rep.add("utility_table", name, f"table has {len(u.table)} entries, expected {cells}")
        if not all(math.isfinite(x) for x in u.table):
            rep.add("utility_table", name, "non-finite utility")

    rep.sizes = {
        "max_chance_parents": max((len(c.parents) for c in game.chance_vars), default=0),
        "max_utility_parents": max((len(u.parents) for u in game.utilities.values()), default=0),
        "table_cells": sum(len(c.cpt) * len(c.domain) for c in game.chance_vars)
        + sum(len(u.table) for u in game.utilities.values()),
    }
    return rep


def enumerate_observation_contexts(game: TaggGame, d: str) -> list[Configuration]:
    """Every configuration decision ``d`` may observe, in table order."""
    dec = game.decision(d)
    nodes = dec.observations
    return [dict(zip(nodes, vals)) for vals in game.configurations(nodes, dec.time - 1)]


def uniform_profile(game: TaggGame) -> BehaviorProfile:
    return BehaviorProfile(
        {d.id: DecisionStrategy(tuple(1.0 / len(d.actions) for _ in d.actions)) for d in game.decisions}
    )


def random_profile(game: TaggGame, rng: np.random.Generator | int | None = None) -> BehaviorProfile:
    """Profile whose default distributions are drawn from a flat Dirichlet."""
    rng = np.random.default_rng(rng)
    return BehaviorProfile(
        {d.id: DecisionStrategy(tuple(rng.dirichlet(np.ones(len(d.actions))))) for d in game.decisions}
    )


def pure_profile(game: TaggGame, choices: Mapping[str, str], base: BehaviorProfile | None = None) -> BehaviorProfile:
    """Profile playing ``choices[d]`` deterministically at each listed decision."""
    base = base or uniform_profile(game)
    strategies = dict(base.strategies)
    for d, a in choices.items():
        acts = game.decision(d).actions
        strategies[d] = DecisionStrategy(tuple(1.0 if x == a else 0.0 for x in acts))
    return BehaviorProfile(strategies)


def _check_distribution(rep, element, probs, n, what):
    if len(probs) != n:
        rep.add("support", element, f"{what} has {len(probs)} entries for {n} actions")
    elif any(p < 0 for p in probs):
        rep.add("support", element, f"{what} has negative mass")
    elif abs(sum(probs) - 1.0) > PROB_TOL:
        rep.add("normalization", element, f"{what} sums to {sum(probs):.17g}")


def validate_profile(game: TaggGame, profile: BehaviorProfile) -> ValidationReport:
    rep = ValidationReport()
    for d in game.decisions:
        if d.id not in profile.strategies:
            rep.add("missing_strategy", d.id, "no strategy")
            continue
        s = profile[d.id]
        _check_distribution(rep, d.id, s.default, len(d.actions), "default")
        for ctx, probs in s.rules:
            ctx = dict(ctx)
            label = f"rule {ctx}"
            _check_distribution(rep, d.id, probs, len(d.actions), label)
            extra = set(ctx) - set(d.observations)
            missing = set(d.observations) - set(ctx)
            if extra or missing:
                rep.add("context", d.id, f"{label} keyed on unobserved or incomplete variables")
                continue
            for node, val in ctx.items():
                if val not in game.node_domain(node, d.time - 1):
                    rep.add("context", d.id, f"{label}: value {val!r} impossible for {node}")
    for d in profile.strategies:
        if d not in {x.id for x in game.decisions}:
            rep.add("unknown_decision", d, "strategy for unknown decision")
    return rep
