"""Constructors for the tollbooth and ice-cream game families and AGG embedding."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import Decision, TaggGame, UtilityFunction

UTILITY_SHAPES: dict[str, Callable[[int], float]] = {
    "neg_count": lambda c: 0.0 - c,
    "neg_square": lambda c: 0.0 - c * c,
}


@dataclass(frozen=True)
class TollboothSpec:
    lanes: int
    waves: int
    cars_per_wave: int
    utility_shape: str = "neg_count"

    def __post_init__(self):
        if min(self.lanes, self.waves, self.cars_per_wave) < 1:
            raise ValueError("lanes, waves and cars_per_wave must all be at least 1")
        if self.utility_shape not in UTILITY_SHAPES:
            raise ValueError(f"unknown utility shape {self.utility_shape!r}")


@dataclass(frozen=True)
class IceCreamSpec:
    """``homes[j]`` is the 1-based home location of vendor ``j + 1``; vendors
    ``2t - 1`` and ``2t`` move on day ``t``."""

    locations: int
    days: int
    homes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "homes", tuple(int(h) for h in self.homes))
        if self.locations < 1 or self.days < 1:
            raise ValueError("need at least one location and one day")
        if len(self.homes) != 2 * self.days:
            raise ValueError(f"need {2 * self.days} homes, got {len(self.homes)}")
        if not all(1 <= h <= self.locations for h in self.homes):
            raise ValueError("home location out of range")

    @classmethod
    def random(cls, locations: int, days: int, seed=None) -> "IceCreamSpec":
        rng = np.random.default_rng(seed)
        return cls(locations, days, tuple(int(h) for h in rng.integers(1, locations + 1, size=2 * days)))


def lane(i: int) -> str:
    return f"L{i}"


def make_tollbooth(spec: TollboothSpec) -> TaggGame:
    lanes = tuple(lane(i) for i in range(1, spec.lanes + 1))
    shape = UTILITY_SHAPES[spec.utility_shape]
    decisions = []
    player = 0
    for t in range(1, spec.waves + 1):
        for j in range(1, spec.cars_per_wave + 1):
            player += 1
            decisions.append(Decision(f"D{t}.{j}", player, t, lanes, (t,), lanes))
    utilities = {}
    for t in range(1, spec.waves + 1):
        top = t * spec.cars_per_wave
        for a in lanes:
            utilities[(a, t)] = UtilityFunction(a, t, (a,), tuple(shape(c) for c in range(top + 1)))
    return TaggGame(player, spec.waves, lanes, (), tuple(decisions), utilities)


def beach_neighbors(i: int, locations: int) -> list[int]:
    return [j for j in (i - 1, i + 1) if 1 <= j <= locations]


def make_icecream(spec: IceCreamSpec, utility: Callable[[Sequence[int]], float] | None = None) -> TaggGame:
    """Ice-cream vendors on a linear beach.

    ``utility`` maps the counts of a location and its neighbors (location
    first) to a payoff; the default is minus their sum.
    """
    utility = utility or (lambda counts: 0.0 - sum(counts))
    locs = tuple(f"S{i}" for i in range(1, spec.locations + 1))
    T = spec.days
    decisions = []
    for j, home in enumerate(spec.homes, start=1):
        day = (j + 1) // 2
        seen = [home] + beach_neighbors(home, spec.locations)
        obs = tuple(locs[i - 1] for i in sorted(seen))
        decisions.append(Decision(f"V{j}", j, day, locs, (T,), obs))
    game = TaggGame(2 * T, T, locs, (), tuple(decisions), {})
    utilities = {}
    for i in range(1, spec.locations + 1):
        parents = (locs[i - 1],) + tuple(locs[j - 1] for j in beach_neighbors(i, spec.locations))
        table = tuple(utility(cfg) for cfg in game.configurations(parents, T))
        utilities[(locs[i - 1], T)] = UtilityFunction(locs[i - 1], T, parents, table)
    return TaggGame(2 * T, T, locs, (), tuple(decisions), utilities)


def embed_agg(
    actions: Sequence[str],
    action_sets: Sequence[Sequence[str]],
    graph: Mapping[str, Sequence[str]],
    utilities: Mapping[str, Sequence[float] | Mapping[tuple, float] | Callable[[tuple], float]],
) -> TaggGame:
    """One-shot action-graph game as a single-step game.

    ``graph[A]`` lists the neighbors of ``A`` (the nodes whose counts ``A``'s
    utility reads). A utility may be a flat table in configuration order, a
    mapping from count tuples, or a callable on count tuples. Count ranges are
    tightened to the number of players able to choose each action.
    """
    decisions = tuple(
        Decision(f"P{i}", i, 1, tuple(acts), (1,), ()) for i, acts in enumerate(action_sets, start=1)
    )
    game = TaggGame(len(decisions), 1, tuple(actions), (), decisions, {})
    used = {a for acts in action_sets for a in acts}
    out = {}
    for a in actions:
        if a not in utilities:
            if a in used:
                raise ValueError(f"no utility for action {a!r}")
            continue
        parents = tuple(graph.get(a, ()))
        configs = list(game.configurations(parents, 1))
        spec = utilities[a]
        if callable(spec):
            table = [spec(c) for c in configs]
        elif isinstance(spec, Mapping):
            missing = [c for c in configs if c not in spec]
            if missing:
                raise ValueError(f"utility of {a!r} missing configurations {missing[:3]}")
            table = [spec[c] for c in configs]
        else:
            table = list(spec)
            if len(table) != len(configs):
                raise ValueError(f"utility of {a!r} has {len(table)} entries, expected {len(configs)}")
        out[(a, 1)] = UtilityFunction(a, 1, parents, table)
    return TaggGame(len(decisions), 1, tuple(actions), (), decisions, out)

