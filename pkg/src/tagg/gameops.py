"""Player-level quantities: expected utility, best response, iterated best response."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filtering import FilterStats, interface_expectation
from .inference import InferenceStats, expectation, variable_elimination
from .model import (
    BehaviorProfile,
    DecisionStrategy,
    TaggGame,
    enumerate_observation_contexts,
)
from .network import StrategyCpd, build_induced_net, payoff_id
from .transform import transform

METHODS = ("induced_ve", "transformed_ve", "interface")
DEFAULT_CONTEXT_BUDGET = 100_000


@dataclass
class EuBreakdown:
    """Per-(decision, payoff time) expectations of one player and their sum."""

    player: int
    components: dict[tuple[str, int], float] = field(default_factory=dict)

    @property
    def total(self) -> float:
        return float(sum(self.components.values()))


def _net_for(game, profile, method):
    net = build_induced_net(game, profile)
    if method == "induced_ve":
        return net
    if method in ("transformed_ve", "interface"):
        return transform(net)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _payoff_expectation(net, target, method, budget, stats):
    if method == "interface":
        return interface_expectation(net, target, stats=stats if isinstance(stats, FilterStats) else None)
    f = variable_elimination(net, [target], budget=budget, stats=stats if isinstance(stats, InferenceStats) else None)
    return expectation(f, net[target].domain)


def expected_decision_payoff(
    game: TaggGame,
    profile: BehaviorProfile,
    d: str,
    tau: int,
    method: str = "interface",
    *,
    budget: int | None = None,
    stats=None,
) -> float:
    """Expected payoff credited to decision ``d`` at time ``tau``."""
    dec = game.decision(d)
    if tau not in dec.payoff_times:
        raise ValueError(f"{tau} is not a payoff time of {d}")
    net = _net_for(game, profile, method)
    return _payoff_expectation(net, payoff_id(d, tau), method, budget, stats)


def expected_utility(
    game: TaggGame,
    profile: BehaviorProfile,
    player: int,
    method: str = "interface",
    *,
    budget: int | None = None,
) -> EuBreakdown:
    decs = game.decisions_of(player)
    if not decs:
        raise ValueError(f"unknown player {player}")
    net = _net_for(game, profile, method)
    out = EuBreakdown(player)
    for dec in decs:
        for tau in sorted(dec.payoff_times):
            out.components[(dec.id, tau)] = _payoff_expectation(net, payoff_id(dec.id, tau), method, budget, None)
    return out


def _single_decision(game: TaggGame, player: int):
    decs = game.decisions_of(player)
    if not decs:
        raise ValueError(f"unknown player {player}")
    if len(decs) != 1:
        raise ValueError(f"player {player} has {len(decs)} decisions; best response needs exactly one")
    return decs[0]


def conditional_action_values(
    game: TaggGame,
    profile: BehaviorProfile,
    d: str,
    *,
    budget: int | None = None,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
) -> list[tuple[dict, float, np.ndarray]]:
    """For each observation context of ``d``: its probability and the
    conditional expected payoff of every action.

    Computed by VE on the transformed net with ``d`` playing uniformly, so
    every action has positive weight wherever the context does.
    """
    dec = game.decision(d)
    n_ctx = game.num_configurations(dec.observations, dec.time - 1)
    if n_ctx > context_budget:
        raise ValueError(f"{d} has {n_ctx} observation contexts, over the budget of {context_budget}")
    k = len(dec.actions)
    probe = profile.replace(d, DecisionStrategy(tuple(1.0 / k for _ in dec.actions)))
    net = transform(build_induced_net(game, probe))
    cpd = net.cpds[d]
    assert isinstance(cpd, StrategyCpd)
    obs_vars = list(cpd.parents)
    weight = None
    value = None
    for tau in sorted(dec.payoff_times):
        target = payoff_id(d, tau)
        f = variable_elimination(net, obs_vars + [d, target], budget=budget)
        dom = np.asarray(net[target].domain, dtype=float)
        w = f.table.sum(axis=-1)
        v = f.table @ dom
        weight = w if weight is None else weight
        value = v if value is None else value + v
    out = []
    for ctx in enumerate_observation_contexts(game, d):
        key = [ctx[o] for o in dec.observations]
        if any(pos < 0 and val != 0 for pos, val in zip(cpd.obs_parent, key)):
            out.append((ctx, 0.0, np.zeros(k)))
            continue
        idx = []
        for pos, val in zip(cpd.obs_parent, key):
            if pos >= 0:
                idx.append(net[obs_vars[pos]].index(val))
        idx = tuple(idx)
        w = weight[idx]
        p = float(w.sum())
        if p <= 0:
            out.append((ctx, 0.0, np.zeros(k)))
        else:
            out.append((ctx, p, value[idx] / w))
    return out


def best_response_single_decision(
    game: TaggGame,
    profile: BehaviorProfile,
    player: int,
    *,
    budget: int | None = None,
    context_budget: int = DEFAULT_CONTEXT_BUDGET,
) -> BehaviorProfile:
    """Deterministic best response of a single-decision player.

    Reachable contexts get a point mass on the best action (first in
    declaration order on ties); unreachable ones fall back to uniform.
    """
    dec = _single_decision(game, player)
    k = len(dec.actions)
    rules = []
    for ctx, p, vals in conditional_action_values(
        game, profile, dec.id, budget=budget, context_budget=context_budget
    ):
        if p <= 0:
            continue
        best = next(i for i in range(k) if vals[i] >= vals.max() - 1e-12)
        rules.append((ctx, tuple(1.0 if i == best else 0.0 for i in range(k))))
    return profile.replace(dec.id, DecisionStrategy(tuple(1.0 / k for _ in range(k)), tuple(rules)))


def regret(
    game: TaggGame,
    profile: BehaviorProfile,
    player: int,
    method: str = "interface",
    *,
    budget: int | None = None,
) -> float:
    """Gain available to ``player`` by switching to a best response."""
    _single_decision(game, player)
    br = best_response_single_decision(game, profile, player, budget=budget)
    now = expected_utility(game, profile, player, method, budget=budget).total
    best = expected_utility(game, br, player, method, budget=budget).total
    return best - now


@dataclass
class IbrResult:
    profile: BehaviorProfile
    converged: bool
    iterations: int
    history: list[dict[int, float]] = field(default_factory=list)

    def __iter__(self):
        return iter((self.profile, self.converged, self.iterations))


def iterated_best_response(
    game: TaggGame,
    initial: BehaviorProfile,
    max_iters: int = 50,
    tol: float = 1e-9,
    *,
    method: str = "interface",
    budget: int | None = None,
) -> IbrResult:
    """Gauss-Seidel best-response dynamics over players in id order.

    A player switches only when the best response gains more than ``tol``,
    so a round in which nobody switches leaves every EU unchanged and the
    profile is an equilibrium up to ``tol``.
    """
    players = sorted({d.player for d in game.decisions})
    for pl in players:
        _single_decision(game, pl)
    profile = initial
    history = []
    for it in range(1, max_iters + 1):
        switched = False
        for pl in players:
            br = best_response_single_decision(game, profile, pl, budget=budget)
            now = expected_utility(game, profile, pl, method, budget=budget).total
            new = expected_utility(game, br, pl, method, budget=budget).total
            if new - now > tol:
                profile = br
                switched = True
        history.append({pl: expected_utility(game, profile, pl, method, budget=budget).total for pl in players})
        if not switched:
            return IbrResult(profile, True, it, history)
    return IbrResult(profile, False, max_iters, history)
