"""The Bayesian network a game induces under a behavior profile.

Variable naming:

==================  ======================
decision            ``D`` (its own id)
chance variable     ``X`` (its own id)
action count        ``A^t``
utility             ``U[A]^t``
decision payoff     ``u[D]^t``
intermediate count  ``M[A]^t.i``
relay copy          ``V@t``
==================  ======================

A^0 is never materialized: a parent that would be A^0 is dropped and read as
the constant 0.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .factor import BudgetExceeded, Factor
from .model import BehaviorProfile, TaggGame

KINDS = ("decision", "chance", "action_count", "utility", "decision_payoff", "intermediate_count", "copy")


def count_id(action: str, t: int) -> str:
    return f"{action}^{t}"


def utility_id(action: str, t: int) -> str:
    return f"U[{action}]^{t}"


def payoff_id(decision: str, t: int) -> str:
    return f"u[{decision}]^{t}"


@dataclass(frozen=True)
class NetVariable:
    id: str
    kind: str
    time: int
    domain: tuple
    parents: tuple[str, ...] = ()
    source: str | None = None  # game element this variable stands for

    @property
    def card(self) -> int:
        return len(self.domain)

    def index(self, value) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise ValueError(f"{value!r} not in domain of {self.id}") from None


# --------------------------------------------------------------------------- CPDs

@dataclass(frozen=True)
class Cpd:
    parents: tuple[str, ...]

    kind = "abstract"
    deterministic = True

    def rename(self, mapping: Mapping[str, str]) -> "Cpd":
        return replace(self, parents=tuple(mapping.get(p, p) for p in self.parents))

    def value_index(self, net: "InducedNet", var: str, grids: Sequence[np.ndarray]) -> np.ndarray:
        """Index of the deterministic value for each parent index combination."""
        raise NotImplementedError

    def distribution(self, net: "InducedNet", var: str, parent_idx: Sequence[int]) -> np.ndarray:
        out = np.zeros(net[var].card)
        grids = [np.array(i) for i in parent_idx]
        out[int(self.value_index(net, var, grids))] = 1.0
        return out


@dataclass(frozen=True)
class TableCpd(Cpd):
    """Explicit conditional table, shape ``parent cards + (card,)``."""

    table: np.ndarray = field(default=None, compare=False)
    kind = "table"
    deterministic = False

    def full_table(self, net, var):
        return self.table

    def distribution(self, net, var, parent_idx):
        return np.array(self.table[tuple(parent_idx)], dtype=float)


@dataclass(frozen=True)
class StrategyCpd(Cpd):
    """Behavior strategy of a decision.

    ``obs_parent[i]`` is the position in ``parents`` of observation ``i`` or
    ``-1`` when that observation is a dropped time-0 count (always 0).
    """

    observations: tuple[str, ...] = ()
    obs_parent: tuple[int, ...] = ()
    default: tuple[float, ...] = ()
    rules: Mapping[tuple, tuple[float, ...]] = field(default_factory=dict, compare=False)
    kind = "strategy"
    deterministic = False

    def _rule_index(self, net, key) -> tuple[int, ...] | None:
        idx = [0] * len(self.parents)
        for obs, pos, val in zip(self.observations, self.obs_parent, key):
            if pos < 0:
                if val != 0:
                    return None
                continue
            try:
                idx[pos] = net[self.parents[pos]].index(val)
            except ValueError:
                return None
        return tuple(idx)

    def full_table(self, net, var):
        cards = [net[p].card for p in self.parents]
        table = np.empty(cards + [len(self.default)])
        table[...] = self.default
        for key, probs in self.rules.items():
            idx = self._rule_index(net, key)
            if idx is not None:
                table[idx] = probs
        return table

    def distribution(self, net, var, parent_idx):
        key = tuple(0 if pos < 0 else net[self.parents[pos]].domain[parent_idx[pos]] for pos in self.obs_parent)
        return np.array(self.rules.get(key, self.default), dtype=float)


@dataclass(frozen=True)
class CounterCpd(Cpd):
    """Counts parents: a numeric parent adds its value, any other parent adds
    one when it equals ``action``."""

    action: str = ""
    numeric: tuple[bool, ...] = ()
    kind = "counter"

    def contribution(self, net, pos, grid):
        if self.numeric[pos]:
            return grid
        dom = net[self.parents[pos]].domain
        if self.action not in dom:
            return np.zeros_like(grid)
        return (grid == dom.index(self.action)).astype(int)

    def value_index(self, net, var, grids):
        total = 0
        for pos, g in enumerate(grids):
            total = total + self.contribution(net, pos, g)
        return np.asarray(total)

    def max_contribution(self, net, pos) -> int:
        if self.numeric[pos]:
            return net[self.parents[pos]].card - 1
        return int(self.action in net[self.parents[pos]].domain)


@dataclass(frozen=True)
class UtilityCpd(Cpd):
    """Deterministic utility; ``values`` has one entry per parent configuration."""

    values: np.ndarray = field(default=None, compare=False)
    kind = "utility_table"

    def value_index(self, net, var, grids):
        dom = net[var].domain
        idx = np.searchsorted(np.array(dom), self.values)
        if not grids:
            return np.asarray(idx)
        return idx[tuple(grids)]


@dataclass(frozen=True)
class MultiplexerCpd(Cpd):
    """Copies the parent picked by the selector (``parents[0]``).

    ``choices[k]`` is the position in ``parents`` selected when the selector
    takes its ``k``-th value, or ``-1`` for the constant 0.
    """

    choices: tuple[int, ...] = ()
    kind = "multiplexer"

    def value_index(self, net, var, grids):
        dom = np.array(net[var].domain)
        shape = np.broadcast_shapes(*(np.shape(g) for g in grids))
        out = np.zeros(shape, dtype=int)
        sel = np.broadcast_to(grids[0], shape)
        for k, pos in enumerate(self.choices):
            mask = sel == k
            if not mask.any():
                continue
            if pos < 0:
                out[mask] = int(np.searchsorted(dom, 0.0))
            else:
                pdom = np.array(net[self.parents[pos]].domain, dtype=float)
                mapped = np.searchsorted(dom, pdom)[np.broadcast_to(grids[pos], shape)]
                out[mask] = mapped[mask]
        return out


@dataclass(frozen=True)
class CopyCpd(Cpd):
    kind = "copy"

    def value_index(self, net, var, grids):
        return np.asarray(grids[0])


# --------------------------------------------------------------------------- net

@dataclass(frozen=True, eq=False)
class TransformPass:
    name: str
    provenance: Mapping[str, str]


@dataclass(frozen=True, eq=False)
class InducedNet:
    """Variables (topologically ordered), their CPDs, and the payoff targets."""

    variables: Mapping[str, NetVariable]
    cpds: Mapping[str, Cpd]
    targets: tuple[str, ...] = ()
    passes: tuple[TransformPass, ...] = ()
    original: frozenset = frozenset()
    _cache: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, v: str) -> NetVariable:
        return self.variables[v]

    def __contains__(self, v: str) -> bool:
        return v in self.variables

    def __len__(self):
        return len(self.variables)

    @property
    def cards(self) -> dict[str, int]:
        return {v.id: v.card for v in self.variables.values()}

    def children(self) -> dict[str, list[str]]:
        if "children" not in self._cache:
            ch: dict[str, list[str]] = {v: [] for v in self.variables}
            for v in self.variables.values():
                for p in v.parents:
                    ch[p].append(v.id)
            self._cache["children"] = ch
        return self._cache["children"]

    def ancestors(self, targets: Iterable[str]) -> set[str]:
        """``targets`` and all their ancestors."""
        seen = set()
        stack = list(targets)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            if v not in self.variables:
                raise KeyError(f"unknown variable {v!r}")
            seen.add(v)
            stack.extend(self.variables[v].parents)
        return seen

    def by_kind(self, kind: str) -> list[str]:
        return [v.id for v in self.variables.values() if v.kind == kind]

    def max_time(self) -> int:
        return max((v.time for v in self.variables.values()), default=0)

    def with_variables(self, variables, cpds, *, targets=None, passes=None) -> "InducedNet":
        return InducedNet(
            variables=variables,
            cpds=cpds,
            targets=self.targets if targets is None else targets,
            passes=self.passes if passes is None else passes,
            original=self.original,
        )

    def cpd_factor(
        self,
        var: str,
        fixed: Mapping[str, int] | None = None,
        windows: Mapping[str, tuple[int, int]] | None = None,
        *,
        compact: bool = False,
        budget: int | None = None,
    ) -> Factor:
        """CPD of ``var`` as a factor.

        ``fixed`` pins parents to value indices (they leave the scope).
        ``windows`` maps a variable to ``(start, size)``: its axis then covers
        value indices ``start..start+size-1`` only. With ``compact``,
        parents the table does not actually depend on are dropped.
        """
        return _cpd_factor(self, var, self.cpds[var], fixed or {}, windows or {}, compact, budget)


def _check_budget(cells: int, budget: int | None):
    if budget is not None and cells > budget:
        raise BudgetExceeded(cells, budget)


def _drop_constant_axes(scope: list[str], table: np.ndarray, keep: str) -> tuple[list[str], np.ndarray]:
    for i in reversed(range(len(scope))):
        if scope[i] == keep:
            continue
        first = np.take(table, [0], axis=i)
        if np.array_equal(np.broadcast_to(first, table.shape), table):
            table = np.take(table, 0, axis=i)
            scope = scope[:i] + scope[i + 1:]
    return scope, table


def _cpd_factor(net, var, cpd, fixed, windows, compact, budget):
    parents = cpd.parents
    pcards = [net[p].card for p in parents]
    ranges = []
    for p, n in zip(parents, pcards):
        if p in fixed:
            ranges.append((fixed[p], 1))
        else:
            ranges.append(windows.get(p, (0, n)))
    start, size = windows.get(var, (0, net[var].card))

    if isinstance(cpd, StrategyCpd) and compact and not cpd.rules:
        probs = np.asarray(cpd.default, dtype=float)[start:start + size]
        return Factor((var,), probs)

    cells = math.prod(r[1] for r in ranges) * size
    free = [p for p in parents if p not in fixed]

    if not cpd.deterministic:
        _check_budget(math.prod(pcards) * net[var].card, budget)
        key = ("table", var)
        if key not in net._cache:
            net._cache[key] = cpd.full_table(net, var)
        table = net._cache[key]
        index = tuple(
            r[0] if p in fixed else slice(r[0], r[0] + r[1]) for p, r in zip(parents, ranges)
        ) + (slice(start, start + size),)
        table = table[index]
        scope = free + [var]
        if compact:
            scope, table = _drop_constant_axes(scope, table, var)
        return Factor(tuple(scope), table)

    _check_budget(cells, budget)
    grids = np.ix_(*(np.arange(s, s + n) for s, n in ranges)) if ranges else ()
    shape = tuple(n for _, n in ranges)
    gidx = np.broadcast_to(cpd.value_index(net, var, list(grids)), shape)
    local = gidx - start
    valid = (local >= 0) & (local < size)
    table = np.zeros(shape + (size,))
    np.put_along_axis(table, np.where(valid, local, 0)[..., None], valid[..., None].astype(float), axis=-1)
    table = table[tuple(0 if p in fixed else slice(None) for p in parents)]
    return Factor(tuple(free) + (var,), table)


def eval_cpd(net: InducedNet, v: str, parent_config: Mapping[str, Any]) -> np.ndarray:
    """Distribution of ``v`` (aligned with its domain) given parent values."""
    var = net[v]
    missing = [p for p in var.parents if p not in parent_config]
    if missing:
        raise KeyError(f"parent configuration for {v} lacks {missing}")
    idx = [net[p].index(parent_config[p]) for p in var.parents]
    return net.cpds[v].distribution(net, v, idx)


def topological_order(net: InducedNet) -> list[str] | None:
    indeg = {v: len(var.parents) for v, var in net.variables.items()}
    children = {v: [] for v in net.variables}
    for v, var in net.variables.items():
        for p in var.parents:
            if p not in children:
                return None
            children[p].append(v)
    queue = deque(v for v, d in indeg.items() if d == 0)
    order = []
    while queue:
        v = queue.popleft()
        order.append(v)
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return order if len(order) == len(indeg) else None


def check_acyclic(net: InducedNet) -> bool:
    return topological_order(net) is not None


# --------------------------------------------------------------------------- build

def _reshape_rows(game: TaggGame, nodes, time, rows, width):
    cards = [len(game.node_domain(b, time)) for b in nodes]
    return np.asarray(rows, dtype=float).reshape(cards + ([width] if width else []))


def build_induced_net(game: TaggGame, profile: BehaviorProfile) -> InducedNet:
    """Compile ``game`` under ``profile`` into its induced network."""
    T = game.duration
    variables: dict[str, NetVariable] = {}
    cpds: dict[str, Cpd] = {}

    def add(var: NetVariable, cpd: Cpd):
        variables[var.id] = replace(var, parents=cpd.parents)
        cpds[var.id] = cpd

    def map_action(node, t):
        if node in game.actions:
            return count_id(node, t) if t >= 1 else None
        return node

    def add_chance(cv):
        mapped = [map_action(p, cv.time) for p in cv.parents]
        table = _reshape_rows(game, cv.parents, cv.time, cv.cpt, len(cv.domain))
        table = table[tuple(0 if m is None else slice(None) for m in mapped)]
        parents = tuple(m for m in mapped if m is not None)
        add(NetVariable(cv.id, "chance", cv.time, cv.domain, source=cv.id), TableCpd(parents, table=table))

    referenced = {(a, tau) for d in game.decisions for a in d.actions for tau in d.payoff_times}
    util_keys = set(game.utilities) | referenced

    for cv in game.chance_vars:
        if cv.time == 0:
            add_chance(cv)
    for t in range(1, T + 1):
        for d in game.decisions:
            if d.time != t:
                continue
            mapped = [map_action(o, t - 1) for o in d.observations]
            parents = tuple(m for m in mapped if m is not None)
            pos, k = [], 0
            for m in mapped:
                pos.append(-1 if m is None else k)
                k += m is not None
            strategy = profile[d.id]
            cpd = StrategyCpd(
                parents,
                observations=d.observations,
                obs_parent=tuple(pos),
                default=strategy.default,
                rules=strategy.lookup(d.observations),
            )
            add(NetVariable(d.id, "decision", t, d.actions, source=d.id), cpd)
        for a in game.actions:
            contributors = tuple(d.id for d in game.decisions if d.time <= t and a in d.actions)
            add(
                NetVariable(count_id(a, t), "action_count", t, tuple(range(len(contributors) + 1)), source=a),
                CounterCpd(contributors, action=a, numeric=(False,) * len(contributors)),
            )
        for cv in game.chance_vars:
            if cv.time == t:
                add_chance(cv)
        for a in game.actions:
            if (a, t) not in util_keys:
                continue
            u = game.utility(a, t)
            if u is None:
                parents, values = (), np.zeros(())
            else:
                parents = tuple(map_action(p, t) for p in u.parents)
                values = _reshape_rows(game, u.parents, t, u.table, 0) + 0.0  # no negative zero
            domain = tuple(float(x) for x in np.unique(values))
            add(NetVariable(utility_id(a, t), "utility", t, domain, source=a), UtilityCpd(parents, values=values))
        for d in game.decisions:
            if t not in d.payoff_times:
                continue
            parents = (d.id,) + tuple(utility_id(a, t) for a in d.actions)
            domain = sorted({x for p in parents[1:] for x in variables[p].domain})
            add(
                NetVariable(payoff_id(d.id, t), "decision_payoff", t, tuple(domain), source=d.id),
                MultiplexerCpd(parents, choices=tuple(range(1, len(parents)))),
            )
    targets = tuple(v for v in variables if variables[v].kind == "decision_payoff")
    return InducedNet(variables, cpds, targets=targets, original=frozenset(variables))
