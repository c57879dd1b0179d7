"""Variable elimination with a min-fill ordering and an optional cell budget."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .factor import BudgetExceeded, Factor, multiply_all, sum_product_eliminate
from .network import InducedNet


@dataclass
class InferenceStats:
    peak_cells: int = 0
    eliminations: int = 0
    inconsistent: bool = False

    def see(self, cells: int) -> None:
        self.peak_cells = max(self.peak_cells, cells)


def min_fill_order(adjacency: Mapping[str, Iterable[str]], eliminate: Iterable[str]) -> list[str]:
    """Greedy min-fill elimination order; ties go to the smaller id."""
    adj = {v: set(ns) for v, ns in adjacency.items()}
    todo = set(eliminate)
    for v in todo:
        adj.setdefault(v, set())

    def fill(v):
        ns = list(adj[v])
        return sum(1 for i in range(len(ns)) for j in range(i + 1, len(ns)) if ns[j] not in adj[ns[i]])

    cost = {v: fill(v) for v in todo}
    order = []
    while todo:
        v = min(todo, key=lambda u: (cost[u], u))
        order.append(v)
        todo.remove(v)
        ns = adj.pop(v)
        for a in ns:
            adj[a].discard(v)
            adj[a].update(ns - {a})
        dirty = set(ns)
        for a in ns:
            dirty |= adj[a]
        for u in dirty & todo:
            cost[u] = fill(u)
        del cost[v]
    return order


def interaction_graph(scopes: Iterable[Sequence[str]]) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {}
    for scope in scopes:
        for v in scope:
            adj.setdefault(v, set()).update(u for u in scope if u != v)
    return adj


def prune_barren(net: InducedNet, keep: Iterable[str]) -> list[str]:
    """Variables that can influence ``keep``, in the net's order."""
    anc = net.ancestors(keep)
    return [v for v in net.variables if v in anc]


def min_fill_ordering(net: InducedNet, query: Iterable[str], evidence: Iterable[str] = ()) -> list[str]:
    """Min-fill order over the moral graph of the query's relevant subnet."""
    query, evidence = set(query), set(evidence)
    relevant = prune_barren(net, query | evidence)
    scopes = [(v,) + net[v].parents for v in relevant]
    adj = interaction_graph([tuple(u for u in s if u not in evidence) for s in scopes])
    return min_fill_order(adj, [v for v in relevant if v not in query and v not in evidence])


def eliminate_all(
    factors: list[Factor],
    order: Sequence[str],
    keep: Sequence[str],
    *,
    budget: int | None = None,
    stats: InferenceStats | None = None,
) -> Factor:
    """Sum out ``order`` from the product of ``factors``; the result is over ``keep``."""
    for var in order:
        factors, cells = sum_product_eliminate(factors, var, budget)
        if stats is not None:
            stats.see(cells)
            stats.eliminations += 1
    scope: dict[str, int] = {}
    for f in factors:
        scope.update(f.cards)
    cells = math.prod(scope.values())
    if budget is not None and cells > budget:
        raise BudgetExceeded(cells, budget)
    if stats is not None:
        stats.see(cells)
    out = multiply_all(factors)
    leftover = [v for v in out.scope if v not in keep]
    if leftover:
        raise ValueError(f"elimination order left {leftover} in the result")
    missing = [v for v in keep if v not in out.scope]
    if missing:
        raise ValueError(f"no factor mentions {missing}")
    return out.transpose(keep)


def network_factors(
    net: InducedNet,
    variables: Iterable[str],
    evidence: Mapping[str, int] | None = None,
    *,
    compact: bool = False,
    budget: int | None = None,
    stats: InferenceStats | None = None,
) -> list[Factor]:
    """CPD factors of ``variables`` reduced by ``evidence`` (value indices)."""
    evidence = evidence or {}
    out = []
    for v in variables:
        fixed = {p: evidence[p] for p in net[v].parents if p in evidence}
        windows = {v: (evidence[v], 1)} if v in evidence else {}
        f = net.cpd_factor(v, fixed, windows, compact=compact, budget=budget)
        if stats is not None:
            stats.see(f.size)
        if v in evidence:
            f = Factor(tuple(u for u in f.scope if u != v), f.table.take(0, axis=f.scope.index(v)))
        out.append(f)
    return out


def variable_elimination(
    net: InducedNet,
    query: Sequence[str],
    evidence: Mapping[str, Any] | None = None,
    ordering: Sequence[str] | None = None,
    *,
    budget: int | None = None,
    stats: InferenceStats | None = None,
) -> Factor:
    """Unnormalized joint over ``query`` and the evidence (given as values).

    Barren variables are pruned first. Inconsistent evidence gives the zero
    factor and sets ``stats.inconsistent``.
    """
    query = list(query)
    if not query:
        raise ValueError("empty query")
    stats = stats if stats is not None else InferenceStats()
    evidence = dict(evidence or {})
    ev_idx = {v: net[v].index(val) for v, val in evidence.items()}
    qset = set(query)
    if qset & set(ev_idx):
        raise ValueError("query and evidence overlap")
    relevant = prune_barren(net, qset | set(ev_idx))
    factors = network_factors(net, relevant, ev_idx, budget=budget, stats=stats)
    if ordering is None:
        adj = interaction_graph(f.scope for f in factors)
        ordering = min_fill_order(adj, [v for v in relevant if v not in qset and v not in ev_idx])
    result = eliminate_all(factors, ordering, query, budget=budget, stats=stats)
    if not np.any(result.table):
        stats.inconsistent = True
    return result


def expectation(f: Factor, domain: Sequence[float]) -> float:
    """Mean of a single-variable factor after normalization."""
    if len(f.scope) != 1:
        raise ValueError("expectation needs a single-variable factor")
    p = f.table / f.table.sum()
    return float(np.dot(p, np.asarray(domain, dtype=float)))
