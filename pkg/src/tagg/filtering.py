"""Forward interface filtering on a decomposed, Markov network.

The filter keeps ``P(V^t)``, the joint over the effective variables of step
``t`` (the step-``t`` variables that feed step ``t + 1`` and lead to the
target), and advances it one step at a time::

    P(V^t) = sum_v P(V^t | V^(t-1) = v) P(V^(t-1) = v)

Each conditional is computed by eliminating the step's decisions and
intermediate counts along their chains, then the step's chance variables,
then whatever else the step holds. Two exact shortcuts keep the recursion
cheap:

* A count with a parent in the previous step is ``prior + contribution``.
  It is computed in local coordinates (the contribution alone) and shifted
  into place, so the conditional does not depend on the prior's value.
* Conditionals are memoized on the previous-step values they actually read.
  A strategy without observation rules reads nothing, so a whole step often
  costs a single small elimination.

Zero-probability instantiations of ``V^(t-1)`` are skipped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .factor import Factor, factor_reduce, multiply_all
from .inference import eliminate_all, interaction_graph, min_fill_order
from .network import CounterCpd, InducedNet, MultiplexerCpd, NetVariable, _cpd_factor
from .transform import effective_variables, is_markov

_SCATTER_CHUNK = 4_000_000


@dataclass
class FilterState:
    """``joint`` is ``P(vars)`` at step ``time`` over full domains."""

    time: int
    vars: tuple[str, ...]
    joint: Factor

    def check(self, tol: float = 1e-9) -> None:
        if np.any(self.joint.table < -tol) or abs(self.joint.total() - 1.0) > tol:
            raise FloatingPointError(f"filter state at {self.time} is not a distribution")


@dataclass
class FilterStats:
    steps: int = 0  # step conditionals computed (cache misses on P(V^t))
    eliminations: int = 0  # local eliminations run across all steps
    filter_runs: int = 0  # distinct forward passes up to the last step
    peak_cells: int = 0
    cache: dict = field(default_factory=dict, repr=False)


def step_variables(net: InducedNet, tau: int, keep: Sequence[str]) -> list[str]:
    """Step-``tau`` ancestors of ``keep``, in network order."""
    seen = set()
    stack = [v for v in keep]
    while stack:
        v = stack.pop()
        if v in seen or net[v].time != tau:
            continue
        seen.add(v)
        stack.extend(net[v].parents)
    return [v for v in net.variables if v in seen]


class _Step:
    """Everything about one step that does not depend on the previous values."""

    def __init__(self, net: InducedNet, tau: int, prev: Sequence[str], keep: Sequence[str]):
        self.net = net
        self.tau = tau
        self.prev = tuple(prev)
        self.keep = tuple(keep)
        self.vars = step_variables(net, tau, keep)
        prevset = set(prev)
        for v in self.vars:
            outside = [p for p in net[v].parents if net[p].time != tau and p not in prevset]
            if outside:
                raise ValueError(f"{v} reads {outside}, which the filter state does not carry")

        # counts shifted by their previous-step parents
        self.offset: dict[str, tuple[list[tuple[int, int]], int]] = {}
        self.local: dict[str, Factor] = {}
        pcol = {p: i for i, p in enumerate(self.prev)}
        for v in self.vars:
            cpd = net.cpds[v]
            if not isinstance(cpd, CounterCpd):
                continue
            old = [i for i, p in enumerate(cpd.parents) if p in prevset]
            if not old:
                continue
            terms = []
            for i in old:
                p = cpd.parents[i]
                action_idx = -1
                if not cpd.numeric[i]:
                    dom = net[p].domain
                    action_idx = dom.index(cpd.action) if cpd.action in dom else -2
                terms.append((pcol[p], action_idx))
            new = [i for i in range(len(cpd.parents)) if i not in old]
            size = 1 + sum(cpd.max_contribution(net, i) for i in new)
            self.offset[v] = (terms, size)
            local = CounterCpd(
                tuple(cpd.parents[i] for i in new), action=cpd.action, numeric=tuple(cpd.numeric[i] for i in new)
            )
            self.local[v] = _cpd_factor(net, v, local, {}, {v: (0, size)}, False, None)

        self.base = {v: net.cpd_factor(v, compact=True) for v in self.vars if v not in self.offset}
        used = set()
        for f in self.base.values():
            used.update(f.scope)
        self.plain_deps = [p for p in self.prev if p in used]
        self.sliced = [v for v in self.offset if v in used]

        # elimination plan: decisions and intermediates along their chains
        decisions = [v for v in self.vars if net[v].kind == "decision"]
        inter = [v for v in self.vars if net[v].kind == "intermediate_count"]
        counts = [v for v in self.vars if net[v].kind == "action_count"]
        chance = [v for v in self.vars if net[v].kind == "chance"]
        chain_kinds = {"decision", "intermediate_count", "action_count"}
        needed_later = set(self.keep)
        for v in self.vars:
            if net[v].kind not in chain_kinds:
                needed_later.update(net[v].parents)
        self.dc_vars = decisions + inter + counts
        self.dc_keep = [v for v in decisions if v in needed_later] + counts
        dec_parent = {m: next(p for p in net[m].parents if net[p].kind == "decision") for m in inter}
        order = []
        for i, d in enumerate(decisions):
            if d not in self.dc_keep:
                order.append(d)
            if i > 0:
                order += [m for m in inter if dec_parent[m] == decisions[i - 1]]
        order += [m for m in inter if m not in order]
        self.dc_order = order
        self.chance = chance
        self.other = [v for v in self.vars if v not in self.dc_vars and v not in chance]
        read_outside = set(self.keep).union(*(net[v].parents for v in self.other))
        self.chance_keep = [x for x in chance if x in read_outside]
        self.stats_elims = 0

    # -- per-instantiation factors ------------------------------------------------

    def factors_for_key(self, plain: Sequence[int], shifts: Sequence[int]) -> dict[str, Factor]:
        """Step factors in local coordinates for one memo key."""
        ev = dict(zip(self.plain_deps, plain))
        windows = {v: (c, self.offset[v][1]) for v, c in zip(self.sliced, shifts)}
        out = dict(self.local)
        for v, f in self.base.items():
            f = factor_reduce(f, ev)
            if windows and any(u in windows for u in f.scope):
                idx = tuple(
                    slice(windows[u][0], windows[u][0] + windows[u][1]) if u in windows else slice(None)
                    for u in f.scope
                )
                f = Factor(f.scope, f.table[idx])
            out[v] = f
        return out

    def factors_global(self, assignment: Mapping[str, int]) -> dict[str, Factor]:
        """Step factors in full coordinates given previous-step value indices."""
        out = {}
        for v in self.vars:
            fixed = {p: assignment[p] for p in self.net[v].parents if p in assignment}
            out[v] = self.net.cpd_factor(v, fixed, compact=True)
        return out

    # -- the three parts of a step ------------------------------------------------------

    def decisions_counts(self, factors: Mapping[str, Factor]) -> Factor:
        fs = [factors[v] for v in self.dc_vars]
        if not fs:
            return Factor.scalar()
        return eliminate_all(fs, self.dc_order, self.dc_keep)

    def chance_part(self, factors: Mapping[str, Factor]) -> Factor:
        fs = [factors[x] for x in self.chance]
        if not fs:
            return Factor.scalar()
        drop = [x for x in self.chance if x not in self.chance_keep]
        order = min_fill_order(interaction_graph(f.scope for f in fs), drop)
        keep = list(dict.fromkeys(v for f in fs for v in f.scope if v not in drop))
        return eliminate_all(fs, order, keep)

    def conditional(self, factors: Mapping[str, Factor]) -> Factor:
        """``P(V^t | V^(t-1))`` for the instantiation baked into ``factors``."""
        fs = [self.decisions_counts(factors), self.chance_part(factors)] + [factors[v] for v in self.other]
        scope_vars = list(dict.fromkeys(v for f in fs for v in f.scope))
        drop = [v for v in scope_vars if v not in self.keep]
        order = min_fill_order(interaction_graph(f.scope for f in fs), drop)
        self.stats_elims += 1
        return eliminate_all(fs, order, list(self.keep))


def _nonzero_rows(state: FilterState):
    idx = np.nonzero(state.joint.table)
    probs = state.joint.table[idx]
    return np.stack(idx, axis=1), probs


def advance(net: InducedNet, state: FilterState, tau: int, keep: Sequence[str]) -> tuple[FilterState, _Step]:
    """One filter step from ``state`` (at ``tau - 1``) to ``P(keep)`` at ``tau``."""
    step = _Step(net, tau, state.vars, keep)
    if state.vars:
        rows, probs = _nonzero_rows(state)
    else:
        rows = np.zeros((1, 0), dtype=int)
        probs = np.asarray(state.joint.table, dtype=float).reshape(1)
    shifts = np.zeros((len(probs), len(step.offset)), dtype=int)
    for j, (v, (terms, _)) in enumerate(step.offset.items()):
        for col, action_idx in terms:
            if action_idx == -1:
                shifts[:, j] += rows[:, col]
            elif action_idx >= 0:
                shifts[:, j] += rows[:, col] == action_idx
    offset_names = list(step.offset)
    dep_cols = [state.vars.index(p) for p in step.plain_deps]
    slice_cols = [offset_names.index(v) for v in step.sliced]
    keys = np.concatenate([rows[:, dep_cols], shifts[:, slice_cols]], axis=1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    keep = list(keep)
    shape = tuple(net[v].card for v in keep)
    size = int(np.prod(shape)) if shape else 1
    total = np.zeros(size)
    keep_shift = [offset_names.index(v) if v in step.offset else -1 for v in keep]
    pend_idx, pend_w, pending = [], [], 0

    def flush():
        nonlocal pending
        if pend_idx:
            total[:] += np.bincount(np.concatenate(pend_idx), np.concatenate(pend_w), minlength=size)
        pend_idx.clear()
        pend_w.clear()
        pending = 0

    n_dep = len(dep_cols)
    for g, key in enumerate(uniq):
        members = np.nonzero(inverse == g)[0]
        factors = step.factors_for_key(key[:n_dep], key[n_dep:])
        cond = step.conditional(factors)
        if not keep:
            total[0] += float(probs[members].sum() * cond.table)
            continue
        nz = np.nonzero(cond.table)
        vals = cond.table[nz]
        chunk = max(1, _SCATTER_CHUNK // max(1, len(vals)))
        for s in range(0, len(members), chunk):
            m = members[s:s + chunk]
            coords = []
            for i, j in enumerate(keep_shift):
                base = nz[i][None, :]
                coords.append(base + shifts[m, j][:, None] if j >= 0 else np.broadcast_to(base, (len(m), len(vals))))
            flat = np.ravel_multi_index(tuple(coords), shape)
            pend_idx.append(flat.ravel())
            pend_w.append((probs[m][:, None] * vals[None, :]).ravel())
            pending += flat.size
            if pending > _SCATTER_CHUNK:
                flush()
    flush()
    joint = Factor(tuple(keep), total.reshape(shape))
    out = FilterState(tau, tuple(keep), joint)
    out.check()
    return out, step


def _prepare(net: InducedNet, target: str) -> dict[int, list[str]]:
    if target not in net:
        raise KeyError(f"unknown target {target!r}")
    if not is_markov(net):
        raise ValueError("network does not have the Markov property")
    eff = effective_variables(net, target)
    return {t: [v for v in net.variables if v in vs] for t, vs in eff.items()}


def _forward(net: InducedNet, eff: dict[int, list[str]], upto: int, stats: FilterStats) -> FilterState:
    """``P(V^upto)``, reusing any state already computed for the same sets."""
    state = FilterState(-1, (), Factor.scalar())
    for tau in range(0, upto + 1):
        key = (tau, tuple(eff[tau]))
        hit = stats.cache.get(key)
        if hit is None:
            hit, step = advance(net, state, tau, eff[tau])
            stats.steps += 1
            stats.eliminations += step.stats_elims
            stats.peak_cells = max(stats.peak_cells, hit.joint.size)
            stats.cache[key] = hit
        state = hit
    return state


def interface_filter(net: InducedNet, target: str, stats: FilterStats | None = None) -> Factor:
    """``P(target)`` by forward filtering."""
    stats = stats if stats is not None else FilterStats()
    eff = _prepare(net, target)
    stats.filter_runs += 1
    state = _forward(net, eff, net[target].time, stats)
    return state.joint


def filter_states(net: InducedNet, target: str) -> list[FilterState]:
    """Every intermediate ``P(V^t)`` for ``target``, step 0 first."""
    eff = _prepare(net, target)
    stats = FilterStats()
    _forward(net, eff, net[target].time, stats)
    return [stats.cache[(t, tuple(eff[t]))] for t in range(net[target].time + 1)]


def _step_for(net, tau, target, assignment):
    eff = _prepare(net, target)
    prev = eff[tau - 1] if tau >= 1 else []
    step = _Step(net, tau, prev, eff[tau])
    idx = {v: net[v].index(val) for v, val in assignment.items()}
    missing = [v for v in prev if v not in idx]
    if missing:
        raise KeyError(f"assignment lacks previous-step variables {missing}")
    return step, step.factors_global(idx)


def step_decisions_counts(net: InducedNet, tau: int, target: str, assignment: Mapping[str, Any]) -> Factor:
    """``P(D^t, A^t | V^(t-1) = assignment)`` over the retained decisions and
    the step's counts, eliminating along the decision chains."""
    step, factors = _step_for(net, tau, target, assignment)
    return step.decisions_counts(factors)


def step_chance(net: InducedNet, tau: int, target: str, assignment: Mapping[str, Any]) -> Factor:
    """``P(X^t | A^t, V^(t-1) = assignment)`` with unneeded chance variables
    summed out in min-fill order."""
    step, factors = _step_for(net, tau, target, assignment)
    return step.chance_part(factors)


# ----------------------------------------------------------------------- CSI split

def sub_payoff_id(decision: str, action: str, t: int) -> str:
    return f"u[{decision},{action}]^{t}"


def csi_decompose(net: InducedNet, target: str) -> tuple[InducedNet, list[tuple[str, str]]]:
    """Split a multiplexer payoff into one term per selectable action.

    Term ``k`` equals the utility of action ``k`` when the decision picks
    ``k`` and 0 otherwise; the terms sum to the payoff.
    """
    cpd = net.cpds.get(target)
    if not isinstance(cpd, MultiplexerCpd):
        raise ValueError(f"{target} is not a multiplexer payoff")
    var = net[target]
    selector = net[cpd.parents[0]]
    decision = var.source
    variables = dict(net.variables)
    cpds = dict(net.cpds)
    subs = []
    for k, pos in enumerate(cpd.choices):
        if pos < 0:
            continue
        action = selector.domain[k]
        sid = sub_payoff_id(decision, action, var.time)
        chosen = cpd.parents[pos]
        domain = tuple(sorted(set(net[chosen].domain) | {0.0}))
        parents = (cpd.parents[0], chosen)
        variables[sid] = NetVariable(sid, "decision_payoff", var.time, domain, parents, source=decision)
        cpds[sid] = MultiplexerCpd(parents, choices=tuple(1 if j == k else -1 for j in range(selector.card)))
        subs.append((sid, action))
    return net.with_variables(variables, cpds), subs


def expected_value(net: InducedNet, var: str, f: Factor) -> float:
    p = f.table / f.table.sum()
    return float(np.dot(p, np.asarray(net[var].domain, dtype=float)))


def interface_expectation(
    net: InducedNet, target: str, *, csi: bool = True, stats: FilterStats | None = None
) -> float:
    """``E[target]`` by filtering, optionally split into per-action terms.

    Terms whose effective sets coincide before the last step share one
    forward pass.
    """
    stats = stats if stats is not None else FilterStats()
    if not csi:
        f = interface_filter(net, target, stats)
        return expected_value(net, target, f)
    net, subs = csi_decompose(net, target)
    t_end = net[target].time
    passes = set()
    total = 0.0
    for sid, _ in subs:
        eff = _prepare(net, sid)
        passes.add(tuple(tuple(eff[t]) for t in range(t_end)))
        state = _forward(net, eff, t_end, stats)
        total += expected_value(net, sid, state.joint)
    stats.filter_runs += len(passes)
    return total


def csi_terms(net: InducedNet, target: str, stats: FilterStats | None = None) -> dict[str, float]:
    """Expectation of each per-action term of ``target``."""
    stats = stats if stats is not None else FilterStats()
    net, subs = csi_decompose(net, target)
    out = {}
    for sid, action in subs:
        eff = _prepare(net, sid)
        state = _forward(net, eff, net[sid].time, stats)
        out[action] = expected_value(net, sid, state.joint)
    return out
