"""Network rewrites that expose counting structure and temporal locality.

``apply_causal_decomposition`` replaces each high in-degree count with a
chain of pairwise intermediate counts. ``apply_markov_copies`` relays values
across time so that every edge spans at most one step; after it, the
variables of one step separate the past from the future and the interface
filter can run.
"""
from __future__ import annotations

from .network import (
    CopyCpd,
    CounterCpd,
    InducedNet,
    NetVariable,
    TransformPass,
    count_id,
)


def _applied(net: InducedNet, name: str) -> bool:
    return any(p.name == name for p in net.passes)


def apply_causal_decomposition(net: InducedNet) -> InducedNet:
    """Give every count at most two parents.

    ``A^t`` reads ``A^(t-1)`` (when some earlier decision can choose ``A``)
    plus the contribution of the step-``t`` decisions, which is summed along
    a chain of intermediate counts in decision order.
    """
    if _applied(net, "causal_decomposition"):
        raise ValueError("causal decomposition already applied")
    variables: dict[str, NetVariable] = {}
    cpds = {}
    provenance = {}

    def add(var, cpd):
        variables[var.id] = NetVariable(var.id, var.kind, var.time, var.domain, cpd.parents, var.source)
        cpds[var.id] = cpd

    for v, var in net.variables.items():
        cpd = net.cpds[v]
        if var.kind != "action_count":
            add(var, cpd)
            continue
        if not isinstance(cpd, CounterCpd) or any(cpd.numeric):
            raise ValueError(f"{v} is not an undecomposed count")
        a, t = cpd.action, var.time
        prior = count_id(a, t - 1)
        has_prior = t >= 2 and prior in net and net[prior].card > 1
        now = [p for p in cpd.parents if net[p].time == t]

        def chain(last_into_count: bool):
            # intermediates M_1..M_{l-1} over the first l-1 decisions
            prev = None
            for i, d in enumerate(now[:-1], start=1):
                mid = f"M[{a}]^{t}.{i}"
                parents = (d,) if prev is None else (prev, d)
                add(
                    NetVariable(mid, "intermediate_count", t, tuple(range(i + 1)), source=v),
                    CounterCpd(parents, action=a, numeric=(False,) if prev is None else (True, False)),
                )
                provenance[mid] = v
                prev = mid
            if last_into_count:
                return prev
            mid = f"M[{a}]^{t}.{len(now)}"
            add(
                NetVariable(mid, "intermediate_count", t, tuple(range(len(now) + 1)), source=v),
                CounterCpd((prev, now[-1]), action=a, numeric=(True, False)),
            )
            provenance[mid] = v
            return mid

        if not has_prior:
            if len(now) <= 1:
                parents, numeric = tuple(now), (False,) * len(now)
            else:
                prev = chain(True)
                parents, numeric = (prev, now[-1]), (True, False)
        elif not now:
            parents, numeric = (prior,), (True,)
        elif len(now) == 1:
            parents, numeric = (prior, now[0]), (True, False)
        else:
            parents, numeric = (prior, chain(False)), (True, True)
        add(var, CounterCpd(parents, action=a, numeric=numeric))

    return net.with_variables(
        variables, cpds, passes=net.passes + (TransformPass("causal_decomposition", provenance),)
    )


def is_markov(net: InducedNet) -> bool:
    return all(net[p].time >= var.time - 1 for var in net.variables.values() for p in var.parents)


def apply_markov_copies(net: InducedNet) -> InducedNet:
    """Relay every parent more than one step older through per-step copies."""
    need: dict[str, int] = {}
    for var in net.variables.values():
        for p in var.parents:
            if var.time - net[p].time > 1:
                need[p] = max(need.get(p, 0), var.time - 1)
    if not need:
        return net
    cpds = {}
    provenance = {}
    copies: dict[str, NetVariable] = {}
    for p, last in need.items():
        src = net[p]
        prev = p
        for t in range(src.time + 1, last + 1):
            cid = f"{p}@{t}"
            copies[cid] = NetVariable(cid, "copy", t, src.domain, (prev,), source=p)
            cpds[cid] = CopyCpd((prev,))
            provenance[cid] = p
            prev = cid

    rank = {v: i for i, v in enumerate(net.variables)}
    variables = {}
    for v, var in net.variables.items():
        mapping = {p: f"{p}@{var.time - 1}" for p in var.parents if var.time - net[p].time > 1}
        cpd = net.cpds[v].rename(mapping) if mapping else net.cpds[v]
        cpds[v] = cpd
        variables[v] = NetVariable(v, var.kind, var.time, var.domain, cpd.parents, var.source)
    variables.update(copies)
    order = sorted(variables, key=lambda v: (variables[v].time, -1 if v in copies else rank[v], v))
    variables = {v: variables[v] for v in order}
    cpds = {v: cpds[v] for v in order}
    return net.with_variables(variables, cpds, passes=net.passes + (TransformPass("markov_copies", provenance),))


def transform(net: InducedNet) -> InducedNet:
    """Both passes, in the required order."""
    return apply_markov_copies(apply_causal_decomposition(net))


def compute_interface(net: InducedNet, tau: int) -> set[str]:
    """Step-``tau`` variables with at least one child at ``tau + 1``."""
    if not is_markov(net):
        raise ValueError("network does not have the Markov property")
    children = net.children()
    return {
        v for v, var in net.variables.items()
        if var.time == tau and any(net[c].time == tau + 1 for c in children[v])
    }


def effective_variables(net: InducedNet, target: str) -> dict[int, set[str]]:
    """Per step, the interface variables that are ancestors of ``target``."""
    if target not in net:
        raise KeyError(f"unknown target {target!r}")
    if not is_markov(net):
        raise ValueError("network does not have the Markov property")
    anc = net.ancestors([target])
    t_end = net[target].time
    children = net.children()
    out = {}
    for tau in range(0, t_end):
        out[tau] = {
            v for v in anc
            if net[v].time == tau and any(net[c].time == tau + 1 for c in children[v])
        }
    out[t_end] = {target}
    return out
