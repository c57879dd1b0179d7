"""Dense factors over finite-domain variables."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np


class BudgetExceeded(RuntimeError):
    """A table would exceed the configured cell budget."""

    def __init__(self, cells: int, budget: int):
        super().__init__(f"table of {cells} cells exceeds budget {budget}")
        self.cells = cells
        self.budget = budget


@dataclass(frozen=True, eq=False)
class Factor:
    """A real table over ``scope``; axis ``i`` indexes ``scope[i]``.

    Flattening ``table`` in C order gives the mixed-radix layout with the
    last variable varying fastest.
    """

    scope: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        scope = tuple(self.scope)
        table = np.asarray(self.table, dtype=float)
        if table.ndim != len(scope):
            raise ValueError(f"table has {table.ndim} axes for scope of {len(scope)}")
        if len(set(scope)) != len(scope):
            raise ValueError(f"repeated variable in scope {scope}")
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", table)

    @classmethod
    def scalar(cls, value: float = 1.0) -> "Factor":
        return cls((), np.array(value, dtype=float))

    @property
    def cards(self) -> dict[str, int]:
        return dict(zip(self.scope, self.table.shape))

    @property
    def values(self) -> np.ndarray:
        return self.table.ravel()

    @property
    def size(self) -> int:
        return self.table.size

    def total(self) -> float:
        return float(self.table.sum())

    def normalize(self) -> "Factor":
        z = self.table.sum()
        if z == 0:
            raise ZeroDivisionError("cannot normalize a zero factor")
        return Factor(self.scope, self.table / z)

    def transpose(self, scope: Sequence[str]) -> "Factor":
        scope = tuple(scope)
        if set(scope) != set(self.scope) or len(scope) != len(self.scope):
            raise ValueError(f"{scope} is not a permutation of {self.scope}")
        return Factor(scope, np.transpose(self.table, [self.scope.index(v) for v in scope]))

    def __mul__(self, other: "Factor") -> "Factor":
        return factor_product(self, other)

    def __repr__(self):
        return f"Factor({self.scope}, shape={self.table.shape})"


def scope_size(cards: Mapping[str, int], scope: Iterable[str]) -> int:
    return math.prod(cards[v] for v in scope)


def factor_product(f: Factor, g: Factor) -> Factor:
    """Pointwise product; the result scope is ``f.scope`` then new vars of ``g``."""
    fc, gc = f.cards, g.cards
    for v in set(fc) & set(gc):
        if fc[v] != gc[v]:
            raise ValueError(f"domain size mismatch for {v}: {fc[v]} vs {gc[v]}")
    scope = f.scope + tuple(v for v in g.scope if v not in fc)
    ids = {v: i for i, v in enumerate(scope)}
    table = np.einsum(f.table, [ids[v] for v in f.scope], g.table, [ids[v] for v in g.scope],
                      list(range(len(scope))))
    return Factor(scope, table)


def multiply_all(factors: Sequence[Factor]) -> Factor:
    out = Factor.scalar()
    for f in factors:
        out = factor_product(out, f)
    return out


def factor_marginalize(f: Factor, variables: Iterable[str]) -> Factor:
    """Sum out ``variables``."""
    variables = set(variables)
    missing = variables - set(f.scope)
    if missing:
        raise KeyError(f"{sorted(missing)} not in scope {f.scope}")
    if not variables:
        return f
    axes = tuple(i for i, v in enumerate(f.scope) if v in variables)
    return Factor(tuple(v for v in f.scope if v not in variables), f.table.sum(axis=axes))


def factor_reduce(f: Factor, evidence: Mapping[str, int]) -> Factor:
    """Slice ``f`` at the given value indices; evidence vars leave the scope.

    Variables of ``evidence`` outside the scope are ignored so one evidence
    mapping can be applied to a whole factor set.
    """
    index = []
    scope = []
    for v, n in zip(f.scope, f.table.shape):
        if v in evidence:
            i = evidence[v]
            if not 0 <= i < n:
                raise IndexError(f"evidence index {i} outside domain of {v} (size {n})")
            index.append(i)
        else:
            index.append(slice(None))
            scope.append(v)
    return Factor(tuple(scope), f.table[tuple(index)])


def sum_product_eliminate(factors: list[Factor], var: str, budget: int | None = None) -> tuple[list[Factor], int]:
    """Eliminate ``var`` from a factor list; returns the new list and the clique size."""
    touching = [f for f in factors if var in f.scope]
    rest = [f for f in factors if var not in f.scope]
    if not touching:
        return factors, 0
    cards: dict[str, int] = {}
    for f in touching:
        cards.update(f.cards)
    clique = math.prod(cards.values())
    if budget is not None and clique > budget:
        raise BudgetExceeded(clique, budget)
    out_scope = [v for v in cards if v != var]
    ids = {v: i for i, v in enumerate(cards)}
    operands = []
    for f in touching:
        operands += [f.table, [ids[v] for v in f.scope]]
    table = np.einsum(*operands, [ids[v] for v in out_scope], optimize=len(touching) > 2)
    return rest + [Factor(tuple(out_scope), table)], clique
