"""Benchmark harness: time each EU method over families of generated games."""
from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .factor import BudgetExceeded
from .filtering import FilterStats, interface_expectation
from .inference import InferenceStats, expectation, variable_elimination
from .generators import IceCreamSpec, TollboothSpec, make_icecream, make_tollbooth
from .model import TaggGame, random_profile
from .network import build_induced_net, payoff_id
from .transform import transform

CSV_HEADER = ("family", "params", "method", "profiles", "seconds", "peak_cells", "outcome")
DEFAULT_CELL_BUDGET = 50_000_000
FAMILIES = ("tollbooth", "icecream")
METHOD_NAMES = {"induced": "induced_ve", "transformed": "transformed_ve", "interface": "interface"}

_ALIASES = {"cars_per_wave": "cars", "T": "waves"}


@dataclass
class BenchRecord:
    family: str
    params: dict
    method: str
    profiles: int
    seconds: float
    peak_cells: int
    outcome: str  # "ok" or "budget_exceeded"

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError("negative wall time")
        if self.outcome not in ("ok", "budget_exceeded"):
            raise ValueError(f"bad outcome {self.outcome!r}")

    def row(self) -> list:
        params = " ".join(f"{k}={v}" for k, v in self.params.items())
        return [self.family, params, self.method, self.profiles, f"{self.seconds:.6f}", self.peak_cells, self.outcome]


def parse_grid(text: str) -> list[dict]:
    """``"lanes=3,cars=5,waves=1..6"`` -> the cartesian product of the
    values, last key varying fastest. A value is an int, ``a..b`` or
    ``a|b|c``."""
    keys, axes = [], []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"grid entry {part!r} is not key=value")
        k, v = (s.strip() for s in part.split("=", 1))
        k = _ALIASES.get(k, k)
        if ".." in v:
            lo, hi = (int(x) for x in v.split(".."))
            if hi < lo:
                raise ValueError(f"empty range {v!r}")
            vals = list(range(lo, hi + 1))
        else:
            vals = [int(x) for x in v.split("|")]
        if k in keys:
            raise ValueError(f"grid key {k!r} repeated")
        keys.append(k)
        axes.append(vals)
    return [dict(zip(keys, combo)) for combo in itertools.product(*axes)]


def make_instance(family: str, params: dict, seed: int = 0) -> TaggGame:
    p = dict(params)
    if family == "tollbooth":
        allowed = {"lanes", "waves", "cars"}
        _check_keys(p, allowed)
        return make_tollbooth(TollboothSpec(p.get("lanes", 3), p.get("waves", 1), p.get("cars", 5)))
    if family == "icecream":
        _check_keys(p, {"locations", "days", "homes_seed"})
        spec = IceCreamSpec.random(p.get("locations", 4), p.get("days", 1), p.get("homes_seed", seed))
        return make_icecream(spec)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _check_keys(p, allowed):
    extra = set(p) - allowed
    if extra:
        raise ValueError(f"unknown parameter(s) {sorted(extra)}; allowed {sorted(allowed)}")


def benchmark_target(game: TaggGame) -> list[str]:
    """Payoff variables of the player owning the last-declared decision."""
    player = game.decisions[-1].player
    return [payoff_id(d.id, t) for d in game.decisions_of(player) for t in sorted(d.payoff_times)]


def run_method(game, profiles, method, *, budget_cells=DEFAULT_CELL_BUDGET, budget_seconds=None):
    """Evaluate the benchmark target under each profile.

    Returns ``(seconds, peak_cells, outcome, values)``; ``values`` is cut
    short when a budget is hit.
    """
    targets = benchmark_target(game)
    peak, values = 0, []
    start = time.perf_counter()
    for profile in profiles:
        net = build_induced_net(game, profile)
        if method != "induced_ve":
            net = transform(net)
        total = 0.0
        try:
            for tgt in targets:
                if method == "interface":
                    fs = FilterStats()
                    total += interface_expectation(net, tgt, stats=fs)
                    peak = max(peak, fs.peak_cells)
                    if budget_cells is not None and fs.peak_cells > budget_cells:
                        raise BudgetExceeded(fs.peak_cells, budget_cells)
                else:
                    st = InferenceStats()
                    try:
                        f = variable_elimination(net, [tgt], budget=budget_cells, stats=st)
                    finally:
                        peak = max(peak, st.peak_cells)
                    total += expectation(f, net[tgt].domain)
        except BudgetExceeded as e:
            peak = max(peak, e.cells)
            return time.perf_counter() - start, peak, "budget_exceeded", values
        values.append(total)
        if budget_seconds is not None and time.perf_counter() - start > budget_seconds:
            return time.perf_counter() - start, peak, "budget_exceeded", values
    return time.perf_counter() - start, peak, "ok", values


def instance_profiles(game: TaggGame, n: int, seed: int, index: int):
    rng = np.random.default_rng([seed, index])
    return [random_profile(game, rng) for _ in range(n)]


def run_bench(
    family: str,
    grid: Sequence[dict],
    methods: Iterable[str] = ("induced_ve", "transformed_ve", "interface"),
    *,
    profiles: int = 1,
    seed: int = 0,
    budget_cells: int | None = DEFAULT_CELL_BUDGET,
    budget_seconds: float | None = None,
) -> Iterator[BenchRecord]:
    """One record per (instance, method); the same seeded profiles are used
    by every method on an instance."""
    methods = list(methods)
    for i, params in enumerate(grid):
        game = make_instance(family, params, seed)
        batch = instance_profiles(game, profiles, seed, i)
        for m in methods:
            secs, peak, outcome, _ = run_method(
                game, batch, m, budget_cells=budget_cells, budget_seconds=budget_seconds
            )
            yield BenchRecord(family, dict(params), m, profiles, secs, peak, outcome)


def write_csv(records: Iterable[BenchRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
        fh.flush()
