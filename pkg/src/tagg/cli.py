"""Command-line entry point ``tagg``.

Exit codes: 0 success, 1 invalid input (format or validation), 2 usage.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench
from .factor import BudgetExceeded
from .gameops import best_response_single_decision, expected_utility, regret
from .generators import UTILITY_SHAPES, IceCreamSpec, TollboothSpec, make_icecream, make_tollbooth
from .io import GameFormatError, GameValidationError, parse_game, read_profile, serialize_game, serialize_profile
from .model import random_profile, uniform_profile, validate_game, validate_profile

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _load_game(path: str, validate: bool = True):
    return parse_game(_read_text(path), validate=validate)


def _load_profile(spec: str, game):
    if spec == "uniform":
        profile = uniform_profile(game)
    elif spec.startswith("random:"):
        try:
            seed = int(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad random seed in {spec!r}") from None
        profile = random_profile(game, np.random.default_rng(seed))
    else:
        profile = read_profile(spec)
    rep = validate_profile(game, profile)
    if not rep.ok:
        raise GameValidationError(rep)
    return profile


def _player(game, p):
    if p is None:
        return game.decisions[-1].player
    if not game.decisions_of(p):
        raise UsageError(f"unknown player {p}")
    return p


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def cmd_validate(args) -> int:
    game = _load_game(args.game, validate=False)
    rep = validate_game(game)
    print(rep)
    return EXIT_OK if rep.ok else EXIT_INVALID


def cmd_eu(args) -> int:
    game = _load_game(args.game)
    profile = _load_profile(args.profile, game)
    player = _player(game, args.player)
    methods = list(bench.METHOD_NAMES.values()) if args.method == "all" else [bench.METHOD_NAMES[args.method]]
    values = {}
    for m in methods:
        try:
            values[m] = expected_utility(game, profile, player, m, budget=args.budget_cells).total
            print(f"{m}\t{values[m]:.17g}")
        except BudgetExceeded as e:
            print(f"{m}\tbudget_exceeded ({e.cells} cells)")
    if len(values) > 1:
        vals = list(values.values())
        diff = max(abs(a - b) for a in vals for b in vals)
        print(f"max_abs_diff\t{diff:.3g}")
    return EXIT_OK


def cmd_best_response(args) -> int:
    game = _load_game(args.game)
    profile = _load_profile(args.profile, game)
    player = _player(game, args.player)
    try:
        br = best_response_single_decision(game, profile, player)
        r = regret(game, profile, player)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(serialize_profile(br), args.output)
    print(f"player {player}: regret of input profile {r:.17g}", file=sys.stderr)
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        if args.family == "tollbooth":
            if len(args.params) != 3:
                raise UsageError("tollbooth needs LANES WAVES CARS")
            lanes, waves, cars = (int(x) for x in args.params)
            game = make_tollbooth(TollboothSpec(lanes, waves, cars, args.shape))
        else:
            if len(args.params) != 2:
                raise UsageError("icecream needs LOCATIONS DAYS")
            locations, days = (int(x) for x in args.params)
            if args.homes:
                spec = IceCreamSpec(locations, days, tuple(int(h) for h in args.homes.split(",")))
            else:
                spec = IceCreamSpec.random(locations, days, args.seed)
            game = make_icecream(spec)
    except ValueError as e:
        raise UsageError(str(e)) from None
    _emit(serialize_game(game), args.output)
    return EXIT_OK


def cmd_bench(args) -> int:
    try:
        grid = bench.parse_grid(args.grid)
        methods = [bench.METHOD_NAMES[m] for m in (args.methods or list(bench.METHOD_NAMES))]
        for params in grid:
            bench.make_instance(args.family, params, args.seed)
    except (ValueError, KeyError) as e:
        raise UsageError(str(e)) from None
    records = bench.run_bench(
        args.family,
        grid,
        methods,
        profiles=args.profiles,
        seed=args.seed,
        budget_cells=args.budget_cells,
        budget_seconds=args.budget_seconds,
    )
    if args.output in (None, "-"):
        bench.write_csv(records, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            bench.write_csv(records, fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tagg", description="Temporal action-graph games: validation, EU, benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a game document")
    p.add_argument("game")
    p.set_defaults(func=cmd_validate)

    methods = list(bench.METHOD_NAMES) + ["all"]
    p = sub.add_parser("eu", help="expected utility of a player")
    p.add_argument("game")
    p.add_argument("--profile", default="uniform", help="profile file, 'uniform' or 'random:SEED'")
    p.add_argument("--player", type=int, help="defaults to the owner of the last decision")
    p.add_argument("--method", choices=methods, default="interface")
    p.add_argument("--budget-cells", type=int, default=None)
    p.set_defaults(func=cmd_eu)

    p = sub.add_parser("best-response", help="best response of a single-decision player")
    p.add_argument("game")
    p.add_argument("--profile", default="uniform")
    p.add_argument("--player", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_best_response)

    p = sub.add_parser("generate", help="write a generated game")
    p.add_argument("family", choices=bench.FAMILIES)
    p.add_argument("params", nargs="+", help="tollbooth: LANES WAVES CARS; icecream: LOCATIONS DAYS")
    p.add_argument("--shape", choices=sorted(UTILITY_SHAPES), default="neg_count")
    p.add_argument("--homes", help="icecream: comma-separated home locations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="time EU methods over a parameter grid")
    p.add_argument("--family", choices=bench.FAMILIES, required=True)
    p.add_argument("--grid", required=True, help="e.g. lanes=3,cars=5,waves=1..6")
    p.add_argument("--methods", nargs="+", choices=list(bench.METHOD_NAMES))
    p.add_argument("--profiles", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--budget-cells", type=int, default=bench.DEFAULT_CELL_BUDGET)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"tagg: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (GameFormatError, GameValidationError) as e:
        print(f"tagg: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"tagg: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
