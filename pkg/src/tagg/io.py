"""JSON game and profile documents.

Serialization is canonical: keys sorted, floats written with 17 significant
digits, so equal games give byte-identical text.
"""
from __future__ import annotations

import json
import math
from typing import Any

from .model import (
    BehaviorProfile,
    ChanceVariable,
    Decision,
    DecisionStrategy,
    TaggGame,
    UtilityFunction,
    ValidationReport,
    validate_game,
)

GAME_KEYS = ("players", "duration", "actions", "chance_vars", "decisions", "utilities")


class GameFormatError(ValueError):
    """Malformed document. ``line``/``column`` are set for syntax errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, key: str | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(message + where)
        self.line, self.column, self.key = line, column, key


class GameValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        super().__init__("invalid game:\n" + str(report))
        self.report = report


def _number(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"cannot serialize {x}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def canonical_json(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """``json.dumps`` with sorted keys and 17-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _number(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {canonical_json(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple)) for x in obj):
            return "[" + ", ".join(canonical_json(x, indent, _level + 1) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + canonical_json(x, indent, _level + 1) for x in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def game_to_dict(game: TaggGame) -> dict:
    return {
        "players": game.num_players,
        "duration": game.duration,
        "actions": list(game.actions),
        "chance_vars": [
            {
                "id": cv.id,
                "time": cv.time,
                "domain": list(cv.domain),
                "parents": list(cv.parents),
                "cpt": [list(row) for row in cv.cpt],
            }
            for cv in game.chance_vars
        ],
        "decisions": [
            {
                "id": d.id,
                "player": d.player,
                "time": d.time,
                "actions": list(d.actions),
                "payoff_times": list(d.payoff_times),
                "observations": list(d.observations),
            }
            for d in game.decisions
        ],
        "utilities": [
            {"action": u.action, "time": u.time, "parents": list(u.parents), "table": list(u.table)}
            for (a, t), u in sorted(game.utilities.items(), key=lambda kv: (kv[0][1], str(kv[0][0])))
        ],
    }


def serialize_game(game: TaggGame) -> str:
    return canonical_json(game_to_dict(game)) + "\n"


def _field(obj: dict, key: str, where: str):
    if not isinstance(obj, dict):
        raise GameFormatError(f"{where} must be an object")
    if key not in obj:
        raise GameFormatError(f"{where} is missing key {key!r}", key=key)
    return obj[key]


def _load(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise GameFormatError(f"syntax error: {e.msg}", e.lineno, e.colno) from None


def game_from_dict(doc: dict, *, validate: bool = True) -> TaggGame:
    if not isinstance(doc, dict):
        raise GameFormatError("game document must be an object")
    missing = [k for k in GAME_KEYS if k not in doc]
    if missing:
        raise GameFormatError(f"game document is missing key(s) {', '.join(map(repr, missing))}", key=missing[0])
    try:
        chance = [
            ChanceVariable(
                _field(c, "id", "chance variable"),
                tuple(_field(c, "domain", "chance variable")),
                tuple(_field(c, "parents", "chance variable")),
                int(_field(c, "time", "chance variable")),
                _field(c, "cpt", "chance variable"),
            )
            for c in doc["chance_vars"]
        ]
        decisions = [
            Decision(
                _field(d, "id", "decision"),
                int(_field(d, "player", "decision")),
                int(_field(d, "time", "decision")),
                tuple(_field(d, "actions", "decision")),
                tuple(int(t) for t in _field(d, "payoff_times", "decision")),
                tuple(d.get("observations", ())),
            )
            for d in doc["decisions"]
        ]
        utilities = {}
        for u in doc["utilities"]:
            uf = UtilityFunction(
                _field(u, "action", "utility"),
                int(_field(u, "time", "utility")),
                tuple(_field(u, "parents", "utility")),
                _field(u, "table", "utility"),
            )
            if (uf.action, uf.time) in utilities:
                raise GameFormatError(f"duplicate utility for {uf.action!r} at time {uf.time}")
            utilities[(uf.action, uf.time)] = uf
        game = TaggGame(int(doc["players"]), int(doc["duration"]), tuple(doc["actions"]), chance, decisions, utilities)
    except GameFormatError:
        raise
    except (TypeError, ValueError) as e:
        raise GameFormatError(f"bad field value: {e}") from None
    if validate:
        report = validate_game(game)
        if not report.ok:
            raise GameValidationError(report)
    return game


def parse_game(text: str, *, validate: bool = True) -> TaggGame:
    """Decode a game document and validate it."""
    return game_from_dict(_load(text), validate=validate)


def read_game(path, *, validate: bool = True) -> TaggGame:
    with open(path) as fh:
        return parse_game(fh.read(), validate=validate)


def write_game(game: TaggGame, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_game(game))


def profile_to_dict(profile: BehaviorProfile) -> dict:
    return {
        "strategies": {
            d: {
                "default": list(s.default),
                "rules": [{"context": dict(ctx), "probs": list(p)} for ctx, p in s.rules],
            }
            for d, s in profile.strategies.items()
        }
    }


def serialize_profile(profile: BehaviorProfile) -> str:
    return canonical_json(profile_to_dict(profile)) + "\n"


def parse_profile(text: str) -> BehaviorProfile:
    doc = _load(text)
    strategies = _field(doc, "strategies", "profile document")
    if not isinstance(strategies, dict):
        raise GameFormatError("'strategies' must be an object")
    out = {}
    try:
        for d, s in strategies.items():
            rules = [
                (_field(r, "context", f"rule of {d}"), _field(r, "probs", f"rule of {d}"))
                for r in s.get("rules", [])
            ]
            out[d] = DecisionStrategy(tuple(_field(s, "default", f"strategy {d}")), tuple(rules))
    except GameFormatError:
        raise
    except (TypeError, ValueError, AttributeError) as e:
        raise GameFormatError(f"bad strategy: {e}") from None
    return BehaviorProfile(out)


def read_profile(path) -> BehaviorProfile:
    with open(path) as fh:
        return parse_profile(fh.read())


def write_profile(profile: BehaviorProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_profile(profile))
