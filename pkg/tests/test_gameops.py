import itertools

import numpy as np
import pytest

from oracles import oracle_payoff, random_rich_profile, random_small_game
from tagg.gameops import (
    METHODS,
    best_response_single_decision,
    conditional_action_values,
    expected_decision_payoff,
    expected_utility,
    iterated_best_response,
    regret,
)
from tagg.generators import TollboothSpec, make_tollbooth
from tagg.model import (
    Decision,
    DecisionStrategy,
    TaggGame,
    UtilityFunction,
    enumerate_observation_contexts,
    pure_profile,
    random_profile,
    uniform_profile,
)


def toll(lanes, waves, cars):
    return make_tollbooth(TollboothSpec(lanes, waves, cars))


@pytest.mark.parametrize(
    "lanes, cars, value",
    [(1, 1, -1.0), (2, 2, -1.5), (3, 3, -5 / 3)],
)
def test_one_shot_tollbooth_closed_forms(lanes, cars, value):
    g = toll(lanes, 1, cars)
    p = uniform_profile(g)
    for m in METHODS:
        assert expected_decision_payoff(g, p, "D1.1", 1, m) == pytest.approx(value, abs=1e-9)


def test_payoff_time_must_belong_to_decision():
    g = toll(2, 2, 1)
    with pytest.raises(ValueError):
        expected_decision_payoff(g, uniform_profile(g), "D1.1", 2)
    with pytest.raises(ValueError):
        expected_decision_payoff(g, uniform_profile(g), "D1.1", 1, method="junction_tree")


def test_methods_agree_with_oracle_on_random_games():
    rng = np.random.default_rng(99)
    for _ in range(10):
        g = random_small_game(rng)
        p = random_rich_profile(g, rng)
        for d in g.decisions:
            for tau in d.payoff_times:
                want = oracle_payoff(g, p, d.id, tau)
                for m in METHODS:
                    assert expected_decision_payoff(g, p, d.id, tau, m) == pytest.approx(want, abs=1e-9)


def test_single_decision_total_is_its_term():
    g = toll(3, 2, 2)
    p = random_profile(g, 1)
    eu = expected_utility(g, p, 3)
    assert list(eu.components) == [("D2.1", 2)]
    assert eu.total == eu.components[("D2.1", 2)]


def test_two_payoff_times_with_static_counts_double_the_value():
    decs = (Decision("D", 1, 1, ("A", "B"), (1, 2)), Decision("E", 2, 1, ("A", "B"), (1,)))
    table = (0.0, -1.0, -2.0)
    utils = {(a, t): UtilityFunction(a, t, (a,), table) for a in ("A", "B") for t in (1, 2)}
    g = TaggGame(2, 2, ("A", "B"), (), decs, utils)
    p = random_profile(g, 5)
    eu = expected_utility(g, p, 1)
    single = expected_decision_payoff(g, p, "D", 1)
    assert eu.total == pytest.approx(2 * single, abs=1e-12)
    assert list(eu.components) == [("D", 1), ("D", 2)]


def test_same_wave_players_are_symmetric():
    g = toll(3, 2, 3)
    p = uniform_profile(g)
    wave2 = [expected_utility(g, p, pl).total for pl in (4, 5, 6)]
    assert max(wave2) - min(wave2) <= 1e-9


def test_unknown_player():
    g = toll(2, 1, 2)
    with pytest.raises(ValueError):
        expected_utility(g, uniform_profile(g), 9)


def test_best_response_to_observed_counts():
    g = toll(2, 2, 1)
    br = best_response_single_decision(g, pure_profile(g, {"D1.1": "L1"}), 2)
    rules = dict((tuple(sorted(ctx)), probs) for ctx, probs in br["D2.1"].rules)
    assert rules[(("L1", 1), ("L2", 0))] == (0.0, 1.0)
    # the other context is unreachable and falls back to the uniform default
    assert (("L1", 0), ("L2", 1)) not in rules
    assert br["D2.1"].default == (0.5, 0.5)


def test_best_response_to_fixed_opponent():
    g = toll(2, 1, 2)
    p = pure_profile(g, {"D1.1": "L1"})
    br = best_response_single_decision(g, p, 2)
    (ctx, probs), = br["D1.2"].rules
    assert probs == (0.0, 1.0)
    assert expected_utility(g, br, 2).total == pytest.approx(-1.0, abs=1e-12)


def test_tie_breaks_to_first_action():
    g = toll(3, 2, 1)
    br = best_response_single_decision(g, uniform_profile(g), 2)
    # every reachable context has one car on some lane; L1 wins whenever it is empty and tied
    for ctx, probs in br["D2.1"].rules:
        ctx = dict(ctx)
        empties = [a for a in g.actions if ctx[a] == 0]
        assert probs[g.actions.index(empties[0])] == 1.0


def test_symmetric_context_picks_first_lane():
    decs = tuple(Decision(f"D1.{j}", j, 1, ("L1", "L2", "L3"), (1,)) for j in (1, 2, 3)) + (
        Decision("D2.1", 4, 2, ("L1", "L2", "L3"), (2,), ("L1", "L2", "L3")),
    )
    bare = TaggGame(4, 2, ("L1", "L2", "L3"), (), decs, {})
    utils = {
        (a, t): UtilityFunction(a, t, (a,), tuple(0.0 - c for c in range(bare.max_count(a, t) + 1)))
        for a in bare.actions
        for t in (1, 2)
    }
    g = TaggGame(4, 2, bare.actions, (), decs, utils)
    p = uniform_profile(g)
    for j, a in enumerate(("L1", "L2", "L3"), start=1):
        p = pure_profile(g, {f"D1.{j}": a}, p)
    br = best_response_single_decision(g, p, 4)
    (ctx, probs), = br["D2.1"].rules
    assert dict(ctx) == {"L1": 1, "L2": 1, "L3": 1}
    assert probs == (1.0, 0.0, 0.0)


def deterministic_tables(game, d):
    dec = game.decision(d)
    ctxs = enumerate_observation_contexts(game, d)
    k = len(dec.actions)
    for choice in itertools.product(range(k), repeat=len(ctxs)):
        rules = tuple((c, tuple(1.0 if i == a else 0.0 for i in range(k))) for c, a in zip(ctxs, choice))
        yield DecisionStrategy(tuple(1.0 / k for _ in range(k)), rules)


def single_decision_games(rng, n):
    out = []
    while len(out) < n:
        g = random_small_game(rng, max_decisions=4)
        players = {d.player for d in g.decisions}
        if all(len(g.decisions_of(pl)) == 1 for pl in players):
            out.append(g)
    return out


def test_best_response_certificate_by_exhaustive_tables():
    rng = np.random.default_rng(17)
    games = [toll(2, 2, 1)] + single_decision_games(rng, 8)
    checked = 0
    for g in games:
        p = random_rich_profile(g, rng)
        for dec in g.decisions:
            n = len(dec.actions) ** len(enumerate_observation_contexts(g, dec.id))
            if n > 64:
                continue
            br = best_response_single_decision(g, p, dec.player)
            best = expected_utility(g, br, dec.player).total
            for s in deterministic_tables(g, dec.id):
                assert expected_utility(g, p.replace(dec.id, s), dec.player).total <= best + 1e-9
            checked += 1
    assert checked >= 5


def test_best_response_errors():
    decs = (Decision("D1", 1, 1, ("A",), (1,)), Decision("D2", 1, 2, ("A",), (2,)))
    g = TaggGame(1, 2, ("A",), (), decs, {})
    with pytest.raises(ValueError, match="2 decisions"):
        best_response_single_decision(g, uniform_profile(g), 1)
    with pytest.raises(ValueError, match="unknown player"):
        best_response_single_decision(g, uniform_profile(g), 4)
    t = toll(3, 2, 5)
    with pytest.raises(ValueError, match="budget"):
        best_response_single_decision(t, uniform_profile(t), 6, context_budget=10)


def test_conditional_values_report_context_probabilities():
    g = toll(2, 2, 1)
    rows = conditional_action_values(g, uniform_profile(g), "D2.1")
    probs = {tuple(sorted(c.items())): p for c, p, _ in rows}
    assert probs[(("L1", 1), ("L2", 0))] == pytest.approx(0.5)
    assert probs[(("L1", 0), ("L2", 0))] == 0.0
    assert sum(probs.values()) == pytest.approx(1.0)


def test_ibr_from_same_lane_reaches_opposite_lanes():
    g = toll(2, 1, 2)
    start = pure_profile(g, {"D1.1": "L1", "D1.2": "L1"})
    res = iterated_best_response(g, start, max_iters=10)
    profile, converged, iterations = res
    assert converged and iterations <= 3
    eus = [expected_utility(g, profile, pl).total for pl in (1, 2)]
    assert eus == pytest.approx([-1.0, -1.0], abs=1e-12)
    assert all(regret(g, profile, pl) <= 1e-9 for pl in (1, 2))


def test_ibr_keeps_an_equilibrium():
    g = toll(2, 1, 2)
    eq = pure_profile(g, {"D1.1": "L1", "D1.2": "L2"})
    res = iterated_best_response(g, eq)
    assert res.converged and res.iterations == 1 and res.profile is eq


def test_ibr_with_no_iterations():
    g = toll(2, 1, 2)
    start = uniform_profile(g)
    res = iterated_best_response(g, start, max_iters=0)
    assert res.profile is start and not res.converged and res.iterations == 0


def test_ibr_rejects_multi_decision_players():
    decs = (Decision("D1", 1, 1, ("A",), (1,)), Decision("D2", 1, 2, ("A",), (2,)))
    g = TaggGame(1, 2, ("A",), (), decs, {})
    with pytest.raises(ValueError):
        iterated_best_response(g, uniform_profile(g))


def test_regret_values():
    g = toll(2, 1, 2)
    assert regret(g, pure_profile(g, {"D1.1": "L1", "D1.2": "L2"}), 1) == pytest.approx(0.0, abs=1e-9)
    assert regret(g, pure_profile(g, {"D1.1": "L1", "D1.2": "L1"}), 1) == pytest.approx(1.0, abs=1e-12)
    solo = toll(1, 1, 1)
    assert regret(solo, uniform_profile(solo), 1) == pytest.approx(0.0, abs=1e-12)


def test_regret_is_never_negative():
    rng = np.random.default_rng(4)
    for g in single_decision_games(rng, 6):
        p = random_rich_profile(g, rng)
        for pl in sorted({d.player for d in g.decisions}):
            assert regret(g, p, pl) >= -1e-9
