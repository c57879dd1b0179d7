import itertools
from math import comb

import numpy as np
import pytest

from oracles import oracle_payoff, oracle_payoff_terms, random_rich_profile, random_small_game
from tagg.factor import BudgetExceeded, Factor, factor_marginalize, factor_product, factor_reduce
from tagg.filtering import (
    FilterStats,
    csi_decompose,
    csi_terms,
    filter_states,
    interface_expectation,
    interface_filter,
    step_chance,
    step_decisions_counts,
)
from tagg.generators import TollboothSpec, make_tollbooth
from tagg.inference import (
    InferenceStats,
    expectation,
    interaction_graph,
    min_fill_order,
    min_fill_ordering,
    variable_elimination,
)
from tagg.model import (
    BehaviorProfile,
    ChanceVariable,
    Decision,
    DecisionStrategy,
    TaggGame,
    UtilityFunction,
    pure_profile,
    random_profile,
    uniform_profile,
)
from tagg.network import CopyCpd, InducedNet, NetVariable, TableCpd, build_induced_net, count_id, payoff_id
from tagg.transform import apply_causal_decomposition, transform


def tollbooth(lanes, waves, cars, profile=None):
    g = make_tollbooth(TollboothSpec(lanes, waves, cars))
    p = profile(g) if profile else uniform_profile(g)
    return g, build_induced_net(g, p)


# ------------------------------------------------------------------ factors

def test_product_with_scalar_is_identity():
    f = Factor(("X",), np.array([0.2, 0.8]))
    g = factor_product(f, Factor.scalar(1.0))
    assert g.scope == ("X",) and np.array_equal(g.table, f.table)


def test_product_of_independent_uniforms():
    f = Factor(("X",), np.array([0.5, 0.5]))
    g = Factor(("Y",), np.array([0.5, 0.5]))
    h = factor_product(f, g)
    assert h.scope == ("X", "Y") and np.allclose(h.table, 0.25)


def test_product_matches_triple_loop():
    rng = np.random.default_rng(0)
    f = Factor(("X", "Y"), rng.random((2, 3)))
    g = Factor(("Y", "Z"), rng.random((3, 4)))
    h = factor_product(f, g).transpose(("X", "Y", "Z"))
    for x, y, z in itertools.product(range(2), range(3), range(4)):
        assert h.table[x, y, z] == pytest.approx(f.table[x, y] * g.table[y, z], abs=1e-15)


def test_product_rejects_card_mismatch():
    with pytest.raises(ValueError):
        factor_product(Factor(("X",), np.ones(2)), Factor(("X",), np.ones(3)))


def test_marginalize():
    f = Factor(("X", "Y"), np.full((2, 2), 0.25))
    assert factor_marginalize(f, []) is f
    assert np.allclose(factor_marginalize(f, ["Y"]).table, [0.5, 0.5])
    rng = np.random.default_rng(1)
    t = rng.random((2, 3, 2))
    g = factor_marginalize(Factor(("A", "B", "C"), t), ["B"])
    for a, c in itertools.product(range(2), range(2)):
        assert g.table[a, c] == pytest.approx(sum(t[a, b, c] for b in range(3)))
    with pytest.raises(KeyError):
        factor_marginalize(f, ["Z"])


def test_reduce():
    f = Factor(("X", "Y"), np.full((2, 2), 0.25))
    assert np.array_equal(factor_reduce(f, {}).table, f.table)
    r = factor_reduce(f, {"X": 0})
    assert r.scope == ("Y",) and np.allclose(r.table, 0.25)
    rng = np.random.default_rng(2)
    t = rng.random((3, 2, 4))
    r = factor_reduce(Factor(("A", "B", "C"), t), {"C": 3, "A": 1})
    assert r.scope == ("B",) and np.array_equal(r.table, t[1, :, 3])
    with pytest.raises(IndexError):
        factor_reduce(f, {"X": 2})


# ------------------------------------------------------------------ ordering

def chain_net():
    a = NetVariable("A", "chance", 0, (0, 1))
    b = NetVariable("B", "chance", 0, (0, 1), ("A",))
    c = NetVariable("C", "chance", 0, (0, 1), ("B",))
    cpds = {
        "A": TableCpd((), table=np.array([0.3, 0.7])),
        "B": TableCpd(("A",), table=np.array([[0.9, 0.1], [0.2, 0.8]])),
        "C": TableCpd(("B",), table=np.array([[0.6, 0.4], [0.5, 0.5]])),
    }
    return InducedNet({"A": a, "B": b, "C": c}, cpds)


def test_min_fill_on_chain_eliminates_from_the_root():
    assert min_fill_ordering(chain_net(), {"C"}) == ["A", "B"]
    assert min_fill_ordering(InducedNet({}, {}), set()) == []


def induced_width(adj, order):
    adj = {v: set(n) for v, n in adj.items()}
    width = 0
    for v in order:
        ns = adj.pop(v)
        width = max(width, len(ns))
        for a in ns:
            adj[a].discard(v)
            adj[a] |= ns - {a}
    return width


def test_min_fill_beats_reverse_topological_order_on_decomposed_tollbooth():
    _, net = tollbooth(3, 2, 3)
    dec = apply_causal_decomposition(net)
    target = payoff_id("D2.1", 2)
    order = min_fill_ordering(dec, {target})
    relevant = dec.ancestors([target])
    adj = interaction_graph([(v,) + dec[v].parents for v in relevant])
    # moralized graph restricted to relevant variables
    rev = [v for v in reversed(list(dec.variables)) if v in relevant and v != target]
    assert induced_width(adj, order) <= induced_width(adj, rev)


def test_min_fill_tie_break_is_by_id():
    adj = {"b": {"a"}, "a": {"b"}, "c": set()}
    assert min_fill_order(adj, ["c", "b", "a"]) == ["a", "b", "c"]


# ------------------------------------------------------------------ variable elimination

def test_root_decision_is_uniform():
    _, net = tollbooth(3, 1, 2)
    f = variable_elimination(net, ["D1.1"])
    assert np.allclose(f.normalize().table, 1 / 3)


def test_payoff_distribution_two_lanes_two_cars():
    _, net = tollbooth(2, 1, 2)
    target = payoff_id("D1.1", 1)
    f = variable_elimination(net, [target]).normalize()
    dom = net[target].domain
    assert f.table[dom.index(-2.0)] == pytest.approx(0.5, abs=1e-12)
    assert f.table[dom.index(-1.0)] == pytest.approx(0.5, abs=1e-12)


def test_count_is_binomial():
    _, net = tollbooth(3, 1, 3)
    f = variable_elimination(net, [count_id("L1", 1)]).normalize()
    assert np.allclose(f.table, [comb(3, k) * (1 / 3) ** k * (2 / 3) ** (3 - k) for k in range(4)], atol=1e-12)


def test_evidence_and_inconsistent_evidence():
    _, net = tollbooth(2, 1, 2)
    f = variable_elimination(net, ["D1.2"], {count_id("L1", 1): 2})
    assert np.allclose(f.normalize().table, [1.0, 0.0])
    g = make_tollbooth(TollboothSpec(2, 1, 2))
    net = build_induced_net(g, pure_profile(g, {"D1.1": "L1", "D1.2": "L1"}))
    stats = InferenceStats()
    z = variable_elimination(net, ["D1.1"], {count_id("L2", 1): 2}, stats=stats)
    assert not z.table.any() and stats.inconsistent
    with pytest.raises(ValueError):
        variable_elimination(net, [])


def test_explicit_ordering_gives_same_answer():
    net = chain_net()
    f = variable_elimination(net, ["C"], ordering=["B", "A"]).normalize()
    g = variable_elimination(net, ["C"]).normalize()
    p_b = np.array([0.3, 0.7]) @ np.array([[0.9, 0.1], [0.2, 0.8]])
    assert np.allclose(f.table, g.table) and np.allclose(g.table, p_b @ np.array([[0.6, 0.4], [0.5, 0.5]]))


def test_budget_is_enforced():
    _, net = tollbooth(3, 2, 5)
    with pytest.raises(BudgetExceeded):
        variable_elimination(net, [payoff_id("D2.1", 2)], budget=10_000)


# ------------------------------------------------------------------ filtering

def test_single_step_filter_equals_ve():
    g, net = tollbooth(3, 1, 3, lambda g: random_profile(g, 4))
    target = payoff_id("D1.2", 1)
    ve = variable_elimination(net, [target]).normalize()
    fl = interface_filter(transform(net), target)
    assert np.allclose(fl.table, ve.table, atol=1e-12)


def test_lower_count_lane_policy_always_pays_minus_one():
    g = make_tollbooth(TollboothSpec(2, 2, 1))
    rules = (({"L1": 1, "L2": 0}, (0.0, 1.0)), ({"L1": 0, "L2": 1}, (1.0, 0.0)))
    p = pure_profile(g, {"D1.1": "L1"}).replace("D2.1", DecisionStrategy((0.5, 0.5), rules))
    net = transform(build_induced_net(g, p))
    target = payoff_id("D2.1", 2)
    f = interface_filter(net, target)
    assert f.table[net[target].domain.index(-1.0)] == pytest.approx(1.0, abs=1e-12)


def test_filter_matches_transformed_ve_on_two_wave_tollbooth():
    g, net = tollbooth(3, 2, 3)
    t = transform(net)
    for d in g.decisions:
        target = payoff_id(d.id, d.time)
        ve = variable_elimination(t, [target])
        assert interface_expectation(t, target) == pytest.approx(expectation(ve, t[target].domain), abs=1e-9)


def test_filter_states_are_distributions():
    rng = np.random.default_rng(8)
    for _ in range(10):
        g = random_small_game(rng)
        net = transform(build_induced_net(g, random_rich_profile(g, rng)))
        for target in net.targets:
            for s in filter_states(net, target):
                assert np.all(s.joint.table >= 0)
                assert s.joint.total() == pytest.approx(1.0, abs=1e-9)


def test_filter_rejects_bad_input():
    g, net = tollbooth(2, 2, 1)
    with pytest.raises(KeyError):
        interface_filter(transform(net), "nope")
    decs = (Decision("D1", 1, 1, ("A",), (1,)), Decision("D3", 2, 3, ("A",), (3,), ("D1",)))
    g = TaggGame(2, 3, ("A",), (), decs, {})
    with pytest.raises(ValueError):
        interface_filter(build_induced_net(g, uniform_profile(g)), payoff_id("D3", 3))


def test_step_with_one_decision_pushes_strategy_through_counter():
    g, net = tollbooth(2, 2, 1, lambda g: random_profile(g, 2))
    t = transform(net)
    f = step_decisions_counts(t, 1, payoff_id("D2.1", 2), {})
    p = np.array(random_profile(g, 2)["D1.1"].default)
    # L1^1 = 1 exactly when the car takes L1
    assert f.scope == (count_id("L1", 1), count_id("L2", 1))
    assert f.table[1, 0] == pytest.approx(p[0]) and f.table[0, 1] == pytest.approx(p[1])
    assert f.total() == pytest.approx(1.0)


def test_step_counts_are_multinomial():
    _, net = tollbooth(2, 2, 3)
    f = step_decisions_counts(transform(net), 1, payoff_id("D2.1", 2), {})
    for a, b in itertools.product(range(4), range(4)):
        expect = comb(3, a) / 8 if a + b == 3 else 0.0
        assert f.table[a, b] == pytest.approx(expect, abs=1e-12)


def test_step_counts_match_ve_for_a_full_wave():
    g, net = tollbooth(3, 2, 5, lambda g: random_profile(g, 12))
    t = transform(net)
    counts = [count_id(a, 1) for a in g.actions]
    f = step_decisions_counts(t, 1, payoff_id("D2.1", 2), {}).transpose(counts)
    ve = variable_elimination(t, counts).normalize()
    assert np.abs(f.table - ve.table).max() <= 1e-12


def chance_game():
    x = ChanceVariable("X", (0, 1), ("A",), 1, ((0.9, 0.1), (0.2, 0.8)))
    y = ChanceVariable("Y", ("n", "y"), ("X",), 1, ((0.7, 0.3), (0.4, 0.6)))
    decs = (Decision("D1", 1, 1, ("A", "B"), (1,)), Decision("D2", 2, 2, ("A", "B"), (2,), ("Y",)))
    utils = {("A", 2): UtilityFunction("A", 2, ("A",), (0.0, 1.0, 2.0))}
    return TaggGame(2, 2, ("A", "B"), (x, y), decs, utils)


def test_step_without_chance_is_scalar_one():
    _, net = tollbooth(2, 2, 1)
    f = step_chance(transform(net), 1, payoff_id("D2.1", 2), {})
    assert f.scope == () and float(f.table) == 1.0


def test_step_chance_single_table_is_returned_as_is():
    x = ChanceVariable("X", (0, 1), ("A",), 1, ((0.9, 0.1), (0.2, 0.8)))
    decs = (Decision("D1", 1, 1, ("A", "B"), (1,)), Decision("D2", 2, 2, ("A", "B"), (2,), ("X",)))
    g = TaggGame(2, 2, ("A", "B"), (x,), decs, {})
    net = transform(build_induced_net(g, uniform_profile(g)))
    f = step_chance(net, 1, payoff_id("D2", 2), {})
    assert f.scope == ("A^1", "X")
    assert np.allclose(f.table, [[0.9, 0.1], [0.2, 0.8]])


def test_step_chance_chain_sums_out_hidden_link():
    g = chance_game()
    net = transform(build_induced_net(g, uniform_profile(g)))
    f = step_chance(net, 1, payoff_id("D2", 2), {})
    assert f.scope == ("A^1", "Y")
    hand = np.array([[0.9, 0.1], [0.2, 0.8]]) @ np.array([[0.7, 0.3], [0.4, 0.6]])
    assert np.allclose(f.table, hand, atol=1e-15)


# ------------------------------------------------------------------ CSI

def test_csi_single_action_decision():
    g, net = tollbooth(1, 2, 2)
    t = transform(net)
    target = payoff_id("D2.1", 2)
    _, subs = csi_decompose(t, target)
    assert len(subs) == 1
    assert csi_terms(t, target)["L1"] == pytest.approx(interface_expectation(t, target, csi=False))


def test_csi_terms_two_lanes_two_cars():
    _, net = tollbooth(2, 1, 2)
    terms = csi_terms(transform(net), payoff_id("D1.1", 1))
    assert terms == pytest.approx({"L1": -0.75, "L2": -0.75}, abs=1e-12)
    assert sum(terms.values()) == pytest.approx(-1.5, abs=1e-12)


def test_csi_terms_match_oracle_terms():
    rng = np.random.default_rng(33)
    for _ in range(10):
        g = random_small_game(rng)
        p = random_rich_profile(g, rng)
        net = transform(build_induced_net(g, p))
        for d in g.decisions:
            for tau in d.payoff_times:
                got = csi_terms(net, payoff_id(d.id, tau))
                want = oracle_payoff_terms(g, p, d.id, tau)
                assert got == pytest.approx(want, abs=1e-9)


def test_identical_lane_structure_shares_one_filter_run():
    g, net = tollbooth(3, 3, 2)
    stats = FilterStats()
    t = transform(net)
    target = payoff_id("D3.1", 3)
    interface_expectation(t, target, stats=stats)
    assert stats.filter_runs == 1 < len(g.decision("D3.1").actions)


def test_csi_and_plain_filter_agree_with_oracle_with_chance():
    g = chance_game()
    p = BehaviorProfile(
        {"D1": DecisionStrategy((0.4, 0.6)), "D2": DecisionStrategy((0.5, 0.5), (({"Y": "y"}, (0.9, 0.1)),))}
    )
    net = transform(build_induced_net(g, p))
    target = payoff_id("D2", 2)
    want = oracle_payoff(g, p, "D2", 2)
    assert interface_expectation(net, target) == pytest.approx(want, abs=1e-12)
    assert interface_expectation(net, target, csi=False) == pytest.approx(want, abs=1e-12)


def test_copy_variable_cpd_is_identity():
    a = NetVariable("A", "chance", 0, (0, 1, 2))
    c = NetVariable("A@1", "copy", 1, (0, 1, 2), ("A",))
    net = InducedNet({"A": a, "A@1": c}, {"A": TableCpd((), table=np.array([0.2, 0.3, 0.5])), "A@1": CopyCpd(("A",))})
    f = variable_elimination(net, ["A", "A@1"])
    assert np.allclose(f.table, np.diag([0.2, 0.3, 0.5]))
