"""Ice-cream vendors on a four-spot beach over two days. Each vendor
decides once, seeing the counts at its own and neighboring spots; run
best-response dynamics from the uniform profile and report regrets.
Sales at a spot fall with vendors there and, less steeply, next door."""
from tagg import IceCreamSpec, expected_utility, iterated_best_response, make_icecream, regret, uniform_profile


def sales(counts):
    own, *near = counts
    return 6.0 - 2.0 * own - sum(near)


game = make_icecream(IceCreamSpec(4, 2, (1, 2, 4, 3)), utility=sales)
start = uniform_profile(game)
vendors = sorted({d.player for d in game.decisions})
print("uniform: " + "  ".join(f"P{pl}={expected_utility(game, start, pl).total:+.3f}" for pl in vendors))
result = iterated_best_response(game, start, max_iters=20)
print(f"converged={result.converged} after {result.iterations} rounds")
for rnd, eus in enumerate(result.history, start=1):
    print(f"round {rnd}: " + "  ".join(f"P{pl}={v:+.3f}" for pl, v in eus.items()))
for pl in vendors:
    print(f"vendor {pl}: regret {regret(game, result.profile, pl):.2e}")
