"""Two waves of cars on three lanes: build the induced network, transform it,
and compute one driver's expected toll three ways."""
from tagg import (
    TollboothSpec,
    apply_causal_decomposition,
    build_induced_net,
    compute_interface,
    expected_utility,
    make_tollbooth,
    random_profile,
    transform,
)
from tagg.gameops import METHODS
from tagg.network import count_id

game = make_tollbooth(TollboothSpec(lanes=3, waves=2, cars_per_wave=3))
profile = random_profile(game, 7)
print(f"{game.num_players} drivers, {len(game.actions)} lanes, {game.duration} waves")

net = build_induced_net(game, profile)
kinds = sorted({v.kind for v in net.variables.values()})
print("induced net:", {k: len(net.by_kind(k)) for k in kinds})

dec = apply_causal_decomposition(net)
print("after decomposition, L1 count parents:", dec[count_id("L1", 2)].parents)

t = transform(net)
print("interface after wave 1:", sorted(compute_interface(t, 1)))

driver = game.decisions[-1].player
for m in METHODS:
    print(f"{m:15s} EU of driver {driver}: {expected_utility(game, profile, driver, m).total:.12f}")
