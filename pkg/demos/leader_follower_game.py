"""
A car and a pedestrian negotiate a crossing
===========================================

When a car and a pedestrian approach the same spot, the faster one leads a
two-stage game: the leader picks an action, the follower replies with its best
response, and the leader anticipates that reply.
"""
from dataclasses import replace

from sharedspace.dynamics import Kind, RoadUser
from sharedspace.game import PayoffConfig, assemble_game, best_response, solve_spne

car = RoadUser("Car", Kind.CAR, (0, 0), (5, 0), 5.0, 8.0, 1.0)
ped = RoadUser("Ped", Kind.PEDESTRIAN, (12, -3), (0, 1.3), 1.3, 1.8, 0.3)

config = PayoffConfig()
game = assemble_game(car, [ped], config, interactions={"Ped": 1})
print("leader:", game.leader, [a.value for a in game.leader_actions])
print("follower:", game.followers, [a.value for a in game.follower_actions])
print("leader utilities\n", game.leader_utility)
print("follower utilities\n", game.follower_utility)

for i, a in enumerate(game.leader_actions):
    j = best_response(game, i)
    print(f"if the car plays {a.value}, the pedestrian replies {game.follower_actions[j].value}")

result = solve_spne(game)
print("equilibrium:", result.leader_action.value, "/", result.follower_action.value)

# only the ranking of outcomes matters: a positive affine rescaling keeps the equilibrium
scaled = replace(game, leader_utility=3 * game.leader_utility + 7, follower_utility=0.5 * game.follower_utility - 2)
again = solve_spne(scaled)
print("after rescaling:", again.leader_action.value, "/", again.follower_action.value)
