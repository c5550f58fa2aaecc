"""
Three street encounters
=======================

The bundled scenarios replay three typical encounters: a car braking for
pedestrians stepping into its lane, a column of cars negotiating crossings, and
a car letting another car pull out in front of it. This script runs each one
and prints what the host agent decided and when.
"""
import numpy as np

from sharedspace.scenario import load_scenario
from sharedspace.sim import run, run_summary

for name in ("scenario1", "scenario2", "scenario3"):
    spec = load_scenario(name)
    log = run(spec)
    print(f"\n{name}: {run_summary(log, spec)}")
    cars = [u.id for u in spec.users if u.kind == "car"]
    for car in cars:
        seen = []
        for t, cls, other in log.classifications(car):
            if not seen or seen[-1][1:] != (cls, other):
                seen.append((t, cls, other))
        for t, cls, other in seen:
            print(f"  t={t:5.1f}  {car} vs {other}: {cls}")
    for t, g in log.games():
        print(f"  t={t:5.1f}  game led by {g['game']['leader']} against {g['game']['followers']}: "
              f"{g['spne']['leader_action']} / {g['spne']['follower_action']}")
    for car in cars:
        tr = log.trajectories[car]
        print(f"  {car}: min speed {tr.speed.min():.2f} m/s, arrived at t={log.arrivals.get(car, float('nan')):.1f} s")

# without games, conflicting cars and pedestrians only push each other around
spec = load_scenario("scenario2").with_(game_layer=False)
log = run(spec)
print("\nscenario2 without games: max lateral offset of Car2",
      f"{np.abs(log.trajectories['Car2'].xy[:, 1]).max():.2f} m")
