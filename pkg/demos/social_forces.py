"""
Social forces on a lone walker and a pair
=========================================

Each step a road user accelerates toward its desired velocity and is pushed
away by nearby users and obstacles. This script shows the relaxation toward
the desired speed and the size of the repulsion at a few distances.
"""
import math

import numpy as np

from sharedspace.dynamics import ForceParams, Kind, RoadUser, driving_force, integrate_step, user_repulsion
from sharedspace.environment import PlannedPath

params = ForceParams()
dt, tau, v_star = 0.1, 0.5, 1.3


def walker(uid, x, vx):
    path = PlannedPath(np.array([[x, 0.0], [x + 100 * np.sign(vx or 1), 0.0]]))
    return RoadUser(uid, Kind.PEDESTRIAN, (x, 0.0), (vx, 0.0), v_star, 1.8, 0.3, path=path,
                    heading=(np.sign(vx or 1), 0.0), relaxation_time=tau)


# a walker starting at rest: speed after each step against the continuous curve
u = walker("A", 0.0, 0.0)
print(" t [s]  simulated  exact")
for k in range(1, 16):
    u = integrate_step(u, driving_force(u), dt, params)
    if k % 5 == 0:
        print(f"{k * dt:6.1f}  {u.speed:9.4f}  {v_star * (1 - math.exp(-k * dt / tau)):6.4f}")

# repulsion between two walkers facing each other decays with the gap between their bodies
print("\n gap [m]  push [m/s^2]")
for x in (0.7, 1.0, 1.5, 2.5):
    a, b = walker("A", 0.0, 1.0), walker("B", x, -1.0)
    f = user_repulsion(a, b, params)
    print(f"{x - 0.6:8.2f}  {np.hypot(*f):11.4f}")
