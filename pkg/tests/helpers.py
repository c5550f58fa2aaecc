import numpy as np

from sharedspace.dynamics import Kind, RoadUser
from sharedspace.environment import PlannedPath


def make_user(uid, kind="pedestrian", pos=(0, 0), vel=(0, 0), dest=None, desired=None, max_speed=None,
              radius=None, **kw) -> RoadUser:
    """Road user on a straight path to ``dest`` (default: 50 m along its velocity or +x)."""
    car = Kind(kind) is Kind.CAR
    pos = np.asarray(pos, float)
    vel = np.asarray(vel, float)
    if dest is None:
        s = np.hypot(*vel)
        dest = pos + (50 * vel / s if s > 0 else np.array([50.0, 0.0]))
    desired = desired if desired is not None else (5.0 if car else 1.3)
    max_speed = max_speed if max_speed is not None else (8.0 if car else 1.8)
    radius = radius if radius is not None else (1.0 if car else 0.3)
    path = PlannedPath(np.array([pos, dest], float))
    heading = kw.pop("heading", None)
    if heading is None:
        d = np.asarray(dest, float) - pos
        heading = d / np.hypot(*d)
    return RoadUser(uid, Kind(kind), pos, vel, desired, max_speed, radius, path=path, heading=heading, **kw)
