"""Conflict detection and classification of interactions between road users."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dynamics import ForceParams, RoadUser


class InteractionClass(str, enum.Enum):
    REACTIVE_STOPPING = "ReactiveStopping"
    CAR_FOLLOWING = "CarFollowing"
    COURTESY = "Courtesy"
    COMPLEX_GAME = "ComplexGame"
    NONE = "None"

    @property
    def local(self) -> bool:
        return self in (InteractionClass.REACTIVE_STOPPING, InteractionClass.CAR_FOLLOWING,
                        InteractionClass.COURTESY)


@dataclass(frozen=True, slots=True)
class Conflict:
    """Ordered pair (first sees second) at risk of collision.

    ``distance`` is the current surface gap; ``theta_alpha`` / ``theta_beta`` are the
    angles (degrees, [0, 360)) from each user's heading to the direction first -> second.
    """

    first: str
    second: str
    distance: float
    theta_alpha: float
    theta_beta: float
    time_to_closest_approach: float
    min_predicted_distance: float

    def involves(self, uid: str) -> bool:
        return self.first == uid or self.second == uid

    def other(self, uid: str) -> str:
        return self.second if self.first == uid else self.first

    def as_dict(self) -> dict:
        return {
            "first": self.first, "second": self.second, "distance": self.distance,
            "theta_alpha": self.theta_alpha, "theta_beta": self.theta_beta,
            "ttca": self.time_to_closest_approach, "min_distance": self.min_predicted_distance,
        }


def heading_of(user: RoadUser) -> np.ndarray:
    if user.heading is not None:
        return user.heading
    g = user.goal_direction()
    return g if np.any(g) else np.array([1.0, 0.0])


def prediction_velocity(user: RoadUser, stop_epsilon: float) -> np.ndarray:
    """Intended velocity for the second look-ahead.

    A halted or yielding user is predicted as if it resumed toward its goal, so a
    yield lasts until resuming would be safe.
    """
    if user.speed > stop_epsilon and not user.mode.brakes:
        return user.velocity
    return user.desired_speed * user.goal_direction()


def _closest_approach(r, w, horizon):
    ww = np.einsum("ijk,ijk->ij", w, w)
    rw = np.einsum("ijk,ijk->ij", r, w)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(ww > 1e-12, -rw / ww, 0.0)
    t = np.clip(t, 0.0, horizon)
    closest = r + t[..., None] * w
    return t, np.hypot(closest[..., 0], closest[..., 1])


def detect_conflicts(users, horizon: float = 4.0, conflict_distance: float = 2.0,
                     velocities=None, intended=None) -> list[Conflict]:
    """Constant-velocity look-ahead over ``[0, horizon]`` for every ordered pair.

    A conflict is emitted for (alpha, beta) when beta is in alpha's field of view and
    the predicted minimum centre distance falls below ``conflict_distance`` plus both
    radii. ``velocities`` overrides the extrapolation velocities (same order as users).
    With ``intended`` given as a second set of velocities, the closer of the two
    predictions counts.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    users = list(users)
    n = len(users)
    if n < 2:
        return []
    pos = np.array([u.position for u in users])
    vel = np.array([u.velocity for u in users]) if velocities is None else np.asarray(velocities, float)
    head = np.array([heading_of(u) for u in users])
    rad = np.array([u.radius for u in users])
    half_fov = np.radians([u.fov_half_angle for u in users])

    r = pos[None, :, :] - pos[:, None, :]  # alpha -> beta
    t, dmin = _closest_approach(r, vel[None, :, :] - vel[:, None, :], horizon)
    if intended is not None:
        alt = np.asarray(intended, float)
        t2, d2 = _closest_approach(r, alt[None, :, :] - alt[:, None, :], horizon)
        closer = d2 < dmin
        t = np.where(closer, t2, t)
        dmin = np.where(closer, d2, dmin)
    dist = np.hypot(r[..., 0], r[..., 1])
    cr = head[:, None, 0] * r[..., 1] - head[:, None, 1] * r[..., 0]
    dt_ = np.einsum("ik,ijk->ij", head, r)
    view_angle = np.arctan2(np.abs(cr), dt_)
    in_fov = (view_angle <= half_fov[:, None]) | (dist < geo.EPS)
    threshold = conflict_distance + rad[:, None] + rad[None, :]
    mask = in_fov & (dmin < threshold)
    np.fill_diagonal(mask, False)

    theta_a = np.degrees(np.arctan2(cr, dt_)) % 360.0
    cb = head[None, :, 0] * r[..., 1] - head[None, :, 1] * r[..., 0]
    db = np.einsum("jk,ijk->ij", head, r)
    theta_b = np.degrees(np.arctan2(cb, db)) % 360.0
    gap = np.maximum(0.0, dist - rad[:, None] - rad[None, :])

    out = []
    for i, j in zip(*np.nonzero(mask)):
        out.append(Conflict(
            users[i].id, users[j].id, float(gap[i, j]),
            float(theta_a[i, j]) % 360.0, float(theta_b[i, j]) % 360.0,
            float(t[i, j]), float(dmin[i, j]),
        ))
    return out


def _in_band(theta: float, lo_incl: float) -> bool:
    return theta <= lo_incl or theta >= 360.0 - lo_incl


def in_heading_corridor(alpha: RoadUser, beta: RoadUser, half_width: float) -> bool:
    """Beta's centre is ahead of alpha and within ``half_width`` of alpha's heading line."""
    h = heading_of(alpha)
    r = beta.position - alpha.position
    return float(np.dot(r, h)) > 0 and abs(geo.cross(h, r)) <= half_width


def moving_in_front(alpha: RoadUser, beta: RoadUser, params: ForceParams) -> bool:
    """Beta is ahead of alpha, inside its heading corridor, and on the move."""
    return (in_heading_corridor(alpha, beta, params.conflict_close_distance)
            and beta.speed > params.stop_epsilon)


def classify(conflict: Conflict, alpha: RoadUser, beta: RoadUser,
             params: ForceParams | None = None) -> InteractionClass:
    """Priority: reactive stopping, car following, courtesy, then game."""
    params = params or ForceParams()
    ta, tb = conflict.theta_alpha, conflict.theta_beta
    if (alpha.is_car and not beta.is_car and _in_band(ta, 15.0)
            and (moving_in_front(alpha, beta, params) or conflict.distance < params.conflict_close_distance)):
        return InteractionClass.REACTIVE_STOPPING
    if alpha.is_car and beta.is_car and _in_band(ta, 10.0) and _in_band(tb, 5.0):
        return InteractionClass.CAR_FOLLOWING
    if (alpha.is_car and beta.kind.value in params.courtesy_toward and _in_band(ta, 20.0)
            and (70.0 < tb < 100.0 or 260.0 < tb < 290.0)):
        return InteractionClass.COURTESY
    if conflict.time_to_closest_approach > 0:
        return InteractionClass.COMPLEX_GAME
    return InteractionClass.NONE


def nearest_conflict(user, conflicts) -> Conflict | None:
    uid = user if isinstance(user, str) else user.id
    mine = [c for c in conflicts if c.first == uid]
    if not mine:
        return None
    return min(mine, key=lambda c: (c.distance, c.time_to_closest_approach, c.second))


def count_active_interactions(user, conflicts) -> int:
    """Number of distinct counterparts the user is in conflict with."""
    uid = user if isinstance(user, str) else user.id
    return len({c.other(uid) for c in conflicts if c.involves(uid)})
