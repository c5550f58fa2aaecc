"""Extended social force model and action execution for pedestrians and cars."""
from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .environment import ObstaclePolygon, PlannedPath


class Kind(str, enum.Enum):
    PEDESTRIAN = "pedestrian"
    CAR = "car"


class Action(str, enum.Enum):
    CONTINUE = "Continue"
    DECELERATE = "Decelerate"
    DEVIATE = "Deviate"


class SimulationError(RuntimeError):
    """Raised when the state of a road user becomes invalid (NaN, inside an obstacle)."""


@dataclass(frozen=True)
class Mode:
    """Behavioural mode of a road user.

    ``targets`` holds the counterpart ids the mode refers to. ``speed`` is the
    speed a car committed to when it chose Continue in a game.
    """

    name: str = "free_flow"
    targets: tuple[str, ...] = ()
    action: Action | None = None
    speed: float | None = None

    @classmethod
    def free_flow(cls):
        return cls()

    @classmethod
    def stopping(cls, target):
        return cls("stopping", (target,))

    @classmethod
    def following(cls, leader):
        return cls("following", (leader,))

    @classmethod
    def courtesy(cls, target):
        return cls("courtesy", (target,))

    @classmethod
    def game_bound(cls, action, targets, speed=None):
        return cls("game_bound", tuple(targets), Action(action), speed)

    @property
    def brakes(self) -> bool:
        return self.name in ("stopping", "courtesy") or (
            self.name == "game_bound" and self.action is Action.DECELERATE
        )

    def label(self) -> str:
        if self.name == "game_bound":
            return f"game_bound({self.action.value})"
        if self.targets:
            return f"{self.name}({','.join(self.targets)})"
        return self.name


@dataclass(frozen=True)
class ForceParams:
    V0: float = 2.1  # m^2/s^2, user-user strength felt by pedestrians
    sigma: float = 0.3  # m
    U0: float = 10.0  # m^2/s^2, user-obstacle strength
    R: float = 0.2  # m
    car_V0: float = 6.0  # strength felt by cars (car-car, and car-pedestrian without games)
    car_sigma: float = 1.5
    d_min_vehicle: float = 5.0  # m, car-following gap
    stop_epsilon: float = 0.05  # m/s
    conflict_close_distance: float = 3.0  # m, "very close"
    car_turn_rate: float = 30.0  # deg/s
    waypoint_radius: float = 0.3  # m
    horizon: float = 4.0  # s, conflict look-ahead
    conflict_distance: float = 2.0  # m, added to both radii
    courtesy_toward: tuple[str, ...] = ("pedestrian", "car")

    def __post_init__(self):
        for name in ("V0", "sigma", "U0", "R", "car_V0", "car_sigma", "d_min_vehicle",
                     "conflict_close_distance", "car_turn_rate", "waypoint_radius",
                     "horizon", "conflict_distance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.stop_epsilon < 0:
            raise ValueError("stop_epsilon must be non-negative")
        object.__setattr__(self, "courtesy_toward", tuple(Kind(k).value for k in self.courtesy_toward))


@dataclass
class RoadUser:
    id: str
    kind: Kind
    position: np.ndarray
    velocity: np.ndarray
    desired_speed: float
    max_speed: float
    radius: float
    path: PlannedPath | None = None
    next_waypoint_index: int = 1
    heading: np.ndarray | None = None
    relaxation_time: float = 0.5
    fov_half_angle: float = 90.0
    give_way_count: int = 0
    mode: Mode = field(default_factory=Mode)
    group_id: str | None = None
    last_moving_velocity: np.ndarray | None = None

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.position = geo.as_point(self.position)
        self.velocity = geo.as_point(self.velocity)
        if self.desired_speed > self.max_speed:
            raise ValueError(f"{self.id}: desired_speed exceeds max_speed")
        if self.give_way_count < 0:
            raise ValueError(f"{self.id}: give_way_count must be >= 0")
        s = self.speed
        if s > self.max_speed + 1e-9:
            raise ValueError(f"{self.id}: speed {s} exceeds max_speed")
        if self.heading is None and s > 0:
            self.heading = self.velocity / s
        elif self.heading is not None:
            self.heading = geo.unit(geo.as_point(self.heading))
        if self.last_moving_velocity is None and s > 0:
            self.last_moving_velocity = self.velocity.copy()

    @property
    def is_car(self) -> bool:
        return self.kind is Kind.CAR

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])

    @property
    def waypoint(self) -> np.ndarray | None:
        if self.path is None or self.next_waypoint_index >= len(self.path.waypoints):
            return None
        return self.path.waypoints[self.next_waypoint_index]

    @property
    def destination(self) -> np.ndarray | None:
        return None if self.path is None else self.path.waypoints[-1]

    def goal_direction(self) -> np.ndarray:
        wp = self.waypoint
        if wp is None:
            return np.zeros(2)
        return geo.unit(wp - self.position)

    def copy(self) -> "RoadUser":
        new = copy.copy(self)  # state is already validated
        new.position = self.position.copy()
        new.velocity = self.velocity.copy()
        if self.heading is not None:
            new.heading = self.heading.copy()
        if self.last_moving_velocity is not None:
            new.last_moving_velocity = self.last_moving_velocity.copy()
        return new


def driving_force(user: RoadUser, desired_speed: float | None = None, direction=None) -> np.ndarray:
    """Relaxation toward the desired velocity, (v* - v) / tau."""
    if user.relaxation_time <= 0:
        raise ValueError("relaxation time must be positive")
    speed = user.desired_speed if desired_speed is None else desired_speed
    e = user.goal_direction() if direction is None else geo.unit(direction)
    return (speed * e - user.velocity) / user.relaxation_time


def fov_factor(alpha: RoadUser, beta_position) -> float:
    """1 if ``beta_position`` lies within alpha's field of view (boundary inclusive)."""
    if alpha.heading is None:
        return 1.0
    r = np.asarray(beta_position, float) - alpha.position
    if math.hypot(r[0], r[1]) < geo.EPS:
        return 1.0
    ang = math.degrees(math.atan2(abs(geo.cross(alpha.heading, r)), float(np.dot(alpha.heading, r))))
    return 1.0 if ang <= alpha.fov_half_angle else 0.0


def surface_gap(alpha: RoadUser, beta: RoadUser) -> float:
    d = math.dist(alpha.position, beta.position)
    return max(0.0, d - alpha.radius - beta.radius)


def _ignores(alpha: RoadUser, beta_id: str) -> bool:
    return alpha.mode.name in ("following", "courtesy") and beta_id in alpha.mode.targets


def user_repulsion(alpha: RoadUser, beta: RoadUser, params: ForceParams, classical: bool = False) -> np.ndarray:
    """Exponential repulsion felt by ``alpha`` from ``beta``.

    Cars only feel other cars unless ``classical`` is set (plain social force
    model, used when no game resolves the conflict).
    """
    if alpha.id == beta.id:
        raise ValueError("a road user does not repel itself")
    if alpha.is_car and not beta.is_car and not classical:
        return np.zeros(2)
    if _ignores(alpha, beta.id):
        return np.zeros(2)
    if fov_factor(alpha, beta.position) == 0.0:
        return np.zeros(2)
    strength, rng = (params.car_V0, params.car_sigma) if alpha.is_car else (params.V0, params.sigma)
    n = geo.unit(alpha.position - beta.position, fallback=(1.0, 0.0))
    return strength * math.exp(-surface_gap(alpha, beta) / rng) * n


def obstacle_repulsion(alpha: RoadUser, obstacle: ObstaclePolygon, params: ForceParams) -> np.ndarray:
    if obstacle.contains(alpha.position):
        raise SimulationError(f"{alpha.id} is inside obstacle {obstacle.id!r}")
    nearest, d = obstacle.nearest_point(alpha.position)
    n = geo.unit(alpha.position - nearest)
    if d < geo.EPS:
        # on the outline: push along the outward normal of the touched edge
        n = _outward_normal(obstacle, nearest)
    return params.U0 * math.exp(-d / params.R) * n


def _outward_normal(obstacle: ObstaclePolygon, p) -> np.ndarray:
    v = obstacle.vertices
    a, b = geo.polygon_edges(v)
    best, k = math.inf, 0
    for i in range(len(v)):
        d = math.dist(p, geo.closest_point_on_segment(p, a[i], b[i]))
        if d < best:
            best, k = d, i
    e = geo.unit(b[k] - a[k])
    return np.array([e[1], -e[0]])


@dataclass(frozen=True)
class FollowOutcome:
    steer_point: np.ndarray | None = None
    target_speed: float | None = None


def car_following_force(follower: RoadUser, leader: RoadUser, params: ForceParams) -> FollowOutcome:
    """Keep direction toward a point ``d_min`` ahead along the leader's heading,
    or halve speed when the gap is below ``d_min``."""
    gap = surface_gap(follower, leader)
    if gap >= params.d_min_vehicle:
        v_hat = geo.unit(leader.velocity)
        if not np.any(v_hat):
            v_hat = leader.heading if leader.heading is not None else follower.goal_direction()
        return FollowOutcome(steer_point=follower.position + v_hat * params.d_min_vehicle)
    return FollowOutcome(target_speed=follower.speed / 2.0)


def halve_speed(speed: float, stop_epsilon: float) -> float:
    s = speed / 2.0
    return 0.0 if s < stop_epsilon else s


def courtesy_or_stopping_brake(user: RoadUser, params: ForceParams) -> float:
    """Target speed under a braking directive: half the current speed, snapped to 0."""
    return halve_speed(user.speed, params.stop_epsilon)


@dataclass(frozen=True)
class Directive:
    """What the force layer should do with a user for one step."""

    desired_speed: float | None = None
    steer_point: np.ndarray | None = None
    brake_to: float | None = None


def deviation_point(counterpart: RoadUser, stop_epsilon: float = 0.05) -> np.ndarray:
    if counterpart.speed > stop_epsilon:
        return counterpart.position - 0.5 * counterpart.velocity
    last = counterpart.last_moving_velocity
    if last is None:
        last = np.zeros(2)
    return counterpart.position - last


def execute_action(user: RoadUser, action, counterpart: RoadUser | None = None,
                   params: ForceParams | None = None, committed_speed: float | None = None) -> Directive:
    params = params or ForceParams()
    action = Action(action)
    if action is Action.CONTINUE:
        if user.is_car:
            s = user.speed if committed_speed is None else committed_speed
            if s <= params.stop_epsilon:
                s = user.desired_speed  # a halted car resumes its normal speed
            return Directive(desired_speed=s)
        return Directive(desired_speed=user.max_speed)
    if action is Action.DECELERATE:
        return Directive(brake_to=courtesy_or_stopping_brake(user, params))
    if user.is_car:
        raise ValueError("Deviate is not available to cars")
    if counterpart is None:
        raise ValueError("Deviate needs a counterpart")
    if fov_factor(user, counterpart.position) == 0.0:
        return Directive(desired_speed=user.desired_speed)
    return Directive(desired_speed=user.desired_speed,
                     steer_point=deviation_point(counterpart, params.stop_epsilon))


def integrate_step(user: RoadUser, net_accel, dt: float, params: ForceParams | None = None) -> RoadUser:
    """Advance one user by ``dt`` with semi-implicit Euler; returns a new RoadUser."""
    params = params or ForceParams()
    if dt <= 0:
        raise ValueError("dt must be positive")
    a = np.asarray(net_accel, float)
    if not math.isfinite(a[0] + a[1] + user.position[0] + user.position[1]
                         + user.velocity[0] + user.velocity[1]):
        raise SimulationError(f"non-finite state for {user.id}: x={user.position}, v={user.velocity}, a={a}")
    new = user.copy()
    if user.is_car and user.heading is not None:
        h = user.heading
        s = user.speed
        along = float(np.dot(a, h))
        lat = geo.cross(h, a)
        s_new = min(max(s + along * dt, 0.0), user.max_speed)
        cap = math.radians(params.car_turn_rate) * dt
        turn = math.atan2(lat * dt, max(s + along * dt, 0.5))
        turn = min(max(turn, -cap), cap)
        new.heading = geo.rotate(h, turn)
        new.velocity = s_new * new.heading
    else:
        v = user.velocity + a * dt
        s = math.hypot(v[0], v[1])
        if s > user.max_speed:
            v = v * (user.max_speed / s)
            s = user.max_speed
        new.velocity = v
        if s > params.stop_epsilon:
            new.heading = v / s
    new.position = user.position + new.velocity * dt
    if new.speed > params.stop_epsilon:
        new.last_moving_velocity = new.velocity.copy()
    advance_waypoint(new, params.waypoint_radius)
    return new


def advance_waypoint(user: RoadUser, radius: float) -> None:
    """Move to the next waypoint once within ``radius`` of the current one, or once
    beyond it along the incoming segment."""
    if user.path is None:
        return
    wps = user.path.waypoints
    while user.next_waypoint_index < len(wps) - 1:
        wp = wps[user.next_waypoint_index]
        prev = wps[user.next_waypoint_index - 1]
        if math.dist(user.position, wp) <= radius or float(np.dot(user.position - wp, wp - prev)) > 0:
            user.next_waypoint_index += 1
        else:
            break
