"""Simulation loop: spawning, per-step mediation, force assembly, integration, recording."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import geometry as geo
from .dynamics import (
    Action, ForceParams, Kind, RoadUser, SimulationError, car_following_force,
    courtesy_or_stopping_brake, execute_action, integrate_step, obstacle_repulsion,
)
from .environment import build_visibility_graph, offset_inner_vertices, plan_path
from .interaction import detect_conflicts, prediction_velocity
from .mediator import MediatorConfig, dispatch_decision, run_cycle
from .scenario import DEFAULT_RADIUS, ScenarioSpec, UserSpec, bundled_scenario_path, parse_scenario
from .trajectory import TrajectoryBuilder, write_trajectories


@dataclass
class SimulationLog:
    scenario: str
    seed: int
    dt: float
    cycles: list = field(default_factory=list)  # one record per step
    collisions: list = field(default_factory=list)  # onset events
    trajectories: dict = field(default_factory=dict)  # user id -> Trajectory
    arrivals: dict = field(default_factory=dict)  # user id -> arrival time
    planned_paths: dict = field(default_factory=dict)  # user id -> waypoints (list of [x, y])
    give_way_initial: dict = field(default_factory=dict)
    entries: dict = field(default_factory=dict)  # user id -> time it actually entered
    end_time: float = 0.0

    def jsonl_lines(self):
        for rec in self.cycles:
            yield json.dumps(rec, sort_keys=True)

    def serialize(self) -> str:
        """Canonical text form of the whole log; equal text means identical runs."""
        head = {
            "scenario": self.scenario, "seed": self.seed, "dt": self.dt, "end_time": self.end_time,
            "collisions": self.collisions, "arrivals": self.arrivals,
            "give_way_initial": self.give_way_initial, "planned_paths": self.planned_paths,
            "entries": self.entries,
        }
        parts = [json.dumps(head, sort_keys=True)]
        parts.extend(self.jsonl_lines())
        for uid in sorted(self.trajectories):
            tr = self.trajectories[uid]
            parts.append(json.dumps({
                "user": uid, "t": tr.t.tolist(), "xy": tr.xy.tolist(),
                "speed": tr.speed.tolist(), "mode": tr.mode,
            }))
        return "\n".join(parts)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    def games(self):
        for rec in self.cycles:
            for g in rec["games"]:
                yield rec["t"], g

    def classifications(self, uid: str):
        """(t, class, counterpart) for every cycle in which ``uid`` had a conflict."""
        out = []
        for rec in self.cycles:
            if uid in rec["classification"]:
                out.append((rec["t"], rec["classification"][uid], rec["nearest"][uid]["second"]))
        return out

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectories(out / "trajectories.csv", [self.trajectories[k] for k in sorted(self.trajectories)])
        with (out / "log.jsonl").open("w") as fh:
            for line in self.jsonl_lines():
                fh.write(line + "\n")
        summary = {
            "scenario": self.scenario, "seed": self.seed, "dt": self.dt, "end_time": self.end_time,
            "arrivals": self.arrivals, "collisions": self.collisions,
            "give_way_initial": self.give_way_initial, "entries": self.entries,
            "digest": self.digest(),
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
        return out


def _initial_give_way(scenario: ScenarioSpec, seed: int) -> dict:
    """Single RNG stream: one draw per user in file order, fixed values override."""
    lo, hi = scenario.payoffs.give_way_range
    rng = np.random.default_rng(seed)
    draws = rng.integers(lo, hi + 1, size=len(scenario.users))
    return {u.id: (int(u.give_way_count) if u.give_way_count is not None else int(g))
            for u, g in zip(scenario.users, draws)}


def spawn_user(spec: UserSpec, graph, obstacles, clearance: float, give_way: int) -> RoadUser:
    path = plan_path(graph, spec.origin, spec.destination, obstacles)
    path = offset_inner_vertices(path, obstacles, clearance)
    wps = path.waypoints
    heading = geo.unit(wps[1] - wps[0], fallback=(1.0, 0.0)) if len(wps) > 1 else np.array([1.0, 0.0])
    radius = spec.radius if spec.radius is not None else DEFAULT_RADIUS[spec.kind]
    return RoadUser(
        id=spec.id, kind=Kind(spec.kind), position=np.array(spec.origin, float),
        velocity=heading * spec.initial_speed, desired_speed=spec.desired_speed,
        max_speed=spec.max_speed, radius=radius, path=path, heading=heading,
        relaxation_time=spec.relaxation_time, fov_half_angle=spec.fov_half_angle,
        give_way_count=give_way, group_id=spec.group_id,
    )


class ObstacleField:
    """All obstacle outlines stacked into one edge table for batched queries."""

    def __init__(self, obstacles):
        self.obstacles = list(obstacles)
        edges = [geo.polygon_edges(ob.vertices) for ob in self.obstacles]
        self.a = np.concatenate([e[0] for e in edges]) if edges else np.zeros((0, 2))
        self.b = np.concatenate([e[1] for e in edges]) if edges else np.zeros((0, 2))
        sizes = [len(ob.vertices) for ob in self.obstacles]
        self.bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    def __len__(self):
        return len(self.obstacles)

    def inside(self, points: np.ndarray) -> np.ndarray:
        """(N, K) even-odd membership; points on an outline count as outside."""
        x, y = points[:, 0:1], points[:, 1:2]
        a, b = self.a, self.b
        cond = (a[None, :, 1] > y) != (b[None, :, 1] > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a[None, :, 0] + (y - a[None, :, 1]) * (b[None, :, 0] - a[None, :, 0]) / (b[None, :, 1] - a[None, :, 1])
        hits = (cond & (x < xc)).astype(int)
        inside = (np.add.reduceat(hits, self.bounds[:-1], axis=1) % 2) == 1
        for i, k in zip(*np.nonzero(inside)):
            if geo.point_on_boundary(points[i], self.obstacles[k].vertices):
                inside[i, k] = False
        return inside


def obstacle_forces(users: list, obstacles, params: ForceParams) -> np.ndarray:
    """Summed obstacle repulsion for every user (rows follow ``users``).

    ``obstacles`` may be a list of polygons or a prebuilt ObstacleField.
    """
    n = len(users)
    out = np.zeros((n, 2))
    if n == 0 or not len(obstacles):
        return out
    field_ = obstacles if isinstance(obstacles, ObstacleField) else ObstacleField(obstacles)
    pos = np.array([u.position for u in users])
    inside = field_.inside(pos)
    if inside.any():
        i, k = (int(v[0]) for v in np.nonzero(inside))
        raise SimulationError(f"{users[i].id} is inside obstacle {field_.obstacles[k].id!r}")
    dist, nearest = geo.points_to_edges_distance(pos, field_.a, field_.b)
    rows = np.arange(n)
    for k, ob in enumerate(field_.obstacles):
        lo, hi = field_.bounds[k], field_.bounds[k + 1]
        j = lo + np.argmin(dist[:, lo:hi], axis=1)
        d = dist[rows, j]
        diff = pos - nearest[rows, j]
        norm = np.hypot(diff[:, 0], diff[:, 1])
        mag = params.U0 * np.exp(-d / params.R)
        ok = norm > geo.EPS
        out[ok] += (mag[ok] / norm[ok])[:, None] * diff[ok]
        for i in np.nonzero(~ok)[0]:
            out[i] += obstacle_repulsion(users[i], ob, params)
    return out


def user_forces(users: list, params: ForceParams, classical_pairs=()) -> np.ndarray:
    """Summed user-user repulsion on every user, each read from the same snapshot."""
    n = len(users)
    if n < 2:
        return np.zeros((n, 2))
    idx = {u.id: i for i, u in enumerate(users)}
    pos = np.array([u.position for u in users])
    rad = np.array([u.radius for u in users])
    is_car = np.array([u.is_car for u in users])
    has_head = np.array([u.heading is not None for u in users])
    head = np.array([u.heading if u.heading is not None else (1.0, 0.0) for u in users])
    half = np.radians([u.fov_half_angle for u in users])

    r = pos[None, :, :] - pos[:, None, :]  # alpha -> beta
    dist = np.hypot(r[..., 0], r[..., 1])
    coincident = dist < geo.EPS
    cr = head[:, None, 0] * r[..., 1] - head[:, None, 1] * r[..., 0]
    dot = np.einsum("ik,ijk->ij", head, r)
    in_fov = (np.arctan2(np.abs(cr), dot) <= half[:, None]) | coincident | ~has_head[:, None]

    active = in_fov & ~np.eye(n, dtype=bool)
    active &= ~(is_car[:, None] & ~is_car[None, :])
    for a, b in classical_pairs:
        if a in idx and b in idx:
            i, j = idx[a], idx[b]
            active[i, j] = in_fov[i, j]
    for i, u in enumerate(users):
        if u.mode.name in ("following", "courtesy"):
            for t in u.mode.targets:
                if t in idx:
                    active[i, idx[t]] = False

    strength = np.where(is_car, params.car_V0, params.V0)
    rng = np.where(is_car, params.car_sigma, params.sigma)
    gap = np.maximum(0.0, dist - rad[:, None] - rad[None, :])
    mag = strength[:, None] * np.exp(-gap / rng[:, None]) * active
    with np.errstate(divide="ignore", invalid="ignore"):
        nx = np.where(coincident, 1.0, -r[..., 0] / dist)
        ny = np.where(coincident, 0.0, -r[..., 1] / dist)
    return np.column_stack([np.sum(mag * nx, axis=1), np.sum(mag * ny, axis=1)])


def directive_acceleration(user: RoadUser, users: dict, params: ForceParams, dt: float):
    """Acceleration implied by the user's mode, and whether repulsions still apply.

    Braking directives set the speed directly for the step, so they return an
    acceleration that reaches the target speed exactly and switch repulsions off.
    """
    mode = user.mode
    heading = user.heading if user.heading is not None else user.goal_direction()

    def brake(target: float):
        return heading * (target - user.speed) / dt, False

    def drive(speed: float, point=None):
        if point is None:
            return _drive(user, speed, None), True
        return _drive(user, speed, point - user.position), True

    if mode.name in ("stopping", "courtesy"):
        return brake(courtesy_or_stopping_brake(user, params))
    if mode.name == "following":
        leader = users.get(mode.targets[0])
        if leader is None:
            return drive(user.desired_speed)
        out = car_following_force(user, leader, params)
        if out.target_speed is not None:
            return brake(0.0 if out.target_speed < params.stop_epsilon else out.target_speed)
        speed = min(user.desired_speed, max(leader.speed, params.stop_epsilon))
        return drive(speed, out.steer_point)
    if mode.name == "game_bound":
        counterpart = None
        present = [users[t] for t in mode.targets if t in users]
        if present:
            counterpart = min(present, key=lambda c: (math.dist(c.position, user.position), c.id))
        if mode.action is Action.DEVIATE and counterpart is None:
            return drive(user.desired_speed)
        d = execute_action(user, mode.action, counterpart, params, committed_speed=mode.speed)
        if d.brake_to is not None:
            return brake(d.brake_to)
        return drive(d.desired_speed, d.steer_point)
    return drive(user.desired_speed)


def _drive(user: RoadUser, speed: float, direction) -> np.ndarray:
    e = user.goal_direction() if direction is None else geo.unit(direction)
    return (speed * e - user.velocity) / user.relaxation_time


def origin_blocked(spec: UserSpec, users, margin: float) -> bool:
    """Another user stands within ``margin`` (surface gap) of the entry point."""
    radius = spec.radius if spec.radius is not None else DEFAULT_RADIUS[spec.kind]
    return any(math.dist(spec.origin, u.position) < radius + u.radius + margin for u in users)


def touching_pairs(users: list) -> list[tuple[str, str, float]]:
    """Pairs (in list order) whose centres are closer than the sum of their radii."""
    if len(users) < 2:
        return []
    pos = np.array([u.position for u in users])
    rad = np.array([u.radius for u in users])
    r = pos[None, :, :] - pos[:, None, :]
    dist = np.hypot(r[..., 0], r[..., 1])
    hit = np.triu(dist < rad[:, None] + rad[None, :], k=1)
    return [(users[i].id, users[j].id, float(dist[i, j])) for i, j in zip(*np.nonzero(hit))]


def run(scenario: ScenarioSpec, seed: int | None = None, dt: float | None = None) -> SimulationLog:
    seed = scenario.seed if seed is None else int(seed)
    dt = scenario.dt if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    params = scenario.forces
    config = MediatorConfig(forces=params, payoffs=scenario.payoffs, game_layer=scenario.game_layer)
    obstacles = list(scenario.obstacles)
    graph = build_visibility_graph(obstacles)
    field_ = ObstacleField(obstacles)
    give_way = _initial_give_way(scenario, seed)
    log = SimulationLog(scenario.name, seed, dt, give_way_initial=dict(give_way))

    pending = sorted(scenario.users, key=lambda u: (u.entry_time, u.id))
    active: dict[str, RoadUser] = {}
    builders: dict[str, TrajectoryBuilder] = {}
    colliding: set = set()
    steps = int(math.ceil(scenario.duration / dt - 1e-9))

    k = 0
    t = 0.0
    while True:
        t = k * dt
        present = list(active.values())
        for spec in [p for p in pending if p.entry_time <= t + 1e-9]:
            if origin_blocked(spec, present, scenario.clearance[spec.kind]):
                continue  # held back until the entry point clears
            pending.remove(spec)
            u = spawn_user(spec, graph, obstacles, scenario.clearance[spec.kind], give_way[spec.id])
            active[u.id] = u
            builders[u.id] = TrajectoryBuilder(u.id, u.kind.value)
            log.planned_paths[u.id] = u.path.waypoints.tolist()
            log.entries[u.id] = round(t, 9)
        ids = sorted(active)
        for uid in ids:
            u = active[uid]
            builders[uid].add(round(t, 9), u.position, u.speed, u.mode.label())
        if k >= steps or (not pending and not active):
            break

        users = [active[uid] for uid in ids]
        intended = [prediction_velocity(u, params.stop_epsilon) for u in users]
        conflicts = detect_conflicts(users, params.horizon, params.conflict_distance, intended=intended)
        report, decisions = run_cycle(active, conflicts, config, k)
        for uid in ids:
            dispatch_decision(active[uid], decisions[uid])
        record = report.as_dict()
        record["t"] = round(t, 9)
        record["modes"] = {uid: active[uid].mode.label() for uid in ids}
        log.cycles.append(record)

        f_users = user_forces(users, params, report.classical_pairs)
        f_obst = obstacle_forces(users, field_, params)
        new_states = {}
        for i, u in enumerate(users):
            acc, repel = directive_acceleration(u, active, params, dt)
            if repel:
                acc = acc + f_users[i] + f_obst[i]
            new_states[u.id] = integrate_step(u, acc, dt, params)
        active.update(new_states)

        t_next = (k + 1) * dt
        now = set()
        for a, b, d in touching_pairs([active[uid] for uid in ids]):
            now.add((a, b))
            if (a, b) not in colliding:
                log.collisions.append({"t": round(t_next, 9), "first": a, "second": b, "distance": d})
        colliding = now

        for uid in ids:
            u = active[uid]
            if math.dist(u.position, u.destination) <= scenario.arrival_radius:
                builders[uid].add(round(t_next, 9), u.position, u.speed, u.mode.label())
                log.arrivals[uid] = round(t_next, 9)
                del active[uid]
        k += 1

    log.end_time = round(t, 9)
    log.trajectories = {uid: b.build() for uid, b in builders.items()}
    return log


def replay_check(scenario: ScenarioSpec, seed: int | None = None) -> bool:
    """True iff two runs with identical inputs produce identical logs."""
    return run(scenario, seed).serialize() == run(scenario, seed).serialize()


def set_document_value(doc: dict, path: str, value) -> dict:
    """Set ``a.b.0.c`` style ``path`` in a nested scenario document (in place)."""
    keys = path.split(".")
    node = doc
    for key in keys[:-1]:
        if isinstance(node, list):
            node = node[int(key)]
        else:
            node = node.setdefault(key, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return doc


def run_summary(log: SimulationLog, scenario: ScenarioSpec) -> dict:
    kinds = {u.id: u.kind for u in scenario.users}
    speeds = {"pedestrian": [], "car": []}
    for uid, tr in log.trajectories.items():
        speeds[kinds[uid]].extend(tr.speed.tolist())
    return {
        "arrived": len(log.arrivals), "users": len(scenario.users), "collisions": len(log.collisions),
        "games": sum(1 for _ in log.games()), "end_time": log.end_time,
        "mean_speed_pedestrian": float(np.mean(speeds["pedestrian"])) if speeds["pedestrian"] else float("nan"),
        "mean_speed_car": float(np.mean(speeds["car"])) if speeds["car"] else float("nan"),
    }


def _sweep_job(args):
    text, path, value, seed, out = args
    doc = yaml.safe_load(text)
    set_document_value(doc, path, value)
    scenario = parse_scenario(yaml.safe_dump(doc, sort_keys=False), source=f"{path}={value}")
    log = run(scenario, seed)
    if out is not None:
        log.write(Path(out) / f"{path}={value}")
    return {"param": path, "value": value, **run_summary(log, scenario)}


def sweep(scenario_path, param: str, values, seed: int | None = None, out=None,
          workers: int | None = None) -> list[dict]:
    """Run one scenario per parameter value; runs share nothing and execute in parallel."""
    path = Path(scenario_path)
    if not path.exists():
        path = bundled_scenario_path(str(scenario_path)) or path
    text = path.read_text()
    jobs = [(text, param, v, seed, out) for v in values]
    if workers == 1 or len(jobs) <= 1:
        return [_sweep_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_job, jobs))

