"""Scenario documents: YAML with ``meta``, ``obstacles``, ``users``, ``forces``, ``payoffs``.

Validation collects every problem it finds and reports each with the line it
came from.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import Action, ForceParams, Kind
from .environment import InvalidPolygon, ObstaclePolygon, validate_obstacles
from .game import DEFAULT_BASE_MATRIX, PayoffConfig

DEFAULT_RADIUS = {"pedestrian": 0.3, "car": 1.0}
DEFAULT_CLEARANCE = {"pedestrian": 0.5, "car": 1.0}

META_KEYS = {"name", "dt", "duration", "seed", "game_layer", "clearance", "arrival_radius",
             "description"}
USER_KEYS = {"id", "kind", "origin", "destination", "entry_time", "desired_speed", "max_speed",
             "group_id", "radius", "initial_speed", "give_way_count", "relaxation_time",
             "fov_half_angle"}
PAYOFF_KEYS = {"N", "M", "s_normal", "give_way_range", "factor_weights", "base_matrix"}


class ScenarioError(ValueError):
    def __init__(self, problems: list[str], source: str = "<scenario>"):
        self.problems = list(problems)
        self.source = source
        super().__init__(f"{source}: {len(problems)} problem(s)\n" + "\n".join(f"  {p}" for p in problems))


@dataclass(frozen=True)
class UserSpec:
    id: str
    kind: str
    origin: tuple[float, float]
    destination: tuple[float, float]
    entry_time: float = 0.0
    desired_speed: float = 1.3
    max_speed: float = 1.8
    group_id: str | None = None
    radius: float | None = None
    initial_speed: float = 0.0
    give_way_count: int | None = None
    relaxation_time: float = 0.5
    fov_half_angle: float = 90.0


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    users: tuple[UserSpec, ...] = ()
    obstacles: tuple[ObstaclePolygon, ...] = ()
    dt: float = 0.1
    duration: float = 60.0
    seed: int = 0
    forces: ForceParams = field(default_factory=ForceParams)
    payoffs: PayoffConfig = field(default_factory=PayoffConfig)
    game_layer: bool = True
    clearance: dict = field(default_factory=lambda: dict(DEFAULT_CLEARANCE))
    arrival_radius: float = 0.5

    def with_(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)


def _line_index(node, path=(), out=None) -> dict:
    """Map each key path in a composed YAML tree to its 1-based line."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_index(v, path + (key,), out)
            out[path + (key,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_index(v, path + (i,), out)
    return out


class _Problems:
    def __init__(self, lines: dict):
        self.lines = lines
        self.items: list[str] = []

    def add(self, path: tuple, msg: str) -> None:
        p = path
        while p and p not in self.lines:
            p = p[:-1]
        line = self.lines.get(p)
        where = ".".join(f"[{x}]" if isinstance(x, int) else str(x) for x in path).replace(".[", "[")
        prefix = f"line {line}: " if line is not None else ""
        self.items.append(f"{prefix}{where or '<root>'}: {msg}")


def _point(v):
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)):
        raise ValueError("expected [x, y]")
    return (float(v[0]), float(v[1]))


def _num(v, name, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"{name} must be a number")
    v = float(v)
    if positive and not v > 0:
        raise ValueError(f"{name} must be > 0")
    if nonneg and v < 0:
        raise ValueError(f"{name} must be >= 0")
    return v


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioSpec:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f"line {mark.line + 1}: " if mark else ""
        raise ScenarioError([f"{line}{exc}"], source) from None
    if not isinstance(doc, dict):
        raise ScenarioError(["document must be a mapping with sections meta, obstacles, users, forces, payoffs"], source)
    lines = _line_index(node)
    bad = _Problems(lines)
    for key in doc:
        if key not in ("meta", "obstacles", "users", "forces", "payoffs"):
            bad.add((key,), "unknown section")

    meta = doc.get("meta") or {}
    kw: dict = {}
    if not isinstance(meta, dict):
        bad.add(("meta",), "must be a mapping")
        meta = {}
    for key in meta:
        if key not in META_KEYS:
            bad.add(("meta", key), "unknown key")
    if "name" not in meta:
        bad.add(("meta",), "missing name")
    kw["name"] = str(meta.get("name", Path(source).stem))
    for key, cond in (("dt", "positive"), ("duration", "positive"), ("arrival_radius", "positive")):
        if key in meta:
            try:
                kw[key] = _num(meta[key], key, positive=True)
            except ValueError as e:
                bad.add(("meta", key), str(e))
    if "seed" in meta:
        if isinstance(meta["seed"], bool) or not isinstance(meta["seed"], int):
            bad.add(("meta", "seed"), "seed must be an integer")
        else:
            kw["seed"] = meta["seed"]
    if "game_layer" in meta:
        if not isinstance(meta["game_layer"], bool):
            bad.add(("meta", "game_layer"), "must be true or false")
        else:
            kw["game_layer"] = meta["game_layer"]
    if "clearance" in meta:
        cl = dict(DEFAULT_CLEARANCE)
        if not isinstance(meta["clearance"], dict):
            bad.add(("meta", "clearance"), "must map kind to metres")
        else:
            for k, v in meta["clearance"].items():
                try:
                    cl[Kind(k).value] = _num(v, "clearance", nonneg=True)
                except ValueError as e:
                    bad.add(("meta", "clearance", k), str(e))
        kw["clearance"] = cl

    obstacles = []
    raw_obs = doc.get("obstacles") or []
    if not isinstance(raw_obs, list):
        bad.add(("obstacles",), "must be a list")
        raw_obs = []
    for i, o in enumerate(raw_obs):
        if not isinstance(o, dict) or "vertices" not in o:
            bad.add(("obstacles", i), "needs id and vertices")
            continue
        oid = str(o.get("id", f"obstacle{i}"))
        try:
            verts = [_point(v) for v in o["vertices"]]
            obstacles.append(ObstaclePolygon(oid, verts))
        except InvalidPolygon as e:
            bad.add(("obstacles", i, "vertices"), str(e))
        except (ValueError, TypeError) as e:
            bad.add(("obstacles", i, "vertices"), f"obstacle {oid!r}: {e}")
    try:
        validate_obstacles(obstacles)
    except InvalidPolygon as e:
        idx = next(i for i, o in enumerate(obstacles) if o.id == e.obstacle_id)
        bad.add(("obstacles", idx), str(e))

    users = []
    raw_users = doc.get("users") or []
    if not isinstance(raw_users, list):
        bad.add(("users",), "must be a list")
        raw_users = []
    seen = set()
    for i, u in enumerate(raw_users):
        path = ("users", i)
        if not isinstance(u, dict):
            bad.add(path, "must be a mapping")
            continue
        for key in u:
            if key not in USER_KEYS:
                bad.add(path + (key,), "unknown key")
        for req in ("id", "kind", "origin", "destination"):
            if req not in u:
                bad.add(path, f"missing {req}")
        if any(req not in u for req in ("id", "kind", "origin", "destination")):
            continue
        uid = str(u["id"])
        if uid in seen:
            bad.add(path + ("id",), f"duplicate id {uid!r}")
        seen.add(uid)
        fields: dict = {"id": uid}
        try:
            fields["kind"] = Kind(u["kind"]).value
        except ValueError:
            bad.add(path + ("kind",), f"kind must be pedestrian or car, got {u['kind']!r}")
            continue
        ok = True
        for key in ("origin", "destination"):
            try:
                fields[key] = _point(u[key])
            except ValueError as e:
                bad.add(path + (key,), str(e))
                ok = False
                continue
            for o in obstacles:
                if o.contains(fields[key]):
                    bad.add(path + (key,), f"lies inside obstacle {o.id!r}")
                    ok = False
        specs = {
            "entry_time": dict(nonneg=True), "desired_speed": dict(positive=True),
            "max_speed": dict(positive=True), "radius": dict(positive=True),
            "initial_speed": dict(nonneg=True), "relaxation_time": dict(positive=True),
            "fov_half_angle": dict(positive=True),
        }
        for key, opts in specs.items():
            if key in u:
                try:
                    fields[key] = _num(u[key], key, **opts)
                except ValueError as e:
                    bad.add(path + (key,), str(e))
                    ok = False
        if fields["kind"] == "car" and "desired_speed" not in u:
            fields["desired_speed"] = 5.0
        if fields["kind"] == "car" and "max_speed" not in u:
            fields["max_speed"] = 8.0
        ds = fields.get("desired_speed", 1.3)
        ms = fields.get("max_speed", 1.8)
        if ds > ms:
            bad.add(path + ("desired_speed",), f"desired_speed {ds} exceeds max_speed {ms}")
            ok = False
        if fields.get("initial_speed", 0.0) > ms:
            bad.add(path + ("initial_speed",), "initial_speed exceeds max_speed")
            ok = False
        if "group_id" in u and u["group_id"] is not None:
            fields["group_id"] = str(u["group_id"])
        if "give_way_count" in u:
            g = u["give_way_count"]
            if isinstance(g, bool) or not isinstance(g, int) or g < 0:
                bad.add(path + ("give_way_count",), "give_way_count must be an integer >= 0")
                ok = False
            else:
                fields["give_way_count"] = g
        if ok:
            users.append(UserSpec(**fields))
    if not raw_users and "users" not in doc:
        bad.add((), "missing users section")

    forces = doc.get("forces") or {}
    if not isinstance(forces, dict):
        bad.add(("forces",), "must be a mapping")
        forces = {}
    known = {f.name for f in dataclasses.fields(ForceParams)}
    fkw = {}
    for k, v in forces.items():
        if k not in known:
            bad.add(("forces", k), "unknown parameter")
        elif k == "courtesy_toward":
            fkw[k] = tuple(v) if isinstance(v, list) else (v,)
        else:
            try:
                fkw[k] = _num(v, k)
            except ValueError as e:
                bad.add(("forces", k), str(e))
    try:
        kw["forces"] = ForceParams(**fkw)
    except ValueError as e:
        bad.add(("forces",), str(e))

    payoffs = doc.get("payoffs") or {}
    if not isinstance(payoffs, dict):
        bad.add(("payoffs",), "must be a mapping")
        payoffs = {}
    pkw: dict = {}
    for k, v in payoffs.items():
        if k not in PAYOFF_KEYS:
            bad.add(("payoffs", k), "unknown parameter")
        elif k == "factor_weights":
            fw = PayoffConfig().factor_weights
            if not isinstance(v, dict):
                bad.add(("payoffs", k), "must map F1..F12 to [if_true, if_false]")
                continue
            for name, pair in v.items():
                if name not in fw:
                    bad.add(("payoffs", k, name), "unknown factor impact")
                elif not (isinstance(pair, list) and len(pair) == 2):
                    bad.add(("payoffs", k, name), "expected [if_true, if_false]")
                else:
                    fw[name] = tuple(pair)
            pkw[k] = fw
        elif k == "base_matrix":
            bm = dict(DEFAULT_BASE_MATRIX)
            try:
                for row, cols in v.items():
                    for col, pair in cols.items():
                        key = (Action(row), Action(col))
                        if key not in bm:
                            bad.add(("payoffs", k, row, col), "not a (pedestrian, car) action pair")
                        else:
                            bm[key] = tuple(pair)
            except (AttributeError, ValueError) as e:
                bad.add(("payoffs", k), f"expected pedestrian action -> car action -> [u_ped, u_car]: {e}")
            pkw[k] = bm
        elif k == "give_way_range":
            pkw[k] = tuple(v)
        else:
            pkw[k] = v
    try:
        kw["payoffs"] = PayoffConfig(**pkw)
    except (ValueError, TypeError) as e:
        bad.add(("payoffs",), str(e))

    if bad.items:
        raise ScenarioError(bad.items, source)
    return ScenarioSpec(users=tuple(users), obstacles=tuple(obstacles), **kw)


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    if not path.exists():
        bundled = bundled_scenario_path(str(path))
        if bundled is None:
            raise FileNotFoundError(f"no scenario file {str(path)!r}; bundled: {', '.join(bundled_scenarios())}")
        path = bundled
    return parse_scenario(path.read_text(), source=str(path))


def bundled_scenarios() -> list[str]:
    root = resources.files("sharedspace") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def bundled_scenario_path(name: str) -> Path | None:
    root = resources.files("sharedspace") / "scenarios"
    stem = name[:-5] if name.endswith(".yaml") else name
    p = root / f"{stem}.yaml"
    return Path(str(p)) if p.is_file() else None


def default_config_document() -> dict:
    """Effective defaults of every configurable table, as a plain document."""
    fp = dataclasses.asdict(ForceParams())
    fp["courtesy_toward"] = list(fp["courtesy_toward"])
    return {
        "meta": {"dt": 0.1, "duration": 60.0, "seed": 0, "game_layer": True,
                 "clearance": dict(DEFAULT_CLEARANCE), "arrival_radius": 0.5},
        "forces": fp,
        "payoffs": _payoff_document(PayoffConfig()),
        "users_defaults": {"radius": dict(DEFAULT_RADIUS), "relaxation_time": 0.5,
                           "fov_half_angle": 90.0},
    }


def _payoff_document(pc: PayoffConfig) -> dict:
    base: dict = {}
    for (row, col), (up, uc) in pc.base_matrix.items():
        base.setdefault(row.value, {})[col.value] = [up, uc]
    return {
        "N": pc.N, "M": pc.M, "s_normal": dict(pc.s_normal),
        "give_way_range": list(pc.give_way_range),
        "factor_weights": {k: list(v) for k, v in pc.factor_weights.items()},
        "base_matrix": base,
    }


def scenario_document(spec: ScenarioSpec) -> dict:
    """Plain document that parses back to ``spec``; defaulted fields are left out."""
    meta = {"name": spec.name, "dt": spec.dt, "duration": spec.duration, "seed": spec.seed}
    if not spec.game_layer:
        meta["game_layer"] = False
    if spec.clearance != DEFAULT_CLEARANCE:
        meta["clearance"] = dict(spec.clearance)
    if spec.arrival_radius != 0.5:
        meta["arrival_radius"] = spec.arrival_radius
    doc: dict = {
        "meta": meta,
        "obstacles": [{"id": o.id, "vertices": o.vertices.tolist()} for o in spec.obstacles],
        "users": [],
    }
    for u in spec.users:
        defaults = UserSpec(u.id, u.kind, u.origin, u.destination)
        entry = {"id": u.id, "kind": u.kind, "origin": list(u.origin), "destination": list(u.destination)}
        for f in dataclasses.fields(UserSpec):
            v = getattr(u, f.name)
            if f.name in entry or v is None:
                continue
            if f.name in ("desired_speed", "max_speed") or v != getattr(defaults, f.name):
                entry[f.name] = v
        doc["users"].append(entry)
    if spec.forces != ForceParams():
        fp = dataclasses.asdict(spec.forces)
        fp["courtesy_toward"] = list(fp["courtesy_toward"])
        doc["forces"] = fp
    if spec.payoffs != PayoffConfig():
        doc["payoffs"] = _payoff_document(spec.payoffs)
    return doc


def dump_scenario(spec: ScenarioSpec) -> str:
    return yaml.safe_dump(scenario_document(spec), sort_keys=False, default_flow_style=None)


def dump_config() -> str:
    return yaml.safe_dump(default_config_document(), sort_keys=False)


def synthetic_scenario(n_users: int = 50, duration: float = 120.0, seed: int = 0,
                       car_share: float = 0.2, n_obstacles: int = 4, width: float = 60.0,
                       depth: float = 40.0, car_headway: float = 8.0,
                       cross_share: float = 0.7,
                       name: str = "synthetic") -> ScenarioSpec:
    """Seeded random street: two opposing car lanes through a plaza with planters.

    A ``cross_share`` of pedestrians cross the lanes from one long edge to the
    other; the rest walk lengthwise on either side, clear of the lanes. Entries
    spread over the first half of the run.
    """
    rng = np.random.default_rng(seed)
    hw, hd = width / 2, depth / 2
    obstacles = []
    slots = [(x, y) for x in np.linspace(-hw + 10, hw - 10, 4) for y in (-hd + 8, hd - 8)]
    for k in rng.choice(len(slots), size=min(n_obstacles, len(slots)), replace=False):
        cx, cy = slots[k]
        sx, sy = rng.uniform(1.5, 3.0, size=2)
        obstacles.append(ObstaclePolygon(f"O{len(obstacles) + 1}", [
            (cx - sx, cy - sy), (cx + sx, cy - sy), (cx + sx, cy + sy), (cx - sx, cy + sy)]))

    n_cars = int(round(car_share * n_users))
    entries = np.round(rng.uniform(0.0, duration / 2, size=n_users), 1)
    for lane in (0, 1):
        # cars sharing a lane enter with some headway so none spawns onto another
        idx = [i for i in range(n_cars) if i % 2 == lane]
        last = -np.inf
        for i in sorted(idx, key=lambda i: entries[i]):
            entries[i] = max(entries[i], last + car_headway)
            last = entries[i]
    users = []
    for i in range(n_users):
        entry = float(entries[i])
        if i < n_cars:
            lane = 3.0 if i % 2 else -3.0
            xs = (-hw - 10, hw + 10) if lane < 0 else (hw + 10, -hw - 10)
            v = round(float(rng.uniform(3.0, 5.0)), 2)
            users.append(UserSpec(f"Car{i + 1}", "car", (xs[0], lane), (xs[1], lane), entry,
                                  v, 8.0, initial_speed=v))
        else:
            v = round(float(rng.uniform(1.0, 1.5)), 2)
            if rng.random() < cross_share:
                ends = [(float(rng.uniform(-hw, hw)), -hd), (float(rng.uniform(-hw, hw)), hd)]
            else:
                side = 1.0 if rng.random() < 0.5 else -1.0
                ends = [(-hw, side * float(rng.uniform(8.0, hd))), (hw, side * float(rng.uniform(8.0, hd)))]
            if rng.random() < 0.5:
                ends.reverse()
            users.append(UserSpec(f"Ped{i + 1}", "pedestrian", ends[0], ends[1],
                                  entry, v, v + 0.5, initial_speed=v))
    return ScenarioSpec(name=name, users=tuple(users), obstacles=tuple(obstacles),
                        duration=duration, seed=seed)
