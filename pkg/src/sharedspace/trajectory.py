"""Time-indexed motion records and their delimiter-separated file format."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

COLUMNS = ("user_id", "kind", "t", "x", "y", "speed", "mode")


@dataclass
class Trajectory:
    user_id: str
    kind: str
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    speed: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        self.speed = np.asarray(self.speed, dtype=float).reshape(-1)
        if not self.mode:
            self.mode = ["" for _ in range(len(self.t))]
        if not (len(self.t) == len(self.xy) == len(self.speed) == len(self.mode)):
            raise ValueError(f"{self.user_id}: sample arrays differ in length")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError(f"{self.user_id}: timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    def translated(self, offset) -> "Trajectory":
        return Trajectory(self.user_id, self.kind, self.t.copy(), self.xy + np.asarray(offset, float),
                          self.speed.copy(), list(self.mode))

    def shifted(self, dt: float) -> "Trajectory":
        return Trajectory(self.user_id, self.kind, self.t + dt, self.xy.copy(), self.speed.copy(),
                          list(self.mode))


class TrajectoryBuilder:
    """Append-only sample buffer; ``build`` freezes it into a Trajectory."""

    def __init__(self, user_id: str, kind: str):
        self.user_id = user_id
        self.kind = kind
        self._t, self._x, self._y, self._s, self._m = [], [], [], [], []

    def add(self, t: float, position, speed: float, mode: str) -> None:
        self._t.append(float(t))
        self._x.append(float(position[0]))
        self._y.append(float(position[1]))
        self._s.append(float(speed))
        self._m.append(mode)

    def build(self) -> Trajectory:
        return Trajectory(self.user_id, self.kind, np.array(self._t),
                          np.column_stack([self._x, self._y]) if self._t else np.zeros((0, 2)),
                          np.array(self._s), list(self._m))


def _g(v: float) -> str:
    return f"{v:.6g}"


def write_trajectories(path, trajectories) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for tr in trajectories:
            for k in range(len(tr)):
                w.writerow([tr.user_id, tr.kind, _g(tr.t[k]), _g(tr.xy[k, 0]), _g(tr.xy[k, 1]),
                            _g(tr.speed[k]), tr.mode[k]])
    return path


def read_trajectories(path) -> dict[str, Trajectory]:
    rows: dict[str, list] = {}
    kinds: dict[str, str] = {}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS[:6]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            uid = row["user_id"]
            kinds[uid] = row["kind"]
            rows.setdefault(uid, []).append(
                (float(row["t"]), float(row["x"]), float(row["y"]), float(row["speed"]), row.get("mode") or "")
            )
    out = {}
    for uid, rs in rows.items():
        rs.sort(key=lambda r: r[0])
        a = np.array([r[:4] for r in rs], dtype=float)
        out[uid] = Trajectory(uid, kinds[uid], a[:, 0], a[:, 1:3], a[:, 3], [r[4] for r in rs])
    return out
