"""Comparison of simulated against reference trajectories, metric tables and plots."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .trajectory import Trajectory, read_trajectories

log = logging.getLogger(__name__)

KINDS = ("car", "pedestrian")
SOURCES = ("real", "simulated")
PAD_STEPS = 5  # the simulation starts this many steps before the reference and ends as many after
STD_FORM = "population"


class EmptyOverlap(ValueError):
    """The two trajectories share no time support."""


class ReportError(OSError):
    """The report destination cannot be written."""


def simulation_window(ref: Trajectory, dt: float, pad_steps: int = PAD_STEPS) -> tuple[float, float]:
    """Time span to simulate for a reference: its support padded by ``pad_steps`` steps each side."""
    if len(ref) == 0:
        raise EmptyOverlap(f"{ref.user_id}: reference has no samples")
    return float(ref.t[0] - pad_steps * dt), float(ref.t[-1] + pad_steps * dt)


def resample(tr: Trajectory, times) -> Trajectory:
    """Linear interpolation of position and speed at ``times`` (inside the support).

    Modes take the value of the latest sample at or before each time.
    """
    times = np.asarray(times, dtype=float).reshape(-1)
    if len(tr) == 0:
        raise EmptyOverlap(f"{tr.user_id}: no samples to resample")
    if len(times) and (times[0] < tr.t[0] - 1e-9 or times[-1] > tr.t[-1] + 1e-9):
        raise ValueError(f"{tr.user_id}: resample times leave the support [{tr.t[0]}, {tr.t[-1]}]")
    x = np.interp(times, tr.t, tr.xy[:, 0])
    y = np.interp(times, tr.t, tr.xy[:, 1])
    s = np.interp(times, tr.t, tr.speed)
    idx = np.clip(np.searchsorted(tr.t, times + 1e-9, side="right") - 1, 0, len(tr) - 1)
    return Trajectory(tr.user_id, tr.kind, times, np.column_stack([x, y]), s, [tr.mode[i] for i in idx])


def comparison_times(sim: Trajectory, ref: Trajectory, interval: float | None = None) -> np.ndarray:
    """Timestamps at which the pair is compared.

    Without ``interval`` these are the samples of either trajectory inside the
    intersection of both supports, so identically sampled runs pair sample by
    sample. With ``interval`` a regular grid starting at the window start.
    """
    if len(sim) == 0 or len(ref) == 0:
        raise EmptyOverlap(f"{sim.user_id}: a trajectory has no samples")
    lo = max(sim.t[0], ref.t[0])
    hi = min(sim.t[-1], ref.t[-1])
    if hi < lo - 1e-9:
        raise EmptyOverlap(
            f"{sim.user_id}: supports [{sim.t[0]:g}, {sim.t[-1]:g}] and [{ref.t[0]:g}, {ref.t[-1]:g}] do not overlap")
    hi = max(hi, lo)
    if interval is not None:
        if interval <= 0:
            raise ValueError("interval must be positive")
        n = int(math.floor((hi - lo) / interval + 1e-9))
        return lo + interval * np.arange(n + 1)
    both = np.concatenate([sim.t, ref.t])
    both = both[(both >= lo - 1e-9) & (both <= hi + 1e-9)]
    both = np.unique(np.round(np.clip(both, lo, hi), 9))
    return both


def align(sim: Trajectory, ref: Trajectory, interval: float | None = None) -> tuple[Trajectory, Trajectory]:
    times = comparison_times(sim, ref, interval)
    return resample(sim, times), resample(ref, times)


def trajectory_distance(sim: Trajectory, ref: Trajectory, interval: float | None = None) -> float:
    """Mean Euclidean distance between positions at equal timestamps."""
    a, b = align(sim, ref, interval)
    d = a.xy - b.xy
    return float(np.mean(np.hypot(d[:, 0], d[:, 1])))


def speed_difference(sim: Trajectory, ref: Trajectory, interval: float | None = None) -> float:
    """Mean absolute speed difference at equal timestamps."""
    a, b = align(sim, ref, interval)
    return float(np.mean(np.abs(a.speed - b.speed)))


def _population(samples: np.ndarray) -> tuple[float, float]:
    return float(np.mean(samples)), float(np.std(samples))


def aggregate_stats(trajectories, kind: str | None = None, per_scenario: bool = True) -> tuple[float, float]:
    """Mean and population standard deviation of speed.

    ``trajectories`` is either an iterable of Trajectory (one scenario) or a
    mapping from scenario name to such an iterable. With ``per_scenario`` each
    user contributes the mean and deviation of its own samples, users of one
    scenario are averaged first and scenarios are then averaged. Otherwise all
    samples of all users are pooled.
    """
    groups = trajectories.values() if isinstance(trajectories, dict) else [trajectories]
    groups = [[tr for tr in g if (kind is None or tr.kind == kind) and len(tr)] for g in groups]
    groups = [g for g in groups if g]
    if not groups:
        raise ValueError(f"no speed samples for kind {kind!r}")
    if not per_scenario:
        return _population(np.concatenate([tr.speed for g in groups for tr in g]))
    per_group = []
    for g in groups:
        stats = np.array([_population(tr.speed) for tr in g])
        per_group.append(stats.mean(axis=0))
    mean, std = np.mean(per_group, axis=0)
    return float(mean), float(std)


@dataclass
class UserMetrics:
    user_id: str
    kind: str
    trajectory_distance: float
    speed_difference: float


@dataclass
class ScenarioMetrics:
    scenario: str
    users: list = field(default_factory=list)  # UserMetrics
    unmatched: list = field(default_factory=list)  # user ids present on one side only

    def _avg(self, kind: str, attr: str) -> float:
        vals = [getattr(u, attr) for u in self.users if u.kind == kind]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def avg_trajectory_distance_car(self) -> float:
        return self._avg("car", "trajectory_distance")

    @property
    def avg_trajectory_distance_ped(self) -> float:
        return self._avg("pedestrian", "trajectory_distance")

    @property
    def avg_speed_diff_car(self) -> float:
        return self._avg("car", "speed_difference")

    @property
    def avg_speed_diff_ped(self) -> float:
        return self._avg("pedestrian", "speed_difference")

    def row(self) -> dict:
        return {
            "scenario": self.scenario,
            "avg_trajectory_distance_car": self.avg_trajectory_distance_car,
            "avg_trajectory_distance_ped": self.avg_trajectory_distance_ped,
            "avg_speed_diff_car": self.avg_speed_diff_car,
            "avg_speed_diff_ped": self.avg_speed_diff_ped,
        }


@dataclass
class MetricsReport:
    scenarios: list = field(default_factory=list)  # ScenarioMetrics
    aggregate: dict = field(default_factory=dict)  # (kind, source) -> (mean, std)
    interval: float | None = None
    per_scenario_stats: bool = True
    # trajectories kept for plotting: scenario -> (sim dict, ref dict)
    traces: dict = field(default_factory=dict, repr=False)

    def scenario(self, name: str) -> ScenarioMetrics:
        return next(s for s in self.scenarios if s.scenario == name)


def compare_scenario(name: str, sim: dict, ref: dict, interval: float | None = None) -> ScenarioMetrics:
    """Metrics for every user present in both trajectory sets."""
    out = ScenarioMetrics(name)
    for uid in sorted(set(sim) | set(ref)):
        if uid not in sim or uid not in ref:
            out.unmatched.append(uid)
            continue
        s, r = sim[uid], ref[uid]
        out.users.append(UserMetrics(uid, r.kind, trajectory_distance(s, r, interval),
                                     speed_difference(s, r, interval)))
    if out.unmatched:
        log.warning("%s: users without a counterpart: %s", name, ", ".join(out.unmatched))
    return out


def build_report(pairs: dict, interval: float | None = None, per_scenario_stats: bool = True,
                 workers: int = 1) -> MetricsReport:
    """``pairs`` maps scenario name to (sim trajectories, ref trajectories), both keyed by user id."""
    names = sorted(pairs)
    job = lambda n: compare_scenario(n, pairs[n][0], pairs[n][1], interval)
    if workers > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scenarios = list(pool.map(job, names))
    else:
        scenarios = [job(n) for n in names]
    report = MetricsReport(scenarios=scenarios, interval=interval, per_scenario_stats=per_scenario_stats,
                           traces={n: pairs[n] for n in names})
    for source, side in (("real", 1), ("simulated", 0)):
        sets = {n: list(pairs[n][side].values()) for n in names}
        for kind in KINDS:
            try:
                report.aggregate[(kind, source)] = aggregate_stats(sets, kind, per_scenario_stats)
            except ValueError:
                continue
    return report


def _scenario_dirs(root: Path) -> dict[str, Path]:
    """A directory holding trajectories.csv is one scenario; otherwise each such subdirectory is."""
    root = Path(root)
    if (root / "trajectories.csv").is_file():
        return {root.name: root / "trajectories.csv"}
    found = {p.parent.name: p for p in sorted(root.glob("*/trajectories.csv"))}
    if not found:
        raise FileNotFoundError(f"{root}: no trajectories.csv found")
    return found


def compare_dirs(sim_dir, ref_dir, interval: float | None = None, per_scenario_stats: bool = True,
                 workers: int = 1) -> MetricsReport:
    sims, refs = _scenario_dirs(sim_dir), _scenario_dirs(ref_dir)
    if len(sims) == 1 and len(refs) == 1:
        # a single run on each side is compared regardless of directory names
        (name, s), (_, r) = next(iter(sims.items())), next(iter(refs.items()))
        pairs = {name: (read_trajectories(s), read_trajectories(r))}
    else:
        common = sorted(set(sims) & set(refs))
        missing = sorted(set(sims) ^ set(refs))
        if missing:
            log.warning("scenarios on one side only: %s", ", ".join(missing))
        pairs = {n: (read_trajectories(sims[n]), read_trajectories(refs[n])) for n in common}
    return build_report(pairs, interval, per_scenario_stats, workers)


def _g(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.6g}"


METRICS_COLUMNS = ("kind", "source", "mean_speed", "std_speed")
SCENARIO_COLUMNS = ("scenario", "avg_trajectory_distance_car", "avg_trajectory_distance_ped",
                    "avg_speed_diff_car", "avg_speed_diff_ped")
USER_COLUMNS = ("scenario", "user_id", "kind", "trajectory_distance", "speed_difference")


def _header(report: MetricsReport) -> str:
    agg = "per-scenario averages" if report.per_scenario_stats else "pooled samples"
    step = "union of sample times" if report.interval is None else f"{report.interval:g} s grid"
    return f"# std: {STD_FORM} (divide by n); aggregation: {agg}; comparison: {step}\n"


def emit_report(report: MetricsReport, out_dir, plots: bool = True) -> list[Path]:
    """Write metrics.csv, per_scenario.csv, per_user.csv and one overlay and one speed plot per scenario."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        p = out / "metrics.csv"
        with p.open("w", newline="") as fh:
            fh.write(_header(report))
            w = csv.writer(fh)
            w.writerow(METRICS_COLUMNS)
            for (kind, source), (mean, std) in sorted(report.aggregate.items()):
                w.writerow([kind, source, _g(mean), _g(std)])
        written.append(p)
        p = out / "per_scenario.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SCENARIO_COLUMNS)
            for s in report.scenarios:
                row = s.row()
                w.writerow([row["scenario"]] + [_g(row[c]) for c in SCENARIO_COLUMNS[1:]])
        written.append(p)
        p = out / "per_user.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(USER_COLUMNS)
            for s in report.scenarios:
                for u in s.users:
                    w.writerow([s.scenario, u.user_id, u.kind, _g(u.trajectory_distance), _g(u.speed_difference)])
        written.append(p)
        if plots:
            for s in report.scenarios:
                if s.scenario in report.traces:
                    written.extend(plot_scenario(s.scenario, *report.traces[s.scenario], out))
    except OSError as exc:
        raise ReportError(f"cannot write report to {out}: {exc}") from exc
    return written


def read_report(out_dir) -> MetricsReport:
    """Tables written by ``emit_report`` read back into a report (without traces)."""
    out = Path(out_dir)
    report = MetricsReport()
    with (out / "metrics.csv").open(newline="") as fh:
        header = fh.readline()
        report.per_scenario_stats = "pooled" not in header
        for row in csv.DictReader(fh):
            report.aggregate[(row["kind"], row["source"])] = (float(row["mean_speed"]), float(row["std_speed"]))
    by_name: dict = {}
    with (out / "per_user.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            sm = by_name.setdefault(row["scenario"], ScenarioMetrics(row["scenario"]))
            sm.users.append(UserMetrics(row["user_id"], row["kind"], float(row["trajectory_distance"]),
                                        float(row["speed_difference"])))
    with (out / "per_scenario.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            report.scenarios.append(by_name.get(row["scenario"], ScenarioMetrics(row["scenario"])))
    return report


def plot_scenario(name: str, sim: dict, ref: dict, out_dir) -> list[Path]:
    """Position overlay and speed traces, reference solid and simulation dashed, as SVG."""
    from matplotlib.figure import Figure

    out = Path(out_dir)
    colors = {}
    palette = ["C0", "C1", "C2", "C3", "C4", "C5", "C6", "C7", "C8", "C9"]
    for i, uid in enumerate(sorted(set(sim) | set(ref))):
        colors[uid] = palette[i % len(palette)]

    fig = Figure(figsize=(6, 5))
    ax = fig.add_subplot()
    for uid, tr in sorted(ref.items()):
        ax.plot(tr.xy[:, 0], tr.xy[:, 1], "-", color=colors[uid], label=f"{uid} real")
    for uid, tr in sorted(sim.items()):
        ax.plot(tr.xy[:, 0], tr.xy[:, 1], "--", color=colors[uid], label=f"{uid} sim")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{name}: trajectories")
    ax.legend(fontsize="small")
    p_traj = out / f"{name}_trajectories.svg"
    fig.savefig(p_traj, format="svg")

    fig = Figure(figsize=(6, 4))
    ax = fig.add_subplot()
    for uid, tr in sorted(ref.items()):
        ax.plot(tr.t, tr.speed, "-", color=colors[uid], label=f"{uid} real")
    for uid, tr in sorted(sim.items()):
        ax.plot(tr.t, tr.speed, "--", color=colors[uid], label=f"{uid} sim")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("speed [m/s]")
    ax.set_title(f"{name}: speed")
    ax.legend(fontsize="small")
    p_speed = out / f"{name}_speed.svg"
    fig.savefig(p_speed, format="svg")
    return [p_traj, p_speed]
