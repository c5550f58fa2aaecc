"""Command line: run, replay-check, dump-config, compare, sweep."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from .evaluation import ReportError, compare_dirs, emit_report
from .scenario import ScenarioError, dump_config, load_scenario
from .sim import SimulationError, run, run_summary, sweep


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.no_game_layer:
        scenario = scenario.with_(game_layer=False)
    log = run(scenario, seed=args.seed, dt=args.dt)
    summary = run_summary(log, scenario)
    if args.out:
        out = log.write(args.out)
        summary["out"] = str(out)
    summary["digest"] = log.digest()
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_replay_check(args) -> int:
    scenario = load_scenario(args.scenario)
    first = run(scenario, seed=args.seed)
    second = run(scenario, seed=args.seed)
    same = first.serialize() == second.serialize()
    print(f"{scenario.name}: {'identical' if same else 'DIFFERENT'} ({first.digest()[:16]} vs {second.digest()[:16]})")
    return 0 if same else 1


def _cmd_dump_config(args) -> int:
    sys.stdout.write(dump_config())
    return 0


def _cmd_compare(args) -> int:
    report = compare_dirs(args.sim, args.ref, interval=args.resample,
                          per_scenario_stats=not args.pooled, workers=args.workers)
    written = emit_report(report, args.out, plots=not args.no_plots)
    for s in report.scenarios:
        row = s.row()
        print(", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    print(f"wrote {len(written)} files to {args.out}")
    return 0


def _parse_values(text: str) -> list:
    return [yaml.safe_load(v) for v in text.split(",") if v.strip()]


def _cmd_sweep(args) -> int:
    rows = sweep(args.scenario, args.param, _parse_values(args.values), seed=args.seed,
                 out=args.out, workers=args.workers)
    w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]) if rows else ["param", "value"])
    w.writeheader()
    w.writerows(rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharedspace", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario file or bundled scenario name")
    r.add_argument("scenario")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", type=Path, default=None, help="directory for trajectories, log and summary")
    r.add_argument("--dt", type=float, default=None)
    r.add_argument("--no-game-layer", action="store_true", help="classical social force instead of games")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("replay-check", help="run twice and compare the logs bit for bit")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int, default=None)
    c.set_defaults(func=_cmd_replay_check)

    d = sub.add_parser("dump-config", help="print every configurable default")
    d.set_defaults(func=_cmd_dump_config)

    m = sub.add_parser("compare", help="metrics of simulated against reference trajectories")
    m.add_argument("--sim", type=Path, required=True)
    m.add_argument("--ref", type=Path, required=True)
    m.add_argument("--out", type=Path, required=True)
    m.add_argument("--resample", type=float, default=None, help="comparison grid step in seconds")
    m.add_argument("--pooled", action="store_true", help="speed statistics over pooled samples")
    m.add_argument("--no-plots", action="store_true")
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=_cmd_compare)

    s = sub.add_parser("sweep", help="run a scenario once per parameter value")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, help="dotted path into the scenario document, e.g. forces.V0")
    s.add_argument("--values", required=True, help="comma-separated values")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", type=Path, default=None)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (FileNotFoundError, ReportError, SimulationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
