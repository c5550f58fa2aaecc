"""Host agent: routes each car's nearest conflict to local handling or to a game."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Action, ForceParams, Mode, RoadUser, surface_gap
from .game import PayoffConfig, assemble_game, solve_spne
from .interaction import (
    Conflict, InteractionClass, classify, count_active_interactions, heading_of, in_heading_corridor,
    nearest_conflict,
)

log = logging.getLogger(__name__)

# lower wins when several decisions compete for one user in a cycle
_LOCAL_MODES = {
    InteractionClass.REACTIVE_STOPPING: Mode.stopping,
    InteractionClass.CAR_FOLLOWING: Mode.following,
    InteractionClass.COURTESY: Mode.courtesy,
}


def mode_priority(mode: Mode) -> int:
    if mode.name == "stopping":
        return 0
    if mode.name == "courtesy":
        return 1
    if mode.name == "game_bound" and mode.action is Action.DECELERATE:
        return 2
    if mode.name == "following":
        return 3
    if mode.name == "game_bound":
        return 4
    return 5


@dataclass
class MediatorConfig:
    forces: ForceParams = field(default_factory=ForceParams)
    payoffs: PayoffConfig = field(default_factory=PayoffConfig)
    game_layer: bool = True


@dataclass
class MediationCycleReport:
    cycle_index: int
    nearest: dict = field(default_factory=dict)  # car id -> Conflict
    classification: dict = field(default_factory=dict)  # car id -> InteractionClass
    conflict_counts: dict = field(default_factory=dict)
    games: list = field(default_factory=list)  # (GameSpec, SPNEResult)
    local: list = field(default_factory=list)  # (user, counterpart, class)
    deferred: list = field(default_factory=list)  # (user, counterpart, reason)
    overridden: list = field(default_factory=list)  # (user, kept label, dropped label)
    released: list = field(default_factory=list)
    held: list = field(default_factory=list)  # (car, target) yields kept while the target passes
    classical_pairs: list = field(default_factory=list)  # (car, counterpart) without a game

    def as_dict(self) -> dict:
        return {
            "cycle": self.cycle_index,
            "nearest": {k: c.as_dict() for k, c in self.nearest.items()},
            "classification": {k: v.value for k, v in self.classification.items()},
            "conflict_counts": dict(self.conflict_counts),
            "games": [{"game": g.as_dict(), "spne": r.as_dict()} for g, r in self.games],
            "local": [list(x[:2]) + [x[2].value] for x in self.local],
            "deferred": [list(x) for x in self.deferred],
            "overridden": [list(x) for x in self.overridden],
            "released": list(self.released),
            "held": [list(x) for x in self.held],
            "classical_pairs": [list(x) for x in self.classical_pairs],
        }


def select_leader(a: RoadUser, b: RoadUser) -> tuple[RoadUser, RoadUser]:
    """Faster user leads; ties go to the car, then to the lower id."""
    key = lambda u: (-u.speed, 0 if u.is_car else 1, u.id)
    first, second = sorted((a, b), key=key)
    return first, second


def run_cycle(users: dict, conflicts, config: MediatorConfig | None = None,
              cycle_index: int = 0) -> tuple[MediationCycleReport, dict]:
    """One host-agent cycle. Returns the report and the mode decided for every user."""
    config = config or MediatorConfig()
    params = config.forces
    report = MediationCycleReport(cycle_index)
    conflicts = list(conflicts)
    by_first = defaultdict(list)
    pairs = set()
    for c in conflicts:
        by_first[c.first].append(c)
        pairs.add(frozenset((c.first, c.second)))

    cache: dict = {}

    def cls(c: Conflict) -> InteractionClass:
        key = (c.first, c.second)
        if key not in cache:
            cache[key] = classify(c, users[c.first], users[c.second], params)
        return cache[key]

    def stalled(uid: str) -> bool:
        # halted in a Decelerate commitment while every counterpart is halted and yielding too
        u = users[uid]
        if not (u.mode.name == "game_bound" and u.mode.action is Action.DECELERATE
                and u.speed <= params.stop_epsilon):
            return False
        present = [users[t] for t in u.mode.targets if t in users]
        return bool(present) and all(t.speed <= params.stop_epsilon and t.mode.brakes for t in present)

    def ahead(a: str, b: str) -> bool:
        return in_heading_corridor(users[a], users[b], params.conflict_close_distance)

    def goes_first(a: str, b: str) -> bool:
        # the user with a clear road ahead moves first; ids settle symmetric cases
        if ahead(a, b) != ahead(b, a):
            return ahead(b, a)
        return a < b

    def breaks_standoff(uid: str) -> bool:
        if not stalled(uid):
            return False
        for t in users[uid].mode.targets:
            if t not in users:
                continue
            if stalled(t) and uid in users[t].mode.targets:
                if not goes_first(uid, t):
                    return False
            elif users[t].mode.name in ("stopping", "courtesy") and ahead(t, uid):
                continue  # t holds its yield while uid stands in its way
            elif ahead(uid, t):
                return False
        return True

    candidates: dict = defaultdict(list)
    committed = set()
    for uid in sorted(users):
        mode = users[uid].mode
        if mode.name != "game_bound":
            continue
        if breaks_standoff(uid):
            report.released.append(uid)
            continue
        if any(frozenset((uid, t)) in pairs for t in mode.targets if t in users):
            candidates[uid].append(mode)
            committed.add(uid)
        else:
            report.released.append(uid)

    # a yield lasts until the corridor ahead is clear, even if the look-ahead no
    # longer reports the pair: stopping waits for every pedestrian within reach,
    # courtesy for its own target
    for uid in sorted(users):
        u = users[uid]
        if u.mode.name == "stopping":
            reach = u.desired_speed * params.horizon
            waiting = [p for p in users.values() if not p.is_car
                       and in_heading_corridor(u, p, params.conflict_close_distance)
                       and float(np.dot(p.position - u.position, heading_of(u))) <= reach]
            if waiting:
                target = min(waiting, key=lambda p: (surface_gap(u, p), p.id))
                candidates[uid].append(Mode.stopping(target.id))
                report.held.append((uid, target.id))
                committed.add(uid)
        elif u.mode.name == "following" and u.mode.targets[0] in users:
            # keeps the gap while both cars stand; not a yield, so games stay open
            leader = users[u.mode.targets[0]]
            along = float(np.dot(leader.position - u.position, heading_of(u)))
            if (in_heading_corridor(u, leader, params.conflict_close_distance)
                    and along <= u.desired_speed * params.horizon + params.d_min_vehicle):
                candidates[uid].append(u.mode)
                report.held.append((uid, leader.id))
        elif u.mode.name == "courtesy" and u.mode.targets[0] in users:
            target = users[u.mode.targets[0]]
            if in_heading_corridor(u, target, params.conflict_close_distance):
                candidates[uid].append(u.mode)
                report.held.append((uid, target.id))
                committed.add(uid)

    cars = sorted(uid for uid, u in users.items() if u.is_car)
    follows, followed = set(), set()
    for uid in cars:
        for c in by_first.get(uid, ()):
            if users[c.second].is_car and cls(c) is InteractionClass.CAR_FOLLOWING:
                follows.add(c.first)
                followed.add(c.second)

    for uid in cars:
        c = nearest_conflict(uid, by_first.get(uid, ()))
        if c is None:
            continue
        report.nearest[uid] = c
        report.conflict_counts[uid] = count_active_interactions(uid, conflicts)
        k = cls(c)
        report.classification[uid] = k
        if k.local:
            candidates[uid].append(_LOCAL_MODES[k](c.second))
            report.local.append((uid, c.second, k))

    in_game = set()
    for uid in cars:
        c = report.nearest.get(uid)
        if c is None or report.classification[uid] is not InteractionClass.COMPLEX_GAME:
            continue
        if not config.game_layer:
            # plain social force against every game-class counterpart
            for lc in by_first.get(uid, ()):
                if cls(lc) is InteractionClass.COMPLEX_GAME:
                    report.classical_pairs.append((uid, lc.second))
            continue
        if uid in committed or uid in in_game:
            continue
        other = c.second
        if other in committed or other in in_game:
            report.deferred.append((uid, other, "counterpart already committed"))
            continue
        leader, first = select_leader(users[uid], users[other])
        pool = {first.id}
        for lc in by_first.get(leader.id, ()):
            cand = users[lc.second]
            if (lc.second in in_game or lc.second in committed or lc.second == leader.id
                    or cand.kind is not first.kind):
                continue
            if cls(lc) is InteractionClass.COMPLEX_GAME:
                pool.add(lc.second)
        followers = sorted((users[f] for f in pool), key=lambda f: (surface_gap(leader, f), f.id))
        interactions = {f.id: count_active_interactions(f.id, conflicts) for f in followers}
        game = assemble_game(leader, followers, config.payoffs, interactions=interactions,
                             follows=follows, followed=followed)
        result = solve_spne(game)
        report.games.append((game, result))
        candidates[leader.id].append(Mode.game_bound(
            result.leader_action, [f.id for f in followers], speed=leader.speed))
        for f in followers:
            candidates[f.id].append(Mode.game_bound(result.follower_action, [leader.id], speed=f.speed))
        in_game.add(leader.id)
        in_game.update(f.id for f in followers)

    decisions = {}
    for uid in sorted(users):
        options = candidates.get(uid)
        if not options:
            decisions[uid] = Mode.free_flow()
            continue
        best = min(options, key=mode_priority)  # stable: first of equal priority wins
        decisions[uid] = best
        for m in options:
            if m is not best:
                report.overridden.append((uid, best.label(), m.label()))
                log.debug("cycle %d: %s keeps %s over %s", cycle_index, uid, best.label(), m.label())
    return report, decisions


def dispatch_decision(user: RoadUser, mode: Mode) -> bool:
    """Apply a decided mode. Leaving a yielding mode counts as a completed give-way.

    Returns True when the mode changed.
    """
    old = user.mode
    if old.brakes and not mode.brakes:
        user.give_way_count += 1
    user.mode = mode
    return old != mode
