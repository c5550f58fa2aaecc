"""One-shot Stackelberg games between a leader and one or more followers.

Utilities are ordinal: a base valuation per action pair plus the impact of six
observable boolean factors. The equilibrium is found by backward induction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Action, Kind, RoadUser

C, D, V = Action.CONTINUE, Action.DECELERATE, Action.DEVIATE

CAR_ACTIONS = (C, D)
PEDESTRIAN_ACTIONS = (C, D, V)

# ties resolve to the safest action first
TIE_ORDER = {D: 0, V: 1, C: 2}

# which factor x1..x6 governs each impact F1..F12
GOVERNING_FACTOR = {
    "F1": 1, "F6": 1, "F11": 1,
    "F2": 2, "F7": 2,
    "F3": 3, "F8": 3,
    "F4": 4, "F9": 4,
    "F5": 5, "F10": 5,
    "F12": 6,
}

# (value if factor true, value if false); calibration pending, see README
DEFAULT_FACTOR_WEIGHTS = {
    "F1": (1.0, 2.0),
    "F2": (1.0, 0.0),
    "F3": (0.0, 0.0),
    "F4": (0.0, 0.0),
    "F5": (0.0, 0.0),
    "F6": (3.0, 0.0),
    "F7": (2.0, 1.0),
    "F8": (1.0, 0.0),
    "F9": (1.0, 0.0),
    "F10": (1.0, 0.0),
    "F11": (1.0, 0.0),
    "F12": (0.0, 0.0),
}

# (pedestrian action, car action) -> (pedestrian utility, car utility)
DEFAULT_BASE_MATRIX = {
    (C, C): (-100.0, -100.0),
    (C, D): (2.0, 0.0),
    (D, C): (0.0, 2.0),
    (D, D): (-1.0, -1.0),
    (V, C): (1.0, 2.0),
    (V, D): (-1.0, -1.0),
}


@dataclass(frozen=True)
class PayoffConfig:
    factor_weights: dict = field(default_factory=lambda: dict(DEFAULT_FACTOR_WEIGHTS))
    base_matrix: dict = field(default_factory=lambda: dict(DEFAULT_BASE_MATRIX))
    N: int = 2
    M: int = 3
    s_normal: dict = field(default_factory=lambda: {"pedestrian": 1.4, "car": 5.0})
    give_way_range: tuple[int, int] = (0, 5)

    def __post_init__(self):
        fw = {str(k): tuple(float(x) for x in v) for k, v in self.factor_weights.items()}
        missing = set(GOVERNING_FACTOR) - set(fw)
        if missing:
            raise ValueError(f"factor weights missing {sorted(missing, key=lambda s: int(s[1:]))}")
        extra = set(fw) - set(GOVERNING_FACTOR)
        if extra:
            raise ValueError(f"unknown factor weights {sorted(extra)}")
        for k, v in fw.items():
            if len(v) != 2 or not np.all(np.isfinite(v)):
                raise ValueError(f"{k} must be a finite (if_true, if_false) pair")
        object.__setattr__(self, "factor_weights", fw)
        bm = {(Action(a), Action(b)): tuple(float(x) for x in u) for (a, b), u in self.base_matrix.items()}
        if set(bm) != set(DEFAULT_BASE_MATRIX):
            raise ValueError("base matrix must define every (pedestrian, car) action pair")
        vals = np.array(list(bm.values()))
        if vals.min() < -100 or vals.max() > 2:
            raise ValueError("base values must lie in [-100, 2]")
        for p in (0, 1):
            col = vals[:, p]
            if bm[(C, C)][p] != -100 or np.sum(col == -100) != 1:
                raise ValueError("mutual Continue must be the unique -100 outcome for both players")
            if col.max() != 2:
                raise ValueError("each player's best base outcome must be 2")
        object.__setattr__(self, "base_matrix", bm)
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be >= 1")
        object.__setattr__(self, "s_normal", {Kind(k).value: float(v) for k, v in self.s_normal.items()})
        lo, hi = self.give_way_range
        if not 0 <= lo <= hi:
            raise ValueError("give_way_range must satisfy 0 <= low <= high")

    def weight(self, name: str, factors: "FactorVector") -> float:
        t, f = self.factor_weights[name]
        return t if factors[GOVERNING_FACTOR[name]] else f


@dataclass(frozen=True)
class FactorVector:
    x1: bool
    x2: bool
    x3: bool
    x4: bool
    x5: bool
    x6: bool

    def __getitem__(self, i: int) -> bool:
        return (self.x1, self.x2, self.x3, self.x4, self.x5, self.x6)[i - 1]


def evaluate_factors(actor: RoadUser, counterpart: RoadUser, active_interactions: int,
                     config: PayoffConfig, follows_car: bool | None = None,
                     followed_by_car: bool = False) -> FactorVector:
    """Observable factors for ``actor`` facing ``counterpart``.

    ``follows_car`` defaults to the actor's current mode being car following.
    """
    if actor.id == counterpart.id:
        raise ValueError("actor and counterpart must differ")
    if follows_car is None:
        follows_car = actor.mode.name == "following"
    s_normal = config.s_normal.get(counterpart.kind.value, counterpart.desired_speed)
    return FactorVector(
        x1=counterpart.speed < s_normal,
        x2=active_interactions < config.N,
        x3=actor.give_way_count < config.M,
        x4=actor.is_car and bool(follows_car),
        x5=not actor.is_car and actor.group_id is not None,
        x6=actor.is_car and bool(followed_by_car),
    )


def payoff_car(factors: FactorVector, config: PayoffConfig) -> tuple[float, float]:
    w = config.weight
    cont = w("F1", factors) + w("F2", factors) + w("F3", factors) + w("F4", factors) + w("F5", factors)
    dec = w("F6", factors) + w("F7", factors) + w("F8", factors) + w("F9", factors) + w("F10", factors)
    return cont, dec


def payoff_pedestrian(factors: FactorVector, config: PayoffConfig) -> tuple[float, float, float]:
    w = config.weight
    cont = w("F1", factors) + w("F9", factors) + w("F10", factors)
    dec = w("F6", factors) + w("F4", factors) + w("F5", factors)
    dev = w("F11", factors) + w("F12", factors)
    return cont, dec, dev


def action_payoffs(kind: Kind, factors: FactorVector, config: PayoffConfig) -> dict:
    if Kind(kind) is Kind.CAR:
        return dict(zip(CAR_ACTIONS, payoff_car(factors, config)))
    return dict(zip(PEDESTRIAN_ACTIONS, payoff_pedestrian(factors, config)))


def base_utility(config: PayoffConfig, kind_self, s_self, kind_other, s_other) -> float:
    """Ordinal base value of an outcome from one player's side.

    Car-versus-car outcomes use the Continue/Decelerate block from the row side,
    which is symmetric under the default valuation.
    """
    bm = config.base_matrix
    if Kind(kind_self) is Kind.CAR and Kind(kind_other) is Kind.PEDESTRIAN:
        return bm[(s_other, s_self)][1]
    return bm[(s_self, s_other)][0]


@dataclass(frozen=True)
class GameSpec:
    leader: str
    leader_kind: Kind
    leader_actions: tuple[Action, ...]
    followers: tuple[str, ...]
    follower_kind: Kind
    follower_actions: tuple[Action, ...]
    leader_utility: np.ndarray  # (len(leader_actions), len(follower_actions))
    follower_utility: np.ndarray

    def __post_init__(self):
        if not self.followers:
            raise ValueError("a game needs at least one follower")
        shape = (len(self.leader_actions), len(self.follower_actions))
        for u in (self.leader_utility, self.follower_utility):
            if np.shape(u) != shape:
                raise ValueError(f"utility shape {np.shape(u)} does not match actions {shape}")
            if not np.all(np.isfinite(u)):
                raise ValueError("utilities must be finite")

    def as_dict(self) -> dict:
        return {
            "leader": self.leader,
            "followers": list(self.followers),
            "leader_actions": [a.value for a in self.leader_actions],
            "follower_actions": [a.value for a in self.follower_actions],
            "leader_utility": np.asarray(self.leader_utility).tolist(),
            "follower_utility": np.asarray(self.follower_utility).tolist(),
        }


@dataclass(frozen=True)
class SPNEResult:
    leader_action: Action
    follower_action: Action
    leader_utility: float
    follower_utility: float

    def as_dict(self) -> dict:
        return {
            "leader_action": self.leader_action.value,
            "follower_action": self.follower_action.value,
            "leader_utility": self.leader_utility,
            "follower_utility": self.follower_utility,
        }


def actions_for(kind) -> tuple[Action, ...]:
    return CAR_ACTIONS if Kind(kind) is Kind.CAR else PEDESTRIAN_ACTIONS


def assemble_game(leader: RoadUser, followers, config: PayoffConfig, *,
                  interactions: dict | None = None, follows: set | frozenset = frozenset(),
                  followed: set | frozenset = frozenset()) -> GameSpec:
    """Build the bimatrix game for ``leader`` against ``followers`` (nearest first).

    The leader's factors are taken against the nearest follower with the number of
    followers as its interaction count; the follower role is represented by the
    nearest follower. ``interactions`` maps user id to its active interaction count.
    """
    followers = list(followers)
    if not followers:
        raise ValueError("a game needs at least one follower")
    interactions = interactions or {}
    nearest = followers[0]
    f_kind = Kind.CAR if any(f.is_car for f in followers) else Kind.PEDESTRIAN
    lx = evaluate_factors(leader, nearest, len(followers), config,
                          follows_car=leader.id in follows, followed_by_car=leader.id in followed)
    fx = evaluate_factors(nearest, leader, interactions.get(nearest.id, 1), config,
                          follows_car=nearest.id in follows, followed_by_car=nearest.id in followed)
    l_actions = actions_for(leader.kind)
    f_actions = actions_for(f_kind)
    l_pay = action_payoffs(leader.kind, lx, config)
    f_pay = action_payoffs(f_kind, fx, config)
    ul = np.empty((len(l_actions), len(f_actions)))
    uf = np.empty_like(ul)
    for i, sl in enumerate(l_actions):
        for j, sf in enumerate(f_actions):
            ul[i, j] = base_utility(config, leader.kind, sl, f_kind, sf) + l_pay[sl]
            uf[i, j] = base_utility(config, f_kind, sf, leader.kind, sl) + f_pay[sf]
    return GameSpec(leader.id, leader.kind, l_actions, tuple(f.id for f in followers), f_kind,
                    f_actions, ul, uf)


def _pick(actions, values) -> int:
    """Index of the maximum, ties broken by TIE_ORDER."""
    best = max(values)
    candidates = [k for k, v in enumerate(values) if v == best]
    return min(candidates, key=lambda k: TIE_ORDER[actions[k]])


def best_response(game: GameSpec, leader_index: int) -> int:
    return _pick(game.follower_actions, list(game.follower_utility[leader_index]))


def solve_spne(game: GameSpec) -> SPNEResult:
    """Backward induction: follower best response per leader action, then leader argmax."""
    responses = [best_response(game, i) for i in range(len(game.leader_actions))]
    leader_values = [game.leader_utility[i, responses[i]] for i in range(len(game.leader_actions))]
    i = _pick(game.leader_actions, leader_values)
    j = responses[i]
    return SPNEResult(game.leader_actions[i], game.follower_actions[j],
                      float(game.leader_utility[i, j]), float(game.follower_utility[i, j]))
