import pytest

from sharedspace.dynamics import Action, Mode
from sharedspace.interaction import Conflict, InteractionClass, detect_conflicts, prediction_velocity
from sharedspace.mediator import MediatorConfig, mode_priority, run_cycle, select_leader

from .helpers import make_user


def cycle(users, config=None):
    users = {u.id: u for u in users}
    lst = list(users.values())
    conflicts = detect_conflicts(lst, intended=[prediction_velocity(u, 0.05) for u in lst])
    return run_cycle(users, conflicts, config)


def crossing_pair():
    car = make_user("Car", "car", pos=(0, 0), vel=(5, 0))
    ped = make_user("Ped", pos=(12, -3.5), vel=(0, 1.3), dest=(12, 10))
    return car, ped


def test_mode_priority_order():
    order = [Mode.stopping("x"), Mode.courtesy("x"), Mode.game_bound(Action.DECELERATE, ["x"]),
             Mode.following("x"), Mode.game_bound(Action.CONTINUE, ["x"]), Mode.free_flow()]
    assert [mode_priority(m) for m in order] == [0, 1, 2, 3, 4, 5]


def test_leader_selection():
    fast = make_user("b", "car", vel=(5, 0))
    slow = make_user("a", vel=(1, 0))
    assert select_leader(slow, fast)[0] is fast
    car = make_user("z", "car", vel=(1, 0))
    assert select_leader(slow, car)[0] is car
    twin = make_user("c", vel=(1, 0))
    assert select_leader(twin, slow)[0] is slow


def test_crossing_pedestrian_triggers_a_game():
    report, decisions = cycle(crossing_pair())
    assert report.classification["Car"] is InteractionClass.COMPLEX_GAME
    (game, result), = report.games
    assert game.leader == "Car" and game.followers == ("Ped",)
    assert decisions["Car"] == Mode.game_bound(result.leader_action, ["Ped"], speed=5.0)
    assert decisions["Ped"].name == "game_bound" and decisions["Ped"].targets == ("Car",)


def test_without_game_layer_the_pair_uses_plain_forces():
    report, decisions = cycle(crossing_pair(), MediatorConfig(game_layer=False))
    assert report.games == [] and report.classical_pairs == [("Car", "Ped")]
    assert decisions == {"Car": Mode.free_flow(), "Ped": Mode.free_flow()}


def test_pedestrian_ahead_makes_the_car_stop():
    car = make_user("Car", "car", pos=(0, 0), vel=(5, 0))
    ped = make_user("Ped", pos=(8, -1), vel=(0, 1.3), dest=(8, 10))
    report, decisions = cycle([car, ped])
    assert report.classification["Car"] is InteractionClass.REACTIVE_STOPPING
    assert decisions["Car"] == Mode.stopping("Ped")


def test_stopping_is_held_while_a_pedestrian_stays_in_the_corridor():
    car = make_user("Car", "car", pos=(0, 0), vel=(0, 0), mode=Mode.stopping("Ped"))
    ped = make_user("Ped", pos=(6, 2.5), vel=(0, 1.3), dest=(6, 10))
    report, decisions = run_cycle({"Car": car, "Ped": ped}, [])
    assert decisions["Car"] == Mode.stopping("Ped") and ("Car", "Ped") in report.held
    gone = make_user("Ped", pos=(6, 3.5), vel=(0, 1.3), dest=(6, 10))
    _, decisions = run_cycle({"Car": car, "Ped": gone}, [])
    assert decisions["Car"] == Mode.free_flow()


def test_commitment_kept_while_the_pair_conflicts_and_released_after():
    car, ped = crossing_pair()
    car.mode = Mode.game_bound(Action.DECELERATE, ["Ped"], speed=5.0)
    ped.mode = Mode.game_bound(Action.CONTINUE, ["Car"])
    report, decisions = cycle([car, ped])
    assert report.games == [] and decisions["Car"] is car.mode and decisions["Ped"] is ped.mode
    report, decisions = run_cycle({"Car": car, "Ped": ped}, [])
    assert set(report.released) == {"Car", "Ped"}
    assert decisions["Car"] == Mode.free_flow()


def test_committed_counterpart_defers_a_new_game():
    car, ped = crossing_pair()
    other = make_user("Car0", "car", pos=(0, -20), vel=(0, 0), dest=(0, -40))
    ped.mode = Mode.game_bound(Action.CONTINUE, ["Car0"])
    users = {u.id: u for u in (car, ped, other)}
    conflicts = [c for c in detect_conflicts([car, ped]) if c.first == "Car"]
    conflicts.append(Conflict("Ped", "Car0", 10.0, 0.0, 0.0, 1.0, 0.5))
    report, decisions = run_cycle(users, conflicts)
    assert report.games == []
    assert report.deferred == [("Car", "Ped", "counterpart already committed")]


def test_halted_pedestrian_released_from_standoff_with_a_yielding_car():
    # the car waits for the pedestrian ahead of it; the pedestrian waits for the car
    car = make_user("Car", "car", pos=(0, 0), vel=(0, 0), mode=Mode.stopping("Ped"))
    ped = make_user("Ped", pos=(4, -1), vel=(0, 0), dest=(4, 10),
                    mode=Mode.game_bound(Action.DECELERATE, ["Car"]))
    conflicts = [Conflict("Ped", "Car", 1.0, 0.0, 0.0, 0.5, 0.5), Conflict("Car", "Ped", 1.0, 0.0, 0.0, 0.5, 0.5)]
    report, decisions = run_cycle({"Car": car, "Ped": ped}, conflicts)
    assert "Ped" in report.released
    assert decisions["Ped"].name != "game_bound"
    assert decisions["Car"].brakes


@pytest.mark.parametrize("first", ["A", "B"])
def test_mutual_standoff_lets_the_user_with_a_clear_road_go_first(first):
    # B stands in A's corridor, so B (with open road) moves first whatever the ids
    ida, idb = ("A", "B") if first == "A" else ("B", "A")
    a = make_user(ida, "car", pos=(0, 0), vel=(0, 0), dest=(30, 0), mode=Mode.game_bound(Action.DECELERATE, [idb]))
    b = make_user(idb, "car", pos=(4, 0), vel=(0, 0), dest=(4, 30), mode=Mode.game_bound(Action.DECELERATE, [ida]))
    conflicts = [Conflict(ida, idb, 2.0, 0.0, 270.0, 0.5, 0.5), Conflict(idb, ida, 2.0, 270.0, 0.0, 0.5, 0.5)]
    report, _ = run_cycle({ida: a, idb: b}, conflicts)
    assert report.released == [idb]
