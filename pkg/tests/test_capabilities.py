import numpy as np
import pytest

from blockbridge.capabilities import CandidateModel, candidate, gap, intent_pairs, manip_reach, navig_reach
from blockbridge.geometry import distance_to
from blockbridge.roadmap import apply_move, build
from blockbridge.scene import Position, RobotModel, make_scene, rect

from randscenes import random_scene


@pytest.fixture(scope="module")
def rm0(single_bridge):
    return build(single_bridge.initial_environment())


@pytest.fixture(scope="module")
def rm_bridged(single_bridge, rm0):
    return apply_move(rm0, "b1", single_bridge.block("b1").at(7.0, 7.0, 0.0, 1.0))


def test_navig_reach(single_bridge, rm0, rm_bridged):
    s = single_bridge.start
    assert navig_reach(rm0, s, s)
    assert not navig_reach(rm0, s, single_bridge.goal)
    assert navig_reach(rm_bridged, s, single_bridge.goal)


def test_manip_reach_is_the_radius_ball(single_bridge, rm0):
    keys = set(manip_reach(rm0, "b1").tolist())
    fp = single_bridge.initial_environment().config("b1").footprint
    idx = np.nonzero(rm0.active_mask())[0]
    d = distance_to(fp, rm0.all_xy()[idx])
    top = set(rm0.plane_nodes("b1").tolist())
    for i, di in zip(idx, d):
        if int(i) in top:
            assert rm0.key(int(i)) not in keys
        else:
            assert (rm0.key(int(i)) in keys) == (di <= single_bridge.robot.manip_radius + 1e-9)
    assert keys


def test_manip_reach_threshold_between_18_and_20():
    def scene(radius):
        return make_scene(
            "r",
            rect(0, 0, 12, 4),
            [],
            [("b", rect(-0.5, -0.5, 0.5, 0.5), 1.0, (2.0, 2.0, 0.0), 0.0)],
            ((6, 2), "ground"),
            ((10, 2), "ground"),
            robot=RobotModel(manip_radius=radius),
        )

    sc = scene(1.9)
    rm = build(sc.initial_environment())
    fp = sc.initial_environment().config("b").footprint
    keys = manip_reach(rm, "b")
    d = distance_to(fp, rm.all_xy()[[rm.index(int(k)) for k in keys]])
    assert d.max() <= 1.9
    idx = np.nonzero(rm.active_mask())[0]
    all_d = distance_to(fp, rm.all_xy()[idx])
    # nodes in (1.9, 2.0] exist in the grid and are excluded
    assert ((all_d > 1.9) & (all_d <= 2.1)).any()
    assert len(keys) == int(((all_d <= 1.9) & (rm.all_z()[idx] < 1e-9)).sum())


@pytest.mark.parametrize("small,big", [(0.5, 1.0), (1.0, 1.9), (1.9, 3.0)])
def test_manip_reach_monotone_in_radius(small, big):
    def scene(radius):
        return make_scene(
            "m",
            rect(0, 0, 10, 10),
            [("T", rect(5, 5, 9, 9), 0.0, 1.0)],
            [("b", rect(-0.5, -0.5, 0.5, 0.5), 1.0, (4.0, 4.0, 0.0), 0.0)],
            ((1, 1), "ground"),
            ((7, 7), "T"),
            robot=RobotModel(manip_radius=radius),
        )

    a = set(manip_reach(build(scene(small).initial_environment()), "b").tolist())
    b = set(manip_reach(build(scene(big).initial_environment()), "b").tolist())
    assert a <= b


def test_manip_reach_empty_for_isolated_block():
    sc = make_scene(
        "iso",
        rect(0, 0, 2, 2),
        [],
        [("b", rect(-1, -1, 1, 1), 1.0, (1.0, 1.0, 0.0), 0.0)],
        ((1, 1), "b"),
        ((1, 1), "ground"),
    )
    assert len(manip_reach(build(sc.initial_environment()), "b")) == 0


def test_gap_examples(rm0, rm_bridged):
    assert not gap(rm0, "ground", "P1")
    assert gap(rm0, "P1", "P2")
    assert not gap(rm_bridged, "P1", "P2")
    with pytest.raises(ValueError):
        gap(rm0, "P1", "P1")


@pytest.mark.parametrize("seed", range(5))
def test_gap_symmetric(seed):
    sc = random_scene(np.random.default_rng(seed))
    rm = build(sc.initial_environment())
    ids = [p.id for p in sc.fixed_planes]
    for a in ids:
        for b in ids:
            if a != b:
                assert gap(rm, a, b) == gap(rm, b, a)


def test_candidate_height_rule(single_bridge):
    assert ("b1", "P1") in candidate(single_bridge, "P1", "P2")
    assert ("b1", "ground") not in candidate(single_bridge, "ground", "P2")
    # argument order does not matter
    assert set(candidate(single_bridge, "P2", "P1")) == set(candidate(single_bridge, "P1", "P2"))


def test_candidate_injection_and_drop(single_bridge):
    model = CandidateModel(inject=((("P1", "P2"), ("b1", "ground")),))
    out = candidate(single_bridge, "P1", "P2", model)
    assert out[0] == ("b1", "ground") and ("b1", "P1") in out
    dropped = CandidateModel(drop=((("P2", "P1"), ("b1", "P1")),))
    assert ("b1", "P1") not in candidate(single_bridge, "P1", "P2", dropped)


def test_intent_pairs(single_bridge, two_tables):
    assert ("P1", "P2") in intent_pairs(single_bridge)
    assert ("ground", "P1") not in intent_pairs(single_bridge)
    pairs = intent_pairs(two_tables)
    assert ("T1", "Y") in pairs and ("ground", "T1") in pairs


def test_robot_position_off_plane_is_an_error(rm0):
    with pytest.raises(ValueError):
        rm0.connected(Position((100, 100), "ground"), Position((1, 1), "ground"))
