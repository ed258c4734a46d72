from dataclasses import replace

import pytest

from blockbridge.capabilities import CandidateModel
from blockbridge.planner import (
    Plan,
    Planner,
    PlanError,
    assign_plan_steps,
    dump_plan,
    extract_plan,
    parse_plan,
    plan,
    replay,
)
from blockbridge.sampler import SamplerParams
from blockbridge.scene import Position, make_scene, rect
from blockbridge.symbolic import CallableProvider, Triplet

BRIDGE = Triplet("b1", "P1", ("P1", "P2"))


@pytest.fixture(scope="module")
def solved_single(single_bridge):
    return plan(single_bridge, seed=0)


@pytest.fixture(scope="module")
def solved_swap(swap_bridge):
    return plan(swap_bridge, seed=0)


def test_single_bridge_one_move(single_bridge, solved_single):
    res = solved_single
    assert res.solved and res.plan.horizon == 1
    step = res.plan.steps[0]
    assert step.move.block == "b1"
    assert abs(step.move.end.base_height - 1.0) < 1e-9
    assert replay(single_bridge, res.plan).ok


def test_tree_is_well_formed(single_bridge):
    res = plan(single_bridge, seed=3)
    tree = res.tree
    assert len(tree.edges) == len(tree.nodes) - 1
    for n in tree.nodes[1:]:
        parent = tree.nodes[n.parent]
        assert parent.id < n.id
        changed = [a != b for a, b in zip(parent.env.configs, n.env.configs)]
        assert sum(changed) == 1
        assert n.depth == parent.depth + 1


def test_plan_steps_and_frontier(solved_single):
    tree = solved_single.tree
    assert tree.nodes[0].plan_step == 0
    child = tree.nodes[-1]
    if child.triplet == BRIDGE and child.parent == 0:
        assert child.plan_step == 1
    assign_plan_steps(tree, 0, [BRIDGE])
    best = max((n.plan_step for n in tree.nodes if n.plan_step is not None))
    assert tree.v_max_step == best
    assert all(tree.nodes[i].plan_step == best for i in tree.v_max)


def test_plan_steps_outside_origin_are_zero(solved_swap):
    tree = solved_swap.tree
    leaf = tree.nodes[-1].id
    assign_plan_steps(tree, leaf, [Triplet("b1", "ground", None)])
    assert all(n.plan_step == 0 for n in tree.nodes)
    assert tree.v_max_step == 0


def test_extract_plan_depth(solved_swap):
    tree = solved_swap.tree
    leaf = tree.nodes[-1]
    assert extract_plan(tree, leaf.id).horizon == leaf.depth
    assert extract_plan(tree, 0).horizon == 0


def test_goal_already_reachable_gives_empty_plan(single_bridge):
    sc = replace(single_bridge, goal=Position((12.0, 6.0), "P1"))
    res = plan(sc, seed=0)
    assert res.solved and res.plan.horizon == 0 and res.stats.iterations == 0
    assert replay(sc, res.plan).ok


def test_no_blocks_means_failure_after_budget():
    sc = make_scene("wall", rect(0, 0, 8, 8), [("T", rect(3, 3, 6, 6), 0.0, 3.0)], [], ((1, 1), "ground"), ((4, 4), "T"))
    res = plan(sc, SamplerParams(k_max=50), seed=0)
    assert not res.solved
    assert res.stats.iterations == 50 and res.stats.horizon is None


def test_inaccessible_block_move_fails(two_tables):
    from blockbridge.planner import TreeNode
    from blockbridge.roadmap import build

    p = Planner(two_tables, seed=0)
    env = two_tables.initial_environment()
    root = TreeNode(0, None, env, two_tables.start, build(env), 0)
    assert p.sample_move(root, Triplet("b3", "T1", ("O", "Y"))) is None


def test_adjacent_block_temporary_place_succeeds(single_bridge):
    from blockbridge.planner import TreeNode
    from blockbridge.roadmap import build

    p = Planner(single_bridge, seed=0)
    env = single_bridge.initial_environment()
    root = TreeNode(0, None, env, single_bridge.start, build(env), 0)
    out = p.sample_move(root, Triplet("b1", "ground", None))
    assert out is not None
    rm, step, _ = out
    assert step.move.end.base_height == 0.0


def test_bfs_placement_lands_in_band(single_bridge):
    from blockbridge.sampler import make_pose_sampler

    env = single_bridge.initial_environment()
    ps = make_pose_sampler(env, single_bridge.block("b1"), env.plane("P1"), ("P1", "P2"), SamplerParams(), 2.0)
    for seed in range(5):
        end = plan(single_bridge, seed=seed).plan.steps[0].move.end
        assert ps.band.contains([end.pose[:2]])[0]


def test_swapped_steps_fail_replay(swap_bridge, solved_swap):
    good = solved_swap.plan
    assert replay(swap_bridge, good).ok
    bad = Plan(good.steps[::-1])
    rep = replay(swap_bridge, bad)
    assert not rep.ok and rep.messages


def test_tampered_drop_fails_replay(single_bridge, solved_single):
    st = solved_single.plan.steps[0]
    moved = replace(st, drop=Position((0.5, 11.5), "ground"))
    assert not replay(single_bridge, Plan([moved])).ok


def test_plan_file_round_trip(swap_bridge, solved_swap):
    text = dump_plan(solved_swap.plan)
    again = parse_plan(text, swap_bridge)
    assert dump_plan(again) == text
    assert replay(swap_bridge, again).ok


def test_plan_file_errors(swap_bridge, solved_swap):
    with pytest.raises(PlanError):
        parse_plan("", swap_bridge)
    with pytest.raises(PlanError):
        parse_plan('{"horizon": 1}\n{"block": "b1"}\n', swap_bridge)
    lines = dump_plan(solved_swap.plan).splitlines()
    with pytest.raises(PlanError):
        parse_plan("\n".join(lines[:-1]), swap_bridge)


def test_uniform_and_external_modes(single_bridge):
    res = plan(single_bridge, SamplerParams(mode="uniform"), seed=1)
    assert res.solved and res.stats.provider_calls == 0
    seen = []

    def fn(req):
        seen.append(req)
        return [["b1", "P1", ["P1", "P2"]]]

    res = plan(single_bridge, SamplerParams(mode="external"), seed=1, provider=CallableProvider(fn))
    assert res.solved and seen and replay(single_bridge, res.plan).ok
    with pytest.raises(ValueError):
        Planner(single_bridge, SamplerParams(mode="external"))


def test_demoted_triplet_leaves_the_plan(swap_bridge):
    bad = Triplet("b2", "P1", ("P1", "P2"))
    model = CandidateModel(inject=((("P1", "P2"), ("b2", "P1")),))
    p = Planner(swap_bridge, SamplerParams(), seed=0, candidates=model)
    res = p.run()
    assert res.solved and replay(swap_bridge, res.plan).ok
    assert not (set(p.plan) & p.demoted)
    if bad in p.demoted:
        assert res.stats.provider_calls >= 2


def test_same_seed_same_result(swap_bridge):
    a = plan(swap_bridge, seed=7)
    b = plan(swap_bridge, seed=7)
    assert dump_plan(a.plan) == dump_plan(b.plan)
    assert a.stats.iterations == b.stats.iterations


def test_goal_on_movable_plane_rejected(single_bridge):
    sc = replace(single_bridge, goal=Position((11.5, 1.5), "b1"))
    with pytest.raises(ValueError):
        Planner(sc)

