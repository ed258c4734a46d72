import pytest

from blockbridge.generator import BenchmarkConfig, GenerationError, certify, generate, key_moves, witness_horizon
from blockbridge.oracle import exhaustive_solve, lower_bound
from blockbridge.roadmap import build
from blockbridge.scene import dump_scene


def test_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(3, 2, -1)
    with pytest.raises(ValueError):
        BenchmarkConfig(2, 2, 2)
    with pytest.raises(ValueError):
        BenchmarkConfig(3, 0, 1)
    assert BenchmarkConfig(3, 2, 2).family == "p3_b2_h2"


def test_three_planes_two_blocks_seed_seven():
    cfg = BenchmarkConfig(3, 2, 2)
    scene = generate(cfg, 7)
    assert len(scene.fixed_planes) == 3 and len(scene.movable) == 2
    assert exhaustive_solve(scene) == 2
    assert scene.metadata["certified"] is True and scene.metadata["seed"] == 7


def test_generation_is_deterministic():
    cfg = BenchmarkConfig(4, 3, 1)
    assert dump_scene(generate(cfg, 3)) == dump_scene(generate(cfg, 3))
    assert dump_scene(generate(cfg, 3)) != dump_scene(generate(cfg, 4))


def test_zero_horizon_goal_is_reachable():
    scene = generate(BenchmarkConfig(3, 1, 0), 0)
    rm = build(scene.initial_environment())
    assert rm.connected(scene.start, scene.goal)


def test_exhausted_budget_raises(monkeypatch):
    import blockbridge.generator as gen

    monkeypatch.setattr(gen, "certify", lambda scene, h_min, max_states=0: False)
    with pytest.raises(GenerationError):
        generate(BenchmarkConfig(3, 2, 2, attempts=3), 0)


def test_key_moves_witness_the_horizon():
    scene = generate(BenchmarkConfig(6, 8, 3), 1)
    moves = key_moves(scene)
    assert len(moves) == 3
    assert all(t.intent is not None and t.plane == t.intent[0] for t in moves)
    assert witness_horizon(scene) == 3
    assert lower_bound(scene) == 3
    assert certify(scene, 3) and not certify(scene, 2)


def test_scene_without_rises_has_no_witness(single_bridge):
    assert key_moves(single_bridge) is None and witness_horizon(single_bridge) is None
