"""Acceptance checks; each test prints one PASS/FAIL line for its criterion.

Slow: the whole file takes on the order of an hour on one core.
"""

import statistics
import time
from collections import Counter

import numpy as np
import pytest

from blockbridge import library
from blockbridge.capabilities import CandidateModel, candidate, gap
from blockbridge.generator import BenchmarkConfig, generate
from blockbridge.oracle import exact_candidate
from blockbridge.planner import Planner, PlanTree, TreeNode, plan, replay
from blockbridge.roadmap import build
from blockbridge.sampler import SamplerParams, make_pose_sampler, sample_node, sample_triplet
from blockbridge.symbolic import BfsProvider, CallableProvider

from randscenes import incremental_matches_rebuild, random_scene

SEEDS = range(20)
# (planes, blocks, h_min) for the long-horizon uniform check
LONG_FAMILY = (12, 10, 6)

# every plan returned by any check below, replayed again at the end
RETURNED: list = []


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def run(scene, params=SamplerParams(), seed=0, **kw):
    res = plan(scene, params, seed=seed, **kw)
    if res.solved:
        RETURNED.append((scene, res.plan))
    return res


def within_3_sigma(count, n, p):
    sigma = np.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= 3 * sigma


def test_c01_single_bridge(capsys):
    scene = library.load_builtin("single_bridge")
    env = scene.initial_environment()
    band = make_pose_sampler(
        env, scene.block("b1"), env.plane("P1"), ("P1", "P2"), SamplerParams(), scene.robot.lateral_step
    ).band
    good, slowest = 0, 0.0
    for seed in SEEDS:
        t0 = time.perf_counter()
        res = run(scene, seed=seed)
        slowest = max(slowest, time.perf_counter() - t0)
        if not res.solved or res.plan.horizon != 1:
            continue
        end = res.plan.steps[0].move.end
        if replay(scene, res.plan).ok and band.contains([end.pose[:2]])[0] and end.base_height == 1.0:
            good += 1
    ok = good == len(SEEDS) and slowest < 5.0
    report(capsys, 1, ok, f"{good}/{len(SEEDS)} seeds with H=1 in band, slowest run {slowest:.2f}s")
    assert ok


def test_c02_two_tables(capsys):
    scene = library.load_builtin("two_tables")
    hs = []
    for seed in SEEDS:
        res = run(scene, seed=seed)
        hs.append(res.plan.horizon if res.solved and replay(scene, res.plan).ok else None)
    good = sum(h == 6 for h in hs)
    ok = good >= 18
    report(capsys, 2, ok, f"{good}/{len(SEEDS)} seeds with H=6; horizons {hs}")
    assert ok


@pytest.fixture(scope="module")
def long_scenes():
    cfg = BenchmarkConfig(*LONG_FAMILY)
    return [generate(cfg, s) for s in range(3)]


def test_c03_uniform_fails_long_horizon(capsys, long_scenes):
    params = SamplerParams(mode="uniform", p_gap=0.9)
    fails, medians = [], []
    for scene in long_scenes:
        stats = [run(scene, params, seed=seed).stats for seed in SEEDS]
        fails.append(sum(not st.solved for st in stats))
        medians.append(statistics.median(st.iterations for st in stats))
    ok = all(f >= 18 for f in fails)
    family = long_scenes[0].metadata["family"]
    report(capsys, 3, ok, f"uniform failures per scene {fails} of {len(SEEDS)} on {family}; median iterations {medians}")
    assert ok


def test_c04_bias_sensitivity(capsys):
    scene = library.load_builtin("swap_bridge")
    model = CandidateModel(inject=((("P1", "P2"), ("b2", "P1")),))
    medians = []
    for p1 in (0.2, 0.5, 0.9):
        rest = (1 - p1) / 2
        params = SamplerParams(p_plan=0.8, p1=p1, p2=rest, p3=rest, replan=False)
        iters = [run(scene, params, seed=s, candidates=model).stats.iterations for s in range(10)]
        medians.append(statistics.median(iters))
    params = SamplerParams(p_plan=0.8, p1=0.9, p2=0.05, p3=0.05)
    solved = sum(run(scene, params, seed=s, candidates=model).solved for s in range(10))
    increasing = medians[0] < medians[1] < medians[2]
    ok = increasing and solved == 10
    report(capsys, 4, ok, f"median iterations {medians} for p1=0.2/0.5/0.9; with replanning {solved}/10 solved")
    assert ok


def test_c05_replan_overhead(capsys):
    scene = library.decoy_blocks()
    means, enough = [], []
    for k in (1, 3, 5):
        model = CandidateModel(inject=tuple((("P1", "P2"), (f"d{i}", "P1")) for i in range(1, k + 1)))
        calls = []
        for seed in range(10):
            res = run(scene, seed=seed, candidates=model)
            calls.append(res.stats.provider_calls)
        means.append(float(np.mean(calls)))
        enough.append(sum(c >= k for c in calls))
    ok = means[0] <= means[1] <= means[2] and all(e >= 8 for e in enough)
    report(capsys, 5, ok, f"mean provider calls {means} for k=1/3/5; seeds with calls >= k {enough}")
    assert ok


def test_c06_incremental_roadmap(capsys):
    matches = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        scene = random_scene(rng, n_fixed=3, n_blocks=2)
        matches += incremental_matches_rebuild(scene, rng, n_moves=5)
    ok = matches == 50
    report(capsys, 6, ok, f"{matches}/50 incremental partitions equal a fresh build")
    assert ok


def test_c07_exact_candidates_are_covered(capsys):
    violations, pairs = [], 0
    for seed in range(100):
        scene = random_scene(np.random.default_rng(2000 + seed), n_fixed=3, n_blocks=2)
        rm = build(scene.initial_environment())
        ids = [p.id for p in scene.fixed_planes]
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                if not gap(rm, ids[a], ids[b]):
                    continue
                pairs += 1
                exact = exact_candidate(ids[a], ids[b], scene)
                missing = exact - set(candidate(scene, ids[a], ids[b]))
                if missing:
                    violations.append((scene.scene_id, ids[a], ids[b], sorted(missing)))
    ok = not violations
    report(capsys, 7, ok, f"{len(violations)} violations over {pairs} gapped pairs in 100 scenes")
    assert ok, violations[:5]


@pytest.fixture(scope="module")
def short_scenes():
    out = []
    for h in (1, 2):
        cfg = BenchmarkConfig(4, 3, h)
        out.extend(generate(cfg, s) for s in range(5))
    return out


def test_c08_statistical_completeness(capsys, short_scenes):
    bfs = BfsProvider()
    modes = {
        "bfs": {},
        "uniform": {},
        "external": {"provider": CallableProvider(lambda req: bfs(req))},
    }
    rates = {}
    for mode, kw in modes.items():
        params = SamplerParams(mode=mode)
        solved = 0
        for scene in short_scenes:
            for seed in SEEDS:
                res = run(scene, params, seed=seed, **kw)
                solved += res.solved and replay(scene, res.plan).ok
        rates[mode] = f"{solved}/{len(short_scenes) * len(SEEDS)}"
    ok = all(r.split("/")[0] == r.split("/")[1] for r in rates.values())
    report(capsys, 8, ok, f"solved per mode {rates}")
    assert ok


def frequencies(draw, n):
    return Counter(draw() for _ in range(n))


def test_c09_sampling_distributions(capsys):
    n = 10_000
    rng = np.random.default_rng(0)
    checks = {}

    # node choice: plan frontier {root} against {v1, v2}
    c = frequencies(lambda: sample_node(rng, ["root"], ["v1", "v2"], 0.9), n)
    checks["node p=0.9"] = all(within_3_sigma(c[k], n, p) for k, p in (("root", 0.9), ("v1", 0.05), ("v2", 0.05)))
    c = frequencies(lambda: sample_node(rng, ["root"], ["v1", "v2"], 1 / 3), n)
    checks["node uniform"] = all(within_3_sigma(c[k], n, 1 / 3) for k in ("root", "v1", "v2"))

    # the planner's own node choice on a three-node tree
    scene = library.load_builtin("single_bridge")
    planner = Planner(scene, SamplerParams(p_plan=0.9), seed=1)
    env = scene.initial_environment()
    rm = build(env)
    tree = PlanTree()
    for i in range(3):
        tree.nodes.append(TreeNode(i, None if i == 0 else 0, env, scene.start, rm, min(i, 1)))
    tree.v_max, tree.v_max_step = [0], 0
    planner.tree = tree
    c = frequencies(lambda: planner._sample_node().id, n)
    checks["planner node p=0.9"] = all(within_3_sigma(c[k], n, p) for k, p in ((0, 0.9), (1, 0.05), (2, 0.05)))

    # triplet choice with normalised weights
    weights = SamplerParams().weights
    buckets = (["plan"], ["g1", "g2"], ["n1", "n2", "n3"])
    c = frequencies(lambda: sample_triplet(rng, buckets, weights)[0], n)
    expect = {"plan": weights[0], "g1": weights[1] / 2, "g2": weights[1] / 2}
    expect.update({k: weights[2] / 3 for k in ("n1", "n2", "n3")})
    checks["triplet weights"] = all(within_3_sigma(c[k], n, p) for k, p in expect.items())
    # empty plan bucket: 0.15 and 0.05 renormalise to 0.75 and 0.25
    c = frequencies(lambda: sample_triplet(rng, ([], ["g"], ["n"]), (0.85, 0.15, 0.05))[0], n)
    checks["triplet empty plan"] = within_3_sigma(c["g"], n, 0.75) and within_3_sigma(c["n"], n, 0.25)
    # weights proportional to bucket size give a uniform draw over all items
    c = frequencies(lambda: sample_triplet(rng, buckets, (1, 2, 3))[0], n)
    checks["triplet uniform"] = all(within_3_sigma(c[k], n, 1 / 6) for k in expect)

    # pose: band branch with probability p_gap, and a uniform plane when the band is gone
    block, p1 = scene.block("b1"), env.plane("P1")
    ps = make_pose_sampler(env, block, p1, ("P1", "P2"), SamplerParams(p_gap=0.9), scene.robot.lateral_step)
    flags, agree = 0, True
    for _ in range(n):
        cfg, in_band = ps.draw(rng)
        flags += in_band
        if cfg is not None:
            agree &= bool(ps.band.contains([cfg.pose[:2]])[0]) == in_band
    checks["pose p_gap=0.9"] = within_3_sigma(flags, n, 0.9) and agree
    ps = make_pose_sampler(env, block, p1, ("P1", "P2"), SamplerParams(delta=0.0), scene.robot.lateral_step)
    left = low = drawn = 0
    for _ in range(n):
        cfg, _ = ps.draw(rng)
        if cfg is None:
            continue
        drawn += 1
        # the free part of P1 is mirror-symmetric about x=7 and y=6
        left += cfg.pose[0] < 7.0
        low += cfg.pose[1] < 6.0
    checks["pose delta=0 uniform"] = ps.band is None and within_3_sigma(left, drawn, 0.5) and within_3_sigma(low, drawn, 0.5)

    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report(capsys, 9, ok, f"{sum(checks.values())}/{len(checks)} distribution checks within 3 sigma {failed or ''}")
    assert ok, failed


def test_c10_soundness(capsys):
    if not RETURNED:
        # run on its own: collect a few plans first
        for name in ("single_bridge", "swap_bridge", "two_tables"):
            run(library.load_builtin(name))
    bad = [(s.scene_id, p.seed) for s, p in RETURNED if not replay(s, p).ok]
    ok = not bad
    report(capsys, 10, ok, f"{len(RETURNED) - len(bad)}/{len(RETURNED)} returned plans replay")
    assert ok, bad[:5]
