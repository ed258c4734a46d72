"""Command-line entry point.

Exit codes: 0 solved / valid, 2 planner failure or invalid plan, 1 usage or
parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

import yaml

from . import library
from .bench import parse_bench_config, run_benchmark, write_report
from .generator import BenchmarkConfig, GenerationError, generate
from .planner import PlanError, load_plan, plan, replay, save_plan
from .sampler import SamplerParams
from .scene import Scene, SceneError, load_scene, save_scene
from .symbolic import CommandProvider
from .trace import TraceError, emit_trace, render_all, save_trace

OK, FAIL, USAGE = 0, 2, 1


class UsageError(Exception):
    pass


def _scene(arg: str) -> Scene:
    p = Path(arg)
    if p.exists():
        return load_scene(p)
    if arg in library.BUILTIN:
        return library.load_builtin(arg)
    raise UsageError(f"no scene file or built-in scene named {arg!r}")


def _prob(s: str) -> float:
    v = float(s)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{s} is not in [0, 1]")
    return v


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blockbridge", description="Plan block placements that let a robot reach a goal.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="plan on a scene")
    s.add_argument("--scene", required=True, help="scene file or built-in name")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=["bfs", "uniform", "external"], default="bfs")
    s.add_argument("--p-plan", type=_prob)
    s.add_argument("--p1", type=_prob)
    s.add_argument("--p2", type=_prob)
    s.add_argument("--p3", type=_prob)
    s.add_argument("--p-gap", type=_prob)
    s.add_argument("--delta", type=float)
    s.add_argument("--kmax", type=int)
    s.add_argument("--n-trials", type=int)
    s.add_argument("--no-replan", action="store_true", help="never demote failing plan steps")
    s.add_argument("--provider", help="command for external mode; reads a request on stdin, writes triplets")
    s.add_argument("--out", help="write the plan here (JSON lines)")

    r = sub.add_parser("replay", help="check a plan against a scene")
    r.add_argument("--scene", required=True)
    r.add_argument("--plan", required=True)

    b = sub.add_parser("bench", help="run a benchmark config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)

    t = sub.add_parser("trace", help="per-step snapshots of a plan")
    t.add_argument("--scene", required=True)
    t.add_argument("--plan", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--svg", action="store_true", help="also draw every step next to the trace file")

    g = sub.add_parser("gen", help="generate a certified benchmark scene")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    return ap


def _params(a) -> SamplerParams:
    kw = {"mode": a.mode, "replan": not a.no_replan}
    for name, key in [
        ("p_plan", "p_plan"),
        ("p1", "p1"),
        ("p2", "p2"),
        ("p3", "p3"),
        ("p_gap", "p_gap"),
        ("delta", "delta"),
        ("kmax", "k_max"),
        ("n_trials", "n_trials"),
    ]:
        v = getattr(a, name)
        if v is not None:
            kw[key] = v
    try:
        return SamplerParams(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_solve(a) -> int:
    scene = _scene(a.scene)
    params = _params(a)
    provider = None
    if params.mode == "external":
        if not a.provider:
            raise UsageError("external mode needs --provider")
        provider = CommandProvider(shlex.split(a.provider))
    res = plan(scene, params, seed=a.seed, provider=provider)
    st = res.stats
    info = {
        "solved": res.solved,
        "horizon": st.horizon,
        "iterations": st.iterations,
        "tree_size": st.tree_size,
        "provider_calls": st.provider_calls,
        "demotions": st.demotions,
        "wall_time": round(st.wall_time, 3),
    }
    print(json.dumps(info))
    if not res.solved:
        return FAIL
    res.plan.scene_id = scene.scene_id
    res.plan.scene_hash = scene.digest
    res.plan.seed = a.seed
    if a.out:
        save_plan(res.plan, a.out)
    return OK


def cmd_replay(a) -> int:
    scene = _scene(a.scene)
    p = load_plan(a.plan, scene)
    rep = replay(scene, p)
    for m in rep.messages:
        print(m)
    print("valid" if rep.ok else "invalid")
    return OK if rep.ok else FAIL


def cmd_trace(a) -> int:
    scene = _scene(a.scene)
    p = load_plan(a.plan, scene)
    try:
        doc = emit_trace(scene, p)
    except TraceError as e:
        for m in e.messages:
            print(m, file=sys.stderr)
        return FAIL
    save_trace(doc, a.out)
    if a.svg:
        for f in render_all(doc, a.out, ".svg"):
            print(f)
    return OK


def cmd_bench(a) -> int:
    path = Path(a.config)
    spec = parse_bench_config(path.read_text(), base=path.parent)
    scenes = [load_scene(f) for f in spec.scene_files] + [library.load_builtin(n) for n in spec.builtins]
    records, table = run_benchmark(spec.config, spec.modes, scenes=scenes or None)
    write_report(records, a.out)
    print(table, end="")
    return OK


def _gen_config(path: Path) -> BenchmarkConfig:
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise UsageError("generator config must be a mapping")
    fam = doc.get("family", doc)
    try:
        return BenchmarkConfig(
            n_planes=int(fam["n_planes"]),
            n_blocks=int(fam["n_blocks"]),
            h_min=int(fam["h_min"]),
            attempts=int(doc.get("attempts", 100)),
            name=str(doc.get("name", "")),
        )
    except KeyError as e:
        raise UsageError(f"generator config is missing {e}") from None


def cmd_gen(a) -> int:
    cfg = _gen_config(Path(a.config))
    try:
        scene = generate(cfg, a.seed)
    except GenerationError as e:
        print(str(e), file=sys.stderr)
        return FAIL
    save_scene(scene, a.out)
    print(scene.scene_id)
    return OK


COMMANDS = {"solve": cmd_solve, "replay": cmd_replay, "bench": cmd_bench, "trace": cmd_trace, "gen": cmd_gen}


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return OK if e.code == 0 else USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[a.cmd](a)
    except (UsageError, SceneError, PlanError, ValueError, OSError, yaml.YAMLError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
