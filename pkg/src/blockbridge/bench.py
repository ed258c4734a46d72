"""Benchmark runs, aggregation and report figures."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .capabilities import CandidateModel
from .generator import BenchmarkConfig, generate
from .planner import plan, replay
from .sampler import SamplerParams
from .scene import Scene

MODES = ("bfs", "uniform", "external")


@dataclass(frozen=True)
class RunRecord:
    scene_id: str
    seed: int
    mode: str
    wall_time: float
    iterations: int
    tree_size: int
    horizon: int | None
    demotions: int
    provider_invocations: int
    replay_ok: bool | None = None

    @property
    def solved(self) -> bool:
        return self.horizon is not None


def run_one(
    scene: Scene,
    seed: int,
    params: SamplerParams,
    candidates: CandidateModel | None = None,
    provider=None,
    check: bool = True,
) -> RunRecord:
    t0 = time.perf_counter()
    res = plan(scene, params, seed=seed, candidates=candidates, provider=provider)
    wall = time.perf_counter() - t0
    ok = bool(replay(scene, res.plan)) if (check and res.plan is not None) else None
    return RunRecord(
        scene.scene_id,
        seed,
        params.mode,
        wall,
        res.stats.iterations,
        res.stats.tree_size,
        res.plan.horizon if res.plan is not None else None,
        res.stats.demotions,
        res.stats.provider_calls,
        ok,
    )


def run_benchmark(
    config: BenchmarkConfig,
    modes: Sequence[str] = ("bfs",),
    scenes: Sequence[Scene] | None = None,
    provider=None,
) -> tuple[list[RunRecord], str]:
    """Run every (scene, seed, mode) cell; returns the records and the table."""
    if scenes is None:
        scenes = [generate(config, s) for s in config.scene_seeds]
    records = []
    for scene in scenes:
        for seed in config.seeds:
            for mode in modes:
                params = SamplerParams(**{**config.params, "mode": mode})
                records.append(run_one(scene, seed, params, provider=provider if mode == "external" else None))
    records = sort_records(records)
    return records, aggregate(records)


def sort_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: (r.scene_id, r.seed, r.mode))


def _mean(xs) -> str:
    xs = list(xs)
    return f"{sum(xs) / len(xs):.3f}" if xs else "N/A"


def aggregate(records: Iterable[RunRecord]) -> str:
    """Plain-text table, one row per (scene, mode); averages over solved runs.

    A pure function of the records: the same records in any order give the
    same bytes.
    """
    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in sort_records(records):
        groups.setdefault((r.scene_id, r.mode), []).append(r)
    head = ["scene", "mode", "runs", "solved", "time_s", "iterations", "horizon", "queries", "demotions"]
    rows = [head]
    for (sid, mode), rs in sorted(groups.items()):
        ok = [r for r in rs if r.solved]
        rows.append(
            [
                sid,
                mode,
                str(len(rs)),
                f"{len(ok)}/{len(rs)}",
                _mean(r.wall_time for r in ok),
                _mean(r.iterations for r in ok),
                _mean(r.horizon for r in ok),
                _mean(r.provider_invocations for r in ok),
                _mean(r.demotions for r in ok),
            ]
        )
    width = [max(len(row[i]) for row in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, width)).rstrip() for row in rows) + "\n"


def records_csv(records: Iterable[RunRecord]) -> str:
    buf = io.StringIO()
    names = [f.name for f in fields(RunRecord)]
    w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    w.writeheader()
    for r in sort_records(records):
        w.writerow(asdict(r))
    return buf.getvalue()


def read_records(text: str) -> list[RunRecord]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(
            RunRecord(
                row["scene_id"],
                int(row["seed"]),
                row["mode"],
                float(row["wall_time"]),
                int(row["iterations"]),
                int(row["tree_size"]),
                int(row["horizon"]) if row["horizon"] else None,
                int(row["demotions"]),
                int(row["provider_invocations"]),
                {"True": True, "False": False}.get(row["replay_ok"]),
            )
        )
    return out


def plot_records(records: Sequence[RunRecord], path: str | Path) -> None:
    """Bar chart of success rate and mean iterations per (scene, mode)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups: dict[tuple[str, str], list[RunRecord]] = {}
    for r in sort_records(records):
        groups.setdefault((r.scene_id, r.mode), []).append(r)
    labels = [f"{s}\n{m}" for s, m in groups]
    rate = [sum(r.solved for r in rs) / len(rs) for rs in groups.values()]
    iters = [sum(r.iterations for r in rs) / len(rs) for rs in groups.values()]
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(max(6, 0.9 * len(labels)), 6), sharex=True)
    xs = range(len(labels))
    a1.bar(xs, rate, color="tab:green")
    a1.set_ylabel("success rate")
    a1.set_ylim(0, 1.05)
    a2.bar(xs, iters, color="tab:blue")
    a2.set_ylabel("mean iterations")
    a2.set_xticks(list(xs))
    a2.set_xticklabels(labels, fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# --------------------------------------------------------------------------
# config files


@dataclass(frozen=True)
class BenchPlan:
    """What a ``bench`` config file asks for."""

    config: BenchmarkConfig
    modes: tuple[str, ...]
    scene_files: tuple[str, ...] = ()
    builtins: tuple[str, ...] = ()


def parse_bench_config(text: str, base: Path | None = None) -> BenchPlan:
    """Read a YAML benchmark description.

    Keys: ``family`` (n_planes, n_blocks, h_min), ``scene_seeds``, ``seeds``,
    ``modes``, ``params`` (sampler overrides), and optionally ``scenes``
    (file paths) or ``builtin`` (library scene names) instead of a family.
    """
    doc = yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ValueError("benchmark config must be a mapping")
    known = {"family", "scene_seeds", "seeds", "modes", "params", "scenes", "builtin", "name", "attempts"}
    extra = set(doc) - known
    if extra:
        raise ValueError(f"unknown benchmark keys: {sorted(extra)}")
    fam = doc.get("family") or {}
    if not fam and not doc.get("scenes") and not doc.get("builtin"):
        raise ValueError("benchmark config needs a family, scenes or builtin entry")
    params = dict(doc.get("params") or {})
    allowed = {f.name for f in fields(SamplerParams)} - {"mode"}
    bad = set(params) - allowed
    if bad:
        raise ValueError(f"unknown sampler parameters: {sorted(bad)}")
    SamplerParams(**params)
    cfg = BenchmarkConfig(
        n_planes=int(fam.get("n_planes", 1)),
        n_blocks=int(fam.get("n_blocks", 0)),
        h_min=int(fam.get("h_min", 0)),
        seeds=tuple(int(s) for s in doc.get("seeds", [0])),
        scene_seeds=tuple(int(s) for s in doc.get("scene_seeds", [0])),
        params=params,
        attempts=int(doc.get("attempts", 100)),
        name=str(doc.get("name", "")),
    )
    modes = tuple(doc.get("modes", ["bfs"]))
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r}")
    files = tuple(str((base / f) if base else f) for f in doc.get("scenes", []) or [])
    return BenchPlan(cfg, modes, files, tuple(doc.get("builtin", []) or []))


def write_report(records: Sequence[RunRecord], out: str | Path) -> dict[str, Path]:
    """Write records, the table, a JSON summary and a figure into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out / "records.csv",
        "table": out / "table.txt",
        "summary": out / "summary.json",
        "figure": out / "summary.png",
    }
    paths["records"].write_text(records_csv(records))
    paths["table"].write_text(aggregate(records))
    summary = {
        "runs": len(records),
        "solved": sum(r.solved for r in records),
        "replay_failures": sum(r.replay_ok is False for r in records),
    }
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    plot_records(records, paths["figure"])
    return paths


def with_params(config: BenchmarkConfig, **params) -> BenchmarkConfig:
    return replace(config, params={**config.params, **params})
