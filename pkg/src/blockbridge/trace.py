"""Step-by-step traces of a plan, with optional top-down drawings."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import breadth_first_order

from .planner import Plan, RunStats, _snap, replay
from .roadmap import Roadmap, RoadmapParams, build
from .scene import Environment, Position, Scene


class TraceError(ValueError):
    def __init__(self, messages: list[str]):
        self.messages = messages
        super().__init__("plan does not replay: " + "; ".join(messages))


def _node_near(rm: Roadmap, pos: Position) -> int | None:
    """Snapshot index of the node at ``pos``, else the closest node it attaches to."""
    key = _snap(rm, pos)
    if key is not None:
        return rm.index(key)
    labs = rm.attach(pos)
    if not len(labs):
        return None
    cand = np.nonzero(np.isin(rm.labels, labs) & rm.active_mask())[0]
    xyz = np.column_stack([rm.all_xy()[cand], rm.all_z()[cand]])
    z = rm.env.plane(pos.plane).elevation
    d = np.linalg.norm(xyz - np.array([pos.xy[0], pos.xy[1], z]), axis=1)
    return int(cand[np.argmin(d)])


def _walk(rm: Roadmap, a: Position, b: Position) -> list[list[float]]:
    """Roadmap waypoints from ``a`` to ``b`` (fewest hops), endpoints included."""
    i, j = _node_near(rm, a), _node_near(rm, b)
    za = rm.env.plane(a.plane).elevation
    zb = rm.env.plane(b.plane).elevation
    ends = ([a.xy[0], a.xy[1], za], [b.xy[0], b.xy[1], zb])
    if i is None or j is None:
        return list(ends)
    _, pred = breadth_first_order(rm.graph(), i, directed=False, return_predecessors=True)
    if j != i and pred[j] < 0:
        return list(ends)
    path = [j]
    while path[-1] != i:
        path.append(int(pred[path[-1]]))
    pts = [list(map(float, rm.xyz(k))) for k in reversed(path)]
    return [ends[0]] + pts + [ends[1]]


def _blocks(env: Environment) -> list[dict]:
    out = []
    for b, cfg in zip(env.scene.movable, env.configs):
        if cfg is None:
            continue
        x, y, yaw = cfg.pose
        out.append(
            {
                "id": b.id,
                "pose": [x, y, yaw],
                "base": cfg.base_height,
                "top": cfg.top_height,
                "support": env.support_of(cfg),
                "footprint": cfg.footprint.tolist(),
            }
        )
    return out


def _count_components(rm: Roadmap) -> int:
    return len(np.unique(rm.labels[rm.active_mask()]))


def emit_trace(
    scene: Scene, plan: Plan, run: RunStats | None = None, params: RoadmapParams = RoadmapParams()
) -> dict:
    """Structured trace: one snapshot for the initial state and one per step."""
    report = replay(scene, plan, params)
    if not report.ok:
        raise TraceError(report.messages)
    snaps = []
    where = scene.start
    rm = build(scene.initial_environment(), params)
    snaps.append(
        {
            "index": 0,
            "step": None,
            "blocks": _blocks(rm.env),
            "robot": {"plane": where.plane, "xy": list(where.xy)},
            "waypoints": [],
            "components": _count_components(rm),
            "goal_reachable": rm.connected(where, scene.goal),
        }
    )
    for k, (st, env) in enumerate(zip(plan.steps, report.environments[1:]), 1):
        walk = _walk(rm, where, st.grasp)
        rm = build(env, params)
        carry = _walk(rm, st.grasp, st.drop)
        where = st.drop
        snaps.append(
            {
                "index": k,
                "step": {
                    "block": st.move.block,
                    "from": list(st.move.start.pose) + [st.move.start.base_height],
                    "to": list(st.move.end.pose) + [st.move.end.base_height],
                    "grasp": {"plane": st.grasp.plane, "xy": list(st.grasp.xy)},
                    "drop": {"plane": st.drop.plane, "xy": list(st.drop.xy)},
                },
                "blocks": _blocks(env),
                "robot": {"plane": where.plane, "xy": list(where.xy)},
                "waypoints": walk + carry[1:],
                "components": _count_components(rm),
                "goal_reachable": rm.connected(where, scene.goal),
            }
        )
    doc = {
        "scene_id": scene.scene_id,
        "scene_hash": scene.digest,
        "horizon": plan.horizon,
        "start": {"plane": scene.start.plane, "xy": list(scene.start.xy)},
        "goal": {"plane": scene.goal.plane, "xy": list(scene.goal.xy)},
        "planes": [
            {"id": p.id, "elevation": p.elevation, "boundary": p.boundary.tolist()} for p in scene.fixed_planes
        ],
        "snapshots": snaps,
    }
    if run is not None:
        doc["run"] = {
            "iterations": run.iterations,
            "tree_size": run.tree_size,
            "demotions": run.demotions,
            "provider_calls": run.provider_calls,
            "wall_time": run.wall_time,
        }
    return doc


def save_trace(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def render_snapshot(doc: dict, index: int, path: str | Path) -> None:
    """Top-down drawing of one snapshot; the format follows the file suffix."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Polygon as Patch

    snap = doc["snapshots"][index]
    elev = [p["elevation"] for p in doc["planes"]]
    lo, hi = min(elev), max(elev)
    cmap = plt.get_cmap("Greys")
    fig, ax = plt.subplots(figsize=(7, 5))
    for p in sorted(doc["planes"], key=lambda q: q["elevation"]):
        shade = 0.15 + 0.6 * (p["elevation"] - lo) / max(hi - lo, 1e-9)
        ax.add_patch(Patch(p["boundary"], closed=True, fc=cmap(shade), ec="k", lw=0.6))
        c = np.mean(p["boundary"], axis=0)
        ax.text(c[0], c[1], f"{p['id']}\n{p['elevation']:g}", ha="center", va="center", fontsize=6, color="tab:blue")
    moved = snap["step"]["block"] if snap["step"] else None
    for b in snap["blocks"]:
        colour = "tab:red" if b["id"] == moved else "tab:orange"
        ax.add_patch(Patch(b["footprint"], closed=True, fc=colour, ec="k", lw=0.8, alpha=0.85))
        ax.text(b["pose"][0], b["pose"][1], b["id"], ha="center", va="center", fontsize=6)
    if snap["waypoints"]:
        w = np.array(snap["waypoints"])
        ax.plot(w[:, 0], w[:, 1], "-", color="tab:green", lw=1.2)
    ax.plot(*doc["start"]["xy"], "o", color="tab:green", ms=6)
    ax.plot(*doc["goal"]["xy"], "*", color="tab:purple", ms=10)
    ax.plot(*snap["robot"]["xy"], "s", color="tab:green", ms=5)
    title = f"{doc['scene_id']}  step {index}/{doc['horizon']}"
    if moved:
        title += f"  (moved {moved})"
    ax.set_title(title, fontsize=9)
    ax.set_aspect("equal")
    ax.autoscale_view()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def render_all(doc: dict, stem: str | Path, suffix: str = ".svg") -> list[Path]:
    stem = Path(stem)
    out = []
    for k in range(len(doc["snapshots"])):
        p = stem.with_name(f"{stem.stem}_step{k}{suffix}")
        render_snapshot(doc, k, p)
        out.append(p)
    return out
