"""Robot capability queries over a roadmap snapshot.

Reachability, grasp sets, gaps between planes, and the height-rule
candidate generator that proposes which block placements could bridge a
gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.sparse.csgraph import breadth_first_order

from .roadmap import Roadmap, RoadmapParams, build, nodes_near
from .scene import Environment, Scene

Pair = tuple[str, str]


def navig_reach(rm: Roadmap, a, b) -> bool:
    """Whether the robot can walk from ``a`` to ``b`` (node keys or positions)."""
    return rm.connected(a, b)


def manip_reach(rm: Roadmap, block_id: str) -> np.ndarray:
    """Node keys from which ``block_id`` can be grasped, sorted.

    Nodes on the block's own top are excluded.
    """
    cfg = rm.env.config(block_id)
    if cfg is None:
        raise KeyError(f"block {block_id} is not in the environment")
    idx = nodes_near(rm, cfg.footprint, rm.static.scene.robot.manip_radius, exclude_block=block_id)
    return np.sort(rm.keys(idx))


def gap(rm: Roadmap, plane_i: str, plane_j: str) -> bool:
    """True when no roadmap path joins the two (distinct) planes."""
    if plane_i == plane_j:
        raise ValueError(f"gap needs two different planes, got {plane_i} twice")
    return rm.gap(plane_i, plane_j)


def pair(a: str, b: str, scene: Scene) -> Pair:
    """Canonical (declaration-ordered) form of an unordered plane pair."""
    order = {p.id: i for i, p in enumerate(scene.fixed_planes)}
    return (a, b) if order[a] <= order[b] else (b, a)


def _bbox_gap(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    dx = max(bx0 - ax1, ax0 - bx1, 0.0)
    dy = max(by0 - ay1, ay0 - by1, 0.0)
    return float(np.hypot(dx, dy))


@dataclass(frozen=True)
class CandidateModel:
    """Height-rule candidate generator with optional corruption.

    ``inject`` adds false positives and ``drop`` removes entries; both map a
    plane pair to ``(block, plane)`` tuples.
    """

    inject: tuple[tuple[Pair, tuple[str, str]], ...] = ()
    drop: tuple[tuple[Pair, tuple[str, str]], ...] = ()

    def __call__(self, scene: Scene, plane_i: str, plane_j: str) -> tuple[tuple[str, str], ...]:
        key = pair(plane_i, plane_j, scene)
        base = list(height_rule(scene, *key))
        removed = {bp for k, bp in self.drop if pair(*k, scene) == key}
        out = [bp for bp in base if bp not in removed]
        # injected entries go first so the symbolic search meets them early
        extra = [bp for k, bp in self.inject if pair(*k, scene) == key and bp not in out]
        return tuple(extra + out)


@lru_cache(maxsize=4096)
def height_rule(scene: Scene, plane_i: str, plane_j: str) -> tuple[tuple[str, str], ...]:
    """Blocks and fixed planes whose resulting top is within climbing range of both planes.

    A coarse bounding-box test also requires the placement plane to be
    within one lateral step of each target. Never misses a real direct
    bridge, may include placements that cannot work.
    """
    robot = scene.robot
    planes = {p.id: p for p in scene.fixed_planes}
    pi, pj = planes[plane_i], planes[plane_j]
    out = []
    for b in scene.movable:
        for pk in scene.fixed_planes:
            e = pk.elevation + b.height
            if abs(e - pi.elevation) >= robot.climb_height or abs(e - pj.elevation) >= robot.climb_height:
                continue
            bb = pk.boundary.bbox
            if _bbox_gap(bb, pi.boundary.bbox) >= robot.lateral_step:
                continue
            if _bbox_gap(bb, pj.boundary.bbox) >= robot.lateral_step:
                continue
            out.append((b.id, pk.id))
    return tuple(out)


def candidate(scene: Scene, plane_i: str, plane_j: str, model: CandidateModel | None = None):
    return (model or CandidateModel())(scene, plane_i, plane_j)


def stripped(scene: Scene) -> Environment:
    """The environment with every movable block removed."""
    return Environment(scene, tuple(None for _ in scene.movable))


@lru_cache(maxsize=256)
def intent_pairs(scene: Scene, params: RoadmapParams = RoadmapParams()) -> tuple[Pair, ...]:
    """Fixed-plane pairs that are gapped initially or once all movable blocks are gone."""
    rms = [build(scene.initial_environment(), params), build(stripped(scene), params)]
    planes = [p.id for p in scene.fixed_planes]
    out = []
    for a in range(len(planes)):
        for b in range(a + 1, len(planes)):
            if any(gap(rm, planes[a], planes[b]) for rm in rms):
                out.append((planes[a], planes[b]))
    return tuple(out)


@lru_cache(maxsize=256)
def structural_links(scene: Scene, params: RoadmapParams = RoadmapParams()) -> frozenset[Pair]:
    """Fixed-plane pairs connected with every movable block removed."""
    rm = build(stripped(scene), params)
    planes = [p.id for p in scene.fixed_planes]
    out = set()
    for a in planes:
        for b in planes:
            if a != b and not gap(rm, a, b):
                out.add(pair(a, b, scene))
    return frozenset(out)


def robot_plane(rm: Roadmap, where) -> str:
    """Fixed plane the robot counts as standing on.

    On a block top this is the fixed plane reachable in the fewest roadmap
    hops, or the plane under the block when none is reachable.
    """
    scene = rm.static.scene
    if not isinstance(where, (int, np.integer)):
        pid = where.plane
        if pid in scene.movable_index:
            tops = rm.plane_nodes(pid)
            d = np.hypot(*(rm.dyn_xy[tops - rm.static.n] - where.xy).T)
            start = int(tops[np.argmin(d)])
        else:
            return pid
    else:
        start = rm.index(int(where))
        pid = rm.plane_id(start)
        if pid not in scene.movable_index:
            return pid
    order = breadth_first_order(rm.graph(), start, directed=False, return_predecessors=False)
    fixed = order[order < rm.static.n]
    if len(fixed):
        return rm.plane_id(int(fixed[0]))
    return rm.env.support_of(rm.env.config(pid)) or scene.fixed_planes[0].id


def support_plane(env: Environment, block_id: str) -> str:
    cfg = env.config(block_id)
    sup = env.support_of(cfg)
    if sup is None:
        raise ValueError(f"block {block_id} does not rest on a fixed plane")
    return sup


def all_triplets(scene: Scene, pairs: Iterable[Pair], model: CandidateModel | None = None):
    """Every (block, plane, intent) triplet: no-intent ones plus candidate ones."""
    from .symbolic import Triplet

    out = []
    for b in scene.movable:
        for p in scene.fixed_planes:
            out.append(Triplet(b.id, p.id, None))
    for g in pairs:
        for b, p in candidate(scene, g[0], g[1], model):
            out.append(Triplet(b, p, g))
    return out
