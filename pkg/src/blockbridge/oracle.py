"""Brute-force reference solvers over a discretised action space.

Block placements are restricted to a centroid grid with a small yaw set and
robot positions to roadmap nodes, with the same reachability and grasp
checks the planner uses. ``exhaustive_solve`` returns the minimum number of
moves in that space; ``exact_candidate`` lists every (block, plane) pair
with at least one grid pose that closes a given gap.

The search is iterative deepening with an admissible lower bound, so it
returns the same minimum as breadth-first search while expanding far fewer
states. The bound comes from a relaxed problem that keeps every plane
connection any future environment could have: fixed planes joined as in
the block-free roadmap, each resting block's top as it would link with no
other block present, and for every (block, plane) an optional extra top
costing one move whose links are judged from bounding boxes alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capabilities import manip_reach, stripped
from .roadmap import Roadmap, RoadmapParams, build, place_block, remove_block
from .sampler import PoseSampler
from .scene import Block, BlockConfig, Environment, Plane, Scene


class BudgetError(RuntimeError):
    """The search touched more states than allowed."""


@dataclass(frozen=True)
class DiscretizedActionSpace:
    """Grid of placement poses: centroid spacing ``gamma``, yaws from ``yaws``."""

    gamma: float = 0.25
    yaws: tuple[float, ...] = (0.0, np.pi / 2)
    h_cap: int = 6
    max_states: int = 200_000

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.h_cap < 1:
            raise ValueError("h_cap must be at least 1")
        if not self.yaws:
            raise ValueError("need at least one yaw")

    @classmethod
    def for_scene(cls, scene: Scene, **kw) -> "DiscretizedActionSpace":
        kw.setdefault("gamma", scene.robot.lateral_step / 8.0)
        return cls(**kw)

    def grid(self, plane: Plane) -> tuple[np.ndarray, np.ndarray]:
        """Centroids and yaws covering the plane's bounding box."""
        x0, y0, x1, y1 = plane.boundary.bbox
        gx = x0 + self.gamma * np.arange(int(np.floor((x1 - x0) / self.gamma + 1e-9)) + 1)
        gy = y0 + self.gamma * np.arange(int(np.floor((y1 - y0) / self.gamma + 1e-9)) + 1)
        pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        yaws = np.repeat(np.asarray(self.yaws, dtype=float), len(pts))
        return np.tile(pts, (len(self.yaws), 1)), yaws


def _bbox_gap(a, b) -> np.ndarray:
    """Distance between axis-aligned boxes; ``a`` may be an (n, 4) array."""
    a = np.asarray(a, dtype=float)
    dx = np.maximum(np.maximum(b[0] - a[..., 2], a[..., 0] - b[2]), 0.0)
    dy = np.maximum(np.maximum(b[1] - a[..., 3], a[..., 1] - b[3]), 0.0)
    return np.hypot(dx, dy)


@dataclass
class SearchResult:
    horizon: int | None
    moves: list[tuple[str, BlockConfig]] = field(default_factory=list)
    lower_bound: float = 0.0
    expanded: int = 0


class _Relaxation:
    """Lower bound on the moves still needed, per scene.

    Vertices: fixed planes, one "resting top" per movable block and one
    "moved top" per (block, fixed plane). Entering a moved top costs one
    move; everything else is free. The bound is the 0-1 shortest path from
    the robot's component to the goal plane.
    """

    def __init__(self, scene: Scene, params: RoadmapParams):
        self.scene = scene
        self.params = params
        robot = scene.robot
        self.dz, self.dxy = robot.climb_height, robot.lateral_step
        self.planes = scene.fixed_planes
        self.pidx = {p.id: i for i, p in enumerate(self.planes)}
        self.blocks = scene.movable
        nf, nb = len(self.planes), len(self.blocks)
        self.nf, self.nb = nf, nb
        self.n = nf + nb * nf + nb
        self.elev = np.array([p.elevation for p in self.planes])
        self.boxes = np.array([p.boundary.bbox for p in self.planes])
        self.heights = np.array([b.height for b in self.blocks])
        self.goal = self.pidx[scene.goal.plane]
        self.cost = np.zeros(self.n, dtype=bool)
        self.cost[nf : nf + nb * nf] = True

        base = np.zeros((self.n, self.n), dtype=bool)
        # fixed planes joined in the block-free roadmap
        rm0 = build(stripped(scene), params)
        for labs in self._fixed_groups(rm0):
            for a in labs:
                base[a, labs] = True
        # moved tops against fixed planes and against each other
        tops = (self.elev[None, :] + self.heights[:, None]).reshape(-1)  # (nb*nf,)
        owner = np.repeat(np.arange(nb), nf)
        on = np.tile(np.arange(nf), nb)
        gapf = np.array([[_bbox_gap(self.boxes[k], self.boxes[q]) for q in range(nf)] for k in range(nf)])
        mf = (np.abs(tops[:, None] - self.elev[None, :]) < self.dz) & (gapf[on] < self.dxy)
        mm = (np.abs(tops[:, None] - tops[None, :]) < self.dz) & (gapf[on][:, on] < self.dxy)
        mm &= owner[:, None] != owner[None, :]
        ms = slice(nf, nf + nb * nf)
        base[ms, :nf] = mf
        base[:nf, ms] = mf.T
        base[ms, ms] = mm
        self.base = base
        self.tops = tops
        self.on = on
        self.owner = owner
        self._rest_cache: dict[tuple[int, BlockConfig], np.ndarray] = {}

    def _fixed_groups(self, rm: Roadmap):
        st = rm.static
        ids = np.array([self.pidx[p.id] for p in st.planes])
        plane_of = ids[st.plane]
        act = np.nonzero(rm.static_active)[0]
        out = []
        for lab in np.unique(rm.labels[act]):
            idx = act[rm.labels[act] == lab]
            out.append(np.unique(plane_of[idx]))
        return out

    def resting_links(self, m: int, cfg: BlockConfig) -> np.ndarray:
        """Fixed planes the top of block ``m`` links to with no other block present."""
        key = (m, cfg)
        got = self._rest_cache.get(key)
        if got is None:
            configs = [None] * self.nb
            configs[m] = cfg
            rm = build(Environment(self.scene, tuple(configs)), self.params)
            got = np.zeros(self.nf, dtype=bool)
            top = rm.labels[np.arange(rm.offsets[m], rm.offsets[m + 1])]
            st = rm.static
            ids = np.array([self.pidx[p.id] for p in st.planes])
            hit = np.isin(rm.labels[: st.n], top) & rm.static_active
            got[np.unique(ids[st.plane[hit]])] = True
            self._rest_cache[key] = got
        return got

    def rest(self, m: int) -> int:
        return self.nf + self.nb * self.nf + m

    def graph(self, env: Environment) -> np.ndarray:
        """Adjacency with the resting tops of ``env`` filled in."""
        g = self.base.copy()
        nf = self.nf
        ms = slice(nf, nf + self.nb * nf)
        rest = []
        for m, cfg in enumerate(env.configs):
            if cfg is None:
                continue
            v = self.rest(m)
            links = self.resting_links(m, cfg)
            g[v, :nf] = links
            g[:nf, v] = links
            box = cfg.footprint.bbox
            near = (np.abs(self.tops - cfg.top_height) < self.dz) & (_bbox_gap(self.boxes[self.on], box) < self.dxy)
            near &= self.owner != m
            g[v, ms] = near
            g[ms, v] = near
            rest.append((v, cfg))
        for i, (v, a) in enumerate(rest):
            for w, b in rest[i + 1 :]:
                if abs(a.top_height - b.top_height) < self.dz and _bbox_gap(a.footprint.bbox, b.footprint.bbox) < self.dxy:
                    g[v, w] = g[w, v] = True
        return g

    def with_top(self, g: np.ndarray, env: Environment, m: int, cfg: BlockConfig) -> np.ndarray:
        """``g`` with block ``m`` resting at ``cfg``, its links judged by boxes."""
        g = g.copy()
        v = self.rest(m)
        box = cfg.footprint.bbox
        top = cfg.top_height
        row = np.zeros(self.n, dtype=bool)
        row[: self.nf] = (np.abs(self.elev - top) < self.dz) & (_bbox_gap(self.boxes, box) < self.dxy)
        ms = slice(self.nf, self.nf + self.nb * self.nf)
        row[ms] = (np.abs(self.tops - top) < self.dz) & (_bbox_gap(self.boxes[self.on], box) < self.dxy) & (self.owner != m)
        for w, other in enumerate(env.configs):
            if w != m and other is not None:
                if abs(other.top_height - top) < self.dz and _bbox_gap(other.footprint.bbox, box) < self.dxy:
                    row[self.rest(w)] = True
        g[v] = row
        g[:, v] = row
        return g

    def start(self, rm: Roadmap, labels) -> np.ndarray:
        """Relaxed vertices touched by the given roadmap components."""
        s = np.zeros(self.n, dtype=bool)
        st = rm.static
        ids = np.array([self.pidx[p.id] for p in st.planes])
        hit = np.isin(rm.labels[: st.n], labels) & rm.static_active
        s[np.unique(ids[st.plane[hit]])] = True
        dyn = np.nonzero(np.isin(rm.labels[st.n :], labels))[0]
        for m in np.unique(rm.dyn_owner[dyn]):
            s[self.rest(int(m))] = True
        return s

    def bound(self, g: np.ndarray, start: np.ndarray) -> float:
        reached = start.copy()
        free = ~self.cost
        k = 0
        while True:
            while True:
                grow = reached | (g[reached].any(axis=0) & free)
                if (grow == reached).all():
                    break
                reached = grow
            if reached[self.goal]:
                return float(k)
            nxt = g[reached].any(axis=0) & ~reached
            if not nxt.any():
                return float("inf")
            reached |= nxt
            k += 1


class _Search:
    def __init__(self, scene: Scene, space: DiscretizedActionSpace, params: RoadmapParams):
        self.scene = scene
        self.space = space
        self.params = params
        self.relax = _Relaxation(scene, params)
        self.expanded = 0
        self.grids = {p.id: space.grid(p) for p in scene.fixed_planes}

    def tick(self):
        self.expanded += 1
        if self.expanded > self.space.max_states:
            raise BudgetError(f"exhaustive search exceeded {self.space.max_states} states")

    def goal_label(self, rm: Roadmap) -> np.ndarray:
        return rm.labels_at(self.scene.goal)

    def h(self, rm: Roadmap, labels) -> float:
        return self.relax.bound(self.relax.graph(rm.env), self.relax.start(rm, labels))

    def poses(self, env: Environment, block: Block, plane: Plane) -> list[BlockConfig]:
        pts, yaws = self.grids[plane.id]
        ps = PoseSampler(env, block, plane, None, 0.0, 0)
        ok = ps.fit_mask(pts, yaws)
        return [block.at(x, y, t, plane.elevation) for (x, y), t in zip(pts[ok], yaws[ok])]

    def children(self, rm: Roadmap, labels: tuple[int, ...], g_cost: int, bound: float):
        """Yield ``(h, block, cfg, child_rm, child_labels)`` with ``g + 1 + h <= bound``."""
        relax = self.relax
        scene = self.scene
        g_par = relax.graph(rm.env)
        start = relax.start(rm, labels)
        for m, block in enumerate(scene.movable):
            cfg0 = rm.env.configs[m]
            if cfg0 is None:
                continue
            grasp = manip_reach(rm, block.id)
            if len(grasp):
                grasp = grasp[np.isin(rm.labels[[rm.index(int(k)) for k in grasp]], labels)]
            if not len(grasp):
                continue
            rm_wo = remove_block(rm, block.id)
            for plane in scene.fixed_planes:
                # optimistic: the block's new top linked by the placement plane's box
                pre = g_par.copy()
                v = relax.rest(m)
                pre[v, :] = pre[:, v] = False
                k = relax.nf + m * relax.nf + relax.pidx[plane.id]
                pre[v] = g_par[k]
                pre[:, v] = g_par[k]
                pre[v, v] = False
                if g_cost + 1 + relax.bound(pre, start) > bound:
                    continue
                sigs: dict[bytes, float] = {}
                for cfg in self.poses(rm_wo.env, block, plane):
                    if cfg == cfg0:
                        continue
                    gp = relax.with_top(g_par, rm_wo.env, m, cfg)
                    key = np.packbits(gp[relax.rest(m)]).tobytes()
                    hb = sigs.get(key)
                    if hb is None:
                        hb = sigs[key] = relax.bound(gp, start)
                    if g_cost + 1 + hb > bound:
                        continue
                    self.tick()
                    rm2 = place_block(rm_wo, block.id, cfg)
                    drops = manip_reach(rm2, block.id)
                    if not len(drops):
                        continue
                    glabs = np.concatenate([rm2.labels_at(int(x)) for x in grasp])
                    dlabs = rm2.labels[[rm2.index(int(x)) for x in drops]]
                    for lab in np.unique(dlabs[np.isin(dlabs, glabs)]):
                        hc = self.h(rm2, (int(lab),))
                        if g_cost + 1 + hc <= bound:
                            yield hc, block.id, cfg, rm2, (int(lab),)

    def run(self) -> SearchResult:
        scene = self.scene
        rm = build(scene.initial_environment(), self.params)
        labs = rm.labels_at(scene.start)
        if not len(labs):
            return SearchResult(None)
        if len(np.intersect1d(labs, self.goal_label(rm))):
            return SearchResult(0)
        label = tuple(int(x) for x in labs)
        h0 = self.h(rm, label)
        bound = h0
        while bound <= self.space.h_cap:
            seen: dict = {}
            path: list[tuple[str, BlockConfig]] = []
            found, nxt = self._dfs(rm, label, 0, bound, path, seen)
            if found:
                return SearchResult(len(path), path, h0, self.expanded)
            if nxt == float("inf"):
                break
            bound = nxt
        return SearchResult(None, [], h0, self.expanded)

    def _dfs(self, rm, labels, g_cost, bound, path, seen):
        key = (rm.env.configs, self._comp_key(rm, labels))
        if seen.get(key, bound + 1) <= g_cost:
            return False, float("inf")
        seen[key] = g_cost
        if len(np.intersect1d(labels, self.goal_label(rm))):
            return True, g_cost
        if g_cost >= bound:
            return False, float("inf")
        nxt = float("inf")
        for _, bid, cfg, rm2, lab in self.children(rm, labels, g_cost, bound):
            path.append((bid, cfg))
            found, t = self._dfs(rm2, lab, g_cost + 1, bound, path, seen)
            if found:
                return True, t
            path.pop()
            nxt = min(nxt, t)
        # children pruned by the bound could still lead somewhere at a higher bound
        return False, min(nxt, bound + 1)

    @staticmethod
    def _comp_key(rm: Roadmap, labels) -> int:
        return int(rm.keys(np.nonzero(np.isin(rm.labels, labels))[0]).min())


def exhaustive_search(
    scene: Scene, space: DiscretizedActionSpace | None = None, params: RoadmapParams = RoadmapParams()
) -> SearchResult:
    """Minimum-horizon search; also returns the moves found and the initial bound."""
    space = space or DiscretizedActionSpace.for_scene(scene)
    return _Search(scene, space, params).run()


def exhaustive_solve(
    scene: Scene, space: DiscretizedActionSpace | None = None, params: RoadmapParams = RoadmapParams()
) -> int | None:
    """Minimum number of moves over the discrete space, or ``None`` within ``h_cap``."""
    return exhaustive_search(scene, space, params).horizon


def lower_bound(scene: Scene, params: RoadmapParams = RoadmapParams()) -> float:
    """Relaxed lower bound on the horizon of any plan, continuous poses included."""
    relax = _Relaxation(scene, params)
    rm = build(scene.initial_environment(), params)
    labs = rm.labels_at(scene.start)
    if not len(labs):
        return float("inf")
    if len(np.intersect1d(labs, rm.labels_at(scene.goal))):
        return 0.0
    return relax.bound(relax.graph(rm.env), relax.start(rm, labs))


def exact_candidate(
    plane_i: str,
    plane_j: str,
    scene: Scene,
    space: DiscretizedActionSpace | None = None,
    params: RoadmapParams = RoadmapParams(),
) -> frozenset[tuple[str, str]]:
    """Every (block, plane) with a grid pose whose top closes the gap directly.

    Starting from the initial environment, the block is moved alone; the
    placement counts when the two planes become connected and its top is
    within one step (height and bounding-box distance) of both.
    """
    space = space or DiscretizedActionSpace.for_scene(scene)
    rm0 = build(scene.initial_environment(), params)
    if not rm0.gap(plane_i, plane_j):
        return frozenset()
    planes = {p.id: p for p in scene.fixed_planes}
    pi, pj = planes[plane_i], planes[plane_j]
    robot = scene.robot
    search = _Search.__new__(_Search)
    search.grids = {p.id: space.grid(p) for p in scene.fixed_planes}
    out = set()
    for block in scene.movable:
        rm_wo = remove_block(rm0, block.id)
        for pk in scene.fixed_planes:
            top = pk.elevation + block.height
            if abs(top - pi.elevation) >= robot.climb_height or abs(top - pj.elevation) >= robot.climb_height:
                continue
            for cfg in _Search.poses(search, rm_wo.env, block, pk):
                box = cfg.footprint.bbox
                if _bbox_gap(box, pi.boundary.bbox) >= robot.lateral_step:
                    continue
                if _bbox_gap(box, pj.boundary.bbox) >= robot.lateral_step:
                    continue
                if not place_block(rm_wo, block.id, cfg).gap(plane_i, plane_j):
                    out.add((block.id, pk.id))
                    break
    return frozenset(out)
