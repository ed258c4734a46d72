"""Probabilistic roadmap over the multi-level environment.

The roadmap has two layers. The *static* layer holds nodes and candidate
edges on the fixed planes, computed once per scene. The *dynamic* layer
holds the top-surface nodes of movable blocks and everything that depends
on where those blocks are: which static nodes they cover, which static
edges they cut, and the edges their tops add. A :class:`Roadmap` snapshot
is a static layer plus one dynamic layer plus connected-component labels.

Node positions are pure functions of ``(scene, plane or block, cell,
seed)`` so two roadmaps built for the same environment are identical
regardless of the path taken to reach it.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import Polygon2D, contains, distance_to, segments_cross, transform_points
from .scene import BlockConfig, Environment, Plane, Position, Scene

EPS = 1e-9


@dataclass(frozen=True)
class RoadmapParams:
    connect_radius: float = 1.0
    jitter: float = 0.15
    anchor_inset: float = 0.1
    min_nodes: int = 9
    seed: int = 0

    @property
    def spacing(self) -> float:
        return self.connect_radius / np.sqrt(2.0)


def _seed_for(*parts) -> np.random.Generator:
    h = hashlib.sha256("|".join(map(str, parts)).encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "little"))


def sample_surface(poly: Polygon2D, params: RoadmapParams, *key) -> np.ndarray:
    """Jittered grid plus inset boundary anchors covering ``poly``.

    The grid is fitted to the polygon's bounding box and the jitter comes
    from a generator keyed on ``key``, so the result is deterministic.
    """
    x0, y0, x1, y1 = poly.bbox
    s = params.spacing
    nx = max(int(np.ceil((x1 - x0) / s)), 1)
    ny = max(int(np.ceil((y1 - y0) / s)), 1)
    while True:
        cw, ch = (x1 - x0) / nx, (y1 - y0) / ny
        gx, gy = np.meshgrid(x0 + (np.arange(nx) + 0.5) * cw, y0 + (np.arange(ny) + 0.5) * ch, indexing="ij")
        rng = _seed_for("grid", params.seed, nx, ny, *key)
        jit = rng.uniform(-params.jitter, params.jitter, size=(nx * ny, 2)) * [cw, ch]
        grid = np.stack([gx.ravel(), gy.ravel()], axis=1) + jit
        grid = grid[contains(poly, grid, tol=-params.anchor_inset * 0.5)]
        if len(grid) >= params.min_nodes or min(cw, ch) < 1e-3:
            break
        nx, ny = nx + 1, ny + 1
    v = poly.vertices
    anchors = []
    c = poly.centroid
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        e = b - a
        ln = float(np.hypot(*e))
        if ln < EPS:
            continue
        inward = np.array([-e[1], e[0]]) / ln
        k = max(int(np.ceil(ln / s)), 1)
        t = (np.arange(k) + 0.5) / k
        pts = a + t[:, None] * e + inward * min(params.anchor_inset, 0.25 * float(np.hypot(*(c - a))))
        anchors.append(pts)
    anchors = np.vstack(anchors)
    anchors = anchors[contains(poly, anchors)]
    return np.vstack([grid, anchors])


def _zband_hits(zlo, zhi, base, top):
    return (zhi > base - EPS) & (zlo < top - EPS)


@dataclass(frozen=True, eq=False)
class StaticLayer:
    scene: Scene
    params: RoadmapParams
    planes: tuple[Plane, ...]
    xy: np.ndarray  # (n, 2)
    z: np.ndarray
    plane: np.ndarray  # plane index per node
    support: np.ndarray  # scene block index supporting each node, -1 for ground
    edges: np.ndarray  # (m, 2)
    edge_mid: np.ndarray
    tree: cKDTree
    mid_tree: cKDTree
    plane_nodes: tuple[np.ndarray, ...]
    # per movable block: local top-node offsets and their intra-top edges
    top_local: tuple[np.ndarray, ...]
    top_edges: tuple[np.ndarray, ...]
    key_stride: int

    @property
    def n(self) -> int:
        return len(self.xy)

    def plane_index(self, plane_id: str) -> int:
        for i, p in enumerate(self.planes):
            if p.id == plane_id:
                return i
        raise KeyError(plane_id)


def _collides(scene: Scene, cfgs, p0, p1, z0, z1, s0, s1) -> np.ndarray:
    """Mask of 3D segments that pass through any of ``cfgs``.

    ``cfgs`` is a list of ``(scene_block_index, BlockConfig)``; ``s0``/``s1``
    are the supporting block of each endpoint, which are ignored.
    """
    hit = np.zeros(len(p0), dtype=bool)
    if len(p0) == 0:
        return hit
    zlo, zhi = np.minimum(z0, z1), np.maximum(z0, z1)
    lo = np.minimum(p0, p1)
    hi = np.maximum(p0, p1)
    gx0, gy0 = lo.min(axis=0)
    gx1, gy1 = hi.max(axis=0)
    gz0, gz1 = zlo.min(), zhi.max()
    for bi, cfg in cfgs:
        bx0, by0, bx1, by1 = cfg.footprint.bbox
        # whole-batch bounding box first; most blocks are nowhere near
        if bx0 >= gx1 or bx1 <= gx0 or by0 >= gy1 or by1 <= gy0:
            continue
        if not (gz1 > cfg.base_height - EPS and gz0 < cfg.top_height - EPS):
            continue
        m = (
            ~hit
            & (s0 != bi)
            & (s1 != bi)
            & _zband_hits(zlo, zhi, cfg.base_height, cfg.top_height)
            & (hi[:, 0] > bx0)
            & (lo[:, 0] < bx1)
            & (hi[:, 1] > by0)
            & (lo[:, 1] < by1)
        )
        if m.any():
            idx = np.nonzero(m)[0]
            hit[idx] = segments_cross(cfg.footprint, p0[idx], p1[idx])
    return hit


@lru_cache(maxsize=32)
def static_layer(scene: Scene, params: RoadmapParams = RoadmapParams()) -> StaticLayer:
    robot = scene.robot
    planes = scene.fixed_planes
    block_idx = {b.id: i for i, b in enumerate(scene.blocks)}
    fixed_cfgs = [(block_idx[b.id], b.initial) for b in scene.fixed]
    xs, zs, ps, ss = [], [], [], []
    for pi, p in enumerate(planes):
        pts = sample_surface(p.boundary, params, scene.scene_id, "plane", p.id)
        keep = np.ones(len(pts), dtype=bool)
        for _, cfg in fixed_cfgs:
            if cfg.base_height - EPS <= p.elevation < cfg.top_height - EPS:
                keep &= ~contains(cfg.footprint, pts, tol=-EPS)
        pts = pts[keep]
        xs.append(pts)
        zs.append(np.full(len(pts), p.elevation))
        ps.append(np.full(len(pts), pi))
        ss.append(np.full(len(pts), block_idx.get(p.id, -1)))
    xy = np.vstack(xs)
    z = np.concatenate(zs)
    plane = np.concatenate(ps)
    support = np.concatenate(ss)
    tree = cKDTree(xy)

    pairs = tree.query_pairs(max(params.connect_radius, robot.lateral_step), output_type="ndarray")
    i, j = pairs[:, 0], pairs[:, 1]
    d = np.hypot(*(xy[i] - xy[j]).T)
    same = plane[i] == plane[j]
    keep = np.where(same, d <= params.connect_radius, robot.step_reachable(z[i] - z[j], d))
    i, j = i[keep], j[keep]
    hit = _collides(scene, fixed_cfgs, xy[i], xy[j], z[i], z[j], support[i], support[j])
    edges = np.stack([i[~hit], j[~hit]], axis=1).astype(np.int64)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    mid = 0.5 * (xy[edges[:, 0]] + xy[edges[:, 1]]) if len(edges) else np.zeros((0, 2))

    tops, top_edges = [], []
    for b in scene.movable:
        loc = sample_surface(b.shape, params, scene.scene_id, "block", b.id)
        tops.append(loc)
        tp = cKDTree(loc).query_pairs(params.connect_radius, output_type="ndarray")
        tp = tp[np.lexsort((tp[:, 1], tp[:, 0]))] if len(tp) else np.zeros((0, 2), dtype=np.int64)
        top_edges.append(tp.astype(np.int64))
    stride = max([len(t) for t in tops], default=1)
    return StaticLayer(
        scene=scene,
        params=params,
        planes=planes,
        xy=xy,
        z=z,
        plane=plane,
        support=support,
        edges=edges,
        edge_mid=mid,
        tree=tree,
        mid_tree=cKDTree(mid) if len(mid) else cKDTree(np.zeros((1, 2))),
        plane_nodes=tuple(np.nonzero(plane == k)[0] for k in range(len(planes))),
        top_local=tuple(tops),
        top_edges=tuple(top_edges),
        key_stride=stride,
    )


@dataclass(frozen=True, eq=False)
class BlockPart:
    """What one placed movable block contributes to a roadmap."""

    cfg: BlockConfig
    top_xy: np.ndarray
    covered: np.ndarray  # static node indices made unusable
    cut: np.ndarray  # static edge indices crossing the block volume
    # top-to-static edge candidates, already checked against fixed blocks
    link_top: np.ndarray
    link_static: np.ndarray


_PART_CACHE: "OrderedDict[tuple, BlockPart]" = OrderedDict()
_PART_CACHE_SIZE = 20000


def block_part(st: StaticLayer, m: int, cfg: BlockConfig) -> BlockPart:
    key = (id(st), m, cfg)
    part = _PART_CACHE.get(key)
    if part is not None:
        _PART_CACHE.move_to_end(key)
        return part
    part = _compute_part(st, m, cfg)
    _PART_CACHE[key] = part
    if len(_PART_CACHE) > _PART_CACHE_SIZE:
        _PART_CACHE.popitem(last=False)
    return part


def _compute_part(st: StaticLayer, m: int, cfg: BlockConfig) -> BlockPart:
    scene = st.scene
    robot = scene.robot
    fp = cfg.footprint
    x, y, yaw = cfg.pose
    top_xy = transform_points(st.top_local[m], x, y, yaw)
    c = fp.centroid
    r = fp.circumradius(c)

    near = np.asarray(st.tree.query_ball_point(c, r + 1e-6), dtype=np.int64)
    if len(near):
        zin = (st.z[near] > cfg.base_height - EPS) & (st.z[near] < cfg.top_height - EPS)
        near = near[zin]
        near = near[contains(fp, st.xy[near], tol=-EPS)] if len(near) else near
    covered = np.sort(near)

    half = max(st.params.connect_radius, robot.lateral_step) / 2.0
    cand = np.asarray(st.mid_tree.query_ball_point(c, r + half + 1e-6), dtype=np.int64) if len(st.edges) else np.zeros(0, np.int64)
    if len(cand):
        u, v = st.edges[cand, 0], st.edges[cand, 1]
        zlo, zhi = np.minimum(st.z[u], st.z[v]), np.maximum(st.z[u], st.z[v])
        cand = cand[_zband_hits(zlo, zhi, cfg.base_height, cfg.top_height)]
    if len(cand):
        u, v = st.edges[cand, 0], st.edges[cand, 1]
        cand = cand[segments_cross(fp, st.xy[u], st.xy[v])]
    cut = np.sort(cand)

    e = cfg.top_height
    lists = st.tree.query_ball_point(top_xy, robot.lateral_step)
    lt = np.repeat(np.arange(len(top_xy)), [len(l) for l in lists])
    ls = np.fromiter((k for l in lists for k in l), dtype=np.int64, count=len(lt))
    if len(lt):
        d = np.hypot(*(top_xy[lt] - st.xy[ls]).T)
        ok = robot.step_reachable(e - st.z[ls], d)
        lt, ls = lt[ok], ls[ok]
    if len(lt):
        bidx = scene._index  # block id -> scene index
        me = bidx[scene.movable[m].id]
        fixed = [(bidx[b.id], b.initial) for b in scene.fixed]
        hit = _collides(
            scene, fixed, top_xy[lt], st.xy[ls], np.full(len(lt), e), st.z[ls], np.full(len(lt), me), st.support[ls]
        )
        lt, ls = lt[~hit], ls[~hit]
    return BlockPart(cfg, top_xy, covered, cut, lt.astype(np.int64), ls.astype(np.int64))


_LINK_CACHE: "OrderedDict[tuple, tuple[np.ndarray, np.ndarray]]" = OrderedDict()


def _memo(key, fn):
    got = _LINK_CACHE.get(key)
    if got is None:
        got = fn()
        _LINK_CACHE[key] = got
        if len(_LINK_CACHE) > _PART_CACHE_SIZE:
            _LINK_CACHE.popitem(last=False)
    else:
        _LINK_CACHE.move_to_end(key)
    return got


def _grow(box, r):
    return (box[0] - r, box[1] - r, box[2] + r, box[3] + r)


def _touches(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _links_clear(st: StaticLayer, m: int, part: BlockPart, bi: int, others) -> tuple[np.ndarray, np.ndarray]:
    """Top-to-static links of ``part`` not blocked by the ``others`` blocks."""

    def run():
        lt, ls = part.link_top, part.link_static
        if not len(lt) or not others:
            return lt, ls
        hit = _collides(
            st.scene,
            others,
            part.top_xy[lt],
            st.xy[ls],
            np.full(len(lt), part.cfg.top_height),
            st.z[ls],
            np.full(len(lt), bi),
            st.support[ls],
        )
        return lt[~hit], ls[~hit]

    return _memo(("links", id(st), m, part.cfg, others), run)


def _top_pair(st: StaticLayer, bi: int, pa: BlockPart, bj: int, pb: BlockPart, near) -> tuple[np.ndarray, np.ndarray]:
    """Edges between two block tops, as local node index pairs."""

    def run():
        robot = st.scene.robot
        dz = pa.cfg.top_height - pb.cfg.top_height
        d = np.hypot(pa.top_xy[:, None, 0] - pb.top_xy[None, :, 0], pa.top_xy[:, None, 1] - pb.top_xy[None, :, 1])
        ia, ib = np.nonzero(robot.step_reachable(dz, d))
        if not len(ia):
            return ia, ib
        hit = _collides(
            st.scene,
            list(near),
            pa.top_xy[ia],
            pb.top_xy[ib],
            np.full(len(ia), pa.cfg.top_height),
            np.full(len(ia), pb.cfg.top_height),
            np.full(len(ia), bi),
            np.full(len(ia), bj),
        )
        return ia[~hit], ib[~hit]

    return _memo(("pair", id(st), bi, pa.cfg, bj, pb.cfg, near), run)


class Roadmap:
    """Roadmap snapshot for one environment.

    Node indices ``0..n_static-1`` are static nodes; dynamic nodes follow in
    movable-block order. Use :meth:`key` / :meth:`index` to move between
    snapshot indices and stable node keys.
    """

    def __init__(self, st: StaticLayer, env: Environment, parts: tuple[BlockPart | None, ...]):
        self.static = st
        self.env = env
        self.parts = parts
        ns = st.n
        offsets, xs, zs, owner = [], [], [], []
        k = ns
        for m, part in enumerate(parts):
            offsets.append(k)
            if part is None:
                continue
            xs.append(part.top_xy)
            zs.append(np.full(len(part.top_xy), part.cfg.top_height))
            owner.append(np.full(len(part.top_xy), m))
            k += len(part.top_xy)
        self.offsets = np.array(offsets + [k], dtype=np.int64)
        self.n = k
        self.dyn_xy = np.vstack(xs) if xs else np.zeros((0, 2))
        self.dyn_z = np.concatenate(zs) if zs else np.zeros(0)
        self.dyn_owner = np.concatenate(owner) if owner else np.zeros(0, dtype=np.int64)

        active = np.ones(ns, dtype=bool)
        cut = np.zeros(len(st.edges), dtype=bool)
        for part in parts:
            if part is not None:
                active[part.covered] = False
                cut[part.cut] = True
        self.static_active = active
        u, v = st.edges[:, 0], st.edges[:, 1]
        self.static_edge_mask = ~cut & active[u] & active[v]
        self.dyn_edges = self._dynamic_edges()
        _, self.labels = connected_components(self.graph(), directed=False)
        self._plane_labels: dict[str, frozenset] = {}

    def graph(self):
        e = np.vstack([self.static.edges[self.static_edge_mask], self.dyn_edges])
        return coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(self.n, self.n)).tocsr()

    # -- construction ---------------------------------------------------

    def _present_cfgs(self):
        scene = self.static.scene
        out = [(scene._index[b.id], b.initial) for b in scene.fixed]
        for m, part in enumerate(self.parts):
            if part is not None:
                out.append((scene._index[scene.movable[m].id], part.cfg))
        return out

    def _dynamic_edges(self) -> np.ndarray:
        st = self.static
        scene = st.scene
        robot = scene.robot
        chunks = []
        mov_cfgs = [
            (scene._index[scene.movable[m].id], m, p) for m, p in enumerate(self.parts) if p is not None
        ]
        reach = max(st.params.connect_radius, robot.lateral_step)
        for bi, m, part in mov_cfgs:
            off = self.offsets[m]
            chunks.append(st.top_edges[m] + off)
            box = _grow(part.cfg.footprint.bbox, reach)
            others = tuple((obi, p.cfg) for obi, om, p in mov_cfgs if om != m and _touches(box, p.cfg.footprint.bbox))
            lt, ls = _links_clear(st, m, part, bi, others)
            ok = self.static_active[ls]
            lt, ls = lt[ok], ls[ok]
            if len(lt):
                chunks.append(np.stack([lt + off, ls], axis=1))
        # top-to-top links between different blocks
        present = self._present_cfgs()
        for a in range(len(mov_cfgs)):
            for b in range(a + 1, len(mov_cfgs)):
                bi, mi, pa = mov_cfgs[a]
                bj, mj, pb = mov_cfgs[b]
                dz = pa.cfg.top_height - pb.cfg.top_height
                if abs(dz) >= robot.climb_height:
                    continue
                ax0, ay0, ax1, ay1 = pa.cfg.footprint.bbox
                bx0, by0, bx1, by1 = pb.cfg.footprint.bbox
                if max(bx0 - ax1, ax0 - bx1, by0 - ay1, ay0 - by1) >= robot.lateral_step:
                    continue
                box = (min(ax0, bx0), min(ay0, by0), max(ax1, bx1), max(ay1, by1))
                near = tuple(c for c in present if _touches(box, c[1].footprint.bbox))
                ia, ib = _top_pair(st, bi, pa, bj, pb, near)
                if len(ia):
                    chunks.append(np.stack([ia + self.offsets[mi], ib + self.offsets[mj]], axis=1))
        chunks = [c.reshape(-1, 2) for c in chunks if len(c)]
        return np.vstack(chunks).astype(np.int64) if chunks else np.zeros((0, 2), dtype=np.int64)

    # -- node access -----------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return self.n

    @property
    def num_edges(self) -> int:
        return int(self.static_edge_mask.sum()) + len(self.dyn_edges)

    def key(self, index: int) -> int:
        """Stable key for a snapshot node index."""
        ns = self.static.n
        if index < ns:
            return int(index)
        m = int(np.searchsorted(self.offsets, index, side="right") - 1)
        return ns + m * self.static.key_stride + int(index - self.offsets[m])

    def index(self, key: int) -> int:
        """Snapshot index of a node key, or -1 when the node is absent."""
        ns = self.static.n
        if key < ns:
            return int(key)
        m, k = divmod(key - ns, self.static.key_stride)
        if self.parts[m] is None:
            return -1
        return int(self.offsets[m] + k)

    def keys(self, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        ns = self.static.n
        out = indices.copy()
        dyn = indices >= ns
        if dyn.any():
            m = np.searchsorted(self.offsets, indices[dyn], side="right") - 1
            out[dyn] = ns + m * self.static.key_stride + (indices[dyn] - self.offsets[m])
        return out

    def xyz(self, index: int) -> tuple[float, float, float]:
        ns = self.static.n
        if index < ns:
            return float(self.static.xy[index, 0]), float(self.static.xy[index, 1]), float(self.static.z[index])
        j = index - ns
        return float(self.dyn_xy[j, 0]), float(self.dyn_xy[j, 1]), float(self.dyn_z[j])

    def plane_id(self, index: int) -> str:
        ns = self.static.n
        if index < ns:
            return self.static.planes[self.static.plane[index]].id
        return self.static.scene.movable[int(self.dyn_owner[index - ns])].id

    def position(self, index: int) -> Position:
        x, y, _ = self.xyz(index)
        return Position((x, y), self.plane_id(index))

    def is_active(self, index: int) -> bool:
        return index >= self.static.n or bool(self.static_active[index])

    def all_xy(self) -> np.ndarray:
        return np.vstack([self.static.xy, self.dyn_xy])

    def all_z(self) -> np.ndarray:
        return np.concatenate([self.static.z, self.dyn_z])

    def active_mask(self) -> np.ndarray:
        return np.concatenate([self.static_active, np.ones(len(self.dyn_xy), dtype=bool)])

    def plane_nodes(self, plane_id: str) -> np.ndarray:
        """Active node indices on a plane (fixed or movable)."""
        st = self.static
        scene = st.scene
        if plane_id in scene.movable_index:
            m = scene.movable_index[plane_id]
            if self.parts[m] is None:
                return np.zeros(0, dtype=np.int64)
            return np.arange(self.offsets[m], self.offsets[m] + len(self.parts[m].top_xy))
        idx = st.plane_nodes[st.plane_index(plane_id)]
        return idx[self.static_active[idx]]

    def plane_labels(self, plane_id: str) -> frozenset:
        got = self._plane_labels.get(plane_id)
        if got is None:
            got = frozenset(np.unique(self.labels[self.plane_nodes(plane_id)]).tolist())
            self._plane_labels[plane_id] = got
        return got

    def components(self) -> list[frozenset]:
        """Partition of active nodes into connected components, as key sets."""
        act = np.nonzero(self.active_mask())[0]
        keys = self.keys(act)
        labs = self.labels[act]
        order = np.argsort(labs, kind="stable")
        groups = np.split(keys[order], np.nonzero(np.diff(labs[order]))[0] + 1)
        return sorted((frozenset(g.tolist()) for g in groups if len(g)), key=lambda s: min(s))

    # -- position queries -------------------------------------------------

    def attach(self, pos: Position) -> np.ndarray:
        """Component labels a free-standing position connects to.

        Coincident nodes are used directly. Otherwise the position is joined
        to nearby nodes with the same edge rules the roadmap uses.
        """
        st = self.static
        scene = st.scene
        robot = scene.robot
        plane = self._plane_of(pos.plane)
        p = np.array(pos.xy)
        if not contains(plane.boundary, p, tol=1e-7):
            raise ValueError(f"position {pos.xy} lies outside plane {pos.plane}")
        z = plane.elevation
        xy = self.all_xy()
        zz = self.all_z()
        act = self.active_mask()
        sup_id = pos.plane
        # a position inside some block volume is unusable
        for bi, cfg in self._present_cfgs():
            if scene.blocks[bi].id != sup_id and cfg.base_height - EPS <= z < cfg.top_height - EPS:
                if contains(cfg.footprint, p, tol=-EPS):
                    return np.zeros(0, dtype=np.int64)
        r = max(st.params.connect_radius, robot.lateral_step)
        d = np.hypot(xy[:, 0] - p[0], xy[:, 1] - p[1])
        on_plane = np.zeros(len(xy), dtype=bool)
        on_plane[self.plane_nodes(pos.plane)] = True
        exact = np.nonzero(on_plane & (d < 1e-9))[0]
        if len(exact):
            return np.unique(self.labels[exact])
        cand = np.nonzero(act & (d <= r))[0]
        same = on_plane[cand]
        ok = np.where(same, d[cand] <= st.params.connect_radius, robot.step_reachable(zz[cand] - z, d[cand]) & ~same)
        cand = cand[ok]
        if not len(cand):
            return np.zeros(0, dtype=np.int64)
        sup_here = scene._index.get(sup_id, -1)
        sup_other = np.array([scene._index.get(self.plane_id(int(c)), -1) for c in cand])
        hit = _collides(
            scene,
            self._present_cfgs(),
            np.repeat(p[None, :], len(cand), axis=0),
            xy[cand],
            np.full(len(cand), z),
            zz[cand],
            np.full(len(cand), sup_here),
            sup_other,
        )
        return np.unique(self.labels[cand[~hit]])

    def _plane_of(self, plane_id: str) -> Plane:
        scene = self.static.scene
        if plane_id in scene.movable_index:
            part = self.parts[scene.movable_index[plane_id]]
            if part is None:
                raise KeyError(f"plane {plane_id} is not present")
            return Plane(plane_id, part.cfg.top_height, part.cfg.footprint, True)
        return self.static.planes[self.static.plane_index(plane_id)]

    def labels_at(self, where) -> np.ndarray:
        """Labels for a node key (int) or a :class:`Position`."""
        if isinstance(where, Position):
            return self.attach(where)
        i = self.index(int(where))
        if i < 0 or not self.is_active(i):
            return np.zeros(0, dtype=np.int64)
        return self.labels[i : i + 1]

    def connected(self, a, b) -> bool:
        if a == b:
            return True
        la, lb = self.labels_at(a), self.labels_at(b)
        return bool(len(np.intersect1d(la, lb)))

    def gap(self, plane_i: str, plane_j: str) -> bool:
        """True when no node on one plane reaches a node on the other."""
        return not (self.plane_labels(plane_i) & self.plane_labels(plane_j))


def build(env: Environment, params: RoadmapParams = RoadmapParams()) -> Roadmap:
    st = static_layer(env.scene, params)
    parts = tuple(None if cfg is None else block_part(st, m, cfg) for m, cfg in enumerate(env.configs))
    return Roadmap(st, env, parts)


def remove_block(rm: Roadmap, block_id: str) -> Roadmap:
    """Lift a block out: its top nodes go, covered nodes and cut edges return."""
    m = rm.static.scene.movable_index[block_id]
    parts = list(rm.parts)
    parts[m] = None
    return Roadmap(rm.static, rm.env.without(block_id), tuple(parts))


def place_block(rm: Roadmap, block_id: str, cfg: BlockConfig) -> Roadmap:
    """Put a block down: edges through it are cut and its top gets nodes."""
    m = rm.static.scene.movable_index[block_id]
    parts = list(rm.parts)
    parts[m] = block_part(rm.static, m, cfg)
    return Roadmap(rm.static, rm.env.with_config(block_id, cfg), tuple(parts))


def apply_move(rm: Roadmap, block_id: str, cfg: BlockConfig) -> Roadmap:
    return place_block(remove_block(rm, block_id), block_id, cfg)


def top_links(rm: Roadmap, block_id: str, cfg: BlockConfig) -> tuple[np.ndarray, np.ndarray]:
    """Cheap over-approximation of what placing ``cfg`` would connect.

    Returns the labels (in ``rm``, which must not contain the block) of nodes
    the new top could link to, ignoring cuts made by the new block itself,
    plus the static nodes the block would cover.
    """
    st = rm.static
    m = st.scene.movable_index[block_id]
    part = block_part(st, m, cfg)
    ls = part.link_static
    labs = rm.labels[ls[rm.static_active[ls]]]
    robot = st.scene.robot
    if len(rm.dyn_xy):
        dz = np.abs(rm.dyn_z - cfg.top_height) < robot.climb_height
        if dz.any():
            cand = np.nonzero(dz)[0]
            d = np.hypot(
                part.top_xy[:, None, 0] - rm.dyn_xy[None, cand, 0], part.top_xy[:, None, 1] - rm.dyn_xy[None, cand, 1]
            )
            near = cand[(d < robot.lateral_step).any(axis=0)]
            labs = np.concatenate([labs, rm.labels[near + st.n]])
    return np.unique(labs), part.covered


def nodes_near(rm: Roadmap, footprint: Polygon2D, radius: float, exclude_block: str | None = None) -> np.ndarray:
    """Active node indices within XY ``radius`` of a footprint."""
    st = rm.static
    c = footprint.centroid
    r = footprint.circumradius(c) + radius + 1e-9
    idx = np.asarray(st.tree.query_ball_point(c, r), dtype=np.int64)
    idx = idx[rm.static_active[idx]] if len(idx) else idx
    if len(rm.dyn_xy):
        d = np.hypot(rm.dyn_xy[:, 0] - c[0], rm.dyn_xy[:, 1] - c[1])
        dyn = np.nonzero(d <= r)[0]
        if exclude_block is not None:
            m = st.scene.movable_index[exclude_block]
            dyn = dyn[rm.dyn_owner[dyn] != m]
        idx = np.concatenate([idx, dyn + st.n])
    if not len(idx):
        return idx
    xy = rm.all_xy()[idx]
    return np.sort(idx[distance_to(footprint, xy) <= radius])
