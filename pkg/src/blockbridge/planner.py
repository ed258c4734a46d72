"""Tree search over block rearrangements.

Each tree node is an environment plus a robot position. An iteration picks
a node, picks a (block, plane, intent) triplet, and tries up to ``N``
times to find a grasp node, a new block pose and a drop node that pass
the reachability and intent checks. Successful attempts add a child; the
search stops as soon as the goal is reachable from a new child.

A symbolic plan biases both choices toward realising its next step. When
a step it recommends keeps failing, that step is demoted and the plan is
recomputed from the next sampled node with the step banned.
"""

from __future__ import annotations

import json
import logging
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .capabilities import CandidateModel, gap, manip_reach, navig_reach
from .geometry import contains, distance_to
from .roadmap import Roadmap, RoadmapParams, build, place_block, remove_block
from .sampler import SamplerParams, make_pose_sampler, sample_from_set, sample_triplet
from .scene import BlockConfig, Environment, Position, Scene, footprint_fits
from .symbolic import BfsProvider, Domain, PlanProvider, PlanRequest, Triplet, label_environment

log = logging.getLogger(__name__)


class PlanError(ValueError):
    """Malformed plan file or plan that does not belong to the scene."""


@dataclass(frozen=True)
class Move:
    block: str
    start: BlockConfig
    end: BlockConfig


@dataclass(frozen=True)
class Step:
    move: Move
    grasp: Position
    drop: Position


@dataclass
class Plan:
    steps: list[Step]
    scene_id: str = ""
    scene_hash: str = ""
    seed: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.steps)


@dataclass
class RunStats:
    iterations: int = 0
    tree_size: int = 1
    demotions: int = 0
    provider_calls: int = 0
    trials: int = 0
    wall_time: float = 0.0
    solved: bool = False
    horizon: int | None = None


@dataclass
class PlanResult:
    plan: Plan | None
    stats: RunStats
    tree: "PlanTree"

    @property
    def solved(self) -> bool:
        return self.plan is not None


# --------------------------------------------------------------------------
# tree


class _BlockView:
    """Per (node, block) data computed on first use."""

    __slots__ = ("grasp", "grasp_ok", "without", "grasp_labels", "plane_ok")

    def __init__(self, grasp, grasp_ok):
        self.grasp = grasp
        self.grasp_ok = grasp_ok
        self.without = None
        self.grasp_labels = None
        self.plane_ok = {}


class TreeNode:
    __slots__ = (
        "id",
        "parent",
        "env",
        "robot",
        "roadmap",
        "plan_step",
        "under_origin",
        "depth",
        "edge",
        "triplet",
        "_robot_labels",
        "_views",
    )

    def __init__(self, id, parent, env, robot, roadmap, depth, edge=None, triplet=None):
        self.id = id
        self.parent = parent
        self.env: Environment = env
        self.robot = robot  # node key, or a Position for the root
        self.roadmap: Roadmap = roadmap
        self.depth = depth
        self.edge: Step | None = edge
        self.triplet: Triplet | None = triplet
        self.plan_step: int | None = 0
        self.under_origin = False
        self._robot_labels = None
        self._views: dict[str, _BlockView] = {}

    @property
    def robot_labels(self) -> np.ndarray:
        if self._robot_labels is None:
            self._robot_labels = self.roadmap.labels_at(self.robot)
        return self._robot_labels


@dataclass
class PlanTree:
    nodes: list[TreeNode] = field(default_factory=list)
    v_max: list[int] = field(default_factory=list)
    v_max_step: int = -1

    def add(self, node: TreeNode, track: bool = True):
        self.nodes.append(node)
        if track:
            self._track(node)

    def _track(self, node: TreeNode):
        ps = node.plan_step
        if ps is None:
            return
        if ps > self.v_max_step:
            self.v_max_step = ps
            self.v_max = [node.id]
        elif ps == self.v_max_step:
            self.v_max.append(node.id)

    def rebuild_vmax(self):
        self.v_max, self.v_max_step = [], -1
        for n in self.nodes:
            self._track(n)

    def path(self, node_id: int) -> list[TreeNode]:
        out = []
        cur = self.nodes[node_id]
        while cur is not None:
            out.append(cur)
            cur = None if cur.parent is None else self.nodes[cur.parent]
        return out[::-1]

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(n.parent, n.id) for n in self.nodes if n.parent is not None]


def assign_plan_steps(tree: PlanTree, origin: int, plan: Sequence[Triplet]) -> None:
    """Recompute plan progress for every node against a plan anchored at ``origin``.

    Nodes outside the origin's subtree get 0. Inside it a node gets the
    number of plan steps its path realises, or ``None`` once the path
    deviates.
    """
    for n in tree.nodes:  # parents precede children
        if n.id == origin:
            n.under_origin, n.plan_step = True, 0
        elif n.parent is not None and tree.nodes[n.parent].under_origin:
            n.under_origin = True
            n.plan_step = _child_step(tree.nodes[n.parent].plan_step, n.triplet, plan)
        else:
            n.under_origin, n.plan_step = False, 0
    tree.rebuild_vmax()


def _child_step(parent_step, triplet, plan):
    if parent_step is None or parent_step >= len(plan) or plan[parent_step] != triplet:
        return None
    return parent_step + 1


# --------------------------------------------------------------------------
# planner


@dataclass(frozen=True)
class _Flat:
    """Active nodes of a roadmap as flat arrays, in snapshot-index order."""

    index: np.ndarray
    xy: np.ndarray
    z: np.ndarray
    labels: np.ndarray
    static: np.ndarray


def _flat(rm: Roadmap) -> _Flat:
    got = getattr(rm, "_flat", None)
    if got is None:
        idx = np.nonzero(rm.active_mask())[0]
        got = _Flat(idx, rm.all_xy()[idx], rm.all_z()[idx], rm.labels[idx], idx < rm.static.n)
        rm._flat = got
    return got


class Planner:
    def __init__(
        self,
        scene: Scene,
        params: SamplerParams = SamplerParams(),
        seed: int = 0,
        roadmap_params: RoadmapParams = RoadmapParams(),
        candidates: CandidateModel | None = None,
        provider: PlanProvider | None = None,
    ):
        if scene.goal.plane in scene.movable_index:
            raise ValueError("goal must lie on a fixed plane")
        self.scene = scene
        self.params = params
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.rparams = roadmap_params
        self.domain = Domain.of(scene, roadmap_params, candidates)
        self.triplets = self.domain.triplets()
        self.s_gap = [t for t in self.triplets if t.intent is not None]
        self.s_nogap = [t for t in self.triplets if t.intent is None]
        if provider is None and params.mode == "bfs":
            provider = BfsProvider()
        if params.mode == "external" and provider is None:
            raise ValueError("external mode needs a plan provider")
        self.provider = provider if params.mode != "uniform" else None
        self.planes = {p.id: p for p in scene.fixed_planes}
        self.plan: list[Triplet] = []
        self.demoted: set[Triplet] = set()
        self.pending_replan = False
        self.stats = RunStats()
        self.tree = PlanTree()
        self._without_cache: "OrderedDict[tuple[int, str], Roadmap]" = OrderedDict()

    # -- provider ---------------------------------------------------------

    def _invoke(self, node: TreeNode):
        dom = Domain(
            self.scene, self.domain.pairs, self.domain.links, self.domain.candidates,
            self.domain.goal_plane, frozenset(self.demoted),
        )
        state = label_environment(node.roadmap, node.robot, dom.pairs, self.rng)
        self.stats.provider_calls += 1
        plan = list(self.provider(PlanRequest(dom, state)))
        known = set(self.triplets)
        bad = [t for t in plan if t not in known]
        if bad:
            raise ValueError(f"provider returned triplets outside the candidate set: {bad}")
        self.plan = plan
        assign_plan_steps(self.tree, node.id, plan)
        if not plan:
            # nothing to follow: node choice falls back to uniform
            self.tree.v_max, self.tree.v_max_step = [], -1
        log.debug("plan from node %d: %s", node.id, " ".join(map(str, plan)))

    # -- per-node helpers -------------------------------------------------

    def _view(self, node: TreeNode, block: str) -> _BlockView:
        v = node._views.get(block)
        if v is None:
            rm = node.roadmap
            keys = manip_reach(rm, block)
            labs = rm.labels[[rm.index(int(k)) for k in keys]] if len(keys) else np.zeros(0, dtype=np.int64)
            ok = np.isin(labs, node.robot_labels)
            v = _BlockView(keys, ok)
            node._views[block] = v
        return v

    def _without(self, node: TreeNode, block: str, view: _BlockView) -> Roadmap:
        key = (node.id, block)
        rm = self._without_cache.get(key)
        if rm is None:
            rm = remove_block(node.roadmap, block)
            self._without_cache[key] = rm
            if len(self._without_cache) > 256:
                self._without_cache.popitem(last=False)
        else:
            self._without_cache.move_to_end(key)
        if view.grasp_labels is None:
            view.grasp_labels = rm.labels[[rm.index(int(k)) for k in view.grasp[view.grasp_ok]]]
        return rm

    def _labels_near(self, rm: Roadmap, poly, radius: float, z_top: float | None, exact: bool = True):
        """Labels of active nodes within ``radius`` of ``poly`` (optionally height-filtered).

        With ``exact=False`` the disc around the circumcircle is used instead,
        which is cheaper and returns a superset.
        """
        st = rm.static
        c = poly.centroid
        r = poly.circumradius(c) + radius
        idx = np.asarray(st.tree.query_ball_point(c, r), dtype=np.int64)
        if len(idx):
            idx = idx[rm.static_active[idx]]
        xy, zz = st.xy[idx], st.z[idx]
        if len(rm.dyn_xy):
            idx = np.concatenate([idx, np.arange(st.n, rm.n)])
            xy = np.vstack([xy, rm.dyn_xy])
            zz = np.concatenate([zz, rm.dyn_z])
        if exact:
            keep = distance_to(poly, xy) < radius
        else:
            keep = np.hypot(xy[:, 0] - c[0], xy[:, 1] - c[1]) < r
        if z_top is not None:
            keep &= np.abs(zz - z_top) < self.scene.robot.climb_height
        return np.unique(rm.labels[idx[keep]])

    def _plane_possible(self, node: TreeNode, view: _BlockView, rm_wo: Roadmap, t: Triplet) -> bool:
        """Cheap necessary condition for any pose of ``t`` to pass the intent and drop checks."""
        key = (t.plane, t.intent)
        got = view.plane_ok.get(key)
        if got is not None:
            return got
        robot = self.scene.robot
        plane = self.planes[t.plane]
        e = plane.elevation + self.scene.block(t.block).height
        links = set(self._labels_near(rm_wo, plane.boundary, robot.lateral_step, e).tolist())
        drops = set(self._labels_near(rm_wo, plane.boundary, robot.manip_radius + 1e-9, None).tolist())
        grasp = set(view.grasp_labels.tolist())
        ok = bool(grasp & drops) or (bool(grasp & links) and bool(drops & links))
        if ok and t.intent is not None:
            la, lb = rm_wo.plane_labels(t.intent[0]), rm_wo.plane_labels(t.intent[1])
            ok = bool(la & lb) or (bool(la & links) and bool(lb & links))
        view.plane_ok[key] = ok
        return ok

    # -- move sampling ---------------------------------------------------

    def sample_move(self, node: TreeNode, t: Triplet):
        """Up to N attempts at realising ``t`` from ``node``.

        Returns ``(roadmap, step)`` on success, ``None`` otherwise.
        """
        scene = self.scene
        robot = scene.robot
        rng = self.rng
        if node.env.config(t.block) is None:
            return None
        view = self._view(node, t.block)
        if not view.grasp_ok.any():
            return None  # no grasp node is reachable, so every attempt fails
        rm_wo = self._without(node, t.block, view)
        if not self._plane_possible(node, view, rm_wo, t):
            return None
        block = scene.block(t.block)
        plane = self.planes[t.plane]
        poses = make_pose_sampler(node.env, block, plane, t.intent, self.params, robot.lateral_step)
        n_keys = len(view.grasp)
        grasp_wo = np.full(n_keys, -1, dtype=np.int64)
        grasp_wo[view.grasp_ok] = view.grasp_labels
        flat = _flat(rm_wo)
        reach = block.shape.circumradius((0.0, 0.0))
        la = lb = None
        if t.intent is not None:
            la, lb = rm_wo.plane_labels(t.intent[0]), rm_wo.plane_labels(t.intent[1])
        for _ in range(self.params.n_trials):
            self.stats.trials += 1
            gi = int(rng.integers(n_keys))
            if not view.grasp_ok[gi]:
                continue
            x_grasp = int(view.grasp[gi])
            cfg, _ = poses.draw(rng)
            if cfg is None:
                continue
            cx, cy = cfg.pose[0], cfg.pose[1]
            d = np.hypot(flat.xy[:, 0] - cx, flat.xy[:, 1] - cy)
            # labels the new top could possibly link to (superset)
            near = (d < reach + robot.lateral_step) & (np.abs(flat.z - cfg.top_height) < robot.climb_height)
            links = set(np.unique(flat.labels[near]).tolist())
            if la is not None and not (la & lb) and not (la & links and lb & links):
                continue
            drops = self._drop_nodes(flat, cfg, d, reach)
            if not len(drops):
                continue
            di = int(sample_from_set(rng, drops))
            lg, ld = int(grasp_wo[gi]), int(rm_wo.labels[di])
            if lg != ld and not (lg in links and ld in links):
                continue
            rm_temp = place_block(rm_wo, t.block, cfg)
            if t.intent is not None and gap(rm_temp, *t.intent):
                continue
            x_drop = rm_wo.key(di)
            if not rm_temp.connected(x_grasp, x_drop):
                continue
            step = Step(
                Move(t.block, node.env.config(t.block), cfg),
                node.roadmap.position(node.roadmap.index(x_grasp)),
                rm_temp.position(rm_temp.index(x_drop)),
            )
            return rm_temp, step, x_drop
        return None

    def _drop_nodes(self, flat: "_Flat", cfg: BlockConfig, d: np.ndarray, reach: float) -> np.ndarray:
        """Snapshot indices of post-move nodes within manipulation range of ``cfg``, sorted."""
        radius = self.scene.robot.manip_radius
        cand = np.nonzero(d <= reach + radius + 1e-9)[0]
        if not len(cand):
            return cand
        fp = cfg.footprint
        cand = cand[distance_to(fp, flat.xy[cand]) <= radius]
        z = flat.z[cand]
        inside = flat.static[cand] & (z > cfg.base_height - 1e-9) & (z < cfg.top_height - 1e-9)
        if inside.any():
            covered = np.zeros(len(cand), dtype=bool)
            covered[inside] = contains(fp, flat.xy[cand[inside]], tol=-1e-9)
            cand = cand[~covered]
        return flat.index[cand]

    # -- main loop -------------------------------------------------------

    def run(self) -> PlanResult:
        t0 = time.perf_counter()
        scene = self.scene
        env0 = scene.initial_environment()
        rm0 = build(env0, self.rparams)
        root = TreeNode(0, None, env0, scene.start, rm0, 0)
        root.under_origin = True
        self.tree.add(root, track=False)
        goal = scene.goal
        if navig_reach(rm0, scene.start, goal):
            return self._finish(t0, root)
        if self.provider is not None:
            self._invoke(root)
        weights = self.params.weights
        for k in range(1, self.params.k_max + 1):
            self.stats.iterations = k
            if not self.triplets:
                # nothing can move, so every iteration is a failed sample
                self.stats.iterations = self.params.k_max
                break
            v = self._sample_node()
            if self.pending_replan and self.params.replan and self.provider is not None:
                self.pending_replan = False
                self._invoke(v)
            s_plan = self._s_plan(v)
            if self.params.mode == "uniform":
                t = self.triplets[int(self.rng.integers(len(self.triplets)))]
            else:
                t, _ = sample_triplet(self.rng, (s_plan, self.s_gap, self.s_nogap), weights)
            out = self.sample_move(v, t)
            if out is None:
                if s_plan and t == s_plan[0] and self.params.replan and self.provider is not None:
                    self.demoted.add(t)
                    self.stats.demotions += 1
                    self.pending_replan = True
                    log.debug("demoted %s at node %d", t, v.id)
                continue
            rm_new, step, x_drop = out
            child = TreeNode(len(self.tree.nodes), v.id, rm_new.env, x_drop, rm_new, v.depth + 1, step, t)
            if v.under_origin:
                child.under_origin = True
                child.plan_step = _child_step(v.plan_step, t, self.plan)
            else:
                child.plan_step = 0
            self.tree.add(child, track=bool(self.plan))
            if rm_new.connected(x_drop, goal):
                return self._finish(t0, child)
        self.stats.wall_time = time.perf_counter() - t0
        self.stats.tree_size = len(self.tree.nodes)
        return PlanResult(None, self.stats, self.tree)

    def _s_plan(self, v: TreeNode) -> list[Triplet]:
        m = v.plan_step
        if self.provider is None or m is None or m >= len(self.plan):
            return []
        s = self.plan[m]
        return [] if s in self.demoted else [s]

    def _sample_node(self) -> TreeNode:
        nodes = self.tree.nodes
        if self.params.mode == "uniform" or not self.tree.v_max:
            return nodes[int(self.rng.integers(len(nodes)))]
        lead = self.tree.v_max
        if len(lead) == len(nodes):
            return nodes[lead[int(self.rng.integers(len(lead)))]]
        # complement drawn by rejection; V_max is usually small
        if self.rng.random() < self.params.p_plan:
            return nodes[lead[int(self.rng.integers(len(lead)))]]
        lead_set = set(lead) if len(lead) > 8 else lead
        while True:
            i = int(self.rng.integers(len(nodes)))
            if i not in lead_set:
                return nodes[i]

    def _finish(self, t0: float, node: TreeNode) -> PlanResult:
        plan = extract_plan(self.tree, node.id)
        plan.scene_id = self.scene.scene_id
        plan.scene_hash = self.scene.digest
        plan.seed = self.seed
        self.stats.wall_time = time.perf_counter() - t0
        self.stats.tree_size = len(self.tree.nodes)
        self.stats.solved = True
        self.stats.horizon = plan.horizon
        return PlanResult(plan, self.stats, self.tree)


def extract_plan(tree: PlanTree, node_id: int) -> Plan:
    return Plan([n.edge for n in tree.path(node_id)[1:]])


def plan(
    scene: Scene,
    params: SamplerParams = SamplerParams(),
    seed: int = 0,
    roadmap_params: RoadmapParams = RoadmapParams(),
    candidates: CandidateModel | None = None,
    provider: PlanProvider | None = None,
) -> PlanResult:
    return Planner(scene, params, seed, roadmap_params, candidates, provider).run()


# --------------------------------------------------------------------------
# replay


@dataclass
class ReplayReport:
    ok: bool
    messages: list[str]
    environments: list[Environment]

    def __bool__(self):
        return self.ok


def _snap(rm: Roadmap, pos: Position) -> int | None:
    try:
        nodes = rm.plane_nodes(pos.plane)
    except KeyError:
        return None
    if not len(nodes):
        return None
    xy = rm.all_xy()[nodes]
    d = np.hypot(xy[:, 0] - pos.xy[0], xy[:, 1] - pos.xy[1])
    i = int(np.argmin(d))
    return int(rm.key(int(nodes[i]))) if d[i] <= 1e-9 else None


def replay(scene: Scene, plan: Plan, roadmap_params: RoadmapParams = RoadmapParams()) -> ReplayReport:
    """Re-check every step of ``plan`` on freshly built roadmaps."""
    msgs: list[str] = []
    env = scene.initial_environment()
    envs = [env]
    rm = build(env, roadmap_params)
    where = scene.start
    ok = True
    for i, st in enumerate(plan.steps, 1):
        b = st.move.block
        if b not in scene.movable_index:
            return ReplayReport(False, msgs + [f"step {i}: unknown block {b}"], envs)
        cur = env.config(b)
        if cur != st.move.start:
            msgs.append(f"step {i}: block {b} is not at the recorded start pose")
            ok = False
        g = _snap(rm, st.grasp)
        if g is None or g not in set(manip_reach(rm, b).tolist()):
            msgs.append(f"step {i}: grasp position is not a grasp node of {b}")
            ok = False
        elif not navig_reach(rm, where, g):
            msgs.append(f"step {i}: grasp position is not reachable")
            ok = False
        sup = env.support_of(st.move.end)
        if sup is None or not footprint_fits(env, b, st.move.end, env.plane(sup)):
            msgs.append(f"step {i}: target pose of {b} does not fit on a fixed plane")
            ok = False
        env = env.with_config(b, st.move.end)
        envs.append(env)
        rm = build(env, roadmap_params)
        d = _snap(rm, st.drop)
        if d is None or d not in set(manip_reach(rm, b).tolist()):
            msgs.append(f"step {i}: drop position is not a grasp node of {b} after the move")
            ok = False
        elif g is not None and not navig_reach(rm, g, d):
            msgs.append(f"step {i}: drop position is not reachable from the grasp position")
            ok = False
        if not ok:
            return ReplayReport(False, msgs, envs)
        where = d
    if not navig_reach(rm, where, scene.goal):
        msgs.append("goal is not reachable at the end of the plan")
        ok = False
    return ReplayReport(ok, msgs, envs)


# --------------------------------------------------------------------------
# plan files


def _cfg_json(cfg: BlockConfig) -> list[float]:
    x, y, yaw = cfg.pose
    return [x, y, yaw, cfg.base_height]


def _pos_json(p: Position) -> dict:
    return {"plane": p.plane, "xy": [p.xy[0], p.xy[1]]}


def dump_plan(plan: Plan) -> str:
    lines = [json.dumps({"scene_id": plan.scene_id, "scene_hash": plan.scene_hash, "seed": plan.seed, "horizon": plan.horizon})]
    for st in plan.steps:
        lines.append(
            json.dumps(
                {
                    "block": st.move.block,
                    "from": _cfg_json(st.move.start),
                    "to": _cfg_json(st.move.end),
                    "grasp": _pos_json(st.grasp),
                    "drop": _pos_json(st.drop),
                }
            )
        )
    return "\n".join(lines) + "\n"


def save_plan(plan: Plan, path: str | Path) -> None:
    Path(path).write_text(dump_plan(plan))


def parse_plan(text: str, scene: Scene) -> Plan:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise PlanError("empty plan file")
    try:
        head = json.loads(rows[0])
        steps = []
        for n, ln in enumerate(rows[1:], 2):
            r = json.loads(ln)
            b = scene.block(r["block"])
            if not b.movable:
                raise PlanError(f"line {n}: block {b.id} is not movable")

            def cfg(v):
                x, y, yaw, base = (float(a) for a in v)
                return b.at(x, y, yaw, base)

            def pos(d):
                return Position((float(d["xy"][0]), float(d["xy"][1])), str(d["plane"]))

            steps.append(Step(Move(b.id, cfg(r["from"]), cfg(r["to"])), pos(r["grasp"]), pos(r["drop"])))
    except PlanError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise PlanError(f"malformed plan: {e}") from None
    if head.get("horizon") is not None and head["horizon"] != len(steps):
        raise PlanError(f"header says {head['horizon']} steps, file has {len(steps)}")
    if head.get("scene_hash") and head["scene_hash"] != scene.digest:
        log.warning("plan was produced for a different scene version")
    return Plan(steps, head.get("scene_id", ""), head.get("scene_hash", ""), head.get("seed"))


def load_plan(path: str | Path, scene: Scene) -> Plan:
    return parse_plan(Path(path).read_text(), scene)
