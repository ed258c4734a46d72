"""Random benchmark scenes.

Scenes are rows of tables standing side by side on the ground, like a
staircase. Each table is either a short step up from its neighbour, which
the robot can climb directly, or a tall one that needs a block set down in
front of it. Movable blocks start scattered over the ground and the
tables. A scene is kept only if its minimum horizon matches the request:
either the relaxed lower bound meets a replayed plan of the same length, or
the exhaustive solver confirms it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .capabilities import pair
from .oracle import BudgetError, DiscretizedActionSpace, exhaustive_search, lower_bound
from .planner import Plan, Planner, TreeNode, replay
from .roadmap import build
from .sampler import SamplerParams
from .scene import GROUND, Scene, SceneError, make_scene, rect, with_metadata
from .symbolic import Triplet

# rise between neighbouring tables
LOW_STEP = 0.8
HIGH_STEP = 2.0
BLOCK_HEIGHT = 1.0
CLUTTER_HEIGHT = 0.4
ROBOT_REACH = 1.9


class GenerationError(RuntimeError):
    """No certified scene within the attempt budget."""


@dataclass(frozen=True)
class BenchmarkConfig:
    n_planes: int  # fixed planes including the ground
    n_blocks: int
    h_min: int
    # planner seeds for benchmark runs; scene seeds are passed to generate()
    seeds: tuple[int, ...] = (0,)
    scene_seeds: tuple[int, ...] = (0,)
    params: dict = field(default_factory=dict, hash=False, compare=False)
    attempts: int = 100
    name: str = ""

    def __post_init__(self):
        if self.h_min < 0:
            raise ValueError("h_min must be non-negative")
        if self.n_planes < 1 or self.n_blocks < 0:
            raise ValueError("need at least the ground plane and a non-negative block count")
        if self.h_min > self.n_planes - 1:
            raise ValueError(f"h_min={self.h_min} needs at least {self.h_min + 1} planes")
        if self.h_min > 0 and self.n_blocks == 0:
            raise ValueError("h_min > 0 needs at least one movable block")

    @property
    def family(self) -> str:
        return self.name or f"p{self.n_planes}_b{self.n_blocks}_h{self.h_min}"


def layout(cfg: BenchmarkConfig, rng: np.random.Generator, scene_id: str) -> Scene:
    """One random staircase scene; its true horizon is not checked here.

    Each tall rise gets a key block on the plane below it, parked away from
    the riser so that it does not bridge anything yet. Any further blocks
    are scattered over plane interiors at random.
    """
    n_tables = cfg.n_planes - 1
    tall = np.zeros(n_tables, dtype=bool)
    if n_tables:
        tall[rng.choice(n_tables, size=cfg.h_min, replace=False)] = True
    # the ground is a yard left of the tables plus the strip they stand on,
    # so nothing on a table can be reached from the ground except across P1's edge
    yard = float(rng.uniform(7.0, 9.0))
    depth = float(rng.uniform(6.5, 7.5))
    widths = rng.uniform(6.5, 7.5, size=n_tables)
    y0, y1 = 0.0, depth
    x = yard
    fixed, elev = [], 0.0
    for k in range(n_tables):
        elev += HIGH_STEP if tall[k] else LOW_STEP
        fixed.append((f"P{k + 1}", (x, y0, x + widths[k], y1), round(elev, 6)))
        x += widths[k]
    total_x = x
    ground = (0.0, y0, total_x, y1)
    start = ((1.0, 1.0), GROUND)
    if n_tables:
        bx0, by0, bx1, by1 = fixed[-1][1]
        goal = (((bx0 + bx1) / 2.0, (by0 + by1) / 2.0), fixed[-1][0])
    else:
        goal = ((yard - 1.0, y1 - 1.0), GROUND)

    planes = [(GROUND, ground, 0.0)] + [(fid, box, z) for fid, box, z in fixed]
    boxes: list[tuple[tuple, float]] = []
    movable = []

    def put(region, z, half) -> tuple[float, float] | None:
        x0, yy0, x1, yy1 = region
        if x1 - x0 < 2 * half or yy1 - yy0 < 2 * half:
            return None
        for _ in range(200):
            cx = float(rng.uniform(x0 + half, x1 - half))
            cy = float(rng.uniform(yy0 + half, yy1 - half))
            box = (cx - half, cy - half, cx + half, cy + half)
            if z == 0.0 and any(_boxes_overlap(box, b) for _, b, _ in fixed):
                continue
            if any(zz == z and _boxes_overlap(box, b) for b, zz in boxes):
                continue
            if any(np.hypot(cx - p[0][0], cy - p[0][1]) < half * 1.5 + 0.5 for p in (start, goal)):
                continue
            boxes.append((box, z))
            return cx, cy
        return None

    # away from every edge a table shares, and too far from the riser to bridge it
    clear = max(HIGH_STEP, ROBOT_REACH) + 0.2

    def interior(k):
        pid, box, z = planes[k]
        if k == 0:
            return pid, (0.0, y0, yard - clear, y1), z
        return pid, (box[0] + clear, box[1], box[2] - clear, box[3]), z

    keys = [k for k in range(n_tables) if tall[k]]
    for i in range(cfg.n_blocks):
        # clutter is smaller so that many blocks still fit on the interiors
        half = float(rng.uniform(0.8, 1.0) if i < len(keys) else rng.uniform(0.4, 0.7))
        # clutter keeps off the risers too, so each key move stays possible
        k = keys[i] if i < len(keys) else int(rng.integers(len(planes)))
        pid, region, z = interior(k)
        at = put(region, z, half)
        if at is None:
            raise SceneError("could not place blocks")
        # blocks beyond the key ones are too low to bridge a tall rise
        h = BLOCK_HEIGHT if i < len(keys) else CLUTTER_HEIGHT
        movable.append((f"b{i + 1}", rect(-half, -half, half, half), h, (round(at[0], 6), round(at[1], 6), 0.0), z))
    meta = {
        "family": cfg.family,
        "h_target": cfg.h_min,
        "rises": "".join("T" if t else "l" for t in tall),
    }
    return make_scene(
        scene_id,
        rect(*ground),
        [(fid, rect(*box), 0.0, z) for fid, box, z in fixed],
        movable,
        start,
        goal,
        metadata=meta,
    )


def _boxes_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def key_moves(scene: Scene) -> list[Triplet] | None:
    """The intended move list: each key block onto its riser's lower plane."""
    rises = scene.metadata.get("rises")
    if rises is None:
        return None
    below = [GROUND] + [f"P{k + 1}" for k in range(len(rises))]
    tall = [k for k, r in enumerate(rises) if r == "T"]
    return [
        Triplet(f"b{i + 1}", below[k], pair(below[k], below[k + 1], scene))
        for i, k in enumerate(tall)
    ]


def witness_horizon(scene: Scene, seed: int = 0, tries: int = 30) -> int | None:
    """Horizon of a replayed plan made of :func:`key_moves` in order, if one is found."""
    moves = key_moves(scene)
    if moves is None:
        return None
    planner = Planner(scene, SamplerParams(), seed=seed)
    if not set(moves) <= set(planner.triplets):
        return None
    rm = build(scene.initial_environment())
    node = TreeNode(0, None, rm.env, scene.start, rm, 0)
    robot, steps = scene.start, []
    for t in moves:
        out = next((o for o in (planner.sample_move(node, t) for _ in range(tries)) if o is not None), None)
        if out is None:
            return None
        rm, step, robot = out
        steps.append(step)
        node = TreeNode(len(steps), node.id, rm.env, robot, rm, len(steps), step, t)
    if not rm.connected(robot, scene.goal) or not replay(scene, Plan(steps)).ok:
        return None
    return len(steps)


def certify(scene: Scene, h_min: int, max_states: int = 20_000) -> bool:
    """Whether the minimum horizon is exactly ``h_min``.

    The relaxed lower bound together with a replayed plan of that length
    settles it cheaply; otherwise the exhaustive search decides.
    """
    lb = lower_bound(scene)
    if lb > h_min:
        return False
    if lb == h_min and witness_horizon(scene) == h_min:
        return True
    space = DiscretizedActionSpace.for_scene(scene, h_cap=max(h_min, 1), max_states=max_states)
    try:
        res = exhaustive_search(scene, space)
    except BudgetError:
        return False
    return res.horizon == h_min


def generate(cfg: BenchmarkConfig, seed: int) -> Scene:
    """A staircase scene whose certified minimum horizon is ``cfg.h_min``.

    Layouts are redrawn from one seeded stream until one certifies, so the
    result depends only on ``(cfg, seed)``.
    """
    rng = np.random.default_rng([seed, cfg.n_planes, cfg.n_blocks, cfg.h_min])
    scene_id = f"{cfg.family}_s{seed}"
    for attempt in range(cfg.attempts):
        try:
            scene = layout(cfg, rng, scene_id)
        except SceneError:
            continue
        if certify(scene, cfg.h_min):
            return with_metadata(scene, seed=seed, attempt=attempt, certified=True)
    raise GenerationError(f"no scene with minimum horizon {cfg.h_min} after {cfg.attempts} attempts")
