"""Random small scenes for property tests: loose rectangles, not staircases."""

from __future__ import annotations

import numpy as np

from blockbridge.geometry import Polygon2D, overlaps
from blockbridge.roadmap import apply_move, build
from blockbridge.sampler import PoseSampler
from blockbridge.scene import SceneError, make_scene, rect


def _box(rng, lo, hi, w_range):
    w, h = rng.uniform(*w_range, size=2)
    x = rng.uniform(lo[0], hi[0] - w)
    y = rng.uniform(lo[1], hi[1] - h)
    return (x, y, x + w, y + h)


def random_scene(rng: np.random.Generator, n_fixed: int = 3, n_blocks: int = 2, size: float = 12.0):
    """A valid scene with up to ``n_fixed`` fixed blocks and ``n_blocks`` movable ones.

    Heights and sizes are drawn wide on purpose so that some placements fit,
    some do not, and some candidate pairs cannot actually be bridged.
    """
    for _ in range(200):
        fixed, boxes = [], []
        for i in range(n_fixed):
            b = _box(rng, (0.5, 0.5), (size - 0.5, size - 0.5), (1.0, 6.0))
            if any(overlaps(Polygon2D(rect(*b)), Polygon2D(rect(*o))) for o in boxes):
                continue
            boxes.append(b)
            fixed.append((f"F{i}", rect(*b), 0.0, float(rng.choice([0.6, 1.0, 1.5, 2.0, 2.8, 3.5]))))
        if not fixed:
            continue
        planes = [("ground", (0.0, 0.0, size, size), 0.0)] + [(f[0], boxes[k], f[3]) for k, f in enumerate(fixed)]
        movable, placed = [], []
        for j in range(n_blocks):
            side = float(rng.uniform(0.6, 2.4))
            h = float(rng.choice([0.4, 0.8, 1.0, 1.5, 2.0]))
            pid, (x0, y0, x1, y1), z = planes[int(rng.integers(len(planes)))]
            if x1 - x0 <= side or y1 - y0 <= side:
                continue
            cx, cy = rng.uniform(x0 + side / 2, x1 - side / 2), rng.uniform(y0 + side / 2, y1 - side / 2)
            fp = Polygon2D(rect(cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2))
            clash = any(overlaps(fp, Polygon2D(rect(*o))) for o in boxes) if pid == "ground" else False
            clash = clash or any(overlaps(fp, q) for q in placed)
            if clash:
                continue
            placed.append(fp)
            half = side / 2
            movable.append((f"m{j}", rect(-half, -half, half, half), h, (cx, cy, 0.0), z))
        if n_blocks and not movable:
            continue
        goal_plane = fixed[int(rng.integers(len(fixed)))]
        gx0, gy0, gx1, gy1 = boxes[fixed.index(goal_plane)]
        start = ((0.25, 0.25), "ground")
        goal = (((gx0 + gx1) / 2, (gy0 + gy1) / 2), goal_plane[0])
        try:
            return make_scene(
                f"rand{int(rng.integers(1 << 30))}",
                ground=rect(0, 0, size, size),
                fixed=fixed,
                movable=movable,
                start=start,
                goal=goal,
            )
        except SceneError:
            continue
    raise RuntimeError("could not draw a valid random scene")


def random_moves(scene, rng, n_moves):
    """Draw up to ``n_moves`` legal moves by rejection on random fixed planes."""
    env = scene.initial_environment()
    moves = []
    planes = scene.fixed_planes
    for _ in range(n_moves):
        b = scene.movable[int(rng.integers(len(scene.movable)))]
        plane = planes[int(rng.integers(len(planes)))]
        sampler = PoseSampler(env.without(b.id), b, plane, None, 0.0, 400)
        cfg, _ = sampler.draw(rng)
        if cfg is None:
            continue
        moves.append((b.id, cfg))
        env = env.with_config(b.id, cfg)
    return moves, env


def incremental_matches_rebuild(scene, rng, n_moves=5) -> bool:
    rm = build(scene.initial_environment())
    moves, env = random_moves(scene, rng, n_moves)
    for bid, cfg in moves:
        rm = apply_move(rm, bid, cfg)
    fresh = build(env)
    assert rm.env == env
    return rm.components() == fresh.components()
