"""Biased sampling distributions for tree node, triplet and block pose."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, TypeVar

import numpy as np

from .geometry import Band, Polygon2D, contains, delta_band, distance_to
from .scene import Block, BlockConfig, Environment, Plane

T = TypeVar("T")


@dataclass(frozen=True)
class SamplerParams:
    p_plan: float = 0.9
    p1: float = 0.85
    p2: float = 0.15
    p3: float = 0.05
    p_gap: float = 0.9
    # None means lateral step plus the block's circumradius
    delta: float | None = None
    n_trials: int = 100
    k_max: int = 10_000
    mode: str = "bfs"
    replan: bool = True
    pose_attempts: int = 200

    def __post_init__(self):
        for name in ("p_plan", "p1", "p2", "p3", "p_gap"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.mode not in ("bfs", "uniform", "external"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.n_trials < 1 or self.k_max < 1:
            raise ValueError("n_trials and k_max must be positive")

    @property
    def weights(self) -> tuple[float, float, float]:
        s = self.p1 + self.p2 + self.p3
        return (self.p1 / s, self.p2 / s, self.p3 / s)


def sample_node(rng: np.random.Generator, leading: Sequence[T], rest: Sequence[T], p_plan: float) -> T:
    """Pick from ``leading`` with mass ``p_plan`` and from ``rest`` otherwise.

    An empty side gives all of its mass to the other.
    """
    if not leading and not rest:
        raise ValueError("no nodes to sample from")
    if not rest or (leading and rng.random() < p_plan):
        return leading[int(rng.integers(len(leading)))]
    return rest[int(rng.integers(len(rest)))]


def sample_from_set(rng: np.random.Generator, items: Sequence[T]) -> T | None:
    """Uniform draw; ``None`` signals an empty set (a failed trial)."""
    if not len(items):
        return None
    return items[int(rng.integers(len(items)))]


def sample_triplet(rng: np.random.Generator, buckets: Sequence[Sequence[T]], weights: Sequence[float]) -> tuple[T, int]:
    """Choose a non-empty bucket in proportion to its weight, then uniformly inside it.

    Returns the item and the bucket index. Weights of empty buckets are
    dropped and the rest renormalised.
    """
    w = np.array([wt if len(b) else 0.0 for b, wt in zip(buckets, weights)], dtype=float)
    if w.sum() <= 0:
        sizes = np.array([len(b) for b in buckets], dtype=float)
        if sizes.sum() == 0:
            raise ValueError("no triplets to sample from")
        w = sizes
    k = int(rng.choice(len(buckets), p=w / w.sum()))
    b = buckets[k]
    return b[int(rng.integers(len(b)))], k


def band_delta(params: SamplerParams, block: Block, lateral_step: float) -> float:
    if params.delta is not None:
        return params.delta
    return lateral_step + block.shape.circumradius((0.0, 0.0))


def target_plane(intent, placement: str, planes: dict[str, Plane]) -> Plane | None:
    """Plane whose outline the bias band is built around.

    The other member of the pair when the placement plane is one of them,
    otherwise the higher of the two.
    """
    if intent is None:
        return None
    a, b = intent
    if placement == a:
        return planes[b]
    if placement == b:
        return planes[a]
    pa, pb = planes[a], planes[b]
    return pa if pa.elevation >= pb.elevation else pb


def sample_in(
    rng: np.random.Generator,
    region: Polygon2D,
    n: int,
    band: Band | None = None,
    outside: bool = False,
    window: tuple[float, float, float, float] | None = None,
):
    """Up to ``n`` uniform points in ``region`` (optionally inside / outside ``band``).

    ``window`` narrows the proposal box; points outside it are never drawn.
    """
    x0, y0, x1, y1 = region.bbox
    if window is not None:
        x0, y0 = max(x0, window[0]), max(y0, window[1])
        x1, y1 = min(x1, window[2]), min(y1, window[3])
        if x0 > x1 or y0 > y1:
            return np.zeros((0, 2))
    pts = rng.uniform((x0, y0), (x1, y1), size=(n, 2))
    keep = contains(region, pts)
    if band is not None:
        inb = band.contains(pts)
        keep &= ~inb if outside else inb
    return pts[keep]


@lru_cache(maxsize=4096)
def free_window(plane: Plane, fixed: tuple[Polygon2D, ...], inradius: float):
    """Box holding every centroid at which a block of this inradius can stand.

    A fitting block keeps a free disc of radius ``inradius`` around its
    centroid. Some grid point lies within ``slack`` of that centroid and so
    keeps a free disc of radius ``inradius - slack``; the box of such grid
    points, grown by ``slack``, covers every fitting centroid. Returns
    ``None`` when no grid point qualifies.
    """
    step = inradius / 2.0
    slack = step / np.sqrt(2.0)
    need = inradius - slack - 1e-9
    bnd = plane.boundary
    x0, y0, x1, y1 = bnd.bbox
    gx = np.arange(x0, x1 + step, step)
    gy = np.arange(y0, y1 + step, step)
    pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
    # clearance to the (convex) plane boundary
    inner = ((bnd.normals * bnd.vertices).sum(axis=1)[None, :] - pts @ bnd.normals.T).min(axis=1)
    keep = inner >= need
    for fp in fixed:
        near = keep.copy()
        near[keep] = distance_to(fp, pts[keep]) < need
        keep &= ~near
    if not keep.any():
        return None
    lo = pts[keep].min(axis=0) - slack - 1e-9
    hi = pts[keep].max(axis=0) + slack + 1e-9
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


class PoseSampler:
    """Draws block configurations on one plane with the band bias.

    With probability ``p_gap`` the centroid is uniform over the band,
    otherwise uniform over the rest of the plane; yaw is uniform. Poses
    that do not fit are rejected and redrawn.
    """

    def __init__(self, env: Environment, block: Block, plane: Plane, band: Band | None, p_gap: float, attempts: int):
        self.env = env
        self.block = block
        self.plane = plane
        self.band = band if band is not None and not band.empty else None
        self.p_gap = p_gap
        self.attempts = attempts
        self._inner = self.band.outer if self.band is not None else None
        # batched version of footprint_fits: containment by half-planes, then occupants
        bnd = plane.boundary
        self._normals = bnd.normals
        self._offsets = (bnd.normals * bnd.vertices).sum(axis=1)
        self._local = block.shape.vertices
        self._local_offsets = (block.shape.normals * block.shape.vertices).sum(axis=1)
        lo, hi = plane.elevation, plane.elevation + block.height
        blocking = [
            (b, c) for b, c in env.present() if b.id != block.id and c.base_height < hi - 1e-9 and lo < c.top_height - 1e-9
        ]
        self._occupants = [c.footprint for _, c in blocking]
        inradius = float(self._local_offsets.min())
        fixed = tuple(c.footprint for b, c in blocking if not b.movable)
        self._window = free_window(plane, fixed, inradius) if inradius > 0 else bnd.bbox

    def fit_mask(self, pts: np.ndarray, yaws: np.ndarray) -> np.ndarray:
        """Vectorised footprint_fits for centroids ``pts`` with ``yaws``."""
        out = np.zeros(len(pts), dtype=bool)
        if not len(pts):
            return out
        c, s = np.cos(yaws), np.sin(yaws)
        lx, ly = self._local[:, 0], self._local[:, 1]
        vx = lx[None, :] * c[:, None] - ly[None, :] * s[:, None] + pts[:, :1]
        vy = lx[None, :] * s[:, None] + ly[None, :] * c[:, None] + pts[:, 1:]
        d = vx[..., None] * self._normals[:, 0] + vy[..., None] * self._normals[:, 1] - self._offsets
        ok = np.nonzero((d <= 1e-7).all(axis=(1, 2)))[0]
        if not self._occupants or not len(ok):
            out[ok] = True
            return out
        vx, vy = vx[ok], vy[ok]
        bx0, by0, bx1, by1 = vx.min(), vy.min(), vx.max(), vy.max()
        occupants = [
            o for o in self._occupants
            if not (o.bbox[0] >= bx1 or o.bbox[2] <= bx0 or o.bbox[1] >= by1 or o.bbox[3] <= by0)
        ]
        free = np.ones(len(ok), dtype=bool)
        if occupants:
            # batched separating-axis test against each occupant; touching is fine
            nx = np.stack([np.roll(vy, -1, axis=1) - vy, vx - np.roll(vx, -1, axis=1)], axis=-1)
            for o in occupants:
                ov = o.vertices
                ax = np.concatenate([nx, np.broadcast_to(o.normals, (len(ok),) + o.normals.shape)], axis=1)
                pa = vx[:, :, None] * ax[:, None, :, 0] + vy[:, :, None] * ax[:, None, :, 1]
                pb = ov[None, :, None, 0] * ax[:, None, :, 0] + ov[None, :, None, 1] * ax[:, None, :, 1]
                # tolerance scaled to the unnormalised block-edge axes
                scale = np.hypot(ax[..., 0], ax[..., 1])
                sep = (pa.max(1) - pb.min(1) <= 1e-9 * scale) | (pb.max(1) - pa.min(1) <= 1e-9 * scale)
                free &= sep.any(axis=1)
        out[ok[free]] = True
        return out

    def _first_fit(self, pts: np.ndarray, yaws: np.ndarray) -> int | None:
        hit = np.flatnonzero(self.fit_mask(pts, yaws))
        return int(hit[0]) if len(hit) else None

    def draw(self, rng: np.random.Generator) -> tuple[BlockConfig | None, bool]:
        """One configuration and whether it came from the band branch."""
        in_band = self.band is not None and rng.random() < self.p_gap
        region = self._inner if in_band else self.plane.boundary
        if self._window is None:
            return None, in_band
        tries, batch = 0, 16
        while tries < self.attempts:
            # growing batches; taking the first fit keeps the draw order-independent
            batch = min(batch, self.attempts - tries)
            pts = sample_in(rng, region, batch, self.band, outside=not in_band and self.band is not None, window=self._window)
            yaws = rng.uniform(0.0, 2 * np.pi, size=len(pts))
            tries += batch
            batch *= 2
            if len(pts):
                i = self._first_fit(pts, yaws)
                if i is not None:
                    return self.block.at(pts[i, 0], pts[i, 1], yaws[i], self.plane.elevation), in_band
        return None, in_band


def make_pose_sampler(env: Environment, block: Block, plane: Plane, intent, params: SamplerParams, lateral_step: float):
    band = None
    if intent is not None:
        planes = {p.id: p for p in env.planes()}
        tgt = target_plane(intent, plane.id, planes)
        band = delta_band(tgt.boundary, plane.boundary, band_delta(params, block, lateral_step))
    return PoseSampler(env, block, plane, band, params.p_gap, params.pose_attempts)
