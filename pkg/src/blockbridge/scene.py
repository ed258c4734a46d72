"""Scenes, environments and the text scene format.

A scene is a ground polygon, a list of prismatic blocks (some movable), a
robot model and start/goal positions. Scene files are YAML documents; the
writer is hand-rolled so that ``dump_scene(load_scene(text)) == text`` for
files it produced.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import yaml

from .geometry import GeometryError, Polygon2D, contains, overlaps, posed

GROUND = "ground"


class SceneError(ValueError):
    """Malformed scene document or violated scene invariant."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RobotModel:
    climb_height: float = 1.2
    lateral_step: float = 2.0
    manip_radius: float = 1.9

    def __post_init__(self):
        for name in ("climb_height", "lateral_step", "manip_radius"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise SceneError(f"robot {name} must be a positive number, got {v!r}")

    def step_reachable(self, dz, dxy):
        """Strict height bound, lateral distance strictly below the step length."""
        return (np.abs(dz) < self.climb_height) & (np.asarray(dxy) < self.lateral_step)


@dataclass(frozen=True)
class BlockConfig:
    footprint: Polygon2D
    base_height: float
    height: float
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def top_height(self) -> float:
        return self.base_height + self.height

    def __post_init__(self):
        if not self.height > 0:
            raise SceneError(f"block height must be positive, got {self.height}")


@dataclass(frozen=True)
class Block:
    id: str
    movable: bool
    height: float
    # movable blocks keep a canonical footprint centred on the origin
    shape: Polygon2D | None
    initial: BlockConfig

    def at(self, x: float, y: float, yaw: float, base: float) -> BlockConfig:
        if self.shape is None:
            raise SceneError(f"block {self.id} is not movable")
        return BlockConfig(posed(self.shape, x, y, yaw), float(base), self.height, (float(x), float(y), float(yaw)))


@dataclass(frozen=True)
class Plane:
    id: str
    elevation: float
    boundary: Polygon2D
    movable: bool


@dataclass(frozen=True)
class Position:
    xy: tuple[float, float]
    plane: str

    def __post_init__(self):
        object.__setattr__(self, "xy", (float(self.xy[0]), float(self.xy[1])))


@dataclass(frozen=True, eq=False)
class Scene:
    scene_id: str
    ground: Polygon2D
    blocks: tuple[Block, ...]
    robot: RobotModel
    start: Position
    goal: Position
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [GROUND] + [b.id for b in self.blocks]
        if len(set(ids)) != len(ids):
            raise SceneError("block ids must be unique and differ from 'ground'")
        object.__setattr__(self, "_index", {b.id: i for i, b in enumerate(self.blocks)})
        object.__setattr__(self, "movable", tuple(b for b in self.blocks if b.movable))
        object.__setattr__(self, "fixed", tuple(b for b in self.blocks if not b.movable))
        object.__setattr__(self, "movable_index", {b.id: i for i, b in enumerate(self.movable)})

    def block(self, block_id: str) -> Block:
        try:
            return self.blocks[self._index[block_id]]
        except KeyError:
            raise KeyError(f"unknown block {block_id!r}") from None

    @property
    def fixed_planes(self) -> tuple[Plane, ...]:
        planes = [Plane(GROUND, 0.0, self.ground, False)]
        for b in self.fixed:
            planes.append(Plane(b.id, b.initial.top_height, b.initial.footprint, False))
        return tuple(planes)

    def initial_environment(self) -> "Environment":
        return Environment(self, tuple(b.initial for b in self.movable))

    @property
    def digest(self) -> str:
        return hashlib.sha256(dump_scene(self).encode()).hexdigest()[:16]


class Environment:
    """Immutable assignment of configurations to the movable blocks.

    ``None`` marks a block that is held (absent from the world).
    """

    __slots__ = ("scene", "configs", "_hash")

    def __init__(self, scene: Scene, configs: tuple[BlockConfig | None, ...]):
        self.scene = scene
        self.configs = configs
        self._hash = None

    def __eq__(self, other):
        return isinstance(other, Environment) and other.scene is self.scene and other.configs == self.configs

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.configs)
        return self._hash

    def config(self, block_id: str) -> BlockConfig | None:
        return self.configs[self.scene.movable_index[block_id]]

    def with_config(self, block_id: str, cfg: BlockConfig | None) -> "Environment":
        cf = list(self.configs)
        cf[self.scene.movable_index[block_id]] = cfg
        return Environment(self.scene, tuple(cf))

    def without(self, block_id: str) -> "Environment":
        return self.with_config(block_id, None)

    def present(self) -> Iterable[tuple[Block, BlockConfig]]:
        """Every block in the world, fixed ones first."""
        for b in self.scene.fixed:
            yield b, b.initial
        for b, cfg in zip(self.scene.movable, self.configs):
            if cfg is not None:
                yield b, cfg

    def planes(self) -> tuple[Plane, ...]:
        out = list(self.scene.fixed_planes)
        for b, cfg in zip(self.scene.movable, self.configs):
            if cfg is not None:
                out.append(Plane(b.id, cfg.top_height, cfg.footprint, True))
        return tuple(out)

    def plane(self, plane_id: str) -> Plane:
        for p in self.planes():
            if p.id == plane_id:
                return p
        raise KeyError(f"unknown or absent plane {plane_id!r}")

    def support_of(self, cfg: BlockConfig) -> str | None:
        """Fixed plane a configuration rests on, if any."""
        for p in self.scene.fixed_planes:
            if abs(p.elevation - cfg.base_height) <= 1e-9 and contains(p.boundary, cfg.footprint.vertices).all():
                return p.id
        return None


def footprint_fits(env: Environment, block_id: str, cfg: BlockConfig, plane: Plane) -> bool:
    """Whether ``cfg`` lies inside ``plane`` at its elevation without hitting another block."""
    if abs(cfg.base_height - plane.elevation) > 1e-9:
        return False
    if not contains(plane.boundary, cfg.footprint.vertices, tol=1e-7).all():
        return False
    lo, hi = cfg.base_height, cfg.top_height
    for other, ocfg in env.present():
        if other.id == block_id:
            continue
        if ocfg.base_height < hi - 1e-9 and lo < ocfg.top_height - 1e-9 and overlaps(cfg.footprint, ocfg.footprint):
            return False
    return True


def validate(scene: Scene) -> None:
    env = scene.initial_environment()
    for b in scene.blocks:
        cfg = b.initial
        sup = None
        for p in scene.fixed_planes:
            if p.id == b.id:
                continue
            if abs(p.elevation - cfg.base_height) <= 1e-9 and contains(p.boundary, cfg.footprint.vertices, tol=1e-7).all():
                sup = p
                break
        if sup is None:
            raise SceneError(f"block {b.id} does not rest inside any fixed plane at base {cfg.base_height}")
        if not footprint_fits(env, b.id, cfg, sup):
            raise SceneError(f"block {b.id} overlaps another block")
    ids = {p.id: p for p in env.planes()}
    if scene.goal.plane in scene.movable_index:
        raise SceneError(f"goal must lie on a fixed plane, not on movable block {scene.goal.plane}")
    for name, pos in (("start", scene.start), ("goal", scene.goal)):
        if pos.plane not in ids:
            raise SceneError(f"{name} plane {pos.plane!r} does not exist")
        if not contains(ids[pos.plane].boundary, np.array(pos.xy), tol=1e-7):
            raise SceneError(f"{name} position {pos.xy} lies outside plane {pos.plane}")


# --------------------------------------------------------------------------
# text format


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise SceneError(f"non-finite number {x}")
    r = repr(x)
    if "e" in r and "." not in r.split("e")[0]:
        m, e = r.split("e")
        r = f"{m}.0e{e}"
    return r


def _pts(poly: Polygon2D) -> str:
    return "[" + ", ".join(f"[{_fmt(x)}, {_fmt(y)}]" for x, y in poly.vertices) + "]"


def _pos(p: Position) -> str:
    return f"{{plane: {p.plane}, xy: [{_fmt(p.xy[0])}, {_fmt(p.xy[1])}]}}"


def dump_scene(scene: Scene) -> str:
    r = scene.robot
    lines = [
        f"scene_id: {scene.scene_id}",
        "robot:",
        f"  climb_height: {_fmt(r.climb_height)}",
        f"  lateral_step: {_fmt(r.lateral_step)}",
        f"  manip_radius: {_fmt(r.manip_radius)}",
        f"start: {_pos(scene.start)}",
        f"goal: {_pos(scene.goal)}",
        f"ground: {_pts(scene.ground)}",
        "blocks:",
    ]
    for b in scene.blocks:
        lines.append(f"  - id: {b.id}")
        lines.append(f"    movable: {'true' if b.movable else 'false'}")
        lines.append(f"    height: {_fmt(b.height)}")
        lines.append(f"    base: {_fmt(b.initial.base_height)}")
        if b.movable:
            x, y, yaw = b.initial.pose
            lines.append(f"    shape: {_pts(b.shape)}")
            lines.append(f"    pose: [{_fmt(x)}, {_fmt(y)}, {_fmt(yaw)}]")
        else:
            lines.append(f"    footprint: {_pts(b.initial.footprint)}")
    if scene.metadata:
        meta = yaml.safe_dump(scene.metadata, default_flow_style=True, sort_keys=True, width=10**6).strip()
        lines.append(f"metadata: {meta}")
    return "\n".join(lines) + "\n"


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(dump_scene(scene))


class _Doc:
    """Typed accessors over a composed YAML node that report source lines."""

    def __init__(self, node: yaml.Node):
        self.node = node

    @property
    def line(self) -> int:
        return self.node.start_mark.line + 1

    def fail(self, msg: str):
        raise SceneError(msg, self.line)

    def mapping(self) -> dict[str, "_Doc"]:
        if not isinstance(self.node, yaml.MappingNode):
            self.fail("expected a mapping")
        out = {}
        for k, v in self.node.value:
            if not isinstance(k, yaml.ScalarNode):
                _Doc(k).fail("mapping keys must be scalars")
            if k.value in out:
                _Doc(k).fail(f"duplicate key {k.value!r}")
            out[k.value] = _Doc(v)
        return out

    def seq(self) -> list["_Doc"]:
        if not isinstance(self.node, yaml.SequenceNode):
            self.fail("expected a sequence")
        return [_Doc(v) for v in self.node.value]

    def str(self) -> str:
        if not isinstance(self.node, yaml.ScalarNode) or self.node.value == "":
            self.fail("expected a non-empty string")
        return self.node.value

    def num(self) -> float:
        if not isinstance(self.node, yaml.ScalarNode):
            self.fail("expected a number")
        try:
            v = float(self.node.value)
        except ValueError:
            self.fail(f"expected a number, got {self.node.value!r}")
        if not math.isfinite(v):
            self.fail("number must be finite")
        return v

    def bool(self) -> bool:
        v = self.str().lower()
        if v not in ("true", "false"):
            self.fail(f"expected true or false, got {v!r}")
        return v == "true"

    def polygon(self) -> Polygon2D:
        pts = []
        for p in self.seq():
            xy = p.seq()
            if len(xy) != 2:
                p.fail("points need two coordinates")
            pts.append([xy[0].num(), xy[1].num()])
        try:
            return Polygon2D(pts)
        except GeometryError as e:
            self.fail(str(e))

    def vec(self, n: int) -> list[float]:
        items = self.seq()
        if len(items) != n:
            self.fail(f"expected {n} numbers")
        return [i.num() for i in items]

    def plain(self) -> Any:
        return yaml.safe_load(yaml.serialize(self.node))


def _require(m: dict[str, _Doc], key: str, where: _Doc) -> _Doc:
    if key not in m:
        where.fail(f"missing key {key!r}")
    return m[key]


def _position(d: _Doc) -> Position:
    m = d.mapping()
    xy = _require(m, "xy", d).vec(2)
    return Position((xy[0], xy[1]), _require(m, "plane", d).str())


def parse_scene(text: str) -> Scene:
    try:
        root_node = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise SceneError(f"YAML syntax error: {getattr(e, 'problem', e)}", mark.line + 1 if mark else None) from None
    if root_node is None:
        raise SceneError("empty scene document", 1)
    root = _Doc(root_node)
    m = root.mapping()
    known = {"scene_id", "robot", "start", "goal", "ground", "blocks", "metadata"}
    for k, v in m.items():
        if k not in known:
            v.fail(f"unknown key {k!r}")
    robot = RobotModel()
    if "robot" in m:
        rm = m["robot"].mapping()
        kw = {}
        for k, v in rm.items():
            if k not in ("climb_height", "lateral_step", "manip_radius"):
                v.fail(f"unknown robot key {k!r}")
            kw[k] = v.num()
        try:
            robot = RobotModel(**kw)
        except SceneError as e:
            m["robot"].fail(str(e))
    blocks = []
    for bd in _require(m, "blocks", root).seq():
        bm = bd.mapping()
        bid = _require(bm, "id", bd).str()
        movable = _require(bm, "movable", bd).bool()
        height = _require(bm, "height", bd).num()
        base = _require(bm, "base", bd).num()
        if height <= 0:
            bm["height"].fail("height must be positive")
        if movable:
            shape = _require(bm, "shape", bd).polygon()
            x, y, yaw = _require(bm, "pose", bd).vec(3)
            if np.hypot(*shape.centroid) > 1e-6:
                bm["shape"].fail("movable shape must be centred on the origin")
            cfg = BlockConfig(posed(shape, x, y, yaw), base, height, (x, y, yaw))
            blocks.append(Block(bid, True, height, shape, cfg))
        else:
            fp = _require(bm, "footprint", bd).polygon()
            blocks.append(Block(bid, False, height, None, BlockConfig(fp, base, height)))
        for k in bm:
            if k not in ("id", "movable", "height", "base", "shape", "pose", "footprint"):
                bm[k].fail(f"unknown block key {k!r}")
    try:
        scene = Scene(
            scene_id=_require(m, "scene_id", root).str(),
            ground=_require(m, "ground", root).polygon(),
            blocks=tuple(blocks),
            robot=robot,
            start=_position(_require(m, "start", root)),
            goal=_position(_require(m, "goal", root)),
            metadata=m["metadata"].plain() if "metadata" in m else {},
        )
        validate(scene)
    except SceneError as e:
        if e.line is not None:
            raise
        # attribute invariant failures to the block list when we can
        where = m.get("blocks", root)
        for bd in where.seq() if where is not root else []:
            bid = bd.mapping().get("id")
            if bid is not None and bid.node.value in str(e):
                raise SceneError(str(e), bd.line) from None
        raise SceneError(str(e), root.line) from None
    return scene


def load_scene(path: str | Path) -> Scene:
    return parse_scene(Path(path).read_text())


def make_scene(
    scene_id: str,
    ground: Iterable,
    fixed: Iterable[tuple[str, Iterable, float, float]],
    movable: Iterable[tuple[str, Iterable, float, tuple[float, float, float], float]],
    start: tuple[tuple[float, float], str],
    goal: tuple[tuple[float, float], str],
    robot: RobotModel | None = None,
    metadata: dict | None = None,
) -> Scene:
    """Build and validate a scene from plain tuples.

    ``fixed`` items are ``(id, footprint, base, height)``; ``movable`` items
    are ``(id, shape, height, (x, y, yaw), base)``.
    """
    blocks = []
    for bid, fp, base, h in fixed:
        poly = Polygon2D(fp)
        blocks.append(Block(bid, False, float(h), None, BlockConfig(poly, float(base), float(h))))
    for bid, shape, h, (x, y, yaw), base in movable:
        sh = Polygon2D(shape)
        c = sh.centroid
        sh = Polygon2D(sh.vertices - c)
        cfg = BlockConfig(posed(sh, x, y, yaw), float(base), float(h), (float(x), float(y), float(yaw)))
        blocks.append(Block(bid, True, float(h), sh, cfg))
    scene = Scene(
        scene_id=scene_id,
        ground=Polygon2D(ground),
        blocks=tuple(blocks),
        robot=robot or RobotModel(),
        start=Position(*start),
        goal=Position(*goal),
        metadata=dict(metadata or {}),
    )
    validate(scene)
    return scene


def with_metadata(scene: Scene, **kw) -> Scene:
    meta = dict(scene.metadata)
    meta.update(kw)
    return replace(scene, metadata=meta)


def rect(x0: float, y0: float, x1: float, y1: float) -> list[list[float]]:
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
