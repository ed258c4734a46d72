"""Symbolic abstraction and high-level plan providers.

The abstract state is the robot's plane, the held block and a label per
block ``(plane, intent)`` where the intent names the plane pair the block
was put down to connect. Breadth-first search over GoTo / Pick / Place
gives the shortest action sequence; its Place actions form the plan that
biases the sampler.
"""

from __future__ import annotations

import json
import logging
import subprocess
from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple, Protocol, Sequence

import numpy as np

from .capabilities import (
    CandidateModel,
    Pair,
    candidate,
    gap,
    intent_pairs,
    robot_plane,
    structural_links,
    support_plane,
)
from .roadmap import Roadmap, remove_block
from .scene import Scene

log = logging.getLogger(__name__)


class Triplet(NamedTuple):
    block: str
    plane: str
    intent: Pair | None

    def __str__(self):
        g = "-" if self.intent is None else f"{self.intent[0]}~{self.intent[1]}"
        return f"({self.block}, {self.plane}, {g})"


class Label(NamedTuple):
    plane: str
    intent: Pair | None


class SymbolicState(NamedTuple):
    plane: str
    held: str | None
    labels: tuple[Label | None, ...]


class Action(NamedTuple):
    kind: str  # "goto", "pick" or "place"
    arg: str | Triplet


def label_environment(rm: Roadmap, where, pairs: Sequence[Pair], rng: np.random.Generator) -> SymbolicState:
    """Abstract a concrete environment.

    A block's intent is a pair it currently holds open: the pair is
    connected now and becomes a gap once the block is lifted. With several
    such pairs one is picked with ``rng``.
    """
    scene = rm.static.scene
    env = rm.env
    open_pairs = [g for g in pairs if not gap(rm, *g)]
    labels = []
    for b in scene.movable:
        cfg = env.config(b.id)
        if cfg is None:
            labels.append(None)
            continue
        sup = support_plane(env, b.id)
        crit = []
        if open_pairs:
            without = remove_block(rm, b.id)
            crit = [g for g in open_pairs if gap(without, *g)]
        intent = crit[int(rng.integers(len(crit)))] if len(crit) > 1 else (crit[0] if crit else None)
        labels.append(Label(sup, intent))
    return SymbolicState(robot_plane(rm, where), None, tuple(labels))


@dataclass
class Domain:
    """Everything the symbolic search needs besides the start state."""

    scene: Scene
    pairs: tuple[Pair, ...]
    links: frozenset[Pair]
    candidates: dict[Pair, tuple[tuple[str, str], ...]]
    goal_plane: str
    banned: frozenset[Triplet] = frozenset()

    @classmethod
    def of(cls, scene: Scene, params, model: CandidateModel | None = None, banned=frozenset()):
        pairs = intent_pairs(scene, params)
        return cls(
            scene=scene,
            pairs=pairs,
            links=structural_links(scene, params),
            candidates={g: candidate(scene, g[0], g[1], model) for g in pairs},
            goal_plane=scene.goal.plane,
            banned=frozenset(banned),
        )

    def triplets(self) -> list[Triplet]:
        out = [Triplet(b.id, p.id, None) for b in self.scene.movable for p in self.scene.fixed_planes]
        for g in self.pairs:
            out.extend(Triplet(b, p, g) for b, p in self.candidates[g])
        return out

    def successors(self, w: SymbolicState):
        scene = self.scene
        planes = [p.id for p in scene.fixed_planes]
        order = {p: i for i, p in enumerate(planes)}
        bridged = {lab.intent for lab in w.labels if lab is not None and lab.intent is not None}
        for p in planes:
            if p == w.plane:
                continue
            g = (w.plane, p) if order[w.plane] < order[p] else (p, w.plane)
            if g in self.links or g in bridged:
                yield Action("goto", p), SymbolicState(p, w.held, w.labels)
        if w.held is None:
            for i, b in enumerate(scene.movable):
                lab = w.labels[i]
                if lab is not None and lab.plane == w.plane:
                    labels = w.labels[:i] + (None,) + w.labels[i + 1 :]
                    yield Action("pick", b.id), SymbolicState(w.plane, b.id, labels)
        else:
            i = scene.movable_index[w.held]
            for g in (None,) + self.pairs:
                t = Triplet(w.held, w.plane, g)
                if t in self.banned:
                    continue
                if g is not None and (w.held, w.plane) not in self.candidates[g]:
                    continue
                labels = w.labels[:i] + (Label(w.plane, g),) + w.labels[i + 1 :]
                yield Action("place", t), SymbolicState(w.plane, None, labels)


def bfs(domain: Domain, start: SymbolicState, max_states: int = 2_000_000) -> list[Action] | None:
    """Shortest action sequence that puts the robot on the goal plane, or ``None``."""
    if start.plane == domain.goal_plane:
        return []
    parent: dict[SymbolicState, tuple[SymbolicState, Action] | None] = {start: None}
    q = deque([start])
    while q:
        w = q.popleft()
        for act, nxt in domain.successors(w):
            if nxt in parent:
                continue
            parent[nxt] = (w, act)
            if nxt.plane == domain.goal_plane:
                path = []
                cur = nxt
                while parent[cur] is not None:
                    prev, a = parent[cur]
                    path.append(a)
                    cur = prev
                return path[::-1]
            if len(parent) > max_states:
                log.warning("symbolic search gave up after %d states", max_states)
                return None
            q.append(nxt)
    return None


def places(actions: Sequence[Action] | None) -> list[Triplet]:
    return [] if actions is None else [a.arg for a in actions if a.kind == "place"]


@dataclass
class PlanRequest:
    domain: Domain
    state: SymbolicState

    def to_json(self) -> dict:
        d = self.domain
        scene = d.scene
        return {
            "planes": [{"id": p.id, "elevation": p.elevation} for p in scene.fixed_planes],
            "blocks": [
                {
                    "id": b.id,
                    "height": b.height,
                    "label": None if lab is None else {"plane": lab.plane, "intent": lab.intent},
                }
                for b, lab in zip(scene.movable, self.state.labels)
            ],
            "robot_plane": self.state.plane,
            "held": self.state.held,
            "goal_plane": d.goal_plane,
            "gap_pairs": [list(g) for g in d.pairs],
            "structural_links": sorted(list(g) for g in d.links),
            "candidates": {f"{g[0]}|{g[1]}": [list(bp) for bp in c] for g, c in d.candidates.items()},
            "banned": [[t.block, t.plane, None if t.intent is None else list(t.intent)] for t in sorted(d.banned)],
        }


class PlanProvider(Protocol):
    def __call__(self, request: PlanRequest) -> list[Triplet]: ...


class BfsProvider:
    name = "bfs"

    def __call__(self, request: PlanRequest) -> list[Triplet]:
        return places(bfs(request.domain, request.state))


def parse_triplets(items, domain: Domain) -> list[Triplet]:
    """Turn JSON-ish triplets into :class:`Triplet` and keep only known ones."""
    known = set(domain.triplets())
    out = []
    for it in items:
        b, p, g = it
        t = Triplet(str(b), str(p), None if g is None else (str(g[0]), str(g[1])))
        if t.intent is not None and t not in known:
            flipped = Triplet(t.block, t.plane, (t.intent[1], t.intent[0]))
            t = flipped if flipped in known else t
        if t in known:
            out.append(t)
        else:
            log.warning("provider returned unknown triplet %s; dropped", t)
    return out


class CommandProvider:
    """Runs an external program that reads a JSON request and prints a JSON plan.

    The reply is ``{"plan": [[block, plane, [a, b] | null], ...]}``.
    """

    name = "external"

    def __init__(self, command: Sequence[str], timeout: float = 60.0):
        self.command = list(command)
        self.timeout = timeout

    def __call__(self, request: PlanRequest) -> list[Triplet]:
        proc = subprocess.run(
            self.command,
            input=json.dumps(request.to_json()),
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            log.warning("plan command failed (%d): %s", proc.returncode, proc.stderr.strip())
            return []
        try:
            reply = json.loads(proc.stdout)
            return parse_triplets(reply.get("plan", []), request.domain)
        except (ValueError, TypeError, AttributeError) as e:
            log.warning("plan command returned malformed output: %s", e)
            return []


class CallableProvider:
    """Adapts a plain function ``request -> list of triplets``."""

    name = "external"

    def __init__(self, fn: Callable[[PlanRequest], Sequence]):
        self.fn = fn

    def __call__(self, request: PlanRequest) -> list[Triplet]:
        return parse_triplets(self.fn(request), request.domain)
