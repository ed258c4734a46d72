"""Reference external plan provider.

Reads a plan request (JSON) on stdin and prints ``{"plan": [...]}`` found by
breadth-first search over the request alone, without the scene file. Use
it as ``--provider "python3 -m blockbridge.provider"``; it doubles as an
example of the request/reply format for other providers.
"""

from __future__ import annotations

import json
import sys
from types import SimpleNamespace

from .symbolic import Domain, Label, SymbolicState, Triplet, bfs, places


def _pair(g) -> tuple[str, str] | None:
    return None if g is None else (str(g[0]), str(g[1]))


def from_request(doc: dict) -> tuple[Domain, SymbolicState]:
    blocks = [SimpleNamespace(id=b["id"]) for b in doc["blocks"]]
    scene = SimpleNamespace(
        movable=blocks,
        fixed_planes=[SimpleNamespace(id=p["id"]) for p in doc["planes"]],
        movable_index={b.id: i for i, b in enumerate(blocks)},
    )
    pairs = tuple(_pair(g) for g in doc["gap_pairs"])
    cands = {}
    for key, items in doc["candidates"].items():
        a, b = key.split("|")
        cands[(a, b)] = tuple((str(x), str(y)) for x, y in items)
    domain = Domain(
        scene=scene,
        pairs=pairs,
        links=frozenset(_pair(g) for g in doc["structural_links"]),
        candidates=cands,
        goal_plane=doc["goal_plane"],
        banned=frozenset(Triplet(b, p, _pair(g)) for b, p, g in doc["banned"]),
    )
    labels = tuple(
        None if b["label"] is None else Label(b["label"]["plane"], _pair(b["label"]["intent"])) for b in doc["blocks"]
    )
    return domain, SymbolicState(doc["robot_plane"], doc["held"], labels)


def main() -> int:
    doc = json.load(sys.stdin)
    domain, state = from_request(doc)
    plan = places(bfs(domain, state))
    json.dump({"plan": [[t.block, t.plane, None if t.intent is None else list(t.intent)] for t in plan]}, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
