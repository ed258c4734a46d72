"""Hand-built reference scenes.

``single_bridge`` is the one-block illustration: a low platform next to a
high one, and a block on the floor that closes the step. ``two_tables`` is
the six-move scenario: two tables, three blocks on them, and a block that
has to be carried off a riser on one table and set between two risers on
the other. ``swap_bridge`` and ``decoy_blocks`` are small two-move scenes
used for candidate-corruption experiments.
"""

from __future__ import annotations

from importlib import resources

from .scene import Scene, load_scene, make_scene, rect


def sq(side: float) -> list[list[float]]:
    h = side / 2.0
    return rect(-h, -h, h, h)


def single_bridge() -> Scene:
    return make_scene(
        "single_bridge",
        ground=rect(0, 0, 14, 12),
        fixed=[("P1", rect(1, 4, 13, 8), 0.0, 1.0), ("P2", rect(3, 8, 11, 11), 0.0, 3.0)],
        movable=[("b1", sq(2.0), 1.0, (11.5, 1.5, 0.0), 0.0)],
        start=((1.0, 1.0), "ground"),
        goal=((7.0, 10.0), "P2"),
        metadata={"h_min": 1},
    )


def two_tables() -> Scene:
    # table tops at 2; riser O at 3, riser Y at 5 (goal), riser R at 4
    return make_scene(
        "two_tables",
        ground=rect(0, 0, 30, 18),
        fixed=[
            ("T1", rect(1, 1, 13, 17), 0.0, 2.0),
            ("T2", rect(21, 1, 29, 17), 0.0, 2.0),
            ("O", rect(9, 10, 12, 14), 2.0, 1.0),
            ("Y", rect(3, 10, 6, 14), 2.0, 3.0),
            ("R", rect(22, 8, 28, 16), 2.0, 2.0),
        ],
        movable=[
            ("b1", sq(2.0), 1.0, (8.0, 5.0, 0.0), 2.0),
            ("b2", sq(2.0), 1.0, (17.0, 3.0, 0.0), 0.0),
            ("b3", sq(2.0), 2.0, (25.0, 12.0, 0.0), 4.0),
        ],
        start=((17.0, 9.0), "ground"),
        goal=((4.5, 12.0), "Y"),
        metadata={"h_min": 6},
    )


def swap_bridge() -> Scene:
    """Two ledges; the low one needs a short block, the high one a tall one."""
    return make_scene(
        "swap_bridge",
        ground=rect(0, 0, 16, 12),
        fixed=[("P1", rect(1, 6, 15, 11), 0.0, 1.6), ("P2", rect(4, 8, 12, 11), 1.6, 1.9)],
        movable=[
            ("b1", sq(2.0), 1.0, (4.0, 2.5, 0.0), 0.0),
            ("b2", sq(2.0), 0.6, (11.0, 2.5, 0.0), 0.0),
        ],
        start=((8.0, 1.0), "ground"),
        goal=((8.0, 10.0), "P2"),
        metadata={"h_min": 2},
    )


def decoy_blocks() -> Scene:
    """``swap_bridge`` plus five short blocks on the floor that bridge nothing."""
    decoys = [(f"d{i}", sq(1.0), 0.3, (1.5 + 2.0 * i, 4.5, 0.0), 0.0) for i in range(1, 6)]
    return make_scene(
        "decoy_blocks",
        ground=rect(0, 0, 16, 12),
        fixed=[("P1", rect(1, 6, 15, 11), 0.0, 1.6), ("P2", rect(4, 8, 12, 11), 1.6, 1.9)],
        movable=[
            ("b1", sq(2.0), 1.0, (4.0, 2.5, 0.0), 0.0),
            ("b2", sq(2.0), 0.6, (11.0, 2.5, 0.0), 0.0),
        ]
        + decoys,
        start=((8.0, 1.0), "ground"),
        goal=((8.0, 10.0), "P2"),
        metadata={"h_min": 2},
    )


def load_builtin(name: str) -> Scene:
    path = resources.files("blockbridge") / "data" / f"{name}.yaml"
    return load_scene(str(path))


BUILTIN = {
    "single_bridge": single_bridge,
    "two_tables": two_tables,
    "swap_bridge": swap_bridge,
    "decoy_blocks": decoy_blocks,
}
