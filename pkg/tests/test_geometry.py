import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockbridge.geometry import (
    GeometryError,
    Polygon2D,
    contains,
    delta_band,
    dilate,
    distance_to,
    overlaps,
    posed,
)
from blockbridge.scene import Block, BlockConfig, RobotModel, footprint_fits, make_scene, rect

UNIT = Polygon2D(rect(0, 0, 1, 1))
coord = st.floats(-5, 5, allow_nan=False)


def test_contains_interior_exterior_and_edge():
    assert contains(UNIT, (0.5, 0.5))
    assert not contains(UNIT, (2, 2))
    assert contains(UNIT, (1.0, 0.5))


def test_polygon_rejects_degenerate_and_concave():
    with pytest.raises(GeometryError):
        Polygon2D([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(GeometryError):
        Polygon2D([[0, 0], [1, 0]])
    with pytest.raises(GeometryError):
        Polygon2D([[0, 0], [2, 0], [1, 0.3], [2, 2], [0, 2]])


def test_clockwise_input_is_reoriented():
    p = Polygon2D([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert p.area == pytest.approx(1.0)
    assert contains(p, (0.5, 0.5))


@given(st.integers(0, 3), coord, coord)
def test_contains_invariant_under_vertex_rotation(k, x, y):
    verts = rect(-1, -2, 3, 1)
    rolled = Polygon2D(verts[k:] + verts[:k])
    assert contains(rolled, (x, y)) == contains(Polygon2D(verts), (x, y))


def test_distance_to_rectangle():
    d = distance_to(UNIT, [[0.5, 0.5], [2.0, 0.5], [2.0, 2.0]])
    assert d[0] == 0.0
    assert d[1] == pytest.approx(1.0)
    assert d[2] == pytest.approx(math.sqrt(2.0))


def test_overlaps_ignores_shared_edges():
    assert overlaps(UNIT, Polygon2D(rect(0.5, 0.5, 1.5, 1.5)))
    assert not overlaps(UNIT, Polygon2D(rect(1, 0, 2, 1)))
    assert not overlaps(UNIT, Polygon2D(rect(3, 3, 4, 4)))


def _fit_scene():
    return make_scene(
        "fit",
        ground=rect(0, 0, 10, 10),
        fixed=[("T", rect(2, 2, 6, 6), 0.0, 1.0)],
        movable=[("a", rect(-0.5, -0.5, 0.5, 0.5), 0.5, (4.0, 4.0, 0.0), 1.0),
                 ("b", rect(-0.5, -0.5, 0.5, 0.5), 0.5, (8.0, 8.0, 0.0), 0.0)],
        start=((1, 1), "ground"),
        goal=((1, 2), "ground"),
    )


def test_footprint_fits_examples():
    scene = _fit_scene()
    env = scene.initial_environment()
    table = env.plane("T")
    b = scene.block("b")
    big = Block("big", True, 1.0, Polygon2D(rect(-2.5, -2.5, 2.5, 2.5)), b.initial)
    assert footprint_fits(env, "b", b.at(3.0, 3.0, 0.0, 1.0), table)
    assert not footprint_fits(env, "big", big.at(4.0, 4.0, 0.0, 1.0), table)
    # overlapping block "a" (centred at 4, 4) by half a unit
    assert not footprint_fits(env, "b", b.at(4.5, 4.0, 0.0, 1.0), table)
    # wrong elevation
    assert not footprint_fits(env, "b", b.at(3.0, 3.0, 0.0, 0.0), table)


@settings(max_examples=60)
@given(st.floats(2.5, 5.5), st.floats(2.5, 5.5), st.floats(0, 2 * math.pi))
def test_footprint_fits_is_monotone_in_occupants(x, y, yaw):
    scene = _fit_scene()
    env = scene.initial_environment()
    table = env.plane("T")
    cfg = scene.block("b").at(x, y, yaw, 1.0)
    fewer = env.without("a")
    if footprint_fits(env, "b", cfg, table):
        assert footprint_fits(fewer, "b", cfg, table)


def test_step_reachable_examples():
    robot = RobotModel(climb_height=1.2, lateral_step=2.0)
    assert robot.step_reachable(1.0 - 0.0, 0.5)
    assert not RobotModel(climb_height=1.0).step_reachable(3.0 - 1.0, 0.0)
    assert not robot.step_reachable(0.0, 5.0)


@given(st.floats(-3, 3), st.floats(0, 4))
def test_step_reachable_symmetric(dz, dxy):
    robot = RobotModel()
    assert robot.step_reachable(dz, dxy) == robot.step_reachable(-dz, dxy)


def test_delta_band_surrounds_target_outline():
    placement = Polygon2D(rect(1, 4, 13, 8))
    target = Polygon2D(rect(3, 8, 11, 11))
    band = delta_band(target, placement, 2.0)
    assert not band.empty
    inside = band.contains([[7, 7], [7, 6.5], [2, 7], [7, 4.5], [12.5, 4.5]])
    assert inside.tolist() == [True, True, True, False, False]


def test_delta_band_zero_and_far():
    placement = Polygon2D(rect(0, 0, 4, 4))
    assert delta_band(Polygon2D(rect(1, 1, 2, 2)), placement, 0.0).empty
    far = Polygon2D(rect(20, 20, 22, 22))
    assert delta_band(far, placement, 2.0).empty


@settings(max_examples=40)
@given(st.floats(0.1, 3), st.floats(0.0, 2), coord, coord)
def test_delta_band_grows_with_delta(d, extra, x, y):
    placement = Polygon2D(rect(-5, -5, 5, 5))
    target = Polygon2D(rect(-1, 2, 2, 4))
    small = delta_band(target, placement, d)
    large = delta_band(target, placement, d + extra + 1e-3)
    if small.contains([[x, y]])[0]:
        assert large.contains([[x, y]])[0]


def test_dilate_contains_offset_points():
    grown = dilate(UNIT, 0.5)
    assert contains(grown, (1.49, 0.5))
    assert contains(grown, (0.5, 1.49))
    assert not contains(grown, (1.6, 0.5))
    corner = 1 + 0.5 / math.sqrt(2) - 1e-3
    assert contains(grown, (corner, corner))


def test_posed_rotates_about_centroid():
    sq = Polygon2D(rect(-1, -0.5, 1, 0.5))
    p = posed(sq, 3.0, 4.0, math.pi / 2)
    assert np.allclose(p.centroid, [3.0, 4.0])
    x0, y0, x1, y1 = p.bbox
    assert x1 - x0 == pytest.approx(1.0) and y1 - y0 == pytest.approx(2.0)


def test_block_config_height_positive():
    from blockbridge.scene import SceneError

    with pytest.raises(SceneError):
        BlockConfig(UNIT, 0.0, 0.0)

