import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relcap.geometry import (
    BoundaryPoint,
    CartesianMask,
    Disk,
    Domain,
    EmptyRegionError,
    GridError,
    Polygon,
    Region,
    RegionSyntaxError,
    RegionValidationError,
    Segment,
    Sigma,
    contains,
    contains_many,
    distance_many,
    distance_to_region,
    inner_distance_positive,
    mask_to_region,
    nearest_boundary_point,
    parse_region,
    polar_raster_to_region,
    rasterize_cartesian,
    rasterize_polar,
    region_bounding_radius,
    serialize_region,
)

DISK_APEX = BoundaryPoint(location=1.0 + 0.0j, tangent_direction=1j)


def disks(*specs) -> Region:
    return Region(tuple(Disk(c, r) for c, r in specs))


# ----------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------

def test_parse_single_disk():
    r = parse_region('{"primitives":[{"disk":{"center":[0,1],"radius":0.5}}]}')
    assert len(r.primitives) == 1
    d = r.primitives[0]
    assert isinstance(d, Disk)
    assert d.center == 1j and d.radius == 0.5


def test_parse_empty_region():
    r = parse_region('{"primitives":[]}')
    assert r.is_empty


def test_parse_vertical_slit():
    r = parse_region('{"primitives":[{"segment":{"a":[0,0],"b":[0,1]}}]}')
    seg = r.primitives[0]
    assert isinstance(seg, Segment)
    assert seg.a == 0 and seg.b == 1j


def test_parse_sigma_and_polygon():
    text = '{"primitives":[{"sigma":{}},{"polygon":{"vertices":[[0,0],[1,0],[0,1]]}}]}'
    r = parse_region(text)
    assert isinstance(r.primitives[0], Sigma)
    assert isinstance(r.primitives[1], Polygon)


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        "[1,2]",
        '{"primitives": 5}',
        '{"primitives":[{"disk":{"center":[0,1]}}]}',
        '{"primitives":[{"blob":{}}]}',
        '{"primitives":[{"disk":{"center":[0,"x"],"radius":1}}]}',
        '{"primitives":[{"disk":{"center":[0,1],"radius":1},"extra":{}}]}',
    ],
)
def test_parse_syntax_errors(text):
    with pytest.raises(RegionSyntaxError):
        parse_region(text)


def test_parse_validation_errors():
    with pytest.raises(RegionValidationError):
        parse_region('{"primitives":[{"disk":{"center":[0,0],"radius":-1}}]}')
    bowtie = '{"primitives":[{"polygon":{"vertices":[[0,0],[1,1],[1,0],[0,1]]}}]}'
    with pytest.raises(RegionValidationError):
        parse_region(bowtie)
    with pytest.raises(RegionValidationError):
        parse_region('{"primitives":[{"segment":{"a":[1,2],"b":[1,2]}}]}')
    with pytest.raises(RegionValidationError):
        parse_region('{"primitives":[{"polygon":{"vertices":[[0,0],[1,1]]}}]}')


def test_serialize_round_trip_exact_fields():
    r = Region(
        (
            Disk(0.25 - 0.5j, 0.125),
            Polygon((0j, 1 + 0j, 1 + 1j)),
            Segment(-1j, 1j),
            Sigma(),
        )
    )
    r2 = parse_region(serialize_region(r))
    assert r2 == r
    assert json.loads(serialize_region(r2)) == json.loads(serialize_region(r))


def test_serialize_round_trip_membership_probe_grid():
    # membership identical on a 1000 x 1000 probe grid
    r = Region((Disk(0.3 + 0.2j, 0.41), Polygon((-0.5 - 0.5j, 0.5 - 0.4j, 0.1 + 0.6j))))
    r2 = parse_region(serialize_region(r))
    xs = np.linspace(-1.2, 1.2, 1000)
    pts = (xs[:, None] + 1j * xs[None, :]).ravel()
    assert np.array_equal(contains_many(r, pts), contains_many(r2, pts))


# ----------------------------------------------------------------------
# membership and distance
# ----------------------------------------------------------------------

def test_contains_unit_disk():
    r = disks((0j, 1.0))
    assert contains(r, 0j)
    assert not contains(r, 2.0 + 0j)
    assert contains(r, 1.0 + 0j)  # boundary counts as inside


def test_contains_sigma():
    r = Region((Sigma(),))
    assert not contains(r, 0.5 + 0j)
    assert contains(r, 1.0 + 0j)
    assert contains(r, 3j)


def test_contains_polygon_boundary_and_interior():
    tri = Region((Polygon((0j, 2 + 0j, 2j)),))
    assert contains(tri, 0.5 + 0.5j)
    assert contains(tri, 1 + 0j)  # on an edge
    assert contains(tri, 0j)  # vertex
    assert not contains(tri, 1.5 + 1.5j)


def test_contains_segment_exact_collinearity():
    slit = Region((Segment(0j, 1j),))
    assert contains(slit, 0.5j)
    assert not contains(slit, 1e-12 + 0.5j)


def test_distance_to_disk():
    r = disks((0j, 1.0))
    assert distance_to_region(r, 3.0 + 0j) == pytest.approx(2.0)
    assert distance_to_region(r, 0.2 + 0j) == 0.0


def test_distance_to_segment_foot():
    r = Region((Segment(0j, 1j),))
    assert distance_to_region(r, 1.0 + 0j) == pytest.approx(1.0)
    assert distance_to_region(r, 1.0 + 2j) == pytest.approx(math.hypot(1.0, 1.0))


def test_distance_union_is_min():
    r = disks((-2 + 0j, 0.5), (2 + 0j, 1.0))
    p = 0.5 + 0j
    d1 = abs(p - (-2)) - 0.5
    d2 = abs(p - 2) - 1.0
    assert distance_to_region(r, p) == pytest.approx(min(d1, d2))


def test_distance_empty_region_errors():
    with pytest.raises(EmptyRegionError):
        distance_to_region(Region(()), 0j)


def test_nearest_boundary_point_disk_and_sigma():
    r = disks((0j, 1.0))
    assert nearest_boundary_point(r, 3 + 0j) == pytest.approx(1 + 0j)
    s = Region((Sigma(),))
    assert nearest_boundary_point(s, 0.5j) == pytest.approx(1j)


@given(
    x=st.floats(-2, 2),
    y=st.floats(-2, 2),
    cx=st.floats(-1, 1),
    cy=st.floats(-1, 1),
    rad=st.floats(0.1, 1.0),
)
@settings(max_examples=200, deadline=None)
def test_union_monotonicity(x, y, cx, cy, rad):
    base = disks((0.2 + 0.1j, 0.5))
    bigger = Region(base.primitives + (Disk(complex(cx, cy), rad),))
    p = complex(x, y)
    if contains(base, p):
        assert contains(bigger, p)


@given(
    x=st.floats(-2, 2),
    y=st.floats(-2, 2),
)
@settings(max_examples=200, deadline=None)
def test_distance_zero_iff_contains(x, y):
    r = Region((Disk(0.2 + 0.1j, 0.6), Polygon((-1 - 1j, -0.2 - 1j, -0.2 - 0.2j, -1 - 0.2j))))
    p = complex(x, y)
    if contains(r, p):
        assert distance_to_region(r, p) == 0.0
    else:
        assert distance_to_region(r, p) > 0.0


def test_distance_zero_on_boundary_points():
    r = Region((Disk(0j, 1.0), Segment(2 + 0j, 3 + 0j)))
    for p in (1j, -1 + 0j, 2 + 0j, 2.5 + 0j):
        assert contains(r, p)
        assert distance_to_region(r, p) == 0.0


# ----------------------------------------------------------------------
# rasterization
# ----------------------------------------------------------------------

def test_rasterize_polar_empty_and_full():
    empty = rasterize_polar(Region(()), 0j, 1.0, 16, 16)
    assert not empty.cells.any()
    full = rasterize_polar(disks((0j, 10.0)), 0j, 1.0, 16, 16)
    assert full.cells.all()


def test_rasterize_polar_matches_midpoint_requery():
    # half-plane-like primitive: big disk covering Re z <= 0.3 locally
    r = Region((Disk(-100 + 0j, 100.3),))
    raster = rasterize_polar(r, 0j, 1.0, 24, 32)
    pts = (raster.r_mid()[:, None] * np.exp(1j * raster.theta_mid())[None, :]).ravel()
    expect = contains_many(r, pts).reshape(raster.rings, raster.theta_count)
    assert np.array_equal(raster.cells, expect)


def test_rasterize_polar_rejects_bad_grids():
    with pytest.raises(GridError):
        rasterize_polar(Region(()), 0j, 1.0, 4, 16)
    with pytest.raises(GridError):
        rasterize_polar(Region(()), 0j, -1.0, 16, 16)


def test_rasterize_polar_geometric_edges():
    raster = rasterize_polar(disks((0j, 1.0)), 0j, 1.0, 16, 16, geometric=True, r_min=0.01)
    assert raster.r_edges[0] == pytest.approx(0.01)
    ratios = raster.r_edges[1:] / raster.r_edges[:-1]
    assert np.allclose(ratios, ratios[0])


def test_rasterize_cartesian_empty_full_and_requery():
    empty = rasterize_cartesian(Region(()), (-1, 1, -1, 1), 8, 8)
    assert not empty.cells.any()
    full = rasterize_cartesian(disks((0j, 10.0)), (-1, 1, -1, 1), 8, 8)
    assert full.cells.all()
    poly = Region((Polygon((-0.8 - 0.5j, 0.7 - 0.7j, 0.6 + 0.4j, -0.2 + 0.8j)),))
    mask = rasterize_cartesian(poly, (-1, 1, -1, 1), 32, 32)
    expect = contains_many(poly, mask.midpoints().ravel()).reshape(32, 32)
    assert np.array_equal(mask.cells, expect)


def test_rasterization_monotonicity():
    small = disks((0.3 + 0.1j, 0.2))
    big = disks((0.3 + 0.1j, 0.45))
    for build in (
        lambda r: rasterize_polar(r, 0j, 1.0, 16, 16).cells,
        lambda r: rasterize_cartesian(r, (-1, 1, -1, 1), 16, 16).cells,
    ):
        a, b = build(small), build(big)
        assert not (a & ~b).any()


def test_segment_thickening_survives_rasterization():
    slit = Region((Segment(0j, 1j),))
    raster = rasterize_cartesian(slit, (-1, 1, -1, 1), 512, 512)
    assert raster.cells.any()


# ----------------------------------------------------------------------
# inner distance gate
# ----------------------------------------------------------------------

def test_inner_distance_positive_cases():
    e = disks((0j, 0.3))
    assert inner_distance_positive(e, Domain.UNIT_DISK, DISK_APEX, 0.5)
    touching = disks((0.9 + 0j, 0.2))
    assert not inner_distance_positive(touching, Domain.UNIT_DISK, DISK_APEX, 0.5)
    assert inner_distance_positive(Region(()), Domain.UNIT_DISK, DISK_APEX, 0.5)


def test_inner_distance_positive_at_infinity():
    inf_pt = BoundaryPoint(location=None)
    e = disks((1j, 0.5))
    assert inner_distance_positive(e, Domain.HALF_PLANE, inf_pt, 1.0 / 10.0)
    assert not inner_distance_positive(e, Domain.HALF_PLANE, inf_pt, 1.0)
    assert not inner_distance_positive(Region((Sigma(),)), Domain.HALF_PLANE, inf_pt, 0.1)


def test_region_bounding_radius():
    assert region_bounding_radius(Region(())) == 0.0
    assert region_bounding_radius(disks((1j, 0.5))) == pytest.approx(1.5)
    assert region_bounding_radius(Region((Sigma(),))) == math.inf


# ----------------------------------------------------------------------
# raster -> region conversion
# ----------------------------------------------------------------------

def test_mask_to_region_preserves_midpoint_membership():
    r = disks((0.1 + 0.2j, 0.5), (-0.4 - 0.3j, 0.2))
    mask = rasterize_cartesian(r, (-1, 1, -1, 1), 32, 32)
    back = mask_to_region(mask)
    got = contains_many(back, mask.midpoints().ravel()).reshape(32, 32)
    assert np.array_equal(got, mask.cells)


def test_mask_to_region_merges_rectangles():
    cells = np.zeros((8, 8), dtype=bool)
    cells[2:6, 3:5] = True
    mask = CartesianMask((-1, 1, -1, 1), 8, 8, cells)
    region = mask_to_region(mask)
    assert len(region.primitives) == 1


def test_polar_raster_to_region_midpoint_membership():
    r = disks((0.4 + 0.1j, 0.3))
    raster = rasterize_polar(r, 0j, 1.0, 24, 48)
    back = polar_raster_to_region(raster)
    pts = (raster.r_mid()[:, None] * np.exp(1j * raster.theta_mid())[None, :]).ravel()
    got = contains_many(back, pts).reshape(raster.rings, raster.theta_count)
    assert np.array_equal(got, raster.cells)


def test_polar_raster_to_region_handles_full_ring():
    raster = rasterize_polar(disks((0j, 0.6)), 0j, 1.0, 12, 16)
    assert raster.cells[0].all()
    back = polar_raster_to_region(raster)
    pts = (raster.r_mid()[:, None] * np.exp(1j * raster.theta_mid())[None, :]).ravel()
    got = contains_many(back, pts).reshape(raster.rings, raster.theta_count)
    assert np.array_equal(got, raster.cells)


def test_grid_type_validation():
    with pytest.raises(GridError):
        CartesianMask((0, 1, 0, 1), 1, 8, np.zeros((1, 8), dtype=bool))
    with pytest.raises(GridError):
        CartesianMask((0, 0, 0, 1), 8, 8, np.zeros((8, 8), dtype=bool))
