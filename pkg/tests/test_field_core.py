import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from obstacle_mcf.geometry import (
    EmptyContourError,
    circle_contour,
    disk_hull_contour,
    extract_contour,
    hausdorff,
    mean_radius,
    radii,
    signed_distance_disks,
    signed_distance_to_boundary,
    signed_distance_to_set,
    sublevel_area,
)
from obstacle_mcf.grid import (
    BinarySet,
    ContourSet,
    GridError,
    Polyline,
    ScalarField,
    make_grid,
    read_contours,
    read_field,
    write_contours,
    write_field,
)
from oracles import hausdorff_polylines, nearest_opposite


# -- grids and fields ------------------------------------------------------


def test_make_grid_spacing():
    g = make_grid(5, 5, (0, 1, 0, 1))
    assert (g.hx, g.hy) == (0.25, 0.25)
    g = make_grid(3, 3, (0, 2, 0, 1))
    assert (g.hx, g.hy) == (1.0, 0.5)
    assert g.node(2, 1) == (2.0, 0.5)
    assert g.size == 9


@pytest.mark.parametrize("args", [(2, 5, (0, 1, 0, 1)), (5, 5, (1, 1, 0, 1)), (5, 5, (0, 1, 2, 0))])
def test_make_grid_rejects_degenerate(args):
    with pytest.raises(GridError):
        make_grid(*args)


def test_field_rejects_nonfinite_and_wrong_size(unit_grid):
    with pytest.raises(GridError):
        ScalarField(unit_grid, np.full(unit_grid.shape, np.nan))
    with pytest.raises(GridError):
        ScalarField(unit_grid, np.zeros(7))


def test_field_is_immutable(unit_grid):
    f = ScalarField.constant(unit_grid, 1.0)
    with pytest.raises(ValueError):
        f.values[0, 0] = 2.0


def test_field_file_roundtrip(tmp_path):
    g = make_grid(7, 4, (-1, 2, 0, 0.3))
    f = ScalarField.from_function(g, lambda x, y: np.sin(3 * x) + y**2)
    p = write_field(tmp_path / "f.dat", f)
    lines = p.read_text().splitlines()
    assert len(lines) == 1 + g.ny
    assert len(lines[1].split()) == g.nx
    back = read_field(p)
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_field_file_bad_header(tmp_path):
    p = tmp_path / "bad.dat"
    p.write_text("3 3 0 0\n1 2 3\n")
    with pytest.raises(GridError):
        read_field(p)


def test_contour_file_roundtrip(tmp_path):
    c = ContourSet((
        Polyline(np.array([[0, 0], [1, 0], [1, 1.5]]), closed=True),
        Polyline(np.array([[2, 2], [3, 3]]), closed=False),
    ))
    p = write_contours(tmp_path / "c.txt", c)
    text = p.read_text()
    assert text.count("#closed") == 1 and text.count("#open") == 1
    back = read_contours(p)
    assert [pl.closed for pl in back.loops] == [True, False]
    np.testing.assert_allclose(back.vertices(), c.vertices())


def test_polyline_vertex_minimum():
    with pytest.raises(GridError):
        Polyline(np.array([[0, 0], [1, 1]]), closed=True)
    with pytest.raises(GridError):
        Polyline(np.array([[0, 0]]), closed=False)


def test_binary_set_algebra(unit_grid):
    X, _ = unit_grid.coords()
    a = BinarySet(unit_grid, X < 0.5)
    b = BinarySet(unit_grid, X < 0.25)
    assert b.issubset(a) and not a.issubset(b)
    assert (a | b) == a and (a & b) == b
    assert (a - b).count == a.count - b.count
    assert BinarySet.empty(unit_grid).is_empty()


# -- signed distances ------------------------------------------------------


def test_disk_distance_values(box_grid):
    d = signed_distance_disks(box_grid, [((0.0, 0.0), 0.25)])
    assert d.values[32, 32] == pytest.approx(-0.25)
    # the node at (0.5, 0) is 2r from the centre
    assert d.values[32, 48] == pytest.approx(0.25)
    two = signed_distance_disks(box_grid, [((0.0, 0.0), 0.25), ((0.5, 0.5), 0.1)])
    one = signed_distance_disks(box_grid, [((0.5, 0.5), 0.1)])
    np.testing.assert_array_equal(two.values, np.minimum(d.values, one.values))
    with pytest.raises(ValueError):
        signed_distance_disks(box_grid, [])


def test_set_distance_half_plane_matches_brute_force(unit_grid):
    g = unit_grid
    X, _ = g.coords()
    E = BinarySet(g, X <= 0.5)
    d = signed_distance_to_set(E)
    ref = nearest_opposite(E.inside, g.hx, g.hy)
    np.testing.assert_allclose(d.values, ref, atol=1e-12)
    # two cells right of the interface
    i = int(round(0.5 / g.hx)) + 2
    assert abs(d.values[10, i] - 2 * g.hx) <= g.hx


def test_set_distance_disk_centre(box_grid):
    g = box_grid
    E = signed_distance_disks(g, [((0.0, 0.0), 0.3)]).sublevel()
    d = signed_distance_to_set(E)
    assert abs(d.values[32, 32] + 0.3) <= math.hypot(g.hx, g.hy)


def test_set_distance_interface_nodes_bounded(box_grid):
    g = box_grid
    E = signed_distance_disks(g, [((0.1, -0.2), 0.4)]).sublevel()
    d = signed_distance_to_set(E)
    ins = E.inside
    edge = np.zeros_like(ins)
    edge[:, :-1] |= ins[:, :-1] != ins[:, 1:]
    edge[:-1, :] |= ins[:-1, :] != ins[1:, :]
    assert np.all(np.abs(d.values[edge]) <= g.hx + g.hy)


def test_set_distance_needs_both_phases(unit_grid):
    with pytest.raises(ValueError):
        signed_distance_to_set(BinarySet.empty(unit_grid))
    with pytest.raises(ValueError):
        signed_distance_to_set(BinarySet(unit_grid, np.ones(unit_grid.shape, bool)))


@pytest.mark.parametrize("n", [64, 100, 127])
def test_sweep_and_exact_agree(n):
    g = make_grid(n, n, (-1, 1, -1, 1))
    rng = np.random.default_rng(n)
    disks = [((float(x), float(y)), float(r)) for x, y, r in
             zip(rng.uniform(-0.6, 0.6, 4), rng.uniform(-0.6, 0.6, 4), rng.uniform(0.05, 0.3, 4))]
    E = signed_distance_disks(g, disks).sublevel()
    a = signed_distance_to_set(E, "exact").values
    b = signed_distance_to_set(E, "sweep").values
    assert np.abs(a - b).max() <= math.hypot(g.hx, g.hy)


def test_exact_matches_brute_force_on_random_set():
    g = make_grid(24, 19, (0, 1.2, 0, 0.9))
    rng = np.random.default_rng(3)
    E = BinarySet(g, rng.random(g.shape) < 0.3)
    ref = nearest_opposite(E.inside, g.hx, g.hy)
    np.testing.assert_allclose(signed_distance_to_set(E).values, ref, atol=1e-12)


def test_boundary_distance_is_half_a_cell_at_the_interface(unit_grid):
    g = unit_grid
    X, _ = g.coords()
    E = BinarySet(g, X <= 0.5 + 1e-9)
    d = signed_distance_to_boundary(E).values
    i = int(round(0.5 / g.hx))
    assert d[5, i] == pytest.approx(-0.5 * g.hx)
    assert d[5, i + 1] == pytest.approx(0.5 * g.hx)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_set_distance_is_lipschitz_up_to_a_diagonal(seed):
    g = make_grid(20, 20, (0, 1, 0, 1))
    rng = np.random.default_rng(seed)
    E = BinarySet(g, rng.random(g.shape) < rng.uniform(0.1, 0.9))
    if E.is_empty() or E.inside.all():
        return
    d = signed_distance_to_set(E).values.ravel()
    X, Y = g.coords()
    P = np.column_stack([X.ravel(), Y.ravel()])
    dist = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
    assert np.all(np.abs(d[:, None] - d[None, :]) <= dist + g.hx + g.hy + 1e-12)


# -- contours --------------------------------------------------------------


def test_circle_contour_accuracy():
    g = make_grid(256, 256, (-1, 1, -1, 1))
    c = extract_contour(signed_distance_disks(g, [((0.0, 0.0), 0.5)]), 0.0)
    assert len(c) == 1 and c.loops[0].closed
    assert np.abs(radii(c) - 0.5).max() <= g.hx


def test_constant_field_has_no_contour(unit_grid):
    assert extract_contour(ScalarField.constant(unit_grid, 1.0), 0.0).is_empty()
    assert extract_contour(ScalarField.constant(unit_grid, 0.0), 0.5).is_empty()


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    return orient(p1, p2, q1) * orient(p1, p2, q2) < 0 and orient(q1, q2, p1) * orient(q1, q2, p2) < 0


def test_saddle_resolution_has_no_crossings():
    # offset grid so the saddle sits inside a cell rather than on a node
    g = make_grid(8, 8, (-1.05, 0.95, -1.1, 0.9))
    u = ScalarField.from_function(g, lambda x, y: x * y)
    c = extract_contour(u, 0.0)
    seg = c.segments()
    for a in range(len(seg)):
        for b in range(a + 1, len(seg)):
            assert not _segments_intersect(seg[a, 0], seg[a, 1], seg[b, 0], seg[b, 1])
    # the saddle cell's centre value decides which pair of corners is joined
    i, j = int((0.0 - g.x0) // g.hx), int((0.0 - g.y0) // g.hy)
    corners = u.values[j:j + 2, i:i + 2]
    centre = corners.mean()
    mids = 0.5 * (seg[:, 0] + seg[:, 1])
    cx, cy = g.x0 + (i + 0.5) * g.hx, g.y0 + (j + 0.5) * g.hy
    near = mids[(np.abs(mids[:, 0] - cx) < g.hx / 2) & (np.abs(mids[:, 1] - cy) < g.hy / 2)]
    assert len(near) == 2
    # corners sharing the centre's sign stay connected through the cell
    same = np.sign(corners) == np.sign(centre)
    assert same[0, 0] == same[1, 1]


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), level=st.floats(-0.5, 0.5))
def test_contour_of_negated_field_is_the_same(seed, level):
    g = make_grid(17, 15, (0, 1, 0, 1))
    rng = np.random.default_rng(seed)
    u = ScalarField(g, rng.normal(size=g.shape))
    a = extract_contour(u, level)
    b = extract_contour(-u, -level)
    assert a.is_empty() == b.is_empty()
    if not a.is_empty():
        assert hausdorff(a, b) <= 1e-12


# -- metrics ---------------------------------------------------------------


def test_hausdorff_basic_cases():
    c = circle_contour((0, 0), 0.5)
    assert hausdorff(c, c) == 0.0
    s1 = ContourSet((Polyline(np.array([[0.0, 0.0], [1.0, 0.0]]), closed=False),))
    s2 = ContourSet((Polyline(np.array([[0.0, 0.3], [1.0, 0.3]]), closed=False),))
    assert hausdorff(s1, s2) == pytest.approx(0.3)
    big = circle_contour((0, 0), 0.6)
    assert hausdorff(c, big) == pytest.approx(0.1, abs=1e-5)
    with pytest.raises(EmptyContourError):
        hausdorff(c, ContourSet(()))


def test_hausdorff_agrees_with_brute_force():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(40, 2))
    b = rng.normal(size=(30, 2)) + 0.3
    ca = ContourSet((Polyline(a, closed=True),))
    cb = ContourSet((Polyline(b, closed=True),))
    assert hausdorff(ca, cb) == pytest.approx(hausdorff_polylines(a, b), rel=1e-12)


_loop = st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=3, max_size=8)


@settings(max_examples=40, deadline=None)
@given(a=_loop, b=_loop, c=_loop)
def test_hausdorff_symmetric_and_triangle(a, b, c):
    A, B, C = (ContourSet((Polyline(np.array(p), closed=True),)) for p in (a, b, c))
    ab, ba = hausdorff(A, B), hausdorff(B, A)
    assert ab == ba
    # vertex-to-segment sampling: the triangle inequality holds exactly for
    # the underlying curves, so a loose relative slack covers rounding only
    assert ab <= hausdorff(A, C) + hausdorff(C, B) + 1e-9


def test_area_of_constants_and_disk():
    g = make_grid(33, 33, (0, 1, 0, 1))
    assert sublevel_area(ScalarField.constant(g, 1.0), 0.0) == 0.0
    assert sublevel_area(ScalarField.constant(g, -1.0), 0.0) == pytest.approx(1.0)
    g = make_grid(256, 256, (-1, 1, -1, 1))
    u = signed_distance_disks(g, [((0.0, 0.0), 0.5)])
    assert abs(sublevel_area(u, 0.0) - math.pi * 0.25) <= 4 * g.hx


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(-2, 2), ds=st.floats(0, 2))
def test_area_monotone_in_level(seed, s, ds):
    g = make_grid(12, 9, (0, 1, 0, 1))
    u = ScalarField(g, np.random.default_rng(seed).normal(size=g.shape))
    assert sublevel_area(u, s) <= sublevel_area(u, s + ds)


def test_mean_radius_and_hull_contour():
    assert mean_radius(circle_contour((0.2, 0.1), 0.4), (0.2, 0.1)) == pytest.approx(0.4, rel=1e-4)
    stadium = disk_hull_contour([((-0.3, 0.0), 0.2), ((0.3, 0.0), 0.2)])
    # stadium area: rectangle plus one full disk
    assert stadium.enclosed_area() == pytest.approx(0.6 * 0.4 + math.pi * 0.04, rel=1e-4)
