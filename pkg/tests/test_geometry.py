import json
import numpy as np
import pytest
from hypothesis import given, assume, strategies as st

from heatprof.errors import ParseError, GeometryError, SearchFailure, \
    EmptyBall
from heatprof.gallery import gallery
from heatprof.geometry import load_domain, inner_distance, inner_distances, \
    boundary_distance, boundary_distances, ambient_volume, \
    representative_point, representative_points, inner_ball, \
    certify_uniformity, grid_distance

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
point = st.tuples(unit, unit)


@given(point, point)
def test_square_distance_is_euclidean(square, x, y):
    d = inner_distance(square, x, y).length
    assert d == pytest.approx(np.hypot(x[0] - y[0], x[1] - y[1]), abs=1e-12)


def test_slit_path_turns_at_tip(slit_square):
    path = inner_distance(slit_square, [0.4, 0.1], [0.6, 0.1])
    assert path.length == pytest.approx(2*np.sqrt(0.17), rel=1e-9)
    assert len(path.waypoints) == 3
    np.testing.assert_allclose(path.waypoints[1], [0.5, 0.5], atol=1e-8)


def test_l_shape_path_turns_at_reflex_corner(l_shape):
    d = inner_distance(l_shape, [0.9, 0.4], [0.4, 0.9]).length
    assert d == pytest.approx(2*np.sqrt(0.17), rel=1e-9)


def test_visible_points_in_slit_square(slit_square):
    d = inner_distance(slit_square, [0.1, 0.9], [0.9, 0.9]).length
    assert d == pytest.approx(0.8, rel=1e-12)


def _off_slit(p):
    return not (abs(p[0] - 0.5) < 0.01 and p[1] < 0.51)


@given(point, point, point)
def test_triangle_inequality_slit_square(slit_square, a, b, c):
    assume(_off_slit(a) and _off_slit(b) and _off_slit(c))
    ab = inner_distance(slit_square, a, b).length
    bc = inner_distance(slit_square, b, c).length
    ac = inner_distance(slit_square, a, c).length
    assert ac <= ab + bc + 1e-9


@given(point, point)
def test_symmetry_slit_square(slit_square, a, b):
    assume(_off_slit(a) and _off_slit(b))
    ab = inner_distance(slit_square, a, b).length
    ba = inner_distance(slit_square, b, a).length
    assert ab == pytest.approx(ba, abs=1e-12)


def test_inner_distances_match_single_queries(slit_square):
    targets = np.array([[0.6, 0.1], [0.9, 0.9], [0.2, 0.3], [0.55, 0.45]])
    many = inner_distances(slit_square, [0.4, 0.1], targets)
    one = [inner_distance(slit_square, [0.4, 0.1], t).length
           for t in targets]
    np.testing.assert_allclose(many, one, rtol=1e-12)


def test_slit_sides_are_far_apart(slit_square):
    #Opposite sides of the slit at the same point
    d = inner_distance(slit_square, [0.5, 0.1], [0.5, 0.1], 1, -1).length
    assert d == pytest.approx(0.8, rel=1e-6)


def test_inner_diameter(square, slit_square):
    assert square.diam_inner == pytest.approx(np.sqrt(2), rel=1e-12)
    assert slit_square.diam_inner >= np.sqrt(2) - 1e-9


def test_boundary_distance(square, slit_square):
    assert boundary_distance(square, [0.5, 0.5]) == pytest.approx(0.5)
    assert boundary_distance(slit_square, [0.4, 0.3]) == pytest.approx(0.1)
    d = boundary_distances(square, [[0.1, 0.5], [0.5, 0.2], [0.0, 0.3]])
    np.testing.assert_allclose(d, [0.1, 0.2, 0.0], atol=1e-12)


@given(st.floats(min_value=1e-3, max_value=10.0))
def test_ambient_volume_scales_quadratically(r):
    assert ambient_volume([0.0, 0.0], 2*r) == pytest.approx(
        4*ambient_volume([0.0, 0.0], r))


def test_load_domain_from_text_and_file(tmp_path):
    spec = {'name': 'box', 'outer': SQUARE}
    assert load_domain(json.dumps(spec)).name == 'box'
    fn = tmp_path/'box.json'
    fn.write_text(json.dumps(spec))
    domain = load_domain(str(fn))
    assert domain.polygon.area == pytest.approx(1.0)


@pytest.mark.parametrize('spec', [
    'not json',
    {'holes': []},
    {'outer': SQUARE, 'colour': 'red'},
    {'outer': [[0, 0], [1, 'a'], [1, 1]]},
])
def test_load_domain_parse_errors(spec):
    with pytest.raises(ParseError):
        load_domain(spec)


@pytest.mark.parametrize('spec', [
    {'outer': [[0, 0], [1, 1], [1, 0], [0, 1]]},
    {'outer': [[0, 0], [1, 0]]},
    {'outer': SQUARE, 'slits': [[[0.5, 0.5], [1.5, 0.5]]]},
    {'outer': SQUARE, 'slits': [[[0.5, 0.0], [0.5, 1.0]]]},
    {'outer': SQUARE, 'holes': [[[0.5, 0.5], [2, 0.5], [2, 2]]]},
])
def test_load_domain_geometry_errors(spec):
    with pytest.raises(GeometryError):
        load_domain(spec)


def test_point_outside_raises(square):
    with pytest.raises(GeometryError):
        inner_distance(square, [0.5, 0.5], [1.5, 0.5])


def test_grid_distance_agrees_with_visibility_graph(slit_square):
    pts = np.array([[0.4, 0.1], [0.6, 0.1], [0.2, 0.8]])
    D = grid_distance(slit_square, pts, 0.025)
    for i in range(3):
        exact = inner_distances(slit_square, pts[i], pts)
        np.testing.assert_allclose(D[i], exact, rtol=1e-2, atol=1e-12)


def test_representative_point_depth(square):
    r, c_u = 0.4, 0.25
    x_r = representative_point(square, [0.5, 0.0], r, c_u)
    assert inner_distance(square, [0.5, 0.0], x_r).length == \
        pytest.approx(r/4, rel=1e-9)
    assert boundary_distance(square, x_r) >= c_u*r/8


def test_representative_rules(slit_square):
    centers = np.array([[0.5, 0.5], [0.2, 0.2], [0.9, 0.1]])
    for rule in ('deepest', 'first-admissible'):
        x_r = representative_points(slit_square, centers, 0.3, 0.25, rule)
        depth = boundary_distances(slit_square, x_r)
        assert np.all(depth >= 0.25*0.3/8)
    with pytest.raises(ValueError):
        representative_points(slit_square, centers, 0.3, 0.25, 'random')


def test_representative_point_radius_range(square):
    with pytest.raises(SearchFailure):
        representative_point(square, [0.5, 0.5], 2.0, 0.25)


def test_inner_ball(square, square_mesh):
    ball = inner_ball(square, square_mesh, [0.5, 0.5], 0.3)
    assert len(ball.node_set) > 0
    assert np.all(ball.distances[ball.node_set] < 0.3)
    outside = np.setdiff1d(np.arange(square_mesh.n_nodes), ball.node_set)
    assert np.all(ball.distances[outside] >= 0.3)
    with pytest.raises(EmptyBall):
        inner_ball(square, square_mesh, [0.5, 0.5], 0.0)


def test_inner_ball_keeps_interior_nodes(square, square_mesh):
    ball = inner_ball(square, square_mesh, [0.5, 0.0], 0.3)
    assert len(ball.node_set) > 0
    assert not np.any(square_mesh.boundary_mask[ball.node_set])
    edge = square_mesh.boundary_mask & (ball.distances < 0.3)
    assert np.any(edge)


def test_inner_ball_does_not_cross_slit(slit_square, slit_mesh):
    ball = inner_ball(slit_square, slit_mesh, [0.45, 0.1], 0.2)
    x = slit_mesh.nodes[ball.node_set, 0]
    assert np.all(x <= 0.5 + 1e-12)


def test_convex_certificate():
    domain = gallery('convex-hexagon')[1]
    cert = certify_uniformity(domain, 6, C_max=1.05, seed=1)
    assert cert.c_u > 0
    assert 1.0 <= cert.C_u <= 1.05
    assert len(cert.to_frame()) == 6
