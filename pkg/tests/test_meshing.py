import numpy as np
import pytest

from heatprof.errors import MeshError
from heatprof.meshing import triangulate, cached_triangulate, MIN_ANGLE


def test_uniform_mesh_quality(square_mesh):
    assert np.max(square_mesh.edge_lengths()) <= 0.1*(1 + 1e-9)
    assert square_mesh.min_angle() >= MIN_ANGLE - 1e-6
    assert np.all(square_mesh.areas > 0)
    assert np.sum(square_mesh.areas) == pytest.approx(1.0, rel=1e-12)


def test_boundary_nodes(square_mesh):
    x, y = square_mesh.nodes[:, 0], square_mesh.nodes[:, 1]
    on_edge = np.isclose(np.minimum(np.minimum(x, 1 - x),
                                    np.minimum(y, 1 - y)), 0, atol=1e-12)
    np.testing.assert_array_equal(on_edge, square_mesh.boundary_mask)


def test_slit_nodes_are_duplicated(slit_square, slit_mesh):
    side = slit_mesh.slit_side
    assert np.count_nonzero(side == 1) > 0
    assert np.count_nonzero(side == 1) == np.count_nonzero(side == -1)
    copies = slit_mesh.nodes[side != 0]
    assert np.allclose(copies[:, 0], 0.5)
    assert np.all(slit_mesh.boundary_mask[side != 0])
    #Free tip and the foot on the outer ring stay single nodes
    for p in ([0.5, 0.5], [0.5, 0.0]):
        hits = np.linalg.norm(slit_mesh.nodes - p, axis=1) < 1e-12
        assert np.count_nonzero(hits) == 1


def test_slit_copies_split_triangles(slit_mesh):
    #Triangles right of the slit only use the -1 copies
    nodes, tris, side = slit_mesh.nodes, slit_mesh.triangles, \
        slit_mesh.slit_side
    right = nodes[tris].mean(axis=1)[:, 0] > 0.5
    used = np.unique(tris[right])
    assert not np.any(side[used] == 1)
    used = np.unique(tris[~right])
    assert not np.any(side[used] == -1)


def test_graded_mesh_refines_reflex_corner(l_shape):
    uniform = triangulate(l_shape, 0.1)
    graded = triangulate(l_shape, 0.1, grade_points='auto')
    corner = graded.nearest_node([0.5, 0.5], interior_only=False)
    e = graded.edges
    at_corner = np.any(e == corner, axis=1)
    lengths = graded.edge_lengths()[at_corner]
    assert np.max(lengths) < 0.025
    assert graded.n_nodes > uniform.n_nodes
    assert np.max(graded.edge_lengths()) <= 0.1*(1 + 1e-9)
    assert graded.min_angle() >= MIN_ANGLE - 1e-6


def test_graded_slit_mesh_keeps_min_angle(slit_square):
    graded = triangulate(slit_square, 0.1, grade_points='auto')
    tip = graded.nearest_node([0.5, 0.5], interior_only=False)
    lengths = graded.edge_lengths()[np.any(graded.edges == tip, axis=1)]
    assert np.max(lengths) < 0.05
    assert graded.min_angle() >= MIN_ANGLE - 1e-6


def test_extra_points_become_nodes(square):
    p = np.array([0.31, 0.47])
    mesh = triangulate(square, 0.1, extra_points=[p])
    assert np.min(np.linalg.norm(mesh.nodes - p, axis=1)) < 1e-12


@pytest.mark.parametrize('h_max', [0.0, -0.1])
def test_bad_mesh_size(square, h_max):
    with pytest.raises(MeshError):
        triangulate(square, h_max)


def test_cache_reuse(square, tmp_path, capsys):
    first = cached_triangulate(square, 0.2, cache_dir=str(tmp_path))
    assert 'Using cached mesh' not in capsys.readouterr().out
    second = cached_triangulate(square, 0.2, cache_dir=str(tmp_path))
    assert 'Using cached mesh' in capsys.readouterr().out
    np.testing.assert_array_equal(first.nodes, second.nodes)
    np.testing.assert_array_equal(first.triangles, second.triangles)


def test_cache_key_includes_options(square, tmp_path, capsys):
    cached_triangulate(square, 0.2, cache_dir=str(tmp_path))
    capsys.readouterr()
    cached_triangulate(square, 0.2, cache_dir=str(tmp_path),
                       extra_points=[[0.3, 0.3]])
    assert 'Using cached mesh' not in capsys.readouterr().out


def test_interpolation_is_exact_for_linear_functions(square_mesh):
    f = 2*square_mesh.nodes[:, 0] - 3*square_mesh.nodes[:, 1] + 1
    rng = np.random.default_rng(3)
    pts = rng.uniform(0, 1, (50, 2))
    vals = square_mesh.interpolate(f, pts)
    np.testing.assert_allclose(vals, 2*pts[:, 0] - 3*pts[:, 1] + 1,
                               atol=1e-12)


def test_stats(slit_mesh):
    stats = slit_mesh.stats()
    assert stats['domain'] == 'slit-square'
    assert stats['n_nodes'] == slit_mesh.n_nodes
    assert stats['n_interior'] + np.count_nonzero(slit_mesh.boundary_mask) \
        == slit_mesh.n_nodes
