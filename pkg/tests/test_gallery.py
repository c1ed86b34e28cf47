import json
import numpy as np
import pytest

from heatprof.errors import UnknownGallery, ParseError
from heatprof.gallery import GALLERY, MAX_KOCH_ORDER, gallery, gallery_spec, \
    resolve_domain, koch_prefractal


@pytest.mark.parametrize('name', GALLERY)
def test_every_gallery_domain_loads(name):
    spec, domain = gallery(name)
    assert domain.polygon.is_valid
    assert domain.polygon.area > 0
    expected = 'koch-prefractal-2' if name == 'koch-prefractal-k' else name
    assert domain.name == expected
    assert spec.name == expected


def test_koch_orders():
    assert len(koch_prefractal(2)) == 48
    assert len(koch_prefractal(MAX_KOCH_ORDER)) == 3*4**MAX_KOCH_ORDER
    domain = gallery('koch-prefractal-1')[1]
    assert len(domain.outer) == 12
    assert domain.polygon.area == pytest.approx(np.sqrt(3)/4*4/3,
                                                rel=1e-12)
    spec, _ = gallery('koch-prefractal-k', k=0)
    assert spec.name == 'koch-prefractal-0'
    assert spec.params == {'k': 0}


def test_l_shape_graph_node():
    domain = gallery('l-shape')[1]
    np.testing.assert_allclose(domain.graph_nodes, [[0.5, 0.5]])


def test_slit_length():
    domain = gallery('slit-square', slit_length=0.25)[1]
    np.testing.assert_allclose(domain.slits[0][-1], [0.5, 0.25])
    assert len(domain.free_tips) == 1


def test_disc_and_exterior():
    assert len(gallery('disc')[1].outer) == 64
    assert len(gallery('disc', n_sides=16)[1].outer) == 16
    outside = gallery('exterior-convex-truncated', box=1.0)[1]
    assert len(outside.holes) == 1
    assert outside.polygon.area == pytest.approx(
        4.0 - 6*np.sqrt(3)/4*0.25, rel=1e-12)


def test_unknown_gallery():
    with pytest.raises(UnknownGallery):
        gallery('triangle')


@pytest.mark.parametrize('name,params', [
    ('koch-prefractal-5', {}),
    ('koch-prefractal-k', {'k': -1}),
    ('slit-square', {'slit_length': 1.5}),
    ('slit-square', {'slit_length': 0.0}),
    ('exterior-convex-truncated', {'box': 0.5}),
])
def test_bad_parameters(name, params):
    with pytest.raises(ParseError):
        gallery_spec(name, **params)


def test_resolve_domain(tmp_path):
    fn = tmp_path/'square.json'
    fn.write_text(json.dumps(gallery_spec('square')))
    from_file = resolve_domain(str(fn))
    from_name = resolve_domain('square')
    np.testing.assert_allclose(from_file.outer, from_name.outer)
    assert resolve_domain('koch-prefractal-1').name == 'koch-prefractal-1'


def test_spec_round_trips_through_the_domain():
    domain = gallery('slit-square')[1]
    doc = domain.to_spec()
    assert doc['name'] == 'slit-square'
    assert len(doc['slits']) == 1
    assert doc['holes'] == []
