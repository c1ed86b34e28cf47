"""
heatprof.gallery

"""

import re
from dataclasses import dataclass, field
import numpy as np

from .errors import UnknownGallery, ParseError
from .geometry import load_domain

GALLERY = ('square', 'slit-square', 'l-shape', 'convex-hexagon',
           'koch-prefractal-k', 'exterior-convex-truncated', 'disc')
#Largest prefractal order
MAX_KOCH_ORDER = 4


@dataclass
class GallerySpec:
    '''Name and construction parameters of a gallery domain'''
    name: str
    params: dict = field(default_factory=dict)


def _regular_polygon(n, radius, center=(0.0, 0.0), phase=0.0):
    theta = phase + 2*np.pi*np.arange(n)/n
    return np.column_stack([center[0] + radius*np.cos(theta),
                            center[1] + radius*np.sin(theta)])


def koch_prefractal(k, side=1.0):
    '''Counterclockwise ring of the order-k Koch prefractal (3*4^k edges)'''
    ring = np.array([[0.0, 0.0], [side, 0.0],
                     [side/2, side*np.sqrt(3)/2]])
    c, s = np.cos(np.pi/3), np.sin(np.pi/3)
    #Clockwise rotation puts the bump to the right of a ccw edge: outward
    rot = np.array([[c, s], [-s, c]])
    for _ in range(k):
        out = []
        for a, b in zip(ring, np.roll(ring, -1, axis=0)):
            step = (b - a)/3
            p1 = a + step
            out += [a, p1, p1 + rot @ step, a + 2*step]
        ring = np.array(out)
    return ring


def _square():
    return [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]


def gallery_spec(name, **params):
    '''Domain-spec document of a gallery domain

    Parameters
    ----------
        name : str
            Gallery name; 'koch-prefractal-<k>' sets the order directly
        **params
            slit_length (slit-square, Default is 0.5), k (koch-prefractal-k,
            Default is 2), box (exterior-convex-truncated half width,
            Default is 2.0), n_sides (disc, Default is 64)

    Returns
    -------
        spec : dict
    '''
    match = re.fullmatch(r'koch-prefractal-(\d+)', name)
    if match:
        name, params = 'koch-prefractal-k', dict(params, k=int(match.group(1)))
    if name not in GALLERY:
        raise UnknownGallery('Unknown Gallery: {}\nKnown: {}'
                             .format(name, ', '.join(GALLERY)))
    if name == 'square':
        return {'name': name, 'outer': _square()}
    if name == 'slit-square':
        L = float(params.get('slit_length', 0.5))
        if not 0 < L < 1:
            raise ParseError('Parse Error: slit_length must lie in (0, 1)\n'
                             'Got: {}'.format(L))
        return {'name': name, 'outer': _square(),
                'slits': [[[0.5, 0.0], [0.5, L]]]}
    if name == 'l-shape':
        return {'name': name,
                'outer': [[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5],
                          [0.5, 1.0], [0.0, 1.0]]}
    if name == 'convex-hexagon':
        return {'name': name,
                'outer': _regular_polygon(6, 0.5, (0.5, 0.5)).tolist()}
    if name == 'koch-prefractal-k':
        k = int(params.get('k', 2))
        if not 0 <= k <= MAX_KOCH_ORDER:
            raise ParseError('Parse Error: prefractal order must lie in '
                             '[0, {}]\nGot: {}'.format(MAX_KOCH_ORDER, k))
        return {'name': 'koch-prefractal-{}'.format(k),
                'outer': koch_prefractal(k).tolist()}
    if name == 'exterior-convex-truncated':
        box = float(params.get('box', 2.0))
        if not box > 0.5:
            raise ParseError('Parse Error: box must exceed the obstacle '
                             'radius 0.5\nGot: {}'.format(box))
        hole = _regular_polygon(6, 0.5)[::-1]
        return {'name': name,
                'outer': [[-box, -box], [box, -box], [box, box],
                          [-box, box]],
                'holes': [hole.tolist()]}
    n = int(params.get('n_sides', 64))
    return {'name': name, 'outer': _regular_polygon(n, 1.0).tolist()}


def gallery(name, **params):
    '''Gallery domain and its construction record

    Returns
    -------
        spec : GallerySpec
        domain : heatprof.geometry.PolygonDomain
    '''
    doc = gallery_spec(name, **params)
    match = re.fullmatch(r'koch-prefractal-(\d+)', name)
    if match:
        params = dict(params, k=int(match.group(1)))
    return GallerySpec(doc['name'], dict(params)), load_domain(doc)


def resolve_domain(ref, **params):
    '''Gallery name or domain-spec filename to a PolygonDomain'''
    if ref in GALLERY or re.fullmatch(r'koch-prefractal-\d+', ref):
        return gallery(ref, **params)[1]
    return load_domain(ref)
