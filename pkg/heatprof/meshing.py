"""
heatprof.meshing

"""

import os
import json
import pickle
from hashlib import md5
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
import shapely
from shapely.geometry import LineString, Polygon
from scipy.spatial import cKDTree
from triangle import triangulate as _triangle

from .errors import MeshError

#Minimum angle passed to the quality mesher (degrees)
MIN_ANGLE = 20
#Number of attempts at shrinking the area bound until all edges fit h_max
MAX_RETRIES = 8
#Refinement sweeps for graded meshes
MAX_GRADE_SWEEPS = 30


@dataclass
class Mesh:
    '''Conforming P1 triangulation of a polygonal domain

    Attributes
    ----------
        nodes : numpy.ndarray
            (n, 2) node coordinates
        triangles : numpy.ndarray
            (m, 3) counterclockwise node indices
        boundary_mask : numpy.ndarray of bool
            True for nodes on the outer ring, holes or slits
        slit_side : numpy.ndarray of int
            +1 / -1 for the two copies of a slit node, 0 elsewhere
        h_max : float
            Longest edge of the mesh
        domain_name : str
            Name of the triangulated domain
    '''
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    slit_side: np.ndarray
    h_max: float
    domain_name: str = 'domain'
    h_target: float = None
    _tree: object = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @cached_property
    def interior(self):
        '''Indices of the free (non-Dirichlet) nodes'''
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def areas(self):
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5*(e1[:, 0]*e2[:, 1] - e1[:, 1]*e2[:, 0])

    @cached_property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @cached_property
    def edges(self):
        '''(k, 2) unique undirected edges'''
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                       self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]],
                              axis=1)

    def min_angle(self):
        '''Smallest interior angle over all triangles, in degrees'''
        p = self.nodes[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k+1) % 3] - p[:, k]
            b = p[:, (k+2) % 3] - p[:, k]
            cos = np.sum(a*b, axis=1)/(np.linalg.norm(a, axis=1) *
                                       np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1, 1))))
        return float(np.min(angles))

    def query_points(self, domain):
        '''Node coordinates with slit copies moved onto their side'''
        return domain.query_points(self.nodes, self.slit_side)

    def stats(self):
        '''Mesh statistics embedded in every report'''
        return {'domain': self.domain_name,
                'n_nodes': int(self.n_nodes),
                'n_interior': int(len(self.interior)),
                'n_triangles': int(len(self.triangles)),
                'h_max': float(self.h_max),
                'min_angle': round(self.min_angle(), 6)}

    def nearest_node(self, point, interior_only=True):
        '''Index of the mesh node closest to a point'''
        pool = self.interior if interior_only else np.arange(self.n_nodes)
        d = np.linalg.norm(self.nodes[pool] - np.asarray(point, float),
                           axis=1)
        return int(pool[np.argmin(d)])

    def locate(self, points, k=8):
        '''Containing triangle and barycentric coordinates of each point

        Points outside every candidate triangle fall back to their nearest
        node (barycentric weight 1 on that node).

        Parameters
        ----------
            points : array_like
                (n, 2) coordinates
            k : int, optional
                Number of nearest triangle centroids searched, Default is 8

        Returns
        -------
            tri_nodes : numpy.ndarray
                (n, 3) node indices
            weights : numpy.ndarray
                (n, 3) barycentric weights
        '''
        pts = np.asarray(points, float).reshape(-1, 2)
        if self._tree is None:
            self._tree = cKDTree(self.centroids)
        k = min(k, len(self.triangles))
        _, cand = self._tree.query(pts, k=k)
        cand = np.asarray(cand).reshape(len(pts), k)
        tri_nodes = np.zeros((len(pts), 3), int)
        weights = np.zeros((len(pts), 3))
        for i, p in enumerate(pts):
            found = False
            for t in cand[i]:
                lam = _barycentric(self.nodes[self.triangles[t]], p)
                if np.all(lam >= -1e-10):
                    tri_nodes[i] = self.triangles[t]
                    weights[i] = np.clip(lam, 0, None)/np.sum(
                        np.clip(lam, 0, None))
                    found = True
                    break
            if not found:
                j = int(np.argmin(np.linalg.norm(self.nodes - p, axis=1)))
                tri_nodes[i] = j
                weights[i] = [1.0, 0.0, 0.0]
        return tri_nodes, weights

    def interpolate(self, values, points):
        '''Piecewise-linear interpolation of nodal values at points'''
        tri_nodes, weights = self.locate(points)
        values = np.asarray(values)
        return np.sum(values[tri_nodes]*weights, axis=-1) if \
            values.ndim == 1 else np.einsum('nk,nkj->nj', weights,
                                            values[tri_nodes])


def _barycentric(tri, p):
    T = np.array([tri[1] - tri[0], tri[2] - tri[0]]).T
    l12 = np.linalg.solve(T, p - tri[0])
    return np.array([1 - l12.sum(), l12[0], l12[1]])


def _split(a, b, h):
    n = max(1, int(np.ceil(np.linalg.norm(b - a)/h*(1 - 1e-12))))
    s = np.arange(n)/n
    return a + s[:, None]*(b - a)


class _PSLG:
    #Planar straight-line graph fed to the mesher, vertices deduplicated
    def __init__(self, tol):
        self.tol = tol
        self.vertices = []
        self.segments = []
        self.markers = []
        self._index = {}

    def vertex(self, p):
        key = tuple(np.round(np.asarray(p)/self.tol).astype(np.int64))
        if key not in self._index:
            self._index[key] = len(self.vertices)
            self.vertices.append(np.asarray(p, float))
        return self._index[key]

    def polyline(self, points, h, closed, marker):
        pts = np.asarray(points, float)
        n = len(pts)
        stop = n if closed else n - 1
        for k in range(stop):
            a, b = pts[k], pts[(k+1) % n]
            chain = [self.vertex(p) for p in _split(a, b, h)]
            chain.append(self.vertex(b))
            for i, j in zip(chain[:-1], chain[1:]):
                if i != j:
                    self.segments.append((i, j))
                    self.markers.append(marker)


def _ring_with_touch_points(ring, slits, tol):
    #Insert slit endpoints lying on a ring edge as ring vertices
    out = []
    n = len(ring)
    for k in range(n):
        a, b = ring[k], ring[(k+1) % n]
        out.append(a)
        edge = LineString([a, b])
        extra = []
        for slit in slits:
            for end in (slit[0], slit[-1]):
                if edge.distance(shapely.points(end)) <= tol and \
                        np.linalg.norm(end - a) > tol and \
                        np.linalg.norm(end - b) > tol:
                    extra.append(end)
        extra.sort(key=lambda p: np.linalg.norm(p - a))
        out.extend(extra)
    return np.array(out)


def _base_pslg(domain, h, extra_points):
    pslg = _PSLG(domain.tol*1e3)
    outer = _ring_with_touch_points(domain.outer, domain.slits, domain.tol*1e3)
    pslg.polyline(outer, h, True, 1)
    for hole in domain.holes:
        hole = _ring_with_touch_points(hole, domain.slits, domain.tol*1e3)
        pslg.polyline(hole, h, True, 2)
    for slit in domain.slits:
        pslg.polyline(slit, h, False, 3)
    if extra_points is not None:
        for p in np.asarray(extra_points, float).reshape(-1, 2):
            pslg.vertex(p)
    data = {'vertices': np.array(pslg.vertices),
            'segments': np.array(pslg.segments, dtype=np.int32),
            'segment_markers': np.array(pslg.markers, dtype=np.int32)}
    holes = [np.array(Polygon(h).representative_point().coords[0])
             for h in domain.holes]
    if holes:
        data['holes'] = np.array(holes)
    return data


def default_grade_points(domain):
    '''Reflex vertices and free slit tips of a domain'''
    G = domain.graph_nodes
    if len(G) == 0:
        return G
    #Slit bend copies sit 1e-9 off the slit, collapse them back
    return np.unique(np.round(G, 9), axis=0)


def _graded_refine(out, h_max, h_tip, grade_points, grade_factor):
    tree = cKDTree(np.asarray(grade_points, float).reshape(-1, 2))
    for _ in range(MAX_GRADE_SWEEPS):
        V, T = out['vertices'], out['triangles']
        cen = V[T].mean(axis=1)
        dist, _ = tree.query(cen)
        h_loc = np.clip(grade_factor*dist, h_tip, h_max)
        target = np.sqrt(3)/4*h_loc**2
        p = V[T]
        area = 0.5*np.abs((p[:, 1, 0] - p[:, 0, 0])*(p[:, 2, 1] - p[:, 0, 1])
                          - (p[:, 1, 1] - p[:, 0, 1])*(p[:, 2, 0] -
                                                       p[:, 0, 0]))
        if np.all(area <= target*1.5):
            return out
        data = {'vertices': V, 'triangles': T,
                'segments': out['segments'],
                'segment_markers': out.get('segment_markers'),
                'triangle_max_area': np.where(area > target*1.5, target,
                                              -1.0).reshape(-1, 1)}
        if data['segment_markers'] is None:
            del data['segment_markers']
        out = _triangle(data, 'rpq{}aDQ'.format(MIN_ANGLE))
    return out


def _duplicate_slit_nodes(domain, nodes, tris):
    side = np.zeros(len(nodes), int)
    if not domain.slits:
        return nodes, tris, side
    pts = shapely.points(nodes)
    on_ring = shapely.distance(domain.polygon.boundary, pts) <= domain.tol*1e3
    new_nodes = [nodes]
    tris = tris.copy()
    count = len(nodes)
    for slit in domain.slits:
        on = shapely.distance(LineString(slit), pts) <= domain.tol*1e3
        on &= ~on_ring
        for i in np.flatnonzero(on):
            if domain._is_free_tip(nodes[i]):
                continue
            side[i] = 1
            copy = count
            count += 1
            new_nodes.append(nodes[i][None])
            hit = np.flatnonzero(np.any(tris == i, axis=1))
            for t in hit:
                c = nodes[tris[t]].mean(axis=0)
                seg_d = [LineString(slit[k:k+2]).distance(shapely.points(c))
                         for k in range(len(slit)-1)]
                k = int(np.argmin(seg_d))
                a, b = slit[k], slit[k+1]
                cross = (b[0]-a[0])*(c[1]-a[1]) - (b[1]-a[1])*(c[0]-a[0])
                if cross < 0:
                    tris[t][tris[t] == i] = copy
    nodes = np.vstack(new_nodes)
    side = np.concatenate([side, -np.ones(len(nodes) - len(side), int)])
    return nodes, tris, side


def triangulate(domain, h_max, grade_points=None, h_tip=None,
                grade_factor=0.5, extra_points=None):
    '''Constrained quality triangulation of a domain

    Boundary rings and slits are pre-split into pieces no longer than h_max
    and meshed with Triangle (minimum angle 20 degrees, conforming Delaunay).
    With grade_points the mesh is refined geometrically towards those points,
    the local size being grade_factor times the distance to the nearest one,
    clipped to [h_tip, h_max]. Slit nodes are duplicated after meshing, one
    copy per side.

    Parameters
    ----------
        domain : heatprof.geometry.PolygonDomain
            Domain to mesh
        h_max : float
            Largest edge length
        grade_points : array_like or str, optional
            Points to grade towards, or 'auto' for the reflex vertices and
            free slit tips, Default is None (uniform mesh)
        h_tip : float, optional
            Smallest graded size, Default is h_max/64
        grade_factor : float, optional
            Geometric grading factor, Default is 0.5
        extra_points : array_like, optional
            Points forced into the mesh as nodes, Default is None

    Returns
    -------
        mesh : Mesh
    '''
    if not h_max > 0:
        raise MeshError('Mesh Error: h_max must be positive\nGot: {}'
                        .format(h_max))
    h_tip = h_max/64 if h_tip is None else h_tip
    area = np.sqrt(3)/4*h_max**2
    for attempt in range(MAX_RETRIES):
        data = _base_pslg(domain, h_max, extra_points)
        try:
            out = _triangle(data, 'pq{}a{:.12f}DQ'.format(MIN_ANGLE, area))
        except Exception as err:
            raise MeshError('Mesh Error: mesher failed on {}\n{}'
                            .format(domain.name, err))
        if isinstance(grade_points, str) and grade_points == 'auto':
            grade_points = default_grade_points(domain)
        if grade_points is not None and len(grade_points):
            out = _graded_refine(out, h_max, h_tip, grade_points,
                                 grade_factor)
        nodes = np.asarray(out['vertices'], float)
        tris = np.asarray(out['triangles'], int)
        e = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        longest = np.max(np.linalg.norm(nodes[e[:, 0]] - nodes[e[:, 1]],
                                        axis=1))
        if longest <= h_max*(1 + 1e-9):
            break
        area *= 0.7
    else:
        raise MeshError('Mesh Error: could not meet h_max = {} on {}\n'
                        'Longest edge: {}'.format(h_max, domain.name,
                                                  longest))
    #Orient counterclockwise and reject degenerate triangles
    p = nodes[tris]
    two_area = (p[:, 1, 0] - p[:, 0, 0])*(p[:, 2, 1] - p[:, 0, 1]) - \
        (p[:, 1, 1] - p[:, 0, 1])*(p[:, 2, 0] - p[:, 0, 0])
    tris[two_area < 0] = tris[two_area < 0][:, [0, 2, 1]]
    if np.any(np.abs(two_area) <= domain.tol**2):
        raise MeshError('Mesh Error: degenerate triangle in the mesh of {}'
                        .format(domain.name))
    nodes, tris, side = _duplicate_slit_nodes(domain, nodes, tris)
    boundary = shapely.distance(domain._boundary, shapely.points(nodes)) \
        <= domain.tol*1e3
    mesh = Mesh(nodes, tris, boundary, side, float(longest), domain.name,
                float(h_max))
    if mesh.min_angle() < MIN_ANGLE - 1e-6:
        raise MeshError('Mesh Error: minimum angle {:.3f} below {} degrees on '
                        '{}'.format(mesh.min_angle(), MIN_ANGLE, domain.name))
    return mesh


def cached_triangulate(domain, h_max, cache_dir=None, verbose=True,
                       **kwargs):
    '''Triangulation with an on-disk pickle cache

    Parameters
    ----------
        domain : heatprof.geometry.PolygonDomain
            Domain to mesh
        h_max : float
            Largest edge length
        cache_dir : str, optional
            Cache directory, Default is $HEATPROF_CACHE or the working
            directory
        verbose : bool, optional
            Flag to report cache reuse, Default is True
        **kwargs
            Passed on to triangulate

    Returns
    -------
        mesh : Mesh
    '''
    cache_dir = cache_dir or os.environ.get('HEATPROF_CACHE', '.')
    key = {'domain': domain.to_spec(), 'h_max': h_max}
    for k, v in sorted(kwargs.items()):
        key[k] = np.asarray(v).tolist() if not isinstance(v, str) else v
    key_hash = md5(json.dumps(key, sort_keys=True).encode('ascii')) \
        .hexdigest()
    cache_fn = os.path.join(cache_dir, 'cached-mesh-{}.pkl'.format(key_hash))
    try:
        f = open(cache_fn, 'rb')
    except OSError:
        mesh = triangulate(domain, h_max, **kwargs)
        os.makedirs(cache_dir, exist_ok=True)
        with open(cache_fn, 'wb') as f:
            pickle.dump(mesh, f)
    else:
        mesh = pickle.load(f)
        f.close()
        if verbose:
            print('Using cached mesh')
    return mesh
