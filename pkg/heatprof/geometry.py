"""
heatprof.geometry

"""

import os
import json
import heapq
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
import pandas as pd
import shapely
from shapely.geometry import Polygon, LineString, LinearRing, MultiLineString
from shapely.geometry.polygon import orient
from shapely.ops import unary_union
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path, dijkstra
from scipy.spatial import cKDTree

from .errors import ParseError, GeometryError, SearchFailure, \
    CertificationFailure, EmptyBall

#Absolute tolerance of geometric predicates, relative to the domain scale
GEOM_TOL = 1e-12
#Offset that moves slit points onto one side of the slit
NUDGE = 1e-9
#Inward trim of free slit tips so paths may pass through the tip itself
TIP_TRIM = 1e-10


@dataclass
class GeodesicPath:
    '''Shortest path inside the closed domain

    Attributes
    ----------
        waypoints : numpy.ndarray
            (n, 2) array of path vertices, first is the start point
        length : float
            Path length, equals the inner distance of the endpoints
    '''
    waypoints: np.ndarray
    length: float


@dataclass
class InnerBall:
    '''Ball of the inner metric centred at a point of the completion'''
    center: np.ndarray
    radius: float
    node_set: np.ndarray
    x_r: np.ndarray
    distances: np.ndarray = field(default=None, repr=False)


@dataclass
class UniformityCertificate:
    '''Empirical inner-uniformity constants with their witnesses'''
    c_u: float
    C_u: float
    witness_pairs: list
    n_samples: int

    def to_frame(self):
        '''Witness table, one row per sampled pair'''
        rows = [[x[0], x[1], y[0], y[1], c, C] for x, y, c, C in
                self.witness_pairs]
        return pd.DataFrame(rows, columns=['x0', 'x1', 'y0', 'y1', 'c', 'C'])


def _ring_array(points, what):
    try:
        ring = np.array(points, dtype=float)
    except (TypeError, ValueError):
        raise ParseError('Parse Error: {} is not a list of [x, y] pairs'
                         .format(what))
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise ParseError('Parse Error: {} is not a list of [x, y] pairs'
                         .format(what))
    if not np.all(np.isfinite(ring)):
        raise ParseError('Parse Error: {} has non-finite coordinates'
                         .format(what))
    if len(ring) > 1 and np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    return ring


def _left_normal(a, b):
    t = (b - a) / np.linalg.norm(b - a)
    return np.array([-t[1], t[0]])


class PolygonDomain:
    '''Polygonal planar domain with holes and slits

    The open region is the outer polygon minus the closed holes minus the
    slits. Slits are open polylines; a slit point is seen from two sides,
    which realizes the completion of the domain for its inner metric.

    Parameters
    ----------
        outer : array_like
            Vertices of the outer ring, counterclockwise
        holes : list of array_like, optional
            Vertices of each hole ring, clockwise, Default is no holes
        slits : list of array_like, optional
            Polylines strictly inside the outer ring (an endpoint may touch
            the boundary), Default is no slits
        name : str, optional
            Label used in reports, Default is 'domain'
    '''

    def __init__(self, outer, holes=(), slits=(), name='domain'):
        self.name = name
        outer = _ring_array(outer, 'outer ring')
        holes = [_ring_array(h, 'hole {}'.format(i))
                 for i, h in enumerate(holes)]
        self.slits = [_ring_array(s, 'slit {}'.format(i)) if len(s) > 2
                      else np.array(s, dtype=float)
                      for i, s in enumerate(slits)]
        self._validate_rings(outer, holes)
        self.polygon = orient(Polygon(outer, holes), 1.0)
        self.outer = np.array(self.polygon.exterior.coords)[:-1]
        self.holes = [np.array(r.coords)[:-1] for r in
                      self.polygon.interiors]
        minx, miny, maxx, maxy = self.polygon.bounds
        self.scale = max(maxx - minx, maxy - miny)
        self.tol = GEOM_TOL*self.scale
        self._validate_slits()
        self._region = self.polygon.buffer(self.tol*100,
                                           join_style='mitre')
        shapely.prepare(self._region)
        self._boundary = unary_union([self.polygon.boundary] +
                                     [LineString(s) for s in self.slits])
        shapely.prepare(self._boundary)
        self.free_tips = self._find_free_tips()
        self._blockers = self._build_blockers()

    #Validation
    def _validate_rings(self, outer, holes):
        if len(outer) < 3:
            raise GeometryError('Geometry Error: outer ring needs at least 3 '
                                'vertices\nGot: {}'.format(len(outer)))
        if not LinearRing(outer).is_simple:
            raise GeometryError('Geometry Error: outer ring self-intersects')
        shell = Polygon(outer)
        for i, hole in enumerate(holes):
            if len(hole) < 3 or not LinearRing(hole).is_simple:
                raise GeometryError('Geometry Error: hole {} is not a simple '
                                    'ring'.format(i))
            if not shell.contains(Polygon(hole)):
                raise GeometryError('Geometry Error: hole {} is not strictly '
                                    'inside the outer ring'.format(i))
            for j in range(i):
                if not Polygon(hole).disjoint(Polygon(holes[j])):
                    raise GeometryError('Geometry Error: holes {} and {} '
                                        'intersect'.format(j, i))

    def _validate_slits(self):
        lines = []
        for i, slit in enumerate(self.slits):
            if slit.ndim != 2 or len(slit) < 2 or \
                    not np.all(np.isfinite(slit)):
                raise GeometryError('Geometry Error: slit {} needs at least 2 '
                                    'finite vertices'.format(i))
            line = LineString(slit)
            if not line.is_simple or line.length <= self.tol:
                raise GeometryError('Geometry Error: slit {} is degenerate or '
                                    'self-intersecting'.format(i))
            if not self.polygon.covers(line):
                raise GeometryError('Geometry Error: slit {} leaves the '
                                    'domain'.format(i))
            touch = line.intersection(self.polygon.boundary)
            for p in getattr(touch, 'geoms', [touch]):
                if p.is_empty:
                    continue
                if p.geom_type != 'Point' or min(
                        np.linalg.norm(np.array(p.coords[0]) - slit[0]),
                        np.linalg.norm(np.array(p.coords[0]) - slit[-1])) \
                        > self.tol*100:
                    raise GeometryError('Geometry Error: slit {} crosses the '
                                        'boundary'.format(i))
            for j, other in enumerate(lines):
                if line.intersects(other):
                    raise GeometryError('Geometry Error: slits {} and {} '
                                        'intersect'.format(j, i))
            lines.append(line)
        if lines:
            cut = self.polygon.difference(
                unary_union(lines).buffer(self.scale*1e-7))
            parts = [g for g in getattr(cut, 'geoms', [cut])
                     if g.area > self.scale**2*1e-9]
            if len(parts) != 1:
                raise GeometryError('Geometry Error: slits disconnect the '
                                    'region into {} parts'.format(len(parts)))

    def _find_free_tips(self):
        tips = []
        for i, slit in enumerate(self.slits):
            for end in (slit[0], slit[-1]):
                if self.polygon.boundary.distance(shapely.points(end)) \
                        > self.tol*100:
                    tips.append(end)
        return np.array(tips).reshape(-1, 2)

    def _build_blockers(self):
        trimmed = []
        for slit in self.slits:
            s = slit.copy()
            for k, nb in ((0, 1), (-1, -2)):
                if self._is_free_tip(s[k]):
                    d = s[nb] - s[k]
                    s[k] = s[k] + d/np.linalg.norm(d)*TIP_TRIM*self.scale
            trimmed.append(s)
        if not trimmed:
            return None
        blockers = MultiLineString(trimmed)
        shapely.prepare(blockers)
        return blockers

    def _is_free_tip(self, p):
        if len(self.free_tips) == 0:
            return False
        return np.min(np.linalg.norm(self.free_tips - p, axis=1)) <= self.tol

    #Queries
    def query_points(self, points, sides=None):
        '''Moves slit points onto their side of the slit

        Parameters
        ----------
            points : array_like
                (n, 2) coordinates
            sides : array_like of int, optional
                Per-point side tag, +1 left of the slit direction, -1 right,
                0 off-slit (slit points default to +1), Default is None

        Returns
        -------
            q : numpy.ndarray
                (n, 2) coordinates usable by the visibility predicates
        '''
        q = np.array(points, dtype=float).reshape(-1, 2)
        if not self.slits:
            return q
        sides = np.zeros(len(q), int) if sides is None else \
            np.asarray(sides, int).reshape(-1)
        for slit in self.slits:
            dist = shapely.distance(LineString(slit), shapely.points(q))
            for i in np.flatnonzero(dist <= self.tol*100):
                if self._is_free_tip(q[i]):
                    continue
                side = sides[i] if sides[i] != 0 else 1
                q[i] = q[i] + side*NUDGE*self.scale*_slit_normal(slit, q[i])
        return q

    def check_inside(self, points):
        '''Raises GeometryError if a point lies outside the closed domain'''
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        dist = shapely.distance(self.polygon, shapely.points(pts))
        bad = np.flatnonzero(dist > self.tol*1e3)
        if len(bad):
            raise GeometryError('Geometry Error: point outside the domain\n'
                                'Point: {}'.format(pts[bad[0]].tolist()))

    def admissible(self, starts, ends):
        '''Segment test: inside the closed domain and crossing no slit

        Parameters
        ----------
            starts, ends : numpy.ndarray
                (n, 2) segment endpoints (already side-adjusted)

        Returns
        -------
            ok : numpy.ndarray of bool
        '''
        starts = np.asarray(starts, float).reshape(-1, 2)
        ends = np.asarray(ends, float).reshape(-1, 2)
        ok = np.ones(len(starts), bool)
        if len(starts) == 0:
            return ok
        zero = np.all(np.abs(ends - starts) <= self.tol*1e-3, axis=1)
        idx = np.flatnonzero(~zero)
        if len(idx) == 0:
            return ok
        lines = shapely.linestrings(np.stack([starts[idx], ends[idx]],
                                             axis=1))
        good = shapely.covers(self._region, lines)
        if self._blockers is not None:
            good &= ~shapely.intersects(lines, self._blockers)
        ok[idx] = good
        return ok

    @cached_property
    def graph_nodes(self):
        '''Visibility-graph nodes: reflex vertices, free tips, slit bends'''
        nodes = []
        rings = [self.outer] + self.holes
        for ring in rings:
            n = len(ring)
            for k in range(n):
                a, v, b = ring[k-1], ring[k], ring[(k+1) % n]
                e1, e2 = v - a, b - v
                if e1[0]*e2[1] - e1[1]*e2[0] < 0:
                    nodes.append(v)
        for tip in self.free_tips:
            nodes.append(tip)
        for slit in self.slits:
            for k in range(1, len(slit)-1):
                n_avg = _left_normal(slit[k-1], slit[k]) + \
                    _left_normal(slit[k], slit[k+1])
                n_avg = n_avg/np.linalg.norm(n_avg)
                for side in (1, -1):
                    nodes.append(slit[k] + side*NUDGE*self.scale*n_avg)
        return np.array(nodes).reshape(-1, 2)

    @cached_property
    def _graph(self):
        G = self.graph_nodes
        n = len(G)
        if n == 0:
            return np.zeros((0, 0)), np.zeros((0, 0), int)
        I, J = np.triu_indices(n, 1)
        ok = self.admissible(G[I], G[J])
        w = np.linalg.norm(G[I] - G[J], axis=1)
        I, J, w = I[ok], J[ok], w[ok]
        #Zero-weight edges are dropped by csgraph, keep them strictly positive
        w = np.maximum(w, self.tol*1e-3)
        A = coo_matrix((w, (I, J)), shape=(n, n)).tocsr()
        D, pred = shortest_path(A, directed=False, return_predecessors=True)
        return D, pred

    @cached_property
    def diam_inner(self):
        '''Inner diameter by a geodesic sweep over boundary vertices'''
        pts = [self.outer] + self.holes
        sides = [np.zeros(len(p), int) for p in pts]
        for slit in self.slits:
            pts += [slit, slit]
            sides += [np.ones(len(slit), int), -np.ones(len(slit), int)]
        pts = np.vstack(pts)
        sides = np.concatenate(sides)
        q = self.query_points(pts, sides)
        diam = 0.0
        for i in range(len(q) - 1):
            d = self._distances_from(q[i], q[i+1:])
            diam = max(diam, float(np.max(d)))
        return diam

    def _source_to_graph(self, s):
        G = self.graph_nodes
        D, _ = self._graph
        if len(G) == 0:
            return np.zeros(0), np.zeros(0, int)
        vis = self.admissible(np.repeat(s[None], len(G), 0), G)
        ds = np.linalg.norm(G - s, axis=1)
        via = np.where(vis[:, None], ds[:, None] + D, np.inf)
        first = np.argmin(via, axis=0)
        return via[first, np.arange(len(G))], first

    def _distances_from(self, s, targets):
        targets = np.asarray(targets, float).reshape(-1, 2)
        d = np.linalg.norm(targets - s, axis=1)
        direct = self.admissible(np.repeat(s[None], len(targets), 0),
                                 targets)
        out = np.where(direct, d, np.inf)
        rest = np.flatnonzero(~direct)
        G = self.graph_nodes
        if len(rest) == 0 or len(G) == 0:
            return out
        ds_g, _ = self._source_to_graph(s)
        reach = np.flatnonzero(np.isfinite(ds_g))
        if len(reach) == 0:
            return out
        T = targets[rest]
        Gr = G[reach]
        nT, nG = len(T), len(Gr)
        vis = self.admissible(np.repeat(T, nG, 0), np.tile(Gr, (nT, 1)))
        vis = vis.reshape(nT, nG)
        dist = np.linalg.norm(T[:, None, :] - Gr[None, :, :], axis=2)
        via = np.where(vis, dist + ds_g[reach][None, :], np.inf)
        out[rest] = np.min(via, axis=1)
        return out

    def to_spec(self):
        '''Domain-spec document (dict) for this domain'''
        return {'name': self.name,
                'outer': self.outer.tolist(),
                'holes': [h.tolist() for h in self.holes],
                'slits': [s.tolist() for s in self.slits]}


def _slit_normal(slit, p):
    seg_d = [LineString(slit[k:k+2]).distance(shapely.points(p))
             for k in range(len(slit)-1)]
    k = int(np.argmin(seg_d))
    n = _left_normal(slit[k], slit[k+1])
    #At a bend vertex average the normals of both segments
    for j in (k-1, k+1):
        if 0 <= j < len(slit)-1 and abs(seg_d[j] - seg_d[k]) <= 1e-14 and \
                min(np.linalg.norm(slit[j] - p),
                    np.linalg.norm(slit[j+1] - p)) < 1e-9:
            n = n + _left_normal(slit[j], slit[j+1])
            n = n/np.linalg.norm(n)
            break
    return n


def load_domain(spec):
    '''Parses and validates a domain-spec document

    Parameters
    ----------
        spec : dict or str
            Parsed document, JSON text, or the filename of a JSON file with
            fields outer, holes, slits and name

    Returns
    -------
        domain : PolygonDomain
            Validated domain with its inner diameter computed
    '''
    if isinstance(spec, str):
        text = spec
        if os.path.isfile(spec):
            with open(spec, 'r') as f_ptr:
                text = f_ptr.read()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError('Parse Error: domain spec is not valid JSON\n'
                             '{}'.format(err))
    if not isinstance(spec, dict) or 'outer' not in spec:
        raise ParseError('Parse Error: domain spec needs an "outer" field')
    unknown = set(spec) - {'outer', 'holes', 'slits', 'name'}
    if unknown:
        raise ParseError('Parse Error: unknown domain-spec fields\n'
                         '{}'.format(sorted(unknown)))
    slits = []
    for i, s in enumerate(spec.get('slits', [])):
        slits.append(_ring_array(s, 'slit {}'.format(i)) if len(s) != 2
                     else _open_polyline(s, i))
    domain = PolygonDomain(spec['outer'], spec.get('holes', []), slits,
                           name=spec.get('name', 'domain'))
    domain.diam_inner
    return domain


def _open_polyline(points, i):
    try:
        line = np.array(points, dtype=float)
    except (TypeError, ValueError):
        raise ParseError('Parse Error: slit {} is not a list of [x, y] pairs'
                         .format(i))
    if line.shape != (2, 2) or not np.all(np.isfinite(line)):
        raise ParseError('Parse Error: slit {} is not a list of finite '
                         '[x, y] pairs'.format(i))
    return line


def inner_distance(domain, x, y, x_side=0, y_side=0):
    '''Shortest path inside the closed domain avoiding slit crossings

    Parameters
    ----------
        domain : PolygonDomain
            Domain to measure in
        x, y : array_like
            Endpoints in the closed domain
        x_side, y_side : int, optional
            Side tags for points on a slit, Default is 0

    Returns
    -------
        path : GeodesicPath
            Waypoints and length of the geodesic
    '''
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    domain.check_inside(np.vstack([x, y]))
    qx = domain.query_points(x, [x_side])[0]
    qy = domain.query_points(y, [y_side])[0]
    if np.linalg.norm(qx - qy) <= domain.tol and x_side == y_side:
        return GeodesicPath(np.array([x]), 0.0)
    if domain.admissible(qx[None], qy[None])[0]:
        return GeodesicPath(np.array([x, y]), float(np.linalg.norm(qx - qy)))
    G = domain.graph_nodes
    D, pred = domain._graph
    ds_g, first = domain._source_to_graph(qx)
    vis = domain.admissible(np.repeat(qy[None], len(G), 0), G)
    total = np.where(vis, ds_g + np.linalg.norm(G - qy, axis=1), np.inf)
    g_last = int(np.argmin(total))
    if not np.isfinite(total[g_last]):
        raise GeometryError('Geometry Error: no path inside the domain\n'
                            'Points: {} {}'.format(x.tolist(), y.tolist()))
    g_first = int(first[g_last])
    chain = [g_last]
    while chain[-1] != g_first:
        chain.append(int(pred[g_first, chain[-1]]))
    waypoints = np.vstack([x, G[chain[::-1]], y])
    return GeodesicPath(waypoints, float(total[g_last]))


def inner_distances(domain, source, points, source_side=0, sides=None):
    '''Inner distances from one point to many points

    Parameters
    ----------
        domain : PolygonDomain
            Domain to measure in
        source : array_like
            Source point in the closed domain
        points : array_like
            (n, 2) target points
        source_side : int, optional
            Side tag of the source, Default is 0
        sides : array_like of int, optional
            Side tags of the targets, Default is None

    Returns
    -------
        d : numpy.ndarray
            (n,) inner distances
    '''
    source = np.asarray(source, float)
    domain.check_inside(source)
    s = domain.query_points(source, [source_side])[0]
    q = domain.query_points(points, sides)
    return domain._distances_from(s, q)


def boundary_distance(domain, x):
    '''Distance from x to the outer ring, holes and slits'''
    return float(boundary_distances(domain, np.asarray(x, float)[None])[0])


def boundary_distances(domain, points):
    '''Vectorized boundary_distance for an (n, 2) array'''
    pts = np.asarray(points, float).reshape(-1, 2)
    domain.check_inside(pts)
    return shapely.distance(domain._boundary, shapely.points(pts))


def ambient_volume(x, r):
    '''Lebesgue area of the Euclidean disc B(x, r), pi*r^2'''
    return np.pi*np.asarray(r, dtype=float)**2


def representative_points(domain, centers, r, c_u=0.25, rule='deepest',
                          sides=None, n_dirs=64):
    '''Representative points x_r for many centres at one radius

    Candidates are the endpoints of the admissible rays of length r/4 from
    each centre, so d_U(center, x_r) = r/4 exactly; centres whose rays all
    fail fall back to walking around reachable corners.

    Parameters
    ----------
        domain : PolygonDomain
            Domain to search in
        centers : array_like
            (n, 2) centres
        r : float
            Radius of the inner ball
        c_u : float, optional
            Uniformity constant, the point must satisfy
            delta(x_r) >= c_u*r/8, Default is 0.25
        rule : str, optional
            'deepest' picks the candidate farthest from the boundary,
            'first-admissible' the first candidate in angle order that meets
            the depth bound, Default is 'deepest'
        sides : array_like of int, optional
            Side tags of slit centres, Default is None
        n_dirs : int, optional
            Number of ray directions, Default is 64

    Returns
    -------
        x_r : numpy.ndarray
            (n, 2) representative points
    '''
    if rule not in ('deepest', 'first-admissible'):
        raise ValueError('Unknown representative-point rule: {}'.format(rule))
    centers = np.asarray(centers, float).reshape(-1, 2)
    domain.check_inside(centers)
    C = domain.query_points(centers, sides)
    n = len(C)
    theta = 2*np.pi*np.arange(n_dirs)/n_dirs
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    E = C[:, None, :] + 0.25*r*dirs[None, :, :]
    E = E.reshape(-1, 2)
    ok = domain.admissible(np.repeat(C, n_dirs, 0), E)
    depth = np.full(len(E), -np.inf)
    if np.any(ok):
        depth[ok] = shapely.distance(domain._boundary,
                                     shapely.points(E[ok]))
    depth = depth.reshape(n, n_dirs)
    E = E.reshape(n, n_dirs, 2)
    need = c_u*r/8
    out = np.empty((n, 2))
    for i in range(n):
        if rule == 'first-admissible' and np.any(depth[i] >= need):
            k = int(np.flatnonzero(depth[i] >= need)[0])
        else:
            k = int(np.argmax(depth[i]))
        if depth[i, k] >= need:
            out[i] = E[i, k]
        else:
            out[i] = _walk_candidate(domain, C[i], r, need, dirs)
    return out


def _walk_candidate(domain, c, r, need, dirs):
    G = domain.graph_nodes
    ds_g, _ = domain._source_to_graph(c)
    best, best_depth = None, -np.inf
    for g in np.flatnonzero(ds_g < 0.25*r):
        rest = 0.25*r - ds_g[g]
        E = G[g] + rest*dirs
        ok = domain.admissible(np.repeat(G[g][None], len(E), 0), E)
        if not np.any(ok):
            continue
        E = E[ok]
        d = domain._distances_from(c, E)
        E = E[np.abs(d - 0.25*r) <= 1e-9*max(1.0, r)]
        if len(E) == 0:
            continue
        depth = shapely.distance(domain._boundary, shapely.points(E))
        k = int(np.argmax(depth))
        if depth[k] > best_depth:
            best, best_depth = E[k], depth[k]
    if best is None or best_depth < need:
        raise SearchFailure('Search Failure: no point at inner distance r/4 '
                            'with delta >= c_u*r/8\nCenter: {}, r: {}, '
                            'needed depth: {}'.format(c.tolist(), r, need))
    return best


def representative_point(domain, center, r, c_u, rule='deepest', side=0):
    '''Representative point x_r of the inner ball B(center, r)

    Parameters
    ----------
        domain : PolygonDomain
            Domain to search in
        center : array_like
            Centre of the ball
        r : float
            Radius, 0 < r <= diam_inner
        c_u : float
            Uniformity constant of the certificate
        rule : str, optional
            Selection rule, see representative_points, Default is 'deepest'
        side : int, optional
            Side tag for a slit centre, Default is 0

    Returns
    -------
        x_r : numpy.ndarray
            Point with d_U(center, x_r) = r/4 and delta(x_r) >= c_u*r/8
    '''
    if r <= 0 or r > domain.diam_inner*(1 + 1e-9):
        raise SearchFailure('Search Failure: radius must lie in '
                            '(0, diam_inner]\nr: {}, diam_inner: {}'
                            .format(r, domain.diam_inner))
    return representative_points(domain, center, r, c_u, rule, [side])[0]


def inner_ball(domain, mesh, center, r, c_u=0.25, side=0, rule='deepest'):
    '''Interior mesh nodes of the inner ball B_U(center, r) and its point x_r

    Boundary nodes within r are left out of node_set; distances covers
    every node.

    Parameters
    ----------
        domain : PolygonDomain
            Domain the mesh triangulates
        mesh : heatprof.meshing.Mesh
            Mesh whose nodes are collected
        center : array_like
            Centre in the closed domain
        r : float
            Radius, must be positive
        c_u : float, optional
            Uniformity constant for x_r, Default is 0.25
        side : int, optional
            Side tag of a slit centre, Default is 0
        rule : str, optional
            Representative-point rule, Default is 'deepest'

    Returns
    -------
        ball : InnerBall
    '''
    if r <= 0:
        raise EmptyBall('Empty Ball: radius must be positive\nr: {}'
                        .format(r))
    center = np.asarray(center, float)
    d = inner_distances(domain, center, mesh.nodes, side, mesh.slit_side)
    nodes = np.flatnonzero((d < r) & ~mesh.boundary_mask)
    if len(nodes) == 0:
        raise EmptyBall('Empty Ball: no interior node within r of the '
                        'centre\nCenter: {}, r: {}'.format(center.tolist(), r))
    x_r = representative_point(domain, center, min(r, domain.diam_inner),
                               c_u, rule, side)
    return InnerBall(center, float(r), nodes, x_r, d)


def _sample_point(domain, rng, near=None):
    minx, miny, maxx, maxy = domain.polygon.bounds
    while True:
        p = rng.uniform([minx, miny], [maxx, maxy])
        if not shapely.contains_xy(domain.polygon, p[0], p[1]):
            continue
        if near is not None:
            if shapely.distance(domain._boundary,
                                shapely.points(p)) >= near:
                continue
        elif domain.slits and shapely.distance(
                domain._boundary, shapely.points(p)) <= domain.tol*1e3:
            continue
        return p


def _length_uniform_c(domain, waypoints, step):
    seg = np.diff(waypoints, axis=0)
    lens = np.linalg.norm(seg, axis=1)
    total = lens.sum()
    if total <= domain.tol:
        return np.inf
    pts, arc = [], []
    acc = 0.0
    for a, v, L in zip(waypoints[:-1], seg, lens):
        m = max(2, int(np.ceil(L/step)))
        s = np.linspace(0, 1, m, endpoint=False)[1:]
        pts.append(a + s[:, None]*v)
        arc.append(acc + s*L)
        acc += L
    pts = np.vstack(pts + [waypoints[1:-1]]) if len(waypoints) > 2 else \
        np.vstack(pts)
    arc = np.concatenate(arc + [np.cumsum(lens)[:-1]]) if \
        len(waypoints) > 2 else np.concatenate(arc)
    depth = shapely.distance(domain._boundary, shapely.points(pts))
    lower = np.minimum(arc, total - arc)
    keep = lower > 1e-12
    if not np.any(keep):
        return np.inf
    return float(np.min(depth[keep]/lower[keep]))


def _constrained_dijkstra(adj, depth, source, c):
    dist = np.full(len(adj), np.inf)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v] and depth[v] >= c*nd:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def _graph_uniformity(domain, nodes, depth, adj, x, y, d_xy, C_max,
                      c_floor, iters=14):
    #Two-sided search: from x the depth must beat c*l_before, from y
    #c*l_after; meeting at a node gives an admissible curve.
    def attempt(c):
        dx = _constrained_dijkstra(adj, depth, x, c)
        dy = _constrained_dijkstra(adj, depth, y, c)
        total = np.min(dx + dy)
        return total if total <= C_max*d_xy*(1 + 1e-12) else None
    lo, hi = c_floor, 4.0
    best = None
    if c_floor > 0:
        best = attempt(c_floor)
        if best is None:
            return 0.0, None
    else:
        lo = 0.0
    for _ in range(iters):
        mid = 0.5*(lo + hi) if lo > 0 else (hi/2**6 if best is None
                                            else 0.5*(lo + hi))
        length = attempt(mid)
        if length is None:
            hi = mid
        else:
            lo, best = mid, length
    return lo, best


def certify_uniformity(domain, n_samples, C_max=2.0, seed=0, h_path=None,
                       near_fraction=0.5, verbose=False):
    '''Empirical (c_u, C_u) inner-uniformity certificate

    For each sampled pair the best of two curves is kept: the geodesic
    polyline itself (length ratio 1) and a path-graph search that maximizes
    c in the length-uniform criterion subject to length <= C_max*d_U.

    Parameters
    ----------
        domain : PolygonDomain
            Domain to certify
        n_samples : int
            Number of point pairs, at least 1
        C_max : float, optional
            Length budget, must exceed 1, Default is 2.0
        seed : int, optional
            Seed of the pair sampler, Default is 0
        h_path : float, optional
            Mesh size of the path graph, Default is domain.scale/12
        near_fraction : float, optional
            Share of pairs whose first point lies near the boundary,
            Default is 0.5
        verbose : bool, optional
            Flag to print per-pair progress, Default is False

    Returns
    -------
        certificate : UniformityCertificate
    '''
    from .meshing import triangulate
    if n_samples < 1 or C_max <= 1:
        raise CertificationFailure('Certification Failure: need n_samples '
                                   '>= 1 and C_max > 1\nGot: {}, {}'
                                   .format(n_samples, C_max))
    rng = np.random.default_rng(seed)
    h_path = domain.scale/12 if h_path is None else h_path
    mesh = triangulate(domain, h_path)
    base = mesh.query_points(domain)
    rho = 2.5*mesh.h_max
    witnesses = []
    every = max(1, int(round(1/near_fraction))) if near_fraction > 0 else 0
    for k in range(n_samples):
        near = 0.05*domain.scale if every and k % every == 0 else None
        x = _sample_point(domain, rng, near)
        y = _sample_point(domain, rng)
        geo = inner_distance(domain, x, y)
        d_xy = geo.length
        c_geo = _length_uniform_c(domain, geo.waypoints, mesh.h_max/4)
        if not np.isfinite(c_geo):
            witnesses.append((x, y, 1.0, 1.0))
            continue
        pts = np.vstack([base, x, y])
        depth = shapely.distance(domain._boundary, shapely.points(pts))
        pairs = np.array(sorted(cKDTree(pts).query_pairs(rho))).reshape(-1, 2)
        ok = domain.admissible(pts[pairs[:, 0]], pts[pairs[:, 1]])
        pairs = pairs[ok]
        w = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
        adj = [[] for _ in range(len(pts))]
        for (i, j), wij in zip(pairs, w):
            adj[i].append((j, wij))
            adj[j].append((i, wij))
        c_graph, length = _graph_uniformity(domain, pts, depth, adj,
                                            len(pts)-2, len(pts)-1, d_xy,
                                            C_max, 0.0)
        if c_graph <= 0 and c_geo <= 0:
            raise CertificationFailure('Certification Failure: no curve with '
                                       'c > 0 and length <= C_max*d_U\n'
                                       'Pair: {} {}'.format(x.tolist(),
                                                            y.tolist()))
        if c_geo >= c_graph or length is None:
            witnesses.append((x, y, c_geo, 1.0))
        else:
            witnesses.append((x, y, c_graph, length/d_xy))
        if verbose:
            print('pair {}: c = {:.4f}, C = {:.4f}'.format(
                k, witnesses[-1][2], witnesses[-1][3]))
    c_u = min(w[2] for w in witnesses)
    C_u = max(w[3] for w in witnesses)
    return UniformityCertificate(float(c_u), float(C_u), witnesses, n_samples)


def _gcd_offsets(radius):
    offs = []
    for i in range(-radius, radius+1):
        for j in range(-radius, radius+1):
            if (i, j) != (0, 0) and np.gcd(i, j) == 1:
                offs.append((i, j))
    return np.array(offs)


def grid_distance(domain, points, spacing, stencil=5, sides=None):
    '''Fine-grid Dijkstra oracle for the inner metric

    Lattice nodes of the given spacing are joined along every primitive
    offset up to the stencil radius; reflex corners, free tips and the
    query points are added as extra nodes.

    Parameters
    ----------
        domain : PolygonDomain
            Domain to measure in
        points : array_like
            (n, 2) query points
        spacing : float
            Lattice spacing
        stencil : int, optional
            Largest lattice offset used by an edge, Default is 5
        sides : array_like of int, optional
            Side tags of the query points, Default is None

    Returns
    -------
        D : numpy.ndarray
            (n, n) graph distances between the query points
    '''
    points = np.asarray(points, float).reshape(-1, 2)
    domain.check_inside(points)
    minx, miny, maxx, maxy = domain.polygon.bounds
    nx = int(np.floor((maxx - minx)/spacing)) + 1
    ny = int(np.floor((maxy - miny)/spacing)) + 1
    gx, gy = np.meshgrid(minx + spacing*np.arange(nx),
                         miny + spacing*np.arange(ny), indexing='ij')
    lattice = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = shapely.distance(domain.polygon, shapely.points(lattice)) \
        <= domain.tol*1e3
    if domain.slits:
        off = shapely.distance(MultiLineString(domain.slits),
                               shapely.points(lattice)) > domain.tol*1e3
        inside &= off
    ids = np.full(nx*ny, -1)
    ids[inside] = np.arange(np.count_nonzero(inside))
    ids = ids.reshape(nx, ny)
    L = lattice[inside]
    I, J = [], []
    for di, dj in _gcd_offsets(stencil):
        if (di, dj) < (0, 0):
            continue
        a = ids[max(0, -di):nx-max(0, di), max(0, -dj):ny-max(0, dj)]
        b = ids[max(0, di):nx-max(0, -di) or None,
                max(0, dj):ny-max(0, -dj) or None]
        m = (a >= 0) & (b >= 0)
        I.append(a[m])
        J.append(b[m])
    I = np.concatenate(I)
    J = np.concatenate(J)
    extra = np.vstack([domain.graph_nodes,
                       domain.query_points(points, sides)])
    nodes = np.vstack([L, extra])
    tree = cKDTree(nodes)
    start = len(L)
    for k in range(len(extra)):
        near = tree.query_ball_point(extra[k], stencil*spacing*1.01)
        near = np.array([j for j in near if j != start + k], int)
        I = np.concatenate([I, np.full(len(near), start + k)])
        J = np.concatenate([J, near])
    ok = domain.admissible(nodes[I], nodes[J])
    I, J = I[ok], J[ok]
    w = np.maximum(np.linalg.norm(nodes[I] - nodes[J], axis=1),
                   domain.tol*1e-3)
    A = coo_matrix((w, (I, J)), shape=(len(nodes), len(nodes))).tocsr()
    q = start + len(domain.graph_nodes) + np.arange(len(points))
    D = dijkstra(A, directed=False, indices=q)
    return D[:, q]
