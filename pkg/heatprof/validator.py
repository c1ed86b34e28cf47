"""
heatprof.validator

"""

import warnings
from dataclasses import dataclass, field, asdict
import numpy as np
import pandas as pd
import shapely

from .errors import InsufficientSamples, FitError, CylinderOutOfRange, \
    EmptyBall, ClampWarning, SolverError
from .geometry import inner_distance, inner_distances, representative_points, \
    boundary_distance, boundary_distances, ambient_volume
from .solver import HeatKernelTable

#Fewest distinct pairs accepted by fit_envelope_constants
MIN_PAIRS = 50
#Nodes with v below this share of max v are ignored by check_bhp
BHP_FLOOR = 1e-14


@dataclass
class EnvelopeParams:
    '''Gaussian constant and profile of a kernel envelope'''
    gaussian_c: float
    bound_kind: str
    phi: np.ndarray
    lam: float

    def __post_init__(self):
        if not self.gaussian_c > 0:
            raise FitError('Fit Error: gaussian_c must be positive\nGot: {}'
                           .format(self.gaussian_c))
        if self.bound_kind not in ('upper', 'lower'):
            raise FitError('Fit Error: bound_kind must be "upper" or "lower"')


@dataclass
class FitReport:
    '''Empirical envelope constants A1 (upper) and a2 (lower)'''
    sample_count: int
    A1_emp: float
    a2_emp: float
    witness_upper: tuple
    witness_lower: tuple
    t_range: tuple
    excluded: int
    c_up: float
    c_low: float

    @property
    def spread(self):
        return self.A1_emp/self.a2_emp

    def to_dict(self):
        out = asdict(self)
        out['spread'] = self.spread
        return out


@dataclass
class UltracontractivityReport:
    '''Per-time extrema of e^{lambda t} p/(phi phi) and p/(phi phi*)'''
    times: np.ndarray
    a3: np.ndarray
    A3: np.ndarray
    a3_star: np.ndarray
    A3_star: np.ndarray
    a3_emp: float
    A3_emp: float
    R: float

    def to_frame(self):
        return pd.DataFrame({'t': self.times, 'a3': self.a3, 'A3': self.A3,
                             'a3_star': self.a3_star,
                             'A3_star': self.A3_star})


@dataclass
class ConvergenceReport:
    '''Long-time convergence of e^{lambda t} p to phi(x) phi*(y)'''
    a3_emp: float
    A3_emp: float
    w: np.ndarray = field(repr=False)
    w_integral: float
    omega_measured: float
    omega_predicted: float
    omega_spec: float
    A4_emp: float
    A4_bound: float
    times: np.ndarray = field(repr=False)
    deviation: np.ndarray = field(repr=False)
    window: tuple

    def to_dict(self):
        return {'a3_emp': self.a3_emp, 'A3_emp': self.A3_emp,
                'w_min': float(np.min(self.w)), 'w_max': float(np.max(self.w)),
                'w_integral': self.w_integral,
                'omega_measured': self.omega_measured,
                'omega_predicted': self.omega_predicted,
                'omega_spec': self.omega_spec, 'A4_emp': self.A4_emp,
                'A4_bound': self.A4_bound, 'window': list(self.window)}


@dataclass
class HarnackReport:
    '''Harnack ratio of a positive solution on a space-time cylinder'''
    cylinder: tuple
    H_emp: float
    solution_id: str
    n_minus: int
    n_plus: int


@dataclass
class EigenBoundReport:
    '''Domination of higher eigenfunctions by the principal one'''
    rows: list
    C: float
    alpha: float

    def to_frame(self):
        return pd.DataFrame(self.rows)


def predicted_rate(a3, A3, R):
    '''(1/R^2) log(1/(1 - a3/A3)), the guaranteed convergence rate'''
    eps = a3/A3
    if eps >= 1:
        return np.inf
    return float(np.log(1/(1 - eps))/R**2)


def _node_sides(mesh, nodes):
    return mesh.slit_side[np.asarray(nodes, int)]


def _phi_at_representatives(phi, domain, mesh, nodes, r, c_u, rule):
    r = min(r, domain.diam_inner)
    x_r = representative_points(domain, mesh.nodes[nodes], r, c_u, rule,
                                _node_sides(mesh, nodes))
    return mesh.interpolate(phi, x_r)


def envelope(params, domain, mesh, t, x, y, x_side=0, y_side=0, c_u=0.25,
             rule='deepest'):
    '''Kernel envelope without its constant prefactor

    phi(x) phi(y) exp(-c d_U(x, y)^2/t) divided by
    sqrt(V(x, sqrt t) V(y, sqrt t)) phi(x_sqrt(t)) phi(y_sqrt(t)); the radius
    of the representative points is clamped to the inner diameter.

    Parameters
    ----------
        params : EnvelopeParams
            Gaussian constant and profile
        domain : heatprof.geometry.PolygonDomain
            Domain of the kernel
        mesh : heatprof.meshing.Mesh
            Mesh carrying params.phi
        t : float
            Time, positive
        x, y : array_like
            Points in the closed domain
        x_side, y_side : int, optional
            Side tags of slit points, Default is 0
        c_u : float, optional
            Uniformity constant for the representative points, Default is 0.25
        rule : str, optional
            Representative-point rule, Default is 'deepest'

    Returns
    -------
        value : float
    '''
    if not t > 0:
        raise FitError('Fit Error: t must be positive\nGot: {}'.format(t))
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = inner_distance(domain, x, y, x_side, y_side).length
    r = min(np.sqrt(t), domain.diam_inner)
    reps = representative_points(domain, np.vstack([x, y]), r, c_u, rule,
                                 [x_side, y_side])
    phi_x, phi_y = mesh.interpolate(params.phi, np.vstack([x, y]))
    phi_rx, phi_ry = mesh.interpolate(params.phi, reps)
    vol = np.sqrt(ambient_volume(x, np.sqrt(t))*ambient_volume(y, np.sqrt(t)))
    return float(phi_x*phi_y*np.exp(-params.gaussian_c*d**2/t) /
                 (vol*phi_rx*phi_ry))


def sample_pairs(domain, mesh, n_pairs=200, seed=0, n_bands=5,
                 corner_radius=None):
    '''Stratified interior node pairs for envelope fitting

    First points cycle through dyadic bands of the boundary distance and the
    neighbourhoods of corners and slit tips; every tenth pair is diagonal.

    Returns
    -------
        pairs : numpy.ndarray
            (n_pairs, 2) mesh node indices
    '''
    rng = np.random.default_rng(seed)
    I = mesh.interior
    delta = boundary_distances(domain, mesh.query_points(domain)[I])
    top = delta.max()
    buckets = []
    for k in range(n_bands):
        lo, hi = top/2**(k+1), top/2**k
        sel = I[(delta > lo) & (delta <= hi)] if k < n_bands - 1 else \
            I[delta <= hi]
        if len(sel):
            buckets.append(sel)
    corner_radius = 0.1*domain.scale if corner_radius is None else \
        corner_radius
    corners = np.vstack([domain.outer] + domain.holes +
                        ([domain.graph_nodes] if len(domain.graph_nodes)
                         else []))
    for c in corners:
        sel = I[np.linalg.norm(mesh.nodes[I] - c, axis=1) < corner_radius]
        if len(sel):
            buckets.append(sel)
    pairs = []
    for k in range(n_pairs):
        bucket = buckets[k % len(buckets)]
        i = int(bucket[rng.integers(len(bucket))])
        if k % 10 == 0:
            j = i
        else:
            other = buckets[int(rng.integers(len(buckets)))]
            j = int(other[rng.integers(len(other))])
        pairs.append((i, j))
    return np.array(pairs, int)


def _lookup(kernel):
    #Returns (times, f(t_index, x_nodes, y_nodes) -> p values)
    if isinstance(kernel, HeatKernelTable):
        def values(k, X, Y):
            return kernel.entries(kernel.times[k], X, Y)
        return np.asarray(kernel.times), values
    columns = {col.source_node: col for col in kernel}
    times = np.asarray(next(iter(columns.values())).times)

    def values(k, X, Y):
        out = np.empty(len(X))
        for n, (x, y) in enumerate(zip(X, Y)):
            if int(y) not in columns:
                raise SolverError('Solver Error: no kernel column with '
                                  'source {}'.format(y))
            out[n] = columns[int(y)].values[k, x]
        return out
    return times, values


def fit_envelope_constants(kernel, domain, mesh, phi, pairs, c_up=0.2,
                           c_low=0.3, c_u=0.25, rule='deepest',
                           max_gauss=16.0, p_floor=1e-12, t_max=None):
    '''Empirical envelope constants over a sample set

    Parameters
    ----------
        kernel : heatprof.solver.HeatKernelTable or list of HeatKernelColumn
            Kernel data; columns are looked up by their source node
        domain : heatprof.geometry.PolygonDomain
            Domain of the kernel
        mesh : heatprof.meshing.Mesh
            Mesh of the kernel
        phi : numpy.ndarray
            Principal eigenfunction on all mesh nodes
        pairs : numpy.ndarray
            (n, 2) node index pairs (x, y), at least 50 distinct
        c_up, c_low : float, optional
            Gaussian constants of the upper and lower envelopes,
            Default is 0.2 and 0.3
        c_u : float, optional
            Uniformity constant for x_sqrt(t), Default is 0.25
        rule : str, optional
            Representative-point rule, Default is 'deepest'
        max_gauss : float, optional
            Triples with d_U^2/t above this are not resolved, Default is 16
        p_floor : float, optional
            Triples with p below p_floor times the largest p at that time are
            not resolved, Default is 1e-12
        t_max : float, optional
            Largest time used, Default is diam_inner^2

    Returns
    -------
        report : FitReport
    '''
    pairs = np.asarray(pairs, int)
    if len(np.unique(pairs, axis=0)) < MIN_PAIRS:
        raise InsufficientSamples('Insufficient Samples: {} distinct pairs, '
                                  'need {}'.format(len(np.unique(pairs,
                                                                 axis=0)),
                                                   MIN_PAIRS))
    times, values = _lookup(kernel)
    t_max = domain.diam_inner**2 if t_max is None else t_max
    X, Y = pairs[:, 0], pairs[:, 1]
    d = np.array([0.0 if x == y else
                  inner_distances(domain, mesh.nodes[x], mesh.nodes[[y]],
                                  mesh.slit_side[x],
                                  mesh.slit_side[[y]])[0]
                  for x, y in zip(X, Y)])
    nodes = np.unique(pairs)
    pos = np.searchsorted(nodes, pairs)
    A1, a2 = -np.inf, np.inf
    w_up = w_low = None
    excluded = 0
    used = []
    for k, t in enumerate(times):
        if t > t_max*(1 + 1e-12):
            continue
        used.append(t)
        p = values(k, X, Y)
        phi_r = _phi_at_representatives(phi, domain, mesh, nodes,
                                        np.sqrt(t), c_u, rule)
        base = phi[X]*phi[Y]/(np.pi*t*phi_r[pos[:, 0]]*phi_r[pos[:, 1]])
        ok = (p >= p_floor*np.max(p)) & (d**2/t <= max_gauss) & (p > 0)
        excluded += int(np.count_nonzero(~ok))
        if not np.any(ok):
            continue
        up = p/(base*np.exp(-c_up*d**2/t))
        low = p/(base*np.exp(-c_low*d**2/t))
        i_up = np.flatnonzero(ok)[np.argmax(up[ok])]
        i_low = np.flatnonzero(ok)[np.argmin(low[ok])]
        if up[i_up] > A1:
            A1, w_up = float(up[i_up]), (float(t), int(X[i_up]),
                                         int(Y[i_up]))
        if low[i_low] < a2:
            a2, w_low = float(low[i_low]), (float(t), int(X[i_low]),
                                            int(Y[i_low]))
    if w_up is None:
        raise InsufficientSamples('Insufficient Samples: no resolved '
                                  '(t, x, y) triple')
    return FitReport(len(pairs), A1, a2, w_up, w_low,
                     (float(min(used)), float(max(used))), excluded, c_up,
                     c_low)


def _interior_profiles(table, phi, phi_star):
    I = table.interior
    return phi[I], phi_star[I]


def check_ultracontractivity(table, phi, phi_star, times, R):
    '''Extrema of the long-time normalized kernel

    Parameters
    ----------
        table : heatprof.solver.HeatKernelTable
            Kernel over all interior pairs
        phi : heatprof.solver.EigenPair
            Principal eigenpair
        phi_star : heatprof.solver.EigenPair
            Adjoint principal eigenpair with <phi, phi*>_M = 1
        times : array_like
            Times of the scan
        R : float
            Scale; the global constants use t >= R^2

    Returns
    -------
        report : UltracontractivityReport
    '''
    f, g = _interior_profiles(table, phi.phi, phi_star.phi)
    times = np.asarray(times, float)
    out = np.empty((4, len(times)))
    for k, t in enumerate(times):
        scaled = np.exp(phi.lam*t)*table.kernel(t)
        r1 = scaled/np.outer(f, f)
        r2 = scaled/np.outer(f, g)
        out[:, k] = [r1.min(), r1.max(), r2.min(), r2.max()]
    late = times >= R**2*(1 - 1e-12)
    if not np.any(late):
        raise FitError('Fit Error: no time at or beyond R^2 = {}'
                       .format(R**2))
    return UltracontractivityReport(times, out[0], out[1], out[2], out[3],
                                    float(out[0][late].min()),
                                    float(out[1][late].max()), float(R))


def ultracontractivity_rate(table, phi, phi_star, times):
    '''c(t) = max p/(phi phi*) and the small-time exponent nu

    nu comes from the log-log slope -nu/2 of c(t) e^{lambda t} over the
    first half of the times.
    '''
    f, g = _interior_profiles(table, phi.phi, phi_star.phi)
    times = np.asarray(times, float)
    c = np.array([np.max(table.kernel(t)/np.outer(f, g)) for t in times])
    half = max(2, len(times)//2)
    slope = np.polyfit(np.log(times[:half]),
                       np.log(c[:half]*np.exp(phi.lam*times[:half])), 1)[0]
    return c, float(-2*slope)


def measure_convergence(table, phi, phi_star, times, R, a3, A3,
                        lam2=None, window=(1e-9, 1e-6)):
    '''Exponential convergence of e^{lambda t} p/(phi(x) phi*(y)) to 1

    Parameters
    ----------
        table : heatprof.solver.HeatKernelTable
            Kernel over all interior pairs
        phi, phi_star : heatprof.solver.EigenPair
            Principal pair and its biorthogonal adjoint
        times : array_like
            Increasing times covering the decay into the window
        R : float
            Scale of the predicted rate, usually diam_inner
        a3, A3 : float
            Ultracontractivity constants for t >= R^2
        lam2 : float, optional
            Second eigenvalue for the spectral rate, Default is None
        window : tuple of float, optional
            Deviation band used by the tail regression,
            Default is (1e-9, 1e-6)

    Returns
    -------
        report : ConvergenceReport
    '''
    f, g = _interior_profiles(table, phi.phi, phi_star.phi)
    w = g/f
    times = np.asarray(times, float)
    dev = np.array([np.max(np.abs(np.exp(phi.lam*t)*table.kernel(t) /
                                  np.outer(f, g) - 1)) for t in times])
    tail = np.flatnonzero((dev >= window[0]) & (dev <= window[1]))
    if len(tail) < 3:
        raise FitError('Fit Error: {} deviations inside the window {}; extend '
                       'the time range'.format(len(tail), window))
    if np.any(np.diff(dev[tail]) > 0):
        raise FitError('Fit Error: deviation is not decreasing on the tail '
                       'window')
    slope, icpt = np.polyfit(times[tail], np.log(dev[tail]), 1)
    eps = a3/A3
    A4_bound = A3/(a3*(1 - eps)**2) if eps < 1 else np.inf
    omega_spec = float(lam2 - phi.lam) if lam2 is not None else np.nan
    return ConvergenceReport(float(a3), float(A3), w, _w_integral(
        table, f, g), float(-slope), predicted_rate(a3, A3, R), omega_spec,
        float(np.exp(icpt)), float(A4_bound), times, dev,
        (float(times[tail[0]]), float(times[tail[-1]])))


def _w_integral(table, f, g):
    #int w phi^2 dmu with the lumped masses recovered from the expansion
    return float(np.sum(f*g*_lumped_mass(table)))


def _lumped_mass(table):
    #R = V^-1 M^-1/2 and L = M^-1/2 V, so diag(L R) = 1/m
    return 1/np.real(np.einsum('ik,ki->i', table.L, table.R))


def check_eigenfunction_bound(pairs, phi, domain, mesh, c_u=0.25,
                              rule='deepest', deep_fraction=0.25,
                              ultracontractivity=None):
    '''Domination of eigenfunctions psi by the principal eigenfunction

    Parameters
    ----------
        pairs : list of heatprof.solver.EigenPair
            Higher eigenpairs, each with lambda_psi > lambda
        phi : heatprof.solver.EigenPair
            Principal eigenpair
        domain : heatprof.geometry.PolygonDomain
            Domain of the mesh
        mesh : heatprof.meshing.Mesh
            Mesh of the eigenfunctions
        c_u : float, optional
            Uniformity constant for the representative points, Default is 0.25
        rule : str, optional
            Representative-point rule, Default is 'deepest'
        deep_fraction : float, optional
            Nodes with delta above this share of max delta are "deep",
            Default is 0.25
        ultracontractivity : callable, optional
            t -> c(t); adds the bound e c(1/|lambda_psi|)^{1/2} phi per row,
            Default is None

    Returns
    -------
        report : EigenBoundReport
    '''
    I = mesh.interior
    f = phi.phi[I]
    delta = boundary_distances(domain, mesh.query_points(domain)[I])
    deep = delta >= deep_fraction*delta.max()
    rows = []
    for k, psi in enumerate(pairs):
        eta = psi.lam - phi.lam
        if not eta > 1e-12*max(1.0, abs(phi.lam)):
            raise FitError('Fit Error: eigenpair {} has eta = {:.3e}; the '
                           'bound needs lambda_psi > lambda'.format(k, eta))
        r = 1/np.sqrt(eta)
        clamped = r > domain.diam_inner
        if clamped:
            warnings.warn('Radius 1/sqrt(eta) = {:.4g} clamped to the inner '
                          'diameter {:.4g}'.format(r, domain.diam_inner),
                          ClampWarning)
            r = domain.diam_inner
        phi_r = _phi_at_representatives(phi.phi, domain, mesh, I, r, c_u,
                                        rule)
        ratio = np.abs(psi.phi[I])/f
        A5 = np.max(ratio*np.sqrt(ambient_volume(0, r))*phi_r)
        row = {'index': k, 'lambda_psi': psi.lam, 'eta': eta, 'radius': r,
               'clamped': bool(clamped), 'A5_emp': float(A5),
               'max_ratio': float(ratio.max()),
               'max_ratio_deep': float(ratio[deep].max())}
        if ultracontractivity is not None:
            row['eig_bound'] = float(np.e*np.sqrt(
                ultracontractivity(1/abs(psi.lam))))
        rows.append(row)
    if len(rows) >= 2:
        lam = np.array([row['lambda_psi'] for row in rows])
        mx = np.array([row['max_ratio'] for row in rows])
        alpha, logC = np.polyfit(np.log(np.abs(lam)), np.log(mx), 1)
        C = float(np.exp(logC))
    else:
        C, alpha = np.nan, np.nan
    return EigenBoundReport(rows, C, float(alpha))


def _solution_arrays(solution):
    if hasattr(solution, 'times') and hasattr(solution, 'values'):
        name = 'column-{}'.format(getattr(solution, 'source_node', 'custom'))
        return np.asarray(solution.times), np.asarray(solution.values), name
    times, values = solution
    return np.asarray(times), np.asarray(values), 'custom'


def check_phi(solution, domain, mesh, cylinder, weight=None, side=0):
    '''Parabolic Harnack ratio on a space-time cylinder

    Q- = (s - (3 + delta) tau r^2/4, s - (3 - delta) tau r^2/4) x B(x, delta r)
    and Q+ = (s - (1 + delta) tau r^2/4, s] x B(x, delta r), sampled on the
    stored times and the mesh nodes of the inner ball.

    Parameters
    ----------
        solution : HeatKernelColumn or tuple
            Column, or (times, values) with values of shape (nt, n_nodes)
        domain : heatprof.geometry.PolygonDomain
            Domain of the mesh
        mesh : heatprof.meshing.Mesh
            Mesh of the solution
        cylinder : tuple
            (x, r, s, tau, delta); without a weight 2r may not exceed the
            distance from x to the boundary
        weight : numpy.ndarray, optional
            Nodal profile dividing the solution (u/phi up to the boundary),
            Default is None
        side : int, optional
            Side tag of a slit centre, Default is 0

    Returns
    -------
        report : HarnackReport
    '''
    x, r, s, tau, delta = cylinder
    times, values, name = _solution_arrays(solution)
    if s - tau*r**2 < 0 or s > times[-1]*(1 + 1e-12):
        raise CylinderOutOfRange('Cylinder Out Of Range: (s - tau r^2, s) = '
                                 '({}, {}) leaves the stored times'
                                 .format(s - tau*r**2, s))
    #Unweighted cylinders must keep B(x, 2r) inside the domain
    if weight is None:
        reach = boundary_distance(domain, x)
        if 2*r > reach*(1 + 1e-9):
            raise CylinderOutOfRange('Cylinder Out Of Range: B(x, 2r) leaves '
                                     'the domain\nGot: 2r = {}, distance to '
                                     'the boundary {:.6g}'.format(2*r, reach))
    d = inner_distances(domain, x, mesh.nodes, side, mesh.slit_side)
    nodes = np.flatnonzero((d < delta*r) & ~mesh.boundary_mask)
    if weight is not None:
        nodes = nodes[np.asarray(weight)[nodes] > 0]
        values = values/np.where(np.asarray(weight) > 0, weight, 1.0)[None]
    q = tau*r**2/4
    minus = (times > s - (3 + delta)*q) & (times < s - (3 - delta)*q)
    plus = (times > s - (1 + delta)*q) & (times <= s*(1 + 1e-12))
    if len(nodes) == 0 or not np.any(minus) or not np.any(plus):
        raise CylinderOutOfRange('Cylinder Out Of Range: empty sample of '
                                 'Q-/Q+ ({} nodes, {} and {} times)'
                                 .format(len(nodes), np.count_nonzero(minus),
                                         np.count_nonzero(plus)))
    low = np.min(values[np.ix_(plus, nodes)])
    if not low > 0:
        raise CylinderOutOfRange('Cylinder Out Of Range: solution is not '
                                 'positive on Q+ (min {:.3e})'.format(low))
    high = np.max(values[np.ix_(minus, nodes)])
    return HarnackReport(tuple(np.atleast_1d(x).tolist()) + (r, s, tau, delta),
                         float(high/low), name, int(np.count_nonzero(minus)),
                         int(np.count_nonzero(plus)))


def check_ehi(u, domain, mesh, center, r, side=0):
    '''Elliptic Harnack ratio sup/inf of a positive solution over a ball'''
    d = inner_distances(domain, center, mesh.nodes, side, mesh.slit_side)
    nodes = np.flatnonzero((d < r) & ~mesh.boundary_mask)
    if len(nodes) == 0:
        raise EmptyBall('Empty Ball: no interior node within r = {} of {}'
                        .format(r, list(center)))
    vals = np.asarray(u)[nodes]
    if not np.min(vals) > 0:
        raise CylinderOutOfRange('Cylinder Out Of Range: solution is not '
                                 'positive on the ball')
    return float(np.max(vals)/np.min(vals))


def check_bhp(u, v, domain, mesh, xi, r, A0=2.0, side=0):
    '''Boundary Harnack ratio max over x, x' of u(x) v(x')/(u(x') v(x))

    Parameters
    ----------
        u, v : numpy.ndarray
            Positive nodal solutions vanishing on the boundary near xi
        domain : heatprof.geometry.PolygonDomain
            Domain of the mesh
        mesh : heatprof.meshing.Mesh
            Mesh of the solutions
        xi : array_like
            Boundary point
        r : float
            Ball radius
        A0 : float, optional
            Both solutions must be defined on B(xi, A0 r), Default is 2.0
        side : int, optional
            Side tag of a slit point, Default is 0

    Returns
    -------
        A1_emp : float
    '''
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    d = inner_distances(domain, xi, mesh.nodes, side, mesh.slit_side)
    if not np.any((d < A0*r) & ~mesh.boundary_mask):
        raise EmptyBall('Empty Ball: no interior node within A0 r = {} of {}'
                        .format(A0*r, list(xi)))
    nodes = np.flatnonzero((d < r) & ~mesh.boundary_mask)
    nodes = nodes[(v[nodes] > BHP_FLOOR*np.max(v)) & (u[nodes] > 0)]
    if len(nodes) == 0:
        raise EmptyBall('Empty Ball: no interior node within r = {} of {}'
                        .format(r, list(xi)))
    ratio = u[nodes]/v[nodes]
    return float(ratio.max()/ratio.min())


def bisector(domain, corner):
    '''Unit direction into the domain along the bisector of a corner

    For a free slit tip this is the continuation of the slit.
    '''
    corner = np.asarray(corner, float)
    for slit in domain.slits:
        for end, prev in ((slit[0], slit[1]), (slit[-1], slit[-2])):
            if np.linalg.norm(end - corner) <= domain.tol*1e3:
                v = end - prev
                return v/np.linalg.norm(v)
    for ring in [domain.outer] + domain.holes:
        k = np.flatnonzero(np.linalg.norm(ring - corner, axis=1)
                           <= domain.tol*1e3)
        if len(k):
            k = int(k[0])
            a, b = ring[k-1], ring[(k+1) % len(ring)]
            e1 = (a - corner)/np.linalg.norm(a - corner)
            e2 = (b - corner)/np.linalg.norm(b - corner)
            v = e1 + e2
            n = np.linalg.norm(v)
            if n < 1e-12:
                v, n = np.array([-e1[1], e1[0]]), 1.0
            v = v/n
            probe = corner + 1e-6*domain.scale*v
            if not shapely.contains_xy(domain.polygon, *probe):
                v = -v
            return v
    raise FitError('Fit Error: {} is not a vertex or slit tip'
                   .format(corner.tolist()))


def corner_exponent(phi, domain, mesh, corner, r_min, r_max, direction=None,
                    n_points=16):
    '''Power-law exponent of phi along the bisector of a corner

    Returns
    -------
        exponent : float
            Slope of log phi against log r over [r_min, r_max]
        prefactor : float
    '''
    corner = np.asarray(corner, float)
    direction = bisector(domain, corner) if direction is None else \
        np.asarray(direction, float)/np.linalg.norm(direction)
    radii = np.geomspace(r_min, r_max, n_points)
    pts = corner[None] + radii[:, None]*direction[None]
    vals = mesh.interpolate(phi, pts)
    if not np.all(vals > 0):
        raise FitError('Fit Error: phi is not positive along the bisector')
    slope, icpt = np.polyfit(np.log(radii), np.log(vals), 1)
    return float(slope), float(np.exp(icpt))


def holder_seminorm(values, mesh, alpha=0.5, mask=None):
    '''Edge-based discrete Holder seminorm max |u_i - u_j|/|x_i - x_j|^alpha

    With a nodal mask only edges with both ends in the mask count.
    '''
    e = mesh.edges
    if mask is not None:
        mask = np.asarray(mask, bool)
        e = e[mask[e[:, 0]] & mask[e[:, 1]]]
        if len(e) == 0:
            raise EmptyBall('Empty Ball: no mesh edge inside the mask')
    values = np.asarray(values, float)
    du = np.abs(values[e[:, 0]] - values[e[:, 1]])
    dx = np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
    return float(np.max(du/dx**alpha))
