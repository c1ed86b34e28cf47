"""
heatprof.cli

"""

import os
import sys
import json
import argparse
from datetime import datetime
from dataclasses import dataclass, field, fields, asdict, replace
import numpy as np
import pandas as pd
from tabulate import tabulate

from . import __version__
from .errors import HeatprofError, ParseError
from .gallery import gallery, gallery_spec, GALLERY
from .geometry import load_domain, boundary_distances, inner_distances, \
    inner_ball, certify_uniformity
from .meshing import cached_triangulate
from .forms import CoefficientField, assemble
from .solver import principal_eigenpair, adjoint_principal, eigenpairs, \
    heat_column, heat_kernel_table, green_column, evolve
from .doob import make_profile, transform, form_discrepancy, \
    weighted_volume, weighted_poincare, profile_boundary_control, \
    POLE_EXCLUSION, PROFILE_TOL
from .validator import sample_pairs, fit_envelope_constants, \
    check_ultracontractivity, ultracontractivity_rate, measure_convergence, \
    check_eigenfunction_bound, check_phi, check_ehi, check_bhp, \
    corner_exponent, holder_seminorm, BHP_FLOOR
from .reporting import Report, config_hash, write_csv, write_json, \
    nodal_frame, plot_nodal, plot_decay, write_workbook, write_manifest, \
    print_checks, verify_dir

#Experiments in dependency order with their prerequisites
EXPERIMENTS = {'eigen': (), 'heat': (), 'green': ('eigen',),
               'doob': ('eigen',), 'envelope': ('eigen',),
               'harnack': ('eigen',), 'bhp': ('eigen',),
               'convergence': ('eigen',), 'uniformity': (),
               'spectrum': ('eigen',), 'corner': ('eigen',)}
SCHEMES = ('backward-euler', 'crank-nicolson', 'spectral')


@dataclass
class RunConfig:
    '''Run-config document

    Attributes
    ----------
        domain : str
            Gallery name or domain-spec filename
        domain_params : dict
            Gallery parameters (slit_length, k, box, n_sides)
        coefficients : dict
            a, b, d, c and lambda_ell of the form, Default is the Laplacian
        h_max : float
            Largest mesh edge
        grade : bool
            Grade the mesh towards reflex corners and slit tips
        h_tip : float
            Smallest graded mesh size, Default is h_max/64
        extra_points : list
            Points forced into the mesh
        scheme : str
            'backward-euler', 'crank-nicolson' or 'spectral'
        dt0, dt_max : float
            First and largest time step of the stepping schemes
        eigen_tol : float
            Residual bound of the principal eigenpair
        n_eigen : int
            Number of low eigenpairs
        times : list
            Output times of the heat experiment
        source, pole : list
            Heat source and Green pole, Default is the deepest interior node
        experiments : list
            Experiments to run
        seed : int
            Seed of every sampler
        n_pairs, n_uniformity : int
            Envelope sample size and uniformity sample size
        C_max : float
            Length budget of the uniformity certificate
        c_up, c_low, c_u : float
            Envelope Gaussian constants and uniformity constant
        mesh_halving : bool
            Repeat the envelope fit on a mesh with h_max/2
        max_corners : int
            Largest number of corners fitted by the corner experiment
        out_dir : str
            Output directory, overridden by HEATPROF_OUT
        n_jobs : int
            Worker threads, overridden by HEATPROF_THREADS
        plots, workbook : bool
            Emit SVG figures and the Excel workbook
    '''
    domain: str = 'square'
    domain_params: dict = field(default_factory=dict)
    coefficients: dict = None
    h_max: float = 0.05
    grade: bool = False
    h_tip: float = None
    extra_points: list = None
    scheme: str = 'backward-euler'
    dt0: float = 1e-5
    dt_max: float = None
    eigen_tol: float = 1e-8
    n_eigen: int = 6
    times: list = None
    source: list = None
    pole: list = None
    experiments: list = field(default_factory=lambda: ['eigen'])
    seed: int = 0
    n_pairs: int = 200
    n_uniformity: int = 50
    C_max: float = 2.0
    c_up: float = 0.2
    c_low: float = 0.3
    c_u: float = 0.25
    mesh_halving: bool = False
    max_corners: int = 8
    out_dir: str = 'heatprof-out'
    n_jobs: int = 1
    plots: bool = True
    workbook: bool = False

    def to_dict(self):
        return asdict(self)


def load_config(source):
    '''Parses and validates a run-config

    Parameters
    ----------
        source : dict or str
            Parsed document, JSON text or the filename of a JSON file

    Returns
    -------
        config : RunConfig
            Validated config with HEATPROF_OUT and HEATPROF_THREADS applied
    '''
    doc = source
    if isinstance(source, str):
        text = source
        if os.path.isfile(source):
            with open(source, 'r') as f:
                text = f.read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError('Parse Error: run-config is not valid JSON\n{}'
                             .format(err))
    if not isinstance(doc, dict):
        raise ParseError('Parse Error: run-config must be a JSON object')
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ParseError('Parse Error: unknown run-config keys\n{}'
                         .format(sorted(unknown)))
    config = RunConfig(**doc)
    if 'HEATPROF_OUT' in os.environ:
        config.out_dir = os.environ['HEATPROF_OUT']
    if 'HEATPROF_THREADS' in os.environ:
        try:
            config.n_jobs = int(os.environ['HEATPROF_THREADS'])
        except ValueError:
            raise ParseError('Parse Error: HEATPROF_THREADS must be an '
                             'integer\nGot: {}'
                             .format(os.environ['HEATPROF_THREADS']))
    _validate(config)
    return config


def _validate(config):
    for name in ('h_max', 'dt0', 'eigen_tol', 'c_up', 'c_low', 'c_u'):
        if not getattr(config, name) > 0:
            raise ParseError('Parse Error: {} must be positive\nGot: {}'
                             .format(name, getattr(config, name)))
    for name in ('n_eigen', 'n_pairs', 'n_uniformity', 'n_jobs',
                 'max_corners'):
        if int(getattr(config, name)) < 1:
            raise ParseError('Parse Error: {} must be at least 1\nGot: {}'
                             .format(name, getattr(config, name)))
    if not config.C_max > 1:
        raise ParseError('Parse Error: C_max must exceed 1\nGot: {}'
                         .format(config.C_max))
    if config.scheme not in SCHEMES:
        raise ParseError('Parse Error: unknown scheme {}\nKnown: {}'
                         .format(config.scheme, ', '.join(SCHEMES)))
    bad = [e for e in config.experiments if e not in EXPERIMENTS]
    if bad:
        raise ParseError('Parse Error: unknown experiments {}\nKnown: {}'
                         .format(bad, ', '.join(EXPERIMENTS)))
    if config.times is not None:
        t = np.asarray(config.times, float)
        if len(t) == 0 or np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ParseError('Parse Error: times must be positive and '
                             'increasing\nGot: {}'.format(config.times))
    CoefficientField.from_config(config.coefficients)
    if not os.path.isfile(config.domain):
        #Raises UnknownGallery for names that are neither file nor gallery
        gallery_spec(config.domain, **config.domain_params)


def _is_laplacian(coeffs):
    if not coeffs.is_constant:
        return False
    A, B, D, C = coeffs.evaluate(np.zeros((1, 2)))
    return bool(np.allclose(A[0], np.eye(2), rtol=0, atol=0) and
                not np.any(B) and not np.any(D) and not np.any(C))


def _interior_angle(prev, v, nxt):
    #Angle of the domain at v, the domain lying left of the ring direction
    e1, e2 = prev - v, nxt - v
    ang = np.arctan2(e2[0]*e1[1] - e2[1]*e1[0], e2 @ e1)
    return float(ang % (2*np.pi))


class _Run:
    '''Shared state of one run: domain, mesh, form and computed results'''

    def __init__(self, config, verbose=True):
        self.config = config
        self.verbose = verbose
        self.hash = config_hash(config.to_dict())
        if os.path.isfile(config.domain):
            self.domain = load_domain(config.domain)
        else:
            self.domain = gallery(config.domain, **config.domain_params)[1]
        self.coeffs = CoefficientField.from_config(config.coefficients)
        self.laplacian = _is_laplacian(self.coeffs)
        self.mesh = self._mesh(config.h_max)
        self.form = assemble(self.mesh, self.coeffs, config.n_jobs)
        self.state = {}
        self._table = None

    def _mesh(self, h_max):
        c = self.config
        return cached_triangulate(self.domain, h_max,
                                  verbose=self.verbose,
                                  grade_points='auto' if c.grade else None,
                                  h_tip=c.h_tip,
                                  extra_points=c.extra_points)

    @property
    def table(self):
        if self._table is None:
            self._table = heat_kernel_table(self.form, [1.0])
        return self._table

    def node(self, point=None):
        '''Interior node nearest to a point, or the deepest interior node'''
        if point is not None:
            return self.mesh.nearest_node(point)
        I = self.mesh.interior
        delta = boundary_distances(self.domain,
                                   self.mesh.query_points(self.domain)[I])
        return int(I[np.argmax(delta)])

    def boundary_points(self):
        '''(label, point) pairs: longest outer edge midpoint, the first slit
        tip or reflex vertex, and the first convex outer vertex'''
        out = []
        ring = self.domain.outer
        nxt = np.roll(ring, -1, axis=0)
        k = int(np.argmax(np.linalg.norm(nxt - ring, axis=1)))
        out.append(('edge-midpoint', (ring[k] + nxt[k])/2))
        if len(self.domain.free_tips):
            out.append(('slit-tip', self.domain.free_tips[0]))
        elif len(self.domain.graph_nodes):
            out.append(('reflex-vertex', self.domain.graph_nodes[0]))
        for k in range(len(ring)):
            if _interior_angle(ring[k-1], ring[k],
                               ring[(k+1) % len(ring)]) < np.pi - 1e-9:
                out.append(('convex-vertex', ring[k]))
                break
        return out

    def corners(self):
        '''(label, point, interior angle) of tips and polygon vertices'''
        out = [('slit-tip', tip, 2*np.pi) for tip in self.domain.free_tips]
        convex = []
        for ring in [self.domain.outer] + self.domain.holes:
            n = len(ring)
            for k in range(n):
                ang = _interior_angle(ring[k-1], ring[k], ring[(k+1) % n])
                if abs(ang - np.pi) < 1e-9:
                    continue
                item = ('reflex' if ang > np.pi else 'convex', ring[k], ang)
                (out if ang > np.pi else convex).append(item)
        out = out[:self.config.max_corners]
        return out + convex[:max(0, self.config.max_corners - len(out))][:1]

    def report(self, name):
        return Report(name, self.hash, self.mesh.stats())

    def out(self, name):
        return os.path.join(self.config.out_dir, name)


#Experiments
def _eigen(run, rep):
    c, form, mesh = run.config, run.form, run.mesh
    pair = principal_eigenpair(form, tol=c.eigen_tol)
    star = pair if form.is_symmetric else adjoint_principal(form, pair)
    pairs = eigenpairs(form, max(2, c.n_eigen), seed=c.seed)
    run.state.update(pair=pair, star=star, pairs=pairs)
    rep.check('principal residual', pair.residual, 0.0, c.eigen_tol)
    rep.check('min interior phi', np.min(pair.phi[mesh.interior]),
              np.finfo(float).tiny)
    rep.check('principal agreement', abs(pairs[0].lam - pair.lam) /
              max(1.0, abs(pair.lam)), 0.0, 1e-5)
    rep.check('spectral gap', pairs[1].lam - pair.lam, 0.0)
    if run.laplacian and run.domain.name == 'square':
        lam = 2*np.pi**2
        rep.check('square eigenvalue', pair.lam, 0.99*lam, 1.01*lam)
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        exact = 2*np.sin(np.pi*x)*np.sin(np.pi*y)
        rep.check('square eigenfunction', np.max(np.abs(pair.phi - exact)),
                  0.0, 2e-2)
    rep.add(lam=pair.lam, lam_star=star.lam, residual=pair.residual,
            coercivity=form.assumption_constants().as_dict())
    frame = pd.DataFrame({'index': np.arange(len(pairs)),
                          'lambda': [p.lam for p in pairs],
                          'imag': [p.imag for p in pairs],
                          'residual': [p.residual for p in pairs],
                          'degenerate': [p.degenerate for p in pairs]})
    write_csv(frame, c.out_dir, 'eigenvalues', rep)
    phi = nodal_frame(mesh, pair.phi, 'phi')
    if star is not pair:
        phi['phi_star'] = star.phi
    write_csv(phi, c.out_dir, 'phi', rep)
    if c.plots:
        plot_nodal(mesh, pair.phi, run.out('phi.svg'),
                   'principal eigenfunction, lambda = {:.6g}'
                   .format(pair.lam))


def _square_series(t, x, y, n_terms=99):
    n = np.arange(1, n_terms + 1)[:, None]
    t = np.atleast_1d(t)[None, :]

    def one_d(a, b):
        return 2*np.sum(np.sin(n*np.pi*a)*np.sin(n*np.pi*b) *
                        np.exp(-(n*np.pi)**2*t), axis=0)
    return one_d(x[0], y[0])*one_d(x[1], y[1])


def _step_kwargs(c, times=None, halve=False):
    if halve:
        dt_max = c.dt_max if c.dt_max is not None else times[-1]/20
        return {'dt0': c.dt0/2, 'steps_per_grade': 16, 'dt_max': dt_max/2}
    return {'dt0': c.dt0, 'dt_max': c.dt_max}


def _heat(run, rep):
    c, form, mesh = run.config, run.form, run.mesh
    times = np.asarray(c.times if c.times is not None else
                       np.geomspace(1e-3, 0.1, 12), float)
    src = run.node(c.source)
    kw = {} if c.scheme == 'spectral' else _step_kwargs(c)
    table = run.table if c.scheme == 'spectral' else None
    col = heat_column(form, src, times, c.scheme, table=table, **kw)
    run.state['heat'] = col
    I = form.interior
    mass = col.mass(form)
    if c.scheme != 'crank-nicolson':
        rep.check('min kernel value', np.min(col.values), -1e-10)
    sub_markov = form.is_symmetric and run.coeffs.is_constant and \
        float(run.coeffs.evaluate(np.zeros((1, 2)))[3][0]) >= 0
    if sub_markov:
        rep.check('max mass', np.max(mass), None, 1 + 1e-8)
        rep.check('mass increase', np.max(np.diff(mass)) if len(mass) > 1
                  else 0.0, None, 1e-12)
    #Duality p(t, x, y) = p*(t, y, x) on the same step sequence
    other = I[np.argmax(col.values[-1, I]*(I != src))]
    adj = heat_column(form, other, times, c.scheme, side='adjoint', **kw)
    primal = col.values[:, other]
    dual = adj.values[:, src]
    rep.check('duality', np.max(np.abs(primal - dual) /
                                np.maximum(np.abs(primal), 1e-300)),
              0.0, 1e-6)
    rep.check('semigroup', _semigroup_defect(run, col, kw), 0.0, 1.0)
    if run.laplacian and run.domain.name == 'square':
        late = times >= 1e-2
        ref = _square_series(times[late], mesh.nodes[src], mesh.nodes[src])
        err = np.abs(col.values[late, src] - ref)/ref
        rep.check('square kernel series', np.max(err) if len(err) else
                  np.nan, 0.0, 0.03)
    frame = pd.DataFrame({'t': times, 'mass': mass,
                          'min': col.values.min(axis=1),
                          'max': col.values.max(axis=1),
                          'at_source': col.values[:, src]})
    write_csv(frame, c.out_dir, 'heat_column', rep)
    rep.add(source_node=src, source=mesh.nodes[src], scheme=c.scheme)
    if c.plots:
        plot_nodal(mesh, col.values[-1], run.out('heat.svg'),
                   'p(t = {:.3g}, ., source)'.format(times[-1]))


def _semigroup_defect(run, col, kw):
    '''Defect of P_{t+s} = P_s P_t relative to twice the step error

    Values up to 1 mean the defect stays within twice the estimated time
    truncation error of the stepping scheme; the spectral scheme is exact.
    '''
    c, form = run.config, run.form
    I = form.interior
    times = col.times
    if len(times) < 2:
        return 0.0
    k = len(times)//2
    t, s = times[k-1], times[-1] - times[k-1]
    target = col.values[-1, I]
    if c.scheme == 'spectral':
        tab = run.table
        again = tab.kernel(s) @ (form.m*col.values[k-1, I])
        err = np.linalg.norm(again - target)/np.linalg.norm(target)
        return float(err/1e-8)
    again = evolve(form, col.values[k-1, I], [s], c.scheme, **kw)[0]
    half = heat_column(form, col.source_node, times, c.scheme,
                       **_step_kwargs(c, times, halve=True)).values[-1, I]
    err = np.linalg.norm(again - target)
    #First-order step error is about twice the halving difference
    trunc = 2*np.linalg.norm(half - target)
    return float(err/(2*trunc + 1e-14*np.linalg.norm(target)))


def _green(run, rep):
    c, form, mesh = run.config, run.form, run.mesh
    pole = run.node(c.pole)
    g = green_column(form, pole, lam=run.state['pair'].lam)
    run.state['green'] = g
    I = form.interior
    rep.check('min interior G', np.min(g.values[I]), np.finfo(float).tiny)
    rep.check('max boundary |G|', np.max(np.abs(g.values[mesh.boundary_mask]))
              if np.any(mesh.boundary_mask) else 0.0, 0.0, 0.0)
    if form.is_symmetric:
        q = I[np.argmin(np.abs(g.values[I] - np.median(g.values[I])))]
        g2 = green_column(form, q, lam=run.state['pair'].lam)
        sym = abs(g.values[q] - g2.values[pole])/abs(g.values[q])
        rep.check('green symmetry', sym, 0.0, 1e-8)
    if run.laplacian and run.domain.name == 'disc':
        r = np.linalg.norm(mesh.nodes - mesh.nodes[pole], axis=1)
        sel = (r >= 0.2) & (r <= 0.8)
        exact = np.log(1/r[sel])/(2*np.pi)
        rep.check('disc green', np.max(np.abs(g.values[sel] - exact)/exact),
                  0.0, 0.05)
    rep.add(pole_node=pole, pole=mesh.nodes[pole])
    write_csv(nodal_frame(mesh, g.values, 'G'), c.out_dir, 'green', rep)
    if c.plots:
        plot_nodal(mesh, np.maximum(g.values, 0), run.out('green.svg'),
                   'log10 G(., pole)', log=True)


def _doob(run, rep):
    c, form, mesh, domain = run.config, run.form, run.mesh, run.domain
    profile = make_profile(run.state['pair'], mesh)
    weighted = transform(form, profile)
    run.state['weighted'] = weighted
    rep.check('profile residual', weighted.summary['profile_residual'], 0.0,
              PROFILE_TOL)
    rep.check('kernel identity', weighted.summary['max_rel_err'], 0.0, 1e-10)
    rep.check('markov defect', weighted.summary['markov_defect'], 0.0, 1e-8)
    rep.add(form_discrepancy=form_discrepancy(weighted))
    if 'green' in run.state:
        gw = transform(form, make_profile(run.state['green'], mesh))
        rep.check('green kernel identity', gw.summary['max_rel_err'], 0.0,
                  1e-10)
    R = domain.diam_inner
    radii = R*np.array([1/32, 1/16, 1/8])
    for k, (label, xi) in enumerate(run.boundary_points()):
        vt = weighted_volume(profile, domain, mesh, xi, radii)
        write_csv(vt.to_frame(), c.out_dir, 'weighted_volume_{}'.format(k),
                  rep)
        rep.check('doubling {}'.format(label), np.max(vt.ratios), 1.0)
        if label == 'edge-midpoint' and run.laplacian and \
                domain.name == 'square':
            rep.check('square flat doubling', np.max(vt.ratios), 6.0, 20.0)
        rep.check('K1 {}'.format(label), profile_boundary_control(
            profile, domain, mesh, xi, radii[-1], c.c_u), 1.0)
    center = mesh.nodes[run.node()]
    for r in radii[1:]:
        ball = inner_ball(domain, mesh, center, r, c.c_u)
        rep.check('poincare r = {:.4g}'.format(r),
                  weighted_poincare(weighted, ball), np.finfo(float).tiny)
    rep.add(summary=weighted.summary, construction=weighted.construction)


def _fit(run, table, mesh, form, rule='deepest'):
    c = run.config
    pairs = sample_pairs(run.domain, mesh, c.n_pairs, c.seed)
    phi = run.state['pair'].phi if form is run.form else \
        principal_eigenpair(form, tol=c.eigen_tol).phi
    return fit_envelope_constants(table, run.domain, mesh, phi, pairs,
                                  c.c_up, c.c_low, c.c_u, rule)


def _envelope(run, rep):
    c = run.config
    times = np.geomspace(1e-3, run.domain.diam_inner**2, 16)
    table = replace(run.table, times=times)
    fit = _fit(run, table, run.mesh, run.form)
    alt = _fit(run, table, run.mesh, run.form, 'first-admissible')
    rep.check('a2 positive', fit.a2_emp, np.finfo(float).tiny)
    rep.check('A1 over a2', fit.A1_emp/fit.a2_emp, 1.0)
    rep.check('spread', fit.spread, None, 1e3)
    rep.check('rule stability', max(fit.spread, alt.spread) /
              min(fit.spread, alt.spread), 1.0, 2.0)
    rep.add(fit=fit.to_dict(), alternate=alt.to_dict())
    if c.mesh_halving:
        mesh = run._mesh(c.h_max/2)
        form = assemble(mesh, run.coeffs, c.n_jobs)
        fine = _fit(run, heat_kernel_table(form, times), mesh, form)
        rep.check('refinement stability', max(fit.spread, fine.spread) /
                  min(fit.spread, fine.spread), 1.0, 2.0)
        rep.add(refined=fine.to_dict())
    frame = pd.DataFrame([dict(rule=name, **r.to_dict()) for name, r in
                          (('deepest', fit), ('first-admissible', alt))])
    frame = frame.drop(columns=['witness_upper', 'witness_lower', 't_range'])
    write_csv(frame, c.out_dir, 'envelope', rep)


def _harnack(run, rep):
    c, mesh, domain = run.config, run.mesh, run.domain
    tau, delta = 1.0, 0.5
    x = run.node()
    #Interior cylinders keep B(x, 2r) inside the domain
    reach = boundary_distances(domain, mesh.query_points(domain)[[x]])[0]
    r0 = min(domain.diam_inner/4, reach/2)
    radii = [r0, r0/2, r0/4]
    points = run.boundary_points()
    tip = points[1] if len(points) > 2 else points[0]
    r_tip = domain.diam_inner/8
    stamps = [np.linspace(r**2, 2*r**2, 24) for r in radii + [r_tip]]
    times = np.unique(np.concatenate(stamps))
    col = heat_column(run.form, x, times, 'spectral', table=run.table)
    rows = []
    for r in radii:
        h = check_phi(col, domain, mesh, (mesh.nodes[x], r, 2*r**2, tau,
                                          delta))
        rows.append({'where': 'interior', 'r': r, 'H': h.H_emp})
    H = np.array([row['H'] for row in rows])
    rep.check('interior PHI', np.max(H), 1.0)
    rep.check('interior PHI stability', np.max(H)/np.min(H), 1.0, 2.0)
    b = check_phi(col, domain, mesh, (tip[1], r_tip, 2*r_tip**2, tau, delta),
                  weight=run.state['pair'].phi)
    rows.append({'where': tip[0], 'r': r_tip, 'H': b.H_emp})
    rep.check('boundary PHI {}'.format(tip[0]), b.H_emp, 1.0)
    if 'green' in run.state:
        g = run.state['green']
        pole = mesh.nodes[g.pole_node]
        I = mesh.interior
        dp = inner_distances(domain, pole, mesh.nodes[I], 0,
                             mesh.slit_side[I])
        far = dp > 0.25*domain.diam_inner
        if np.any(far):
            delta_b = boundary_distances(domain,
                                         mesh.query_points(domain)[I])
            k = np.flatnonzero(far)[np.argmax(delta_b[far])]
            r = 0.5*min(delta_b[k], dp[k] - POLE_EXCLUSION*mesh.h_max)
            if r > 0:
                ehi = check_ehi(g.values, domain, mesh, mesh.nodes[I[k]], r)
                rows.append({'where': 'green EHI', 'r': r, 'H': ehi})
                rep.check('green EHI', ehi, 1.0)
    write_csv(pd.DataFrame(rows), c.out_dir, 'harnack', rep)


def _bhp(run, rep):
    c, mesh, domain = run.config, run.mesh, run.domain
    if run.laplacian:
        u = run.state['pair'].phi
        drift = assemble(mesh, CoefficientField(b=[1.0, 0.0]), c.n_jobs)
        v = principal_eigenpair(drift, tol=c.eigen_tol).phi
    else:
        lap = assemble(mesh, CoefficientField(), c.n_jobs)
        u = principal_eigenpair(lap, tol=c.eigen_tol).phi
        v = run.state['pair'].phi
    R = domain.diam_inner
    radii = R*np.array([1/8, 1/16, 1/32])
    rows = []
    for label, xi in run.boundary_points():
        vals = np.array([check_bhp(u, v, domain, mesh, xi, r)
                         for r in radii])
        rows += [{'where': label, 'r': r, 'A1': a}
                 for r, a in zip(radii, vals)]
        rep.check('BHP {}'.format(label), np.max(vals), 1.0)
        rep.check('BHP stability {}'.format(label),
                  np.max(vals)/np.min(vals), 1.0, 2.0)
    #u/v extends continuously to the boundary, reported without a reference
    inside = ~mesh.boundary_mask & (v > BHP_FLOOR*np.max(v))
    ratio = np.where(inside, u/np.where(inside, v, 1.0), 0.0)
    rep.add(holder_ratio=holder_seminorm(ratio, mesh, 0.5, inside))
    write_csv(pd.DataFrame(rows), c.out_dir, 'bhp', rep)


def _convergence(run, rep):
    c = run.config
    pair, star, pairs = run.state['pair'], run.state['star'], \
        run.state['pairs']
    table = run.table
    eta = pairs[1].lam - pair.lam
    #Constants for t >= R^2 hold for any R; R^2 = 1/eta keeps a3/A3 resolved
    R = min(run.domain.diam_inner, 1/np.sqrt(eta))
    times = np.linspace(1, 25, 60)/eta
    uc = check_ultracontractivity(table, pair, star, times, R)
    conv = measure_convergence(table, pair, star, times, R, uc.a3_emp,
                               uc.A3_emp, lam2=pairs[1].lam)
    small = np.geomspace(1e-3, run.domain.diam_inner**2, 16)
    c_t, nu = ultracontractivity_rate(table, pair, star, small)
    rep.check('a3 positive', uc.a3_emp, np.finfo(float).tiny)
    rep.check('A3 finite', uc.A3_emp, uc.a3_emp)
    rep.check('rate above prediction', conv.omega_measured -
              conv.omega_predicted, 0.0)
    rep.check('rate vs spectral gap', abs(conv.omega_measured - eta)/eta,
              0.0, 0.1)
    rep.check('w lower', np.min(conv.w)/uc.a3_emp, 1 - 1e-9)
    rep.check('w upper', np.max(conv.w)/uc.A3_emp, None, 1 + 1e-9)
    rep.check('w normalization', abs(conv.w_integral - 1), 0.0, 1e-6)
    if run.laplacian and run.domain.name == 'square':
        rep.check('square spectral gap', eta, 0.97*3*np.pi**2,
                  1.03*3*np.pi**2)
    rep.add(convergence=conv.to_dict(), nu=nu, R=R)
    write_csv(uc.to_frame(), c.out_dir, 'ultracontractivity', rep)
    write_csv(pd.DataFrame({'t': small, 'c': c_t}), c.out_dir,
              'ultracontractivity_rate', rep)
    write_csv(pd.DataFrame({'t': conv.times, 'D': conv.deviation}),
              c.out_dir, 'decay', rep)
    if c.plots:
        plot_decay(conv.times, conv.deviation, run.out('decay.svg'),
                   conv.window, conv.omega_measured)
        plot_nodal(run.mesh, run.form.to_full(conv.w), run.out('w.svg'),
                   'w = phi*/phi')


def _uniformity(run, rep):
    c = run.config
    cert = certify_uniformity(run.domain, c.n_uniformity, c.C_max,
                              seed=c.seed, verbose=run.verbose)
    rep.check('c_u positive', cert.c_u, np.finfo(float).tiny)
    rep.check('C_u', cert.C_u, 1.0, c.C_max)
    rep.add(c_u=cert.c_u, C_u=cert.C_u, n_samples=cert.n_samples)
    write_csv(cert.to_frame(), c.out_dir, 'uniformity', rep)


def _spectrum(run, rep):
    c, form = run.config, run.form
    pair, star, pairs = run.state['pair'], run.state['star'], \
        run.state['pairs']
    I = form.interior
    f, g = pair.phi[I], star.phi[I]

    def c_of_t(t):
        return float(np.max(run.table.kernel(t)/np.outer(f, g)))

    bound = check_eigenfunction_bound(pairs[1:], pair, run.domain, run.mesh,
                                      c.c_u, ultracontractivity=c_of_t)
    frame = bound.to_frame()
    for row in bound.rows:
        rep.check('A5 {}'.format(row['index']), row['A5_emp'], 0.0)
        rep.check('no boundary blow-up {}'.format(row['index']),
                  row['max_ratio']/row['max_ratio_deep'], None, 10.0)
    rep.check('eta_2', pairs[1].lam - pair.lam, np.finfo(float).tiny)
    rep.add(C=bound.C, alpha=bound.alpha)
    write_csv(frame, c.out_dir, 'eigen_bound', rep)


def _corner(run, rep):
    c, mesh = run.config, run.mesh
    phi = run.state['pair'].phi
    h_small = (c.h_tip or c.h_max/64) if c.grade else c.h_max
    r_min, r_max = 4*h_small, 0.1*run.domain.scale
    rows = []
    if r_min >= r_max:
        rep.add(skipped='r_min {} >= r_max {}'.format(r_min, r_max))
        return
    for label, point, angle in run.corners():
        expo, pref = corner_exponent(phi, run.domain, mesh, point, r_min,
                                     r_max)
        theory = np.pi/angle
        rows.append({'where': label, 'x': point[0], 'y': point[1],
                     'angle': angle, 'exponent': expo, 'theory': theory,
                     'prefactor': pref})
        if run.laplacian:
            tol = 0.1 if theory < 1 else 0.075
            rep.check('exponent {} ({:.4g}, {:.4g})'.format(
                label, point[0], point[1]), expo, (1 - tol)*theory,
                (1 + tol)*theory)
    write_csv(pd.DataFrame(rows), c.out_dir, 'corner_exponents', rep)


def _with_prerequisites(experiments):
    wanted = set(experiments)
    for name in experiments:
        wanted.update(EXPERIMENTS[name])
    return wanted


RUNNERS = {'eigen': _eigen, 'heat': _heat, 'green': _green, 'doob': _doob,
           'envelope': _envelope, 'harnack': _harnack, 'bhp': _bhp,
           'convergence': _convergence, 'uniformity': _uniformity,
           'spectrum': _spectrum, 'corner': _corner}


def run(config, verbose=True):
    '''Runs the experiments of a config in dependency order

    Each experiment writes <name>.json with its checks and its CSV tables
    and figures; failed experiments and failed checks are listed in
    failures.json. Experiments whose prerequisite failed are skipped.

    Parameters
    ----------
        config : RunConfig, dict or str
            Run-config, parsed or as JSON text or filename
        verbose : bool, optional
            Flag to print progress and check tables, Default is True

    Returns
    -------
        out_dir : str
            Artifact directory
        passed : bool
            True iff every experiment ran and every check passed
    '''
    startTime = datetime.now()
    if not isinstance(config, RunConfig):
        config = load_config(config)
    os.makedirs(config.out_dir, exist_ok=True)
    ctx = _Run(config, verbose)
    write_json(config.to_dict(), ctx.out('config.json'))
    write_json(ctx.domain.to_spec(), ctx.out('domain.json'))
    if verbose:
        print(tabulate([[k, v] for k, v in ctx.mesh.stats().items()],
                       headers=['Mesh', '']))
    failures, done = [], set()
    wanted = _with_prerequisites(config.experiments)
    for name in EXPERIMENTS:
        if name not in wanted:
            continue
        missing = [d for d in EXPERIMENTS[name] if d not in done]
        if missing:
            failures.append({'experiment': name, 'error': 'Skipped',
                             'message': 'prerequisite failed: {}'
                             .format(', '.join(missing))})
            continue
        step = datetime.now()
        rep = ctx.report(name)
        try:
            RUNNERS[name](ctx, rep)
        except HeatprofError as err:
            failures.append({'experiment': name,
                             'error': type(err).__name__,
                             'message': str(err)})
            rep.add(error=str(err))
            rep.write(config.out_dir)
            if verbose:
                print('{} failed: {}'.format(name, err))
            continue
        done.add(name)
        rep.write(config.out_dir)
        for chk in rep.checks:
            if not chk.passed:
                failures.append({'experiment': name, 'check': chk.name,
                                 'value': chk.value, 'lower': chk.lower,
                                 'upper': chk.upper})
        if verbose:
            print_checks(rep.checks, '\n{} ({:.2f} s)'.format(
                name, (datetime.now() - step).total_seconds()))
    write_manifest(config.out_dir, failures, ctx.hash)
    if config.workbook:
        write_workbook(config.out_dir)
    if verbose:
        total_runtime = ((datetime.now() - startTime).total_seconds())/60
        print('Runtime (min): %.4f' % total_runtime)
    return config.out_dir, not failures


def _parser():
    parser = argparse.ArgumentParser(
        prog='heatprof', description='Dirichlet heat kernels, profiles and '
        'Doob transforms on polygonal domains')
    parser.add_argument('--version', action='version',
                        version='heatprof {}'.format(__version__))
    sub = parser.add_subparsers(dest='command', required=True)
    p_run = sub.add_parser('run', help='run the experiments of a config')
    p_run.add_argument('config', help='run-config JSON file')
    p_run.add_argument('--quiet', action='store_true')
    p_gal = sub.add_parser('gallery', help='describe a gallery domain')
    p_gal.add_argument('name', help=', '.join(GALLERY))
    p_gal.add_argument('--emit-spec', action='store_true',
                       help='print the domain-spec JSON')
    p_gal.add_argument('--param', action='append', default=[],
                       metavar='KEY=VALUE', help='gallery parameter')
    p_ver = sub.add_parser('verify', help='re-check a report directory')
    p_ver.add_argument('report_dir')
    return parser


def _gallery_params(items):
    params = {}
    for item in items:
        key, sep, value = item.partition('=')
        if not sep:
            raise ParseError('Parse Error: gallery parameter must be '
                             'KEY=VALUE\nGot: {}'.format(item))
        try:
            params[key] = float(value) if '.' in value else int(value)
        except ValueError:
            raise ParseError('Parse Error: gallery parameter {} is not a '
                             'number\nGot: {}'.format(key, value))
    return params


def main(argv=None):
    '''Console entry point; returns the process exit status'''
    args = _parser().parse_args(argv)
    try:
        if args.command == 'run':
            _, passed = run(args.config, verbose=not args.quiet)
            return 0 if passed else 1
        if args.command == 'gallery':
            params = _gallery_params(args.param)
            spec, domain = gallery(args.name, **params)
            if args.emit_spec:
                print(json.dumps(domain.to_spec(), indent=2))
            else:
                print(tabulate([['name', spec.name],
                                ['params', spec.params],
                                ['outer vertices', len(domain.outer)],
                                ['holes', len(domain.holes)],
                                ['slits', len(domain.slits)],
                                ['inner diameter', domain.diam_inner]],
                               headers=['Gallery', '']))
            return 0
        checks = verify_dir(args.report_dir)
        return 0 if all(c.passed for c in checks) else 1
    except HeatprofError as err:
        print(err, file=sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
