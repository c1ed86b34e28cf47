"""
heatprof.doob

"""

from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from scipy.sparse import diags, coo_matrix
from scipy.linalg import eigh

from .errors import NonPositiveProfile, IdentityViolation, EmptyBall, \
    PoleExclusionError, ConvergenceFailure
from .forms import CoefficientField, _element_blocks
from .geometry import inner_distances, inner_ball
from .solver import EigenPair, GreenColumn, evolve

#Normwise relative bound of the discrete kernel identity
IDENTITY_TOL = 1e-10
#Green poles exclude balls within this many h_max
POLE_EXCLUSION = 4
#Relative bound of (K + gamma M) h away from the pole
PROFILE_TOL = 1e-6


@dataclass
class Profile:
    '''Positive weight h vanishing on the Dirichlet nodes

    gamma is the shift with (K + gamma M) h = 0 away from the pole:
    -lambda for an eigenfunction, 0 for a Green function.
    '''
    kind: str
    h: np.ndarray
    gamma: float
    pole_node: int = None
    exclusion_radius: float = 0.0


@dataclass
class WeightedForm:
    '''Doob transform of a form by a profile

    K_h = D (K + gamma M) D and M_h = D M D with D = diag(h) over the
    interior nodes; the generator M_h^-1 K_h is D^-1 M^-1 (K + gamma M) D.
    '''
    K_h: object
    M_h: object
    profile: Profile
    form: object = field(repr=False)
    construction: str = 'D_h (K + gamma M) D_h'
    summary: dict = field(default_factory=dict)


@dataclass
class WeightedVolumeTable:
    '''V_{h^2}(center, r) and V_{h^2}(center, 2r) with doubling ratios'''
    center: np.ndarray
    radii: np.ndarray
    volumes: np.ndarray
    volumes_2r: np.ndarray

    @property
    def ratios(self):
        return self.volumes_2r/self.volumes

    def to_frame(self):
        return pd.DataFrame({'r': self.radii, 'V_r': self.volumes,
                             'V_2r': self.volumes_2r,
                             'ratio': self.ratios})


def make_profile(source, mesh):
    '''Profile from a principal eigenpair or a Green column

    Parameters
    ----------
        source : heatprof.solver.EigenPair or heatprof.solver.GreenColumn
            Eigenfunction (gamma = -lambda) or Green function (gamma = 0)
        mesh : heatprof.meshing.Mesh
            Mesh the source lives on

    Returns
    -------
        profile : Profile
    '''
    if isinstance(source, EigenPair):
        kind, h, gamma, pole = 'eigenfunction', source.phi, -source.lam, None
        radius = 0.0
    elif isinstance(source, GreenColumn):
        kind, h, gamma, pole = 'green', source.values, 0.0, source.pole_node
        radius = POLE_EXCLUSION*mesh.h_max
    else:
        raise NonPositiveProfile('Non-positive Profile: cannot build a '
                                 'profile from {}'.format(type(source)
                                                          .__name__))
    h = np.asarray(h, float)
    inner = h[mesh.interior]
    if np.min(inner) <= 0:
        bad = mesh.interior[np.argmin(inner)]
        raise NonPositiveProfile('Non-positive Profile: h = {:.3e} at node {}'
                                 .format(np.min(inner), bad))
    return Profile(kind, h.copy(), float(gamma), pole, radius)


def _profile_residual(form, profile):
    #Relative size of (K + gamma M) h on the interior, pole row dropped
    hI = profile.h[form.interior]
    r = np.abs(form.K @ hI + profile.gamma*(form.M @ hI))
    if profile.pole_node is not None:
        r[form.interior == profile.pole_node] = 0.0
    scale = abs(form.K) @ hI + abs(profile.gamma)*(abs(form.M) @ hI)
    return float(np.max(r)/np.max(scale))


def _identity_check(form, profile, K_h, M_h, times, dt0, source):
    I = form.interior
    hI = profile.h[I]
    j = int(np.argmax(hI)) if source is None else \
        int(np.flatnonzero(I == source)[0])
    u0 = np.zeros(form.n)
    u0[j] = 1/form.m[j]
    U = evolve(form, u0, times, dt0=dt0)
    #Returned pencil stepped on the same grid, shift removed in the step
    #and applied exactly afterwards
    V = evolve(_Pencil(K_h, M_h), u0/hI, times, dt0=dt0,
               shift=-profile.gamma)
    worst = 0.0
    for k, t in enumerate(times):
        p_h = np.exp(-profile.gamma*t)*V[k]/hI[j]
        rebuilt = np.exp(profile.gamma*t)*hI*hI[j]*p_h
        err = np.linalg.norm(U[k] - rebuilt)/np.linalg.norm(U[k])
        worst = max(worst, float(err))
    return worst


class _Pencil:
    #Minimal stand-in of a form for evolve: K, M and the lumped masses
    def __init__(self, K, M):
        self.K = K.tocsr()
        self.M = M.tocsr()
        self.m = np.asarray(M.diagonal())
        self.n = M.shape[0]


def _markov_defect(K_h, M_h, times, dt0):
    pencil = _Pencil(K_h, M_h)
    ones = np.ones(M_h.shape[0])
    grid = np.geomspace(dt0, times[-1], 40)
    U = evolve(pencil, ones, grid, dt0=dt0, steps_per_grade=4)
    return float(np.max(np.abs(U - 1)))


def transform(form, profile, check=True, times=(1e-3, 1e-2, 1e-1),
              dt0=1e-4, source=None):
    '''Doob h-transform by diagonal conjugation

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        profile : Profile
            Weight h on the mesh of the form
        check : bool, optional
            Flag to verify the kernel identity and the Markov property,
            Default is True
        times : tuple of float, optional
            Output times of the identity check, Default is (1e-3, 1e-2, 1e-1)
        dt0 : float, optional
            First step of the identity check, Default is 1e-4
        source : int, optional
            Source node of the identity check, Default is the node of
            largest h

    Returns
    -------
        weighted : WeightedForm
            Transformed matrices with summary {max_rel_err, markov_defect,
            profile_residual}
    '''
    mask = form.dirichlet_mask
    h = profile.h
    if len(h) != len(mask):
        raise IdentityViolation('Identity Violation: profile has {} values, '
                                'mesh has {} nodes'.format(len(h), len(mask)))
    edge = np.max(np.abs(h[mask])) if np.any(mask) else 0.0
    if not np.any(mask) or edge > 1e-14*np.max(np.abs(h)):
        raise IdentityViolation('Identity Violation: h does not vanish on the '
                                'Dirichlet nodes\nMax boundary value: {}'
                                .format(edge))
    hI = h[form.interior]
    if np.min(hI) <= 0:
        raise NonPositiveProfile('Non-positive Profile: h = {:.3e} at an '
                                 'interior node'.format(np.min(hI)))
    D = diags(hI)
    M_h = (D @ form.M @ D).tocsr()
    K_h = (D @ (form.K + profile.gamma*form.M) @ D).tocsr()
    summary = {'max_rel_err': None, 'markov_defect': None,
               'profile_residual': None}
    if check:
        times = np.asarray(times, float)
        res = _profile_residual(form, profile)
        summary['profile_residual'] = res
        if res > PROFILE_TOL:
            raise IdentityViolation('Identity Violation: (K + gamma M) h '
                                    'does not vanish away from the pole\n'
                                    'gamma: {:.6g}, relative residual: '
                                    '{:.3e}'.format(profile.gamma, res))
        err = _identity_check(form, profile, K_h, M_h, times, dt0, source)
        summary['max_rel_err'] = err
        if err > IDENTITY_TOL:
            raise IdentityViolation('Identity Violation: kernel identity '
                                    'fails\nMax relative error: {:.3e}'
                                    .format(err))
        if profile.kind == 'eigenfunction':
            summary['markov_defect'] = _markov_defect(K_h, M_h, times, dt0)
    return WeightedForm(K_h, M_h, profile, form, summary=summary)


def reassemble_weighted(form, profile):
    '''Elementwise int h^2 a grad f.grad g over the interior nodes

    h^2 is taken per triangle from the mean nodal value of h.
    '''
    mesh = form.mesh
    tri_idx = np.arange(len(mesh.triangles))
    ks = _element_blocks(mesh, form.coeffs, tri_idx)[0]
    h_T = profile.h[mesh.triangles].mean(axis=1)
    local = ks*(h_T**2)[:, None, None]
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_nodes
    full = coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    I = form.interior
    return full[I][:, I].tocsr()


def form_discrepancy(weighted):
    '''Relative Frobenius gap between the conjugated and re-assembled forms

    Only the symmetric part of K_h enters; for an eigenfunction profile of a
    symmetric form both realize int h^2 grad f.grad g.
    '''
    W = reassemble_weighted(weighted.form, weighted.profile)
    S = (weighted.K_h + weighted.K_h.T)/2
    diff = S - W
    return float(np.sqrt(diff.multiply(diff).sum() / W.multiply(W).sum()))


def _check_pole(profile, domain, mesh, center, reach, side=0):
    if profile.kind != 'green' or profile.pole_node is None:
        return
    pole = mesh.nodes[profile.pole_node]
    d = inner_distances(domain, center, pole[None], side)[0]
    if d < reach + profile.exclusion_radius:
        raise PoleExclusionError('Pole Exclusion: ball of radius {} around {} '
                                 'meets the excluded neighbourhood of the '
                                 'pole at {}'.format(reach, list(center),
                                                     pole.tolist()))


def _subdivision(n_sub):
    #Barycentric coordinates of the subtriangle centroids of a regular
    #n_sub x n_sub refinement
    pts = []
    for i in range(n_sub):
        for j in range(n_sub - i):
            pts.append((i + 1/3, j + 1/3))
            if i + j <= n_sub - 2:
                pts.append((i + 2/3, j + 2/3))
    ab = np.array(pts)/n_sub
    return np.column_stack([1 - ab.sum(axis=1), ab[:, 0], ab[:, 1]])


def weighted_volume(profile, domain, mesh, center, radii, side=0, n_sub=4):
    '''h^2-weighted areas of inner balls and their doubling ratios

    Each triangle is split into n_sub^2 subtriangles; a subtriangle counts
    towards B_U(center, r) when its centroid does, with h interpolated
    linearly there.

    Parameters
    ----------
        profile : Profile
            Weight h
        domain : heatprof.geometry.PolygonDomain
            Domain of the mesh
        mesh : heatprof.meshing.Mesh
            Mesh of the profile
        center : array_like
            Ball centre, may lie on the boundary
        radii : array_like
            Radii r; the table also holds 2r
        side : int, optional
            Side tag of a slit centre, Default is 0
        n_sub : int, optional
            Subdivisions per triangle edge, Default is 4

    Returns
    -------
        table : WeightedVolumeTable
    '''
    center = np.asarray(center, float)
    radii = np.asarray(radii, float)
    _check_pole(profile, domain, mesh, center, 2*radii.max(), side)
    bary = _subdivision(n_sub)
    P = mesh.nodes[mesh.triangles]
    pts = np.einsum('sk,tkd->tsd', bary, P).reshape(-1, 2)
    hv = (profile.h[mesh.triangles] @ bary.T).reshape(-1)
    area = np.repeat(np.abs(mesh.areas)/len(bary), len(bary))
    near = np.flatnonzero(np.linalg.norm(pts - center, axis=1) <
                          2*radii.max())
    d = np.full(len(pts), np.inf)
    if len(near):
        d[near] = inner_distances(domain, center, pts[near], side)
    weight = area*hv**2

    def volume(r):
        return float(np.sum(weight[d < r]))

    vols = np.array([volume(r) for r in radii])
    vols2 = np.array([volume(2*r) for r in radii])
    if np.any(vols <= 0):
        raise EmptyBall('Empty Ball: no weighted mass within r = {} of {}'
                        .format(radii[np.argmax(vols <= 0)], center.tolist()))
    return WeightedVolumeTable(center, radii, vols, vols2)


def neumann_poincare_constant(mesh, tri_idx, weight, r, coeffs=None):
    '''Weighted Neumann Poincare constant P = 1/(nu_1 r^2) of a submesh

    Parameters
    ----------
        mesh : heatprof.meshing.Mesh
            Mesh holding the triangles
        tri_idx : array_like of int
            Triangles of the submesh
        weight : array_like
            Per-triangle weight (h_T^2) of stiffness and lumped mass
        r : float
            Ball radius used for the scale-free normalization
        coeffs : heatprof.forms.CoefficientField, optional
            Diffusion for the stiffness, Default is the identity

    Returns
    -------
        P : float
    '''
    coeffs = CoefficientField() if coeffs is None else coeffs
    tri_idx = np.asarray(tri_idx, int)
    weight = np.asarray(weight, float)
    ks = _element_blocks(mesh, coeffs, tri_idx)[0]*weight[:, None, None]
    tris = mesh.triangles[tri_idx]
    nodes, local = np.unique(tris, return_inverse=True)
    local = local.reshape(-1, 3)
    n = len(nodes)
    K = np.zeros((n, n))
    np.add.at(K, (np.repeat(local, 3, axis=1).ravel(),
                  np.tile(local, (1, 3)).ravel()), ks.ravel())
    m = np.bincount(local.ravel(), weights=np.repeat(
        weight*np.abs(mesh.areas[tri_idx])/3, 3), minlength=n)
    keep = m > 0
    if np.count_nonzero(keep) < 3:
        raise ConvergenceFailure('Convergence Failure: weighted Neumann '
                                 'problem has {} free nodes'
                                 .format(np.count_nonzero(keep)))
    K = K[np.ix_(keep, keep)]
    m = m[keep]
    s = 1/np.sqrt(m)
    vals = eigh(s[:, None]*K*s[None, :], eigvals_only=True,
                subset_by_index=[0, 1])
    nu1 = vals[1]
    if not nu1 > 0:
        raise ConvergenceFailure('Convergence Failure: second Neumann '
                                 'eigenvalue {:.3e} is not positive'
                                 .format(nu1))
    return float(1/(nu1*r**2))


def weighted_poincare(weighted, ball):
    '''h^2-weighted Poincare constant on an inner ball

    Parameters
    ----------
        weighted : WeightedForm
            Transform whose profile supplies the weight
        ball : heatprof.geometry.InnerBall
            Ball whose submesh (triangles with all nodes inside) is used

    Returns
    -------
        P : float
            1/(nu_1 r^2) with nu_1 the first nonzero weighted Neumann
            eigenvalue
    '''
    mesh = weighted.form.mesh
    #Boundary nodes inside r close the submesh along the boundary
    inside = ball.distances < ball.radius
    if len(ball.node_set) < 10:
        raise EmptyBall('Empty Ball: fewer than 10 interior nodes in the '
                        'ball around {}'.format(np.asarray(ball.center)
                                                .tolist()))
    tri_idx = np.flatnonzero(np.all(inside[mesh.triangles], axis=1))
    h_T = weighted.profile.h[mesh.triangles[tri_idx]].mean(axis=1)
    return neumann_poincare_constant(mesh, tri_idx, h_T**2, ball.radius,
                                     weighted.form.coeffs)


def profile_boundary_control(profile, domain, mesh, xi, r, c_u=0.25, side=0):
    '''K1 = max of h(y)/h(x_r) over the nodes y of B_U(xi, r)'''
    xi = np.asarray(xi, float)
    _check_pole(profile, domain, mesh, xi, r, side)
    ball = inner_ball(domain, mesh, xi, r, c_u, side)
    h_xr = float(mesh.interpolate(profile.h, ball.x_r[None])[0])
    if h_xr <= 0:
        raise NonPositiveProfile('Non-positive Profile: h(x_r) = {:.3e}'
                                 .format(h_xr))
    return float(np.max(profile.h[ball.node_set])/h_xr)
