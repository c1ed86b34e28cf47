"""
heatprof.forms

"""

from dataclasses import dataclass, field
from functools import cached_property
from concurrent.futures import ThreadPoolExecutor
import numpy as np
import sympy
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import eigsh
from scipy.linalg import eigh

from .errors import AssemblyError, ParseError

_X, _Y = sympy.symbols('x y')
#Largest system solved densely in coercivity_bound
DENSE_LIMIT = 1500


def _component(value, what):
    #Constant, callable f(x, y) or polynomial expression string in x, y
    if value is None:
        return 0.0
    if callable(value):
        return value
    if isinstance(value, str):
        try:
            expr = sympy.sympify(value)
        except (sympy.SympifyError, TypeError) as err:
            raise ParseError('Parse Error: cannot read coefficient {}\n{}'
                             .format(what, err))
        extra = expr.free_symbols - {_X, _Y}
        if extra:
            raise ParseError('Parse Error: coefficient {} uses unknown '
                             'symbols {}'.format(what, sorted(map(str,
                                                                  extra))))
        if not expr.free_symbols:
            return float(expr)
        return sympy.lambdify((_X, _Y), expr, 'numpy')
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ParseError('Parse Error: coefficient {} must be a number or an '
                         'expression\nGot: {!r}'.format(what, value))


def _evaluate(comp, points):
    if callable(comp):
        vals = comp(points[:, 0], points[:, 1])
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (len(points),)).copy()
    return np.full(len(points), float(comp))


class CoefficientField:
    '''Coefficients of the form E(f,g) = int a grad f.grad g + b.grad f g
    + f d.grad g + c f g

    Each component is a number, a callable of (x, y) or a polynomial
    expression string in x and y.

    Parameters
    ----------
        a : array_like, optional
            Symmetric 2x2 diffusion matrix, Default is the identity
        b : array_like, optional
            Drift vector, Default is zero
        d : array_like, optional
            Adjoint drift vector, Default is zero
        c : float, str or callable, optional
            Potential, Default is zero
        lambda_ell : float, optional
            Known lower ellipticity bound, Default is None (measured at the
            evaluation points)
    '''

    def __init__(self, a=None, b=None, d=None, c=None, lambda_ell=None):
        a = [[1.0, 0.0], [0.0, 1.0]] if a is None else a
        b = [0.0, 0.0] if b is None else b
        d = [0.0, 0.0] if d is None else d
        if np.shape(a) != (2, 2) or np.shape(b) != (2,) or \
                np.shape(d) != (2,):
            raise ParseError('Parse Error: a must be 2x2, b and d length 2')
        self.raw = {'a': a, 'b': b, 'd': d, 'c': 0.0 if c is None else c}
        self.a = [[_component(a[i][j], 'a[{}][{}]'.format(i, j))
                   for j in range(2)] for i in range(2)]
        self.b = [_component(b[i], 'b[{}]'.format(i)) for i in range(2)]
        self.d = [_component(d[i], 'd[{}]'.format(i)) for i in range(2)]
        self.c = _component(c, 'c')
        self.lambda_ell = lambda_ell

    @classmethod
    def from_config(cls, config):
        '''Builds a field from the "coefficients" block of a run-config'''
        if config is None:
            return cls()
        if not isinstance(config, dict):
            raise ParseError('Parse Error: coefficients must be an object')
        unknown = set(config) - {'a', 'b', 'd', 'c', 'lambda_ell'}
        if unknown:
            raise ParseError('Parse Error: unknown coefficient fields\n{}'
                             .format(sorted(unknown)))
        return cls(**config)

    def swapped(self):
        '''Field of the adjoint form: b and d exchanged'''
        return CoefficientField(self.raw['a'], self.raw['d'], self.raw['b'],
                                self.raw['c'], self.lambda_ell)

    @property
    def is_constant(self):
        comps = [v for row in self.a for v in row] + self.b + self.d + [self.c]
        return not any(callable(v) for v in comps)

    @property
    def is_symmetric(self):
        '''True when b = d, i.e. the form is symmetric'''
        pts = np.array([[0.0, 0.0], [0.3, 0.7], [0.9, 0.2]])
        _, B, D, _ = self.evaluate(pts)
        return bool(np.allclose(B, D, rtol=0, atol=1e-15)) and \
            all(not callable(v) or v is w for v, w in zip(self.b, self.d))

    def evaluate(self, points):
        '''Coefficient values at points

        Returns
        -------
            A : numpy.ndarray
                (n, 2, 2) diffusion matrices
            B, D : numpy.ndarray
                (n, 2) drift and adjoint drift
            C : numpy.ndarray
                (n,) potential
        '''
        pts = np.asarray(points, float).reshape(-1, 2)
        A = np.stack([np.stack([_evaluate(self.a[i][j], pts)
                                for j in range(2)], axis=-1)
                      for i in range(2)], axis=-2)
        B = np.stack([_evaluate(v, pts) for v in self.b], axis=-1)
        D = np.stack([_evaluate(v, pts) for v in self.d], axis=-1)
        C = _evaluate(self.c, pts)
        for name, arr in (('a', A), ('b', B), ('d', D), ('c', C)):
            if not np.all(np.isfinite(arr)):
                raise AssemblyError('Assembly Error: non-finite values of '
                                    'coefficient {}'.format(name))
        if np.max(np.abs(A - np.swapaxes(A, 1, 2))) > 1e-12:
            raise AssemblyError('Assembly Error: diffusion matrix a is not '
                                'symmetric')
        return A, B, D, C

    def ellipticity(self, points):
        '''(lambda_ell, Lambda_ell) over the given points'''
        A, _, _, _ = self.evaluate(points)
        ev = np.linalg.eigvalsh(A)
        lo, hi = float(ev.min()), float(ev.max())
        if lo <= 0:
            raise AssemblyError('Assembly Error: diffusion matrix is not '
                                'positive definite\nSmallest eigenvalue: {}'
                                .format(lo))
        if self.lambda_ell is not None:
            lo = min(lo, float(self.lambda_ell))
        return lo, hi


@dataclass
class AssumptionConstants:
    '''Closed-form upper bounds for the constants of the adapted form'''
    C0: float
    C2: float
    C3: float
    C5: float
    lambda_ell: float

    @property
    def C8(self):
        return self.C2 + self.C3 + self.C5

    @property
    def garding_alpha(self):
        '''alpha with x.K x >= -alpha x.M x'''
        return self.C3 + self.C5 + 1

    def as_dict(self):
        return {'C0': self.C0, 'C2': self.C2, 'C3': self.C3, 'C5': self.C5,
                'C8': self.C8, 'lambda_ell': self.lambda_ell}


@dataclass
class DiscreteForm:
    '''Assembled P1 matrices of the form, restricted to interior nodes

    K[i, j] = E(phi_j, phi_i), so the semigroup solves M u' = -K u.
    '''
    K_s: object
    K_b: object
    K_d: object
    K_c: object
    M: object
    M_consistent: object
    dirichlet_mask: np.ndarray
    mesh: object = field(repr=False)
    coeffs: object = field(repr=False)

    @cached_property
    def K(self):
        return (self.K_s + self.K_b + self.K_d + self.K_c).tocsr()

    @property
    def interior(self):
        return np.flatnonzero(~self.dirichlet_mask)

    @property
    def n(self):
        return self.M.shape[0]

    @cached_property
    def m(self):
        '''Lumped nodal masses of the interior nodes'''
        return np.asarray(self.M.diagonal())

    @cached_property
    def skew(self):
        return ((self.K - self.K.T)/2).tocsr()

    @cached_property
    def is_symmetric(self):
        diff = abs(self.K - self.K.T).max() if self.n else 0.0
        return bool(diff <= 1e-12*max(1.0, abs(self.K).max()))

    def to_full(self, u):
        '''Extends interior values by zero to all mesh nodes'''
        u = np.asarray(u)
        full = np.zeros((self.mesh.n_nodes,) + u.shape[1:], dtype=u.dtype)
        full[self.interior] = u
        return full

    def adjoint(self):
        '''Form with b and d exchanged, whose K is the transpose of this K'''
        return DiscreteForm(self.K_s, self.K_d.T.tocsr(), self.K_b.T.tocsr(),
                            self.K_c, self.M, self.M_consistent,
                            self.dirichlet_mask, self.mesh,
                            self.coeffs.swapped())

    def assumption_constants(self):
        return estimate_assumption_constants(self.coeffs,
                                             self.mesh.centroids)


def _gradients(mesh, tri_idx):
    p = mesh.nodes[mesh.triangles[tri_idx]]
    area = mesh.areas[tri_idx]
    G = np.empty((len(tri_idx), 3, 2))
    for i in range(3):
        j, k = (i+1) % 3, (i+2) % 3
        G[:, i, 0] = p[:, j, 1] - p[:, k, 1]
        G[:, i, 1] = p[:, k, 0] - p[:, j, 0]
    return G/(2*area[:, None, None]), area


def _element_blocks(mesh, coeffs, tri_idx):
    G, area = _gradients(mesh, tri_idx)
    A, B, D, C = coeffs.evaluate(mesh.centroids[tri_idx])
    #Centroid rule: every basis function equals 1/3 at the centroid
    ks = area[:, None, None]*np.einsum('tia,tab,tjb->tij', G, A, G)
    bg = np.einsum('ta,tja->tj', B, G)
    kb = (area/3)[:, None, None]*np.broadcast_to(bg[:, None, :],
                                                 (len(area), 3, 3))
    dg = np.einsum('ta,tia->ti', D, G)
    kd = (area/3)[:, None, None]*np.broadcast_to(dg[:, :, None],
                                                 (len(area), 3, 3))
    kc = (area*C/3)[:, None]*np.ones((len(area), 3))
    mc = (area/12)[:, None, None]*(np.ones((3, 3)) + np.eye(3))[None]
    return ks, kb, kd, kc, mc, area


def _scatter(tris, local, n):
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_full(mesh, coeffs, n_jobs=1):
    '''Unrestricted P1 matrices over all mesh nodes

    Parameters
    ----------
        mesh : heatprof.meshing.Mesh
            Triangulation
        coeffs : CoefficientField
            Coefficients, evaluated at triangle centroids
        n_jobs : int, optional
            Worker threads over triangle chunks, Default is 1

    Returns
    -------
        matrices : dict
            Sparse 'K_s', 'K_b', 'K_d', 'K_c', 'M', 'M_consistent'
    '''
    n = mesh.n_nodes
    chunks = np.array_split(np.arange(len(mesh.triangles)), max(1, n_jobs))
    chunks = [c for c in chunks if len(c)]
    if n_jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(
                lambda idx: _element_blocks(mesh, coeffs, idx), chunks))
    else:
        blocks = [_element_blocks(mesh, coeffs, idx) for idx in chunks]
    ks, kb, kd, kc, mc, area = [np.concatenate(parts) for parts in
                                zip(*blocks)]
    tris = mesh.triangles[np.concatenate(chunks)]
    lumped = np.bincount(tris.ravel(), weights=np.repeat(area/3, 3),
                         minlength=n)
    potential = np.bincount(tris.ravel(), weights=kc.ravel(), minlength=n)
    return {'K_s': _scatter(tris, ks, n),
            'K_b': _scatter(tris, kb, n),
            'K_d': _scatter(tris, kd, n),
            'K_c': diags(potential).tocsr(),
            'M': diags(lumped).tocsr(),
            'M_consistent': _scatter(tris, mc, n)}


def assemble(mesh, coeffs, n_jobs=1):
    '''Assembles the discrete form with the Dirichlet condition

    Boundary nodes (outer ring, holes, both sides of every slit) are removed
    from rows and columns, leaving the matrices of the interior nodes.

    Parameters
    ----------
        mesh : heatprof.meshing.Mesh
            Triangulation of the domain
        coeffs : CoefficientField
            Coefficients of the form
        n_jobs : int, optional
            Worker threads for element assembly, Default is 1

    Returns
    -------
        form : DiscreteForm
    '''
    if len(mesh.interior) == 0:
        raise AssemblyError('Assembly Error: mesh of {} has no interior nodes'
                            .format(mesh.domain_name))
    coeffs.ellipticity(mesh.centroids)
    full = assemble_full(mesh, coeffs, n_jobs)
    I = mesh.interior
    restricted = {k: v[I][:, I].tocsr() for k, v in full.items()}
    return DiscreteForm(dirichlet_mask=mesh.boundary_mask.copy(), mesh=mesh,
                        coeffs=coeffs, **restricted)


def estimate_assumption_constants(coeffs, points=None):
    '''Conservative closed-form bounds of the constants C0, C2, C3, C5, C8

    C5 = sup|b - d|^2/(4 lambda), C2 = sup|b + d|^2/(4 lambda),
    C3 = sup|c| + C2, C0 = sup|b - d|/sqrt(lambda), C8 = C2 + C3 + C5.

    Parameters
    ----------
        coeffs : CoefficientField
            Coefficients of the form
        points : array_like, optional
            Points where the suprema are taken, Default is the origin (only
            valid for constant fields)

    Returns
    -------
        constants : AssumptionConstants
    '''
    if points is None:
        if not coeffs.is_constant:
            raise AssemblyError('Assembly Error: evaluation points are needed '
                                'for variable coefficients')
        points = np.zeros((1, 2))
    lam, _ = coeffs.ellipticity(points)
    _, B, D, C = coeffs.evaluate(points)
    minus = float(np.max(np.sum((B - D)**2, axis=1)))
    plus = float(np.max(np.sum((B + D)**2, axis=1)))
    C2 = plus/(4*lam)
    return AssumptionConstants(C0=np.sqrt(minus/lam), C2=C2,
                               C3=float(np.max(np.abs(C))) + C2,
                               C5=minus/(4*lam), lambda_ell=lam)


def coercivity_bound(form):
    '''Smallest eigenvalue of the symmetrized pencil ((K + K^T)/2, M)'''
    S = ((form.K + form.K.T)/2).tocsc()
    if form.n <= DENSE_LIMIT:
        vals = eigh(S.toarray(), form.M.toarray(), eigvals_only=True,
                    subset_by_index=[0, 0])
        return float(vals[0])
    alpha = form.assumption_constants().garding_alpha
    vals = eigsh(S, k=1, M=form.M.tocsc(), sigma=-alpha - 1.0, which='LM',
                 return_eigenvectors=False)
    return float(vals[0])


def write_triplets(matrix, filename):
    '''Writes a sparse matrix as "row col value" lines with a header'''
    coo = matrix.tocoo()
    data = np.column_stack([coo.row, coo.col, coo.data])
    np.savetxt(filename, data, fmt=['%d', '%d', '%.17g'],
               header='row col value  shape={}x{}'.format(*matrix.shape))
