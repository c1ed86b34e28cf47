"""
heatprof.solver

"""

import warnings
from dataclasses import dataclass, field
import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu
from scipy.linalg import eig, eigh, cholesky, solve_triangular

from .errors import SolverError, ConvergenceFailure, NonPositiveEigenvector, \
    SingularSystem, NonPositiveProfile, NegativityWarning, \
    DegenerateClusterWarning

#Largest interior node count for the dense kernel table
MAX_TABLE_NODES = 3000
#Crank-Nicolson values below this are reported
NEGATIVITY_TOL = -1e-10
#Restarts of the Rayleigh-shifted inverse iteration
MAX_RESTARTS = 30
#Eigenvalue spacing below which a cluster is flagged
DEGENERATE_GAP = 1e-10


@dataclass
class EigenPair:
    '''Eigenvalue and nodal eigenfunction of K phi = lam M phi

    phi holds values on all mesh nodes (zero on Dirichlet nodes) and is
    normalized in L2 of the lumped mass.
    '''
    lam: float
    phi: np.ndarray
    residual: float
    side: str = 'primal'
    imag: float = 0.0
    degenerate: bool = False


@dataclass
class HeatKernelColumn:
    '''Kernel values z -> p(t, z, source) at the stored times

    values has shape (len(times), n_nodes); the adjoint side stores
    z -> p*(t, z, source) = p(t, source, z).
    '''
    source_node: int
    times: np.ndarray
    values: np.ndarray
    scheme: str
    side: str = 'primal'

    def mass(self, form):
        '''int p(t, z, source) dz per stored time'''
        return self.values[:, form.interior] @ form.m


@dataclass
class GreenColumn:
    '''Green function G(., pole) on all mesh nodes'''
    pole_node: int
    values: np.ndarray


@dataclass
class HeatKernelTable:
    '''Discrete kernel p(t, x_i, x_j) over all interior node pairs

    Stored as the eigen-expansion p(t) = Re(L exp(-t mu) R), exact in time
    for the semi-discrete problem M u' = -K u.
    '''
    times: np.ndarray
    interior: np.ndarray
    side: str
    n_nodes: int
    mu: np.ndarray = field(repr=False)
    L: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)

    def local(self, nodes):
        '''Interior positions of mesh nodes (-1 for Dirichlet nodes)'''
        pos = np.full(self.n_nodes, -1)
        pos[self.interior] = np.arange(len(self.interior))
        return pos[np.asarray(nodes, int)]

    def kernel(self, t):
        '''(n_int, n_int) matrix of p(t, x_i, x_j)'''
        out = (self.L*np.exp(-t*self.mu)[None, :]) @ self.R
        return np.real(out)

    def entries(self, t, x_nodes, y_nodes):
        '''p(t, x, y) for paired mesh node arrays'''
        i = self.local(x_nodes)
        j = self.local(y_nodes)
        if np.any(i < 0) or np.any(j < 0):
            raise SolverError('Solver Error: kernel requested at a Dirichlet '
                              'node')
        vals = np.einsum('nk,k,kn->n', self.L[i], np.exp(-t*self.mu),
                         self.R[:, j])
        return np.real(vals)

    def column(self, source_node):
        '''HeatKernelColumn of the table at its stored times'''
        j = self.local([source_node])[0]
        if j < 0:
            raise SolverError('Solver Error: source {} is a Dirichlet node'
                              .format(source_node))
        vals = np.zeros((len(self.times), self.n_nodes))
        for k, t in enumerate(self.times):
            vals[k, self.interior] = np.real(
                (self.L*np.exp(-t*self.mu)[None, :]) @ self.R[:, j])
        return HeatKernelColumn(int(source_node), np.array(self.times), vals,
                                'spectral', self.side)


def _operator(form, side):
    if side == 'primal':
        return form.K.tocsc()
    if side == 'adjoint':
        return form.K.T.tocsc()
    raise ValueError('side must be "primal" or "adjoint", got {}'
                     .format(side))


def _factor(A):
    try:
        return splu(csc_matrix(A))
    except RuntimeError as err:
        raise SolverError('Solver Error: sparse factorization failed\n{}'
                          .format(err))


def heat_kernel_table(form, times, side='primal'):
    '''Dense eigen-expansion of the discrete heat kernel

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        times : array_like
            Times at which the table is addressed
        side : str, optional
            'primal' or 'adjoint', Default is 'primal'

    Returns
    -------
        table : HeatKernelTable
    '''
    n = form.n
    if n > MAX_TABLE_NODES:
        raise SolverError('Solver Error: {} interior nodes exceed the dense '
                          'table cap {}'.format(n, MAX_TABLE_NODES))
    A = _operator(form, side).toarray()
    s = 1/np.sqrt(form.m)
    S = s[:, None]*A*s[None, :]
    if form.is_symmetric:
        mu, U = eigh((S + S.T)/2)
        L = s[:, None]*U
        R = U.T*s[None, :]
    else:
        mu, V = eig(S)
        try:
            Vinv = np.linalg.inv(V)
        except np.linalg.LinAlgError as err:
            raise SolverError('Solver Error: eigenvector basis is singular\n'
                              '{}'.format(err))
        L = s[:, None]*V
        R = Vinv*s[None, :]
    return HeatKernelTable(np.asarray(times, float), form.interior.copy(),
                           side, form.mesh.n_nodes, mu, L, R)


def time_grid(times, dt0, steps_per_grade=8, dt_max=None):
    '''Graded step sequence hitting every requested time

    Steps start at dt0 and double every steps_per_grade steps up to dt_max;
    a step is shortened when it would pass a requested time.

    Returns
    -------
        steps : list of float
        marks : list of int
            Number of steps taken when each requested time is reached
    '''
    times = np.asarray(times, float)
    if len(times) == 0 or np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise SolverError('Solver Error: times must be positive and '
                          'increasing\nGot: {}'.format(times))
    if dt0 <= 0:
        raise SolverError('Solver Error: dt0 must be positive\nGot: {}'
                          .format(dt0))
    dt_max = times[-1]/20 if dt_max is None else dt_max
    steps, marks = [], []
    t, dt, count = 0.0, dt0, 0
    for target in times:
        while target - t > 1e-14*target:
            h = min(dt, target - t)
            steps.append(h)
            t += h
            count += 1
            if count % steps_per_grade == 0:
                dt = min(2*dt, max(dt_max, dt0))
        t = target
        marks.append(len(steps))
    return steps, marks


def evolve(form, u0, times, scheme='backward-euler', dt0=1e-5,
           steps_per_grade=8, dt_max=None, side='primal', shift=0.0):
    '''Time-steps M u' = -(K + shift M) u from interior data u0

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        u0 : numpy.ndarray
            Initial interior values
        times : array_like
            Increasing positive output times
        scheme : str, optional
            'backward-euler' or 'crank-nicolson', Default is 'backward-euler'
        dt0 : float, optional
            First time step, Default is 1e-5
        steps_per_grade : int, optional
            Steps taken before the step size doubles, Default is 8
        dt_max : float, optional
            Largest step, Default is times[-1]/20
        side : str, optional
            'primal' or 'adjoint', Default is 'primal'
        shift : float, optional
            Multiple of M added to K, Default is 0.0

    Returns
    -------
        U : numpy.ndarray
            (len(times), n_interior) values at the requested times
    '''
    if scheme not in ('backward-euler', 'crank-nicolson'):
        raise SolverError('Solver Error: unknown scheme {}'.format(scheme))
    A = _operator(form, side)
    if shift:
        A = (A + shift*form.M).tocsc()
    M = form.M.tocsc()
    steps, marks = time_grid(times, dt0, steps_per_grade, dt_max)
    h_lu, lu, rhs_op = None, None, None
    u = np.asarray(u0, float).copy()
    out = np.empty((len(marks), len(u)))
    k_mark = 0
    while k_mark < len(marks) and marks[k_mark] == 0:
        out[k_mark] = u
        k_mark += 1
    for n_step, h in enumerate(steps, start=1):
        #One factorization alive at a time, refactored when the step changes
        if h != h_lu:
            if scheme == 'backward-euler':
                lu, rhs_op = _factor(M + h*A), None
            else:
                lu = _factor(M + 0.5*h*A)
                rhs_op = (M - 0.5*h*A).tocsr()
            h_lu = h
        rhs = M @ u if rhs_op is None else rhs_op @ u
        u = lu.solve(rhs)
        if not np.all(np.isfinite(u)):
            raise SolverError('Solver Error: non-finite values after step {}'
                              .format(n_step))
        while k_mark < len(marks) and marks[k_mark] == n_step:
            out[k_mark] = u
            k_mark += 1
    if scheme == 'crank-nicolson' and np.min(out) < NEGATIVITY_TOL:
        warnings.warn('Crank-Nicolson produced negative values, min {:.3e}'
                      .format(np.min(out)), NegativityWarning)
    return out


def heat_column(form, source, times, scheme='backward-euler', dt0=1e-5,
                side='primal', table=None, **kwargs):
    '''Heat kernel column z -> p(t, z, source)

    The initial datum is the discrete delta e_source/m_source normalized by
    the lumped mass.

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        source : int
            Mesh node index of the source, must be an interior node
        times : array_like
            Increasing positive output times
        scheme : str, optional
            'backward-euler', 'crank-nicolson' or 'spectral',
            Default is 'backward-euler'
        dt0 : float, optional
            First time step, Default is 1e-5
        side : str, optional
            'primal' or 'adjoint', Default is 'primal'
        table : HeatKernelTable, optional
            Precomputed table reused by the spectral scheme, Default is None
        **kwargs
            Passed on to evolve

    Returns
    -------
        column : HeatKernelColumn
    '''
    pos = np.flatnonzero(form.interior == source)
    if len(pos) == 0:
        raise SolverError('Solver Error: source {} is a Dirichlet node'
                          .format(source))
    if scheme == 'spectral':
        if table is None or table.side != side:
            table = heat_kernel_table(form, times, side)
        col = table.column(source)
        if not np.array_equal(col.times, np.asarray(times, float)):
            vals = np.zeros((len(times), form.mesh.n_nodes))
            j = pos[0]
            for k, t in enumerate(times):
                vals[k, form.interior] = np.real(
                    (table.L*np.exp(-t*table.mu)[None, :]) @ table.R[:, j])
            col = HeatKernelColumn(int(source), np.asarray(times, float),
                                   vals, 'spectral', side)
        return col
    u0 = np.zeros(form.n)
    u0[pos[0]] = 1/form.m[pos[0]]
    U = evolve(form, u0, times, scheme, dt0, side=side, **kwargs)
    vals = np.zeros((len(U), form.mesh.n_nodes))
    vals[:, form.interior] = U
    return HeatKernelColumn(int(source), np.asarray(times, float), vals,
                            scheme, side)


def _normalize(form, x):
    x = np.real(x)
    nrm = np.sqrt(x @ (form.m*x))
    return x/nrm


def _residual(A, M, lam, x):
    return float(np.linalg.norm(A @ x - lam*(M @ x))/np.linalg.norm(x))


def principal_eigenpair(form, side='primal', tol=1e-8, max_iter=500,
                        polish=1e-13, verbose=False):
    '''Eigenpair with the smallest real part by shift-invert iteration

    A fixed shift below the spectrum is used until the Rayleigh quotient
    settles; the iteration then restarts with the shift at the current
    Rayleigh quotient, at most 30 times.

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        side : str, optional
            'primal' for K, 'adjoint' for K^T, Default is 'primal'
        tol : float, optional
            Residual bound ||K phi - lam M phi||/||phi||, Default is 1e-8
        max_iter : int, optional
            Iterations of the fixed-shift phase, Default is 500
        polish : float, optional
            Residual the restarts aim for before stopping, Default is 1e-13
        verbose : bool, optional
            Flag to print the iteration history, Default is False

    Returns
    -------
        pair : EigenPair
            Positive, L2-normalized principal eigenpair
    '''
    A = _operator(form, side)
    M = form.M.tocsc()
    sigma = -form.assumption_constants().garding_alpha
    lu = _factor(A - sigma*M)
    x = np.ones(form.n)/np.sqrt(np.sum(form.m))
    mu_old = np.inf
    mu = (x @ (A @ x))/(x @ (M @ x))
    for it in range(max_iter):
        x = lu.solve(M @ x)
        x = x/np.linalg.norm(x)
        mu = (x @ (A @ x))/(x @ (M @ x))
        if abs(mu - mu_old) <= 1e-4*max(1.0, abs(mu)):
            break
        mu_old = mu
    else:
        raise ConvergenceFailure('Convergence Failure: shift phase did not '
                                 'settle\nRayleigh quotient: {}'.format(mu))
    res = _residual(A, M, mu, x)
    restarts = 0
    #Polish well below tol, Doob transforms divide the residual by h
    while res > polish and restarts < MAX_RESTARTS:
        offset = 1e-9*max(1.0, abs(mu))
        lu = _factor(A - (mu - offset)*M)
        for _ in range(3):
            x = lu.solve(M @ x)
            x = x/np.linalg.norm(x)
        mu = (x @ (A @ x))/(x @ (M @ x))
        prev, res = res, _residual(A, M, mu, x)
        restarts += 1
        if verbose:
            print('restart {}: lambda = {:.12f}, residual = {:.3e}'
                  .format(restarts, mu, res))
        if res <= tol and res > 0.5*prev:
            break
    if res > tol:
        raise ConvergenceFailure('Convergence Failure: principal eigenpair '
                                 'after {} restarts\nResidual: {:.3e}'
                                 .format(restarts, res))
    if np.sum(x) < 0:
        x = -x
    if np.min(x) <= 0:
        raise NonPositiveEigenvector('Non-positive Eigenvector: principal '
                                     'eigenvector changes sign\nMin value: '
                                     '{:.3e}'.format(np.min(x)))
    x = _normalize(form, x)
    return EigenPair(float(mu), form.to_full(x), _residual(A, M, mu, x), side)


def adjoint_principal(form, pair=None):
    '''Adjoint principal eigenfunction scaled so that <phi, phi*>_M = 1'''
    pair = principal_eigenpair(form) if pair is None else pair
    star = principal_eigenpair(form, side='adjoint')
    I = form.interior
    scale = pair.phi[I] @ (form.m*star.phi[I])
    star.phi = star.phi/scale
    return star


def eigenpairs(form, k, side='primal', tol=1e-6, max_iter=400, seed=0,
               verbose=False):
    '''k eigenpairs with the smallest real parts

    Block shift-invert subspace iteration with M-orthonormalization and
    Rayleigh-Ritz extraction; the shift lies below the spectrum.

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        k : int
            Number of eigenpairs, at least 1
        side : str, optional
            'primal' or 'adjoint', Default is 'primal'
        tol : float, optional
            Residual bound per pair, Default is 1e-6
        max_iter : int, optional
            Subspace iterations, Default is 400
        seed : int, optional
            Seed of the start block, Default is 0
        verbose : bool, optional
            Flag to print the largest residual per iteration, Default is False

    Returns
    -------
        pairs : list of EigenPair
            Sorted by real part; clusters closer than 1e-10 are flagged
    '''
    if k < 1 or k >= form.n:
        raise ConvergenceFailure('Convergence Failure: need 1 <= k < {}\n'
                                 'Got: {}'.format(form.n, k))
    A = _operator(form, side)
    M = form.M.tocsc()
    m = form.m
    sigma = -form.assumption_constants().garding_alpha
    lu = _factor(A - sigma*M)
    p = min(form.n, k + max(4, k))
    rng = np.random.default_rng(seed)
    Q = np.abs(rng.standard_normal((form.n, p)))
    symmetric = form.is_symmetric
    res = np.full(k, np.inf)
    for it in range(max_iter):
        Z = lu.solve(M @ Q)
        G = Z.T @ (m[:, None]*Z)
        try:
            Rc = cholesky((G + G.T)/2)
        except np.linalg.LinAlgError:
            Rc = np.linalg.qr(np.sqrt(m)[:, None]*Z)[1]
        Q = solve_triangular(Rc, Z.T, trans='T', lower=False).T
        H = Q.T @ (A @ Q)
        if symmetric:
            theta, Y = eigh((H + H.T)/2)
        else:
            theta, Y = eig(H)
        order = np.argsort(np.real(theta), kind='stable')
        theta, Y = theta[order], Y[:, order]
        X = Q @ Y[:, :k]
        res = np.array([np.linalg.norm(A @ X[:, i] - theta[i]*(M @ X[:, i]))
                        / np.linalg.norm(X[:, i]) for i in range(k)])
        if verbose:
            print('iteration {}: max residual {:.3e}'.format(it, res.max()))
        if np.all(res <= tol):
            break
        if not symmetric:
            Q = np.real(Q @ Y)
    else:
        raise ConvergenceFailure('Convergence Failure: subspace iteration did '
                                 'not converge\nResiduals: {}'
                                 .format(np.array2string(res, precision=3)))
    pairs = []
    for i in range(k):
        x = X[:, i]
        if np.iscomplexobj(x):
            x = x*np.exp(-1j*np.angle(x[np.argmax(np.abs(x))]))
        x = _normalize(form, x)
        if i == 0 and np.sum(x) < 0:
            x = -x
        elif i > 0 and x[np.argmax(np.abs(x))] < 0:
            x = -x
        pairs.append(EigenPair(float(np.real(theta[i])), form.to_full(x),
                               float(res[i]), side,
                               float(np.imag(theta[i]))))
    lams = np.array([pr.lam for pr in pairs])
    for i in np.flatnonzero(np.diff(lams) < DEGENERATE_GAP):
        pairs[i].degenerate = pairs[i+1].degenerate = True
        warnings.warn('Degenerate cluster at lambda = {:.10g}'
                      .format(lams[i]), DegenerateClusterWarning)
    return pairs


def green_column(form, pole, lam=None):
    '''Green function column G(., pole) solving K g = e_pole

    Parameters
    ----------
        form : heatprof.forms.DiscreteForm
            Assembled form
        pole : int
            Mesh node index of the pole, must be an interior node
        lam : float, optional
            Principal eigenvalue if already known, Default is None (computed)

    Returns
    -------
        column : GreenColumn
    '''
    pos = np.flatnonzero(form.interior == pole)
    if len(pos) == 0:
        raise SolverError('Solver Error: pole {} is a Dirichlet node'
                          .format(pole))
    lam = principal_eigenpair(form).lam if lam is None else lam
    if lam <= 0:
        raise SingularSystem('Singular System: principal eigenvalue {:.6g} '
                             'is not positive'.format(lam))
    rhs = np.zeros(form.n)
    rhs[pos[0]] = 1.0
    g = _factor(form.K).solve(rhs)
    if np.min(g) <= 0:
        bad = form.interior[np.argmin(g)]
        raise NonPositiveProfile('Non-positive Profile: Green column with '
                                 'pole {} is {:.3e} at node {}'
                                 .format(pole, np.min(g), bad))
    return GreenColumn(int(pole), form.to_full(g))
