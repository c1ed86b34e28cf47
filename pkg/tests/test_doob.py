import numpy as np
import pytest

from heatprof.errors import NonPositiveProfile, IdentityViolation, \
    EmptyBall, PoleExclusionError
from heatprof.gallery import gallery
from heatprof.geometry import inner_ball
from heatprof.meshing import triangulate
from heatprof.solver import EigenPair, green_column, principal_eigenpair
from heatprof.doob import Profile, make_profile, transform, \
    form_discrepancy, weighted_volume, weighted_poincare, \
    neumann_poincare_constant, profile_boundary_control, IDENTITY_TOL, \
    POLE_EXCLUSION, PROFILE_TOL
from conftest import deep_node


@pytest.fixture(scope='module')
def eigen_profile(square_pair, square_mesh):
    return make_profile(square_pair, square_mesh)


@pytest.fixture(scope='module')
def weighted(square_form, eigen_profile):
    return transform(square_form, eigen_profile)


@pytest.fixture(scope='module')
def green_profile(square_form, square_mesh, square_pair):
    pole = deep_node(square_mesh, [0.5, 0.5])
    g = green_column(square_form, pole, lam=square_pair.lam)
    return make_profile(g, square_mesh)


def test_profiles(eigen_profile, green_profile, square_pair, square_mesh):
    assert eigen_profile.kind == 'eigenfunction'
    assert eigen_profile.gamma == pytest.approx(-square_pair.lam)
    assert eigen_profile.pole_node is None
    assert green_profile.kind == 'green'
    assert green_profile.gamma == 0.0
    assert green_profile.exclusion_radius == \
        pytest.approx(POLE_EXCLUSION*square_mesh.h_max)


def test_eigen_transform_identity_and_markov(weighted):
    assert weighted.summary['max_rel_err'] <= IDENTITY_TOL
    assert weighted.summary['markov_defect'] <= 1e-8
    n = weighted.M_h.shape[0]
    assert weighted.K_h.shape == (n, n)


def test_transformed_generator_kills_constants(weighted, square_pair,
                                               square_form):
    #K_h 1 = D (K - lambda M) h, the scaled eigen-residual
    h = square_pair.phi[square_form.interior]
    ones = np.ones(len(h))
    bound = np.max(h)*square_pair.residual*np.linalg.norm(h)
    assert np.linalg.norm(weighted.K_h @ ones) <= bound*(1 + 1e-6) + 1e-12


def test_green_transform_identity(square_form, green_profile):
    out = transform(square_form, green_profile)
    assert out.summary['max_rel_err'] <= IDENTITY_TOL
    assert out.summary['markov_defect'] is None


def test_transform_without_check(square_form, eigen_profile):
    out = transform(square_form, eigen_profile, check=False)
    assert out.summary == {'max_rel_err': None, 'markov_defect': None,
                           'profile_residual': None}


def test_wrong_gamma_rejected(square_form, eigen_profile):
    shifted = Profile('eigenfunction', eigen_profile.h,
                      eigen_profile.gamma + 50.0)
    with pytest.raises(IdentityViolation):
        transform(square_form, shifted)
    with pytest.raises(IdentityViolation):
        transform(square_form, Profile('green', eigen_profile.h, 0.0))


def test_profile_residuals(weighted, square_form, green_profile):
    assert weighted.summary['profile_residual'] <= PROFILE_TOL
    out = transform(square_form, green_profile)
    assert out.summary['profile_residual'] <= PROFILE_TOL


def test_drift_transform(drift_form, slit_mesh):
    profile = make_profile(principal_eigenpair(drift_form), slit_mesh)
    out = transform(drift_form, profile)
    assert out.summary['max_rel_err'] <= IDENTITY_TOL


def test_form_discrepancy(weighted):
    gap = form_discrepancy(weighted)
    assert np.isfinite(gap)
    assert 0 <= gap < 1


def test_weighted_volume_doubles(eigen_profile, square, square_mesh):
    table = weighted_volume(eigen_profile, square, square_mesh, [0.5, 0.0],
                            [0.1, 0.2])
    assert np.all(table.volumes > 0)
    assert np.all(table.ratios > 1)
    frame = table.to_frame()
    assert list(frame.columns) == ['r', 'V_r', 'V_2r', 'ratio']
    np.testing.assert_allclose(table.volumes[1], table.volumes_2r[0])


def test_weighted_volume_full_domain(eigen_profile, square, square_mesh,
                                     square_form):
    #A ball covering the square carries the whole h^2 mass
    table = weighted_volume(eigen_profile, square, square_mesh, [0.5, 0.5],
                            [2.0], n_sub=6)
    I = square_form.interior
    lumped = eigen_profile.h[I] @ (square_form.m*eigen_profile.h[I])
    assert table.volumes[0] == pytest.approx(lumped, rel=0.1)


def test_weighted_volume_empty(eigen_profile, square, square_mesh):
    with pytest.raises(EmptyBall):
        weighted_volume(eigen_profile, square, square_mesh, [0.123, 0.456],
                        [1e-6])


def test_pole_exclusion(green_profile, square, square_mesh):
    with pytest.raises(PoleExclusionError):
        weighted_volume(green_profile, square, square_mesh, [0.5, 0.5],
                        [0.1])
    table = weighted_volume(green_profile, square, square_mesh, [0.0, 0.0],
                            [0.05])
    assert np.all(table.volumes > 0)


def test_non_positive_profile(square_pair, square_mesh):
    flipped = EigenPair(square_pair.lam, -square_pair.phi, 0.0)
    with pytest.raises(NonPositiveProfile):
        make_profile(flipped, square_mesh)
    with pytest.raises(NonPositiveProfile):
        make_profile('phi', square_mesh)


def test_profile_must_vanish_on_boundary(square_form, square_mesh):
    flat = Profile('eigenfunction', np.ones(square_mesh.n_nodes), 0.0)
    with pytest.raises(IdentityViolation):
        transform(square_form, flat)
    short = Profile('eigenfunction', np.ones(3), 0.0)
    with pytest.raises(IdentityViolation):
        transform(square_form, short)


def test_weighted_poincare(weighted, square, square_mesh):
    ball = inner_ball(square, square_mesh, [0.5, 0.5], 0.4)
    P = weighted_poincare(weighted, ball)
    assert P > 0
    with pytest.raises(EmptyBall):
        small = inner_ball(square, square_mesh, [0.5, 0.5], 0.06)
        weighted_poincare(weighted, small)


def test_profile_boundary_control(eigen_profile, square, square_mesh):
    K1 = profile_boundary_control(eigen_profile, square, square_mesh,
                                  [0.5, 0.0], 0.3)
    assert np.isfinite(K1)
    assert K1 > 1


def test_neumann_constant_of_square_cell():
    #Unit square with unit weight: nu_1 = pi^2
    square = gallery('square')[1]
    mesh = triangulate(square, 0.1)
    P = neumann_poincare_constant(mesh, np.arange(len(mesh.triangles)),
                                  np.ones(len(mesh.triangles)), 1.0)
    assert P == pytest.approx(1/np.pi**2, rel=0.05)


@pytest.mark.slow
def test_neumann_constant_of_disc():
    #First nonzero Neumann eigenvalue of the unit disc is j'_{1,1}^2
    disc = gallery('disc')[1]
    mesh = triangulate(disc, 0.05)
    P = neumann_poincare_constant(mesh, np.arange(len(mesh.triangles)),
                                  np.ones(len(mesh.triangles)), 1.0)
    assert P == pytest.approx(1/1.8411837813**2, rel=0.05)
