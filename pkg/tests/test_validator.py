from dataclasses import replace
import numpy as np
import pytest

from heatprof.errors import FitError, InsufficientSamples, \
    CylinderOutOfRange, EmptyBall
from heatprof.solver import heat_kernel_table, adjoint_principal, eigenpairs
from heatprof.validator import EnvelopeParams, predicted_rate, envelope, \
    sample_pairs, fit_envelope_constants, check_ultracontractivity, \
    ultracontractivity_rate, measure_convergence, \
    check_eigenfunction_bound, check_phi, check_ehi, check_bhp, bisector, \
    corner_exponent, holder_seminorm
from conftest import deep_node


@pytest.fixture(scope='module')
def table(square_form, square):
    times = np.geomspace(1e-3, square.diam_inner**2, 12)
    return heat_kernel_table(square_form, times)


@pytest.fixture(scope='module')
def star(square_form, square_pair):
    return adjoint_principal(square_form, square_pair)


@pytest.fixture(scope='module')
def gap(table):
    mu = np.sort(np.real(table.mu))
    return mu[1] - mu[0]


def test_predicted_rate():
    assert predicted_rate(0.5, 1.0, 1.0) == pytest.approx(np.log(2))
    assert predicted_rate(0.5, 1.0, 2.0) == pytest.approx(np.log(2)/4)
    assert predicted_rate(1.0, 1.0, 1.0) == np.inf


def test_envelope_params(square_pair):
    with pytest.raises(FitError):
        EnvelopeParams(0.0, 'upper', square_pair.phi, square_pair.lam)
    with pytest.raises(FitError):
        EnvelopeParams(0.25, 'middle', square_pair.phi, square_pair.lam)


def test_envelope_value(square_pair, square, square_mesh):
    params = EnvelopeParams(0.25, 'upper', square_pair.phi, square_pair.lam)
    near = envelope(params, square, square_mesh, 0.01, [0.5, 0.5],
                    [0.55, 0.5])
    far = envelope(params, square, square_mesh, 0.01, [0.5, 0.5],
                   [0.9, 0.5])
    assert near > far > 0
    with pytest.raises(FitError):
        envelope(params, square, square_mesh, 0.0, [0.5, 0.5], [0.5, 0.5])


def test_sample_pairs(square, square_mesh):
    pairs = sample_pairs(square, square_mesh, 120, seed=4)
    assert pairs.shape == (120, 2)
    np.testing.assert_array_equal(pairs[::10, 0], pairs[::10, 1])
    assert not np.any(square_mesh.boundary_mask[pairs])
    again = sample_pairs(square, square_mesh, 120, seed=4)
    np.testing.assert_array_equal(pairs, again)


def test_fit_envelope_constants(table, square, square_mesh, square_pair):
    pairs = sample_pairs(square, square_mesh, 200, seed=0)
    fit = fit_envelope_constants(table, square, square_mesh,
                                 square_pair.phi, pairs)
    assert fit.a2_emp > 0
    assert fit.A1_emp >= fit.a2_emp
    assert fit.spread >= 1
    assert fit.sample_count == 200
    assert fit.t_range[1] <= square.diam_inner**2*(1 + 1e-12)
    assert set(fit.to_dict()) >= {'A1_emp', 'a2_emp', 'spread'}


def test_fit_from_columns(table, square, square_mesh, square_pair):
    pairs = sample_pairs(square, square_mesh, 200, seed=2)
    columns = [table.column(y) for y in np.unique(pairs[:, 1])]
    from_columns = fit_envelope_constants(columns, square, square_mesh,
                                          square_pair.phi, pairs)
    from_table = fit_envelope_constants(table, square, square_mesh,
                                        square_pair.phi, pairs)
    assert from_columns.A1_emp == pytest.approx(from_table.A1_emp, rel=1e-8)
    assert from_columns.a2_emp == pytest.approx(from_table.a2_emp, rel=1e-8)


def test_fit_needs_pairs(table, square, square_mesh, square_pair):
    pairs = sample_pairs(square, square_mesh, 200, seed=0)[:10]
    with pytest.raises(InsufficientSamples):
        fit_envelope_constants(table, square, square_mesh, square_pair.phi,
                               pairs)


def test_ultracontractivity(table, square_pair, star):
    report = check_ultracontractivity(table, square_pair, star,
                                      [0.5, 1.0, 2.0, 3.0], 1.0)
    assert report.a3_emp > 0
    assert report.A3_emp >= report.a3_emp
    assert len(report.to_frame()) == 4
    with pytest.raises(FitError):
        check_ultracontractivity(table, square_pair, star, [0.1, 0.2], 1.0)


def test_convergence_rate_matches_gap(table, square_pair, star, gap,
                                      square):
    R = min(square.diam_inner, 1/np.sqrt(gap))
    times = np.linspace(1, 25, 60)/gap
    uc = check_ultracontractivity(table, square_pair, star, times, R)
    conv = measure_convergence(table, square_pair, star, times, R,
                               uc.a3_emp, uc.A3_emp,
                               lam2=square_pair.lam + gap)
    assert conv.omega_measured == pytest.approx(gap, rel=0.1)
    assert conv.omega_spec == pytest.approx(gap)
    assert conv.w_integral == pytest.approx(1.0, abs=1e-6)
    assert conv.omega_predicted > 0
    assert conv.window[0] < conv.window[1]
    assert np.min(conv.w) >= uc.a3_emp*(1 - 1e-9)


def test_convergence_needs_tail(table, square_pair, star, gap):
    times = np.linspace(0.1, 1, 5)/gap
    with pytest.raises(FitError):
        measure_convergence(table, square_pair, star, times, 1.0, 0.5, 1.0)


def test_ultracontractivity_rate(table, square_pair, star):
    times = np.geomspace(1e-2, 1.0, 8)
    c, nu = ultracontractivity_rate(table, square_pair, star, times)
    assert np.all(c > 0)
    assert np.isfinite(nu)
    assert c[0] > c[-1]


def test_eigenfunction_bound(square_form, square_pair, square,
                             square_mesh):
    pairs = eigenpairs(square_form, 4)
    report = check_eigenfunction_bound(pairs[1:], square_pair, square,
                                       square_mesh)
    assert len(report.rows) == 3
    for row in report.rows:
        assert row['A5_emp'] > 0
        assert row['max_ratio'] >= row['max_ratio_deep']
        assert not row['clamped']
    assert np.isfinite(report.C)
    with pytest.raises(FitError):
        check_eigenfunction_bound([square_pair], square_pair, square,
                                  square_mesh)


def test_harnack_ratio(table, square_mesh, square):
    src = deep_node(square_mesh, [0.5, 0.5])
    times = np.linspace(0.01, 0.2, 40)
    col = replace(table, times=times).column(src)
    cylinder = (square_mesh.nodes[src], 0.2, 0.1, 1.0, 0.5)
    report = check_phi(col, square, square_mesh, cylinder)
    assert np.isfinite(report.H_emp)
    assert report.H_emp > 0
    assert report.n_minus > 0 and report.n_plus > 0
    same = check_phi((times, col.values), square, square_mesh, cylinder)
    assert same.H_emp == pytest.approx(report.H_emp)
    with pytest.raises(CylinderOutOfRange):
        check_phi(col, square, square_mesh,
                  (square_mesh.nodes[src], 0.2, 0.01, 1.0, 0.5))


def test_interior_cylinder_must_fit(table, square_mesh, square, square_pair):
    #B(x, 0.6) around the centre of the unit square crosses the boundary
    src = deep_node(square_mesh, [0.5, 0.5])
    times = np.linspace(0.01, 0.2, 40)
    col = replace(table, times=times).column(src)
    cylinder = (square_mesh.nodes[src], 0.3, 0.18, 1.0, 0.5)
    with pytest.raises(CylinderOutOfRange):
        check_phi(col, square, square_mesh, cylinder)
    weighted = check_phi(col, square, square_mesh, cylinder,
                         weight=square_pair.phi)
    assert weighted.H_emp > 0


def test_elliptic_harnack(square_pair, square, square_mesh):
    H = check_ehi(square_pair.phi, square, square_mesh, [0.5, 0.5], 0.3)
    assert H >= 1
    with pytest.raises(EmptyBall):
        check_ehi(square_pair.phi, square, square_mesh, [0.5, 0.5], 1e-6)


def test_boundary_harnack_of_proportional_solutions(square_pair, square,
                                                    square_mesh):
    u = square_pair.phi
    assert check_bhp(u, 2*u, square, square_mesh, [0.5, 0.0], 0.3) == \
        pytest.approx(1.0, abs=1e-12)


def test_bisectors(square, slit_square, l_shape):
    np.testing.assert_allclose(bisector(square, [0.0, 0.0]),
                               np.array([1, 1])/np.sqrt(2), atol=1e-12)
    np.testing.assert_allclose(bisector(slit_square, [0.5, 0.5]), [0, 1],
                               atol=1e-12)
    np.testing.assert_allclose(bisector(l_shape, [0.5, 0.5]),
                               -np.array([1, 1])/np.sqrt(2), atol=1e-12)
    with pytest.raises(FitError):
        bisector(square, [0.5, 0.5])


def test_corner_exponent_of_linear_function(square, square_mesh):
    phi = square_mesh.nodes.sum(axis=1)
    slope, prefactor = corner_exponent(phi, square, square_mesh, [0.0, 0.0],
                                       0.01, 0.1)
    assert slope == pytest.approx(1.0, abs=1e-9)
    assert prefactor == pytest.approx(np.sqrt(2), rel=1e-9)


def test_holder_seminorm(square_mesh):
    u = square_mesh.nodes[:, 0]
    assert holder_seminorm(u, square_mesh, alpha=1.0) == \
        pytest.approx(1.0, abs=1e-12)
    assert holder_seminorm(u, square_mesh, alpha=0.5) <= 1.0
    #A jump on the boundary is invisible to the interior edges
    jump = np.where(square_mesh.boundary_mask, 100.0, u)
    inside = ~square_mesh.boundary_mask
    assert 0 < holder_seminorm(jump, square_mesh, 1.0, inside) <= 1 + 1e-12
    with pytest.raises(EmptyBall):
        holder_seminorm(u, square_mesh, 1.0, np.zeros(len(u), bool))
