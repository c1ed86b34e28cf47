import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatprof.errors import ParseError, AssemblyError
from heatprof.forms import CoefficientField, assemble, assemble_full, \
    estimate_assumption_constants, coercivity_bound, write_triplets
from heatprof.solver import principal_eigenpair


def test_stiffness_annihilates_constants(square_mesh):
    full = assemble_full(square_mesh, CoefficientField())
    rows = np.asarray(full['K_s'].sum(axis=1)).ravel()
    np.testing.assert_allclose(rows, 0, atol=1e-12)


def test_lumped_mass_total(square_mesh, slit_mesh):
    for mesh in (square_mesh, slit_mesh):
        full = assemble_full(mesh, CoefficientField())
        assert full['M'].sum() == pytest.approx(1.0, rel=1e-12)
        assert full['M_consistent'].sum() == pytest.approx(1.0, rel=1e-12)


def test_unit_potential_is_the_mass(square_mesh):
    form = assemble(square_mesh, CoefficientField(c=1.0))
    np.testing.assert_allclose(form.K_c.toarray(), form.M.toarray(),
                               atol=1e-15)


def test_drift_integral(square_mesh):
    #int b.grad(x) dz over the unit square with b = (1, 0)
    full = assemble_full(square_mesh, CoefficientField(b=[1.0, 0.0]))
    x = square_mesh.nodes[:, 0]
    assert np.sum(full['K_b'] @ x) == pytest.approx(1.0, rel=1e-12)
    full = assemble_full(square_mesh, CoefficientField(d=[0.0, 2.0]))
    y = square_mesh.nodes[:, 1]
    assert np.sum(full['K_d'].T @ y) == pytest.approx(2.0, rel=1e-12)


def test_dirichlet_restriction(square_form, square_mesh):
    assert square_form.n == len(square_mesh.interior)
    assert square_form.K.shape == (square_form.n, square_form.n)
    u = np.arange(square_form.n, dtype=float)
    full = square_form.to_full(u)
    assert np.all(full[square_mesh.boundary_mask] == 0)
    np.testing.assert_array_equal(full[square_mesh.interior], u)


def test_symmetry_flags(square_form, drift_form):
    assert square_form.is_symmetric
    assert not drift_form.is_symmetric
    assert CoefficientField(b=[1, 0], d=[1, 0]).is_symmetric
    assert not CoefficientField(b=[1, 0]).is_symmetric


def test_adjoint_is_transpose(drift_form):
    adj = drift_form.adjoint()
    diff = adj.K - drift_form.K.T
    assert abs(diff).max() <= 1e-12
    assert adj.coeffs.raw['d'] == drift_form.coeffs.raw['b']


def test_expression_coefficients(square_mesh):
    field = CoefficientField(c='1 + x', b=['y', 0])
    assert not field.is_constant
    A, B, D, C = field.evaluate([[0.5, 0.25]])
    assert C[0] == pytest.approx(1.5)
    assert B[0, 0] == pytest.approx(0.25)
    np.testing.assert_allclose(A[0], np.eye(2))
    form = assemble(square_mesh, field)
    assert form.K_c.diagonal().min() > 0


def test_from_config():
    field = CoefficientField.from_config({'b': [1, 0], 'lambda_ell': 0.5})
    assert field.lambda_ell == 0.5
    assert CoefficientField.from_config(None).is_constant
    with pytest.raises(ParseError):
        CoefficientField.from_config({'e': 1})
    with pytest.raises(ParseError):
        CoefficientField.from_config([1, 2])


@pytest.mark.parametrize('kwargs', [
    {'c': 'x + z'},
    {'c': 'x +'},
    {'b': [1, 2, 3]},
    {'a': [[1, 0], [0, 'one']]},
])
def test_parse_errors(kwargs):
    with pytest.raises(ParseError):
        CoefficientField(**kwargs)


@pytest.mark.parametrize('a', [
    [[1.0, 0.5], [0.0, 1.0]],
    [[1.0, 0.0], [0.0, -1.0]],
])
def test_bad_diffusion(square_mesh, a):
    with pytest.raises(AssemblyError):
        assemble(square_mesh, CoefficientField(a=a))


@given(st.floats(min_value=0.0, max_value=10.0))
def test_constants_scale_with_drift(s):
    k = estimate_assumption_constants(CoefficientField(b=[s, 0.0]))
    assert k.C5 == pytest.approx(s**2/4, abs=1e-12)
    assert k.C2 == pytest.approx(s**2/4, abs=1e-12)
    assert k.C0 == pytest.approx(s, abs=1e-12)
    assert k.C8 == pytest.approx(k.C2 + k.C3 + k.C5)
    assert k.garding_alpha >= 1


def test_constants_with_ellipticity_bound():
    field = CoefficientField(a=[[2.0, 0.0], [0.0, 4.0]], b=[2.0, 0.0],
                             c=-3.0)
    k = estimate_assumption_constants(field)
    assert k.lambda_ell == pytest.approx(2.0)
    assert k.C5 == pytest.approx(0.5)
    assert k.C3 == pytest.approx(3.5)
    with pytest.raises(AssemblyError):
        estimate_assumption_constants(CoefficientField(c='x'))


def test_coercivity_bound_of_laplacian(square_form, square_pair):
    assert coercivity_bound(square_form) == pytest.approx(square_pair.lam,
                                                          rel=1e-8)


def test_drift_coercivity_below_alpha(drift_form):
    alpha = drift_form.assumption_constants().garding_alpha
    assert coercivity_bound(drift_form) >= -alpha


def test_threaded_assembly_matches(square_mesh):
    field = CoefficientField(b=[1.0, 0.5], c='x*y')
    one = assemble(square_mesh, field)
    many = assemble(square_mesh, field, n_jobs=3)
    assert abs(one.K - many.K).max() <= 1e-14
    assert abs(one.M - many.M).max() <= 1e-15


def test_write_triplets(square_form, tmp_path):
    fn = tmp_path/'K.txt'
    write_triplets(square_form.K, str(fn))
    lines = fn.read_text().splitlines()
    assert lines[0].startswith('#')
    assert len(lines) == square_form.K.nnz + 1
    data = np.loadtxt(str(fn))
    assert data[:, 2].sum() == pytest.approx(square_form.K.sum())


def test_principal_eigenvalue_positive(slit_form):
    assert principal_eigenpair(slit_form).lam > 0
