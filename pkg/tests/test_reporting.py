import json
import numpy as np
import pandas as pd
import pytest
from openpyxl import load_workbook

from heatprof.errors import ParseError
from heatprof.reporting import Check, Report, REPORT_KEYS, evaluate_check, \
    config_hash, write_json, write_csv, nodal_frame, plot_nodal, \
    write_workbook, write_manifest, verify_dir


def test_evaluate_check():
    assert evaluate_check(1.0, 0.0, 2.0)
    assert evaluate_check(5.0)
    assert not evaluate_check(3.0, upper=2.0)
    assert not evaluate_check(-1.0, lower=0.0)
    assert not evaluate_check(np.nan)
    assert not evaluate_check(np.inf, lower=0.0)
    assert not evaluate_check(None)
    assert Check('x', 0.5, 0.0, 1.0).passed
    assert not Check('x', np.nan, 0.0, 1.0).passed


def test_config_hash_ignores_key_order():
    a = {'domain': 'square', 'h_max': 0.05, 'times': [0.1, 0.2]}
    b = {'times': [0.1, 0.2], 'h_max': 0.05, 'domain': 'square'}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(dict(a, h_max=0.1))


def test_non_finite_written_as_null(tmp_path):
    fn = tmp_path/'doc.json'
    write_json({'a': np.nan, 'b': [1.0, np.inf], 'c': np.float64(2.0),
                'd': np.arange(2)}, str(fn))
    doc = json.loads(fn.read_text())
    assert doc == {'a': None, 'b': [1.0, None], 'c': 2.0, 'd': [0, 1]}


def _report_dir(tmp_path, square_mesh):
    rep = Report('eigen', 'abc', square_mesh.stats())
    rep.check('residual', 1e-10, upper=1e-8)
    rep.check('lambda', 19.8, lower=0.0)
    rep.add(lam=19.8)
    write_csv(pd.DataFrame({'k': [1, 2, 3], 'lambda': [19.8, 49.6, 49.7]}),
              str(tmp_path), 'eigenvalues', rep)
    rep.write(str(tmp_path))
    return tmp_path/'eigen.json'


def test_report_document(tmp_path, square_mesh):
    fn = _report_dir(tmp_path, square_mesh)
    doc = json.loads(fn.read_text())
    assert all(k in doc for k in REPORT_KEYS)
    assert doc['tables'] == ['eigenvalues.csv']
    assert doc['results']['lam'] == 19.8
    assert [c['passed'] for c in doc['checks']] == [True, True]


def test_passed_flag(square_mesh):
    rep = Report('doob', 'abc')
    rep.check('identity', 1e-12, upper=1e-10)
    assert rep.passed
    rep.check('markov', None, upper=1e-8)
    assert not rep.passed


def test_verify_dir(tmp_path, square_mesh):
    _report_dir(tmp_path, square_mesh)
    write_manifest(str(tmp_path), [], 'abc')
    checks = verify_dir(str(tmp_path), verbose=False)
    names = [c.name for c in checks]
    assert 'eigen: schema' in names
    assert 'eigenvalues: sorted' in names
    assert all(c.passed for c in checks)


def test_verify_dir_flags_tampering(tmp_path, square_mesh):
    fn = _report_dir(tmp_path, square_mesh)
    doc = json.loads(fn.read_text())
    doc['checks'][0]['value'] = 1.0
    fn.write_text(json.dumps(doc))
    checks = {c.name: c for c in verify_dir(str(tmp_path), verbose=False)}
    assert not checks['eigen: residual'].passed
    assert not checks['eigen: residual consistent'].passed


def test_verify_dir_rechecks_csv(tmp_path, square_mesh):
    _report_dir(tmp_path, square_mesh)
    pd.DataFrame({'k': [1, 2], 'lambda': [49.6, 19.8]}).to_csv(
        tmp_path/'eigenvalues.csv', index=False)
    checks = {c.name: c for c in verify_dir(str(tmp_path), verbose=False)}
    assert not checks['eigenvalues: sorted'].passed


def test_verify_dir_needs_directory(tmp_path):
    with pytest.raises(ParseError):
        verify_dir(str(tmp_path/'missing'), verbose=False)


def test_workbook(tmp_path, square_mesh):
    assert write_workbook(str(tmp_path)) is None
    _report_dir(tmp_path, square_mesh)
    write_csv(nodal_frame(square_mesh, square_mesh.nodes[:, 0], 'phi'),
              str(tmp_path), 'phi')
    fn = write_workbook(str(tmp_path))
    assert load_workbook(fn).sheetnames == ['eigenvalues', 'phi']


def test_plot_nodal(tmp_path, square_mesh):
    fn = plot_nodal(square_mesh, square_mesh.nodes[:, 0] + 0.1,
                    str(tmp_path/'phi.svg'), title='phi', log=True)
    assert (tmp_path/'phi.svg').read_text().lstrip().startswith('<?xml')
    assert fn.endswith('phi.svg')


def test_manifest(tmp_path):
    fn = write_manifest(str(tmp_path), [{'experiment': 'heat',
                                         'error': 'SolverError'}], 'abc')
    doc = json.loads(open(fn).read())
    assert doc['config_hash'] == 'abc'
    assert doc['failures'][0]['experiment'] == 'heat'
