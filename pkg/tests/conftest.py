import numpy as np
import pytest
from hypothesis import settings, HealthCheck

from heatprof.gallery import gallery
from heatprof.meshing import triangulate
from heatprof.forms import CoefficientField, assemble
from heatprof.solver import principal_eigenpair

settings.register_profile('fast', max_examples=25, deadline=None,
                          suppress_health_check=[
                              HealthCheck.too_slow,
                              HealthCheck.function_scoped_fixture])
settings.load_profile('fast')


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the slow acceptance tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: fine-mesh acceptance test')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def mesh_cache(tmp_path, monkeypatch):
    monkeypatch.setenv('HEATPROF_CACHE', str(tmp_path/'cache'))
    monkeypatch.delenv('HEATPROF_OUT', raising=False)
    monkeypatch.delenv('HEATPROF_THREADS', raising=False)


@pytest.fixture(scope='session')
def square():
    return gallery('square')[1]


@pytest.fixture(scope='session')
def slit_square():
    return gallery('slit-square')[1]


@pytest.fixture(scope='session')
def l_shape():
    return gallery('l-shape')[1]


@pytest.fixture(scope='session')
def square_mesh(square):
    return triangulate(square, 0.1)


@pytest.fixture(scope='session')
def slit_mesh(slit_square):
    return triangulate(slit_square, 0.1)


@pytest.fixture(scope='session')
def square_form(square_mesh):
    return assemble(square_mesh, CoefficientField())


@pytest.fixture(scope='session')
def slit_form(slit_mesh):
    return assemble(slit_mesh, CoefficientField())


@pytest.fixture(scope='session')
def drift_form(slit_mesh):
    return assemble(slit_mesh, CoefficientField(b=[1.0, 0.0]))


@pytest.fixture(scope='session')
def square_pair(square_form):
    return principal_eigenpair(square_form)


@pytest.fixture(scope='session')
def slit_pair(slit_form):
    return principal_eigenpair(slit_form)


def deep_node(mesh, point):
    '''Interior node closest to a point'''
    return mesh.nearest_node(np.asarray(point, float))
