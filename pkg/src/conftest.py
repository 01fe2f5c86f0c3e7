import pytest

from src.kelvin import LameParams
from src.oracle import QuadratureRule
from src.transmission import ShellGeometry


@pytest.fixture
def unit_lame():
    return LameParams(1.0, 1.0)


@pytest.fixture
def lame_21():
    return LameParams(2.0, 1.0)


@pytest.fixture(params=[(1.0, 1.0), (2.0, 1.0)], ids=['lame11', 'lame21'])
def lame(request):
    return LameParams(*request.param)


@pytest.fixture
def shell():
    return ShellGeometry(1.0, 2.0)


@pytest.fixture
def sphere_rule():
    return QuadratureRule(24, 48)


@pytest.fixture
def polar_rule():
    return QuadratureRule(64, 128)
