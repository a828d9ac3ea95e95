import json

import pytest
from click.testing import CliRunner

from app import create_cli
from app.config import TestingConfig
from app.models.bethe import BetheProblem
from app.models.calgebra import CPoly, poly_roots
from app.utils.helpers import canonical_sort


# =============================================================================
# Reference instances
# =============================================================================

@pytest.fixture
def two_point_problem():
    return BetheProblem((0, 1), (1, 1), 1)


@pytest.fixture
def three_point_problem():
    return BetheProblem((0, 1, 2), (1, 1, 1), 1)


@pytest.fixture
def pullback_instance():
    """Z = {0, 1, 2}, W = {4}, s = (1, 1, 1); every pole carries weight 1.

    With one root the Bethe system reads P'(γ) = 0 for P = z(z-1)(z-2)(z-4).
    """
    derivative = CPoly((-8, 28, -21, 4))
    return {
        'Z': [0j, 1 + 0j, 2 + 0j],
        'W': [4 + 0j],
        's': [1, 1, 1],
        'gammas': canonical_sort(poly_roots(derivative)),
    }


@pytest.fixture
def pullback_problem(pullback_instance):
    return BetheProblem(tuple(pullback_instance['Z']), (1, 1, 1), 1, tuple(pullback_instance['W']))


# =============================================================================
# CLI
# =============================================================================

@pytest.fixture
def config():
    return TestingConfig


@pytest.fixture
def cli(config):
    return create_cli(config)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def write_json(tmp_path):
    def _write(name, data):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)
    return _write


@pytest.fixture
def read_json():
    def _read(path):
        with open(path) as handle:
            return json.load(handle)
    return _read
