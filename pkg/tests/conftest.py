"""
Fixtures compartidas: modelos de referencia y fábrica de modelos aleatorios
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from hmmqp.core.model import (
    DiscreteOutputModel,
    GaussianOutputModel,
    HMMSpec,
    TransitionMatrix,
    random_transition_matrix,
    toy4_spec,
)
from hmmqp.utils.logger import RunLogger

GOLDEN_DIR = Path(__file__).parent / "golden"
TOY4_PI = np.array([6.0, 5.0, 4.0, 2.0]) / 17.0


@pytest.fixture
def toy4():
    return toy4_spec()


@pytest.fixture
def discrete3():
    A = [
        [0.8, 0.1, 0.2],
        [0.1, 0.7, 0.3],
        [0.1, 0.2, 0.5],
    ]
    B = [
        [0.6, 0.1, 0.1],
        [0.2, 0.6, 0.1],
        [0.1, 0.2, 0.2],
        [0.1, 0.1, 0.6],
    ]
    return HMMSpec(TransitionMatrix(A), DiscreteOutputModel(B))


@pytest.fixture
def two_state_gaussian():
    A = [[0.9, 0.2], [0.1, 0.8]]
    return HMMSpec(TransitionMatrix(A), GaussianOutputModel(((-2.0, 1.0), (2.0, 1.0))))


def random_spec(rng: np.random.Generator, n: int, discrete: bool, m: int = None) -> HMMSpec:
    """
    Modelo aleatorio bien condicionado: columnas de A con masa mínima y
    salidas bien separadas
    """
    A = 0.5 * random_transition_matrix(n, rng) + 0.5 / n
    A = A / A.sum(axis=0)
    if discrete:
        m = m or n + 1
        B = 0.3 * rng.dirichlet(np.ones(m), size=n).T
        B[np.arange(n), np.arange(n)] += 0.7
        return HMMSpec(TransitionMatrix(A), DiscreteOutputModel(B / B.sum(axis=0)))
    mu = np.cumsum(rng.uniform(3.0, 5.0, size=n))
    sigma2 = rng.uniform(0.5, 1.5, size=n)
    return HMMSpec(TransitionMatrix(A), GaussianOutputModel(tuple(zip(mu.tolist(), sigma2.tolist()))))


@pytest.fixture
def spec_factory():
    return random_spec


@pytest.fixture(autouse=True)
def _reset_logger_cache():
    yield
    RunLogger.reset_logger()
