import numpy as np
import pytest

from projfdi.factorization import normalized_gains
from projfdi.harness import benchmark_plant
from projfdi.statespace import StateSpaceModel


def make_random_plant(seed, n=None, p=None, m=None, rho=(0.3, 0.9), d_scale=0.4):
    """Random stable plant with reproducible dimensions and decent margins."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7)) if n is None else n
    p = int(rng.integers(1, 3)) if p is None else p
    m = int(rng.integers(1, 3)) if m is None else m
    A = rng.standard_normal((n, n))
    A *= rng.uniform(*rho) / max(np.abs(np.linalg.eigvals(A)).max(), 1e-12)
    return StateSpaceModel(A, rng.standard_normal((n, p)),
                           rng.standard_normal((m, n)),
                           d_scale * rng.standard_normal((m, p)))


@pytest.fixture(scope="session")
def s1():
    """Scalar reference plant 1/(z - 0.5)."""
    return StateSpaceModel([[0.5]], [[1.0]], [[1.0]], [[0.0]])


@pytest.fixture(scope="session")
def s1_rep(s1):
    return normalized_gains(s1)


@pytest.fixture(scope="session")
def bench():
    return benchmark_plant()


@pytest.fixture(scope="session")
def bench_rep(bench):
    return normalized_gains(bench)
