"""Shared fixtures: one solved (mu=2, b=1) birth-death stack per session.

The stationary table, harmonic table, and transformed chain are expensive
enough to build once and pure enough to share; tests must not mutate them.
"""

import numpy as np
import pytest

from lamperti import (harmonic_solve, make_birth_death, rate,
                      stationary_skip_free, transform)

TRUNC_N = 2000


@pytest.fixture(scope="session")
def bd21():
    return make_birth_death(2.0, 1.0)


@pytest.fixture(scope="session")
def rf21(bd21):
    return rate(bd21)


@pytest.fixture(scope="session")
def stat21(bd21):
    return stationary_skip_free(bd21, TRUNC_N)


@pytest.fixture(scope="session")
def harm21(bd21, rf21):
    return harmonic_solve(bd21, rf21, n=TRUNC_N)


@pytest.fixture(scope="session")
def tc21(bd21, harm21, stat21):
    return transform(bd21, harm21, stat=stat21)


@pytest.fixture()
def diag_grid():
    return np.arange(5, TRUNC_N + 1, dtype=np.int64)
