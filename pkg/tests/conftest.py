import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def enumerate_matching_cost(X, Y, p):
    """Minimum over every permutation, written independently of the package."""
    n = len(X)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        c = sum(np.linalg.norm(X[i] - Y[perm[i]]) ** p for i in range(n))
        best = min(best, c)
    return best


def enumerate_tour_cost(X, p):
    """Minimum over all (n-1)! orders starting at vertex 0."""
    n = len(X)
    best = np.inf
    for rest in itertools.permutations(range(1, n)):
        order = (0,) + rest
        c = sum(np.linalg.norm(X[order[k]] - X[order[(k + 1) % n]]) ** p for k in range(n))
        best = min(best, c)
    return best


def enumerate_alternating_cost(X, Y, p):
    """Minimum over all X orders (x_0 first) and all Y orders."""
    n = len(X)
    best = np.inf
    for xr in itertools.permutations(range(1, n)):
        xo = (0,) + xr
        for yo in itertools.permutations(range(n)):
            c = 0.0
            for k in range(n):
                c += np.linalg.norm(X[xo[k]] - Y[yo[k]]) ** p
                c += np.linalg.norm(Y[yo[k]] - X[xo[(k + 1) % n]]) ** p
            best = min(best, c)
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
