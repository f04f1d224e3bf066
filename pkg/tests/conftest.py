import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_membership(rng, n, K):
    """Labels covering all K communities when n >= K."""
    from sbbm.model import Membership

    labels = rng.integers(0, K, size=n)
    labels[:K] = np.arange(K) if n >= K else labels[:K]
    return Membership(rng.permutation(labels), K)


def random_adjacency(rng, n, density=0.5, diagonal_policy="exclude"):
    from sbbm.model import SignedAdjacency

    upper = np.triu(rng.choice([-1, 0, 1], size=(n, n), p=[density / 2, 1 - density, density / 2]), k=1)
    a = upper + upper.T
    if diagonal_policy == "include":
        a[np.diag_indices(n)] = rng.choice([-1, 0, 1], size=n)
    return SignedAdjacency(a, diagonal_policy)


def random_params(rng, n, scale=1.0):
    from sbbm.model import NodeParams

    return NodeParams(*(scale * rng.normal(size=n) for _ in range(4)))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
