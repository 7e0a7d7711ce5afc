import numpy as np
import pytest

from netepi import SvirsParams, build_laplacian, data_file, load_matrix_market
from netepi.graph import WeightedGraph

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def dfe_params(**kw):
    base = dict(N=1e4, r=0.01, mu=0.001, p=0.002, beta=0.095 / 1e4, xi=0.02, eta=0.03,
                sigma=0.01, gamma=0.11, epsilon=0.05)
    base.update(kw)
    return SvirsParams(**base)


def endemic_params(**kw):
    base = dict(beta=0.65 / 1e4, eta=0.0)
    base.update(kw)
    return dfe_params(**base)


def random_connected_graph(rng, n, extra=None, weighted=True):
    """Random spanning tree plus a few extra edges, weights in [0.2, 3]."""
    edges = {}
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges[(min(a, b), max(a, b))] = None
    extra = n // 2 if extra is None else extra
    for _ in range(extra):
        a, b = rng.choice(n, 2, replace=False)
        edges[(int(min(a, b)), int(max(a, b)))] = None
    out = []
    for a, b in sorted(edges):
        w = float(rng.uniform(0.2, 3.0)) if weighted else 1.0
        out.append((a, b, w))
    return WeightedGraph.from_edges(n, out)


def path_graph(n, w=1.0):
    return WeightedGraph.from_edges(n, [(k, k + 1, w) for k in range(n - 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def minnesota():
    return load_matrix_market(data_file("minnesota.mtx"), data_file("minnesota_coords.txt"))


@pytest.fixture(scope="session")
def minnesota_connected():
    g = load_matrix_market(data_file("minnesota_connected.mtx"), data_file("minnesota_coords.txt"))
    return g, build_laplacian(g)
