import io

import numpy as np
import pytest

from heistream import generators
from heistream.core import Graph
from heistream.graph_io import GraphStream, write_metis


def naive_cut(graph: Graph, assignment) -> int:
    """In-memory edge cut over the undirected edge list."""
    a = np.asarray(assignment)
    pairs, wts = graph.edge_list()
    return sum(w for (u, v), w in zip(pairs.tolist(), wts.tolist()) if a[u] != a[v])


def stream_of(graph: Graph, delta: int, tmp_path=None) -> GraphStream:
    """METIS text of ``graph`` behind a seekable in-memory handle."""
    path = (tmp_path or _scratch()) / f"g{id(graph)}.metis"
    write_metis(graph, path)
    return GraphStream(io.StringIO(path.read_text()), delta, str(path))


def _scratch():
    import pathlib
    import tempfile
    return pathlib.Path(tempfile.mkdtemp())


def _path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def _star(n):
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def _clique(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def _weighted(n, seed):
    rng = np.random.default_rng(seed)
    g = generators.erdos_renyi(n, 6 / n, seed=seed)
    pairs, _ = g.edge_list()
    return Graph.from_edges(n, pairs, weights=rng.integers(1, 9, len(pairs)))


def _isolated(n, seed):
    return generators.erdos_renyi(n, 1.5 / n, seed=seed)


def build_corpus():
    corpus = {}
    for s in range(6):
        corpus[f"rgg_{s}"] = generators.random_geometric(600 + 150 * s, seed=s)
    for s in range(5):
        corpus[f"er_{s}"] = generators.erdos_renyi(300 + 100 * s, 0.02, seed=s)
    for r, c in [(10, 10), (20, 30), (32, 32), (7, 50)]:
        corpus[f"grid_{r}x{c}"] = generators.grid(r, c)
    corpus["path_200"] = _path(200)
    corpus["star_150"] = _star(150)
    corpus["clique_40"] = _clique(40)
    corpus["weighted_400"] = _weighted(400, 1)
    corpus["weighted_900"] = _weighted(900, 2)
    corpus["sparse_isolated_500"] = _isolated(500, 3)
    corpus["rgg_large"] = generators.random_geometric(1 << 13, seed=11)
    return corpus


CORPUS = build_corpus()


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


# one line per acceptance criterion, printed after the run
REPORT: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
