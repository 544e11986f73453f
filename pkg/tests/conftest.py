import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from gridforest.graph import EdgeSelection, make_network
from gridforest.milp import HighsSession, MilpModel
from gridforest.radiality import add_subgraph_coupling, build_radiality


def random_connected_edges(rng, n_nodes, max_edges):
    """Random spanning tree on 1..n plus extra distinct pairs, at most ``max_edges`` edges."""
    order = [int(x) + 1 for x in rng.permutation(n_nodes)]
    edges = [(order[k], order[int(rng.integers(0, k))]) for k in range(1, n_nodes)]
    pairs = [p for p in itertools.combinations(range(1, n_nodes + 1), 2)]
    rng.shuffle(pairs)
    have = {frozenset(e) for e in edges}
    extra = int(rng.integers(0, max_edges - len(edges) + 1))
    for a, b in pairs:
        if extra == 0:
            break
        if frozenset((a, b)) not in have:
            edges.append((int(a), int(b)))
            have.add(frozenset((a, b)))
            extra -= 1
    return edges


def random_graphs(count=20, seed=2024, lo=4, hi=8, max_edges=10):
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(count):
        n = int(rng.integers(lo, hi + 1))
        out.append(make_network(n, random_connected_edges(rng, n, max_edges)))
    return out


@st.composite
def connected_graphs(draw, min_nodes=2, max_nodes=6, max_edges=9):
    n = draw(st.integers(min_nodes, max_nodes))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.Generator(np.random.PCG64(seed))
    return make_network(n, random_connected_edges(rng, n, max(max_edges, n - 1)))


@st.composite
def multigraphs(draw, max_nodes=5, max_edges=8):
    """Arbitrary (possibly disconnected) multigraphs without self-loops."""
    n = draw(st.integers(1, max_nodes))
    if n == 1:
        return make_network(1, [])
    pair = st.tuples(st.integers(1, n), st.integers(1, n)).filter(lambda p: p[0] != p[1])
    return make_network(n, draw(st.lists(pair, max_size=max_edges)))


def feasible_alpha_set(net, formulation, root=1):
    """Integer-feasible alpha vectors of tree + coupling, by fixing every 0/1 alpha in turn."""
    model = MilpModel("enum")
    h = build_radiality(model, net, root, formulation)
    add_subgraph_coupling(model, h)
    model.set_objective({}, "min")
    session = HighsSession(model)
    cols = [h.alpha[b.id] for b in net.branches]
    found = set()
    for bits in itertools.product((0, 1), repeat=len(cols)):
        for v, x in zip(cols, bits):
            session.set_bounds(v, x, x)
        if session.solve().optimal:
            found.add(EdgeSelection(bits))
    return found


@pytest.fixture(scope="session")
def acceptance_graphs():
    return random_graphs()


@pytest.fixture(scope="session")
def ieee33():
    from gridforest.data_io import bundled_network_path, load_network

    return load_network(bundled_network_path("ieee33"))


_VERDICTS: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion; shown in the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
