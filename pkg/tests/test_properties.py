"""Randomized structural properties on small graphs."""
import numpy as np
from hypothesis import given, settings, strategies as st

from contactlab.graph import bfs_distances, build_graph, explicit, lattice
from contactlab.graphical import Configuration, dual_evolve, evolve, reaches, sample_graphical

SEGMENTS = {r: build_graph(lattice(1, r)) for r in (1, 2, 3, 4)}
GRID = build_graph(lattice(2, 1))

graphs = st.sampled_from([*SEGMENTS.values(), GRID])
lams = st.floats(0.0, 4.0)
seeds = st.integers(0, 2 ** 32)


def _subset(data, n):
    return np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)), dtype=np.uint8)


def _grid(*trs):
    ts = np.union1d(np.concatenate([t.times for t in trs]), [0.0])
    return [t.states_at(ts) for t in trs]


@settings(max_examples=60, deadline=None)
@given(g=graphs, lam=lams, seed=seeds, data=st.data())
def test_additive_and_monotone(g, lam, seed, data):
    A, B = _subset(data, g.n), _subset(data, g.n)
    s = sample_graphical(g, (0.0, 3.0), lam, seed)
    ta = evolve(s, Configuration(A, 0.0))
    tb = evolve(s, Configuration(B, 0.0))
    tu = evolve(s, Configuration(A | B, 0.0))
    sa, sb, su = _grid(ta, tb, tu)
    assert (su == np.maximum(sa, sb)).all()
    assert (sa <= su).all() and (sb <= su).all()


@settings(max_examples=60, deadline=None)
@given(g=graphs, lam=lams, seed=seeds, data=st.data())
def test_duality_identity_on_shared_sample(g, lam, seed, data):
    A, B = _subset(data, g.n), _subset(data, g.n)
    t = data.draw(st.floats(0.1, 3.0))
    s = sample_graphical(g, (0.0, 3.0), lam, seed)
    fwd = evolve(s.with_window((0.0, t)), Configuration(A, 0.0))
    back = dual_evolve(s, (np.flatnonzero(B), t), t)
    hit_fwd = bool((fwd.final.bits & B).any())
    hit_back = bool((back.final.bits & A).any())
    assert hit_fwd == hit_back


@settings(max_examples=40, deadline=None)
@given(lam=lams, seed=seeds, data=st.data())
def test_reaches_is_transitive(lam, seed, data):
    g = SEGMENTS[3]
    x, y, z = (data.draw(st.integers(0, g.n - 1)) for _ in range(3))
    a, b, c = sorted(data.draw(st.floats(0.0, 3.0)) for _ in range(3))
    s = sample_graphical(g, (0.0, 3.0), lam, seed)
    if reaches(s, (x, a), (y, b)) and reaches(s, (y, b), (z, c)):
        assert reaches(s, (x, a), (z, c))


@st.composite
def adjacency(draw):
    n = draw(st.integers(1, 7))
    adj = {v: set() for v in range(n)}
    for v in range(1, n):
        # spanning tree first, so the graph is connected
        u = draw(st.integers(0, v - 1))
        adj[u].add(v)
        adj[v].add(u)
    for _ in range(draw(st.integers(0, 6))):
        u, v = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    return {v: sorted(nb) for v, nb in adj.items()}


@settings(max_examples=80, deadline=None)
@given(adj=adjacency())
def test_explicit_graph_invariants(adj):
    g = build_graph(explicit(adj))
    assert g.n == len(adj)
    for x in range(g.n):
        nb = list(g.neighbors(x))
        assert x not in nb and len(nb) <= g.degree_bound
        assert all(x in g.neighbors(y) for y in nb)
    d0 = bfs_distances(g, 0)
    assert (d0 >= 0).all() and d0[0] == 0
    for x in range(g.n):
        for y in g.neighbors(x):
            assert abs(int(d0[x]) - int(d0[y])) <= 1
