import numpy as np
import pytest

from contactlab.graph import (GraphError, GraphSpec, bfs_distances, build_graph, distance,
                              explicit, halfline, lattice, load_adjacency, parse_adjacency,
                              regular_tree, truncation_radius)


def _check_invariants(g):
    for x in range(g.n):
        nb = g.neighbors(x)
        assert x not in nb
        assert len(nb) <= g.degree_bound
        for y in nb:
            assert x in g.neighbors(y)
    assert (bfs_distances(g, 0) >= 0).all()


def test_small_lattice_path():
    g = build_graph(lattice(1, 2))
    assert list(g.labels) == [-2, -1, 0, 1, 2]
    assert {g.label(i) for i in g.boundary_set} == {-2, 2}
    assert sorted(g.label(i) for i in g.neighbors(g.index(0))) == [-1, 1]
    _check_invariants(g)


def test_tree_vertex_count():
    g = build_graph(regular_tree(3, 2))
    assert g.n == 10
    assert g.degree(0) == 3
    assert max(g.degree(i) for i in range(g.n)) == 3
    _check_invariants(g)


def test_explicit_path():
    g = build_graph(explicit({0: [1], 1: [0, 2], 2: [1]}))
    assert g.n == 3
    assert distance(g, 0, 2) == 2
    _check_invariants(g)


def test_explicit_rejects_asymmetric():
    with pytest.raises(GraphError):
        build_graph(explicit({0: [1], 1: []}))


def test_explicit_rejects_degree_bound():
    with pytest.raises(GraphError):
        build_graph(explicit({0: [1, 2], 1: [0], 2: [0]}, degree_bound=1))


def test_explicit_rejects_self_loop():
    with pytest.raises(GraphError):
        build_graph(explicit({0: [0, 1], 1: [0]}))


def test_distance_examples():
    g = build_graph(lattice(1, 5))
    assert distance(g, g.index(0), g.index(3)) == 3
    for x in range(g.n):
        assert distance(g, x, x) == 0
    t = build_graph(regular_tree(3, 2))
    assert distance(t, 0, t.n - 1) == 2
    with pytest.raises(GraphError):
        distance(g, 0, g.n)


def test_distance_triangle_inequality():
    g = build_graph(lattice(2, 3))
    rng = np.random.default_rng(4)
    for _ in range(200):
        x, y, z = rng.integers(g.n, size=3)
        assert distance(g, x, z) <= distance(g, x, y) + distance(g, y, z)
        assert distance(g, x, y) == distance(g, y, x)


def test_truncation_radius_examples():
    assert truncation_radius([0], 5, 2, 2, 1.5) == 30
    assert truncation_radius([0, 1, 2, 3, 4], 0, 2, 2, 1.5) == 4
    assert truncation_radius([0, 1, 2, 3, 4], 1, 1, 2, 1.0) == 6


def test_build_is_deterministic():
    a, b = build_graph(lattice(2, 3)), build_graph(lattice(2, 3))
    assert a.labels == b.labels
    assert np.array_equal(a.nbr_idx, b.nbr_idx)
    assert np.array_equal(a.arrow_keys, b.arrow_keys)


def test_stream_keys_stable_across_truncations():
    small, big = build_graph(lattice(1, 3)), build_graph(lattice(1, 6))
    for lab in small.labels:
        assert small.vertex_keys[small.index(lab)] == big.vertex_keys[big.index(lab)]


def test_halfline_and_lattice_2d():
    h = build_graph(halfline(4))
    assert h.n == 5 and h.degree(0) == 1
    g = build_graph(lattice(2, 1))
    assert g.n == 9 and g.degree(g.index((0, 0))) == 4
    _check_invariants(h)
    _check_invariants(g)


def test_adjacency_text_format(tmp_path):
    text = "# a triangle with a tail\n0: 1 2\n1: 0 2  # comment\n\n2: 0 1 3\n3: 2\n"
    assert parse_adjacency(text) == {0: [1, 2], 1: [0, 2], 2: [0, 1, 3], 3: [2]}
    p = tmp_path / "g.adj"
    p.write_text(text, encoding="utf-8")
    g = build_graph(GraphSpec.from_dict({"family": "explicit", "path": str(p)}))
    assert g.n == 4 and distance(g, 0, 3) == 2
    assert load_adjacency(p) == parse_adjacency(text)


def test_adjacency_text_errors():
    with pytest.raises(GraphError):
        parse_adjacency("0 1 2\n")
    with pytest.raises(GraphError):
        parse_adjacency("0: 1\n0: 2\n")


def test_unknown_family():
    with pytest.raises(GraphError):
        GraphSpec("torus")
