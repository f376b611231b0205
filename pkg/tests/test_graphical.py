import numpy as np
import pytest
from scipy import stats

from contactlab.graph import build_graph, explicit, lattice
from contactlab.graphical import (Configuration, ExplicitSample, TimeTagError, dual_evolve,
                                  dump_sample, evolve, evolve_direct, load_sample, reaches,
                                  sample_graphical)
from contactlab.process import replica_seeds, _batch
from contactlab import _engine

PATH3 = explicit({0: [1], 1: [0, 2], 2: [1]})


@pytest.fixture(scope="module")
def z5():
    return build_graph(lattice(1, 5))


def test_zero_rate_has_no_arrows(z5):
    s = sample_graphical(z5, (0, 50), 0.0, 3)
    assert all(len(s.arrows(x, y)) == 0 for x in range(z5.n) for y in z5.neighbors(x))
    assert sum(len(s.recovery_marks(x)) for x in range(z5.n)) > 0


def test_subnormal_rate_is_not_an_error(z5):
    s = sample_graphical(z5, (0, 50), 5e-324, 0)
    assert all(len(s.arrows(x, y)) == 0 for x in range(z5.n) for y in z5.neighbors(x))
    d = dual_evolve(s, ([z5.origin], 1.0), 1.0)
    assert d.final.bits.sum() <= 1


def test_empty_window_has_no_events(z5):
    s = sample_graphical(z5, (2.0, 2.0), 2.0, 3)
    assert all(len(a) == 0 for a in s.streams())


def test_mark_rate_single_vertex():
    g = build_graph(explicit({0: []}))
    n = len(sample_graphical(g, (0, 1e4), 1.0, 11).recovery_marks(0))
    assert 0.97 <= n / 1e4 <= 1.03


def test_streams_sorted_in_window(z5):
    s = sample_graphical(z5, (-3.0, 7.0), 2.0, 5)
    for a in s.streams():
        assert np.all(np.diff(a) > 0)
        assert a.size == 0 or (a[0] >= -3.0 and a[-1] <= 7.0)


def test_window_extension_keeps_streams(z5):
    a = sample_graphical(z5, (0, 5), 2.0, 9)
    b = sample_graphical(z5, (-5, 10), 2.0, 9)
    for sa, sb in zip(a.streams(), b.streams()):
        assert np.array_equal(sa, sb[(sb >= 0) & (sb <= 5)])


def test_regeneration_is_bitwise(z5):
    a = sample_graphical(z5, (0, 5), 2.0, 9).streams()
    b = sample_graphical(z5, (0, 5), 2.0, 9).streams()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_thinning_is_nested(z5):
    big = sample_graphical(z5, (0, 20), 3.0, 1)
    small = big.with_lambda(1.0)
    for x in range(z5.n):
        for y in z5.neighbors(x):
            assert set(small.arrows(x, y)) <= set(big.arrows(x, y))


def test_all_zero_is_absorbing(z5):
    s = sample_graphical(z5, (0, 10), 2.0, 1)
    tr = evolve(s, Configuration.zeros(z5.n))
    assert tr.times.size == 0 and not tr.final.bits.any()


def test_single_vertex_dies_at_first_mark():
    g = build_graph(explicit({0: []}))
    s = sample_graphical(g, (0, 100), 1.0, 4)
    tr = evolve(s, Configuration.ones(1))
    assert tr.events == [(float(s.recovery_marks(0)[0]), 0, 0)]


def test_handcrafted_forward():
    g = build_graph(PATH3)
    s = ExplicitSample(g, (0.0, 3.0), {1: [2.0]}, {(0, 1): [1.0]})
    tr = evolve(s, Configuration.from_set(3, [0]))
    assert tr.state_at(0.5).tolist() == [1, 0, 0]
    assert tr.state_at(1.0).tolist() == [1, 1, 0]
    assert tr.state_at(1.99).tolist() == [1, 1, 0]
    assert tr.state_at(2.0).tolist() == [1, 0, 0]


def test_handcrafted_dual():
    g = build_graph(PATH3)
    s = ExplicitSample(g, (0.0, 3.0), {}, {(0, 1): [1.0]})
    d = dual_evolve(s, ([1], 2.0), 2.0)
    assert d.state_at(0.5).tolist() == [0, 1, 0]
    assert d.state_at(1.0).tolist() == [1, 1, 0]


def test_dual_without_events_is_constant():
    g = build_graph(PATH3)
    s = ExplicitSample(g, (0.0, 3.0))
    d = dual_evolve(s, ([0, 2], 3.0), 3.0)
    assert d.times.size == 0 and d.final.bits.tolist() == [1, 0, 1]


def test_time_tag_mismatch(z5):
    s = sample_graphical(z5, (1.0, 4.0), 2.0, 1)
    with pytest.raises(TimeTagError):
        evolve(s, Configuration.ones(z5.n, 0.0))


def test_dual_window_underflow(z5):
    s = sample_graphical(z5, (0.0, 4.0), 2.0, 1)
    with pytest.raises(ValueError):
        dual_evolve(s, ([0], 3.0), 4.0)


def test_reaches_trivial_and_blocked():
    g = build_graph(PATH3)
    s = ExplicitSample(g, (0.0, 3.0), {0: [0.5]}, {(0, 1): [1.0]})
    assert reaches(s, (0, 0.2), (0, 0.2))
    assert not reaches(s, (0, 0.0), (1, 2.0))
    assert reaches(s, (0, 0.6), (0, 0.6)) is True
    with pytest.raises(ValueError):
        reaches(s, (0, 2.0), (1, 1.0))


def test_reaches_matches_evolve_and_dual(z5):
    rng = np.random.default_rng(0)
    for k in range(60):
        s = sample_graphical(z5, (0, 4), 2.0, k)
        x, y = rng.integers(z5.n, size=2)
        a, b = sorted(rng.uniform(0, 4, size=2))
        r = reaches(s, (x, a), (y, b))
        fwd = evolve(s.with_window((a, 4)), Configuration.from_set(z5.n, [x], a))
        assert r == bool(fwd.state_at(b)[y])
        d = dual_evolve(s, ([y], b), b - a)
        assert r == bool(d.final.bits[x])


def test_engine_matches_reference_sweep(tmp_path):
    g = build_graph(lattice(1, 4))
    for seed in range(40):
        s = sample_graphical(g, (0, 3), 2.0, seed)
        p = tmp_path / f"s{seed}.bin"
        dump_sample(s, p)
        e = ExplicitSample.from_dump(g, p)
        init = Configuration.from_set(g.n, [seed % g.n, (3 * seed) % g.n])
        a, b = evolve(s, init), evolve(e, init)
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.final.bits, b.final.bits)
        da, db = dual_evolve(s, ([2], 3.0), 3.0), dual_evolve(e, ([2], 3.0), 3.0)
        assert np.allclose(da.times, db.times)
        assert np.array_equal(da.final.bits, db.final.bits)


def test_dump_roundtrip(tmp_path):
    g = build_graph(lattice(1, 2))
    s = sample_graphical(g, (-1.0, 2.5), 1.5, 77)
    p = tmp_path / "d.bin"
    dump_sample(s, p)
    raw = p.read_bytes()
    assert raw[:4] == b"CPGS"
    header, streams = load_sample(p)
    assert header == {"version": 1, "seed": 77, "lam": 1.5, "window": (-1.0, 2.5)}
    assert all(np.array_equal(a, b) for a, b in zip(streams, s.streams()))
    assert len(streams) == g.n + g.n_arrows


def test_evolve_is_deterministic(z5):
    s = sample_graphical(z5, (0, 5), 2.0, 3)
    a = evolve(s, Configuration.from_set(z5.n, [5]))
    b = evolve(s, Configuration.from_set(z5.n, [5]))
    assert a.events == b.events


def test_direct_all_zero(z5):
    tr = evolve_direct(z5, 2.0, Configuration.zeros(z5.n), 5.0, 1)
    assert tr.times.size == 0


def test_direct_pure_death_mean():
    g = build_graph(explicit({0: []}))
    _, ext = _engine.direct_batch(g.nbr_ptr, g.nbr_idx, replica_seeds(5, 100000), 0.0, 1e3,
                                  np.ones(1, dtype=np.uint8), np.empty(0), np.zeros(1, dtype=np.int64))
    assert 0.99 <= ext.mean() <= 1.01


def test_direct_and_sweep_agree_on_two_path():
    g = build_graph(explicit({0: [1], 1: [0]}))
    reps = 100000
    init = np.array([1, 0], dtype=np.uint8)
    r = _batch(g, 1.0, replica_seeds(1, reps), init, depth=0.1, snap=[0.1],
               snap_vertices=np.arange(2))
    a = int((r["snaps"][:, 0] == 3).sum())
    snaps, _ = _engine.direct_batch(g.nbr_ptr, g.nbr_idx, replica_seeds(2, reps), 1.0, 0.1, init,
                                    np.array([0.1]), np.arange(2))
    b = int((snaps[:, 0] == 3).sum())
    pa, pb = a / reps, b / reps
    se = np.sqrt(pa * (1 - pa) / reps + pb * (1 - pb) / reps)
    assert abs(pa - pb) <= 3 * se


def test_dual_extinction_law_matches_forward():
    g = build_graph(lattice(1, 40))
    reps = 10000
    x = g.origin
    f = _batch(g, 1.5, replica_seeds(3, reps), [x], depth=10.0)["ext"]
    d = _batch(g, 1.5, replica_seeds(4, reps), [x], direction=-1, origin=10.0, depth=10.0)["ext"]
    f = np.minimum(f, 10.0)
    d = np.minimum(d, 10.0)
    assert stats.ks_2samp(f, d).pvalue > 0.01
