import math

import numpy as np
import pytest

from contactlab import checks as C
from contactlab import process as P
from contactlab.graph import GraphSpec, build_graph, explicit, lattice
from contactlab.graphical import Configuration, evolve, sample_graphical

TWO_PATH = build_graph(explicit({0: [1], 1: [0]}))


@pytest.fixture(scope="module")
def seg20():
    # 21 vertices: the labels -10..10
    return build_graph(lattice(1, 10))


def _run(s, bits):
    return evolve(s, Configuration(np.asarray(bits, dtype=np.uint8), 0.0))


def test_equal_and_empty_starts(seg20):
    rng = np.random.default_rng(1)
    for k in range(20):
        s = sample_graphical(seg20, (0, 5), 2.0, k)
        A = (rng.random(seg20.n) < 0.3).astype(np.uint8)
        a, b = _run(s, A), _run(s, A.copy())
        assert a.events == b.events
        e = _run(s, np.zeros(seg20.n))
        assert e.times.size == 0
        u = _run(s, A)
        ts = np.union1d(u.times, [0.0])
        assert (u.states_at(ts) == np.maximum(u.states_at(ts), e.states_at(ts))).all()


def test_monotone_and_additive_small_batch(seg20):
    m = C.check_monotone_coupling(seg20, 2.0, reps=300, seed=5)
    a = C.check_additivity(seg20, 2.0, reps=300, seed=5)
    assert m.passed and m.statistic == 0 and m.details["times_compared"] > 300
    assert a.passed and a.statistic == 0


def test_fault_injection_is_caught(seg20):
    m = C.check_monotone_coupling(seg20, 2.0, reps=50, seed=1, evolve_fn=C.faulty_evolve)
    a = C.check_additivity(seg20, 2.0, reps=50, seed=1, evolve_fn=C.faulty_evolve)
    assert m.verdict == "fail" and m.statistic > 0
    assert a.verdict == "fail"


def test_report_rejects_bad_verdict():
    with pytest.raises(ValueError):
        C.CheckReport("x", "maybe", 0.0, 0.0, 1, 0)


def test_self_duality_trivial_cases():
    g = build_graph(lattice(1, 12))
    x0 = g.index(0)
    r = C.check_self_duality(g, 2.0, [x0], [x0], 1.0, reps=2000, seed=1)
    assert r.passed
    z = C.check_self_duality(g, 0.0, [x0], [g.index(3)], 30.0, reps=2000, seed=1)
    assert z.passed and z.details["p_forward"] == 0 and z.details["p_reverse"] == 0


def test_self_duality_at_small_scale():
    g = build_graph(lattice(1, 20))
    r = C.check_self_duality(g, 2.0, [g.index(0)], [g.index(3)], 2.0, reps=20000, seed=3)
    assert r.passed
    assert abs(r.details["p_forward"] - r.details["p_reverse"]) < 0.03


def test_increasing_event_validation():
    with pytest.raises(ValueError):
        C.IncreasingEvent(2, frozenset({1}))
    with pytest.raises(ValueError):
        C.IncreasingEvent(1, frozenset({2}))
    assert C.IncreasingEvent(2, frozenset({1, 3})).mask().tolist() == [False, True, False, True]
    e = C.IncreasingEvent.any_infected(2)
    assert e(np.array([0, 1, 2, 3])).tolist() == [False, True, True, True]
    with pytest.raises(ValueError):
        C.IncreasingEvent.from_predicate(2, lambda s: not s.any())


def test_positive_association_trivial_pairs():
    cfg = C.default_check_config(seed=2)
    A = C.IncreasingEvent.infected(0, 2, 0.0)
    r = C.check_positive_association(cfg, [(A, C.IncreasingEvent.sure(2, 1.0)), (A, A)], reps=3000)
    assert r.passed
    rows = r.details["pairs"]
    assert rows[0]["cov"] == pytest.approx(0.0, abs=1e-12)
    assert rows[1]["cov"] == pytest.approx(rows[1]["p_A"] * (1 - rows[1]["p_A"]))


def test_positive_association_default_pairs():
    r = C.check_positive_association(C.default_check_config(seed=4), reps=6000)
    assert r.passed
    first = r.details["pairs"][0]
    assert first["cov"] > 0


def test_positive_association_rejects_bad_events():
    with pytest.raises(ValueError):
        C.check_positive_association(C.default_check_config(), [(C.IncreasingEvent.sure(3),
                                                                 C.IncreasingEvent.sure(3))],
                                     reps=10)


def test_dfkg_trivial_and_default():
    cfg = C.default_check_config(seed=6)
    zero = P.Cylinder.all_zero((0, 1), 1.0)
    sure = C.IncreasingEvent.sure(2, 1.0)
    r = C.check_dfkg(cfg, futures=[sure], pasts=[zero, zero], reps=2000)
    assert r.passed
    assert r.details["domination"][0]["p_zero"] == r.details["domination"][0]["p_other"] == 1.0
    d = C.check_dfkg(cfg, futures=[C.IncreasingEvent.infected(1, 2, 0.0)],
                     pasts=[zero, P.Cylinder.all_one((0, 1), 1.0)], reps=4000)
    assert d.passed
    row = d.details["domination"][0]
    assert row["p_zero"] < row["p_other"]


def test_dfkg_requires_zero_past():
    with pytest.raises(ValueError):
        C.check_dfkg(C.default_check_config(), pasts=[None], reps=10)


def test_pure_death_product_law():
    g = build_graph(explicit({0: [1], 1: [0, 2], 2: [1]}))
    t = 0.7
    ex = C.exact_law(g, 0.0, 7, t)
    q = math.exp(-t)
    want = [math.prod(q if (a >> i) & 1 else 1 - q for i in range(3)) for a in range(8)]
    assert np.allclose(ex, want, atol=1e-12)
    r = C.check_generator_equivalence(g, 0.0, t, reps=20000, seed=1, initial=[0, 1, 2])
    assert r.passed and r.details["tv_sweep_ok"] and r.details["tv_direct_ok"]


def test_generator_at_time_zero():
    r = C.check_generator_equivalence(TWO_PATH, 1.0, 0.0, reps=500, seed=1)
    assert r.passed
    assert r.details["sweep_law"][1] == 1.0 and r.details["direct_law"][1] == 1.0
    assert r.details["exact_law"][1] == pytest.approx(1.0)


def test_generator_two_path():
    r = C.check_generator_equivalence(TWO_PATH, 1.0, 0.5, reps=40000, seed=2)
    assert r.passed, r.details


def test_rate_matrix_rows_sum_to_zero():
    Q = C.rate_matrix(build_graph(lattice(1, 1)), 1.7)
    assert np.allclose(Q.sum(axis=1), 0)
    assert (Q[0] == 0).all()


def test_generator_vertex_cap():
    with pytest.raises(ValueError):
        C.check_generator_equivalence(build_graph(lattice(1, 3)), 1.0, 0.5, reps=10)
