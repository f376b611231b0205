import math

import numpy as np
import pytest

from contactlab import estimators as E
from contactlab import process as P
from contactlab.errors import SamplingAborted, TruncationError
from contactlab.graph import GraphSpec, build_graph, lattice
from contactlab.graphical import Configuration, evolve, sample_graphical
from contactlab.stats import atom_probs, chi2_two_sample


def cfg(lam=2.0, delta=(0,), **kw):
    kw.setdefault("radius", 30)
    return E.stationary_config(lam, delta, **kw)


def test_subcritical_stationary_is_empty():
    c = cfg(0.0, (0, 1), burn_in=30, radius=5)
    for i in range(5):
        tr = P.sample_stationary_projection(c, i)
        assert not tr.initial.any() and tr.times.size == 0


def test_trajectory_window_and_order():
    tr = P.sample_stationary_projection(cfg(delta=(0, 1, 2), horizon=5), 3)
    assert tr.window == (0.0, 5.0)
    assert np.all(np.diff(tr.times) >= 0)
    state = tr.initial.copy()
    pos = {int(v): i for i, v in enumerate(tr.delta)}
    for t, v, s in tr.events:
        assert state[pos[v]] != s
        state[pos[v]] = s


def test_dual_snapshot_equals_forward_sweep():
    c = cfg(delta=(0, 1), horizon=4)
    g = c.build()
    d = c.delta_indices(g)
    pts = [(x, t) for t in (0.0, 1.5, 4.0) for x in d]
    bits = P.stationary_snapshot(c, pts, 40)
    for i in range(40):
        tr = P.sample_stationary_projection(c, i)
        fw = np.concatenate([tr.state_at(t) for t in (0.0, 1.5, 4.0)])
        assert np.array_equal(fw, bits[i])


def test_stationary_density_matches_long_run():
    c = cfg(seed=5)
    g = c.build()
    x = g.origin
    dens = P.stationary_snapshot(c, [(x, 0.0)], 10000)[:, 0].mean()
    se1 = math.sqrt(dens * (1 - dens) / 10000)
    m, se2, _ = E._long_run_stats(c.with_(seed=77), E._tabulate(lambda s: float(s[0]), 1), 2e4, 20)
    assert abs(dens - m) <= 3 * math.hypot(se1, se2)


def test_marginal_invariant_in_time():
    c = cfg(delta=(0, 1), horizon=10, seed=8)
    g = c.build()
    d = c.delta_indices(g)
    a = P._atoms(P.stationary_snapshot(c, [(x, 0.0) for x in d], 4000))
    b = P._atoms(P.stationary_snapshot(c, [(x, 10.0) for x in d], 4000, start=4000))
    _, p = chi2_two_sample(np.bincount(a, minlength=4), np.bincount(b, minlength=4))
    assert p > 0.01


def test_validate_truncation_examples():
    assert P.validate_truncation(cfg(0.0, radius=None, burn_in=5, horizon=5))["discrepancy"] == 0
    rep = P.validate_truncation(cfg(radius=None, burn_in=5, horizon=5))
    assert rep["discrepancy"] < 0.01 and not rep["flagged"]
    bad = P.validate_truncation(cfg(radius=0, burn_in=20, horizon=10), reps=400)
    assert bad["flagged"]


def test_long_run_doubles_until_box_survives():
    # a 5-site box at rate 2 dies within a few hundred time units
    tr = P.long_stationary_run(cfg(radius=2, burn_in=5, seed=3), 2000.0, max_doublings=4)
    assert tr.meta["box_alive"] and tr.meta["radii_tried"][0] == 2
    assert tr.meta["radii_tried"] == [2 * 2 ** i for i in range(len(tr.meta["radii_tried"]))]
    with pytest.raises(TruncationError):
        P.long_stationary_run(cfg(1.0, radius=1, burn_in=5, seed=3), 500.0, max_doublings=0)


def test_validate_flag_raises_on_request():
    with pytest.raises(TruncationError) as info:
        P.sample_stationary_projection(cfg(radius=0), validate=True)
    assert info.value.diagnostics["flagged"]


def test_survival_time_basics():
    g = build_graph(lattice(1, 20))
    assert P.survival_time(g, 2.0, [], 10.0, 1).value == 0.0
    t = P.survival_time(g, 2.0, [g.origin], 0.5, 1)
    assert t.value <= 0.5
    r = P.survival_batch(g, 0.0, [g.origin], 1e3, 100000, 3)
    assert 0.99 <= r["ext"].mean() <= 1.01


def test_censoring_matches_survival_probability():
    spec = GraphSpec("lattice", radius=1)
    est = E.estimate_survival_prob(spec, 2.0, None, 50.0, 2000, 13)
    g = P.growth_graph(spec, 2.0, 50.0)
    cens = np.mean([P.survival_time(g, 2.0, [g.origin], 50.0, P.replica_seed(14, i)).censored
                    for i in range(2000)])
    se = math.hypot(est.std_error, math.sqrt(cens * (1 - cens) / 2000))
    assert abs(cens - est.value) <= 3 * se


def test_condition_on_survival_is_a_filter():
    g = build_graph(lattice(1, 60))
    tr = P.condition_on_survival(g, 2.0, g.origin, 20.0, 3)
    assert tr.final.bits.any()
    i = tr.meta["attempts"] - 1
    raw = evolve(sample_graphical(g, (0, 20.0), 2.0, P.replica_seed(3, i)),
                 Configuration.from_set(g.n, [g.origin]))
    assert raw.events == tr.events


def test_acceptance_rate_monotone_in_lambda():
    g = build_graph(lattice(1, 120))
    rates = {}
    for lam in (2.0, 4.0):
        r = P._surviving_batches(g, lam, g.origin, 20.0, 3, 300, P.DEFAULT_FLOOR)
        rates[lam] = r["acceptance_rate"]
    assert rates[4.0] > rates[2.0]
    est = E.estimate_survival_prob(GraphSpec("lattice", radius=1), 2.0, None, 20.0, 4000, 9)
    n = 300 / rates[2.0]
    se = math.hypot(est.std_error, math.sqrt(rates[2.0] * (1 - rates[2.0]) / n))
    assert abs(rates[2.0] - est.value) <= 3 * se


def test_floor_breach_aborts():
    g = build_graph(lattice(1, 10))
    with pytest.raises(SamplingAborted) as info:
        P.condition_on_survival(g, 0.5, g.origin, 50.0, 1, floor=0.01, max_attempts=200)
    assert "acceptance_rate" in info.value.diagnostics


def test_hitting_time_trivial_cases():
    g = build_graph(lattice(1, 30))
    assert P.hitting_time(g, 2.0, g.origin, 10.0, 1).value == 0.0
    t = P.hitting_time(g, 0.0, g.index(3), 10.0, 1)
    assert t.censored and t.value == 10.0


def test_hitting_time_per_site_near_beta(beta_hat):
    g = P.cached_graph(GraphSpec("lattice", radius=200))
    ts = [P.hitting_time(g, 2.0, g.index(40), 150.0, 500 + i) for i in range(120)]
    m = np.mean([t.value for t in ts if not t.censored]) / 40
    assert abs(m - beta_hat) <= 0.1 * beta_hat


def test_coupling_time_properties(beta_hat):
    fr = {}
    for n in (10, 40):
        g = P.cached_graph(GraphSpec("lattice", radius=n + 60))
        ts = [P.coupling_time(g, 2.0, g.index(n), 3 * n + 30, 1000 * n + i) for i in range(80)]
        assert all(t.value >= 0 for t in ts)
        fr[n] = np.mean([t.value > beta_hat * n * 1.5 for t in ts])
    se = math.sqrt((fr[10] * (1 - fr[10]) + fr[40] * (1 - fr[40])) / 80)
    assert fr[40] <= fr[10] + 2 * se


def test_coupling_time_zero_when_no_disagreement():
    g = build_graph(lattice(1, 3))
    t = P.coupling_time(g, 0.0, g.origin, 0.001, 5, floor=1e-3)
    assert t.value == 0.0 and not t.censored


def test_vacuous_past_matches_unconditional():
    c = cfg(delta=(0,), horizon=1, seed=21)
    trs, _ = P.conditioned_trajectories(c, None, 1.0, 1500)
    a = np.array([tr.state_at(1.0)[0] for tr in trs])
    b = P.stationary_snapshot(c, [(c.build().origin, 1.0)], 3000, start=10**6)[:, 0]
    _, p = chi2_two_sample(np.bincount(a, minlength=2), np.bincount(b, minlength=2))
    assert p > 0.01


def test_all_zero_past_acceptance_rate():
    c = cfg(delta=(0,), horizon=0.5, seed=22)
    ev = P.Cylinder.all_zero([0], 0.5)
    trs, n = P.conditioned_trajectories(c, ev, 0.5, 1500)
    rate = len(trs) / n
    direct = np.mean([ev(tr) for tr in P.stationary_trajectories(c, 1500, 0.5, start=5000)])
    se = math.sqrt(rate * (1 - rate) / n + direct * (1 - direct) / 1500)
    assert abs(rate - direct) <= 3 * se


def test_sample_conditioned_past_window_and_floor():
    c = cfg(delta=(0,), horizon=2, seed=3)
    tr = P.sample_conditioned_past(c, P.Cylinder.all_one([0], 0.2), 0.2, pilot=50)
    assert tr.window == (0.0, 2.0) and tr.initial[0] == 1
    with pytest.raises(SamplingAborted) as info:
        P.sample_conditioned_past(c, lambda tr: False, 0.2, pilot=50)
    assert info.value.diagnostics["acceptance_rate"] == 0


def test_dfkg_single_time_order():
    c = cfg(delta=(0,), horizon=1, seed=30)
    lo, _ = P.conditioned_trajectories(c, P.Cylinder.all_zero([0], 0.5), 0.5, 3000)
    hi, _ = P.conditioned_trajectories(c, P.Cylinder.all_one([0], 0.5), 0.5, 3000, start=3000)
    pl = np.mean([t.state_at(1.0)[0] for t in lo])
    ph = np.mean([t.state_at(1.0)[0] for t in hi])
    se = math.sqrt(pl * (1 - pl) / len(lo) + ph * (1 - ph) / len(hi))
    assert pl <= ph + 3 * se


def test_interior_healthy_trivial():
    assert not P.sample_interior_healthy(5, 2, 2.0, 0.0, 1).bits.any()
    assert not P.sample_interior_healthy(5, 2, 0.0, 3.0, 1).bits.any()


def test_interior_dual_equals_forward():
    for s in range(25):
        a = P.sample_interior_healthy(6, 2, 2.0, 4.0, s)
        b = P.interior_healthy_forward(6, 2, 2.0, 4.0, s)
        assert np.array_equal(a.bits, b.bits)


@pytest.mark.xfail(strict=True, reason="at n=20 the front fluctuations still reach the "
                   "observation box about a quarter of the time; the bound holds from n=40")
def test_interior_healthy_early_time_n20(beta_hat):
    res = P.interior_healthy_batch(20, 2, 2.0, 0.5 * beta_hat * 20, 2000, 4)
    assert res["bits"].any(axis=1).mean() < 0.1


def test_interior_healthy_early_time_decays(beta_hat):
    p = {n: P.interior_healthy_batch(n, 2, 2.0, 0.5 * beta_hat * n, 2000, 4)["bits"].any(axis=1).mean()
         for n in (20, 40)}
    assert p[40] < 0.1
    assert p[40] < p[20]


def test_interior_truncation_guard():
    with pytest.raises(TruncationError):
        P.interior_healthy_batch(5, 1, 2.0, 10.0, 50, 1, radius=6)


def test_front_trivial_cases():
    grid, pos = P.rightmost_front(0.0, 10.0, 1, radius=20)
    assert pos[0] == 0
    fin = pos[np.isfinite(pos)]
    assert np.all(np.diff(fin) <= 0)


def test_front_speed_stabilizes():
    ends = []
    for s in range(12):
        grid, pos = P.rightmost_front(2.0, 200.0, s, radius=320)
        ends.append((pos[100] / 100, pos[200] / 200))
    a, b = np.mean(ends, axis=0)
    assert a > 0 and b > 0
    assert abs(a - b) <= 0.1 * b


def test_front_guard():
    with pytest.raises(TruncationError):
        P.rightmost_front(3.0, 50.0, 1, radius=10)


def test_monotone_in_lambda_by_thinning():
    g = build_graph(lattice(1, 8))
    for s in range(50):
        big = sample_graphical(g, (0, 5), 3.0, s)
        small = big.with_lambda(1.5)
        init = Configuration.from_set(g.n, [g.origin])
        a, b = evolve(small, init), evolve(big, init)
        ts = np.union1d(a.times, b.times)
        assert not (a.states_at(ts) > b.states_at(ts)).any()


def test_survival_filter_bias_decays():
    g = P.growth_graph(GraphSpec("lattice", radius=1), 2.0, 40.0)
    ext = P.survival_batch(g, 2.0, [g.origin], 40.0, 4000, 6)["ext"]
    p10 = np.mean((ext > 10) & (ext < 20))
    p20 = np.mean((ext > 20) & (ext < 40))
    assert p20 < p10
