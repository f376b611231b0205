import math

import numpy as np
import pytest

from contactlab import estimators as E
from contactlab import process as P
from contactlab.graph import GraphSpec
from contactlab.graphical import Trajectory

Z = GraphSpec("lattice", radius=1)
TREE = GraphSpec("regular_tree", degree=3, depth=8)


def cfg(lam=2.0, delta=(0,), **kw):
    kw.setdefault("radius", 30)
    return E.stationary_config(lam, delta, **kw)


def test_estimate_invariants():
    with pytest.raises(ValueError):
        E.Estimate(0.5, -1.0, 10)
    with pytest.raises(ValueError):
        E.Estimate(0.5, 0.1, 0)
    with pytest.raises(ValueError):
        E.Estimate(0.5, 0.1, 10, censored_fraction=1.5)
    d = E.Estimate(0.5, 0.1, 10, meta={"a": 1}).to_dict()
    assert d["value"] == 0.5 and d["replicates"] == 10


def test_curve_invariants():
    with pytest.raises(ValueError):
        E.Curve([1.0, 0.5], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        E.MixingCurve([0.0, 1.0], [0.2, 1.5], [0, 0], kind="tv_lower_bound")
    with pytest.raises(ValueError):
        E.MixingCurve([0.0], [0.0], [0.0], kind="other")


def test_survival_prob_examples():
    assert E.estimate_survival_prob(Z, 0.0, None, 30.0, 500, 1).value == 0.0
    assert E.estimate_survival_prob(Z, 1.0, None, 100.0, 1000, 2).value < 0.02
    a = E.estimate_survival_prob(Z, 2.0, None, 20.0, 1000, 3)
    b = E.estimate_survival_prob(Z, 4.0, None, 20.0, 1000, 3)
    assert b.value >= a.value - 3 * math.hypot(a.std_error, b.std_error)
    assert "half_horizon_value" in a.meta


def test_lambda_c_bracket_must_straddle():
    with pytest.raises(ValueError):
        E.estimate_lambda_c(Z, 50.0, 200, (2.5, 3.0), 0.1)


def test_lambda_c_tree_below_lattice():
    z = E.estimate_lambda_c(Z, 30.0, 600, (0.5, 2.5), 0.05, seed=4)
    t = E.estimate_lambda_c(TREE, 30.0, 600, (0.2, 2.5), 0.05, seed=4)
    assert t.value < z.value
    low = z.meta["evaluations"][0]
    assert low["lam"] == 0.5 and low["p"] < 0.05


def test_beta_examples(beta_hat):
    assert beta_hat > 0
    b4 = E.estimate_beta(4.0, (10, 20, 40), 80, 5, horizon=lambda n: n + 20.0)
    assert b4.value < beta_hat
    for row in b4.meta["per_n"]:
        assert abs(row["residual_per_n"]) < 0.1


def test_occupation_time_examples():
    tr = Trajectory(np.array([0, 1]), np.array([0, 0], dtype=np.uint8), np.empty(0),
                    np.empty(0, dtype=np.int64), np.empty(0, dtype=np.uint8), (0.0, 5.0))
    assert E.occupation_time(tr, lambda s: 1.0) == 5.0
    assert E.occupation_time(tr, lambda s: float(not s.any())) == 5.0
    tr2 = Trajectory(np.array([0, 1]), np.array([1, 0], dtype=np.uint8), np.array([1.0, 3.0]),
                     np.array([1, 0]), np.array([1, 0], dtype=np.uint8), (0.0, 5.0))
    # count: 1 on [0,1), 2 on [1,3), 1 on [3,5)
    assert E.occupation_time(tr2, lambda s: float(s.sum())) == pytest.approx(1 + 4 + 2)
    assert E.occupation_time(tr2, lambda s: float(s.sum()), t=2.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        E.occupation_time(tr2, lambda s: 1.0, t=6.0)


def test_occupation_time_matches_fine_grid():
    tr = P.sample_stationary_projection(cfg(delta=(0, 1), horizon=20), 2)
    f = lambda s: float(s.sum())
    grid = np.arange(0, 20, 1e-3) + 5e-4
    approx = sum(f(tr.state_at(t)) for t in grid[::50]) * 0.05
    assert E.occupation_time(tr, f) == pytest.approx(approx, abs=0.5)


def test_alpha_mixing_examples():
    c = cfg(delta=(0,), seed=3)
    curve = E.estimate_alpha_mixing(c, [0, 1, 2, 4], length=2e4, step=0.05)
    assert curve.kind == "alpha_covariance"
    tr = P.sample_stationary_projection(c.with_(horizon=2e4))
    codes = E.atoms_at(tr, np.arange(0, 2e4, 0.05))
    p = codes.mean()
    assert curve.values[0] == pytest.approx(p * (1 - p), rel=1e-9)
    v, s = curve.values, curve.std_errors
    for i in range(len(v) - 1):
        assert v[i + 1] <= v[i] + 2 * math.hypot(s[i], s[i + 1])
    assert np.all(np.abs(v) <= 0.25)


def test_alpha_mixing_rejects_large_delta():
    with pytest.raises(ValueError):
        E.estimate_alpha_mixing(cfg(delta=tuple(range(13))), [0], length=10)


def test_d_vacuous_past_is_calibrated():
    c = cfg(delta=(0,), seed=6)
    curve = E.estimate_d(c, [0, 1, 2], pasts=[None], t_past=0.5, attempts=1500,
                         stationary_reps=6000)
    bias = curve.meta["plugin_bias"]
    for v, s in zip(curve.values, curve.std_errors):
        assert 0 <= v <= bias + 2 * s
    assert curve.meta["lower_bound"]


def test_d_range_and_cap():
    c = cfg(delta=(0,), seed=7)
    curve = E.estimate_d(c, [0, 1], t_past=0.5, attempts=800, stationary_reps=3000)
    assert all(0 <= v <= 1 for v in curve.values)
    with pytest.raises(ValueError):
        E.estimate_d(cfg(delta=tuple(range(13))), [0], attempts=10)


def test_cutoff_at_time_zero():
    rows = E.cutoff_curve(2.0, [5], 1.0, 1, 1.3, reps=200, seed=1, stationary_reps=4000)
    r0 = next(r for r in rows if r["branch"] == "-")
    assert r0["t"] == 0 and r0["p_all_zero"] == 1.0
    c = E.stationary_config(2.0, (-1, 0, 1), radius=40, seed=1)
    q0 = float((E.stationary_marginal(c, 4000) == 0).mean())
    assert r0["tv"] == pytest.approx(1 - q0)


def test_clt_constant_f():
    rep = E.estimate_clt(cfg(seed=2), lambda s: 0.7, 20.0, 100, long_length=2000)
    assert rep["sigma2_hat"] < 1e-12 and not rep["flagged"]
    assert rep["sample_mean"] == pytest.approx(0.7)


def test_clt_variance_scaling():
    c = cfg(seed=9)
    f = lambda s: float(s[0])
    var = {}
    for t in (50.0, 100.0, 200.0):
        z = [E.occupation_time(tr, f, t) / t for tr in P.stationary_trajectories(c.with_(horizon=t), 150)]
        var[t] = np.var(z, ddof=1) * t
    ratios = [var[a] / var[b] for a, b in ((50.0, 100.0), (100.0, 200.0), (50.0, 200.0))]
    assert all(1 / 1.5 <= r <= 1.5 for r in ratios)


def test_rate_function_structure():
    c = cfg(delta=(0,), seed=4)
    rf = E.estimate_rate_function(c, lambda s: float(s[0]), [0.0, 0.6, 1.0], [5.0, 10.0], 200,
                                  h=0.05)
    assert rf.status[0] == "sparse" and rf.status[2] == "sparse"
    assert rf.bounds[0] == pytest.approx(math.log(1 / 200) / 10.0)
    assert np.isnan(rf.psi_hat[0])
    assert np.all(rf.psi_hat[~np.isnan(rf.psi_hat)] <= 0)
    with pytest.raises(ValueError):
        E.estimate_rate_function(c, lambda s: float(s[0]), [5.0], [5.0], 50)


def test_concave_majorant_is_concave():
    x = np.linspace(0, 1, 9)
    y = -np.abs(x - 0.4) + 0.1 * np.sin(17 * x)
    env = E._concave_majorant(x, y)
    assert np.all(env >= y - 1e-12)
    assert np.all(np.diff(env, 2) <= 1e-12)


def test_complete_convergence_trivial():
    c = E.complete_convergence_check(0.0, [0], [0.5, 5, 20], 500, seed=1, stationary_reps=100)
    assert c.values[-1] <= 0.01
    e = E.complete_convergence_check(2.0, [], [1, 5], 300, seed=1, stationary_reps=500)
    assert np.all(e.values == 0)


def test_tau_tail_shape():
    c = E.estimate_tau_tail(2.0, 0, [0, 2, 4, 8], horizon=30, reps=3000, seed=2)
    assert np.all(np.diff(c.values) <= 0)
    assert 0 <= c.values[0] <= 1


def test_rho_trivial_and_monotone():
    e0 = E.estimate_rho(0.0, 0, [0.5, 1, 2], reps=200, seed=1,
                        cfg=E.stationary_config(0.0, (0,), radius=5, seed=1))
    assert e0.value == 0.0 and np.all(e0.meta["p"] == 1)
    e = E.estimate_rho(2.0, 0, [0.5, 1, 2, 3], reps=1500, seed=2)
    assert np.all(np.diff(e.meta["p"]) <= 0)


def test_shape_mixing_at_zero():
    c = E.shape_mixing_check(2.0, 0, 0.2, [0, 2], reps=1500, seed=3, stationary_reps=4000)
    assert c.meta["slices"][0] == [0]
    cfg0 = E.stationary_config(2.0, (0,), radius=40, seed=3)
    p = float((E.stationary_marginal(cfg0, 4000) == 1).mean())
    assert c.values[0] == pytest.approx(abs(1 - p))
    assert np.all((c.values >= 0) & (c.values <= 1))
