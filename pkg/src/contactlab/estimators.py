"""Estimators turning replicated samples into quantitative statements.

Every estimate carries a standard error, the number of replicates, the
censored fraction and the master seed. TV distances between empirical
laws are plug-in estimates and come with their upward bias
``0.5 * sqrt(k / m)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from . import process as P
from .errors import AcceptanceError
from .graph import Graph, GraphSpec, truncation_radius
from .graphical import Trajectory, as_mask
from .records import config_hash
from .stats import (atom_probs, batch_means, binom_se, linfit, plugin_bias, tv, tv_with_se)

__all__ = [
    "Estimate",
    "Curve",
    "MixingCurve",
    "RateFunctionEstimate",
    "stationary_config",
    "estimate_survival_prob",
    "estimate_lambda_c",
    "estimate_beta",
    "segment_atoms",
    "atoms_at",
    "occupation_time",
    "estimate_alpha_mixing",
    "estimate_d",
    "cutoff_curve",
    "estimate_clt",
    "estimate_rate_function",
    "complete_convergence_check",
    "estimate_tau_tail",
    "estimate_rho",
    "shape_mixing_check",
    "stationary_marginal",
]


@dataclass
class Estimate:
    value: float
    std_error: float
    replicates: int
    censored_fraction: float = 0.0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.std_error >= 0 or math.isnan(self.std_error)):
            raise ValueError("std_error must be nonnegative")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if not 0.0 <= self.censored_fraction <= 1.0:
            raise ValueError("censored_fraction outside [0, 1]")

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "replicates": self.replicates,
                "censored_fraction": self.censored_fraction, "seed": self.seed,
                "meta": self.meta}


@dataclass
class Curve:
    times: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.std_errors = np.asarray(self.std_errors, dtype=float)
        if self.times.size > 1 and not (np.diff(self.times) > 0).all():
            raise ValueError("times must be strictly increasing")

    def at(self, t: float) -> tuple[float, float]:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(t)
        return float(self.values[i]), float(self.std_errors[i])

    def to_dict(self) -> dict:
        return {"times": self.times, "values": self.values, "std_errors": self.std_errors,
                "meta": self.meta}


@dataclass
class MixingCurve(Curve):
    kind: str = "alpha_covariance"
    event_family: str = ""

    def __post_init__(self):
        super().__post_init__()
        if self.kind not in ("alpha_covariance", "tv_lower_bound"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        lo = -1.0 if self.kind == "alpha_covariance" else 0.0
        if ((self.values < lo - 1e-12) | (self.values > 1 + 1e-12)).any():
            raise ValueError("curve values out of range")

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(kind=self.kind, event_family=self.event_family)
        return d


@dataclass
class RateFunctionEstimate:
    grid: np.ndarray
    psi_hat: np.ndarray
    std_errors: np.ndarray
    concave_envelope: np.ndarray
    horizons: list
    status: list = field(default_factory=list)
    bounds: np.ndarray | None = None
    mean: float = float("nan")
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"grid": self.grid, "psi_hat": self.psi_hat, "std_errors": self.std_errors,
                "concave_envelope": self.concave_envelope, "horizons": self.horizons,
                "status": self.status, "bounds": self.bounds, "mean": self.mean,
                "meta": self.meta}


def _lattice_spec(dim: int = 1) -> GraphSpec:
    return GraphSpec("lattice", dim=dim, radius=1)


def stationary_config(lam: float, delta=(0,), burn_in: float = 20.0, horizon: float = 10.0,
                      radius: int | None = 30, seed: int = 0, dim: int = 1,
                      **kw) -> P.StationarySamplerConfig:
    """Burn-in sampler config on Z^d with an explicit truncation radius."""
    return P.StationarySamplerConfig(_lattice_spec(dim), tuple(delta), lam, burn_in, horizon,
                                     radius, seed, **kw)


def _as_graph(g, lam: float, horizon: float) -> Graph:
    if isinstance(g, GraphSpec):
        return P.growth_graph(g, lam, horizon)
    return g


# ---------------------------------------------------------------------------
# survival, critical value and speed


def _survival_counts(g: Graph, lam: float, x, horizon: float, reps: int, seed: int,
                     lam_gen: float | None = None):
    r = P.survival_batch(g, lam, [x], horizon, reps, seed, guard=g.boundary,
                         stop_on_guard=True, lam_gen=lam_gen)
    guard_hit = np.isfinite(r["guard"])
    alive = ~np.isfinite(r["ext"])
    half = alive | (r["ext"] > horizon / 2)
    return alive, half, guard_hit, r


def estimate_survival_prob(g, lam: float, x=None, horizon: float = 100.0, reps: int = 1000,
                           seed: int = 0, lam_gen: float | None = None) -> Estimate:
    """Fraction of runs from ``{x}`` still alive at ``horizon``.

    Runs reaching the truncation boundary are stopped and counted as
    survivors; their share is reported as ``guard_fraction``.
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    g = _as_graph(g, lam if lam_gen is None else lam_gen, horizon)
    x = g.origin if x is None else x
    alive, half, guard_hit, _ = _survival_counts(g, lam, x, horizon, reps, seed, lam_gen)
    p = float(alive.mean())
    ph = float(half.mean())
    return Estimate(p, binom_se(p, reps), reps, censored_fraction=p, seed=seed,
                    meta={"half_horizon_value": ph, "half_horizon_se": binom_se(ph, reps),
                          "guard_fraction": float(guard_hit.mean()), "horizon": horizon,
                          "lam": lam, "config_hash": config_hash(
                              {"op": "survival", "graph": g.spec, "lam": lam, "x": g.label(x),
                               "horizon": horizon, "reps": reps, "seed": seed})})


def estimate_lambda_c(spec: GraphSpec, horizon: float = 200.0, reps: int = 2000,
                      bracket: tuple[float, float] = (1.0, 2.5), tolerance: float = 0.02,
                      threshold: float = 0.05, seed: int = 0) -> Estimate:
    """Bisection for the rate at which survival to ``horizon`` crosses ``threshold``.

    All evaluations share seeds and thin the arrows of rate ``bracket[1]``,
    so the survival indicator of each replicate is monotone in lambda and
    the bisection sees a monotone function. The value is the midpoint of
    the final bracket, the std error its half-width.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must be increasing")
    g = _as_graph(spec, hi, horizon)
    x = g.origin
    table = []

    def surv(lam):
        alive, half, guard_hit, _ = _survival_counts(g, lam, x, horizon, reps, seed, lam_gen=hi)
        row = {"lam": lam, "p": float(alive.mean()), "p_half": float(half.mean()),
               "guard_fraction": float(guard_hit.mean())}
        table.append(row)
        return row["p"]

    p_lo, p_hi = surv(lo), surv(hi)
    if not (p_lo < threshold <= p_hi):
        raise ValueError(f"bracket {bracket} does not straddle the threshold: "
                         f"survival {p_lo:.3f} at {lo}, {p_hi:.3f} at {hi}")
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if surv(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    # crossing of the half-horizon survival among evaluated points, for sensitivity
    half_cross = min((r["lam"] for r in table if r["p_half"] >= threshold), default=float("nan"))
    return Estimate(0.5 * (lo + hi), 0.5 * (hi - lo), reps, seed=seed,
                    meta={"bracket": [lo, hi], "evaluations": sorted(table, key=lambda r: r["lam"]),
                          "threshold": threshold, "horizon": horizon,
                          "half_horizon_upper": half_cross, "graph": spec.family,
                          "config_hash": config_hash({"op": "lambda_c", "spec": spec,
                                                      "horizon": horizon, "reps": reps,
                                                      "bracket": bracket, "seed": seed})})


def _hitting_times(g: Graph, lam: float, target: int, horizon: float, reps: int, seed: int,
                   floor: float = P.DEFAULT_FLOOR):
    """Hitting times of ``target`` from the origin among runs surviving to ``horizon``."""
    r = P.survival_batch(g, lam, [g.origin], horizon, reps, seed, target=target)
    ok = ~np.isfinite(r["ext"])
    if ok.mean() < floor:
        raise AcceptanceError("survival filter below floor", acceptance_rate=float(ok.mean()),
                              attempts=reps, floor=floor)
    return r["hit"][ok], int(ok.sum())


def estimate_beta(lam: float, n_list: Sequence[int] = (10, 20, 40), reps: int = 400,
                  seed: int = 0, dim: int = 1, horizon: Callable[[int], float] | None = None,
                  radius: int | None = None) -> Estimate:
    """Time per site of the spread, from conditioned hitting times of ``n e_1``.

    ``beta`` is the slope of a weighted linear fit of the mean hitting time
    against ``n``. Survivors that never hit the target within the horizon
    are censored; their share is reported.
    """
    horizon = horizon or (lambda n: 3.0 * n + 30.0)
    means, ses, per_n, cens_total, acc_total = [], [], [], 0, 0
    H = max(horizon(n) for n in n_list)
    R = radius or truncation_radius([(0,) * dim] if dim > 1 else [0], H, lam, 2 * dim, 1.0)
    R = max(R, max(n_list) + 1)
    g = P.cached_graph(GraphSpec("lattice", dim=dim, radius=R))
    for i, n in enumerate(n_list):
        tgt = g.index(n if dim == 1 else (n,) + (0,) * (dim - 1))
        hits, acc = _hitting_times(g, lam, tgt, horizon(n), reps, seed + 7919 * i)
        done = np.isfinite(hits)
        cens_total += int((~done).sum())
        acc_total += acc
        h = hits[done]
        m = float(h.mean()) if h.size else float("nan")
        s = float(h.std(ddof=1) / math.sqrt(h.size)) if h.size > 1 else float("nan")
        means.append(m)
        ses.append(s)
        per_n.append({"n": n, "mean": m, "se": s, "accepted": acc, "censored": int((~done).sum()),
                      "horizon": horizon(n), "mean_per_site": m / n})
    ns = np.asarray(n_list, dtype=float)
    fit = linfit(ns, np.asarray(means), 1.0 / np.asarray(ses) ** 2)
    for row, res in zip(per_n, fit["residuals"]):
        row["residual"] = float(res)
        row["residual_per_n"] = float(res / row["n"])
    return Estimate(fit["slope"], fit["slope_se"], acc_total,
                    censored_fraction=cens_total / max(acc_total, 1), seed=seed,
                    meta={"per_n": per_n, "intercept": fit["intercept"], "r2": fit["r2"],
                          "lam": lam, "radius": R,
                          "config_hash": config_hash({"op": "beta", "lam": lam, "n": list(n_list),
                                                      "reps": reps, "seed": seed, "dim": dim})})


# ---------------------------------------------------------------------------
# trajectories as atom sequences


def segment_atoms(tr: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Atom code after each event of ``tr``, preceded by the initial atom.

    Bit ``i`` of an atom is the state of ``tr.delta[i]``. Each event flips
    exactly one bit, so the codes are a running XOR.
    """
    d = len(tr.delta)
    if d > 62:
        raise ValueError("delta too large for atom codes")
    w = np.int64(1) << np.arange(d, dtype=np.int64)
    a0 = np.int64((tr.initial.astype(np.int64) * w).sum())
    if tr.times.size == 0:
        return np.empty(0), np.array([a0])
    flips = w[tr._pos()]
    codes = np.bitwise_xor.accumulate(np.concatenate([[a0], flips]))
    return tr.times, codes


def atoms_at(tr: Trajectory, ts) -> np.ndarray:
    times, codes = segment_atoms(tr)
    return codes[np.searchsorted(times, np.asarray(ts, dtype=float), side="right")]


def _tabulate(f: Callable, d: int) -> np.ndarray:
    if d > 16:
        raise ValueError("delta too large to tabulate f over atoms")
    k = 1 << d
    bits = (np.arange(k)[:, None] >> np.arange(d)[None, :]) & 1
    return np.array([float(f(b.astype(np.uint8))) for b in bits])


def occupation_time(tr: Trajectory, f: Callable, t: float | None = None,
                    table: np.ndarray | None = None) -> float:
    """Exact integral of ``f(state on delta)`` over ``[t0, t0 + t]``."""
    t0, t1 = tr.window
    t = t1 - t0 if t is None else t
    if t < 0 or t0 + t > t1 + 1e-9:
        raise ValueError(f"trajectory window {tr.window} does not cover [{t0}, {t0 + t}]")
    table = _tabulate(f, len(tr.delta)) if table is None else table
    times, codes = segment_atoms(tr)
    edges = np.concatenate([[t0], times[times < t0 + t], [t0 + t]])
    dur = np.diff(edges)
    return float((table[codes[: dur.size]] * dur).sum())


# ---------------------------------------------------------------------------
# mixing


def stationary_marginal(cfg: P.StationarySamplerConfig, reps: int, vertices=None,
                        t: float = 0.0, start: int = 0, seed_offset: int = 0x5EED) -> np.ndarray:
    """Joint single-time atoms on ``vertices`` (default delta) from duals."""
    g = cfg.build()
    vs = cfg.delta_indices(g) if vertices is None else g.indices(vertices)
    c = cfg.with_(seed=cfg.seed ^ seed_offset)
    bits = P.stationary_snapshot(c, [(v, t) for v in vs], reps, start=start, g=g)
    return P._atoms(bits)


def _default_events(d: int) -> tuple[list[np.ndarray], str]:
    k = 1 << d
    if d <= 6:
        return [np.arange(k) == a for a in range(k)], "all atoms"
    if d > 12:
        raise ValueError("delta too large for the default event family")
    codes = np.arange(k)
    ev = [((codes >> i) & 1) == 1 for i in range(d)]
    ev += [codes == 0, codes == k - 1]
    return ev, "singletons, all-zero, all-one"


def estimate_alpha_mixing(cfg: P.StationarySamplerConfig, t_grid: Sequence[float],
                          events: Sequence | None = None, length: float = 2e5,
                          step: float = 0.05, n_batches: int = 20) -> MixingCurve:
    """Max single-time covariance ``|P(A, B_t) - P(A) P(B_t)|`` along one long run.

    Events are boolean masks over the atoms of delta. The run is sampled
    on a grid of spacing ``step`` and split into ``n_batches`` batches for
    standard errors.
    """
    d = len(cfg.delta)
    if events is None:
        evs, fam = _default_events(d)
    else:
        evs, fam = [np.asarray(e, dtype=bool) for e in events], "custom"
    tr = P.long_stationary_run(cfg, length)
    grid = np.arange(0.0, length, step)
    codes = atoms_at(tr, grid)
    ind = np.stack([e[codes] for e in evs]).astype(np.float64)
    vals, ses, best = [], [], []
    nb = n_batches
    for t in t_grid:
        lag = int(round(t / step))
        if abs(lag * step - t) > 1e-9:
            raise ValueError("t_grid must be multiples of step")
        a = ind[:, : ind.shape[1] - lag]
        b = ind[:, lag:]
        m = a.shape[1] // nb * nb
        a, b = a[:, :m], b[:, :m]
        pab = (a[:, None, :] * b[None, :, :]).reshape(len(evs), len(evs), nb, -1).mean(axis=3)
        pa = a.reshape(len(evs), nb, -1).mean(axis=2)
        pb = b.reshape(len(evs), nb, -1).mean(axis=2)
        cov_b = pab - pa[:, None, :] * pb[None, :, :]
        cov = (a @ b.T) / m - np.outer(a.mean(axis=1), b.mean(axis=1))
        i, j = np.unravel_index(np.argmax(np.abs(cov)), cov.shape)
        vals.append(abs(float(cov[i, j])))
        ses.append(float(cov_b[i, j].std(ddof=1) / math.sqrt(nb)))
        best.append((int(i), int(j)))
    return MixingCurve(np.asarray(t_grid, float), vals, ses, kind="alpha_covariance",
                       event_family=fam,
                       meta={"length": length, "step": step, "batches": nb, "argmax": best,
                             "radius": tr.meta["radius"],
                             "seed": cfg.seed, "delta": list(cfg.delta),
                             "config_hash": config_hash({"op": "alpha", "cfg": cfg.__dict__,
                                                         "length": length, "step": step})})


def _default_pasts(d: int, t_past: float) -> list:
    pos = tuple(range(d))
    return [P.Cylinder.all_zero(pos, t_past), P.Cylinder.all_one(pos, t_past)]


def estimate_d(cfg: P.StationarySamplerConfig, t_grid: Sequence[float], pasts: Sequence | None = None,
               t_past: float = 1.0, attempts: int = 10000, stationary_reps: int | None = None,
               floor: float = P.DEFAULT_FLOOR) -> MixingCurve:
    """Lower bound on the mixing distance from a finite family of pasts.

    For each past cylinder and each ``t``: plug-in TV between the law of
    the atom on delta at ``t`` given the past and the stationary single-time
    law. The curve is the max over pasts. ``pasts`` entries are callables
    on trajectories; ``None`` entries mean the vacuous past.
    """
    d = len(cfg.delta)
    if d > 12:
        raise ValueError("atom count cap: |delta| must be at most 12")
    k = 1 << d
    pasts = _default_pasts(d, t_past) if pasts is None else list(pasts)
    t_grid = np.asarray(t_grid, dtype=float)
    c = cfg.with_(horizon=max(float(t_grid.max()), 1e-9))
    trs = list(P.stationary_trajectories(c, attempts, t_past))
    acc = [[tr for tr in trs if (p is None or p(tr))] for p in pasts]
    for p, a in zip(pasts, acc):
        P._accept_floor_check(len(a), attempts, floor, f"past {getattr(p, 'name', p)}")
    m_stat = stationary_reps or 4 * attempts
    q = atom_probs(stationary_marginal(cfg, m_stat), k)
    per_past = []
    for a in acc:
        codes = np.stack([atoms_at(tr, t_grid) for tr in a])
        row = [tv_with_se(atom_probs(codes[:, j], k), len(a), q, m_stat) for j in range(len(t_grid))]
        per_past.append(row)
    vals, ses, which = [], [], []
    for j in range(len(t_grid)):
        i = int(np.argmax([r[j][0] for r in per_past]))
        vals.append(min(per_past[i][j][0], 1.0))
        ses.append(per_past[i][j][1])
        which.append(i)
    m_min = min(len(a) for a in acc)
    names = [getattr(p, "name", "vacuous" if p is None else repr(p)) for p in pasts]
    return MixingCurve(t_grid, vals, ses, kind="tv_lower_bound",
                       event_family=f"pasts: {', '.join(names)} on [-{t_past}, 0]; "
                                    f"futures: single-time atoms",
                       meta={"attempts": attempts, "accepted": [len(a) for a in acc],
                             "argmax_past": which, "plugin_bias": plugin_bias(k, m_min),
                             "per_past": [[r[j][0] for j in range(len(t_grid))] for r in per_past],
                             "stationary_reps": m_stat, "seed": cfg.seed,
                             "lower_bound": True,
                             "config_hash": config_hash({"op": "d", "cfg": cfg.__dict__,
                                                         "t": t_grid, "attempts": attempts,
                                                         "t_past": t_past})})


def cutoff_curve(lam: float, n_list: Sequence[int], epsilon: float, r: int, beta_hat: float,
                 reps: int = 4000, seed: int = 0, dim: int = 1, stationary_reps: int = 20000,
                 burn_in: float = 20.0, radius: int | None = None) -> list[dict]:
    """TV to stationarity on the radius-``r`` box for the interior-healthy start.

    Rows carry ``n``, ``branch`` (``-`` for ``(1-eps)``, ``+`` for
    ``(1+eps)``), ``t``, ``tv``, ``se`` and ``bias``.
    """
    if r > min(n_list):
        raise ValueError("r must not exceed the smallest n")
    box = P._box(dim, r)
    cfg = stationary_config(lam, box, burn_in=burn_in, radius=radius or 40, seed=seed,
                            dim=dim)
    k = 1 << len(box)
    q = atom_probs(stationary_marginal(cfg, stationary_reps), k)
    rows = []
    for n in n_list:
        for branch, fac in (("-", 1 - epsilon), ("+", 1 + epsilon)):
            t = beta_hat * n * fac
            res = P.interior_healthy_batch(n, r, lam, t, reps, seed + 104729 * n, dim=dim,
                                           radius=radius)
            p = atom_probs(res["atoms"], k)
            v, s = tv_with_se(p, reps, q, stationary_reps)
            rows.append({"n": n, "branch": branch, "t": t, "tv": v, "se": s,
                         "bias": plugin_bias(k, reps), "reps": reps,
                         "p_all_zero": float(p[0])})
    return rows


# ---------------------------------------------------------------------------
# occupation times


def _long_run_stats(cfg, f_table, length, n_batches, step=None):
    tr = P.long_stationary_run(cfg, length)
    bl = length / n_batches
    means = []
    times, codes = segment_atoms(tr)
    for b in range(n_batches):
        a, z = b * bl, (b + 1) * bl
        inside = (times > a) & (times < z)
        k0 = np.searchsorted(times, a, side="right")
        edges = np.concatenate([[a], times[inside], [z]])
        dur = np.diff(edges)
        means.append(float((f_table[codes[k0: k0 + dur.size]] * dur).sum()) / bl)
    means = np.asarray(means)
    m = float(means.mean())
    se = float(means.std(ddof=1) / math.sqrt(n_batches))
    return m, se, tr.meta["radius"]


def estimate_clt(cfg: P.StationarySamplerConfig, f: Callable, t: float, reps: int,
                 long_length: float | None = None, n_batches: int = 50,
                 alpha: float = 0.01) -> dict:
    """Normal approximation of ``sqrt(t) (Z_t / t - m)`` across replicates.

    ``m`` and ``sigma^2`` come from one independent long run (batch means).
    """
    if reps < 100:
        raise ValueError("estimate_clt needs at least 100 replicates")
    d = len(cfg.delta)
    table = _tabulate(f, d)
    L = long_length or 500.0 * t
    long_cfg = cfg.with_(seed=cfg.seed ^ 0xC17)
    m_hat, m_se, long_radius = _long_run_stats(long_cfg, table, L, n_batches)
    sigma2 = m_se ** 2 * L
    c = cfg.with_(horizon=float(t))
    z = np.array([occupation_time(tr, f, t, table) / t for tr in P.stationary_trajectories(c, reps)])
    std = math.sqrt(t) * (z - m_hat)
    constant = float(np.ptp(table)) == 0.0
    degenerate = sigma2 < 1e-12
    if degenerate:
        ks, pval = float("nan"), float("nan")
    else:
        ks, pval = sps.kstest(std, "norm", args=(0.0, math.sqrt(sigma2)))
    return {"t": t, "reps": reps, "mean_hat": m_hat, "mean_se": m_se, "sigma2_hat": sigma2,
            "ks_statistic": float(ks), "p_value": float(pval),
            "rejected": bool(pval < alpha) if not degenerate else False,
            "degenerate": bool(degenerate), "flagged": bool(degenerate and not constant),
            "sample_mean": float(z.mean()), "sample_var_scaled": float(t * z.var(ddof=1)),
            "values": z, "long_length": L, "long_radius": long_radius, "seed": cfg.seed,
            "config_hash": config_hash({"op": "clt", "cfg": cfg.__dict__, "t": t, "reps": reps})}


def _concave_majorant(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least concave function above the points, evaluated at ``x``."""
    if x.size == 0:
        return y.copy()
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    hull = []
    for i in range(xs.size):
        while len(hull) >= 2:
            i1, i2 = hull[-2], hull[-1]
            if (ys[i2] - ys[i1]) * (xs[i] - xs[i1]) <= (ys[i] - ys[i1]) * (xs[i2] - xs[i1]):
                hull.pop()
            else:
                break
        hull.append(i)
    env = np.interp(xs, xs[hull], ys[hull])
    out = np.empty_like(env)
    out[order] = env
    return out


def estimate_rate_function(cfg: P.StationarySamplerConfig, f: Callable, grid: Sequence[float],
                           horizons: Sequence[float], reps: int, h: float | None = None,
                           min_hits: int = 20) -> RateFunctionEstimate:
    """Rate function of ``Z_t / t`` from interval probabilities across horizons.

    For each grid point ``x`` and horizon ``t``,
    ``p_t = P(Z_t / t in [x - h, x + h])``. With at least two horizons
    holding ``min_hits`` hits, ``log p_t`` is fitted linearly in ``t``
    (weights from the binomial delta method) and the slope, capped at 0,
    is the estimate. One usable horizon gives ``log(p_t) / t``; none gives
    only the bound ``log(1 / reps) / t_max``.

    ``status`` is ``fit`` (three or more usable horizons), ``short_fit``
    (two), ``single_horizon`` or ``sparse``. Only ``fit`` points count as
    having sufficient data.
    """
    grid = np.asarray(grid, dtype=float)
    horizons = sorted(float(t) for t in horizons)
    h = h if h is not None else (float(np.min(np.diff(grid))) / 2 if grid.size > 1 else 0.05)
    d = len(cfg.delta)
    table = _tabulate(f, d)
    zs = {}
    for i, t in enumerate(horizons):
        c = cfg.with_(horizon=t, seed=cfg.seed + 1000003 * (i + 1))
        zs[t] = np.array([occupation_time(tr, f, t, table) / t
                          for tr in P.stationary_trajectories(c, reps)])
    mean = float(np.mean(zs[horizons[-1]]))
    psi = np.full(grid.size, np.nan)
    se = np.full(grid.size, np.nan)
    bound = np.full(grid.size, np.nan)
    raw = np.full(grid.size, np.nan)
    used = []
    status = []
    for gi, x in enumerate(grid):
        ts, lp, w = [], [], []
        for t in horizons:
            hits = int(((zs[t] >= x - h) & (zs[t] <= x + h)).sum())
            if hits >= min_hits:
                p = hits / reps
                ts.append(t)
                lp.append(math.log(p))
                w.append(1.0 / ((1 - p) / (p * reps) + 1e-300))
        used.append(ts)
        if len(ts) >= 2:
            ts_, lp_, w_ = map(np.asarray, (ts, lp, w))
            W = w_.sum()
            tm = (w_ * ts_).sum() / W
            sxx = (w_ * (ts_ - tm) ** 2).sum()
            slope = (w_ * (ts_ - tm) * (lp_ - (w_ * lp_).sum() / W)).sum() / sxx
            psi[gi] = min(slope, 0.0)
            raw[gi] = slope
            se[gi] = math.sqrt(1.0 / sxx)
            status.append("fit" if len(ts) >= 3 else "short_fit")
        elif len(ts) == 1:
            psi[gi] = min(lp[0] / ts[0], 0.0)
            raw[gi] = lp[0] / ts[0]
            se[gi] = math.sqrt(1.0 / w[0]) / ts[0]
            status.append("single_horizon")
        else:
            bound[gi] = math.log(1.0 / reps) / horizons[-1]
            status.append("sparse")
    if all(s == "sparse" for s in status):
        raise ValueError("every grid point is too sparse for an estimate")
    ok = ~np.isnan(psi)
    env = np.full(grid.size, np.nan)
    env[ok] = _concave_majorant(grid[ok], psi[ok])
    return RateFunctionEstimate(grid, psi, se, env, horizons, status, bound, mean,
                                meta={"h": h, "reps": reps, "min_hits": min_hits,
                                      "psi_raw": raw, "horizons_used": used,
                                      "seed": cfg.seed,
                                      "config_hash": config_hash({"op": "ldp", "cfg": cfg.__dict__,
                                                                  "grid": grid, "horizons": horizons,
                                                                  "reps": reps, "h": h})})


# ---------------------------------------------------------------------------
# convergence from finite sets, tails, all-healthy decay, cone mixing


def _bootstrap_tv(codes_t, alive_flags, stat_codes, k, rng, n_boot=200):
    m = codes_t.size
    ms = stat_codes.size
    vals = np.empty(n_boot)
    for b in range(n_boot):
        i = rng.integers(0, m, m)
        j = rng.integers(0, ms, ms)
        w = alive_flags[i].mean()
        q = (1 - w) * (np.arange(k) == 0) + w * atom_probs(stat_codes[j], k)
        vals[b] = tv(atom_probs(codes_t[i], k), q)
    return float(vals.std(ddof=1))


def complete_convergence_check(lam: float, initial, t_grid: Sequence[float], reps: int,
                               seed: int = 0, window_radius: int = 1, horizon: float | None = None,
                               stationary_reps: int = 20000, dim: int = 1,
                               burn_in: float = 20.0) -> Curve:
    """TV on a small window between the law from ``initial`` and the extinction mixture.

    The mixture weights ``P(tau <= horizon)`` on the all-healthy atom and
    ``P(tau > horizon)`` on the stationary marginal. Standard errors are
    bootstrapped over both batches.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    H = horizon or max(2.0 * float(t_grid.max()), 50.0)
    box = P._box(dim, window_radius)
    k = 1 << len(box)
    spec = GraphSpec("lattice", dim=dim, radius=1)
    R = max(truncation_radius(list(initial) or [0], H, lam, 2 * dim, 1.0), window_radius + 1)
    g = P.cached_graph(spec.with_radius(R))
    init = g.indices(list(initial))
    win = g.indices(box)
    r = P._batch(g, lam, P.replica_seeds(seed, reps), as_mask(g.n, init), depth=H, snap=t_grid,
                 snap_vertices=win)
    alive = ~np.isfinite(r["ext"])
    w = float(alive.mean())
    if lam == 0 or w == 0:
        stat = np.zeros(1, dtype=np.int64)
    else:
        cfg = stationary_config(lam, box, burn_in=burn_in, radius=40, seed=seed, dim=dim)
        stat = stationary_marginal(cfg, stationary_reps)
    q = (1 - w) * (np.arange(k) == 0) + w * atom_probs(stat, k)
    rng = np.random.default_rng(seed)
    vals, ses = [], []
    for j in range(t_grid.size):
        codes = r["snaps"][:, j]
        vals.append(tv(atom_probs(codes, k), q))
        ses.append(_bootstrap_tv(codes, alive, stat, k, rng) if w > 0 else 0.0)
    return Curve(t_grid, vals, ses, meta={"survival_weight": w, "horizon": H, "reps": reps,
                                          "stationary_reps": stat.size,
                                          "plugin_bias": plugin_bias(k, reps), "seed": seed})


def estimate_tau_tail(lam: float, x=0, t_grid: Sequence[float] = tuple(range(2, 21, 2)),
                      horizon: float = 60.0, reps: int = 20000, seed: int = 0,
                      graph: Graph | None = None, fit_range: tuple[float, float] | None = None) -> Curve:
    """Curve ``P(t < tau < horizon)`` with binomial errors and a log-linear fit."""
    t_grid = np.asarray(t_grid, dtype=float)
    if horizon <= t_grid.max():
        raise ValueError("horizon must exceed the grid")
    g = graph or P.cached_graph(GraphSpec("lattice", radius=truncation_radius([x], horizon, lam,
                                                                                 2, 1.0)))
    xi = g.index(x)
    r = P.survival_batch(g, lam, [xi], horizon, reps, seed)
    tau = r["ext"]
    p = np.array([float(((tau > t) & np.isfinite(tau)).mean()) for t in t_grid])
    se = np.array([binom_se(v, reps) for v in p])
    lo, hi = fit_range or (float(t_grid.min()), float(t_grid.max()))
    sel = (t_grid >= lo) & (t_grid <= hi) & (p > 0)
    fit = None
    if sel.sum() >= 3:
        counts = p[sel] * reps
        fit = linfit(t_grid[sel], np.log(p[sel]), counts)
        fit = {k: v for k, v in fit.items() if k != "residuals"}
    return Curve(t_grid, p, se, meta={"fit": fit, "horizon": horizon, "reps": reps,
                                      "survivors": int((~np.isfinite(tau)).sum()), "seed": seed})


def estimate_rho(lam: float, x=0, t_grid: Sequence[float] = (0.5, 1, 1.5, 2, 2.5, 3, 4, 5),
                 reps: int = 20000, seed: int = 0, cfg: P.StationarySamplerConfig | None = None,
                 min_count: int = 20) -> Estimate:
    """Decay rate of ``P(x healthy throughout [0, t))`` under stationarity.

    The fit stops at the first grid point with fewer than ``min_count``
    events.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    cfg = cfg or stationary_config(lam, (x,), horizon=float(t_grid.max()), seed=seed)
    cfg = cfg.with_(horizon=float(t_grid.max()))
    first = np.empty(reps)
    for i, tr in enumerate(P.stationary_trajectories(cfg, reps)):
        if tr.initial[0]:
            first[i] = 0.0
        else:
            ups = tr.times[tr.states == 1]
            first[i] = ups[0] if ups.size else np.inf
    counts = np.array([(first >= t).sum() for t in t_grid])
    p = counts / reps
    se = np.array([binom_se(v, reps) for v in p])
    keep = np.ones(t_grid.size, dtype=bool)
    low = np.flatnonzero(counts < min_count)
    if low.size:
        keep[low[0]:] = False
    if (p[keep] == 1).all():
        rho, rho_se, r2 = 0.0, 0.0, 1.0
    else:
        fit = linfit(t_grid[keep], np.log(p[keep]), counts[keep].astype(float))
        rho, rho_se, r2 = fit["slope"], fit["slope_se"], fit["r2"]
    return Estimate(rho, rho_se, reps, censored_fraction=0.0, seed=cfg.seed,
                    meta={"t": t_grid, "p": p, "p_se": se, "fit_points": int(keep.sum()),
                          "r2": r2, "config_hash": config_hash({"op": "rho", "cfg": cfg.__dict__,
                                                                "t": t_grid, "reps": reps})})


def _slice(y: int, theta: float, t: float, cap: int = 12, dim: int = 1) -> list:
    if dim != 1:
        raise NotImplementedError("cone slices are implemented on Z")
    rad = int(math.floor(theta * t + 1e-12))
    xs = sorted(range(y - rad, y + rad + 1), key=lambda v: (abs(v - y), v))[:cap]
    return sorted(xs)


def shape_mixing_check(lam: float, y: int = 0, theta: float = 0.2,
                       t_grid: Sequence[float] = (0, 1, 2, 5, 10), reps: int = 20000,
                       seed: int = 0, horizon: float | None = None,
                       stationary_reps: int = 20000, burn_in: float = 20.0,
                       floor: float = P.DEFAULT_FLOOR) -> Curve:
    """TV on the cone slice ``|x - y| <= theta t`` between the run from ``{y}``
    conditioned on survival to ``horizon`` and the stationary marginal."""
    t_grid = np.asarray(t_grid, dtype=float)
    H = horizon or float(t_grid.max()) + 40.0
    slices = [_slice(y, theta, t) for t in t_grid]
    allv = sorted(set().union(*slices))
    R = truncation_radius([y], H, lam, 2, 1.0)
    g = P.cached_graph(GraphSpec("lattice", radius=R))
    sv = g.indices(allv)
    r = P._batch(g, lam, P.replica_seeds(seed, reps), as_mask(g.n, [g.index(y)]), depth=H,
                 snap=t_grid, snap_vertices=sv)
    ok = ~np.isfinite(r["ext"])
    P._accept_floor_check(int(ok.sum()), reps, floor, "shape_mixing_check survival filter")
    snaps = r["snaps"][ok]
    cfg = stationary_config(lam, tuple(allv), burn_in=burn_in, radius=40, seed=seed)
    stat_all = stationary_marginal(cfg, stationary_reps)
    vals, ses, biases = [], [], []
    for j, sl in enumerate(slices):
        pos = [allv.index(v) for v in sl]
        sub = lambda codes: sum(((codes >> p) & 1) << i for i, p in enumerate(pos))
        k = 1 << len(sl)
        v, s = tv_with_se(atom_probs(sub(snaps[:, j]), k), int(ok.sum()),
                          atom_probs(sub(stat_all), k), stationary_reps)
        vals.append(v)
        ses.append(s)
        biases.append(plugin_bias(k, int(ok.sum())))
    return Curve(t_grid, vals, ses, meta={"slices": slices, "accepted": int(ok.sum()),
                                          "acceptance_rate": float(ok.mean()),
                                          "plugin_bias": biases, "horizon": H, "seed": seed,
                                          "theta": theta})
