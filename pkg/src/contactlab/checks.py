"""Property checks of the engine: coupling, additivity, duality, correlation
inequalities and agreement with the generator."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from . import _engine
from . import process as P
from .graph import Graph, GraphSpec
from .graphical import Configuration, as_mask, evolve, sample_graphical
from .stats import atom_probs, chi2_two_sample, plugin_bias, tv_with_se, two_proportion_test

__all__ = [
    "CheckReport",
    "IncreasingEvent",
    "check_monotone_coupling",
    "check_additivity",
    "check_self_duality",
    "check_positive_association",
    "check_dfkg",
    "check_generator_equivalence",
    "rate_matrix",
    "exact_law",
    "faulty_evolve",
]

SIGNIFICANCE = 0.01


@dataclass
class CheckReport:
    name: str
    verdict: str
    statistic: float
    threshold: float
    replicates: int
    seed: int
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in ("pass", "fail", "inconclusive"):
            raise ValueError(f"bad verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"name": self.name, "verdict": self.verdict, "statistic": self.statistic,
                "threshold": self.threshold, "replicates": self.replicates, "seed": self.seed,
                "details": self.details}


@dataclass(frozen=True)
class IncreasingEvent:
    """Set of atoms over ``d`` delta positions at time ``t``, closed upward.

    Atom bit ``i`` is the state of delta position ``i``. Construction fails
    if some atom in the set has a superset outside it.
    """

    d: int
    atoms: frozenset
    t: float = 0.0
    name: str = ""

    def __post_init__(self):
        k = 1 << self.d
        for a in self.atoms:
            if not 0 <= a < k:
                raise ValueError(f"atom {a} out of range for {self.d} positions")
            for i in range(self.d):
                if (a | (1 << i)) not in self.atoms:
                    raise ValueError(f"event {self.name or sorted(self.atoms)} is not increasing")

    @classmethod
    def from_predicate(cls, d: int, pred: Callable, t: float = 0.0, name: str = ""):
        k = 1 << d
        atoms = frozenset(a for a in range(k) if pred(np.array([(a >> i) & 1 for i in range(d)])))
        return cls(d, atoms, t, name)

    @classmethod
    def infected(cls, i: int, d: int, t: float = 0.0):
        return cls.from_predicate(d, lambda s: s[i] == 1, t, f"xi_{t:g}({i})=1")

    @classmethod
    def any_infected(cls, d: int, t: float = 0.0):
        return cls.from_predicate(d, lambda s: s.any(), t, f"any infected at {t:g}")

    @classmethod
    def all_infected(cls, d: int, t: float = 0.0):
        return cls.from_predicate(d, lambda s: s.all(), t, f"all infected at {t:g}")

    @classmethod
    def sure(cls, d: int, t: float = 0.0):
        return cls(d, frozenset(range(1 << d)), t, "sure event")

    def mask(self) -> np.ndarray:
        m = np.zeros(1 << self.d, dtype=bool)
        m[list(self.atoms)] = True
        return m

    def __call__(self, codes: np.ndarray) -> np.ndarray:
        return self.mask()[codes]


def _report(name, bad, threshold, reps, seed, **details) -> CheckReport:
    return CheckReport(name, "pass" if bad <= threshold else "fail", float(bad), float(threshold),
                       reps, seed, details)


# ---------------------------------------------------------------------------
# deterministic checks on shared samples


def faulty_evolve(sample, initial, record=None, t_end=None):
    """Deliberately wrong engine for fault injection: runs from the complement."""
    flipped = Configuration(1 - initial.bits, initial.time_tag)
    return evolve(sample, flipped, record, t_end)


def _random_subset(rng, n, p=None):
    p = rng.uniform(0.05, 0.6) if p is None else p
    return rng.random(n) < p


def _states_on(trs, ts):
    return [tr.states_at(ts) for tr in trs]


def check_monotone_coupling(g: Graph, lam: float, reps: int = 10000, seed: int = 0,
                            horizon: float = 5.0, evolve_fn=evolve) -> CheckReport:
    """Pointwise order of runs from nested sets on shared samples, at every event time."""
    rng = np.random.default_rng(seed)
    violations = 0
    compared = 0
    for i in range(reps):
        B = _random_subset(rng, g.n)
        A = B & _random_subset(rng, g.n, rng.uniform(0.2, 1.0))
        s = sample_graphical(g, (0.0, horizon), lam, P.replica_seed(seed, i))
        ta = evolve_fn(s, Configuration(A.astype(np.uint8), 0.0))
        tb = evolve_fn(s, Configuration(B.astype(np.uint8), 0.0))
        ts = np.union1d(np.union1d(ta.times, tb.times), [0.0])
        sa, sb = _states_on((ta, tb), ts)
        bad = int((sa > sb).any(axis=1).sum())
        violations += bad
        compared += ts.size
    return _report("monotone_coupling", violations, 0, reps, seed, lam=lam, n=g.n,
                   times_compared=compared)


def check_additivity(g: Graph, lam: float, reps: int = 10000, seed: int = 0,
                     horizon: float = 5.0, evolve_fn=evolve) -> CheckReport:
    """Run from ``A | B`` equals the pointwise max of the runs from ``A`` and ``B``."""
    rng = np.random.default_rng(seed ^ 0xADD)
    violations = 0
    compared = 0
    for i in range(reps):
        A = _random_subset(rng, g.n)
        B = _random_subset(rng, g.n)
        s = sample_graphical(g, (0.0, horizon), lam, P.replica_seed(seed ^ 0xADD, i))
        ta = evolve_fn(s, Configuration(A.astype(np.uint8), 0.0))
        tb = evolve_fn(s, Configuration(B.astype(np.uint8), 0.0))
        tu = evolve_fn(s, Configuration((A | B).astype(np.uint8), 0.0))
        ts = np.union1d(np.union1d(np.union1d(ta.times, tb.times), tu.times), [0.0])
        sa, sb, su = _states_on((ta, tb, tu), ts)
        violations += int((su != np.maximum(sa, sb)).any(axis=1).sum())
        compared += ts.size
    return _report("additivity", violations, 0, reps, seed, lam=lam, n=g.n,
                   times_compared=compared)


# ---------------------------------------------------------------------------
# statistical checks


def _hits(g, lam, src, dst, t, reps, seed):
    if t == 0:
        return np.full(reps, bool(set(src) & set(dst)))
    r = P._batch(g, lam, P.replica_seeds(seed, reps), as_mask(g.n, src), depth=t,
                 final_mask=as_mask(g.n, dst))
    return r["final"] > 0


def check_self_duality(g: Graph, lam: float, delta: Sequence[int], lam_set: Sequence[int],
                       t: float, reps: int = 100000, seed: int = 0,
                       alpha: float = SIGNIFICANCE) -> CheckReport:
    """``P(run from delta meets lam_set at t)`` vs the reverse, independent batches."""
    a = _hits(g, lam, delta, lam_set, t, reps, seed)
    b = _hits(g, lam, lam_set, delta, t, reps, seed ^ 0xD0A1)
    z, p = two_proportion_test(int(a.sum()), reps, int(b.sum()), reps)
    return CheckReport("self_duality", "pass" if p >= alpha else "fail", p, alpha, reps, seed,
                       {"p_forward": float(a.mean()), "p_reverse": float(b.mean()), "z": z,
                        "statistic_is": "p-value (fail below threshold)"})


def default_association_pairs(d: int) -> list[tuple[IncreasingEvent, IncreasingEvent]]:
    pairs = [(IncreasingEvent.infected(0, d, 0.0), IncreasingEvent.infected(d - 1, d, 1.0)),
             (IncreasingEvent.any_infected(d, 0.0), IncreasingEvent.all_infected(d, 1.0)),
             (IncreasingEvent.infected(0, d, 0.0), IncreasingEvent.infected(0, d, 2.0))]
    if d > 1:
        pairs.append((IncreasingEvent.infected(0, d, 0.0), IncreasingEvent.infected(1, d, 0.0)))
    pairs.append((IncreasingEvent.infected(0, d, 0.0), IncreasingEvent.sure(d, 1.0)))
    return pairs


def default_check_config(seed: int = 0) -> P.StationarySamplerConfig:
    return P.StationarySamplerConfig(GraphSpec("lattice", radius=1), (0, 1), 2.0, burn_in=20.0,
                                     horizon=2.0, radius=30, seed=seed)


def check_positive_association(cfg: P.StationarySamplerConfig | None = None,
                               pairs: Sequence | None = None, reps: int = 100000,
                               k_se: float = 3.0) -> CheckReport:
    """``P(A and B) >= P(A) P(B)`` for increasing single-time events on delta.

    States at the needed space-time points are computed jointly per
    replicate through duals on a shared graphical sample.
    """
    cfg = cfg or default_check_config()
    d = len(cfg.delta)
    pairs = default_association_pairs(d) if pairs is None else list(pairs)
    for A, B in pairs:
        for e in (A, B):
            if not isinstance(e, IncreasingEvent) or e.d != d:
                raise ValueError("events must be IncreasingEvent over delta")
    times = sorted({e.t for pr in pairs for e in pr})
    g = cfg.build()
    dv = cfg.delta_indices(g)
    bits = P.stationary_snapshot(cfg, [(v, t) for t in times for v in dv], reps, g=g)
    w = 1 << np.arange(d)
    codes = {t: (bits[:, j * d:(j + 1) * d].astype(np.int64) * w).sum(axis=1)
             for j, t in enumerate(times)}
    worst = math.inf
    rows = []
    for A, B in pairs:
        a = A(codes[A.t]).astype(float)
        b = B(codes[B.t]).astype(float)
        cov = float((a * b).mean() - a.mean() * b.mean())
        se = float(((a - a.mean()) * (b - b.mean())).std(ddof=1) / math.sqrt(reps))
        # pairs with a constant indicator carry no information about the sign
        if se > 0:
            worst = min(worst, cov / se)
        elif cov < 0:
            worst = -math.inf
        rows.append({"A": A.name, "B": B.name, "cov": cov, "se": se, "p_A": a.mean(),
                     "p_B": b.mean()})
    violations = sum(1 for r in rows if r["se"] > 0 and r["cov"] < -k_se * r["se"])
    violations += sum(1 for r in rows if r["se"] == 0 and r["cov"] < 0)
    return CheckReport("positive_association", "pass" if violations == 0 else "fail",
                       float(violations), 0.0, reps, cfg.seed,
                       {"pairs": rows, "min_cov_over_se": worst, "k_se": k_se})


def default_futures(d: int, t: float = 1.0) -> list[IncreasingEvent]:
    ev = [IncreasingEvent.infected(i, d, t) for i in range(d)]
    ev += [IncreasingEvent.any_infected(d, t), IncreasingEvent.all_infected(d, t)]
    return ev


def check_dfkg(cfg: P.StationarySamplerConfig | None = None,
               futures: Sequence[IncreasingEvent] | None = None, pasts: Sequence | None = None,
               t_past: float = 1.0, reps: int = 100000, k_se: float = 3.0,
               floor: float = P.DEFAULT_FLOOR) -> CheckReport:
    """All-zero past gives the smallest conditional probability of increasing futures.

    ``pasts`` must contain an all-zero cylinder; it defaults to the
    all-zero and all-one cylinders on ``[-t_past, 0]`` plus the vacuous
    past. Conditional positive association of future pairs under the
    all-zero past is checked too.
    """
    cfg = cfg or default_check_config()
    d = len(cfg.delta)
    futures = default_futures(d) if futures is None else list(futures)
    for e in futures:
        if not isinstance(e, IncreasingEvent) or e.d != d or e.t < 0:
            raise ValueError("futures must be IncreasingEvent over delta at times >= 0")
    pos = tuple(range(d))
    if pasts is None:
        pasts = [P.Cylinder.all_zero(pos, t_past), P.Cylinder.all_one(pos, t_past), None]
    zero_i = [i for i, p in enumerate(pasts)
              if isinstance(p, P.Cylinder) and p.state == 0 and p.positions == pos]
    if not zero_i:
        raise ValueError("pasts must include the all-zero cylinder on delta")
    zi = zero_i[0]
    T = max(max(e.t for e in futures), 1e-9)
    c = cfg.with_(horizon=T)
    tlist = sorted({e.t for e in futures})
    flags = np.zeros((len(pasts), reps), dtype=bool)
    codes = np.zeros((len(tlist), reps), dtype=np.int64)
    from .estimators import atoms_at
    for i, tr in enumerate(P.stationary_trajectories(c, reps, t_past)):
        for j, p in enumerate(pasts):
            flags[j, i] = True if p is None else bool(p(tr))
        codes[:, i] = atoms_at(tr, tlist)
    for j, p in enumerate(pasts):
        P._accept_floor_check(int(flags[j].sum()), reps, floor, f"dfkg past {j}")
    ind = np.stack([e(codes[tlist.index(e.t)]) for e in futures]).astype(float)
    rows = []
    violations = 0
    mz = int(flags[zi].sum())
    for fi, e in enumerate(futures):
        pz = float(ind[fi, flags[zi]].mean())
        for j, p in enumerate(pasts):
            if j == zi:
                continue
            m = int(flags[j].sum())
            pj = float(ind[fi, flags[j]].mean())
            se = math.sqrt(pz * (1 - pz) / mz + pj * (1 - pj) / m)
            bad = pz > pj + k_se * se
            violations += bad
            rows.append({"future": e.name, "past": getattr(p, "name", "vacuous"),
                         "p_zero": pz, "p_other": pj, "se": se, "violation": bool(bad)})
    assoc = []
    sub = ind[:, flags[zi]]
    for a in range(len(futures)):
        for b in range(a + 1, len(futures)):
            x, y = sub[a], sub[b]
            cov = float((x * y).mean() - x.mean() * y.mean())
            se = float(((x - x.mean()) * (y - y.mean())).std(ddof=1) / math.sqrt(mz))
            bad = cov < -k_se * se if se > 0 else cov < 0
            violations += bad
            assoc.append({"A": futures[a].name, "B": futures[b].name, "cov": cov, "se": se,
                          "violation": bool(bad)})
    return CheckReport("dfkg", "pass" if violations == 0 else "fail", float(violations), 0.0,
                       reps, cfg.seed, {"domination": rows, "conditional_association": assoc,
                                        "accepted": flags.sum(axis=1).tolist(), "t_past": t_past})


# ---------------------------------------------------------------------------
# generator


def rate_matrix(g: Graph, lam: float) -> np.ndarray:
    """Generator of the contact process on the ``2^n`` configurations of ``g``."""
    n = g.n
    k = 1 << n
    Q = np.zeros((k, k))
    for a in range(k):
        for x in range(n):
            if (a >> x) & 1:
                Q[a, a ^ (1 << x)] += 1.0
            else:
                inf_nb = sum((a >> y) & 1 for y in g.neighbors(x))
                if inf_nb:
                    Q[a, a | (1 << x)] += lam * inf_nb
        Q[a, a] = -Q[a].sum()
    return Q


def exact_law(g: Graph, lam: float, initial: int, t: float, tol: float = 1e-10) -> np.ndarray:
    """Atom law at ``t`` by the matrix exponential, checked by step doubling."""
    Q = rate_matrix(g, lam)
    P1 = expm(Q * t)
    half = expm(Q * t / 2)
    P2 = half @ half
    err = float(np.abs(P1 - P2).max())
    if err > tol:
        raise ArithmeticError(f"matrix exponential step-doubling error {err:.2e} above {tol:.0e}")
    row = P1[initial]
    return np.clip(row, 0.0, None) / row.clip(0.0, None).sum()


def check_generator_equivalence(g: Graph, lam: float, t: float, reps: int = 100000,
                                seed: int = 0, initial=None,
                                alpha: float = SIGNIFICANCE) -> CheckReport:
    """Graphical sweep vs direct simulation (chi-square), plus the exact law on <= 3 vertices."""
    if g.n > 5:
        raise ValueError("generator equivalence is limited to 5 vertices")
    init = as_mask(g.n, [0] if initial is None else initial)
    a0 = int((init.astype(np.int64) << np.arange(g.n)).sum())
    k = 1 << g.n
    allv = np.arange(g.n, dtype=np.int64)
    if t == 0:
        sweep_codes = np.full(reps, a0)
        direct_codes = np.full(reps, a0)
    else:
        r = P._batch(g, lam, P.replica_seeds(seed, reps), init, depth=t, snap=[t],
                     snap_vertices=allv)
        sweep_codes = r["snaps"][:, 0]
        dsnaps, _ = _engine.direct_batch(g.nbr_ptr, g.nbr_idx,
                                         P.replica_seeds(seed ^ 0xD1, reps), float(lam), float(t),
                                         init, np.array([float(t)]), allv)
        direct_codes = dsnaps[:, 0]
    ps = atom_probs(sweep_codes, k)
    pd = atom_probs(direct_codes, k)
    chi2, p = chi2_two_sample(ps * reps, pd * reps)
    details = {"chi2": chi2, "p_value": p, "sweep_law": ps, "direct_law": pd}
    ok = p >= alpha
    if g.n <= 3:
        ex = exact_law(g, lam, a0, t)
        bias = plugin_bias(k, reps)
        for name, law in (("sweep", ps), ("direct", pd)):
            v, se = tv_with_se(law, reps, ex, None)
            details[f"tv_{name}"] = v
            details[f"tv_{name}_se"] = se
            details[f"tv_{name}_ok"] = bool(v <= bias + 2 * se)
            ok = ok and details[f"tv_{name}_ok"]
        details["exact_law"] = ex
        details["plugin_bias"] = bias
    return CheckReport("generator_equivalence", "pass" if ok else "fail", p, alpha, reps, seed,
                       details)
