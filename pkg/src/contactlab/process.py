"""Samplers for the processes built on top of the graphical construction.

The upper stationary process is approximated by a burn-in from the
all-infected state. Conditioning (on survival, on a past event) is always
done by rejection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _engine
from .errors import AcceptanceError, TruncationError
from .graph import Graph, GraphSpec, build_graph, diameter, truncation_radius
from .graphical import (Configuration, Trajectory, as_mask, evolve, sample_graphical)
from .stats import atom_probs, tv

__all__ = [
    "StationarySamplerConfig",
    "CensoredTime",
    "Cylinder",
    "replica_seeds",
    "replica_seed",
    "sample_stationary_projection",
    "long_stationary_run",
    "stationary_trajectories",
    "stationary_snapshot",
    "choose_burn_in",
    "validate_truncation",
    "survival_time",
    "survival_batch",
    "condition_on_survival",
    "hitting_time",
    "coupling_time",
    "sample_conditioned_past",
    "conditioned_trajectories",
    "sample_interior_healthy",
    "interior_healthy_batch",
    "interior_healthy_forward",
    "rightmost_front",
    "growth_graph",
    "cached_graph",
    "DEFAULT_FLOOR",
]

DEFAULT_FLOOR = 1e-3


def replica_seeds(master: int, count: int, start: int = 0) -> np.ndarray:
    return _engine.seeds_for(np.uint64(master & 0xFFFFFFFFFFFFFFFF), int(start), int(count))


def replica_seed(master: int, i: int) -> int:
    return int(replica_seeds(master, 1, i)[0])


@lru_cache(maxsize=64)
def _cached(spec: GraphSpec) -> Graph:
    return build_graph(spec)


def cached_graph(spec: GraphSpec) -> Graph:
    if spec.family == "explicit":
        return build_graph(spec)
    return _cached(spec)


def _family_degree(spec: GraphSpec) -> int:
    if spec.family == "lattice":
        return 2 * spec.dim
    if spec.family == "halfline":
        return 2
    if spec.family == "regular_tree":
        return spec.degree
    return build_graph(spec).degree_bound


def growth_graph(spec: GraphSpec, lam: float, horizon: float, safety: float = 1.5,
                 center=None) -> Graph:
    """Truncation wide enough for growth from ``center`` over ``horizon``.

    Explicit graphs and trees keep their own truncation.
    """
    if spec.family in ("explicit", "regular_tree"):
        return cached_graph(spec)
    D = _family_degree(spec)
    pts = [center if center is not None else (0 if spec.dim == 1 or spec.family == "halfline"
                                              else (0,) * spec.dim)]
    r = truncation_radius(pts, horizon, lam, D, safety)
    return cached_graph(spec.with_radius(max(r, 1)))


@dataclass(frozen=True)
class CensoredTime:
    value: float
    censored: bool = False

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("negative time")


@dataclass(frozen=True)
class StationarySamplerConfig:
    """Configuration of the burn-in sampler of the upper stationary process.

    ``delta`` holds vertex labels of the family (lattice coordinates).
    ``radius`` overrides the branching-bound truncation radius.
    """

    graph: GraphSpec
    delta: tuple
    lam: float
    burn_in: float = 20.0
    horizon: float = 10.0
    radius: int | None = None
    seed: int = 0
    burn_in_tolerance: float = 0.005
    truncation_tolerance: float = 0.01
    safety: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(self.delta))
        if self.burn_in <= 0 or self.horizon <= 0:
            raise ValueError("burn_in and horizon must be positive")
        if not self.delta:
            raise ValueError("delta must be nonempty")

    @property
    def degree(self) -> int:
        return _family_degree(self.graph)

    def truncation(self, extra_time: float = 0.0) -> int:
        if self.radius is not None:
            return int(self.radius)
        if self.graph.family in ("explicit",):
            return 0
        if self.graph.family == "regular_tree":
            return int(self.graph.depth)
        return truncation_radius(self.delta, self.burn_in + self.horizon + extra_time, self.lam,
                                 self.degree, self.safety)

    def build(self, extra_time: float = 0.0) -> Graph:
        if self.graph.family == "explicit":
            return cached_graph(self.graph)
        return cached_graph(self.graph.with_radius(self.truncation(extra_time)))

    def delta_indices(self, g: Graph) -> np.ndarray:
        return g.indices(self.delta)

    def with_(self, **kw) -> "StationarySamplerConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# low-level batch runner


def _batch(g: Graph, lam: float, seeds, init, *, direction=1, origin=0.0, depth=1.0,
           snap=(), snap_vertices=(), target=-1, guard=None, stop_on_guard=False,
           final_mask=None, lam_gen=None):
    lam_gen = lam if lam_gen is None else lam_gen
    keep = 1.0 if lam_gen == 0 else lam / lam_gen
    init = init if isinstance(init, np.ndarray) and init.dtype == np.uint8 else as_mask(g.n, init)
    grd = np.zeros(g.n, dtype=np.uint8) if guard is None else guard.astype(np.uint8)
    fm = np.zeros(g.n, dtype=np.uint8) if final_mask is None else final_mask.astype(np.uint8)
    snaps, ext, gt, hit, total, trunc, fin = _engine.sweep_batch(
        g.nbr_ptr, g.nbr_idx, g.rev, g.arrow_source(), g.mark_keys, g.arrow_keys,
        np.asarray(seeds, dtype=np.uint64), float(lam_gen), float(keep), int(direction),
        float(origin), float(depth), init, grd, np.asarray(snap, dtype=float),
        np.asarray(snap_vertices, dtype=np.int64), int(target), bool(stop_on_guard),
        2_000_000_000, fm)
    return {"snaps": snaps, "ext": ext, "guard": gt, "hit": hit, "events": int(total),
            "final": fin}


# ---------------------------------------------------------------------------
# stationary projection


def sample_stationary_projection(cfg: StationarySamplerConfig, replicate: int = 0,
                                 t_past: float = 0.0, validate: bool = False) -> Trajectory:
    """Trajectory on ``delta`` over ``[-t_past, T]`` of the burn-in sampler.

    The run starts from all-infected at ``-(S + t_past)``. With
    ``validate`` the truncation is checked first and a
    :class:`TruncationError` is raised when boundary influence shows.
    """
    if validate:
        rep = validate_truncation(cfg)
        if rep["flagged"]:
            raise TruncationError("truncation radius too small", **rep)
    g = cfg.build(t_past)
    d = cfg.delta_indices(g)
    s0 = -(cfg.burn_in + t_past)
    sample = sample_graphical(g, (s0, cfg.horizon), cfg.lam, replica_seed(cfg.seed, replicate))
    tr = evolve(sample, Configuration.ones(g.n, s0), record=d)
    # keep delta in the caller's order
    tr = tr.restrict(d)
    out = tr.crop(-t_past + 0.0)
    # extinction is absorbing, so an all-healthy box at the end means it died on the way
    out.meta.update(seed=sample.seed, replicate=replicate, radius=cfg.truncation(t_past),
                    box_alive=bool(tr.final.bits.any()))
    return out


def long_stationary_run(cfg: StationarySamplerConfig, length: float,
                        max_doublings: int = 3) -> Trajectory:
    """One stationary path over ``[0, length]`` on a box that stays alive.

    A finite box dies out eventually (after about 5e4 time units for 61
    sites at rate 2), and a dead box is useless as a stationary path. The
    radius is doubled until the run survives.
    """
    c = cfg.with_(horizon=float(length))
    radii = []
    for _ in range(max_doublings + 1):
        tr = sample_stationary_projection(c)
        radii.append(c.truncation())
        if tr.meta["box_alive"]:
            tr.meta["radii_tried"] = radii
            return tr
        c = c.with_(radius=2 * c.truncation())
    raise TruncationError("finite box died out during the long run", length=length,
                          radii_tried=radii)


def stationary_trajectories(cfg: StationarySamplerConfig, reps: int, t_past: float = 0.0,
                            start: int = 0):
    for i in range(start, start + reps):
        yield sample_stationary_projection(cfg, i, t_past)


def stationary_snapshot(cfg: StationarySamplerConfig, points: Sequence[tuple], reps: int,
                        start: int = 0, g: Graph | None = None, burn_in: float | None = None,
                        seeds=None) -> np.ndarray:
    """Joint states of the burn-in sampler at space-time points.

    ``points`` are ``(vertex index, time)`` pairs. Each entry is computed
    through the dual: ``(x, t)`` is infected iff the backward process from
    it is still alive at time ``-S``. This equals, sample by sample, what
    the forward sweep from all-infected at ``-S`` produces.
    """
    g = cfg.build() if g is None else g
    S = cfg.burn_in if burn_in is None else burn_in
    seeds = replica_seeds(cfg.seed, reps, start) if seeds is None else seeds
    out = np.empty((len(seeds), len(points)), dtype=np.uint8)
    for j, (x, t) in enumerate(points):
        r = _batch(g, cfg.lam, seeds, as_mask(g.n, [x]), direction=-1, origin=float(t),
                   depth=float(t) + S)
        out[:, j] = ~np.isfinite(r["ext"])
    return out


def _atoms(bits: np.ndarray) -> np.ndarray:
    w = 1 << np.arange(bits.shape[1], dtype=np.int64)
    return (bits.astype(np.int64) * w).sum(axis=1)


def choose_burn_in(cfg: StationarySamplerConfig, reps: int = 2000, start_s: float = 5.0,
                   max_s: float = 640.0) -> tuple[float, list[dict]]:
    """Double the burn-in until the S and 2S marginals on delta agree.

    Both runs share one graphical sample, so the S run dominates the 2S
    run and their difference is pure burn-in bias.
    """
    s = float(start_s)
    history = []
    k = 1 << len(cfg.delta)
    while True:
        c2 = cfg.with_(burn_in=2 * s)
        g = c2.build()
        d = c2.delta_indices(g)
        seeds = replica_seeds(cfg.seed ^ 0xB1, reps)
        alive_s = np.empty((reps, len(d)), dtype=np.uint8)
        alive_2s = np.empty_like(alive_s)
        for j, x in enumerate(d):
            r = _batch(g, cfg.lam, seeds, as_mask(g.n, [x]), direction=-1, origin=0.0,
                       depth=2 * s)
            alive_s[:, j] = r["ext"] > s
            alive_2s[:, j] = ~np.isfinite(r["ext"])
        disc = tv(atom_probs(_atoms(alive_s), k), atom_probs(_atoms(alive_2s), k))
        history.append({"burn_in": s, "tv": disc})
        if disc < cfg.burn_in_tolerance or s >= max_s:
            return s, history
        s *= 2


def validate_truncation(cfg: StationarySamplerConfig, reps: int = 400,
                        times: Sequence[float] | None = None) -> dict:
    """Compare single-time marginals on delta at radius r and a larger radius.

    The reference radius is ``2r``, raised to the branching bound with
    safety 1 when ``2r`` falls short of it. Streams are keyed by vertex,
    so both radii see the same graphical sample where they overlap.
    """
    r = cfg.truncation()
    D = cfg.degree
    floor_r = truncation_radius(cfg.delta, cfg.burn_in + cfg.horizon, cfg.lam, D, 1.0)
    r_ref = max(2 * r, floor_r, r + 1)
    times = [0.0, cfg.horizon / 2, cfg.horizon] if times is None else list(times)
    seeds = replica_seeds(cfg.seed ^ 0x7A, reps)
    k = 1 << len(cfg.delta)
    worst = 0.0
    per_time = []
    g_small = cached_graph(cfg.graph.with_radius(r))
    g_big = cached_graph(cfg.graph.with_radius(r_ref))
    for t in times:
        laws = []
        for g in (g_small, g_big):
            d = g.indices(cfg.delta)
            bits = stationary_snapshot(cfg, [(x, t) for x in d], reps, g=g, seeds=seeds)
            laws.append(atom_probs(_atoms(bits), k))
        disc = tv(*laws)
        per_time.append(disc)
        worst = max(worst, disc)
    return {"radius": r, "reference_radius": r_ref, "times": times, "per_time": per_time,
            "discrepancy": worst, "tolerance": cfg.truncation_tolerance,
            "flagged": worst > cfg.truncation_tolerance, "reps": reps}


# ---------------------------------------------------------------------------
# survival, hitting and coupling


def survival_time(g: Graph, lam: float, initial, horizon: float, seed: int) -> CensoredTime:
    """Extinction time of the process from ``initial``, censored at ``horizon``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    init = as_mask(g.n, initial)
    if not init.any():
        return CensoredTime(0.0)
    r = _batch(g, lam, np.array([seed], dtype=np.uint64), init, depth=horizon)
    ext = float(r["ext"][0])
    if math.isfinite(ext):
        return CensoredTime(ext)
    return CensoredTime(float(horizon), True)


def survival_batch(g: Graph, lam: float, initial, horizon: float, reps: int, seed: int,
                   start: int = 0, **kw) -> dict:
    """Replicated runs from ``initial``; raw kernel outputs plus seeds."""
    seeds = replica_seeds(seed, reps, start)
    r = _batch(g, lam, seeds, as_mask(g.n, initial), depth=horizon, **kw)
    r["seeds"] = seeds
    return r


def _accept_floor_check(accepted: int, attempts: int, floor: float, what: str):
    rate = accepted / attempts if attempts else 0.0
    if rate < floor:
        raise AcceptanceError(f"{what}: acceptance rate {rate:.2e} below floor {floor:.0e}",
                              acceptance_rate=rate, attempts=attempts, floor=floor)


def condition_on_survival(g: Graph, lam: float, x: int, horizon: float, seed: int,
                          record=None, floor: float = DEFAULT_FLOOR,
                          max_attempts: int | None = None) -> Trajectory:
    """Run from ``{x}`` until one replicate is still alive at ``horizon``.

    Attempt ``i`` uses replica seed ``i`` of ``seed``; the returned
    trajectory is exactly the first surviving attempt.
    """
    max_attempts = max_attempts or int(math.ceil(10 / floor))
    for i in range(max_attempts):
        s = sample_graphical(g, (0.0, horizon), lam, replica_seed(seed, i))
        tr = evolve(s, Configuration.from_set(g.n, [x]), record=record)
        if tr.final.bits.any():
            tr.meta.update(attempts=i + 1, acceptance_rate=1.0 / (i + 1), seed=s.seed)
            return tr
    _accept_floor_check(0, max_attempts, floor, "condition_on_survival")
    raise AssertionError("unreachable")


def _surviving_batches(g, lam, x, horizon, seed, n_target, floor, batch=256, **kw):
    """Collect surviving replicates (alive at horizon) from ``{x}``."""
    acc = {}
    attempts = 0
    accepted = 0
    pieces = []
    while accepted < n_target:
        r = survival_batch(g, lam, [x], horizon, batch, seed, start=attempts, **kw)
        ok = ~np.isfinite(r["ext"])
        attempts += batch
        accepted += int(ok.sum())
        pieces.append({k: v[ok] for k, v in r.items() if isinstance(v, np.ndarray)})
        if attempts >= max(batch, int(20 / floor)) or accepted >= n_target:
            _accept_floor_check(accepted, attempts, floor, "survival filter")
    for k in pieces[0]:
        acc[k] = np.concatenate([p[k] for p in pieces])[:n_target]
    acc["attempts"] = attempts
    acc["acceptance_rate"] = accepted / attempts
    return acc


def hitting_time(g: Graph, lam: float, x: int, horizon: float, seed: int,
                 origin: int | None = None, floor: float = DEFAULT_FLOOR) -> CensoredTime:
    """First infection time of ``x`` from ``{origin}``, given survival to ``horizon``."""
    o = g.origin if origin is None else origin
    if x == o:
        return CensoredTime(0.0)
    if lam == 0:
        return CensoredTime(float(horizon), True)
    max_attempts = int(math.ceil(10 / floor))
    for i in range(max_attempts):
        r = _batch(g, lam, np.array([replica_seed(seed, i)], dtype=np.uint64), [o],
                   depth=horizon, target=x)
        if not np.isfinite(r["ext"][0]):
            h = float(r["hit"][0])
            return CensoredTime(h) if math.isfinite(h) else CensoredTime(float(horizon), True)
    _accept_floor_check(0, max_attempts, floor, "hitting_time")
    raise AssertionError("unreachable")


def _last_disagreement(a: Trajectory, b: Trajectory, horizon: float) -> tuple[float, bool, int]:
    """Last time the single-vertex records ``a`` and ``b`` differ.

    Returns ``(time, still_differs_at_horizon, order_violations)`` where a
    violation is a moment with ``a > b``.
    """
    times = np.union1d(np.union1d(a.times, b.times), [a.window[0]])
    sa = a.states_at(times)[:, 0]
    sb = b.states_at(times)[:, 0]
    viol = int((sa > sb).sum())
    diff = sa != sb
    if not diff.any():
        return 0.0, False, viol
    if diff[-1]:
        return float(horizon), True, viol
    last = np.flatnonzero(diff)[-1]
    return float(times[last + 1]), False, viol


def coupling_time(g: Graph, lam: float, x: int, horizon: float, seed: int,
                  origin: int | None = None, floor: float = DEFAULT_FLOOR) -> CensoredTime:
    """Time after which the runs from ``{origin}`` and from all-infected agree at ``x``.

    Both runs use one graphical sample; only samples where the run from
    the origin survives to ``horizon`` are accepted.
    """
    o = g.origin if origin is None else origin
    max_attempts = int(math.ceil(10 / floor))
    for i in range(max_attempts):
        s = sample_graphical(g, (0.0, horizon), lam, replica_seed(seed, i))
        small = evolve(s, Configuration.from_set(g.n, [o]), record=[x])
        if not small.final.bits.any():
            continue
        big = evolve(s, Configuration.ones(g.n), record=[x])
        t, cens, viol = _last_disagreement(small, big, horizon)
        if viol:
            raise AssertionError(f"monotone coupling violated at vertex {x}")
        return CensoredTime(t, cens)
    _accept_floor_check(0, max_attempts, floor, "coupling_time")
    raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# conditioning on the past


@dataclass(frozen=True)
class Cylinder:
    """Event that the delta positions ``positions`` hold ``state`` on ``[t0, t1]``.

    ``positions`` index into the config's delta; ``state`` is 0 or 1
    (all healthy / all infected).
    """

    positions: tuple
    state: int
    t0: float
    t1: float = 0.0
    name: str = field(default="", compare=False)

    @classmethod
    def all_zero(cls, positions, t_past: float) -> "Cylinder":
        return cls(tuple(positions), 0, -t_past, 0.0, "all_zero")

    @classmethod
    def all_one(cls, positions, t_past: float) -> "Cylinder":
        return cls(tuple(positions), 1, -t_past, 0.0, "all_one")

    def __call__(self, tr: Trajectory) -> bool:
        pos = list(self.positions)
        for a, b, st in tr.segments():
            if b <= self.t0 or a > self.t1:
                continue
            if (st[pos] != self.state).any():
                return False
        return True


def _true(_tr):
    return True


def conditioned_trajectories(cfg: StationarySamplerConfig, past_event: Callable | None,
                             t_past: float, attempts: int, start: int = 0,
                             floor: float = DEFAULT_FLOOR, pilot: int = 200):
    """Accepted trajectories over ``[-t_past, T]`` out of ``attempts`` runs.

    Returns ``(accepted, n_attempts)``. The first ``pilot`` attempts
    estimate the acceptance rate; below ``floor`` the call aborts.
    """
    ev = past_event or _true
    out = []
    for i in range(start, start + attempts):
        tr = sample_stationary_projection(cfg, i, t_past)
        if ev(tr):
            out.append(tr)
        done = i - start + 1
        if done == min(pilot, attempts):
            _accept_floor_check(len(out), done, floor, "past conditioning pilot")
    return out, attempts


def sample_conditioned_past(cfg: StationarySamplerConfig, past_event: Callable | None,
                            t_past: float, start: int = 0, floor: float = DEFAULT_FLOOR,
                            pilot: int = 200) -> Trajectory:
    """One trajectory on ``[0, T]`` drawn given ``past_event`` on ``[-t_past, 0]``.

    A pilot batch of stationary runs estimates the event probability;
    below ``floor`` the sampler aborts with that estimate.
    """
    ev = past_event or _true
    hits = sum(bool(ev(tr)) for tr in stationary_trajectories(cfg, pilot, t_past, start=start))
    _accept_floor_check(hits, pilot, floor, "past conditioning pilot")
    i = start + pilot
    while True:
        tr = sample_stationary_projection(cfg, i, t_past)
        i += 1
        if ev(tr):
            out = tr.crop(0.0)
            out.meta.update(attempts=i - start - pilot, pilot_probability=hits / pilot)
            return out


# ---------------------------------------------------------------------------
# cutoff lower bound and front


def _box(dim: int, r: int):
    from itertools import product
    if dim == 1:
        return list(range(-r, r + 1))
    return list(product(range(-r, r + 1), repeat=dim))


def _interior_graph(n: int, r: int, lam: float, t: float, dim: int, safety: float,
                    radius: int | None):
    R = radius if radius is not None else max(
        n + 1, truncation_radius(_box(dim, r) if dim == 1 else [(0,) * dim], t, lam, 2 * dim,
                                 safety) + (r if dim > 1 else 0))
    if R <= n:
        raise TruncationError("truncation must reach outside the healthy box",
                              radius=R, n=n)
    return cached_graph(GraphSpec("lattice", dim=dim, radius=R))


def interior_healthy_batch(n: int, r: int, lam: float, t: float, reps: int, seed: int,
                           dim: int = 1, safety: float = 1.5, radius: int | None = None,
                           start: int = 0) -> dict:
    """States on the box of radius ``r`` at time ``t`` from "healthy inside radius n".

    Vertex ``x`` is infected at ``t`` iff its dual, run back to time 0,
    holds a vertex outside the healthy box. A dual touching the truncation
    boundary aborts the batch.
    """
    if r > n:
        raise ValueError("need r <= n")
    g = _interior_graph(n, r, lam, t, dim, safety, radius)
    inside = g.indices(_box(dim, n))
    outside = np.ones(g.n, dtype=np.uint8)
    outside[inside] = 0
    obs = g.indices(_box(dim, r))
    seeds = replica_seeds(seed, reps, start)
    bits = np.zeros((reps, len(obs)), dtype=np.uint8)
    if t > 0:
        for j, x in enumerate(obs):
            res = _batch(g, lam, seeds, as_mask(g.n, [x]), direction=-1, origin=float(t),
                         depth=float(t), guard=g.boundary, final_mask=outside)
            if np.isfinite(res["guard"]).any():
                raise TruncationError("dual reached the truncation boundary",
                                      radius=(g.n - 1) // 2, t=t)
            bits[:, j] = res["final"] > 0
    return {"bits": bits, "atoms": _atoms(bits), "vertices": obs, "graph": g, "seeds": seeds}


def sample_interior_healthy(n: int, r: int, lam: float, t: float, seed: int, dim: int = 1,
                            safety: float = 1.5, radius: int | None = None) -> Configuration:
    """Configuration on the radius-``r`` box at time ``t`` (restriction only)."""
    res = interior_healthy_batch(n, r, lam, t, 1, seed, dim, safety, radius)
    return Configuration(res["bits"][0], float(t))


def interior_healthy_forward(n: int, r: int, lam: float, t: float, seed: int, dim: int = 1,
                             safety: float = 1.5, radius: int | None = None) -> Configuration:
    """Same quantity as :func:`sample_interior_healthy` by a forward sweep."""
    g = _interior_graph(n, r, lam, t, dim, safety, radius)
    init = np.ones(g.n, dtype=np.uint8)
    init[g.indices(_box(dim, n))] = 0
    s = sample_graphical(g, (0.0, float(t)), lam, replica_seed(seed, 0))
    tr = evolve(s, Configuration(init, 0.0), record=g.indices(_box(dim, r)))
    return Configuration(tr.final.bits[g.indices(_box(dim, r))], float(t))


def rightmost_front(lam: float, horizon: float, seed: int, family: str = "lattice",
                    grid_step: float = 1.0, radius: int | None = None,
                    safety: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    """Rightmost infected position on a uniform time grid.

    Starts from every site ``x <= 0`` of the truncation infected. Aborts
    if the front reaches the right end of the truncation. After
    extinction the position is ``nan``.
    """
    R = radius if radius is not None else max(1, truncation_radius([0], horizon, lam, 2, safety))
    spec = GraphSpec("halfline", radius=R) if family == "halfline" else GraphSpec("lattice", radius=R)
    g = cached_graph(spec)
    coords = np.array(g.labels, dtype=np.int64)
    init = (coords <= 0).astype(np.uint8)
    guard = np.zeros(g.n, dtype=np.uint8)
    guard[np.argmax(coords)] = 1
    s = sample_graphical(g, (0.0, horizon), lam, replica_seed(seed, 0))
    from .graphical import _run
    state = init.copy()
    ev_c, ev_v, ev_s, _, _, guard_c, _, _, _, _ = _run(
        g, s.seed, lam, 1.0, 1, 0.0, horizon, state, np.ones(g.n, dtype=np.uint8), guard,
        stop_on_guard=True)
    if math.isfinite(guard_c):
        raise TruncationError("front reached the truncation boundary", radius=R, time=guard_c)
    grid = np.arange(0.0, horizon + 1e-9, grid_step)
    pos = _engine_rightmost(init, coords, ev_c, ev_v, ev_s, grid)
    return grid, pos


def _engine_rightmost(init, coords, ev_c, ev_v, ev_s, grid):
    order = np.argsort(coords)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return _rightmost_nb(init.copy(), coords[order], rank, ev_c, ev_v, ev_s.astype(np.int64), grid)


from numba import njit  # noqa: E402


@njit(cache=True)
def _rightmost_nb(state, sorted_coords, rank, ev_c, ev_v, ev_s, grid):
    n = state.shape[0]
    occ = np.zeros(n, dtype=np.uint8)
    top = -1
    for v in range(n):
        if state[v]:
            occ[rank[v]] = 1
            if rank[v] > top:
                top = rank[v]
    out = np.empty(grid.shape[0])
    k = 0
    for i in range(grid.shape[0]):
        while k < ev_c.shape[0] and ev_c[k] <= grid[i]:
            p = rank[ev_v[k]]
            occ[p] = ev_s[k]
            if ev_s[k] == 1 and p > top:
                top = p
            elif ev_s[k] == 0 and p == top:
                while top >= 0 and occ[top] == 0:
                    top -= 1
            k += 1
        out[i] = sorted_coords[top] if top >= 0 else np.nan
    return out
