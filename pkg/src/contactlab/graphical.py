"""Graphical samples and the sweeps that read them.

A :class:`GraphicalSample` is a lazy view of independent Poisson streams:
rate-1 recovery marks per vertex and rate-``lam`` arrows per directed
edge. Streams are keyed by stable vertex keys, so two truncations of the
same family, or two windows of the same seed, see identical marks and
arrows wherever they overlap.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _engine
from .graph import Graph

__all__ = [
    "GraphicalSample",
    "ExplicitSample",
    "Configuration",
    "Trajectory",
    "sample_graphical",
    "evolve",
    "evolve_direct",
    "reaches",
    "dual_evolve",
    "dump_sample",
    "load_sample",
    "as_mask",
    "DEFAULT_MAX_EVENTS",
]

DEFAULT_MAX_EVENTS = 2_000_000_000
_MAGIC = b"CPGS"


class TimeTagError(ValueError):
    pass


def as_mask(n: int, vertices) -> np.ndarray:
    m = np.zeros(n, dtype=np.uint8)
    if vertices is not None:
        m[np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                     dtype=np.int64)] = 1
    return m


@dataclass(frozen=True)
class GraphicalSample:
    graph: Graph
    window: tuple[float, float]
    lam: float
    seed: int
    lam_gen: float | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.lam_gen is None:
            object.__setattr__(self, "lam_gen", float(self.lam))
        if self.lam_gen < self.lam:
            raise ValueError("generation rate below lam")

    @property
    def keep(self) -> float:
        return 1.0 if self.lam_gen == 0 else self.lam / self.lam_gen

    def with_lambda(self, lam: float) -> "GraphicalSample":
        """The sample at a smaller rate, obtained by thinning these arrows."""
        return GraphicalSample(self.graph, self.window, lam, self.seed, lam_gen=self.lam_gen)

    def with_window(self, window) -> "GraphicalSample":
        return GraphicalSample(self.graph, tuple(window), self.lam, self.seed, lam_gen=self.lam_gen)

    def recovery_marks(self, x: int) -> np.ndarray:
        s0, s1 = self.window
        return _engine.stream_times(np.uint64(self.seed), self.graph.mark_keys[x], 1.0, 1.0, s0, s1)

    def arrows(self, x: int, y: int) -> np.ndarray:
        e = self.graph.arrow_index(x, y)
        return self._arrow_stream(e)

    def _arrow_stream(self, e: int) -> np.ndarray:
        s0, s1 = self.window
        return _engine.stream_times(np.uint64(self.seed), self.graph.arrow_keys[e],
                                    float(self.lam_gen), self.keep, s0, s1)

    def streams(self) -> list[np.ndarray]:
        """Every stream, marks first (by vertex) then arrows (by directed edge)."""
        g = self.graph
        return [self.recovery_marks(x) for x in range(g.n)] + [
            self._arrow_stream(e) for e in range(g.n_arrows)]


@dataclass(frozen=True)
class ExplicitSample:
    """A sample given by explicit event lists (handcrafted or reloaded from a dump).

    ``marks[x]`` and ``arrow_times[(x, y)]`` hold sorted times; missing
    keys are empty streams. Sweeps over it use a plain reference loop.
    """

    graph: Graph
    window: tuple[float, float]
    marks: dict = field(default_factory=dict)
    arrow_times: dict = field(default_factory=dict)
    lam: float = float("nan")
    seed: int = 0

    def __post_init__(self):
        s0, s1 = self.window
        for key, ts in list(self.marks.items()) + list(self.arrow_times.items()):
            ts = np.asarray(ts, dtype=float)
            if ts.size and (ts[0] < s0 or ts[-1] > s1 or np.any(np.diff(ts) <= 0)):
                raise ValueError(f"stream {key} not strictly increasing inside the window")
        for x, y in self.arrow_times:
            if y not in set(self.graph.neighbors(x).tolist()):
                raise ValueError(f"no edge {x} -> {y}")

    def recovery_marks(self, x: int) -> np.ndarray:
        return np.asarray(self.marks.get(x, ()), dtype=float)

    def arrows(self, x: int, y: int) -> np.ndarray:
        return np.asarray(self.arrow_times.get((x, y), ()), dtype=float)

    def streams(self) -> list[np.ndarray]:
        g = self.graph
        src = g.arrow_source()
        return [self.recovery_marks(x) for x in range(g.n)] + [
            self.arrows(int(src[e]), int(g.nbr_idx[e])) for e in range(g.n_arrows)]

    @classmethod
    def from_dump(cls, g: Graph, path) -> "ExplicitSample":
        header, streams = load_sample(path)
        if len(streams) != g.n + g.n_arrows:
            raise ValueError("dump does not match the graph")
        src = g.arrow_source()
        marks = {x: streams[x] for x in range(g.n) if streams[x].size}
        arrows = {(int(src[e]), int(g.nbr_idx[e])): streams[g.n + e]
                  for e in range(g.n_arrows) if streams[g.n + e].size}
        return cls(g, tuple(header["window"]), marks, arrows, header["lam"], header["seed"])


def _event_list(sample: ExplicitSample, lo: float, hi: float, backward: bool = False):
    """Events in ``(lo, hi]`` (``[lo, hi)`` if backward) as ``(time, stream id, kind, x, y)``."""
    g = sample.graph
    src = g.arrow_source()
    out = []
    for sid, ts in enumerate(sample.streams()):
        if sid < g.n:
            x, y, kind = sid, sid, 0
        else:
            e = sid - g.n
            x, y, kind = int(src[e]), int(g.nbr_idx[e]), 1
        sel = (ts >= lo) & (ts < hi) if backward else (ts > lo) & (ts <= hi)
        for t in ts[sel]:
            out.append((float(t), sid, kind, x, y))
    out.sort()
    return out


def _reference_sweep(sample: ExplicitSample, state: np.ndarray, t0: float, t1: float,
                     direction: int, rec: np.ndarray):
    """Plain event loop; forward over ``(t0, t1]`` or backward from ``t1`` down to ``t0``."""
    evs = _event_list(sample, t0, t1) if direction > 0 else sorted(
        _event_list(sample, t0, t1, True), key=lambda e: (-e[0], e[1]))
    recm = as_mask(len(state), rec)
    times, verts, vals = [], [], []
    ext = float("inf")
    for t, _, kind, x, y in evs:
        if kind == 0:
            tgt, new = x, 0
        elif direction > 0:
            tgt, new = y, 1 if state[x] else None
        else:
            tgt, new = x, 1 if state[y] else None
        if new is None or state[tgt] == new:
            continue
        state[tgt] = new
        if recm[tgt]:
            times.append(t if direction > 0 else t1 - t)
            verts.append(tgt)
            vals.append(new)
        if new == 0 and not state.any() and ext == float("inf"):
            ext = t if direction > 0 else t1 - t
    return (np.asarray(times, dtype=float), np.asarray(verts, dtype=np.int64),
            np.asarray(vals, dtype=np.uint8), ext)


def sample_graphical(g: Graph, window, lam: float, seed: int) -> GraphicalSample:
    s0, s1 = map(float, window)
    if s1 < s0:
        raise ValueError("empty window")
    return GraphicalSample(g, (s0, s1), float(lam), int(seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass
class Configuration:
    bits: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)

    @classmethod
    def from_set(cls, n: int, infected, time_tag: float = 0.0) -> "Configuration":
        return cls(as_mask(n, infected), time_tag)

    @classmethod
    def zeros(cls, n: int, time_tag: float = 0.0) -> "Configuration":
        return cls(np.zeros(n, dtype=np.uint8), time_tag)

    @classmethod
    def ones(cls, n: int, time_tag: float = 0.0) -> "Configuration":
        return cls(np.ones(n, dtype=np.uint8), time_tag)

    @property
    def infected(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    def __len__(self):
        return len(self.bits)


@dataclass
class Trajectory:
    """Piecewise-constant record of the states on ``delta``.

    ``times``, ``vertices`` (graph indices) and ``states`` list the flips
    in time order; ``initial`` is the state on ``delta`` at ``window[0]``.
    """

    delta: np.ndarray
    initial: np.ndarray
    times: np.ndarray
    vertices: np.ndarray
    states: np.ndarray
    window: tuple[float, float]
    final: Configuration | None = None
    meta: dict = field(default_factory=dict)

    @property
    def events(self) -> list[tuple[float, int, int]]:
        return list(zip(self.times.tolist(), self.vertices.tolist(), self.states.tolist()))

    def _pos(self) -> np.ndarray:
        order = np.argsort(self.delta, kind="stable")
        hit = np.searchsorted(self.delta[order], self.vertices)
        return order[hit].astype(np.int64)

    def state_at(self, t: float) -> np.ndarray:
        """State on ``delta`` at time ``t`` (right-continuous)."""
        s = self.initial.copy()
        k = np.searchsorted(self.times, t, side="right")
        if k:
            pos = self._pos()[:k]
            s[pos] = self.states[:k]
        return s

    def states_at(self, ts) -> np.ndarray:
        """States on ``delta`` at each time of the sorted array ``ts``."""
        ts = np.asarray(ts, dtype=float)
        out = np.empty((len(ts), len(self.delta)), dtype=np.uint8)
        pos = self._pos()
        for p in range(len(self.delta)):
            sel = pos == p
            tp, sp = self.times[sel], self.states[sel]
            k = np.searchsorted(tp, ts, side="right")
            out[:, p] = np.where(k > 0, sp[np.maximum(k - 1, 0)] if sp.size else 0,
                                 self.initial[p])
        return out

    def segments(self):
        """Yield ``(t_start, t_end, state)`` over the whole window."""
        cur = self.initial.copy()
        pos = self._pos()
        t_prev = self.window[0]
        k = 0
        n = len(self.times)
        while k < n:
            t = self.times[k]
            if t > t_prev:
                yield t_prev, t, cur.copy()
            while k < n and self.times[k] == t:
                cur[pos[k]] = self.states[k]
                k += 1
            t_prev = t
        if self.window[1] > t_prev:
            yield t_prev, self.window[1], cur.copy()

    def restrict(self, vertices) -> "Trajectory":
        vertices = np.asarray(vertices, dtype=np.int64)
        keep = np.isin(self.vertices, vertices)
        lookup = {int(v): i for i, v in enumerate(self.delta)}
        return Trajectory(vertices, self.initial[[lookup[int(v)] for v in vertices]],
                          self.times[keep], self.vertices[keep], self.states[keep],
                          self.window, self.final, dict(self.meta))

    def crop(self, t0: float) -> "Trajectory":
        """Same path on the window ``[t0, t1]``, keeping the later part."""
        keep = self.times > t0
        init = self.state_at(t0)
        return Trajectory(self.delta, init, self.times[keep], self.vertices[keep],
                          self.states[keep], (t0, self.window[1]), self.final, dict(self.meta))


def _run(g: Graph, seed: int, lam: float, keep: float, direction: int, origin: float,
         depth: float, state: np.ndarray, record=None, guard=None, target: int = -1,
         stop_on_guard: bool = False, max_events: int = DEFAULT_MAX_EVENTS):
    rec = as_mask(g.n, record) if record is not None and not isinstance(record, np.ndarray) else (
        record if record is not None else np.zeros(g.n, dtype=np.uint8))
    grd = guard if guard is not None else np.zeros(g.n, dtype=np.uint8)
    return _engine.sweep(g.nbr_ptr, g.nbr_idx, g.rev, g.arrow_source(), g.mark_keys,
                         g.arrow_keys, np.uint64(seed), float(lam), float(keep), int(direction),
                         float(origin), float(depth), state, rec.astype(np.uint8),
                         grd.astype(np.uint8), np.empty(0), np.empty(0, dtype=np.int64),
                         int(target), bool(stop_on_guard), int(max_events),
                         np.zeros(g.n, dtype=np.uint8))


def evolve(sample: GraphicalSample, initial: Configuration, record: Iterable[int] | None = None,
           t_end: float | None = None) -> Trajectory:
    """Forward evolution over the sample window from ``initial``.

    A recovery mark at ``(x, t)`` heals ``x``; an arrow ``x -> y`` at ``t``
    infects ``y`` when ``x`` is infected. ``record`` defaults to every
    vertex. The final configuration is ``trajectory.final``.
    """
    g = sample.graph
    s0, s1 = sample.window
    if initial.time_tag != s0:
        raise TimeTagError(f"initial configuration tagged {initial.time_tag}, window starts at {s0}")
    if len(initial) != g.n:
        raise ValueError("configuration size does not match graph")
    if t_end is not None:
        s1 = min(s1, t_end)
    rec = np.arange(g.n) if record is None else np.asarray(sorted(set(record)), dtype=np.int64)
    state = initial.bits.copy()
    if isinstance(sample, ExplicitSample):
        ts, vs, ss, ext = _reference_sweep(sample, state, s0, s1, 1, rec)
        return Trajectory(rec, initial.bits[rec].copy(), ts, vs, ss, (s0, s1),
                          final=Configuration(state, s1), meta={"extinction_time": ext})
    ev_c, ev_v, ev_s, _, ext, _, _, n_proc, _, _ = _run(
        g, sample.seed, sample.lam_gen, sample.keep, 1, s0, s1 - s0, state, as_mask(g.n, rec))
    return Trajectory(rec, initial.bits[rec].copy(), ev_c + s0, ev_v, ev_s, (s0, s1),
                      final=Configuration(state, s1),
                      meta={"extinction_time": ext + s0, "events": int(n_proc)})


def reaches(sample: GraphicalSample, source: tuple[int, float], dest: tuple[int, float]) -> bool:
    """Is there an active path from ``source`` to ``dest`` in the sample?"""
    (x, s), (y, t) = source, dest
    s0, s1 = sample.window
    if t < s:
        raise ValueError("destination precedes source")
    if not (s0 <= s <= s1 and s0 <= t <= s1):
        raise ValueError("points outside the sample window")
    g = sample.graph
    state = as_mask(g.n, [x])
    if t == s:
        return x == y
    if isinstance(sample, ExplicitSample):
        _reference_sweep(sample, state, s, t, 1, np.empty(0, dtype=np.int64))
        return bool(state[y])
    _run(g, sample.seed, sample.lam_gen, sample.keep, 1, s, t - s, state)
    return bool(state[y])


def dual_evolve(sample: GraphicalSample, start: tuple[Iterable[int], float], depth: float,
                record: Iterable[int] | None = None) -> Trajectory:
    """Backward (dual) process from ``(A, t)`` down to ``t - depth``.

    Particles move backward in time, die at recovery marks and follow
    arrows against their direction. The returned trajectory runs on its
    own clock ``[0, depth]``: backward time ``u`` is physical ``t - u``.
    """
    A, t = start
    g = sample.graph
    s0, s1 = sample.window
    if t - depth < s0 - 1e-12 or t > s1 + 1e-12:
        raise ValueError(f"dual window [{t - depth}, {t}] leaves sample window {sample.window}")
    rec = np.arange(g.n) if record is None else np.asarray(sorted(set(record)), dtype=np.int64)
    state = as_mask(g.n, A)
    init = state[rec].copy()
    if isinstance(sample, ExplicitSample):
        ts, vs, ss, ext = _reference_sweep(sample, state, t - depth, t, -1, rec)
        return Trajectory(rec, init, ts, vs, ss, (0.0, float(depth)),
                          final=Configuration(state, depth), meta={"extinction_time": ext, "origin": t})
    ev_c, ev_v, ev_s, _, ext, _, _, n_proc, _, _ = _run(
        g, sample.seed, sample.lam_gen, sample.keep, -1, t, depth, state, as_mask(g.n, rec))
    return Trajectory(rec, init, ev_c, ev_v, ev_s, (0.0, float(depth)),
                      final=Configuration(state, depth),
                      meta={"extinction_time": ext, "events": int(n_proc), "origin": t})


def evolve_direct(g: Graph, lam: float, initial: Configuration, horizon: float, seed: int,
                  record: Iterable[int] | None = None) -> Trajectory:
    """Gillespie simulation from the generator rates on ``[0, horizon]``."""
    rec = np.arange(g.n) if record is None else np.asarray(sorted(set(record)), dtype=np.int64)
    state = initial.bits.copy()
    t0 = initial.time_tag
    ev_t, ev_v, ev_s, _, ext = _engine.direct(
        g.nbr_ptr, g.nbr_idx, np.uint64(seed), float(lam), float(horizon), state,
        as_mask(g.n, rec), np.empty(0), np.empty(0, dtype=np.int64))
    return Trajectory(rec, initial.bits[rec].copy(), ev_t + t0, ev_v, ev_s, (t0, t0 + horizon),
                      final=Configuration(state, t0 + horizon),
                      meta={"extinction_time": ext + t0})


def dump_sample(sample: GraphicalSample, path) -> None:
    """Write every stream of the sample window for failure reproduction.

    Layout (little endian): magic ``CPGS``, u32 version, u64 seed,
    f64 lam, f64 window start, f64 window end, u64 stream count, then per
    stream a u64 length followed by that many f64 times.
    """
    streams = sample.streams()
    s0, s1 = sample.window
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<IQdddQ", 1, sample.seed, sample.lam, s0, s1, len(streams)))
        for s in streams:
            fh.write(struct.pack("<Q", len(s)))
            fh.write(np.asarray(s, dtype="<f8").tobytes())


def load_sample(path) -> tuple[dict, list[np.ndarray]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a graphical sample dump")
    version, seed, lam, s0, s1, count = struct.unpack_from("<IQdddQ", data, 4)
    off = 4 + struct.calcsize("<IQdddQ")
    streams = []
    for _ in range(count):
        (k,) = struct.unpack_from("<Q", data, off)
        off += 8
        streams.append(np.frombuffer(data, dtype="<f8", count=k, offset=off).copy())
        off += 8 * k
    header = {"version": version, "seed": seed, "lam": lam, "window": (s0, s1)}
    return header, streams
