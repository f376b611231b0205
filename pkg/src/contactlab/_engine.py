"""Numba kernels: Poisson stream blocks, lazy sweeps, direct Gillespie runs.

A stream (recovery marks of a vertex, or arrows of a directed edge) is cut
into unit-length time blocks. Block ``k`` of a stream is generated from
its own counter key, so the sweep can ask for "the next event after t" of
any stream without touching any other stream or block.

The sweep only follows streams owned by currently infected vertices. It
runs forward (the contact process) or backward (the dual process) over
the same streams; in both cases it works on a clock ``c`` with physical
time ``origin + direction * c``.
"""
import heapq
import math

import numpy as np
from numba import njit, uint64

from ._rng import DOMAIN_DIRECT, block_key, combine, uniform

INF = np.inf
_SUBRATE = 16.0
_THIN_OFFSET = 1024


@njit(cache=True)
def _poisson(key, mu):
    u = uniform(key, 0)
    p = math.exp(-mu)
    f = p
    k = 0
    while u > f and k < 256:
        k += 1
        p *= mu / k
        f += p
    return k


@njit(cache=True)
def block_events(seed, skey, block, rate, keep, buf):
    """Sorted event times of one stream in ``[block, block + 1)``.

    Writes into ``buf`` and returns the count. ``keep < 1`` thins the
    stream with an independent per-event uniform, which couples streams
    of different rates generated from the same key.
    """
    if rate <= 0.0:
        return 0
    # max() guards subnormal rates, where rate / _SUBRATE underflows to 0
    m = max(1, int(math.ceil(rate / _SUBRATE)))
    mu = rate / m
    bkey = block_key(seed, skey, block)
    n = 0
    for j in range(m):
        key = combine(bkey, uint64(j)) if m > 1 else bkey
        cnt = _poisson(key, mu)
        start = n
        for i in range(cnt):
            if keep < 1.0 and uniform(key, _THIN_OFFSET + i) >= keep:
                continue
            t = block + (j + uniform(key, 1 + i)) / m
            # insertion sort inside the sub-block
            pos = n
            while pos > start and buf[pos - 1] > t:
                buf[pos] = buf[pos - 1]
                pos -= 1
            buf[pos] = t
            n += 1
    return n


@njit(cache=True)
def next_after(seed, skey, rate, keep, t, t_max, buf):
    """First event time strictly after ``t`` and not after ``t_max``."""
    if rate <= 0.0:
        return INF
    k = math.floor(t)
    while k <= t_max:
        n = block_events(seed, skey, k, rate, keep, buf)
        for i in range(n):
            if buf[i] > t:
                if buf[i] <= t_max:
                    return buf[i]
                return INF
        k += 1
    return INF


@njit(cache=True)
def prev_before(seed, skey, rate, keep, t, t_min, buf):
    """Last event time strictly before ``t`` and not before ``t_min``."""
    if rate <= 0.0:
        return -INF
    k = math.floor(t)
    if k == t:
        k -= 1
    while k + 1 > t_min:
        n = block_events(seed, skey, k, rate, keep, buf)
        for i in range(n - 1, -1, -1):
            if buf[i] < t:
                if buf[i] >= t_min:
                    return buf[i]
                return -INF
        k -= 1
    return -INF


@njit(cache=True)
def stream_times(seed, skey, rate, keep, s0, s1):
    """All event times of one stream inside ``[s0, s1]``."""
    buf = np.empty(4096)
    out = np.empty(64)
    n = 0
    if rate > 0.0:
        k = math.floor(s0)
        while k <= s1:
            c = block_events(seed, skey, k, rate, keep, buf)
            for i in range(c):
                if s0 <= buf[i] <= s1:
                    if n == out.shape[0]:
                        tmp = np.empty(2 * n)
                        tmp[:n] = out
                        out = tmp
                    out[n] = buf[i]
                    n += 1
            k += 1
    return out[:n].copy()


@njit(cache=True)
def _grow_f(a, n):
    b = np.empty(max(2 * a.shape[0], 16), dtype=a.dtype)
    b[:n] = a[:n]
    return b


@njit(cache=True)
def _grow_i(a, n):
    b = np.empty(max(2 * a.shape[0], 16), dtype=a.dtype)
    b[:n] = a[:n]
    return b


@njit(cache=True)
def _atom(state, verts):
    a = 0
    for j in range(verts.shape[0]):
        if state[verts[j]]:
            a |= 1 << j
    return a


@njit(cache=True)
def _stream_next(direction, origin, seed, skey, rate, keep, c, c_max, buf):
    # origin + c may round back onto the event that produced c, so step
    # past physical times whose clock does not advance
    if direction > 0:
        t = origin + c
        while True:
            s = next_after(seed, skey, rate, keep, t, origin + c_max, buf)
            if s == INF or s - origin > c:
                return s - origin
            t = s
    t = origin - c
    while True:
        s = prev_before(seed, skey, rate, keep, t, origin - c_max, buf)
        if s == -INF or origin - s > c:
            return origin - s
        t = s


@njit(cache=True)
def _push_vertex(heap, v, ep, direction, origin, c, c_max, seed, ptr, rev,
                 mark_keys, arrow_keys, lam, keep, buf):
    n = mark_keys.shape[0]
    cm = _stream_next(direction, origin, seed, mark_keys[v], 1.0, 1.0, c, c_max, buf)
    if cm < INF:
        heapq.heappush(heap, (cm, v, ep))
    for j in range(ptr[v], ptr[v + 1]):
        e = j if direction > 0 else rev[j]
        ca = _stream_next(direction, origin, seed, arrow_keys[e], lam, keep, c, c_max, buf)
        if ca < INF:
            heapq.heappush(heap, (ca, n + e, ep))


@njit(cache=True)
def sweep(ptr, idx, rev, asrc, mark_keys, arrow_keys, seed, lam, keep,
          direction, origin, c_max, state, record, guard, snap_c, snap_v,
          target, stop_on_guard, max_events, final_mask):
    """Run the (dual) contact process on one graphical sample.

    ``state`` is modified in place and holds the final configuration.
    Returns ``(ev_c, ev_v, ev_s, snaps, ext_c, guard_c, hit_c, n_events,
    truncated, n_final)``; all times are on the clock and ``n_final``
    counts infected vertices of ``final_mask`` at the end.
    """
    n = mark_keys.shape[0]
    buf = np.empty(4096)
    epoch = np.zeros(n, dtype=np.int64)
    ev_c = np.empty(16)
    ev_v = np.empty(16, dtype=np.int64)
    ev_s = np.empty(16, dtype=np.int8)
    n_ev = 0
    snaps = np.zeros(snap_c.shape[0], dtype=np.int64)
    k_snap = 0
    ext_c = INF
    guard_c = INF
    hit_c = INF
    truncated = False
    heap = [(0.0, 0, 0)]
    heap.pop()
    count = 0
    for v in range(n):
        if state[v]:
            count += 1
            if guard[v] and guard_c == INF:
                guard_c = 0.0
            if v == target:
                hit_c = 0.0
            _push_vertex(heap, v, 0, direction, origin, 0.0, c_max, seed, ptr, rev,
                         mark_keys, arrow_keys, lam, keep, buf)
    if count == 0:
        ext_c = 0.0
    n_proc = 0
    while len(heap) > 0:
        if stop_on_guard and guard_c < INF:
            break
        c, sid, ep = heapq.heappop(heap)
        if c > c_max:
            break
        if sid < n:
            owner = sid
        elif direction > 0:
            owner = asrc[sid - n]
        else:
            owner = idx[sid - n]
        if state[owner] == 0 or epoch[owner] != ep:
            continue
        while k_snap < snap_c.shape[0] and snap_c[k_snap] < c:
            snaps[k_snap] = _atom(state, snap_v)
            k_snap += 1
        n_proc += 1
        if n_proc > max_events:
            truncated = True
            break
        if sid < n:
            state[sid] = 0
            epoch[sid] += 1
            count -= 1
            if record[sid]:
                if n_ev == ev_c.shape[0]:
                    ev_c = _grow_f(ev_c, n_ev)
                    ev_v = _grow_i(ev_v, n_ev)
                    ev_s = _grow_i(ev_s, n_ev)
                ev_c[n_ev] = c
                ev_v[n_ev] = sid
                ev_s[n_ev] = 0
                n_ev += 1
            if count == 0:
                ext_c = c
                break
        else:
            e = sid - n
            other = idx[e] if direction > 0 else asrc[e]
            skey = arrow_keys[e]
            c_nx = _stream_next(direction, origin, seed, skey, lam, keep, c, c_max, buf)
            if c_nx < INF:
                heapq.heappush(heap, (c_nx, sid, ep))
            if state[other] == 0:
                state[other] = 1
                epoch[other] += 1
                count += 1
                if record[other]:
                    if n_ev == ev_c.shape[0]:
                        ev_c = _grow_f(ev_c, n_ev)
                        ev_v = _grow_i(ev_v, n_ev)
                        ev_s = _grow_i(ev_s, n_ev)
                    ev_c[n_ev] = c
                    ev_v[n_ev] = other
                    ev_s[n_ev] = 1
                    n_ev += 1
                if guard[other] and guard_c == INF:
                    guard_c = c
                if other == target and hit_c == INF:
                    hit_c = c
                _push_vertex(heap, other, epoch[other], direction, origin, c, c_max, seed,
                             ptr, rev, mark_keys, arrow_keys, lam, keep, buf)
    while k_snap < snap_c.shape[0] and (snap_c[k_snap] <= c_max or count == 0):
        snaps[k_snap] = _atom(state, snap_v)
        k_snap += 1
    n_final = 0
    for v in range(n):
        if state[v] and final_mask[v]:
            n_final += 1
    return (ev_c[:n_ev].copy(), ev_v[:n_ev].copy(), ev_s[:n_ev].copy(), snaps,
            ext_c, guard_c, hit_c, n_proc, truncated, n_final)


@njit(cache=True)
def sweep_batch(ptr, idx, rev, asrc, mark_keys, arrow_keys, seeds, lam, keep,
                direction, origin, c_max, init, guard, snap_c, snap_v, target,
                stop_on_guard, max_events, final_mask):
    """Independent replicates of :func:`sweep` from one initial state."""
    r = seeds.shape[0]
    n = init.shape[0]
    snaps = np.zeros((r, snap_c.shape[0]), dtype=np.int64)
    ext = np.empty(r)
    gt = np.empty(r)
    hit = np.empty(r)
    trunc = np.zeros(r, dtype=np.bool_)
    fin = np.zeros(r, dtype=np.int64)
    total = 0
    record = np.zeros(n, dtype=np.uint8)
    for i in range(r):
        state = init.copy()
        out = sweep(ptr, idx, rev, asrc, mark_keys, arrow_keys, uint64(seeds[i]), lam, keep,
                    direction, origin, c_max, state, record, guard, snap_c, snap_v,
                    target, stop_on_guard, max_events, final_mask)
        snaps[i] = out[3]
        ext[i] = out[4]
        gt[i] = out[5]
        hit[i] = out[6]
        total += out[7]
        trunc[i] = out[8]
        fin[i] = out[9]
    return snaps, ext, gt, hit, total, trunc, fin


@njit(cache=True)
def direct(ptr, idx, seed, lam, t_max, state, record, snap_t, snap_v):
    """Gillespie simulation straight from the generator rates.

    Each infected vertex recovers at rate 1 and infects each healthy
    neighbour at rate ``lam``. Independent of the graphical streams.
    """
    n = state.shape[0]
    key = combine(uint64(seed), uint64(DOMAIN_DIRECT))
    draw = 0
    ev_t = np.empty(16)
    ev_v = np.empty(16, dtype=np.int64)
    ev_s = np.empty(16, dtype=np.int8)
    n_ev = 0
    snaps = np.zeros(snap_t.shape[0], dtype=np.int64)
    k_snap = 0
    t = 0.0
    ext = INF
    while True:
        n_inf = 0
        n_si = 0
        for v in range(n):
            if state[v]:
                n_inf += 1
                for j in range(ptr[v], ptr[v + 1]):
                    if state[idx[j]] == 0:
                        n_si += 1
        if n_inf == 0:
            ext = t
            break
        total = n_inf + lam * n_si
        u = uniform(key, draw)
        draw += 1
        t_next = t - math.log(1.0 - u) / total
        while k_snap < snap_t.shape[0] and snap_t[k_snap] < t_next and snap_t[k_snap] <= t_max:
            snaps[k_snap] = _atom(state, snap_v)
            k_snap += 1
        if t_next > t_max:
            break
        t = t_next
        pick = uniform(key, draw) * total
        draw += 1
        flip = -1
        new = 0
        if pick < n_inf:
            target = int(pick)
            for v in range(n):
                if state[v]:
                    if target == 0:
                        flip = v
                        break
                    target -= 1
            new = 0
        else:
            target = int((pick - n_inf) / lam) if lam > 0 else 0
            if target >= n_si:
                target = n_si - 1
            for v in range(n):
                if state[v]:
                    for j in range(ptr[v], ptr[v + 1]):
                        if state[idx[j]] == 0:
                            if target == 0:
                                flip = idx[j]
                                break
                            target -= 1
                    if flip >= 0:
                        break
            new = 1
        if flip < 0:
            break
        state[flip] = new
        if record[flip]:
            if n_ev == ev_t.shape[0]:
                ev_t = _grow_f(ev_t, n_ev)
                ev_v = _grow_i(ev_v, n_ev)
                ev_s = _grow_i(ev_s, n_ev)
            ev_t[n_ev] = t
            ev_v[n_ev] = flip
            ev_s[n_ev] = new
            n_ev += 1
    while k_snap < snap_t.shape[0]:
        snaps[k_snap] = _atom(state, snap_v)
        k_snap += 1
    return ev_t[:n_ev].copy(), ev_v[:n_ev].copy(), ev_s[:n_ev].copy(), snaps, ext


@njit(cache=True)
def direct_batch(ptr, idx, seeds, lam, t_max, init, snap_t, snap_v):
    r = seeds.shape[0]
    n = init.shape[0]
    record = np.zeros(n, dtype=np.uint8)
    snaps = np.zeros((r, snap_t.shape[0]), dtype=np.int64)
    ext = np.empty(r)
    for i in range(r):
        state = init.copy()
        out = direct(ptr, idx, uint64(seeds[i]), lam, t_max, state, record, snap_t, snap_v)
        snaps[i] = out[3]
        ext[i] = out[4]
    return snaps, ext


@njit(cache=True)
def seeds_for(master, start, count):
    out = np.empty(count, dtype=np.uint64)
    for i in range(count):
        out[i] = combine(uint64(master), uint64(start + i))
    return out
