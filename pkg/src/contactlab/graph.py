"""Bounded-degree graph families and their finite truncations.

All simulation happens on a finite truncation. Vertices are densely
indexed ``0..n-1``; each family keeps a bijective map between indices and
its natural labels (lattice coordinates, tree words, explicit ids).

Truncation severs edges to removed vertices. The vertices that lost a
neighbour this way form ``Graph.boundary``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from . import _rng
from ._rng import combine

__all__ = [
    "GraphError",
    "GraphSpec",
    "Graph",
    "build_graph",
    "distance",
    "bfs_distances",
    "diameter",
    "truncation_radius",
    "parse_adjacency",
    "load_adjacency",
    "lattice",
    "halfline",
    "regular_tree",
    "explicit",
]

_MARK_TAG = 0x4D41524B
_ARROW_TAG = 0x4152524F

FAMILIES = ("lattice", "halfline", "regular_tree", "explicit")


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class GraphSpec:
    """A graph family plus the truncation window to simulate on.

    ``radius`` is the box radius for lattices and the half-line length;
    ``depth`` is the tree depth. Explicit graphs need neither.
    """

    family: str
    dim: int = 1
    degree: int = 3
    radius: int | None = None
    depth: int | None = None
    adjacency: Mapping[Hashable, Sequence[Hashable]] | None = field(default=None, compare=False)
    degree_bound: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GraphError(f"unknown family {self.family!r}")

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.family == "lattice":
            d.update(dim=self.dim, radius=self.radius)
        elif self.family == "halfline":
            d.update(radius=self.radius)
        elif self.family == "regular_tree":
            d.update(degree=self.degree, depth=self.depth)
        else:
            d["adjacency"] = {str(k): [str(v) for v in vs] for k, vs in self.adjacency.items()}
            if self.degree_bound is not None:
                d["degree_bound"] = self.degree_bound
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "GraphSpec":
        d = dict(d)
        fam = d.pop("family")
        if fam == "explicit" and "path" in d:
            adj = load_adjacency(d.pop("path"))
            return cls("explicit", adjacency=adj, **d)
        return cls(fam, **d)

    def with_radius(self, radius: int) -> "GraphSpec":
        if self.family == "regular_tree":
            return GraphSpec(self.family, degree=self.degree, depth=radius)
        return GraphSpec(self.family, dim=self.dim, radius=radius)


def lattice(dim: int = 1, radius: int = 10) -> GraphSpec:
    return GraphSpec("lattice", dim=dim, radius=radius)


def halfline(radius: int = 10) -> GraphSpec:
    return GraphSpec("halfline", radius=radius)


def regular_tree(degree: int = 3, depth: int = 4) -> GraphSpec:
    return GraphSpec("regular_tree", degree=degree, depth=depth)


def explicit(adjacency: Mapping, degree_bound: int | None = None) -> GraphSpec:
    return GraphSpec("explicit", adjacency=adjacency, degree_bound=degree_bound)


@dataclass(frozen=True, eq=False)
class Graph:
    spec: GraphSpec
    labels: tuple
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray
    rev: np.ndarray
    degree_bound: int
    boundary: np.ndarray
    vertex_keys: np.ndarray
    mark_keys: np.ndarray
    arrow_keys: np.ndarray
    _index: dict = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def n_arrows(self) -> int:
        return len(self.nbr_idx)

    def neighbors(self, i: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[i]:self.nbr_ptr[i + 1]]

    def degree(self, i: int) -> int:
        return int(self.nbr_ptr[i + 1] - self.nbr_ptr[i])

    def index(self, label) -> int:
        if self.spec.family == "lattice" and self.spec.dim > 1 and not isinstance(label, tuple):
            label = tuple(label)
        try:
            return self._index[label]
        except (KeyError, TypeError):
            raise GraphError(f"vertex {label!r} not in graph") from None

    def indices(self, labels: Iterable) -> np.ndarray:
        return np.array([self.index(v) for v in labels], dtype=np.int64)

    def label(self, i: int):
        return self.labels[i]

    @property
    def origin(self) -> int:
        fam = self.spec.family
        if fam == "lattice":
            return self.index(0 if self.spec.dim == 1 else (0,) * self.spec.dim)
        return 0

    @property
    def boundary_set(self) -> frozenset:
        return frozenset(np.flatnonzero(self.boundary).tolist())

    def arrow_index(self, x: int, y: int) -> int:
        lo, hi = self.nbr_ptr[x], self.nbr_ptr[x + 1]
        for e in range(lo, hi):
            if self.nbr_idx[e] == y:
                return int(e)
        raise GraphError(f"no edge {x}->{y}")

    def arrow_source(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.nbr_ptr))

    def ball(self, center: int, radius: float) -> np.ndarray:
        d = bfs_distances(self, center)
        return np.flatnonzero((d >= 0) & (d <= radius))


def _lattice_labels(dim: int, r: int):
    if dim == 1:
        return list(range(-r, r + 1))
    return list(product(range(-r, r + 1), repeat=dim))


def _lattice_key(label, dim: int) -> int:
    coords = (label,) if dim == 1 else label
    key = dim
    for c in coords:
        key = int(combine(np.uint64(key), np.uint64(c & 0xFFFFFFFFFFFFFFFF)))
    return key


def _tree_structure(q: int, depth: int):
    # labels are words over {1..q} (bijective base-q numeration); root is ()
    labels = [()]
    adj = {(): []}
    frontier = [()]
    for level in range(depth):
        nxt = []
        for w in frontier:
            kids = q if level == 0 else q - 1
            for j in range(1, kids + 1):
                c = w + (j,)
                labels.append(c)
                adj[c] = [w]
                adj[w].append(c)
                nxt.append(c)
        frontier = nxt
    return labels, adj


def build_graph(spec: GraphSpec) -> Graph:
    """Build the finite truncated graph for ``spec``.

    Indexing is deterministic: lattices in lexicographic coordinate order,
    trees in breadth-first order, explicit graphs in input order.
    """
    fam = spec.family
    if fam == "lattice":
        if spec.radius is None or spec.radius < 0 or spec.dim < 1:
            raise GraphError("lattice needs dim >= 1 and radius >= 0")
        r, d = spec.radius, spec.dim
        labels = _lattice_labels(d, r)
        index = {lab: i for i, lab in enumerate(labels)}
        adj = []
        for lab in labels:
            coords = (lab,) if d == 1 else lab
            nb = []
            for k in range(d):
                for step in (-1, 1):
                    c = list(coords)
                    c[k] += step
                    if abs(c[k]) <= r:
                        nb.append(index[c[0] if d == 1 else tuple(c)])
            adj.append(nb)
        D = 2 * d
        boundary = [any(abs(c) == r for c in ((lab,) if d == 1 else lab)) for lab in labels]
        keys = [_lattice_key(lab, d) for lab in labels]
    elif fam == "halfline":
        if spec.radius is None or spec.radius < 0:
            raise GraphError("halfline needs radius >= 0")
        r = spec.radius
        labels = list(range(r + 1))
        index = {lab: i for i, lab in enumerate(labels)}
        adj = [[j for j in (i - 1, i + 1) if 0 <= j <= r] for i in range(r + 1)]
        D = 2
        boundary = [i == r for i in labels]
        keys = [_lattice_key(lab, 1) ^ 0x48414C46 for lab in labels]
    elif fam == "regular_tree":
        if spec.depth is None or spec.depth < 0 or spec.degree < 2:
            raise GraphError("regular_tree needs degree >= 2 and depth >= 0")
        labels, tadj = _tree_structure(spec.degree, spec.depth)
        index = {lab: i for i, lab in enumerate(labels)}
        adj = [[index[v] for v in tadj[lab]] for lab in labels]
        D = spec.degree
        boundary = [len(lab) == spec.depth for lab in labels]
        keys = []
        for lab in labels:
            k = 0
            for j in lab:
                k = k * (spec.degree + 1) + j
            keys.append(int(combine(np.uint64(0x54524545), np.uint64(k))))
    else:
        if not spec.adjacency:
            raise GraphError("explicit graph needs a nonempty adjacency")
        labels = list(spec.adjacency.keys())
        index = {lab: i for i, lab in enumerate(labels)}
        adj = []
        for lab in labels:
            nb = []
            for v in spec.adjacency[lab]:
                if v not in index:
                    raise GraphError(f"neighbor {v!r} of {lab!r} is not a vertex")
                if v == lab:
                    raise GraphError(f"self-loop at {lab!r}")
                if index[v] in nb:
                    raise GraphError(f"duplicate edge {lab!r}-{v!r}")
                nb.append(index[v])
            adj.append(nb)
        for i, nb in enumerate(adj):
            for j in nb:
                if i not in adj[j]:
                    raise GraphError(f"adjacency not symmetric: {labels[i]!r}->{labels[j]!r}")
        D = spec.degree_bound if spec.degree_bound is not None else max(len(nb) for nb in adj)
        boundary = [False] * len(labels)
        keys = []
        for lab in labels:
            k = lab if isinstance(lab, int) else int.from_bytes(str(lab).encode()[:8].ljust(8, b"\0"), "little") ^ len(str(lab))
            keys.append(int(combine(np.uint64(0x45585043), np.uint64(k & 0xFFFFFFFFFFFFFFFF))))

    if any(len(nb) > D for nb in adj):
        raise GraphError(f"degree bound {D} violated")
    n = len(labels)
    ptr = np.zeros(n + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(nb) for nb in adj])
    idx = np.array([j for nb in adj for j in nb], dtype=np.int64)
    rev = np.empty_like(idx)
    for i in range(n):
        for e in range(ptr[i], ptr[i + 1]):
            j = idx[e]
            for f in range(ptr[j], ptr[j + 1]):
                if idx[f] == i:
                    rev[e] = f
                    break
    vkeys = np.array(keys, dtype=np.uint64)
    mkeys = _rng.mark_keys(vkeys, _MARK_TAG)
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(ptr))
    akeys = _rng.arrow_keys(vkeys, src, idx, _ARROW_TAG)
    g = Graph(
        spec=spec,
        labels=tuple(labels),
        nbr_ptr=ptr,
        nbr_idx=idx,
        rev=rev,
        degree_bound=int(D),
        boundary=np.array(boundary, dtype=bool),
        vertex_keys=vkeys,
        mark_keys=mkeys,
        arrow_keys=akeys,
        _index=index,
    )
    for a in (ptr, idx, rev, g.boundary, vkeys, mkeys, akeys):
        a.setflags(write=False)
    if n > 1 and (bfs_distances(g, 0) < 0).any():
        raise GraphError("truncated graph is not connected")
    return g


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Graph distances from ``source``; -1 marks unreachable vertices."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    ptr, idx = g.nbr_ptr, g.nbr_idx
    while q:
        u = q.popleft()
        du = dist[u] + 1
        for v in idx[ptr[u]:ptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = du
                q.append(v)
    return dist


def distance(g: Graph, x: int, y: int) -> int:
    if not (0 <= x < g.n and 0 <= y < g.n):
        raise GraphError(f"unknown vertex index {x if not 0 <= x < g.n else y}")
    if x == y:
        return 0
    return int(bfs_distances(g, x)[y])


def diameter(vertices, graph: Graph | None = None) -> int:
    """Diameter of a vertex set.

    With a graph, ``vertices`` are indices and distances are graph
    distances; without one, they are lattice coordinates (ints or tuples)
    and the L1 distance is used.
    """
    vs = list(vertices)
    if len(vs) <= 1:
        return 0
    if graph is not None:
        best = 0
        for v in vs:
            d = bfs_distances(graph, v)
            best = max(best, int(d[vs].max()))
        return best
    pts = np.array([(v,) if np.isscalar(v) else tuple(v) for v in vs])
    return int(max(np.abs(pts - p).sum(axis=1).max() for p in pts))


def truncation_radius(delta, t_horizon: float, lam: float, D: int, safety: float = 1.5,
                      graph: Graph | None = None) -> int:
    """Radius around ``delta`` that the infection cannot cross by ``t_horizon``.

    Spread is dominated by a branching process with rate ``D * lam``; the
    safety factor covers the fluctuations of that bound.
    """
    return diameter(delta, graph) + int(math.ceil(safety * D * lam * t_horizon - 1e-12))


def parse_adjacency(text: str) -> dict:
    """Parse ``id: n1 n2 ...`` lines; ``#`` starts a comment."""
    adj = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise GraphError(f"line {lineno}: expected 'id: neighbors'")
        head, tail = line.split(":", 1)
        key = _token(head.strip())
        if key in adj:
            raise GraphError(f"line {lineno}: vertex {key!r} listed twice")
        adj[key] = [_token(t) for t in tail.split()]
    return adj


def _token(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def load_adjacency(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_adjacency(fh.read())
