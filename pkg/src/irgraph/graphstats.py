"""Observables of a sampled graph: components, degrees, distances, diameter,
short paths and cycles, and the two-core."""

from __future__ import annotations

import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import EnumerationCapError, SizeCapError
from .rng import make_rng

DEFAULT_DIAMETER_CAP = 30_000
DEFAULT_WALK_CAP = 20_000_000
_WORDS = 16  # BFS sources per batch = 64 * _WORDS


class UnionFind:
    """Disjoint sets with union by size and path halving."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def labels(self):
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


def component_labels(g):
    """Component label per vertex: the smallest vertex id in its component."""
    uf = UnionFind(g.n)
    for u, v in g.edges.tolist():
        uf.union(u, v)
    roots = uf.labels()
    first = np.full(g.n, g.n, dtype=np.int64)
    np.minimum.at(first, roots, np.arange(g.n))
    return first[roots]


@dataclass
class ComponentSummary:
    sizes: list
    c1: int
    c2: int
    edges_in_c1: int
    type_counts_in_c1: list
    n_k: dict
    giant_label: int = -1
    labels: np.ndarray = field(default=None, repr=False)

    def to_json(self):
        d = {k: getattr(self, k) for k in ("sizes", "c1", "c2", "edges_in_c1",
                                           "type_counts_in_c1")}
        d["n_k"] = {str(k): v for k, v in sorted(self.n_k.items())}
        return json.dumps(d)


def component_summary(g):
    """Component sizes; ties for the largest go to the smallest min vertex id."""
    labels = component_labels(g)
    sizes = np.bincount(labels, minlength=g.n)
    present = np.flatnonzero(sizes)
    by_size = sorted(present.tolist(), key=lambda lab: (-sizes[lab], lab))
    size_list = [int(sizes[lab]) for lab in by_size]
    if not size_list:
        return ComponentSummary([], 0, 0, 0, [0] * g.num_types, {}, -1, labels)
    giant = by_size[0]
    in_giant = labels == giant
    edges_c1 = int(np.count_nonzero(in_giant[g.edges[:, 0]])) if g.num_edges else 0
    type_counts = np.bincount(g.types[in_giant], minlength=g.num_types)
    n_k = Counter()
    for s in size_list:
        n_k[s] += s
    return ComponentSummary(size_list, size_list[0], size_list[1] if len(size_list) > 1 else 0,
                            edges_c1, type_counts.tolist(), dict(n_k), int(giant), labels)


def degree_histogram(g):
    deg = g.degrees
    counts = np.bincount(deg) if g.n else np.zeros(0, np.int64)
    return {int(k): int(c) for k, c in enumerate(counts) if c}


def _induced_csr(g, verts):
    verts = np.asarray(verts, dtype=np.int64)
    relabel = np.full(g.n, -1, dtype=np.int64)
    relabel[verts] = np.arange(len(verts))
    lens = g.indptr[verts + 1] - g.indptr[verts]
    indptr = np.zeros(len(verts) + 1, dtype=np.int64)
    np.cumsum(lens, out=indptr[1:])
    flat = np.repeat(g.indptr[verts] - indptr[:-1], lens) + np.arange(indptr[-1])
    return indptr, relabel[g.indices[flat]], relabel


def _bits(words):
    return np.unpackbits(np.ascontiguousarray(words).view(np.uint8), bitorder="little").astype(bool)


def _multi_bfs(indptr, indices, sources, targets=None):
    """Bit-parallel BFS from up to 64 * _WORDS sources at once.

    Returns the eccentricity of every source and, when ``targets`` is given
    (one per source), the distance to it (inf if unreachable).
    """
    n = len(indptr) - 1
    k = len(sources)
    words = (k + 63) // 64
    lane = np.arange(k)
    visited = np.zeros((n, words), dtype=np.uint64)
    bit = np.left_shift(np.uint64(1), (lane % 64).astype(np.uint64))
    np.bitwise_or.at(visited, (sources, lane // 64), bit)
    frontier = visited.copy()
    deg = np.diff(indptr)
    rows = np.flatnonzero(deg)
    starts = indptr[:-1][rows]
    ecc = np.zeros(k, dtype=np.int64)
    dist = None
    if targets is not None:
        targets = np.asarray(targets)
        dist = np.full(k, np.inf)
        dist[targets == sources] = 0.0
    level = 0
    while True:
        level += 1
        nxt = np.zeros_like(visited)
        if rows.size:
            nxt[rows] = np.bitwise_or.reduceat(frontier[indices], starts, axis=0)
        nxt &= ~visited
        reached = np.bitwise_or.reduce(nxt, axis=0)
        if not reached.any():
            break
        visited |= nxt
        frontier = nxt
        ecc[_bits(reached)[:k]] = level
        if dist is not None:
            hit = (nxt[targets, lane // 64] & bit) != 0
            dist[hit] = level
            if not np.isinf(dist).any():
                break
    return ecc, dist


def _component_batches(labels, min_size=2, batch=64 * _WORDS):
    """Group vertices of components with >= min_size vertices into BFS batches.

    A component larger than a batch is split into several batches over the
    same vertex set; small components are packed together.
    """
    order = np.argsort(labels, kind="stable")
    lab_sorted = labels[order]
    cuts = np.flatnonzero(np.diff(lab_sorted)) + 1
    groups = [grp for grp in np.split(order, cuts) if len(grp) >= min_size]
    packed, acc = [], []
    for grp in sorted(groups, key=len, reverse=True):
        if len(grp) > batch:
            for i in range(0, len(grp), batch):
                yield grp, grp[i:i + batch]
            continue
        if sum(len(a) for a in acc) + len(grp) > batch:
            packed.append(np.concatenate(acc))
            acc = []
        acc.append(grp)
    if acc:
        packed.append(np.concatenate(acc))
    for verts in packed:
        yield verts, verts


@dataclass(frozen=True)
class Diameter:
    value: int
    edgeless: bool

    def __int__(self):
        return self.value


def exact_diameter(g, cap=DEFAULT_DIAMETER_CAP, labels=None):
    """Largest finite distance, by BFS from every vertex.

    An edgeless graph has diameter 0 and ``edgeless=True``.
    """
    if g.n > cap:
        raise SizeCapError(f"exact diameter limited to n <= {cap}; use distance_sample")
    if g.num_edges == 0:
        return Diameter(0, True)
    labels = component_labels(g) if labels is None else labels
    best = 0
    for verts, sources in _component_batches(labels):
        indptr, indices, relabel = _induced_csr(g, verts)
        ecc, _ = _multi_bfs(indptr, indices, relabel[sources])
        best = max(best, int(ecc.max()))
    return Diameter(best, False)


def distance_sample(g, pairs, seed=0, labels=None):
    """Distances between ``pairs`` uniformly random ordered pairs u != v.

    Unreachable pairs get ``inf``.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    if g.n < 2:
        raise ValueError("need at least two vertices")
    rng = make_rng(seed)
    u = rng.integers(0, g.n, size=pairs)
    v = rng.integers(0, g.n - 1, size=pairs)
    v += v >= u
    labels = component_labels(g) if labels is None else labels
    out = np.full(pairs, np.inf)
    same = np.flatnonzero(labels[u] == labels[v])
    if same.size == 0:
        return out
    # group the reachable pairs by component, BFS inside each component
    comp = labels[u[same]]
    order = same[np.argsort(comp, kind="stable")]
    cuts = np.flatnonzero(np.diff(labels[u[order]])) + 1
    batch = 64 * _WORDS
    for grp in np.split(order, cuts):
        verts = np.flatnonzero(labels == labels[u[grp[0]]])
        indptr, indices, relabel = _induced_csr(g, verts)
        for i in range(0, len(grp), batch):
            chunk = grp[i:i + batch]
            _, d = _multi_bfs(indptr, indices, relabel[u[chunk]], relabel[v[chunk]])
            out[chunk] = d
    return out


def write_distances(path, dist):
    """One distance per line; unreachable pairs are written as ``inf``."""
    with open(path, "w") as fh:
        fh.write("distance\n")
        for d in dist:
            fh.write("inf\n" if math.isinf(d) else f"{int(d)}\n")


def walk_counts(g, kmax):
    """Number of walks with k edges, 1' A^k 1, for k = 1..kmax."""
    A = sp.csr_matrix((np.ones(len(g.indices)), g.indices, g.indptr), shape=(g.n, g.n))
    x = np.ones(g.n)
    out = []
    for _ in range(kmax):
        x = A @ x
        out.append(float(x.sum()))
    return out


def count_paths_cycles(g, kmax=3, walk_cap=DEFAULT_WALK_CAP):
    """P_k (paths with k edges, up to reversal) and Q_k (cycles with k edges,
    up to rotation and reflection) for k = 1..kmax."""
    if not 1 <= kmax <= 6:
        raise ValueError("kmax must be between 1 and 6")
    work = sum(walk_counts(g, kmax))
    if work > walk_cap:
        raise EnumerationCapError(f"about {work:.3g} walks to enumerate (cap {walk_cap:g})")
    adj = [g.neighbors(v).tolist() for v in range(g.n)]
    paths = [0] * (kmax + 1)
    cycles = [0] * (kmax + 1)
    on_path = [False] * g.n

    def extend(start, end, length, above):
        # `above`: every path vertex other than start exceeds start
        for w in adj[end]:
            if w == start:
                if length >= 2 and above and length + 1 <= kmax:
                    cycles[length + 1] += 1
                continue
            if on_path[w]:
                continue
            paths[length + 1] += 1
            if length + 1 < kmax:
                on_path[w] = True
                extend(start, w, length + 1, above and w > start)
                on_path[w] = False

    for s in range(g.n):
        if adj[s]:
            on_path[s] = True
            extend(s, s, 0, True)
            on_path[s] = False
    P = {k: paths[k] // 2 for k in range(1, kmax + 1)}
    Q = {k: cycles[k] // 2 for k in range(1, kmax + 1)}
    return P, Q


def two_core(g):
    """Maximal subgraph of minimum degree >= 2, by peeling.

    Vertex ids of the returned graph are relabelled 0..|core|-1; the original
    ids are in ``meta["vertex_ids"]``.
    """
    deg = g.degrees.astype(np.int64).tolist()
    alive = [True] * g.n
    queue = deque(v for v in range(g.n) if deg[v] < 2)
    indptr, indices = g.indptr, g.indices
    while queue:
        v = queue.popleft()
        if not alive[v]:
            continue
        alive[v] = False
        for w in indices[indptr[v]:indptr[v + 1]].tolist():
            if alive[w]:
                deg[w] -= 1
                if deg[w] == 1:
                    queue.append(w)
    return g.induced(np.flatnonzero(alive))


def bfs_labels(g):
    """Plain BFS component labelling (smallest vertex id per component)."""
    labels = np.full(g.n, -1, dtype=np.int64)
    for s in range(g.n):
        if labels[s] >= 0:
            continue
        labels[s] = s
        queue = deque([s])
        while queue:
            v = queue.popleft()
            for w in g.neighbors(v).tolist():
                if labels[w] < 0:
                    labels[w] = s
                    queue.append(w)
    return labels
