"""Sampling G(n, kappa) from a discretized kernel.

Pair {i, j} is an edge with probability f(kappa(x_i, x_j) / n), where f is
one of the three edge-probability maps:

    min      min(x, 1)
    poisson  1 - exp(-x)       (Poisson edge intensities, multiplicities collapsed)
    odds     x / (1 + x)

The ``exact`` tier flips one coin per pair.  The ``block`` tier groups
vertices by cell; inside each block of constant probability it jumps from
one success to the next with geometric skips, so the cost is
O(r^2 + n + |E|).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ModeMismatchError, SizeCapError
from .rng import make_rng

VARIANTS = ("min", "poisson", "odds")
TIERS = ("exact", "block")
DEFAULT_EXACT_CAP = 30_000


def edge_probability(x, variant="min"):
    x = np.asarray(x, dtype=float)
    if variant == "min":
        return np.minimum(x, 1.0)
    if variant == "poisson":
        return -np.expm1(-x)
    if variant == "odds":
        return x / (1.0 + x)
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class TypedGraph:
    n: int
    types: np.ndarray
    edges: np.ndarray  # (E, 2) int64, rows (u, v) with u < v, sorted, unique
    indptr: np.ndarray
    indices: np.ndarray
    num_types: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_edges(cls, n, edges, types=None, num_types=None, meta=None):
        n = int(n)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError("edge endpoint out of range")
        u, v = np.minimum(e[:, 0], e[:, 1]), np.maximum(e[:, 0], e[:, 1])
        keep = u != v
        key = np.unique(u[keep] * n + v[keep])
        e = np.stack([key // n, key % n], axis=1) if key.size else np.zeros((0, 2), np.int64)
        types = np.zeros(n, np.int64) if types is None else np.asarray(types, np.int64)
        if num_types is None:
            num_types = int(types.max()) + 1 if n else 1
        indptr, indices = _csr(n, e)
        for a in (e, indptr, indices, types):
            a.setflags(write=False)
        return cls(n, types, e, indptr, indices, int(num_types), dict(meta or {}))

    @property
    def num_edges(self):
        return len(self.edges)

    @property
    def degrees(self):
        return np.diff(self.indptr)

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def without_edges(self, mask):
        """Copy keeping only the edges where ``mask`` is False."""
        keep = ~np.asarray(mask, dtype=bool)
        return TypedGraph.from_edges(self.n, self.edges[keep], self.types, self.num_types,
                                     self.meta)

    def induced(self, vertices):
        vertices = np.asarray(vertices, dtype=np.int64)
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[vertices] = np.arange(len(vertices))
        e = relabel[self.edges]
        e = e[(e >= 0).all(axis=1)]
        meta = dict(self.meta, vertex_ids=vertices.tolist())
        return TypedGraph.from_edges(len(vertices), e, self.types[vertices], self.num_types, meta)

    def write_edgelist(self, path, types_file="-"):
        with open(path, "w") as fh:
            fh.write(f"# n={self.n} types={types_file}\n")
            np.savetxt(fh, self.edges, fmt="%d")
        with open(str(path) + ".json", "w") as fh:
            json.dump({k: v for k, v in self.meta.items() if k != "vertex_ids"}, fh, indent=2)

    @classmethod
    def read_edgelist(cls, path, types=None, num_types=None):
        with open(path) as fh:
            header = dict(tok.split("=", 1) for tok in fh.readline().lstrip("#").split())
            data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
        return cls.from_edges(int(header["n"]), data.reshape(-1, 2), types, num_types)


def _csr(n, edges):
    ends = np.concatenate([edges[:, 0], edges[:, 1]])
    other = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.lexsort((other, ends))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(ends, minlength=n), out=indptr[1:])
    return indptr, other[order].astype(np.int64)


def generate(dk, assignment, nominal_n=None, variant="min", tier="block", seed=0,
             exact_cap=DEFAULT_EXACT_CAP, kernel=None):
    """Sample a graph on ``assignment.n`` vertices.

    ``nominal_n`` divides the kernel (defaults to the vertex count; Poisson
    vertex spaces pass the intensity parameter).  With ``tier="exact"``, a
    grid assignment and a closed-form ``kernel``, pair probabilities use the
    kernel at the true points i/n instead of the cell values.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if tier not in TIERS:
        raise ValueError(f"tier must be one of {TIERS}")
    n = assignment.n
    nominal_n = float(n if nominal_n is None else nominal_n)
    if not nominal_n > 0:
        raise ValueError("nominal n must be positive")
    types = assignment.type_index
    if types.size and (types.min() < 0 or types.max() >= dk.r):
        raise ModeMismatchError("assignment has cell indices outside the kernel's space")
    rng = make_rng(seed)
    values = "cell"
    if tier == "exact":
        if n > exact_cap:
            raise SizeCapError(f"exact tier limited to n <= {exact_cap}; use tier='block'")
        pts = assignment.points() if kernel is not None else None
        if pts is not None:
            values = "point"
        edges = _exact_edges(dk.K, types, nominal_n, variant, rng, kernel, pts)
    else:
        edges = _block_edges(dk.K, types, nominal_n, variant, rng)
    meta = {"kernel": dk.source, "variant": variant, "seed": int(seed), "tier": tier,
            "nominal_n": nominal_n, "values": values, "grid_mode": dk.mode}
    return TypedGraph.from_edges(n, edges, types, dk.r, meta)


def _exact_edges(K, types, n_nom, variant, rng, kernel=None, pts=None):
    n = len(types)
    out = []
    for i in range(n - 1):
        if pts is not None:
            k = kernel.eval(pts[i], pts[i + 1:])
        else:
            k = K[types[i], types[i + 1:]]
        p = edge_probability(k / n_nom, variant)
        hit = np.flatnonzero(rng.random(n - i - 1) < p)
        if hit.size:
            out.append(np.stack([np.full(hit.size, i), hit + i + 1], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), np.int64)


def skip_positions(rng, total, p):
    """Success positions in ``range(total)`` for i.i.d. Bernoulli(p) trials.

    Gaps are drawn as floor(log U / log(1 - p)); chunks are sized to the
    expected count so usually one draw suffices.
    """
    total = int(total)
    if total <= 0 or p <= 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(total, dtype=np.int64)
    log_q = np.log1p(-p)
    found = []
    start = 0
    while start < total:
        mean = (total - start) * p
        size = int(mean + 6 * np.sqrt(mean) + 16)
        u = 1.0 - rng.random(size)
        gaps = np.floor(np.log(u) / log_q)
        gaps = np.minimum(gaps, float(total)).astype(np.int64)
        pos = start + np.cumsum(gaps + 1) - 1
        inside = pos[pos < total]
        found.append(inside)
        if inside.size < size:
            break
        start = int(pos[-1]) + 1
    return np.concatenate(found)


def _unrank_upper(k):
    """Pair (i, j), i < j, with rank k = j(j-1)/2 + i."""
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * k)) / 2.0).astype(np.int64)
    j -= (j * (j - 1) // 2 > k)
    j += ((j + 1) * j // 2 <= k)
    i = k - j * (j - 1) // 2
    return i, j


def _block_edges(K, types, n_nom, variant, rng):
    r = K.shape[0]
    order = np.argsort(types, kind="stable")
    counts = np.bincount(types, minlength=r)
    starts = np.concatenate([[0], np.cumsum(counts)])
    P = edge_probability(K / n_nom, variant)
    out = []
    for a in range(r):
        na = counts[a]
        if na == 0:
            continue
        mem_a = order[starts[a]:starts[a + 1]]
        for b in range(a, r):
            nb = counts[b]
            if nb == 0 or P[a, b] <= 0:
                continue
            if a == b:
                pos = skip_positions(rng, na * (na - 1) // 2, P[a, a])
                i, j = _unrank_upper(pos)
                u, v = mem_a[i], mem_a[j]
            else:
                pos = skip_positions(rng, na * nb, P[a, b])
                mem_b = order[starts[b]:starts[b + 1]]
                u, v = mem_a[pos // nb], mem_b[pos % nb]
            if pos.size:
                out.append(np.stack([u, v], axis=1))
    return np.concatenate(out) if out else np.zeros((0, 2), np.int64)


def expected_edges(dk, assignment, nominal_n=None, variant="min"):
    """Exact E|E(G)| from per-cell vertex counts."""
    nominal_n = float(assignment.n if nominal_n is None else nominal_n)
    c = np.bincount(assignment.type_index, minlength=dk.r).astype(float)
    P = edge_probability(dk.K / nominal_n, variant)
    pairs = np.outer(c, c)
    np.fill_diagonal(pairs, c * (c - 1))
    return 0.5 * float(np.sum(pairs * P))


def generate_coupled(dk_low, dk_high, assignment, nominal_n=None, variant="min", tier="block",
                     seed=0):
    """Sample G(kappa_high) and thin it to G(kappa_low), so G_low is a subgraph.

    Each edge of the larger graph survives with probability p_low / p_high.
    """
    if np.any(dk_low.K > dk_high.K):
        raise ValueError("coupling needs kappa_low <= kappa_high entrywise")
    high = generate(dk_high, assignment, nominal_n, variant, tier, seed)
    n_nom = float(assignment.n if nominal_n is None else nominal_n)
    t = high.types
    u, v = high.edges[:, 0], high.edges[:, 1]
    p_hi = edge_probability(dk_high.K[t[u], t[v]] / n_nom, variant)
    p_lo = edge_probability(dk_low.K[t[u], t[v]] / n_nom, variant)
    keep = make_rng(seed, 1).random(len(u)) * p_hi < p_lo
    low = TypedGraph.from_edges(high.n, high.edges[keep], t, dk_low.r,
                                dict(high.meta, kernel=dk_low.source, coupled_to=dk_high.source))
    return low, high
