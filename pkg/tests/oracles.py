"""Independent reference implementations used by the tests.

Everything here is deliberately naive: scalar bisection for fixed points,
Floyd-Warshall for distances, exhaustive enumeration of vertex sequences
and subsets for paths, cycles and the two-core.
"""

import itertools
import math
from functools import lru_cache

import numpy as np


def bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def er_survival(c):
    """Positive root of rho = 1 - exp(-c rho), or 0 for c <= 1."""
    if c <= 1:
        return 0.0
    return bisect(lambda x: 1 - math.exp(-c * x) - x, 1e-12, 1.0)


# frozen outputs of the oracles above (see tests/test_oracles.py)
ER_RHO = {1.2: 0.31369833104121736, 1.5: 0.5828116438658113, 2.0: 0.7968121300200199,
          3.0: 0.9404797907073597, 5.0: 0.9930228463488553}
ER2_ZETA = 0.9587146894929984        # (1 - rho/2) ln(1/(1 - rho)) at c = 2
ER2_TWO_CORE = 0.4730070110740625    # 1 - (1 + c rho) exp(-c rho) at c = 2
ER2_DUAL_NORM = 0.4063757399599601   # c (1 - rho) at c = 2
HALF_TRIANGLE_BETA3 = 1.0 / 24       # sum_j (-1)^j ((j + 1/2) pi)^-3 / 6
J0_FIRST_ZERO = 2.404825557695773


def half_triangle_beta3(terms=200_000):
    j = np.arange(terms)
    return float(np.sum((-1.0) ** j / ((j + 0.5) * np.pi) ** 3)) / 6


def adjacency(n, edges):
    A = np.zeros((n, n), dtype=bool)
    for u, v in edges:
        if u != v:
            A[u, v] = A[v, u] = True
    return A


def floyd_warshall(A):
    n = len(A)
    D = np.where(A, 1.0, np.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def bf_components(A):
    """Labels (smallest vertex id per component) from reachability."""
    D = floyd_warshall(A)
    return np.array([int(np.flatnonzero(np.isfinite(D[v])).min()) for v in range(len(A))])


def bf_diameter(A):
    D = floyd_warshall(A)
    finite = D[np.isfinite(D)]
    return int(finite.max()) if finite.size else 0


@lru_cache(maxsize=None)
def _sequences(n, length):
    if length > n:
        return np.zeros((0, length), dtype=np.int64)
    return np.array(list(itertools.permutations(range(n), length)), dtype=np.int64)


def bf_paths_cycles(A, kmax):
    """P_k and Q_k by checking every sequence of distinct vertices."""
    n = len(A)
    P, Q = {}, {}
    for k in range(1, kmax + 1):
        seq = _sequences(n, k + 1)
        if len(seq):
            ok = np.ones(len(seq), dtype=bool)
            for i in range(k):
                ok &= A[seq[:, i], seq[:, i + 1]]
            P[k] = int(ok.sum()) // 2
        else:
            P[k] = 0
        if k < 3:
            Q[k] = 0
            continue
        seq = _sequences(n, k)
        if len(seq):
            ok = np.ones(len(seq), dtype=bool)
            for i in range(k):
                ok &= A[seq[:, i], seq[:, (i + 1) % k]]
            Q[k] = int(ok.sum()) // (2 * k)
        else:
            Q[k] = 0
    return P, Q


def bf_two_core(A):
    """Union of all vertex subsets whose induced subgraph has min degree >= 2."""
    n = len(A)
    masks = np.arange(1 << n, dtype=np.int64)
    member = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    deg = member.astype(np.int64) @ A.astype(np.int64)
    ok = np.all(~member | (deg >= 2), axis=1)
    return np.flatnonzero(member[ok].any(axis=0))


def random_graph(rng, n, p):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return np.stack([iu[0][keep], iu[1][keep]], axis=1)
