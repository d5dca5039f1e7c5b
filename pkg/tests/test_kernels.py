import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irgraph.errors import (KernelDomainError, NonIntegrableError,
                            UnboundedApproximationError)
from irgraph.kernels import (CHKNS, Constant, DiscreteKernel, Dubins, FiniteMatrix,
                             HalfTriangle, HomogeneousWindow, MaxType, Rank1, Turova,
                             discretize, is_irreducible, mean_edge_density, parse_kernel,
                             presets, turova)
from irgraph.spaces import make_finite_space, make_interval_space

PRESETS = [Dubins(1.3), CHKNS(0.4), Turova(0.8, 0.5), Turova(0.8, 1.0), Turova(0.3, 2.5),
           Rank1(3, 0.7), HalfTriangle(), HomogeneousWindow(2, 0.1),
           MaxType([0.1, 0.5, 1.0], [3, 1, 0.5]), Constant(1.5)]


def test_eval_examples():
    assert Dubins(1).eval(0.25, 0.5) == 2.0
    assert Constant(2).eval(0.3, 0.9) == 2.0
    assert Rank1(2, 1).eval(0.25, 0.25) == pytest.approx(4.0)
    assert HalfTriangle().eval(0.3, 0.7) == 1.0 and HalfTriangle().eval(0.5, 0.6) == 0.0
    assert CHKNS(0.5).eval(0.25, 0.1) == pytest.approx(3.0)
    assert Turova(1, 1).eval(0.5, 0.2) == pytest.approx(2 * math.log(2))
    assert Turova(1, 0.5).eval(0.25, 0.1) == pytest.approx(4 * (2 - 1))
    assert HomogeneousWindow(1, 0.1).eval(0.95, 0.02) == pytest.approx(5.0)


@pytest.mark.parametrize("k", PRESETS, ids=lambda k: k.spec())
def test_symmetric_nonnegative(k):
    rng = np.random.default_rng(0)
    x, y = rng.random(500) + 1e-9, rng.random(500) + 1e-9
    a, b = k.eval(x, y), k.eval(y, x)
    assert np.array_equal(a, b)
    assert np.all(a >= 0)


def test_domain_errors():
    with pytest.raises(NonIntegrableError):
        Rank1(1.0)
    with pytest.raises(KernelDomainError):
        Turova(1, 0)
    assert isinstance(turova(0.3, 0), CHKNS)
    with pytest.raises(KernelDomainError):
        FiniteMatrix([[0, 1], [2, 0]])
    with pytest.raises(KernelDomainError):
        FiniteMatrix([[0, -1], [-1, 0]])


def test_discretize_constant_and_matrix():
    s = make_interval_space(5)
    assert np.all(discretize(Constant(3), s).K == 3)
    f = make_finite_space([0.5, 0.5])
    dk = discretize(FiniteMatrix([[0, 4], [4, 0]]), f)
    assert dk.K.tolist() == [[0, 4], [4, 0]] and dk.w.tolist() == [0.5, 0.5]


def _corner_oracle(k, s, lower):
    """min/max over the four corners of each cell pair (attained there for
    kernels monotone in each coordinate)."""
    r = s.r
    out = np.empty((r, r))
    for i in range(r):
        for j in range(r):
            vals = [k.eval(x, y) for x in (s.lefts[i], s.rights[i]) for y in (s.lefts[j], s.rights[j])]
            out[i, j] = min(vals) if lower else max(vals)
    return out


def test_dubins_lower_uniform_two_cells():
    dk = discretize(Dubins(1), make_interval_space(2), "lower")
    assert dk.K.tolist() == [[2, 1], [1, 1]]
    with np.errstate(divide="ignore"):
        oracle = _corner_oracle(Dubins(1), make_interval_space(2), True)
    assert np.array_equal(dk.K, oracle)


@pytest.mark.parametrize("k", [CHKNS(0.4), Turova(0.8, 0.5), Turova(0.3, 2.5), Rank1(3, 0.7),
                               MaxType([0.1, 0.5, 1.0], [3, 1, 0.5])], ids=lambda k: k.spec())
def test_lower_matches_corner_oracle(k):
    s = make_interval_space(6, "log", 4)
    with np.errstate(all="ignore"):
        lo = discretize(k, s, "lower").K
        oracle = _corner_oracle(k, s, True)
    assert np.allclose(lo[1:, 1:], oracle[1:, 1:], rtol=1e-12)


@pytest.mark.parametrize("k", [Dubins(1), CHKNS(0.3), Turova(0.5, 0.5), Rank1(4), HalfTriangle()],
                         ids=lambda k: k.spec())
def test_lower_nested_grids(k):
    rng = np.random.default_rng(1)
    x, y = rng.random(10_000), rng.random(10_000)
    for m in (3, 6, 12):
        a = discretize(k, make_interval_space(m), "lower")
        b = discretize(k, make_interval_space(2 * m), "lower")
        assert np.all(a.step_values(x, y) <= b.step_values(x, y) + 1e-12)


@pytest.mark.parametrize("k", [Dubins(1), CHKNS(0.3), Turova(0.5, 1.0), Rank1(4), HalfTriangle(),
                               HomogeneousWindow(1, 0.2), Turova(0.3, 2.5)],
                         ids=lambda k: k.spec())
def test_monotone_approximation_levels(k):
    dens = []
    for m in (4, 8, 16, 32, 64):
        s = make_interval_space(m)
        lo = mean_edge_density(discretize(k, s, "lower"))
        mid = mean_edge_density(discretize(k, s, "midpoint")) if k.bounded or not isinstance(k, Rank1) else None
        hi_k = discretize(k, s, "upper", cap=1e6)
        hi = mean_edge_density(hi_k)
        if mid is not None:
            assert lo <= mid + 1e-12 and mid <= hi + 1e-12
        dens.append(lo)
    assert all(a <= b + 1e-12 for a, b in zip(dens, dens[1:]))


def test_upper_needs_cap():
    s = make_interval_space(10, "log", 5)
    with pytest.raises(UnboundedApproximationError):
        discretize(Dubins(1), s, "upper")
    dk = discretize(Dubins(1), s, "upper", cap=100.0)
    assert dk.capped and dk.K.max() == 100.0
    assert not discretize(Turova(1, 3), s, "upper").capped


@given(st.floats(0, 10), st.sampled_from(range(len(PRESETS))), st.sampled_from(["lower", "midpoint"]))
@settings(max_examples=40)
def test_scaling_linearity(c, idx, mode):
    k = PRESETS[idx]
    s = make_interval_space(9)
    if mode == "midpoint" or k.bounded or isinstance(k, (Dubins, CHKNS, Turova, Rank1)):
        with np.errstate(all="ignore"):
            a = discretize(k.scaled(c), s, mode).K
            b = c * discretize(k, s, mode).K
        assert np.allclose(a, b, rtol=1e-15, atol=0)


def test_discrete_kernel_symmetric_exact():
    for k in PRESETS:
        dk = discretize(k, make_interval_space(17, "log", 8), "midpoint")
        assert np.array_equal(dk.K, dk.K.T)


def test_mean_edge_density():
    assert mean_edge_density(discretize(Constant(3), make_finite_space([1]))) == 1.5
    m = 400
    d = mean_edge_density(discretize(HalfTriangle(), make_interval_space(m)))
    assert abs(d - 0.25) <= 1 / m
    prev = 0
    for L, m in ((10, 100), (20, 400), (40, 1200)):
        d = mean_edge_density(discretize(Dubins(1.0), make_interval_space(m, "log", L), "lower"))
        assert prev <= d < 1.0
        prev = d
    assert prev > 0.95


def test_irreducibility_examples():
    f2 = make_finite_space([0.5, 0.5])
    assert is_irreducible(discretize(FiniteMatrix([[0, 4], [4, 0]]), f2)).kind == "irreducible"
    K = np.zeros((4, 4))
    K[:2, :2] = 1
    K[2:, 2:] = 2
    r = is_irreducible(DiscreteKernel(K, np.ones(4) / 4))
    assert r.kind == "reducible" and r.partition == ((0, 1), (2, 3))
    K = np.ones((3, 3))
    K[2, :] = K[:, 2] = 0
    r = is_irreducible(DiscreteKernel(K, np.ones(3) / 3))
    assert r.kind == "quasi_irreducible" and r.support == (0, 1)


@given(st.integers(2, 7), st.integers(0, 10_000))
@settings(max_examples=60)
def test_irreducibility_permutation_invariant(r, seed):
    rng = np.random.default_rng(seed)
    K = rng.random((r, r)) * (rng.random((r, r)) < 0.35)
    K = K + K.T
    w = rng.random(r) * (rng.random(r) < 0.9)
    w[0] = 0.5
    a = is_irreducible(DiscreteKernel(K, w))
    perm = rng.permutation(r)
    b = is_irreducible(DiscreteKernel(K[np.ix_(perm, perm)], w[perm]))
    assert a.kind == b.kind


def test_parse_presets(tmp_path):
    assert parse_kernel("constant:c=2").eval(0.1, 0.2) == 2
    assert parse_kernel("dubins:c=0.26").c == 0.26
    assert parse_kernel("chkns:delta=0.125").delta == 0.125
    k = parse_kernel("rank1:p=4,a=1")
    assert (k.p, k.a) == (4, 1)
    assert parse_kernel("turova:lambda=0.8,delta=1").lam == 0.8
    assert parse_kernel("halftriangle").name == "halftriangle"
    assert parse_kernel("dubins:c=1,s=2").eval(0.5, 0.5) == 4
    p = tmp_path / "K.json"
    p.write_text(json.dumps([[0, 4], [4, 0]]))
    assert parse_kernel(f"matrix:@{p}").K.tolist() == [[0, 4], [4, 0]]
    assert parse_kernel('matrix:{"K": [[1]], "s": 3}').scale == 3
    with pytest.raises(KernelDomainError):
        parse_kernel("nosuch:c=1")
    assert "dubins" in presets()


def test_discrete_kernel_json():
    dk = discretize(Dubins(1), make_interval_space(4), "lower")
    d = json.loads(dk.to_json())
    assert d["mode"] == "lower" and d["K"] == dk.K.tolist()
    assert np.array_equal(DiscreteKernel.from_json(dk.to_json()).K, dk.K)


def test_midpoint_on_boundary_is_half():
    K = discretize(HalfTriangle(), make_interval_space(4), "midpoint").K
    assert K[0, 3] == 0.5 and K[0, 0] == 1 and K[3, 3] == 0
