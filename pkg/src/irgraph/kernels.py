"""Kernels, their cell discretizations, and discrete summaries.

A :class:`Kernel` is a symmetric non-negative function on the ground space.
:func:`discretize` turns it into a :class:`DiscreteKernel`: an r x r matrix
of cell values plus the cell weights.  ``lower`` and ``upper`` modes take the
infimum / supremum of the kernel over each product cell, so the resulting
step functions bracket the kernel; ``midpoint`` evaluates at cell centres.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import KernelDomainError, NonIntegrableError, UnboundedApproximationError
from .spaces import TypeSpace

MODES = ("lower", "midpoint", "upper")
_EDGE_TOL = 1e-12


class Kernel:
    """Base class.  Subclasses implement ``_value`` and ``_bounds``."""

    name = "kernel"
    bounded = True

    def __init__(self, scale=1.0):
        if not scale >= 0:
            raise KernelDomainError("scale multiplier must be non-negative")
        self.scale = float(scale)

    def params(self):
        return {}

    def spec(self):
        parts = [f"{k}={v:g}" for k, v in self.params().items()]
        if self.scale != 1.0:
            parts.append(f"s={self.scale:g}")
        return self.name + (":" + ",".join(parts) if parts else "")

    def __repr__(self):
        return f"Kernel({self.spec()})"

    def __eq__(self, other):
        return type(self) is type(other) and self.spec() == other.spec()

    def __hash__(self):
        return hash(self.spec())

    def scaled(self, c):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.scale = self.scale * float(c)
        return new

    def eval(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return self.scale * self._value(x, y)

    def _value(self, x, y):
        raise NotImplementedError

    def cell_matrix(self, space, mode):
        """(lo, mid, hi) style matrix for one mode, before scaling."""
        a, b = space.lefts, space.rights
        if mode == "midpoint":
            m = space.midpoints
            return self._mid(m[:, None], m[None, :])
        lo, hi = self._bounds(a[:, None], b[:, None], a[None, :], b[None, :])
        return lo if mode == "lower" else hi

    def _mid(self, x, y):
        return self._value(x, y)

    def _bounds(self, a1, b1, a2, b2):
        raise NotImplementedError


class Constant(Kernel):
    name = "constant"

    def __init__(self, c, scale=1.0):
        super().__init__(scale)
        if not c >= 0:
            raise KernelDomainError("constant kernel needs c >= 0")
        self.c = float(c)

    def params(self):
        return {"c": self.c}

    def _value(self, x, y):
        return np.full(np.broadcast(x, y).shape, self.c)

    def _bounds(self, a1, b1, a2, b2):
        v = np.full(np.broadcast(a1, a2).shape, self.c)
        return v, v


class FiniteMatrix(Kernel):
    name = "matrix"

    def __init__(self, K, scale=1.0):
        super().__init__(scale)
        K = np.array(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise KernelDomainError("kernel matrix must be square")
        if np.any(~np.isfinite(K)) or np.any(K < 0):
            raise KernelDomainError("kernel matrix must be finite and non-negative")
        if not np.array_equal(K, K.T):
            raise KernelDomainError("kernel matrix must be symmetric")
        K.setflags(write=False)
        self.K = K

    def spec(self):
        s = "matrix:" + json.dumps(self.K.tolist())
        return s + (f",s={self.scale:g}" if self.scale != 1.0 else "")

    def _value(self, x, y):
        return self.K[np.asarray(x, dtype=int), np.asarray(y, dtype=int)]


class _MaxKernel(Kernel):
    """kappa(x, y) = phi(max(x, y)) with phi non-increasing on (0, 1]."""

    def phi(self, m):
        raise NotImplementedError

    def phi_at_zero(self):
        return np.inf

    def _value(self, x, y):
        return self.phi(np.maximum(x, y))

    def _bounds(self, a1, b1, a2, b2):
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = self.phi(np.maximum(b1, b2))
            top = np.maximum(a1, a2)
            hi = np.where(top > 0, self.phi(np.where(top > 0, top, 1.0)), self.phi_at_zero())
        return lo, hi


class Dubins(_MaxKernel):
    name = "dubins"
    bounded = False

    def __init__(self, c=1.0, scale=1.0):
        super().__init__(scale)
        self.c = float(c)

    def params(self):
        return {"c": self.c}

    def phi(self, m):
        return self.c / m


class CHKNS(_MaxKernel):
    name = "chkns"
    bounded = False

    def __init__(self, delta, scale=1.0):
        super().__init__(scale)
        self.delta = float(delta)

    def params(self):
        return {"delta": self.delta}

    def phi(self, m):
        return 2.0 * self.delta * (1.0 / m - 1.0)


class Turova(_MaxKernel):
    """(2 lam / (1 - d)) ((max)^(d-1) - 1); d = 1 is the limit 2 lam ln(1/max).

    ``d = 0`` coincides with the CHKNS kernel at ``delta = lam``; construct
    it through :func:`turova`, which returns that alias.
    """

    name = "turova"

    def __init__(self, lam, delta, scale=1.0):
        super().__init__(scale)
        if not delta > 0:
            raise KernelDomainError("Turova kernel needs delta > 0 (delta = 0 is CHKNS)")
        self.lam = float(lam)
        self.delta = float(delta)
        self.bounded = self.delta > 1

    def params(self):
        return {"lambda": self.lam, "delta": self.delta}

    def phi(self, m):
        t = (self.delta - 1.0) * np.log(m)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(t == 0, 1.0, np.expm1(t) / np.where(t == 0, 1.0, t))
        return 2.0 * self.lam * (-np.log(m)) * ratio

    def phi_at_zero(self):
        return 2.0 * self.lam / (self.delta - 1.0) if self.delta > 1 else np.inf


def turova(lam, delta, scale=1.0):
    if delta == 0:
        return CHKNS(lam, scale)
    return Turova(lam, delta, scale)


class MaxType(_MaxKernel):
    """phi(max(x, y)) with phi piecewise linear through a table of points.

    phi is held constant left of the first and right of the last knot.
    The table need not be monotone; cell bounds include interior knots.
    """

    name = "maxtype"

    def __init__(self, xs, values, scale=1.0):
        super().__init__(scale)
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or len(xs) < 1:
            raise KernelDomainError("phi table needs matching 1-d knots and values")
        if np.any(np.diff(xs) <= 0) or np.any(values < 0) or np.any(~np.isfinite(values)):
            raise KernelDomainError("phi knots must increase and values be finite, >= 0")
        self.xs, self.values = xs, values

    def spec(self):
        return "maxtype:" + json.dumps({"x": self.xs.tolist(), "phi": self.values.tolist()})

    def phi(self, m):
        return np.interp(m, self.xs, self.values)

    def _bounds(self, a1, b1, a2, b2):
        lo_m = np.maximum(a1, a2)
        hi_m = np.maximum(b1, b2)
        ends = np.stack([self.phi(lo_m), self.phi(hi_m)])
        lo, hi = ends.min(axis=0), ends.max(axis=0)
        for xk, vk in zip(self.xs, self.values):
            inside = (lo_m < xk) & (xk < hi_m)
            lo = np.where(inside, np.minimum(lo, vk), lo)
            hi = np.where(inside, np.maximum(hi, vk), hi)
        return lo, hi


class Rank1(Kernel):
    """psi(x) psi(y) with psi(x) = a x^(-1/p)."""

    name = "rank1"
    bounded = False

    def __init__(self, p, a=1.0, scale=1.0):
        super().__init__(scale)
        if not p > 1:
            raise NonIntegrableError("rank-1 kernel needs p > 1 for an integrable psi")
        self.p = float(p)
        self.a = float(a)
        self.bounded = math.isinf(self.p)

    def params(self):
        return {"p": self.p, "a": self.a}

    def psi(self, x):
        with np.errstate(divide="ignore"):
            return self.a * np.power(x, -1.0 / self.p)

    def _value(self, x, y):
        return self.psi(x) * self.psi(y)

    def _bounds(self, a1, b1, a2, b2):
        lo = self.psi(b1) * self.psi(b2)
        hi = self.psi(a1) * self.psi(a2)
        return lo, hi


class HalfTriangle(Kernel):
    """Indicator of x + y <= 1."""

    name = "halftriangle"

    def _value(self, x, y):
        return (x + y <= 1.0).astype(float)

    def _mid(self, x, y):
        s = x + y
        return np.where(np.abs(s - 1.0) <= _EDGE_TOL, 0.5, (s < 1.0).astype(float))

    def _bounds(self, a1, b1, a2, b2):
        lo = (b1 + b2 <= 1.0 + _EDGE_TOL).astype(float)
        hi = (a1 + a2 < 1.0 - _EDGE_TOL).astype(float)
        return lo, hi


def _circ(d):
    d = np.mod(d, 1.0)
    return np.minimum(d, 1.0 - d)


class HomogeneousWindow(Kernel):
    """c / (2w) on pairs within circular distance w, zero elsewhere."""

    name = "window"

    def __init__(self, c, w, scale=1.0):
        super().__init__(scale)
        if not 0 < w <= 0.5:
            raise KernelDomainError("window half-width must lie in (0, 1/2]")
        self.c, self.w = float(c), float(w)

    def params(self):
        return {"c": self.c, "w": self.w}

    def _value(self, x, y):
        return np.where(_circ(x - y) <= self.w, self.c / (2 * self.w), 0.0)

    def _mid(self, x, y):
        d = _circ(x - y)
        h = self.c / (2 * self.w)
        return np.where(np.abs(d - self.w) <= _EDGE_TOL, 0.5 * h, np.where(d < self.w, h, 0.0))

    def _bounds(self, a1, b1, a2, b2):
        # y - x ranges over the open interval (a2 - b1, b2 - a1)
        lo_d, hi_d = a2 - b1, b2 - a1
        has_int = np.floor(hi_d) > lo_d
        near = np.where(has_int, 0.0, np.minimum(_circ(lo_d), _circ(hi_d)))
        has_half = np.floor(hi_d - 0.5) > lo_d - 0.5
        far = np.where(has_half, 0.5, np.maximum(_circ(lo_d), _circ(hi_d)))
        h = self.c / (2 * self.w)
        lo = np.where(far < self.w - _EDGE_TOL, h, 0.0)
        hi = np.where(near < self.w - _EDGE_TOL, h, 0.0)
        return lo, hi


@dataclass(frozen=True)
class DiscreteKernel:
    K: np.ndarray
    w: np.ndarray
    space: TypeSpace | None = field(default=None, repr=False, compare=False)
    mode: str = "midpoint"
    capped: bool = False
    source: str = ""

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        w = np.array(self.w, dtype=float)
        if K.ndim != 2 or K.shape != (len(w), len(w)):
            raise KernelDomainError("K must be r x r with one weight per cell")
        if not np.array_equal(K, K.T):
            K = 0.5 * (K + K.T)
        K.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "w", w)

    @property
    def r(self):
        return len(self.w)

    @property
    def total_mass(self):
        return float(self.w.sum())

    def scaled(self, c):
        return replace(self, K=self.K * float(c), source=f"{c:g}*({self.source})")

    def with_weights(self, w):
        return replace(self, w=np.asarray(w, dtype=float))

    def operator_matrix(self):
        """Matrix of T on cell functions: (T f)_i = sum_j K_ij w_j f_j."""
        return self.K * self.w[None, :]

    def symmetric_matrix(self):
        s = np.sqrt(self.w)
        return self.K * s[:, None] * s[None, :]

    def step_values(self, x, y):
        """Step-function value at points of an interval space."""
        return self.K[self.space.cell_of(x), self.space.cell_of(y)]

    def to_json(self):
        return json.dumps({"K": self.K.tolist(), "w": self.w.tolist(), "mode": self.mode,
                           "capped": self.capped, "source": self.source})

    @classmethod
    def from_json(cls, text, space=None):
        d = json.loads(text) if isinstance(text, str) else text
        return cls(np.array(d["K"]), np.array(d["w"]), space, d.get("mode", "midpoint"),
                   d.get("capped", False), d.get("source", ""))


def discretize(kernel, space, mode="midpoint", cap=None):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if isinstance(kernel, FiniteMatrix):
        if kernel.K.shape[0] != space.r:
            raise KernelDomainError("matrix size does not match the number of cells")
        K = kernel.scale * kernel.K
        return DiscreteKernel(K, space.weights, space, mode, False, kernel.spec())
    if isinstance(kernel, Constant):
        K = np.full((space.r, space.r), kernel.scale * kernel.c)
        return DiscreteKernel(K, space.weights, space, mode, False, kernel.spec())
    if space.kind != "interval":
        raise KernelDomainError(f"{kernel.name} kernel needs an interval space")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        K = kernel.scale * kernel.cell_matrix(space, mode)
    capped = False
    if mode == "upper":
        over = ~np.isfinite(K)
        if cap is not None:
            over |= K > cap
        if np.any(over):
            if cap is None:
                raise UnboundedApproximationError(
                    f"upper approximation of {kernel.spec()} is infinite; pass a cap")
            K = np.where(over, cap, K)
            capped = True
    elif np.any(~np.isfinite(K)):
        raise UnboundedApproximationError("kernel infinite at a cell centre")
    K = 0.5 * (K + K.T)
    return DiscreteKernel(K, space.weights, space, mode, capped, kernel.spec())


def mean_edge_density(dk):
    """Half the kernel integral, 1/2 sum K_ij w_i w_j."""
    return 0.5 * float(dk.w @ dk.K @ dk.w)


@dataclass(frozen=True)
class Irreducibility:
    kind: str  # "irreducible" | "quasi_irreducible" | "reducible"
    support: tuple = ()
    partition: tuple = ()

    def __str__(self):
        return self.kind


def is_irreducible(dk):
    from .graphstats import UnionFind

    active = np.flatnonzero(dk.w > 0)
    sub = dk.K[np.ix_(active, active)] > 0
    zero_row = ~sub.any(axis=1)
    uf = UnionFind(len(active))
    ii, jj = np.nonzero(np.triu(sub, 1))
    for i, j in zip(ii, jj):
        uf.union(int(i), int(j))
    groups = {}
    for k in range(len(active)):
        groups.setdefault(uf.find(k), []).append(int(active[k]))
    partition = tuple(sorted(tuple(g) for g in groups.values()))
    if len(partition) <= 1:
        return Irreducibility("irreducible", tuple(int(a) for a in active), partition)
    nonzero = [g for g in partition if not all(zero_row[np.searchsorted(active, c)] for c in g)]
    if len(nonzero) == 1:
        return Irreducibility("quasi_irreducible", nonzero[0], partition)
    return Irreducibility("reducible", (), partition)


_PRESETS = {
    "constant": (Constant, ("c",)),
    "dubins": (Dubins, ("c",)),
    "chkns": (CHKNS, ("delta",)),
    "rank1": (Rank1, ("p", "a")),
    "turova": (turova, ("lambda", "delta")),
    "halftriangle": (HalfTriangle, ()),
    "window": (HomogeneousWindow, ("c", "w")),
}


def presets():
    return {name: list(keys) for name, (_, keys) in _PRESETS.items()} | {
        "matrix": ["@file.json or inline JSON"], "maxtype": ["@file.json with x, phi"]}


def parse_kernel(text):
    """Build a kernel from a preset string such as ``dubins:c=0.26``.

    ``matrix:@K.json`` and ``maxtype:@phi.json`` read their tables from a file;
    every preset accepts an extra ``s=`` scale multiplier.
    """
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name in ("matrix", "maxtype"):
        payload = rest.strip()
        if payload.startswith("@"):
            with open(payload[1:]) as fh:
                data = json.load(fh)
        else:
            data = json.loads(payload)
        if name == "matrix":
            if isinstance(data, dict):
                return FiniteMatrix(data["K"], data.get("s", 1.0))
            return FiniteMatrix(data)
        return MaxType(data["x"], data["phi"], data.get("s", 1.0))
    if name not in _PRESETS:
        raise KernelDomainError(f"unknown kernel preset {name!r}")
    ctor, keys = _PRESETS[name]
    kw = {}
    scale = 1.0
    for tok in filter(None, (t.strip() for t in rest.split(","))):
        k, _, v = tok.partition("=")
        k = k.strip().lower()
        if k == "s":
            scale = float(v)
        elif k in keys:
            kw[k] = float(v)
        else:
            raise KernelDomainError(f"{name} kernel has no parameter {k!r}")
    if name == "turova":
        return turova(kw["lambda"], kw["delta"], scale)
    return ctor(**kw, scale=scale)
