"""Ground spaces and vertex type assignments.

Two kinds of ground space are supported: a finite set of labelled cells
with weights, and a partition of the unit interval (0, 1] under Lebesgue
measure.  Interval cells are half-open ``(a, b]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGridError, InvalidMeasureError, ModeMismatchError
from .rng import make_rng

DEFAULT_LOG_DEPTH = 30.0


@dataclass(frozen=True)
class TypeSpace:
    kind: str  # "finite" | "interval"
    weights: np.ndarray
    edges: np.ndarray | None = None  # interval endpoints, len(weights) + 1
    labels: tuple = ()
    grid_scale: str | None = None  # "uniform" | "logarithmic"
    depth: float | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.edges is not None:
            e = np.asarray(self.edges, dtype=float)
            e.setflags(write=False)
            object.__setattr__(self, "edges", e)

    @property
    def r(self):
        return len(self.weights)

    @property
    def total_mass(self):
        return float(self.weights.sum())

    @property
    def lefts(self):
        return self.edges[:-1]

    @property
    def rights(self):
        return self.edges[1:]

    @property
    def midpoints(self):
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def cells(self):
        if self.kind == "finite":
            return list(self.labels)
        return [[float(a), float(b)] for a, b in zip(self.lefts, self.rights)]

    def to_json(self):
        d = {"kind": self.kind, "cells": self.cells(), "weights": self.weights.tolist()}
        if self.kind == "interval":
            d["scale"] = self.grid_scale
            if self.depth is not None:
                d["depth"] = self.depth
        return json.dumps(d)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text) if isinstance(text, str) else text
        if d["kind"] == "finite":
            return cls("finite", np.array(d["weights"], dtype=float), labels=tuple(d["cells"]))
        cells = d["cells"]
        edges = [cells[0][0]] + [c[1] for c in cells]
        return cls("interval", np.array(d["weights"], dtype=float), edges=np.array(edges),
                   grid_scale=d.get("scale", "uniform"), depth=d.get("depth"))

    def cell_of(self, x):
        """Index of the half-open cell (a, b] containing each point x."""
        if self.kind != "interval":
            raise ModeMismatchError("cell_of needs an interval space")
        idx = np.searchsorted(self.edges[1:], x, side="left")
        return np.minimum(idx, self.r - 1)


def make_finite_space(weights, labels=None):
    w = np.array(weights, dtype=float).ravel()
    if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w < 0) or not np.any(w > 0):
        raise InvalidMeasureError("weights must be finite, non-negative and not all zero")
    if labels is None:
        labels = tuple(range(len(w)))
    elif len(labels) != len(w):
        raise InvalidMeasureError("one label per weight")
    return TypeSpace("finite", w, labels=tuple(labels))


def make_interval_space(m, scale="uniform", depth=DEFAULT_LOG_DEPTH):
    """Partition of (0, 1] into ``m`` uniform cells, or ``m`` geometric cells
    spanning [e^-depth, 1] plus the singular cell (0, e^-depth]."""
    if int(m) != m or m < 1:
        raise InvalidGridError("cell count must be a positive integer")
    m = int(m)
    if scale == "uniform":
        edges = np.arange(m + 1, dtype=float) / m
        return TypeSpace("interval", np.diff(edges), edges=edges, grid_scale="uniform")
    if scale in ("log", "logarithmic"):
        if not depth > 0:
            raise InvalidGridError("logarithmic grid needs depth > 0")
        geo = np.exp(-depth + depth * np.arange(m + 1) / m)
        geo[-1] = 1.0
        edges = np.concatenate([[0.0], geo])
        return TypeSpace("interval", np.diff(edges), edges=edges,
                         grid_scale="logarithmic", depth=float(depth))
    raise InvalidGridError(f"unknown grid scale {scale!r}")


@dataclass(frozen=True)
class VertexAssignment:
    n: int
    type_index: np.ndarray
    mode: str
    seed: int
    space: TypeSpace = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        t = np.asarray(self.type_index, dtype=np.int64)
        t.setflags(write=False)
        object.__setattr__(self, "type_index", t)

    def counts(self, r=None):
        r = r if r is not None else (self.space.r if self.space is not None else None)
        return np.bincount(self.type_index, minlength=r or 0)

    def points(self):
        """True positions x_i = i/n; only defined for grid assignments."""
        if self.mode != "grid":
            return None
        return np.arange(1, self.n + 1) / self.n

    def export(self, path):
        with open(path, "w") as fh:
            fh.write(f"n={self.n} mode={self.mode} seed={self.seed}\n")
            for t in self.type_index:
                fh.write(f"{t}\n")

    @classmethod
    def load(cls, path, space=None):
        with open(path) as fh:
            header = dict(tok.split("=", 1) for tok in fh.readline().split())
            types = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
        return cls(int(header["n"]), types, header["mode"], int(header["seed"]), space)


def sample_types(space, n, mode="iid", seed=0):
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    if mode == "grid":
        if space.kind != "interval":
            raise ModeMismatchError("grid mode requires an interval space")
        x = np.arange(1, n + 1) / n
        return VertexAssignment(n, space.cell_of(x), "grid", seed, space)
    rng = make_rng(seed)
    prob = space.weights / space.total_mass
    if mode == "iid":
        return VertexAssignment(n, _draw_cells(rng, prob, n), "iid", seed, space)
    if mode == "poisson":
        count = int(rng.poisson(n * space.total_mass))
        return VertexAssignment(count, _draw_cells(rng, prob, count), "poisson", seed, space)
    raise ModeMismatchError(f"unknown assignment mode {mode!r}")


def _draw_cells(rng, prob, n):
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cdf = np.cumsum(prob)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, len(prob) - 1)


def balanced_assignment(space, n):
    """Deterministic assignment with floor(n * w_i / mu(S)) vertices per cell,
    remainder spread over the heaviest cells; used for exact block-count checks."""
    share = space.weights / space.total_mass * n
    counts = np.floor(share).astype(np.int64)
    rest = n - counts.sum()
    order = np.argsort(-(share - counts), kind="stable")
    counts[order[:rest]] += 1
    types = np.repeat(np.arange(space.r), counts)
    return VertexAssignment(n, types, "balanced", 0, space)

