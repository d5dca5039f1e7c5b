"""Experiment orchestration: theory-vs-simulation reports, transition sweeps,
random edge deletions, the Turova threshold and diameter scaling."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .branching import (DEFAULT_MAX_ITER, DEFAULT_TOL, degree_law, dual, operator_norm,
                        solve_survival, two_core_fraction)
from .errors import InsufficientDataError, SizeCapError
from .graphgen import generate
from .graphstats import (DEFAULT_DIAMETER_CAP, component_summary, degree_histogram,
                         distance_sample, exact_diameter, two_core)
from .kernels import Constant, FiniteMatrix, discretize, mean_edge_density, parse_kernel, turova
from .rank1 import Rank1Model
from .rng import make_rng
from .spaces import (balanced_assignment, make_finite_space, make_interval_space,
                     sample_types)

METRICS = ("c1_frac", "c2_frac", "edges_frac", "giant_edges_frac", "degree_tv", "type_mix",
           "two_core_frac", "median_distance", "diameter")

DEFAULT_CONFIG = {
    "kernel": "constant:c=2",
    "space": {"kind": "finite", "weights": [1.0]},
    "generate": {"n": [10_000], "variant": "min", "tier": "block", "seeds": [0, 1, 2],
                 "assignment": None},
    "solver": {"tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER, "quad_points": 4096},
    "metrics": ["c1_frac", "c2_frac", "edges_frac", "giant_edges_frac", "degree_tv"],
    "bands": {"c1_frac": 0.02, "c2_frac": 0.02, "edges_frac": 0.02, "giant_edges_frac": 0.03,
              "degree_tv": 0.03, "type_mix": 0.02, "two_core_frac": 0.02,
              "median_distance": {"rel": 0.15}, "diameter": {"rel": 0.3}},
    "distance_pairs": 2000,
    "diameter_cap": DEFAULT_DIAMETER_CAP,
}


def merge_config(user=None):
    """DEFAULT_CONFIG updated one level deep with ``user``.

    A user "bands" table replaces the default one, so a report checks
    exactly the bands its config lists.
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    for k, v in (user or {}).items():
        if isinstance(v, dict) and isinstance(cfg.get(k), dict) and k != "bands":
            cfg[k].update(v)
        else:
            cfg[k] = v
    return cfg


def load_config(path):
    with open(path) as fh:
        return merge_config(json.load(fh))


def build_space(spec, kernel=None):
    spec = dict(spec or {})
    kind = spec.get("kind", "finite")
    if kind == "finite":
        weights = spec.get("weights")
        if weights is None:
            r = kernel.K.shape[0] if isinstance(kernel, FiniteMatrix) else 1
            weights = [1.0 / r] * r
        return make_finite_space(weights, spec.get("labels"))
    if kind == "interval":
        return make_interval_space(int(spec.get("m", 1000)), spec.get("scale", "uniform"),
                                   float(spec.get("depth", 30.0)))
    raise ValueError(f"unknown space kind {kind!r}")


def build_kernel(cfg):
    """(kernel, space, midpoint DiscreteKernel) from a config dict."""
    kernel = cfg["kernel"]
    if isinstance(kernel, str):
        kernel = parse_kernel(kernel)
    space = build_space(cfg.get("space"), kernel)
    return kernel, space, discretize(kernel, space, "midpoint")


# ---------------------------------------------------------------- reports

@dataclass
class MetricRow:
    name: str
    n: int
    simulated: float | None
    stderr: float | None
    theoretical: float | None
    delta: float | None
    band: object = None
    passed: bool | None = None
    skipped: str | None = None
    samples: list = field(default_factory=list)  # (seed, simulated)


@dataclass
class ExperimentReport:
    kernel: str
    n: list
    seeds: list
    rows: list
    provenance: dict
    timestamp: float = 0.0

    @property
    def all_pass(self):
        return all(r.passed is not False for r in self.rows)

    def to_dict(self, with_timestamp=True):
        d = {"kernel": self.kernel, "n": self.n, "seeds": self.seeds,
             "rows": [asdict(r) for r in self.rows], "provenance": self.provenance}
        if with_timestamp:
            d["timestamp"] = self.timestamp
        return d

    def digest(self):
        text = json.dumps(self.to_dict(with_timestamp=False), sort_keys=True, default=_plain)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_json(self):
        d = self.to_dict()
        d["hash"] = self.digest()
        return json.dumps(d, indent=2, sort_keys=True, default=_plain)

    def row(self, name, n=None):
        for r in self.rows:
            if r.name == name and (n is None or r.n == n):
                return r
        raise KeyError(name)

    def write(self, outdir, fmt="json"):
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            fh.write(self.to_json())
        if fmt == "csv":
            by_metric = {}
            for r in self.rows:
                by_metric.setdefault(r.name, []).append(r)
            for name, rows in by_metric.items():
                fname = name.replace("[", "_").replace("]", "") + ".csv"
                with open(os.path.join(outdir, fname), "w", newline="") as fh:
                    out = csv.writer(fh)
                    out.writerow(["n", "seed", "simulated", "theoretical", "delta"])
                    for r in rows:
                        for seed, sim in r.samples:
                            d = None if sim is None or r.theoretical is None else sim - r.theoretical
                            out.writerow([r.n, seed, sim, r.theoretical, d])


def _plain(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def check_band(delta, theoretical, band):
    """None when no band is configured; bands are absolute or {"rel": x}."""
    if band is None or delta is None:
        return None
    if isinstance(band, dict):
        if "rel" in band:
            return abs(delta) <= band["rel"] * abs(theoretical)
        return abs(delta) <= band["abs"]
    return abs(delta) <= float(band)


def theory_diameter_rate(norm, dual_norm):
    """Limit of diam / log n for a finite-type kernel; None at criticality."""
    if abs(norm - 1.0) < 1e-3 or norm <= 0:
        return None
    if norm < 1:
        return 1.0 / math.log(1.0 / norm)
    return 2.0 / math.log(1.0 / dual_norm) + 1.0 / math.log(norm)


def _assignment(space, n, mode, seed):
    if mode is None:
        mode = "grid" if space.kind == "interval" else "balanced"
    if mode == "balanced":
        return balanced_assignment(space, n)
    return sample_types(space, n, mode, seed)


def compare(cfg):
    """Theory-vs-simulation report for the experiment described by ``cfg``.

    The graph uses the midpoint discretization of the kernel, and the theory
    is computed for the same finite-type kernel on the normalized measure.
    """
    cfg = merge_config(cfg)
    kernel, space, dk = build_kernel(cfg)
    gen, solver = cfg["generate"], cfg["solver"]
    ns = gen["n"] if isinstance(gen["n"], (list, tuple)) else [gen["n"]]
    seeds = list(gen["seeds"])
    metrics = list(cfg["metrics"])
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics {sorted(unknown)}")
    bands = cfg.get("bands", {})

    mass = dk.total_mass
    theo_dk = dk.with_weights(dk.w / mass) if mass > 0 else dk
    prof = solve_survival(theo_dk, tol=solver["tol"], max_iter=int(solver["max_iter"]))
    law = degree_law(theo_dk, kmax=200)
    calls = ["operator_norm", "solve_survival", "giant_edges", "degree_law"]
    theory = {"c1_frac": prof.rho_scalar, "c2_frac": 0.0,
              "edges_frac": mean_edge_density(theo_dk), "giant_edges_frac": prof.zeta,
              "degree_tv": 0.0}
    if "two_core_frac" in metrics:
        theory["two_core_frac"] = two_core_fraction(theo_dk, prof)
        calls.append("two_core_fraction")
    dual_norm = prof.dual_norm if prof.dual_norm is not None else prof.norm
    if "diameter" in metrics:
        calls.append("dual")
    type_theory = prof.rho * theo_dk.w

    sims = {}  # (metric, n) -> list of (seed, value or None, skip reason)
    for n in ns:
        for seed in seeds:
            a = _assignment(space, n, gen.get("assignment"), make_rng(seed, 7).integers(2**63))
            g = generate(dk, a, variant=gen["variant"], tier=gen["tier"], seed=seed)
            vals = _observe(g, metrics, law, cfg, seed)
            for name, v in vals.items():
                sims.setdefault((name, n), []).append((seed, v))

    rows = []
    for n in ns:
        for name in metrics:
            if name == "type_mix":
                entries = sims[(name, n)]
                for i in range(dk.r):
                    samples = [(s, None if isinstance(v, str) else v[i]) for s, v in entries]
                    rows.append(_row(f"type_mix[{i}]", n, samples, float(type_theory[i]),
                                     bands.get("type_mix")))
                continue
            if name == "median_distance":
                th = None if prof.norm <= 1 else math.log(n) / math.log(prof.norm)
            elif name == "diameter":
                rate = theory_diameter_rate(prof.norm, dual_norm)
                th = None if rate is None else rate * math.log(n)
            else:
                th = theory[name]
            rows.append(_row(name, n, sims[(name, n)], th, bands.get(name)))

    provenance = {
        "space": json.loads(space.to_json()), "grid_mode": dk.mode, "tier": gen["tier"],
        "variant": gen["variant"], "assignment": gen.get("assignment"),
        "solver": {"tol": solver["tol"], "max_iter": solver["max_iter"]},
        "theory_calls": calls, "norm": prof.norm, "dual_norm": prof.dual_norm,
        "solver_converged": prof.converged, "version": __version__,
    }
    return ExperimentReport(dk.source, ns, seeds, rows, provenance, time.time())


def _row(name, n, samples, theoretical, band):
    reasons = [v for _, v in samples if isinstance(v, str)]
    if reasons:
        return MetricRow(name, n, None, None, theoretical, None, band, None, reasons[0],
                         [(s, None) for s, _ in samples])
    vals = np.array([v for _, v in samples], dtype=float)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) >= 2 else None
    if theoretical is None:
        return MetricRow(name, n, mean, se, None, None, band, None,
                         "theoretical value undefined", [(s, float(v)) for s, v in samples])
    delta = mean - theoretical
    return MetricRow(name, n, mean, se, theoretical, delta, band,
                     check_band(delta, theoretical, band), None,
                     [(s, float(v)) for s, v in samples])


def _observe(g, metrics, law, cfg, seed):
    n = g.n
    out = {}
    cs = component_summary(g)
    if "c1_frac" in metrics:
        out["c1_frac"] = cs.c1 / n
    if "c2_frac" in metrics:
        out["c2_frac"] = cs.c2 / n
    if "edges_frac" in metrics:
        out["edges_frac"] = g.num_edges / n
    if "giant_edges_frac" in metrics:
        out["giant_edges_frac"] = cs.edges_in_c1 / n
    if "degree_tv" in metrics:
        hist = degree_histogram(g)
        kmax = max(max(hist), len(law.pmf) - 1)
        emp = np.zeros(kmax + 1)
        for k, c in hist.items():
            emp[k] = c / n
        th = np.zeros(kmax + 1)
        th[:len(law.pmf)] = law.pmf
        out["degree_tv"] = 0.5 * float(np.abs(emp - th).sum())
    if "type_mix" in metrics:
        out["type_mix"] = np.asarray(cs.type_counts_in_c1, dtype=float) / n
    if "two_core_frac" in metrics:
        out["two_core_frac"] = two_core(g).n / n
    if "median_distance" in metrics:
        d = distance_sample(g, int(cfg["distance_pairs"]), seed, labels=cs.labels)
        d = d[np.isfinite(d)]
        out["median_distance"] = float(np.median(d)) if d.size else "no finite distances"
    if "diameter" in metrics:
        try:
            out["diameter"] = float(exact_diameter(g, int(cfg["diameter_cap"]), cs.labels).value)
        except SizeCapError as exc:
            out["diameter"] = f"skipped: {exc}"
    return out


# ---------------------------------------------------------------- sweeps

class Rank1Family:
    """c * psi(x) psi(y) with psi = a x^(-1/p), solved semi-analytically."""

    def __init__(self, p, a=1.0, quad_points=4096):
        self.model = Rank1Model(p, a, quad_points)
        self.c0 = self.model.c0
        self.name = f"rank1:p={p:g},a={a:g}"

    def solve(self, c):
        s = self.model.solve(c)
        return s.rho, s.zeta


class GridFamily:
    """c * dk for a discretized kernel, with c0 = 1 / ||T||."""

    def __init__(self, dk, tol=1e-13, max_iter=DEFAULT_MAX_ITER):
        self.dk = dk
        self.c0 = 1.0 / operator_norm(dk).norm
        self.tol, self.max_iter = tol, max_iter
        self.name = dk.source

    def solve(self, c):
        p = solve_survival(self.dk.scaled(c), tol=self.tol, max_iter=self.max_iter)
        return p.rho_scalar, p.zeta


@dataclass
class SweepResult:
    family: str
    c0: float
    eps: list
    rho: list
    zeta: list
    exponent: float
    intercept: float
    local_slopes: list
    used: list


def sweep_transition(family, eps, window=None, tol=DEFAULT_TOL, h=0.1):
    """rho(c0 + eps) and zeta across ``eps``, with a power-law fit.

    The exponent is the least-squares slope of log rho against log eps over
    the ``window`` (all points by default), ignoring points with
    rho < 100 tol.  ``local_slopes[i]`` is the central log-log difference
    at eps[i] with multiplicative step exp(h).
    """
    eps = [float(e) for e in eps]
    rho, zeta, local = [], [], []
    for e in eps:
        r, z = family.solve(family.c0 + e)
        rho.append(r)
        zeta.append(z)
        r_lo = family.solve(family.c0 + e * math.exp(-h))[0]
        r_hi = family.solve(family.c0 + e * math.exp(h))[0]
        if r_lo > 0 and r_hi > 0:
            local.append((math.log(r_hi) - math.log(r_lo)) / (2 * h))
        else:
            local.append(math.nan)
    lo, hi = window if window is not None else (min(eps), max(eps))
    used = [i for i, e in enumerate(eps) if lo <= e <= hi and rho[i] >= 100 * tol]
    if len(used) < 3:
        raise InsufficientDataError(f"only {len(used)} points above the solver tolerance")
    x = np.log([eps[i] for i in used])
    y = np.log([rho[i] for i in used])
    slope, intercept = np.polyfit(x, y, 1)
    return SweepResult(family.name, family.c0, eps, rho, zeta, float(slope), float(intercept),
                       local, used)


# ---------------------------------------------------------------- deletions

@dataclass
class DeletionRow:
    delta: float
    seed: int
    deleted: int
    c1_before: int
    c1_after: int
    change: float  # |C1 after - C1 before| / n


def deletion_smoke(dk, n, seeds, deltas, variant="min", tier="block"):
    """Remove floor(delta n) uniformly random edges and record the change in C1.

    For each seed the deletions for different deltas are nested (prefixes of
    one random edge order), so the change is comparable across deltas.
    """
    space = dk.space if dk.space is not None else make_finite_space(dk.w)
    rows = []
    for seed in seeds:
        a = _assignment(space, n, None, seed)
        g = generate(dk, a, variant=variant, tier=tier, seed=seed)
        c1 = component_summary(g).c1
        order = make_rng(seed, 11).permutation(g.num_edges)
        for d in deltas:
            k = min(int(math.floor(d * n)), g.num_edges)
            mask = np.zeros(g.num_edges, dtype=bool)
            mask[order[:k]] = True
            after = component_summary(g.without_edges(mask)).c1 if k else c1
            rows.append(DeletionRow(float(d), int(seed), k, c1, after, abs(after - c1) / n))
    return rows


def deletion_means(rows):
    out = {}
    for r in rows:
        out.setdefault(r.delta, []).append(r.change)
    return {d: float(np.mean(v)) for d, v in sorted(out.items())}


# ---------------------------------------------------------------- Turova

def bessel_j(nu, x, with_largest_term=False):
    """J_nu(x), nu > -1, by its power series summed until the terms are
    negligible.

    With ``with_largest_term`` also returns the largest term in absolute
    value; rounding error in the sum is a small multiple of it times the
    machine epsilon.
    """
    half = 0.5 * x
    total, biggest = 0.0, 0.0
    m = 0
    while True:
        log_mag = (nu + 2 * m) * math.log(half) - math.lgamma(m + 1) - math.lgamma(nu + m + 1)
        term = (-1) ** m * math.exp(log_mag)
        total += term
        biggest = max(biggest, abs(term))
        if m > half and abs(term) < 1e-17 * max(abs(total), 1e-300):
            break
        m += 1
        if m > 10_000:
            raise ArithmeticError("Bessel series did not converge")
    if with_largest_term:
        return total, biggest
    return total


def bessel_first_zero(nu, step=0.05, tol=1e-14):
    """First positive zero of J_nu (nu > -1): scan for a sign change, then
    bisect."""
    if not nu > -1:
        raise ValueError("nu must exceed -1")
    # the zero is near 2 sqrt(nu + 1) as nu -> -1, so start well below that
    x = min(0.1, 0.5 * math.sqrt(nu + 1.0))
    step = min(step, x)
    fx = bessel_j(nu, x)
    while True:
        y = x + step
        fy = bessel_j(nu, y)
        if (fy < 0) != (fx < 0):
            break
        x, fx = y, fy
        if x > 4 * nu + 50:
            raise ArithmeticError("no sign change found")
    lo, hi = x, y
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if (bessel_j(nu, mid) < 0) == (fx < 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class TurovaResult:
    delta: float
    lam_formula: float | None
    lam_numeric: float
    bessel_zero: float | None
    zero_error: float | None  # rounding-error bound on the Bessel zero
    note: str = ""


def turova_space(cells_per_unit=20, depth=60.0):
    return make_interval_space(int(cells_per_unit * depth), "log", depth)


def turova_critical(delta, space=None, min_series_delta=0.05):
    """Threshold lambda of the Turova kernel, from the Bessel zero and from
    the operator norm of the discretized kernel.

    The kernel is linear in lambda, so the norm crosses 1 at 1 / norm(lambda=1);
    a final evaluation at that lambda confirms the crossing.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    space = turova_space() if space is None else space
    dk = discretize(turova(1.0, delta), space, "midpoint")
    lam_num = 1.0 / operator_norm(dk).norm
    check = operator_norm(dk.scaled(lam_num)).norm
    note = f"norm at lambda_numeric = {check:.12f}"
    if delta < min_series_delta:
        note += f"; series skipped, limit check |lambda - 1/8| = {abs(lam_num - 0.125):.4g}"
        return TurovaResult(delta, None, lam_num, None, None, note)
    nu = 1.0 / delta - 1.0
    z = bessel_first_zero(nu)
    _, biggest = bessel_j(nu, z, with_largest_term=True)
    h = 1e-6 * z
    slope = (bessel_j(nu, z + h) - bessel_j(nu, z - h)) / (2 * h)
    err = 64 * np.finfo(float).eps * biggest / abs(slope)
    return TurovaResult(delta, delta * delta * z * z / 8.0, lam_num, z, float(err), note)


# ---------------------------------------------------------------- diameter

@dataclass
class DiameterRow:
    n: int
    mean_diameter: float
    diameters: list
    ratio: float  # mean diameter / log n
    prediction: float | None
    rel_error: float | None


def diameter_study(dk, ns, seeds, cap=DEFAULT_DIAMETER_CAP, variant="min"):
    """Mean exact diameter over seeds for each n, against the limit rate."""
    if max(ns) > cap:
        raise SizeCapError(f"diameter study limited to n <= {cap}")
    prof = solve_survival(dk)
    dn = prof.dual_norm if prof.dual_norm is not None else prof.norm
    rate = theory_diameter_rate(prof.norm, dn)
    space = dk.space if dk.space is not None else make_finite_space(dk.w)
    rows = []
    for n in ns:
        diams = []
        for seed in seeds:
            g = generate(dk, _assignment(space, n, None, seed), variant=variant, seed=seed)
            diams.append(exact_diameter(g, cap).value)
        mean = float(np.mean(diams))
        ratio = mean / math.log(n)
        err = None if rate is None else abs(ratio - rate) / rate
        rows.append(DiameterRow(int(n), mean, diams, ratio, rate, err))
    return rows


def constant_kernel(c):
    """Constant kernel on the one-point space, discretized."""
    return discretize(Constant(c), make_finite_space([1.0]))
