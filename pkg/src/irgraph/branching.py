"""The analytic side: the integral operator T, its norm, the survival
probabilities of the multi-type Poisson branching process, and quantities
derived from them.

All computations act on a :class:`~irgraph.kernels.DiscreteKernel`, i.e. on
the finite-type model with cell values K and cell weights w.  On cell
functions the operator is ``(T f)_i = sum_j K_ij w_j f_j``; its L2(mu) norm is
the top eigenvalue of the symmetric matrix ``K_ij sqrt(w_i w_j)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import ConsistencyError, InvalidEigenfunctionError, IterationLimitError
from .kernels import DiscreteKernel, discretize, is_irreducible
from .rng import make_rng

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class NormResult:
    norm: float
    psi: np.ndarray  # eigenfunction on cells, psi >= 0, sum psi^2 w = 1
    hs_norm: float
    iterations: int


def operator_norm(dk, tol=1e-12, max_iter=200_000, patience=10):
    """Power iteration for the norm of T and its non-negative eigenfunction.

    Stops once the Rayleigh quotient has changed by less than ``tol``
    (relative) for ``patience`` consecutive steps.  A period-2 oscillation,
    which a bipartite kernel produces, is detected from the eigen-residual and
    handled by iterating S^2 instead.
    """
    w = dk.w
    hs = math.sqrt(float(np.sum(dk.K ** 2 * np.outer(w, w))))
    live = np.flatnonzero(w > 0)
    S = dk.symmetric_matrix()[np.ix_(live, live)]
    psi = np.zeros(dk.r)
    if live.size == 0 or not np.any(S):
        return NormResult(0.0, psi, hs, 0)

    def run(apply, x):
        x = x / np.linalg.norm(x)
        rq_old, calm = None, 0
        for it in range(1, max_iter + 1):
            y = apply(x)
            rq = float(x @ y)
            ny = np.linalg.norm(y)
            if ny == 0:
                return 0.0, x, it
            if rq_old is not None and abs(rq - rq_old) <= tol * abs(rq):
                calm += 1
                if calm >= patience:
                    return rq, y / ny, it
            else:
                calm = 0
            rq_old = rq
            x = y / ny
        raise IterationLimitError(f"power iteration did not settle in {max_iter} steps", rq)

    x0 = np.sqrt(w[live])
    lam, x, its = run(lambda v: S @ v, x0)
    resid = np.linalg.norm(S @ x - lam * x)
    if resid > 1e-6 * max(abs(lam), 1e-300):
        lam2, x2, its2 = run(lambda v: S @ (S @ v), x0)
        lam = math.sqrt(max(lam2, 0.0))
        x = x2 + (S @ x2) / lam if lam > 0 else x2
        x /= np.linalg.norm(x)
        its += its2
    x = np.abs(x)
    psi[live] = x / np.sqrt(w[live])
    return NormResult(float(lam), psi, hs, its)


@dataclass
class SurvivalProfile:
    rho: np.ndarray
    rho_scalar: float
    zeta: float
    lam: np.ndarray
    norm: float
    hs_norm: float
    dual_norm: float | None
    residual: float
    iterations: int
    converged: bool = True
    history: list = field(default=None, repr=False)

    def to_json(self):
        d = {k: v for k, v in asdict(self).items() if k != "history"}
        d["rho"] = self.rho.tolist()
        d["lam"] = self.lam.tolist()
        return json.dumps(d)


def phi_map(dk, f):
    """Phi(f) = 1 - exp(-T f)."""
    return -np.expm1(-(dk.operator_matrix() @ f))


def solve_survival(dk, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, trace=False):
    """Largest fixed point of rho = 1 - exp(-T rho).

    Iterates downward from f = 1.  Each step is a Newton step for
    f - Phi(f) = 0 when that step stays between 0 and Phi(f) (it then
    dominates the plain step and preserves monotonicity, Phi being concave
    and increasing), and the plain step f <- Phi(f) otherwise.  When
    ||T|| <= 1 the largest fixed point is 0 and is returned directly.
    """
    nr = operator_norm(dk)
    A = dk.operator_matrix()
    r = dk.r
    f = np.ones(r)
    history = [f.copy()] if trace else None
    its = 0
    converged = True
    if nr.norm <= 1.0:
        f = np.zeros(r)
        if trace:
            history.append(f.copy())
    else:
        converged = False
        eye = np.eye(r)
        for its in range(1, max_iter + 1):
            Tf = A @ f
            phi = -np.expm1(-Tf)
            new = phi
            J = np.exp(-Tf)[:, None] * A
            try:
                step = np.linalg.solve(eye - J, phi - f)
                cand = f + step
                slack = 1e-12 + 1e-9 * np.abs(phi)
                if np.all(np.isfinite(cand)) and np.all(cand >= -slack) and np.all(cand <= phi + slack):
                    new = np.clip(cand, 0.0, phi)
            except np.linalg.LinAlgError:
                pass
            new = np.minimum(new, f)
            change = float(np.max(f - new))
            f = new
            if trace:
                history.append(f.copy())
            if change < tol:
                converged = True
                break
    residual = float(np.max(np.abs(phi_map(dk, f) - f))) if r else 0.0
    lam = A @ np.ones(r)
    profile = SurvivalProfile(f, float(f @ dk.w), 0.0, lam, nr.norm, nr.hs_norm, None,
                              residual, its, converged, history)
    profile.zeta = giant_edges(profile, dk, tol)
    if profile.rho_scalar > 0:
        profile.dual_norm = dual(dk, profile)[1]
    return profile


def giant_edges(profile, dk, tol=DEFAULT_TOL):
    """Edges per vertex in the giant component, with a cross-check.

    The double-sum form and the single-sum form in ln(1/(1-rho)) agree at an
    exact fixed point; a larger gap means the profile is not one.
    """
    rho, w = profile.rho, dk.w
    pair = rho[:, None] + rho[None, :] - np.outer(rho, rho)
    double = 0.5 * float(np.sum(dk.K * pair * np.outer(w, w)))
    # ln(1/(1-rho)) equals (T rho)_i at a fixed point; use that only where
    # 1 - rho has rounded away (rho == 1.0 in floating point)
    saturated = rho > 1 - 1e-12
    logs = -np.log1p(-np.where(saturated, 0.0, rho))
    if np.any(saturated):
        logs[saturated] = (dk.operator_matrix() @ rho)[saturated]
    single = float(np.sum((1 - rho / 2) * logs * w))
    scale = max(1.0, dk.total_mass * (1.0 + float(np.max(dk.operator_matrix().sum(axis=1), initial=0))))
    bound = 10 * max(tol, profile.residual) * scale
    if abs(double - single) > bound:
        raise ConsistencyError(f"edge functional mismatch {double} vs {single}")
    return double


@dataclass(frozen=True)
class DegreeLaw:
    lam: np.ndarray
    pmf: np.ndarray
    tail: np.ndarray  # tail[k] = P(Xi >= k)
    mean: float


def degree_law(dk, kmax=40):
    """Mixed Poisson law of the degree of a mu-random vertex."""
    lam = dk.operator_matrix().sum(axis=1)
    p = dk.w / dk.total_mass
    k = np.arange(kmax + 2)
    pmf = stats.poisson.pmf(k[:, None], lam[None, :]) @ p
    tail = stats.poisson.sf(k[:, None] - 1, lam[None, :]) @ p
    return DegreeLaw(lam, pmf[:kmax + 1], tail, float(lam @ p))


def dual(dk, profile):
    """Same kernel on the measure (1 - rho) dmu, with its operator norm."""
    d = DiscreteKernel(dk.K, (1.0 - profile.rho) * dk.w, dk.space, dk.mode, dk.capped,
                       f"dual({dk.source})")
    return d, operator_norm(d).norm


def two_core_fraction(dk, profile):
    """Probability the root has at least two children with surviving lines."""
    lam = dk.operator_matrix() @ profile.rho
    return float(np.sum((-np.expm1(-lam) - lam * np.exp(-lam)) * dk.w))


@dataclass
class MCResult:
    survival: float
    survival_se: float
    at_least: dict  # k -> (estimate, standard error)
    cap_gap: float
    runs: int
    totals: np.ndarray = field(repr=False, default=None)


def mc_branching(dk, runs, pop_cap, seed=0, root=None, ks=(), chunk=20_000):
    """Simulate the branching process until extinction or total size pop_cap.

    A particle in cell i has Poisson(K_ij w_j) children in cell j.  ``root``
    is a cell index, or None for a root drawn from mu / mu(S).  Runs reaching
    ``pop_cap`` count as surviving.  Chunks of runs use derived streams, so
    results do not depend on the chunk schedule.
    """
    if runs < 1 or pop_cap < 1:
        raise ValueError("runs and pop_cap must be >= 1")
    M = dk.operator_matrix()
    r = dk.r
    totals = np.empty(runs, dtype=np.int64)
    for c, start in enumerate(range(0, runs, chunk)):
        size = min(chunk, runs - start)
        rng = make_rng(seed, c)
        if root is None:
            roots = rng.choice(r, size=size, p=dk.w / dk.total_mass)
        else:
            roots = np.full(size, int(root))
        gen = np.zeros((size, r), dtype=np.int64)
        gen[np.arange(size), roots] = 1
        total = np.ones(size, dtype=np.int64)
        active = np.arange(size)
        while active.size:
            kids = rng.poisson(gen[active] @ M)
            gen[active] = kids
            total[active] += kids.sum(axis=1)
            alive = (kids.sum(axis=1) > 0) & (total[active] < pop_cap)
            active = active[alive]
        totals[start:start + size] = total

    def est(k):
        p = float(np.mean(totals >= k))
        return p, math.sqrt(p * (1 - p) / runs)

    surv, se = est(pop_cap)
    half = est(max(1, pop_cap // 2))[0]
    return MCResult(surv, se, {int(k): est(k) for k in ks}, half - surv, runs, totals)


def spectral_path_cycle(dk, kmax=6):
    """alpha_k = <1, T^k 1>/2 and beta_k = Tr(T^k)/(2k)."""
    eig = np.linalg.eigvalsh(dk.symmetric_matrix())
    A = dk.operator_matrix()
    f = np.ones(dk.r)
    alpha, beta = {}, {}
    for k in range(1, kmax + 1):
        f = A @ f
        alpha[k] = 0.5 * float(dk.w @ f)
        if k >= 3:
            beta[k] = float(np.sum(eig ** k)) / (2 * k)
    return alpha, beta


@dataclass(frozen=True)
class SlopeResult:
    c0: float
    slope_fd: float
    slope_formula: float
    gap: float
    raw: tuple


def transition_slope(dk, eps=(1e-2, 1e-3), tol=1e-12):
    """Right derivative of rho(c kappa) at c0 = 1/||T||, two ways.

    The eigenfunction formula 2/c0 * int(psi) int(psi^2) / int(psi^3) against
    one-sided difference quotients rho(c0 + eps)/eps combined by Richardson
    extrapolation.
    """
    irr = is_irreducible(dk)
    if irr.kind == "reducible":
        raise InvalidEigenfunctionError("slope formula needs an irreducible kernel")
    nr = operator_norm(dk)
    live = dk.w > 0
    if np.any(nr.psi[live] <= 0):
        raise InvalidEigenfunctionError("eigenfunction has a non-positive entry")
    c0 = 1.0 / nr.norm
    m1, m2, m3 = (float(np.sum(nr.psi ** k * dk.w)) for k in (1, 2, 3))
    formula = 2.0 / c0 * m1 * m2 / m3
    e1, e2 = eps
    s1 = solve_survival(dk.scaled(c0 + e1), tol=tol).rho_scalar / e1
    s2 = solve_survival(dk.scaled(c0 + e2), tol=tol).rho_scalar / e2
    fd = (e1 * s2 - e2 * s1) / (e1 - e2)
    return SlopeResult(c0, fd, formula, abs(fd - formula) / formula, (s1, s2))


@dataclass(frozen=True)
class CriticalPoint:
    c0: float
    lo: float
    hi: float
    norms: tuple  # (lower, midpoint, upper)
    capped: bool

    @property
    def width(self):
        return (self.hi - self.lo) / self.lo


def critical_point(kernel, space, cap=None):
    """Threshold c0 = 1/||T|| of the family c * kernel on one grid.

    The midpoint discretization gives the estimate; the lower and upper
    discretizations bracket it.  For a kernel unbounded at 0 the upper
    approximation caps the singular cell, by default at the largest finite
    upper cell value.
    """
    if cap is None and not kernel.bounded:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            hi = kernel.scale * kernel.cell_matrix(space, "upper")
        cap = float(np.max(hi[np.isfinite(hi)]))
    norms = []
    capped = False
    for mode in ("lower", "midpoint", "upper"):
        d = discretize(kernel, space, mode, cap=cap if mode == "upper" else None)
        capped |= d.capped
        norms.append(operator_norm(d).norm)
    lo_n, mid_n, hi_n = norms
    return CriticalPoint(1.0 / mid_n, 1.0 / hi_n, 1.0 / lo_n, tuple(norms), capped)
