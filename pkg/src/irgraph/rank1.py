"""Semi-analytic solution for rank-1 kernels c * psi(x) psi(y) on (0, 1],
psi(x) = a x^(-1/p).

With beta(t) = int (1 - exp(-t psi)) psi dx, the number alpha(c) solves
alpha = c beta(alpha) (largest root); then rho(x) = 1 - exp(-alpha psi(x)),
rho = int rho(x) dx and zeta = alpha int(psi) - alpha^2 / (2c).

Integrals use the substitution u = x^(1 - 1/p), which turns psi dx into a
constant multiple of du, followed by composite Gauss-Legendre on dyadic
panels accumulating at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonIntegrableError

DEFAULT_QUAD_POINTS = 4096
_PANEL_NODES = 32


@lru_cache(maxsize=8)
def graded_rule(points=DEFAULT_QUAD_POINTS):
    """Nodes and weights on [2^-P, 1]: Gauss-Legendre on each [2^-(j+1), 2^-j].

    Returns (nodes, weights, floor) with floor = 2^-P; the sliver (0, floor]
    is handled by the caller.
    """
    panels = max(points // _PANEL_NODES, 2)
    x, w = np.polynomial.legendre.leggauss(_PANEL_NODES)
    lo = 2.0 ** -np.arange(1, panels + 1)
    hi = 2.0 * lo
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights, float(lo[-1])


def _h(z):
    """z - 1 + exp(-z), accurate for small z."""
    small = z < 1e-3
    zs = np.where(small, z, 0.0)
    series = zs * zs * (0.5 - zs * (1.0 / 6.0 - zs / 24.0))
    return np.where(small, series, z + np.expm1(-np.where(small, 1.0, z)))


@dataclass(frozen=True)
class Rank1Solution:
    alpha: float
    rho: float
    zeta: float
    c0: float


class Rank1Model:
    def __init__(self, p, a=1.0, quad_points=DEFAULT_QUAD_POINTS):
        if not p > 1:
            raise NonIntegrableError("psi = a x^(-1/p) is not integrable for p <= 1")
        self.p, self.a = float(p), float(a)
        self.nodes, self.weights, self.floor = graded_rule(quad_points)
        # psi at the u-nodes, and the constant Jacobian of psi dx = jac du
        self.psi_u = self.a * self.nodes ** (-1.0 / (self.p - 1.0))
        self.jac = self.a * self.p / (self.p - 1.0)

    def moment(self, k):
        """int psi^k dx."""
        if k * 1.0 >= self.p:
            return math.inf
        return self.a ** k * self.p / (self.p - k)

    @property
    def c0(self):
        m2 = self.moment(2)
        return 0.0 if math.isinf(m2) else 1.0 / m2

    def beta(self, t):
        # on (0, floor] psi is astronomically large and the integrand is 1
        body = np.sum(self.weights * -np.expm1(-t * self.psi_u))
        return float(self.jac * (body + self.floor))

    def _beta_deficit(self, t):
        """t int psi^2 - beta(t); only defined for p > 2."""
        body = np.sum(self.weights * _h(t * self.psi_u))
        k = 1.0 / (self.p - 1.0)
        u0 = self.floor
        tail = t * self.a * u0 ** (1 - k) / (1 - k) - u0  # h(z) = z - 1 there
        return float(self.jac * (body + tail))

    def alpha(self, c):
        """Largest root of t = c beta(t); 0 at or below the threshold."""
        if c <= self.c0:
            return 0.0
        t_hi = c * self.moment(1) * (1 + 1e-12)
        if self.p > 2:
            target = self.moment(2) - 1.0 / c
            g = lambda t: self._beta_deficit(t) / t - target  # increasing
        else:
            g = lambda t: 1.0 / c - self.beta(t) / t  # increasing
        lo, hi = math.log(1e-300), math.log(t_hi)
        if g(math.exp(lo)) >= 0:
            return 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(math.exp(mid)) < 0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        return math.exp(0.5 * (lo + hi))

    def rho(self, alpha):
        """int (1 - exp(-alpha psi(x))) dx over (0, 1]."""
        x, w = self.nodes, self.weights
        body = np.sum(w * -np.expm1(-alpha * self.a * x ** (-1.0 / self.p)))
        return float(body + self.floor)

    def solve(self, c):
        al = self.alpha(c)
        zeta = al * self.moment(1) - al * al / (2.0 * c) if al > 0 else 0.0
        return Rank1Solution(al, self.rho(al) if al > 0 else 0.0, zeta, self.c0)


def rank1_solve(p, a, c, quad_points=DEFAULT_QUAD_POINTS):
    """(alpha(c), rho(c kappa), zeta(c kappa)) for kappa = psi(x) psi(y)."""
    if not c > 0:
        raise ValueError("c must be positive")
    return Rank1Model(p, a, quad_points).solve(c)
