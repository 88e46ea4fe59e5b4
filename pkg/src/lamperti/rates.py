"""Smooth rate scaffolding shared by the tail formulas.

The whole artifact fixes one smooth decay rate,

    r(x) = (2*mu/b) * x / (1 + x**2),

whose integral R(x) = (mu/b)*log(1+x**2) has the closed-form exponential
exp(R(x)) = (1+x**2)**(mu/b). The slowly varying factor
x**(2*mu/b) / exp(R(x)) then tends to 1, and

    U(x) = integral of exp(R) over [x0, x]   (0 for x <= x0)

grows like x*exp(R(x))/rho with rho = 2*mu/b + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RateFunctions", "rate"]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True, eq=False)
class RateFunctions:
    """Closed-form rate functions for one (mu, b, x0) triple."""

    mu: float
    b: float
    x0: int

    def __post_init__(self):
        if self.mu <= 0.0 or self.b <= 0.0:
            raise ValueError("mu and b must be positive")
        if self.x0 < 0:
            raise ValueError("x0 must be nonnegative")

    @property
    def rho(self) -> float:
        return 2.0 * self.mu / self.b + 1.0

    def r(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (2.0 * self.mu / self.b) * x / (1.0 + x * x)

    def R(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (self.mu / self.b) * np.log1p(x * x)

    def exp_R(self, x):
        x = np.asarray(x, dtype=np.float64)
        return (1.0 + x * x) ** (self.mu / self.b)

    def ell(self, x):
        """Slowly varying factor x**(rho-1) / exp(R(x)); tends to 1.

        The tail law never evaluates it at the origin, so ell(0) is free;
        it is pinned to 1 to match the limit convention.
        """
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(divide="ignore"):
            out = (x * x / (1.0 + x * x)) ** (self.mu / self.b)
        return np.where(x == 0.0, 1.0, out)

    def U(self, x) -> float:
        """Integral of exp(R) from x0 to x (scalar); 0 at or below x0."""
        x = float(x)
        if x <= self.x0:
            return 0.0
        return float(self._segments(np.array([float(self.x0), x])).sum())

    def U_grid(self, xs: np.ndarray) -> np.ndarray:
        """U evaluated on an increasing grid that starts at or above x0."""
        xs = np.asarray(xs, dtype=np.float64)
        if np.any(np.diff(xs) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        vals = np.zeros(len(xs))
        inside = xs > self.x0
        if not inside.any():
            return vals
        first = int(np.argmax(inside))
        pts = np.concatenate(([float(self.x0)], xs[first:]))
        vals[first:] = np.cumsum(self._segments(pts))
        return vals

    def segment(self, a: float, b: float) -> float:
        """Integral of exp(R) over [a, b] (a <= b), by Gauss-Legendre."""
        if b < a:
            raise ValueError("need a <= b")
        if b == a:
            return 0.0
        return float(self._segments(np.array([float(a), float(b)]))[0])

    def _segments(self, pts: np.ndarray) -> np.ndarray:
        """Gauss-Legendre integrals of exp(R) over consecutive [pts_i, pts_i+1]."""
        lo = pts[:-1]
        half = 0.5 * (pts[1:] - lo)
        mid = lo + half
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        return half * (self.exp_R(nodes) @ _GL_WEIGHTS)


def rate(chain_or_profile, x0: int | None = None) -> RateFunctions:
    """RateFunctions for a chain (or bare profile), defaulting x0 to its boundary."""
    profile = getattr(chain_or_profile, "profile", chain_or_profile)
    if profile.drift_sign != -1:
        raise ValueError("rate scaffolding applies to the negative-drift regime")
    if x0 is None:
        x0 = getattr(chain_or_profile, "boundary_x0", 0)
    return RateFunctions(mu=profile.mu, b=profile.b, x0=int(x0))
