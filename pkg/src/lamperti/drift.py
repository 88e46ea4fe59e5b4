"""Lyapunov drift evaluation, recurrence classification and escape bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chains import moments

__all__ = ["drift", "DriftReport", "classify", "log_drift_check",
           "PassageBounds", "passage_bounds"]


def drift(chain, test_fn, grid) -> np.ndarray:
    """E[test_fn(x + jump)] - test_fn(x) for each grid state, from exact laws."""
    grid = np.asarray(grid, dtype=np.int64)
    out = np.empty(len(grid))
    for i, x in enumerate(grid):
        law = chain.law(int(x))
        vals = test_fn(np.asarray(x + law.offsets, dtype=np.float64))
        here = float(test_fn(np.asarray([float(x)]))[0])
        out[i] = math.fsum(p * float(v) for p, v in zip(law.probs, vals)) - here
    return out


@dataclass(frozen=True, eq=False)
class DriftReport:
    """Quadratic-test drift on a grid plus the classification verdict.

    ``drift`` holds 2*x*m1(x) + m2(x); ``normalized`` divides it by
    exp(R(x))/x**2 when a rate scaffold applies (NaN otherwise).
    ``epsilon`` is the infimum of |drift| over the second half of the grid,
    the margin backing the verdict.
    """

    grid: np.ndarray
    drift: np.ndarray
    normalized: np.ndarray
    classification: str
    epsilon: float
    detail: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        from .io_utils import write_csv

        write_csv(path, "x,drift,normalized", [self.grid, self.drift, self.normalized])

    def summary(self) -> dict:
        return {"classification": self.classification, "epsilon": self.epsilon,
                **self.detail}


def classify(chain, grid) -> DriftReport:
    """Classify recurrence behaviour from the quadratic drift on a grid.

    Negative tail drift certifies positive recurrence. Positive tail drift
    together with the mean/variance ratio staying above 1 suggests
    transience, but only when large down-jumps are provably negligible;
    the origin-jump family fails that comparison and falls through to the
    logarithmic test, which certifies plain recurrence.
    """
    grid = np.asarray(grid, dtype=np.int64)
    if len(grid) < 8:
        raise ValueError("grid too short to classify")
    mom = moments(chain, grid)
    d = 2.0 * grid * mom.m1 + mom.m2

    normalized = np.full(len(grid), np.nan)
    if chain.profile.drift_sign == -1 and chain.profile.mu > 0.0:
        from .rates import rate

        rf = rate(chain)
        normalized = d * grid.astype(float) ** 2 / rf.exp_R(grid)

    tail = slice(len(grid) // 2, None)
    eps = float(np.min(np.abs(d[tail])))
    detail: dict = {"grid_lo": int(grid[0]), "grid_hi": int(grid[-1])}

    if np.all(d[tail] <= -eps) and eps > 0.0:
        label = "positive_recurrent"
    elif np.all(d[tail] >= eps) and eps > 0.0:
        ratio = 2.0 * grid[tail] * mom.m1[tail] / mom.m2[tail]
        eps_ratio = float(np.min(ratio)) - 1.0
        detail["ratio_margin"] = eps_ratio
        if eps_ratio > 0.0:
            gamma = 0.5 * (1.0 - 1.0 / math.sqrt(1.0 + eps_ratio))
            ok, witness, extrapolated = _large_down_jumps_negligible(chain, grid[tail], gamma)
            detail["gamma"] = gamma
            detail["down_jump_check"] = ok
            detail["down_jump_extrapolated"] = extrapolated
            if witness is not None:
                detail["down_jump_witness"] = witness
            if ok:
                label = "transient"
            else:
                label, logdetail = _fallback_log_test(chain, grid[tail])
                detail.update(logdetail)
        else:
            label = "inconclusive"
    else:
        label = "inconclusive"

    return DriftReport(grid=grid, drift=d, normalized=normalized,
                       classification=label, epsilon=eps, detail=detail)


def _large_down_jumps_negligible(chain, grid, gamma):
    """Compare P(jump <= -gamma*x) against m2(x)*p(x)/x with p(x)=(1+x)**-1.5.

    Returns (ok, witness_state, extrapolated). For uniformly bounded jumps
    the probability is exactly zero above a finite state and the check is
    conclusive; otherwise it is a finite-grid trend and flagged as such.
    """
    ratios = []
    for x in grid:
        law = chain.law(int(x))
        num = law.mass_at_or_below(-gamma * x)
        den = law.moment(2) * (1.0 + x) ** -1.5 / x
        ratios.append(num / den)
    ratios = np.asarray(ratios)
    if chain.bounded_jumps:
        if ratios[-len(ratios) // 2:].max() == 0.0:
            return True, None, False
        witness = int(grid[int(np.argmax(ratios > 0.0))])
        return False, witness, False
    # unbounded support: require a decisively decreasing, small tail ratio
    half = len(ratios) // 2
    shrinking = ratios[-1] < 0.5 * max(ratios[half], 1e-300)
    small = ratios[-1] < 0.05
    if shrinking and small:
        return True, None, True
    return False, int(grid[int(np.argmax(ratios))]), True


def _fallback_log_test(chain, grid):
    """Drift of log(1+x) on the tail grid; negative drift certifies recurrence."""
    ld = drift(chain, lambda v: np.log1p(v), grid)
    if np.all(ld < 0.0):
        return "recurrent", {"log_drift_max": float(ld.max()),
                             "certificate": "log_drift"}
    return "inconclusive", {"log_drift_max": float(ld.max())}


def log_drift_check(chain, grid) -> np.ndarray:
    """Exact drift of log(1+x) on a grid (the reset-chain counterexample test)."""
    return drift(chain, lambda v: np.log1p(v), np.asarray(grid, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class PassageBounds:
    """Closed-form escape bounds derived from the quadratic drift certificate.

    ``eps`` is the infimum of 2*x*m1+m2 over states above x0 on the grid
    (the uniform escape rate), ``eps0`` caps its defect on [0, x0], and
    ``c_sup`` maps x to sup of the drift over states up to x. ``jump_sup``
    is the largest upward jump seen on the grid and pays for the overshoot
    at the crossing step. ``delta`` is the largest exponent from
    {1, 0.5, 0.25} compatible with the ratio margin, with ``gamma`` at half
    the admissible down-jump slope.
    """

    x0: int
    eps: float
    eps0: float
    grid: np.ndarray
    drift_vals: np.ndarray
    delta: float | None
    gamma: float | None
    ratio_margin: float
    valid_from: int
    jump_sup: int = 1

    def mean_bound(self, x: float, y: float, visits_below_x0: float = 0.0) -> float:
        """Upper bound for the mean first time the chain exceeds x, from y.

        The crossing step lands in (x, x + jump_sup], so the squared value at
        the stopping time is at most (x + jump_sup)**2; conditioning on the
        pre-crossing state alone would bias this term low, because the last
        jump is upward by construction.
        """
        top = (x + self.jump_sup) ** 2
        val = (top - y * y + (self.eps + self.eps0) * visits_below_x0) / self.eps
        return max(val, 1.0)

    def c_sup(self, x: float) -> float:
        mask = self.grid <= x
        if not mask.any():
            raise ValueError("x below the evaluated grid")
        return float(self.drift_vals[mask].max())

    def return_bound(self, x: float, y: float) -> float:
        """Upper bound (x/y)**delta for ever falling back to [0, x] from y > x."""
        if self.delta is None:
            raise ValueError("no admissible exponent; ratio margin too small")
        if not 0 < x < y:
            raise ValueError("need 0 < x < y")
        return (x / y) ** self.delta


def passage_bounds(chain, grid, x0: int | None = None) -> PassageBounds:
    """Evaluate the escape-bound certificate for a transient-regime chain."""
    grid = np.asarray(grid, dtype=np.int64)
    if x0 is None:
        x0 = chain.boundary_x0
    mom = moments(chain, grid)
    d = 2.0 * grid * mom.m1 + mom.m2

    above = grid > x0
    if not above.any():
        raise ValueError("grid has no states above x0")
    eps = float(d[above].min())
    if eps <= 0.0:
        raise ValueError(f"no uniform escape rate: drift dips to {eps:.4g} above x0")
    below = ~above
    eps0 = max(0.0, -float(d[below].min())) if below.any() else 0.0

    tail = slice(len(grid) // 2, None)
    ratio_margin = float(np.min(2.0 * grid[tail] * mom.m1[tail]
                                / mom.m2[tail])) - 1.0
    delta = None
    gamma = None
    max_down = 0
    if ratio_margin > 0.0:
        gamma = 0.5 * (1.0 - 1.0 / math.sqrt(1.0 + ratio_margin))
        for cand in (1.0, 0.5, 0.25):
            if (1.0 + cand) / (1.0 - gamma) ** (2.0 + cand) < 1.0 + ratio_margin:
                delta = cand
                break
        for x in grid[tail][:4]:
            max_down = max(max_down, int(-chain.law(int(x)).offsets.min()))
    valid_from = int(math.ceil(max_down / gamma)) if gamma else 0
    jump_sup = max(int(chain.law(int(x)).offsets.max()) for x in grid)

    return PassageBounds(x0=int(x0), eps=eps, eps0=eps0, grid=grid, drift_vals=d,
                         delta=delta, gamma=gamma, ratio_margin=ratio_margin,
                         valid_from=valid_from, jump_sup=jump_sup)
