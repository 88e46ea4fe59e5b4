"""Numeric diagnostics for the standing assumptions behind the tail formulas.

Each check evaluates one assumption on a finite state grid and reports
pass/fail with a witness state. Checks that extrapolate a trend from the
grid (rather than verifying something exactly) say so via the
``extrapolated`` flag.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .chains import moments
from .drift import _large_down_jumps_negligible

__all__ = ["AssumptionCheck", "validate_assumptions"]


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    value: float
    witness: int | None = None
    note: str = ""
    extrapolated: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "witness": self.witness, "note": self.note,
                "extrapolated": self.extrapolated}


def _bounded_along_grid(values: np.ndarray, grid: np.ndarray):
    """(ok, witness, sup): flags clear growth of `values` along the grid."""
    half = len(values) // 2
    head = float(np.max(values[:half]))
    tail = float(np.max(values[half:]))
    sup = max(head, tail)
    if tail <= 2.0 * head + 1e-12:
        return True, None, sup
    return False, int(grid[half + int(np.argmax(values[half:]))]), sup


def validate_assumptions(chain, grid, reach_to: int | None = None) -> list[AssumptionCheck]:
    """Evaluate the standing assumptions for ``chain`` on ``grid``.

    Always checks the (3+delta) moment bound. Negative-drift chains
    additionally get the rate-match and large-jump-moment checks plus the
    escape-path search near the boundary block; positive-drift chains get
    the down-jump comparison that guards the transience verdict.
    """
    grid = np.asarray(grid, dtype=np.int64)
    if len(grid) < 8:
        raise ValueError("grid too short for the diagnostics")
    prof = chain.profile
    mom = moments(chain, grid)
    checks: list[AssumptionCheck] = []

    ok, witness, sup = _bounded_along_grid(mom.abs3pd, grid)
    checks.append(AssumptionCheck(
        name="third_moment_margin", passed=ok, value=sup, witness=witness,
        note=f"sup E|jump|^(3+{prof.delta:g}) on the grid",
        extrapolated=not chain.bounded_jumps))

    if prof.drift_sign == -1 and prof.mu > 0.0:
        from .rates import rate

        rf = rate(chain)
        mismatch = np.abs(2.0 * mom.m1 / mom.m2 + rf.r(grid))
        scaled = mismatch * grid.astype(float) ** (2.0 + prof.delta)
        ok, witness, sup = _bounded_along_grid(scaled, grid)
        checks.append(AssumptionCheck(
            name="drift_rate_match", passed=ok, value=sup, witness=witness,
            note="sup |2*m1/m2 + r(x)| * x**(2+delta)"))

        power = (rf.rho - 1.0) + 3.0 + prof.delta
        big = np.empty(len(grid))
        for i, x in enumerate(grid):
            law = chain.law(int(x))
            cut = prof.tail_cut * float(x)
            big[i] = math.fsum(p * float(o) ** power
                               for o, p in zip(law.offsets, law.probs) if o > cut)
        scaled = big / grid.astype(float) ** (rf.rho - 1.0)
        ok, witness, sup = _bounded_along_grid(scaled, grid)
        checks.append(AssumptionCheck(
            name="large_jump_moment", passed=ok, value=sup, witness=witness,
            note="sup E[jump**(2mu/b+3+delta); jump > tail_cut*x] / x**(2mu/b)"))

        checks.append(_escape_paths(chain, reach_to))

    if prof.drift_sign == 1:
        tailgrid = grid[len(grid) // 2:]
        ratio = (2.0 * tailgrid * mom.m1[len(grid) // 2:]
                 / mom.m2[len(grid) // 2:])
        margin = float(ratio.min()) - 1.0
        if margin > 0.0:
            gamma = 0.5 * (1.0 - 1.0 / math.sqrt(1.0 + margin))
            ok, witness, extrap = _large_down_jumps_negligible(chain, tailgrid, gamma)
            checks.append(AssumptionCheck(
                name="down_jump_negligible", passed=ok, value=gamma, witness=witness,
                note=f"P(jump <= -{gamma:.3f}*x) versus m2(x)*(1+x)**-1.5/x",
                extrapolated=extrap))
        else:
            checks.append(AssumptionCheck(
                name="down_jump_negligible", passed=False, value=margin,
                note="ratio 2*x*m1/m2 never clears 1 on the tail grid"))

    return checks


def _escape_paths(chain, reach_to: int | None) -> AssumptionCheck:
    """Best-path escape probabilities from just above the boundary block.

    For each start in (x0, x1] runs a shortest-path search (edge cost
    -log p) on the chain killed at [0, x0], asking for any state above x1.
    Reports the smallest best-path probability over the starts; paths are
    simple, so their length stays far below the square of the window size.
    """
    x0 = chain.boundary_x0
    x1 = reach_to if reach_to is not None else x0 + 32
    hi = x1 + chain.max_up
    worst = math.inf
    witness = None
    for start in range(x0 + 1, x1 + 1):
        dist = {start: 0.0}
        heap = [(0.0, start)]
        best = math.inf
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf):
                continue
            if u > x1:
                best = d
                break
            law = chain.law(u)
            for off, p in zip(law.offsets, law.probs):
                v = u + int(off)
                if p <= 0.0 or v <= x0 or v > hi:
                    continue
                nd = d - math.log(p)
                if nd < dist.get(v, math.inf):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        prob = math.exp(-best) if best < math.inf else 0.0
        if prob < worst:
            worst = prob
            witness = start
    passed = worst > 0.0
    return AssumptionCheck(
        name="interior_escape_paths", passed=passed, value=worst,
        witness=None if passed else witness,
        note=f"min over starts in ({x0}, {x1}] of the best escape-path probability")
