"""Chain families on the nonnegative integers with asymptotically zero drift.

Every family stores an exact per-state jump law. Above a family-specific
clip point the first two moments match the declared profile exactly by
construction; below it the law is frozen at the clip point so that
probabilities stay valid near the origin.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "JumpLaw",
    "DriftProfile",
    "ChainSpec",
    "MomentTable",
    "make_birth_death",
    "make_updrift_birth_death",
    "make_left_skip_free",
    "make_origin_jump_chain",
    "make_reflected_walk",
    "moments",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JumpLaw:
    """Jump distribution at a single state: integer offsets and probabilities."""

    offsets: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        offs = np.asarray(self.offsets, dtype=np.int64)
        pr = np.asarray(self.probs, dtype=np.float64)
        object.__setattr__(self, "offsets", offs)
        object.__setattr__(self, "probs", pr)
        if offs.ndim != 1 or offs.shape != pr.shape:
            raise ValueError("offsets and probs must be 1-d arrays of equal length")
        if len(np.unique(offs)) != len(offs):
            raise ValueError(f"duplicate offsets in {offs.tolist()}")
        if pr.min(initial=0.0) < 0.0:
            raise ValueError(f"negative jump probability {pr.min():.6e}")
        total = math.fsum(pr.tolist())
        if abs(total - 1.0) > _PROB_TOL:
            raise ValueError(f"jump probabilities sum to {total!r}, not 1")

    def moment(self, power: int) -> float:
        """E[offset**power], accumulated with fsum for reproducibility."""
        return math.fsum(p * float(o) ** power for o, p in zip(self.offsets, self.probs))

    def abs_moment(self, power: float) -> float:
        """E[|offset|**power]."""
        return math.fsum(p * abs(float(o)) ** power for o, p in zip(self.offsets, self.probs))

    def mass_at_or_below(self, cut: float) -> float:
        """P(offset <= cut)."""
        return math.fsum(p for o, p in zip(self.offsets, self.probs) if o <= cut)


@dataclass(frozen=True)
class DriftProfile:
    """Declared limiting behaviour of the jump moments along the state axis.

    The mean jump behaves like ``drift_sign * mu / x``, the second moment
    tends to ``b``. ``m3_mode`` records what the third moment does in the
    limit: vanishes, converges to a constant, alternates between two values
    with state parity, or diverges. ``delta`` is the extra moment margin
    used by the diagnostics and ``tail_cut`` the slope of the large-jump
    cutoff (jumps above ``tail_cut * x`` count as large).
    """

    mu: float
    b: float
    drift_sign: int = -1
    m3_mode: str = "vanishing"
    m3_values: tuple[float, ...] = ()
    delta: float = 1.0
    tail_cut: float = 1.0

    def __post_init__(self):
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        if self.b <= 0.0:
            raise ValueError("b must be positive")
        if self.drift_sign not in (-1, 1):
            raise ValueError("drift_sign must be -1 or +1")
        expected = {"vanishing": 0, "constant": 1, "alternating": 2, "divergent": 0}
        if self.m3_mode not in expected:
            raise ValueError(f"unknown m3_mode {self.m3_mode!r}")
        if len(self.m3_values) != expected[self.m3_mode]:
            raise ValueError(f"m3_mode {self.m3_mode!r} needs {expected[self.m3_mode]} values")
        if self.delta <= 0.0 or self.tail_cut <= 0.0:
            raise ValueError("delta and tail_cut must be positive")

    @property
    def m3_limit(self) -> float | None:
        """Limit of the third moment, or None when it does not converge."""
        if self.m3_mode == "vanishing":
            return 0.0
        if self.m3_mode == "constant":
            return self.m3_values[0]
        return None


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A chain on {0, 1, 2, ...}: per-state laws plus the declared profile.

    ``boundary_x0`` is the right edge of the boundary block used by the
    harmonic construction; the built-in families put it at their clip
    point. ``bounded_jumps`` is False when the down-jump size grows with
    the state (origin-jump family).
    """

    law_fn: Callable[[int], JumpLaw]
    profile: DriftProfile
    boundary_x0: int
    family_tag: str
    max_up: int
    bounded_jumps: bool = True
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.boundary_x0 < 0:
            raise ValueError("boundary_x0 must be nonnegative")
        object.__setattr__(self, "_law_cache", {})

    def law(self, x: int) -> JumpLaw:
        x = int(x)
        if x < 0:
            raise ValueError(f"state {x} is negative")
        cached = self._law_cache.get(x)
        if cached is None:
            cached = self.law_fn(x)
            if np.any(x + cached.offsets < 0):
                raise ValueError(f"law at state {x} assigns mass below zero")
            self._law_cache[x] = cached
        return cached


@dataclass(frozen=True, eq=False)
class MomentTable:
    """First three jump moments and the (3+delta) absolute moment on a grid."""

    grid: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    abs3pd: np.ndarray
    delta: float

    def write_csv(self, path) -> None:
        from .io_utils import write_csv

        write_csv(path, "x,m1,m2,m3,abs3pd",
                  [self.grid, self.m1, self.m2, self.m3, self.abs3pd])


def _clip_point(mu: float, b: float) -> int:
    return max(1, math.ceil(2.0 * mu / b))


def make_birth_death(mu: float, b: float) -> ChainSpec:
    """Nearest-neighbour family with mean jump -mu/x and second moment b.

    Above the clip point ``ceil(2*mu/b)`` the law is exactly
    ``p(+-1) = (b -+ mu/x)/2`` with the rest on staying put; below it the
    denominator is frozen at the clip point. State 0 moves up with
    probability b/2.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if not 0.0 < b <= 1.0:
        raise ValueError("b must lie in (0, 1] so the stay probability is nonnegative")
    xc = _clip_point(mu, b)

    def law_fn(x: int) -> JumpLaw:
        if x == 0:
            return JumpLaw([0, 1], [1.0 - b / 2.0, b / 2.0])
        denom = max(x, xc)
        down = (b + mu / denom) / 2.0
        up = (b - mu / denom) / 2.0
        return JumpLaw([-1, 0, 1], [down, 1.0 - (down + up), up])

    profile = DriftProfile(mu=mu, b=b, drift_sign=-1, m3_mode="vanishing")
    return ChainSpec(law_fn, profile, boundary_x0=xc, family_tag="birth_death",
                     max_up=1, params={"mu": mu, "b": b, "clip": xc})


def make_updrift_birth_death(mu: float, b: float) -> ChainSpec:
    """Mirror image of :func:`make_birth_death` with mean jump +mu/x."""
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if not 0.0 < b <= 1.0:
        raise ValueError("b must lie in (0, 1]")
    xc = _clip_point(mu, b)

    def law_fn(x: int) -> JumpLaw:
        if x == 0:
            return JumpLaw([0, 1], [1.0 - b / 2.0, b / 2.0])
        denom = max(x, xc)
        down = (b - mu / denom) / 2.0
        up = (b + mu / denom) / 2.0
        return JumpLaw([-1, 0, 1], [down, 1.0 - (down + up), up])

    profile = DriftProfile(mu=mu, b=b, drift_sign=1, m3_mode="vanishing")
    return ChainSpec(law_fn, profile, boundary_x0=xc, family_tag="birth_death_updrift",
                     max_up=1, params={"mu": mu, "b": b, "clip": xc})


def make_reflected_walk(b: float) -> ChainSpec:
    """Driftless lazy walk reflected at 0; control chain for test power."""
    if not 0.0 < b <= 1.0:
        raise ValueError("b must lie in (0, 1]")

    def law_fn(x: int) -> JumpLaw:
        if x == 0:
            return JumpLaw([0, 1], [1.0 - b / 2.0, b / 2.0])
        return JumpLaw([-1, 0, 1], [b / 2.0, 1.0 - b, b / 2.0])

    profile = DriftProfile(mu=0.0, b=b, drift_sign=1, m3_mode="vanishing")
    return ChainSpec(law_fn, profile, boundary_x0=1, family_tag="reflected_walk",
                     max_up=1, params={"b": b})


def _lsf_weights(m1: float, m2: float, m3: float) -> tuple[float, float, float]:
    """Weights on offsets (-1, +1, +2) matching the three target moments."""
    q2 = (m3 - m1) / 6.0
    q1 = (2.0 * m1 + m2 - m3) / 2.0
    qm = m2 / 2.0 - m1 / 3.0 - m3 / 6.0
    return qm, q1, q2


def _lsf_feasible(m1: float, m2: float, m3: float) -> bool:
    qm, q1, q2 = _lsf_weights(m1, m2, m3)
    return min(qm, q1, q2) >= 0.0 and qm + q1 + q2 <= 1.0


def make_left_skip_free(mu: float, b: float, m3_low: float, m3_high: float) -> ChainSpec:
    """Family on offsets {-1, 0, +1, +2} with a parity-alternating third moment.

    The weights on -1/+1/+2 solve the linear system pinning
    (m1, m2, m3) = (-mu/x, b, m3), with m3_low at even states and m3_high
    at odd ones; leftover mass stays put. Down-jumps never exceed one
    step. Raises when the targets cannot be realised with nonnegative
    weights at any large state.
    """
    if mu <= 0.0 or b <= 0.0:
        raise ValueError("mu and b must be positive")
    for m3 in (m3_low, m3_high):
        if m3 < 0.0 or not _lsf_feasible(0.0, b, m3):
            qm, q1, q2 = _lsf_weights(0.0, b, m3)
            raise ValueError(
                f"moment targets m2={b}, m3={m3} stay infeasible at every state: "
                f"limiting weights (down,up1,up2)=({qm:.4g},{q1:.4g},{q2:.4g})")

    xc = 1
    while not all(_lsf_feasible(-mu / xc, b, m3) for m3 in (m3_low, m3_high)):
        xc += 1
        if xc > 10**6:
            raise ValueError("no feasible clip point below 1e6")

    pair = (m3_low, m3_high)

    def law_fn(x: int) -> JumpLaw:
        m1 = -mu / max(x, xc)
        m3 = pair[x % 2]
        qm, q1, q2 = _lsf_weights(m1, b, m3)
        if x == 0:
            # fold the down weight into staying put
            return JumpLaw([0, 1, 2], [1.0 - (q1 + q2), q1, q2])
        return JumpLaw([-1, 0, 1, 2], [qm, 1.0 - (qm + q1 + q2), q1, q2])

    mode = "alternating" if m3_low != m3_high else "constant"
    values = (m3_low, m3_high) if mode == "alternating" else (m3_low,)
    profile = DriftProfile(mu=mu, b=b, drift_sign=-1, m3_mode=mode, m3_values=values)
    return ChainSpec(law_fn, profile, boundary_x0=xc, family_tag="left_skip_free",
                     max_up=2, params={"mu": mu, "b": b, "m3_low": m3_low,
                                       "m3_high": m3_high, "clip": xc})


def make_origin_jump_chain(base: ChainSpec,
                           f_choice: Callable[[int], float] | None = None,
                           p_choice: Callable[[int], float] | None = None) -> ChainSpec:
    """Add a reset-to-origin jump to a chain with positive drift.

    At state x >= 1 the chain jumps straight to 0 with probability
    ``f(x) * p(x)`` (defaults: f = m2(x)/x, p = 1/(1+x)) and otherwise
    follows the base law with mass rescaled. The reset rate is square
    summable along typical growth paths yet heavy enough to break the
    large-negative-jump condition, so drift tests alone misread this
    family.
    """
    if base.profile.drift_sign != 1:
        raise ValueError("origin-jump construction expects a positive-drift base")

    def default_f(x: int) -> float:
        law = base.law(x)
        return law.moment(2) / x

    f = f_choice if f_choice is not None else default_f
    p = p_choice if p_choice is not None else (lambda x: 1.0 / (1.0 + x))

    def law_fn(x: int) -> JumpLaw:
        baselaw = base.law(x)
        if x == 0:
            return baselaw
        q = min(f(x) * p(x), 1.0)
        offs = list(baselaw.offsets)
        pr = [(1.0 - q) * v for v in baselaw.probs]
        if -x in offs:
            pr[offs.index(-x)] += q
        else:
            offs.append(-x)
            pr.append(q)
        order = np.argsort(offs)
        return JumpLaw(np.asarray(offs)[order], np.asarray(pr)[order])

    # f*p decays like 1/x**2 for the supported choices, so any probability
    # overflow sits on an initial segment; find it once and say so
    clip_hi = 0
    for x in range(1, 4097):
        if f(x) * p(x) > 1.0:
            clip_hi = x
    if clip_hi:
        warnings.warn(f"reset probability f(x)*p(x) exceeds 1 on [1, {clip_hi}]"
                      " and is clipped there", stacklevel=2)

    # the reset at rate q(x) = f(x)p(x) shifts the limits: x*m1 drops by
    # x**2*q and m2 gains the same amount; read that scale off a far probe
    probe = 1 << 20
    c_q = float(probe) ** 2 * min(f(probe) * p(probe), 1.0)
    net = base.profile.mu - c_q
    if net <= 0.0:
        raise ValueError(f"reset scale {c_q:.3g} swallows the outward drift "
                         f"{base.profile.mu:.3g}; the profile sign would flip")
    profile = DriftProfile(mu=net, b=base.profile.b + c_q, drift_sign=1,
                           m3_mode="divergent", delta=base.profile.delta,
                           tail_cut=base.profile.tail_cut)
    return ChainSpec(law_fn, profile, boundary_x0=base.boundary_x0,
                     family_tag="origin_jump", max_up=base.max_up,
                     bounded_jumps=False,
                     params=dict(base.params, base=base.family_tag,
                                 reset_scale=c_q, reset_clip_hi=clip_hi))


def moments(chain, grid) -> MomentTable:
    """Exact jump moments of any chain-like object over a state grid."""
    grid = np.asarray(grid, dtype=np.int64)
    delta = chain.profile.delta
    m1 = np.empty(len(grid))
    m2 = np.empty(len(grid))
    m3 = np.empty(len(grid))
    a3 = np.empty(len(grid))
    for i, x in enumerate(grid):
        law = chain.law(int(x))
        m1[i] = law.moment(1)
        m2[i] = law.moment(2)
        m3[i] = law.moment(3)
        a3[i] = law.abs_moment(3.0 + delta)
    return MomentTable(grid=grid, m1=m1, m2=m2, m3=m3, abs3pd=a3, delta=delta)
