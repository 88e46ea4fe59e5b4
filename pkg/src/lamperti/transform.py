"""Conditioning on avoiding the boundary block via the harmonic change of measure.

The transformed chain moves as p_hat(x, y) = P(x, y) * V(y) / V(x) over the
states above x0, where V comes from :mod:`lamperti.harmonic`. Inside the
solved window the rows are exact; beyond it V is continued with
U + c*exp(R), using the constant read off at the window edge, and the rows
are renormalized. The transformed walk drifts outward: x * m1 tends to
mu + b and the second moment keeps the limit b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .chains import ChainSpec, DriftProfile, JumpLaw, MomentTable, moments
from .harmonic import HarmonicTable

__all__ = ["TransformedChain", "transform", "transformed_moments",
           "nstep_consistency", "transformed_return_check", "ReturnCheck"]


@dataclass(frozen=True, eq=False)
class TransformedChain:
    """Doob transform of a base chain by its killed-harmonic function."""

    base: ChainSpec
    harm: HarmonicTable
    profile: DriftProfile
    boundary_x0: int
    family_tag: str
    max_up: int
    bounded_jumps: bool
    init_states: np.ndarray | None
    init_probs: np.ndarray | None
    boundary_integral: float | None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_law_cache", {})

    def _v_eff(self, y: int) -> float:
        """V inside the solved window, its smooth continuation beyond."""
        if y <= self.harm.trunc_n:
            return float(self.harm.v[y])
        rf = self.harm.rates
        return rf.U(y) + self.harm.c0_empirical * float(rf.exp_R(y))

    def law(self, x: int) -> JumpLaw:
        x = int(x)
        if x <= self.boundary_x0:
            raise ValueError(f"transformed chain lives above {self.boundary_x0}")
        cached = self._law_cache.get(x)
        if cached is not None:
            return cached
        baselaw = self.base.law(x)
        vx = self._v_eff(x)
        offs, weights = [], []
        for off, p in zip(baselaw.offsets, baselaw.probs):
            y = x + int(off)
            if y <= self.boundary_x0 or p == 0.0:
                continue
            offs.append(int(off))
            weights.append(p * self._v_eff(y) / vx)
        total = math.fsum(weights)
        law = JumpLaw(np.asarray(offs), np.asarray(weights) / total)
        self._law_cache[x] = law
        return law

    def raw_row_sum(self, x: int) -> float:
        """Sum of V(y)P(x,y)/V(x) before normalization; 1 up to solve error."""
        baselaw = self.base.law(int(x))
        vx = self._v_eff(int(x))
        return math.fsum(p * self._v_eff(x + int(off)) / vx
                         for off, p in zip(baselaw.offsets, baselaw.probs)
                         if x + int(off) > self.boundary_x0 and p > 0.0)

    def kernel_matrix(self, lo: int, hi: int) -> sp.csr_matrix:
        """Transformed kernel on the window [lo, hi], exiting mass dropped."""
        rows, cols, vals = [], [], []
        for x in range(lo, hi + 1):
            law = self.law(x)
            for off, p in zip(law.offsets, law.probs):
                y = x + int(off)
                if lo <= y <= hi:
                    rows.append(x - lo)
                    cols.append(y - lo)
                    vals.append(p)
        m = hi - lo + 1
        return sp.coo_matrix((vals, (rows, cols)), shape=(m, m)).tocsr()

    def write_kernel_csv(self, path, lo: int, hi: int) -> None:
        from .io_utils import write_csv

        xs, ys, ps = [], [], []
        for x in range(lo, hi + 1):
            law = self.law(x)
            for off, p in zip(law.offsets, law.probs):
                xs.append(x)
                ys.append(x + int(off))
                ps.append(p)
        write_csv(path, "x,y,p", [np.asarray(xs), np.asarray(ys), np.asarray(ps)])


def transform(chain: ChainSpec, harm: HarmonicTable, stat=None) -> TransformedChain:
    """Build the transformed chain; with a stationary table, also its entry law.

    The entry law is the one-step exit distribution from the boundary
    block under pi, reweighted by V: the natural starting measure for the
    transformed walk. Its normalizing constant (the boundary integral
    sum over z <= x0 of pi(z) E_z[V(X_1); X_1 > x0]) feeds the tail
    constant prediction.
    """
    x0 = harm.x0
    v_int = harm.v[x0 + 1:]
    spread = float(v_int.max() / max(v_int.min(), 1e-300)) - 1.0
    if v_int.min() <= 0.0:
        raise ValueError("V must be positive above x0 to drive the transform")
    if spread < 1e-12:
        raise ValueError("constant V cannot come from the killed kernel")

    prof = chain.profile
    if prof.drift_sign != -1:
        raise ValueError("transform starts from the recurrent regime")
    hat_profile = DriftProfile(mu=prof.mu + prof.b, b=prof.b, drift_sign=1,
                               m3_mode=prof.m3_mode, m3_values=prof.m3_values,
                               delta=prof.delta, tail_cut=prof.tail_cut)

    init_states = init_probs = None
    integral = None
    if stat is not None:
        weights: dict[int, float] = {}
        acc = []
        for z in range(0, x0 + 1):
            law = chain.law(z)
            pz = float(stat.pi[z])
            for off, p in zip(law.offsets, law.probs):
                y = z + int(off)
                if y <= x0 or p == 0.0:
                    continue
                w = pz * p * float(harm.v[y])
                weights[y] = weights.get(y, 0.0) + w
                acc.append(w)
        integral = math.fsum(acc)
        if integral <= 0.0:
            raise ValueError("boundary block never exits upward under pi")
        init_states = np.array(sorted(weights), dtype=np.int64)
        init_probs = np.array([weights[s] for s in init_states]) / integral

    return TransformedChain(base=chain, harm=harm, profile=hat_profile,
                            boundary_x0=x0, family_tag=chain.family_tag + "_h",
                            max_up=chain.max_up, bounded_jumps=chain.bounded_jumps,
                            init_states=init_states, init_probs=init_probs,
                            boundary_integral=integral,
                            params=dict(chain.params))


def transformed_moments(tc: TransformedChain, grid) -> MomentTable:
    """Exact jump moments of the transformed chain on a grid."""
    return moments(tc, grid)


def nstep_consistency(tc: TransformedChain, n_steps: int, lo: int, hi: int) -> float:
    """Max abs deviation between the n-step transformed kernel and its definition.

    Compares p_hat^n(x, y) against (V(y)/V(x)) * K^n(x, y) with K the
    killed base kernel, on rows whose n-step range stays inside [lo, hi].
    """
    if lo <= tc.boundary_x0:
        raise ValueError("window must sit above x0")
    if hi + n_steps * tc.max_up > tc.harm.trunc_n:
        raise ValueError("window too close to the solved edge for n steps")

    m = hi - lo + 1
    hat = tc.kernel_matrix(lo, hi).toarray()
    killed = np.zeros((m, m))
    for x in range(lo, hi + 1):
        law = tc.base.law(x)
        for off, p in zip(law.offsets, law.probs):
            y = x + int(off)
            if lo <= y <= hi:
                killed[x - lo, y - lo] = p
    hat_n = np.linalg.matrix_power(hat, n_steps)
    killed_n = np.linalg.matrix_power(killed, n_steps)

    v = tc.harm.v[lo: hi + 1]
    expected = killed_n * (v[None, :] / v[:, None])
    down = max(-min(int(tc.base.law(x).offsets.min()) for x in range(lo, hi + 1)), 0)
    r0 = n_steps * down
    r1 = m - n_steps * tc.max_up
    if r1 <= r0:
        raise ValueError("no rows with a fully interior n-step cone")
    return float(np.max(np.abs(hat_n[r0:r1] - expected[r0:r1])))


@dataclass(frozen=True)
class ReturnCheck:
    """Monte Carlo return probability against its closed-form ceiling."""

    y_start: int
    x_level: int
    probability: float
    stderr: float
    bound: float
    delta: float
    n_replicas: int
    n_hits: int
    horizon: int

    @property
    def within_bound(self) -> bool:
        return self.probability <= self.bound + 3.0 * self.stderr


def transformed_return_check(tc: TransformedChain, y: int, x: int, cfg,
                             grid=None) -> ReturnCheck:
    """Estimate P(ever back at or below x from y) and compare with (x/y)**delta."""
    from .drift import passage_bounds
    from .engine import return_probability

    if grid is None:
        grid = np.arange(tc.boundary_x0 + 1, min(tc.harm.trunc_n, 4 * y))
    pb = passage_bounds(tc, grid, x0=tc.boundary_x0)
    bound = pb.return_bound(x, y)
    est = return_probability(tc, cfg, y_start=y, low=x)
    return ReturnCheck(y_start=y, x_level=x, probability=est.probability,
                       stderr=est.stderr, bound=bound, delta=pb.delta,
                       n_replicas=est.n_replicas, n_hits=est.n_hits,
                       horizon=est.horizon)
