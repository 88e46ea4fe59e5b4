"""Monte Carlo drivers: jump tables, event budget, and the sampling suites.

A chain is flattened into a row-major jump table (offsets plus per-row
cdf) covering a contiguous state window. Kernels pause with NEED_EXTEND
when a replica walks past the window; the driver doubles the window,
rebuilds the table from the cached laws and re-enters, so results do not
depend on the initial table size.

The total number of simulated steps per ledger is capped by
LAMPERTI_MAX_EVENTS (default ten billion). Fixed-horizon suites check
their full cost up front; first-passage style suites charge as they go,
so they can overshoot the cap by at most one kernel entry before the
error surfaces.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from ._rng import next_uniform, stream_keys
from .kernels import FAILED, NEED_EXTEND, RUN, get_backend

__all__ = ["BudgetExceededError", "EventLedger", "SimConfig", "JumpTable",
           "build_table", "sample_init", "simulate", "TrajectoryBatch",
           "gamma_limit_test", "GammaTestReport", "renewal_estimate",
           "RenewalEstimate", "passage_time_suite", "PassageReport",
           "return_probability", "ReturnEstimate", "stationary_occupation",
           "OccupationReport"]

_DEFAULT_BUDGET = 10_000_000_000
_MAX_TABLE_STATES = 1 << 24
_MAX_SNAPSHOTS = 4096


class BudgetExceededError(RuntimeError):
    """Raised when a run would simulate more steps than LAMPERTI_MAX_EVENTS."""


def _budget_from_env() -> int:
    raw = os.environ.get("LAMPERTI_MAX_EVENTS")
    if raw is None:
        return _DEFAULT_BUDGET
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"LAMPERTI_MAX_EVENTS={raw!r} is not an integer") from exc
    if cap <= 0:
        raise ValueError("LAMPERTI_MAX_EVENTS must be positive")
    return cap


class EventLedger:
    """Counts simulated steps against a cap shared across driver calls."""

    def __init__(self, cap: int | None = None):
        self.cap = _budget_from_env() if cap is None else int(cap)
        self.used = 0

    def precheck(self, planned: int) -> None:
        if self.used + planned > self.cap:
            raise BudgetExceededError(
                f"planned {planned} steps on top of {self.used} would pass "
                f"the cap of {self.cap}")

    def charge(self, events: int) -> None:
        self.used += int(events)
        if self.used > self.cap:
            raise BudgetExceededError(
                f"{self.used} simulated steps exceed the cap of {self.cap}")


@dataclass
class SimConfig:
    """Replica-level knobs shared by every Monte Carlo suite.

    ``record_stride`` only matters to :func:`simulate`: a positive stride
    snapshots every that-many steps; zero keeps final states only.
    """

    seed: int = 24245
    n_steps: int = 100_000
    n_replicas: int = 2000
    x_start: int = 0
    record_stride: int = 0
    backend: str | None = None
    stream_offset: int = 0

    def with_updates(self, **kw) -> "SimConfig":
        out = SimConfig(**{**self.__dict__, **kw})
        return out


@dataclass(frozen=True, eq=False)
class JumpTable:
    """Row-major jump table over the states lo..hi inclusive."""

    lo: int
    hi: int
    row_ptr: np.ndarray
    offsets: np.ndarray
    cdf: np.ndarray

    @property
    def n_states(self) -> int:
        return self.hi - self.lo + 1


def build_table(chain, lo: int, hi: int) -> JumpTable:
    if hi < lo:
        raise ValueError("empty table window")
    if hi - lo + 1 > _MAX_TABLE_STATES:
        raise RuntimeError(f"jump table would exceed {_MAX_TABLE_STATES} states; "
                           "the chain is likely running away")
    ptr = [0]
    offs: list[int] = []
    cdf: list[float] = []
    for x in range(lo, hi + 1):
        law = chain.law(x)
        acc = np.cumsum(law.probs)
        acc[-1] = 1.0
        offs.extend(int(o) for o in law.offsets)
        cdf.extend(float(c) for c in acc)
        ptr.append(len(offs))
    return JumpTable(lo=int(lo), hi=int(hi),
                     row_ptr=np.asarray(ptr, dtype=np.int64),
                     offsets=np.asarray(offs, dtype=np.int64),
                     cdf=np.asarray(cdf, dtype=np.float64))


def _table_base(chain) -> int:
    """Lowest state a chain can occupy (above the cut for transformed walks)."""
    if getattr(chain, "harm", None) is not None:
        return chain.boundary_x0 + 1
    return 0


@dataclass
class _Replicas:
    state: np.ndarray
    step: np.ndarray
    key: np.ndarray
    status: np.ndarray


def _replicas(starts, seed: int, n: int, offset: int) -> _Replicas:
    starts = np.asarray(starts, dtype=np.int64)
    if starts.ndim == 0:
        starts = np.full(n, int(starts), dtype=np.int64)
    if len(starts) != n:
        raise ValueError("need one start state per replica")
    return _Replicas(state=starts.copy(),
                     step=np.zeros(n, dtype=np.int64),
                     key=stream_keys(seed, n, offset=offset),
                     status=np.full(n, RUN, dtype=np.int64))


def _starts_of(chain, cfg: SimConfig, starts) -> np.ndarray:
    if starts is None:
        starts = cfg.x_start
    arr = np.asarray(starts, dtype=np.int64)
    if arr.ndim == 0:
        arr = np.full(cfg.n_replicas, int(arr), dtype=np.int64)
    base = _table_base(chain)
    if arr.min() < base:
        raise ValueError(f"start state below the chain floor {base}")
    return arr


def sample_init(states, probs, n: int, seed: int, offset: int = 0) -> np.ndarray:
    """Draw n start states from a discrete law with the counter RNG."""
    states = np.asarray(states, dtype=np.int64)
    cum = np.cumsum(np.asarray(probs, dtype=np.float64))
    cum[-1] = 1.0
    keys = stream_keys(seed, n, offset=offset)
    u, _ = next_uniform(keys)
    return states[np.searchsorted(cum, u, side="right")]


def _grown(table: JumpTable, chain, need_hi: int) -> JumpTable:
    new_hi = max(2 * table.n_states + table.lo, need_hi + 8)
    return build_table(chain, table.lo, new_hi)


def _drive(chain, table, rep, ledger, enter):
    """Re-enter a kernel until no replica waits on a larger table."""
    while True:
        events = enter(table)
        ledger.charge(events)
        if (rep.status == FAILED).any():
            raise RuntimeError("replica fell below the table base; "
                               "the chain spec violates its own floor")
        if not (rep.status == NEED_EXTEND).any():
            return table
        need_hi = int(rep.state[rep.status == NEED_EXTEND].max())
        table = _grown(table, chain, need_hi)


def _initial_table(chain, starts, pad: int = 64) -> JumpTable:
    lo = _table_base(chain)
    hi = int(np.max(starts)) + pad
    return build_table(chain, lo, max(hi, lo + pad))


@dataclass(frozen=True, eq=False)
class TrajectoryBatch:
    """Final states (and optional snapshots) of a replica batch."""

    final_states: np.ndarray
    n_steps: int
    seed: int
    snapshot_times: tuple[int, ...] = ()
    snapshots: np.ndarray | None = None

    def records(self):
        """One plain dict per replica, ready for JSON-lines output."""
        for i, fs in enumerate(self.final_states):
            rec = {"replica": i, "final_state": int(fs), "n_steps": self.n_steps}
            if self.snapshots is not None:
                rec["snapshot_times"] = list(self.snapshot_times)
                rec["snapshots"] = [int(v) for v in self.snapshots[:, i]]
            yield rec


def simulate(chain, cfg: SimConfig, starts=None,
             ledger: EventLedger | None = None) -> TrajectoryBatch:
    """Walk every replica cfg.n_steps steps; deterministic given the seed."""
    ledger = ledger or EventLedger()
    ledger.precheck(cfg.n_replicas * cfg.n_steps)
    backend = get_backend(cfg.backend)
    rep = _replicas(_starts_of(chain, cfg, starts), cfg.seed, cfg.n_replicas,
                    cfg.stream_offset)
    table = _initial_table(chain, rep.state)

    if cfg.record_stride and 0 < cfg.record_stride < cfg.n_steps:
        times = list(range(cfg.record_stride, cfg.n_steps + 1, cfg.record_stride))
        if times[-1] != cfg.n_steps:
            times.append(cfg.n_steps)
    else:
        times = [cfg.n_steps]
    if len(times) > _MAX_SNAPSHOTS:
        raise ValueError(f"record_stride produces {len(times)} snapshots; "
                         f"cap is {_MAX_SNAPSHOTS}")

    snaps = np.empty((len(times), cfg.n_replicas), dtype=np.int64)
    for si, t in enumerate(times):
        def enter(tab, t=t):
            return backend.walk_replicas(tab.lo, tab.row_ptr, tab.offsets,
                                         tab.cdf, rep.state, rep.step, rep.key,
                                         rep.status, t)
        table = _drive(chain, table, rep, ledger, enter)
        rep.status[:] = RUN
        snaps[si] = rep.state

    if len(times) == 1:
        return TrajectoryBatch(final_states=rep.state.copy(), n_steps=cfg.n_steps,
                               seed=cfg.seed)
    return TrajectoryBatch(final_states=rep.state.copy(), n_steps=cfg.n_steps,
                           seed=cfg.seed, snapshot_times=tuple(times),
                           snapshots=snaps)


@dataclass(frozen=True)
class GammaTestReport:
    """KS comparison of X_n**2 / n against its gamma limit."""

    shape: float
    scale: float
    n_steps: int
    n_replicas: int
    statistic: float
    pvalue: float
    sample_mean: float
    sample_var: float
    limit_mean: float
    limit_var: float

    @property
    def mean_err(self) -> float:
        return abs(self.sample_mean / self.limit_mean - 1.0)

    @property
    def var_err(self) -> float:
        return abs(self.sample_var / self.limit_var - 1.0)

    def as_dict(self) -> dict:
        return dict(shape=self.shape, scale=self.scale, n_steps=self.n_steps,
                    n_replicas=self.n_replicas, statistic=self.statistic,
                    pvalue=self.pvalue, sample_mean=self.sample_mean,
                    sample_var=self.sample_var, limit_mean=self.limit_mean,
                    limit_var=self.limit_var, mean_err=self.mean_err,
                    var_err=self.var_err)


def gamma_limit_test(chain, cfg: SimConfig, starts=None,
                     ledger: EventLedger | None = None) -> GammaTestReport:
    """Simulate the outward chain and KS-test X_n**2/n against its gamma law.

    The limit has mean 2*mu + b and variance 2*b times that, so shape
    (2*mu + b)/(2*b) and scale 2*b, with mu the chain's own outward drift
    coefficient.
    """
    prof = chain.profile
    if prof.drift_sign != 1:
        raise ValueError("the gamma limit applies to outward-drifting chains")
    shape = (2.0 * prof.mu + prof.b) / (2.0 * prof.b)
    scale = 2.0 * prof.b
    batch = simulate(chain, cfg, starts=starts, ledger=ledger)
    sample = batch.final_states.astype(np.float64) ** 2 / cfg.n_steps
    stat, pval = scipy.stats.kstest(sample, "gamma", args=(shape, 0.0, scale))
    return GammaTestReport(shape=shape, scale=scale, n_steps=cfg.n_steps,
                           n_replicas=cfg.n_replicas, statistic=float(stat),
                           pvalue=float(pval), sample_mean=float(sample.mean()),
                           sample_var=float(sample.var(ddof=1)),
                           limit_mean=shape * scale,
                           limit_var=shape * scale * scale)


@dataclass(frozen=True, eq=False)
class RenewalEstimate:
    """Mean visit counts H(x) below each grid level, with replica spread."""

    x_grid: np.ndarray
    H: np.ndarray
    horizon: int
    stderr: np.ndarray
    n_replicas: int
    per_replica: np.ndarray | None = None
    detail: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        from .io_utils import write_csv

        write_csv(path, "x,H,stderr", [self.x_grid, self.H, self.stderr])


def renewal_estimate(chain, x_grid, horizon_factor: float, cfg: SimConfig,
                     starts=None, keep_replica_counts: bool = False,
                     ledger: EventLedger | None = None) -> RenewalEstimate:
    """Estimate H(x) = E #{n <= horizon : X_n <= x} on a grid of levels.

    The horizon is horizon_factor * max(x_grid)**2, which must cover the
    transient chain's remaining visits below the top level; factors under
    20 are rejected as too biased to report.
    """
    if horizon_factor < 20.0:
        raise ValueError("horizon_factor below 20 leaves too many visits "
                         "beyond the horizon")
    prof = chain.profile
    if prof.drift_sign != 1:
        raise ValueError("visit counts stay infinite without outward drift")
    x_grid = np.asarray(sorted(int(v) for v in x_grid), dtype=np.int64)
    base = _table_base(chain)
    if x_grid[0] < base:
        raise ValueError(f"grid levels must not sit below the chain floor {base}")
    horizon = int(math.ceil(horizon_factor * float(x_grid[-1]) ** 2))

    ledger = ledger or EventLedger()
    ledger.precheck(cfg.n_replicas * horizon)
    backend = get_backend(cfg.backend)
    rep = _replicas(_starts_of(chain, cfg, starts), cfg.seed, cfg.n_replicas,
                    cfg.stream_offset)
    table = _initial_table(chain, rep.state)
    width = int(x_grid[-1]) - base + 1
    hist2 = np.zeros((cfg.n_replicas, width), dtype=np.int64)

    def enter(tab):
        return backend.walk_occupation(tab.lo, tab.row_ptr, tab.offsets, tab.cdf,
                                       rep.state, rep.step, rep.key, rep.status,
                                       horizon, hist2, base)

    _drive(chain, table, rep, ledger, enter)
    cum = np.cumsum(hist2, axis=1)
    counts = cum[:, x_grid - base].astype(np.float64)
    H = counts.mean(axis=0)
    err = counts.std(axis=0, ddof=1) / math.sqrt(cfg.n_replicas)
    return RenewalEstimate(x_grid=x_grid, H=H, horizon=horizon, stderr=err,
                           n_replicas=cfg.n_replicas,
                           per_replica=counts if keep_replica_counts else None,
                           detail={"hist_base": base,
                                   "occupation": hist2 if keep_replica_counts
                                   else None})


@dataclass(frozen=True, eq=False)
class PassageReport:
    """Monte Carlo first-passage means next to their drift-certificate bounds."""

    y_start: int
    levels: np.ndarray
    mc_means: np.ndarray
    mc_stderrs: np.ndarray
    bounds: np.ndarray
    visit_means: np.ndarray
    censored_fraction: np.ndarray
    tail_slopes: np.ndarray
    tail_concave: np.ndarray
    n_replicas: int

    @property
    def within(self) -> np.ndarray:
        return self.mc_means <= self.bounds + 3.0 * self.mc_stderrs

    def as_dict(self) -> dict:
        return dict(y_start=self.y_start, levels=self.levels.tolist(),
                    mc_means=self.mc_means.tolist(),
                    mc_stderrs=self.mc_stderrs.tolist(),
                    bounds=self.bounds.tolist(),
                    visit_means=self.visit_means.tolist(),
                    censored_fraction=self.censored_fraction.tolist(),
                    tail_slopes=self.tail_slopes.tolist(),
                    tail_concave=self.tail_concave.tolist(),
                    within=self.within.tolist(), n_replicas=self.n_replicas)


def _tail_shape(times: np.ndarray, level: int) -> tuple[float, bool]:
    """Fit log P{T > t*x**2} over t; return (slope, concave-decreasing?)."""
    scaled = np.sort(times.astype(np.float64) / float(level) ** 2)
    n = len(scaled)
    t_lo = float(np.quantile(scaled, 0.5))
    t_hi = float(np.quantile(scaled, 0.995))
    if t_hi <= t_lo:
        return math.nan, False
    ts = np.linspace(t_lo, t_hi, 12)
    surv = np.array([(scaled > t).sum() / n for t in ts])
    keep = surv > 0
    if keep.sum() < 4:
        return math.nan, False
    log_s = np.log(surv[keep])
    slope = float(np.polyfit(ts[keep], log_s, 1)[0])
    second = np.diff(log_s, 2)
    concave = bool(np.all(second <= 1e-9 + 0.2 * np.abs(log_s[:-2] - log_s[2:])))
    return slope, concave


def passage_time_suite(chain, x_list, cfg: SimConfig, starts=None,
                       ledger: EventLedger | None = None,
                       bounds_grid=None) -> PassageReport:
    """Measure E[T(level)] from the start and compare with the drift bound.

    T(level) is the first time the state exceeds the level. The bound
    (level**2 - y**2 + c(level) + (eps + eps0) * visits) / eps uses the
    measured mean count of pre-passage visits to [0, x0] as the plug-in
    for its visit term. Replicas that fail to cross within cfg.n_steps
    are censored and excluded from the mean (their fraction is reported).
    """
    from .drift import passage_bounds

    levels = np.asarray(sorted(int(v) for v in x_list), dtype=np.int64)
    ledger = ledger or EventLedger()
    backend = get_backend(cfg.backend)
    if bounds_grid is None:
        lo = _table_base(chain)
        bounds_grid = np.arange(lo, int(levels[-1]) + 1)
    pb = passage_bounds(chain, bounds_grid)

    y0 = int(_starts_of(chain, cfg, starts)[0])
    means = np.empty(len(levels))
    errs = np.empty(len(levels))
    visits = np.empty(len(levels))
    bounds = np.empty(len(levels))
    censored = np.empty(len(levels))
    slopes = np.empty(len(levels))
    concave = np.zeros(len(levels), dtype=bool)
    for li, level in enumerate(levels):
        rep = _replicas(np.int64(y0), cfg.seed, cfg.n_replicas,
                        cfg.stream_offset + li * cfg.n_replicas)
        table = _initial_table(chain, rep.state)
        below = np.zeros(cfg.n_replicas, dtype=np.int64)
        reached = np.zeros(cfg.n_replicas, dtype=np.int64)

        def enter(tab, level=level, rep=rep, below=below, reached=reached):
            return backend.first_passage(tab.lo, tab.row_ptr, tab.offsets,
                                         tab.cdf, rep.state, rep.step, rep.key,
                                         rep.status, int(level), cfg.n_steps,
                                         int(pb.x0), below, reached)

        _drive(chain, table, rep, ledger, enter)
        ok = reached == 1
        censored[li] = 1.0 - float(ok.mean())
        if not ok.any():
            raise RuntimeError(f"no replica crossed {level} within {cfg.n_steps} "
                               "steps; raise the budget")
        times = rep.step[ok].astype(np.float64)
        means[li] = times.mean()
        errs[li] = times.std(ddof=1) / math.sqrt(len(times))
        visits[li] = float(below[ok].mean())
        bounds[li] = pb.mean_bound(float(level), float(y0), visits[li])
        slopes[li], concave[li] = _tail_shape(rep.step[ok], int(level))

    return PassageReport(y_start=y0, levels=levels, mc_means=means,
                         mc_stderrs=errs, bounds=bounds, visit_means=visits,
                         censored_fraction=censored, tail_slopes=slopes,
                         tail_concave=concave, n_replicas=cfg.n_replicas)


@dataclass(frozen=True)
class ReturnEstimate:
    """Chance of ever falling back to a level, with its sampling error."""

    probability: float
    stderr: float
    n_hits: int
    n_replicas: int
    horizon: int


def return_probability(chain, cfg: SimConfig, y_start: int, low: int,
                       ledger: EventLedger | None = None) -> ReturnEstimate:
    """Fraction of replicas from y_start that ever reach [0, low]."""
    ledger = ledger or EventLedger()
    backend = get_backend(cfg.backend)
    rep = _replicas(np.int64(y_start), cfg.seed, cfg.n_replicas,
                    cfg.stream_offset)
    table = _initial_table(chain, rep.state)
    hit = np.zeros(cfg.n_replicas, dtype=np.int64)

    def enter(tab):
        return backend.ever_hit(tab.lo, tab.row_ptr, tab.offsets, tab.cdf,
                                rep.state, rep.step, rep.key, rep.status,
                                int(low), cfg.n_steps, hit)

    _drive(chain, table, rep, ledger, enter)
    p = float(hit.mean())
    err = math.sqrt(max(p * (1.0 - p), 1.0 / cfg.n_replicas) / cfg.n_replicas)
    return ReturnEstimate(probability=p, stderr=err, n_hits=int(hit.sum()),
                          n_replicas=cfg.n_replicas, horizon=cfg.n_steps)


@dataclass(frozen=True, eq=False)
class OccupationReport:
    """Single-trajectory occupation frequencies and regeneration tally.

    The histogram covers every step of the trajectory, including the
    final incomplete regeneration cycle; with hundreds of cycles the
    truncation bias is orders below the comparison tolerances.
    """

    hist_lo: int
    hist: np.ndarray
    n_steps: int
    cycles_completed: int
    mark: int
    final_state: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.hist / self.n_steps

    def as_dict(self) -> dict:
        return dict(hist_lo=self.hist_lo, n_steps=self.n_steps,
                    cycles_completed=self.cycles_completed, mark=self.mark,
                    final_state=self.final_state)


def stationary_occupation(chain, cfg: SimConfig, mark: int | None = None,
                          hist_hi: int | None = None, min_cycles: int = 100,
                          ledger: EventLedger | None = None) -> OccupationReport:
    """One long trajectory; occupation frequencies estimate the stationary law.

    ``cycles_completed`` counts returns into [0, mark] from above, the
    regeneration tally; fewer than ``min_cycles`` of them rejects the run
    as underbudgeted (or the chain as not recurrent enough to estimate).
    """
    ledger = ledger or EventLedger()
    ledger.precheck(cfg.n_steps)
    backend = get_backend(cfg.backend)
    if mark is None:
        mark = chain.boundary_x0
    start = int(_starts_of(chain, cfg, None)[0])
    if hist_hi is None:
        hist_hi = max(4 * mark + 64, 256)
    rep = _replicas(np.int64(start), cfg.seed, 1, cfg.stream_offset)
    table = _initial_table(chain, rep.state)
    base = _table_base(chain)
    hist = np.zeros(hist_hi - base + 1, dtype=np.int64)
    crossings = np.zeros(1, dtype=np.int64)
    prev_below = np.zeros(1, dtype=np.int64)

    def enter(tab):
        return backend.long_run(tab.lo, tab.row_ptr, tab.offsets, tab.cdf,
                                rep.state, rep.step, rep.key, rep.status,
                                cfg.n_steps, hist, base, int(mark),
                                crossings, prev_below)

    _drive(chain, table, rep, ledger, enter)
    cycles = int(crossings[0]) - (1 if start <= mark else 0)
    if cycles < min_cycles:
        raise RuntimeError(f"only {cycles} regeneration cycles completed in "
                           f"{cfg.n_steps} steps; need {min_cycles}")
    return OccupationReport(hist_lo=base, hist=hist, n_steps=cfg.n_steps,
                            cycles_completed=cycles, mark=int(mark),
                            final_state=int(rep.state[0]))
