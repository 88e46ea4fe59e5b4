"""Pinned acceptance checks, shared by the CLI and by the test suite.

Each criterion function runs a self-contained check with hard-coded
parameters and tolerances and returns a :class:`CriterionResult`. The
heavyweight exact artifacts (stationary tables, harmonic tables, the
transformed chain, renewal estimates) are cached on a
:class:`VerifyContext`, so running all twelve together costs far less
than the sum of standalone runs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .chains import (make_birth_death, make_left_skip_free,
                     make_origin_jump_chain, make_updrift_birth_death, moments)
from .drift import passage_bounds
from .engine import (SimConfig, gamma_limit_test, passage_time_suite,
                     renewal_estimate, return_probability, sample_init,
                     stationary_occupation)
from .harmonic import harmonic_solve, u_c_drift
from .rates import rate
from .stationary import stationary_global_balance, stationary_skip_free
from .tailfit import fit_tail, predict_constant
from .transform import transform, transformed_moments

__all__ = ["CriterionResult", "VerifyContext", "run_criterion", "run_all",
           "CRITERIA", "SEED", "counterexample_chain"]

SEED = 24245
_TRUNC = 2000
_WINDOW = (50, 500)

# origin-jump counterexample tuning: reset chance f(x)*p(x) with
# f = 4.2 * m2(x)/x and p = 1.25/(1+x) on an outward-drift base with
# mu = 2.7, b = 0.3. The reset scale is then 1.575, so the mean/variance
# ratio 2*x*m1/m2 settles at 2*(2.7-1.575)/(0.3+1.575) = 1.2, comfortably
# above 1, yet f stays above the full mean drift m1 state by state and
# f(x)*p(x) never reaches the clip. Regeneration is counted at the origin
# atom, where the resets land; the near-origin churn makes that count
# land in the thousands for any seed at the pinned step budget, even
# though single far excursions have infinite mean length.
_ORIGIN_MU = 2.7
_ORIGIN_B = 0.3
_ORIGIN_F_SCALE = 4.2
_ORIGIN_P_SCALE = 1.25


def counterexample_chain():
    base = make_updrift_birth_death(_ORIGIN_MU, _ORIGIN_B)

    def f_choice(x):
        return _ORIGIN_F_SCALE * base.law(x).moment(2) / x

    def p_choice(x):
        return _ORIGIN_P_SCALE / (1.0 + x)

    return make_origin_jump_chain(base, f_choice=f_choice, p_choice=p_choice)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict
    seconds: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{flag}] {self.title} ({self.seconds:.2f}s)"


class VerifyContext:
    """Lazy cache of the exact artifacts shared between criteria."""

    def __init__(self, backend: str | None = None, seed: int = SEED):
        self.backend = backend
        self.seed = seed
        self._memo: dict = {}

    def get(self, key, builder):
        if key not in self._memo:
            self._memo[key] = builder()
        return self._memo[key]

    def chain(self, mu: float, b: float):
        return self.get(("chain", mu, b), lambda: make_birth_death(mu, b))

    def stat(self, mu: float, b: float):
        return self.get(("stat", mu, b),
                        lambda: stationary_skip_free(self.chain(mu, b), _TRUNC))

    def fit(self, mu: float, b: float):
        return self.get(("fit", mu, b), lambda: fit_tail(
            self.stat(mu, b), rate(self.chain(mu, b)), _WINDOW))

    def rf21(self):
        return self.get("rf21", lambda: rate(self.chain(2.0, 1.0)))

    def harm21(self):
        return self.get("harm21", lambda: harmonic_solve(
            self.chain(2.0, 1.0), self.rf21(), n=_TRUNC))

    def tc21(self):
        return self.get("tc21", lambda: transform(
            self.chain(2.0, 1.0), self.harm21(), stat=self.stat(2.0, 1.0)))

    def ren_hat(self):
        def build():
            tc = self.tc21()
            grid = np.arange(tc.boundary_x0 + 1, 201, dtype=np.int64)
            starts = sample_init(tc.init_states, tc.init_probs, 400,
                                 self.seed, offset=3)
            cfg = SimConfig(seed=self.seed, n_steps=0, n_replicas=400,
                            backend=self.backend, stream_offset=13 << 20)
            return renewal_estimate(tc, grid, 20.0, cfg, starts=starts,
                                    keep_replica_counts=True)

        return self.get("ren_hat", build)


def _c1(ctx: VerifyContext) -> CriterionResult:
    families = {}
    ok = True
    for mu, b in ((2.0, 1.0), (1.5, 1.0), (3.0, 1.0)):
        t0 = time.perf_counter()
        fit = ctx.fit(mu, b)
        dt = time.perf_counter() - t0
        fam_ok = fit.exponent_ok and dt < 1.0
        ok = ok and fam_ok
        families[f"mu={mu:g},b={b:g}"] = {
            "fitted": fit.exponent_fit, "theory": fit.exponent_theory,
            "tolerance": fit.exponent_tol, "seconds": dt, "ok": fam_ok}
    return CriterionResult(1, "tail exponent, nearest-neighbour families",
                           ok, {"families": families}, 0.0)


def _c2(ctx: VerifyContext) -> CriterionResult:
    chain = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    t0 = time.perf_counter()
    stat = stationary_global_balance(chain, _TRUNC)
    fit = fit_tail(stat, rate(chain), _WINDOW, exponent_tol=0.15)
    dt = time.perf_counter() - t0
    ok = fit.exponent_ok and dt < 30.0
    return CriterionResult(2, "tail exponent, oscillating third moment", ok,
                           {"fitted": fit.exponent_fit,
                            "theory": fit.exponent_theory,
                            "tolerance": 0.15, "m3_pair": [0.2, 0.8],
                            "solver_residual": stat.residual,
                            "seconds": dt}, 0.0)


def _c3(ctx: VerifyContext) -> CriterionResult:
    fit = ctx.fit(2.0, 1.0)
    ok = fit.ratio_flatness <= 1.1
    return CriterionResult(3, "compensated tail ratio flatness", ok,
                           {"flatness": fit.ratio_flatness, "threshold": 1.1,
                            "upper_half": [int(fit.window[1] // 2),
                                           int(fit.window[1])],
                            "c_empirical": fit.c_empirical}, 0.0)


def _c4(ctx: VerifyContext) -> CriterionResult:
    t0 = time.perf_counter()
    harm = ctx.harm21()
    dt = time.perf_counter() - t0
    interior = harm.residual[~np.isnan(harm.residual)]
    res = float(interior.max())
    vu = float(harm.v[500] / harm.u_ref[500])
    checks = {
        "residual": (res <= 1e-9, res, 1e-9),
        "v_over_u_at_500": (0.95 <= vu <= 1.05, vu, [0.95, 1.05]),
        "doubling_shift": (harm.doubling_shift < 1e-3, harm.doubling_shift, 1e-3),
        "runtime": (dt < 10.0, dt, 10.0),
    }
    ok = all(c[0] for c in checks.values())
    return CriterionResult(4, "killed-harmonic solve quality", ok,
                           {k: {"ok": v[0], "value": v[1], "limit": v[2]}
                            for k, v in checks.items()}, 0.0)


def _c5(ctx: VerifyContext) -> CriterionResult:
    chain = ctx.chain(2.0, 1.0)
    rf = ctx.rf21()
    b = chain.profile.b
    scale = (rf.rho - 1.0) * b / 2.0
    rows = {}
    ok = True
    for c in (-1.0, 0.0, 1.0):
        measured = u_c_drift(chain, rf, 500, c)
        target = scale * (0.0 - c)
        good = abs(measured - target) <= 0.1 * scale
        ok = ok and good
        rows[f"C={c:+g}"] = {"measured": measured, "target": target,
                             "tolerance": 0.1 * scale, "ok": good}
    return CriterionResult(5, "drift of the compensated reference family",
                           ok, rows, 0.0)


def _c6(ctx: VerifyContext) -> CriterionResult:
    tc = ctx.tc21()
    xs = [tc.boundary_x0 + 1, 50, 200, 500, 1000, 1500]
    worst = max(abs(tc.raw_row_sum(x) - 1.0) for x in xs)
    mom = transformed_moments(tc, [200])
    mu, b = 2.0, 1.0
    m1x = float(200 * mom.m1[0])
    m2 = float(mom.m2[0])
    m1_ok = abs(m1x - (mu + b)) <= 0.05 * (mu + b)
    m2_ok = abs(m2 - b) <= 0.05 * b
    ok = worst <= 1e-9 and m1_ok and m2_ok
    return CriterionResult(6, "transformed kernel rows and moments", ok,
                           {"max_row_sum_error": float(worst),
                            "row_tolerance": 1e-9, "x_probe": 200,
                            "x_m1": m1x, "x_m1_target": mu + b,
                            "m2": m2, "m2_target": b,
                            "moment_tolerance": 0.05}, 0.0)


def _c7(ctx: VerifyContext) -> CriterionResult:
    tc = ctx.tc21()
    t0 = time.perf_counter()
    starts = sample_init(tc.init_states, tc.init_probs, 5000, ctx.seed,
                         offset=7)
    cfg = SimConfig(seed=ctx.seed, n_steps=100_000, n_replicas=5000,
                    backend=ctx.backend, stream_offset=7 << 20)
    rep = gamma_limit_test(tc, cfg, starts=starts)
    dt = time.perf_counter() - t0
    mean_ok = abs(rep.sample_mean - rep.limit_mean) <= 0.05 * rep.limit_mean
    ok = rep.statistic <= 0.05 and mean_ok and dt < 300.0
    return CriterionResult(7, "scaled-square limit law", ok,
                           {"ks": rep.statistic, "ks_tolerance": 0.05,
                            "shape": rep.shape, "scale": rep.scale,
                            "sample_mean": rep.sample_mean,
                            "limit_mean": rep.limit_mean,
                            "mean_tolerance": 0.05, "pvalue": rep.pvalue,
                            "seconds": dt}, 0.0)


def _c8(ctx: VerifyContext) -> CriterionResult:
    t0 = time.perf_counter()
    ren_hat = ctx.ren_hat()
    idx = int(np.searchsorted(ren_hat.x_grid, 100))
    hat_ratio = float(ren_hat.H[idx] / 100.0 ** 2)
    hat_ok = abs(hat_ratio - 0.2) <= 0.1 * 0.2

    up = make_updrift_birth_death(2.0, 1.0)
    cfg = SimConfig(seed=ctx.seed, n_steps=0, n_replicas=400, x_start=0,
                    backend=ctx.backend, stream_offset=8 << 20)
    ren_up = renewal_estimate(up, np.arange(1, 101), 20.0, cfg)
    up_ratio = float(ren_up.H[-1] / 100.0 ** 2)
    up_ok = abs(up_ratio - 1.0 / 3.0) <= 0.1 / 3.0
    dt = time.perf_counter() - t0
    ok = hat_ok and up_ok and dt < 600.0
    return CriterionResult(8, "renewal growth constants", ok,
                           {"hat_ratio": hat_ratio, "hat_target": 0.2,
                            "updrift_ratio": up_ratio,
                            "updrift_target": 1.0 / 3.0,
                            "tolerance_rel": 0.1,
                            "hat_stderr": float(ren_hat.stderr[idx] / 1e4),
                            "updrift_stderr": float(ren_up.stderr[-1] / 1e4),
                            "seconds": dt}, 0.0)


def _c9(ctx: VerifyContext) -> CriterionResult:
    up = make_updrift_birth_death(2.0, 1.0)
    grid = np.arange(0, 801, dtype=np.int64)
    cfg = SimConfig(seed=ctx.seed, n_steps=2_000_000, n_replicas=1000,
                    x_start=0, backend=ctx.backend, stream_offset=9 << 20)
    suite = passage_time_suite(up, [50, 100, 200], cfg, bounds_grid=grid)
    passage_ok = bool(np.all(suite.mc_means <= suite.bounds))

    pb = passage_bounds(up, grid)
    ret_cfg = SimConfig(seed=ctx.seed, n_steps=1_000_000, n_replicas=500,
                        backend=ctx.backend, stream_offset=10 << 20)
    ret = return_probability(up, ret_cfg, y_start=400, low=40)
    bound = pb.return_bound(40.0, 400.0)
    return_ok = ret.probability <= bound + 3.0 * ret.stderr
    ok = passage_ok and return_ok
    return CriterionResult(9, "passage-time and return bounds", ok,
                           {"levels": suite.levels.tolist(),
                            "mc_means": suite.mc_means.tolist(),
                            "bounds": suite.bounds.tolist(),
                            "censored": suite.censored_fraction.tolist(),
                            "return_probability": ret.probability,
                            "return_bound": bound, "delta": pb.delta,
                            "return_stderr": ret.stderr}, 0.0)


def _c10(ctx: VerifyContext) -> CriterionResult:
    pred = predict_constant(ctx.stat(2.0, 1.0), ctx.harm21(), ctx.tc21(),
                            ctx.ren_hat())
    fit = ctx.fit(2.0, 1.0)
    ratio = fit.c_empirical / pred.closed_form
    ok = 0.8 <= ratio <= 1.25
    return CriterionResult(10, "prefactor consistency", ok,
                           {"c_empirical": fit.c_empirical,
                            "c_predicted": pred.closed_form,
                            "ratio": float(ratio), "band": [0.8, 1.25],
                            "repres_value": pred.repres_value,
                            "repres_stderr": pred.repres_stderr,
                            "boundary_integral": pred.boundary_integral}, 0.0)


def _c11(ctx: VerifyContext) -> CriterionResult:
    chain = counterexample_chain()
    grid = np.arange(chain.boundary_x0 + 1, 2001, dtype=np.int64)
    mom = moments(chain, grid)
    ratios = 2.0 * grid * mom.m1 / mom.m2
    margin = float(ratios.min())
    ratio_ok = margin >= 1.05

    cfg = SimConfig(seed=ctx.seed, n_steps=10_000_000, n_replicas=1,
                    x_start=0, backend=ctx.backend, stream_offset=11 << 20)
    try:
        occ = stationary_occupation(chain, cfg, mark=0, min_cycles=100)
        cycles = occ.cycles_completed
        cycles_ok = True
    except RuntimeError as exc:
        cycles = int(str(exc).split()[1]) if str(exc).startswith("only") else 0
        cycles_ok = False
    ok = ratio_ok and cycles_ok
    return CriterionResult(11, "origin-jump recurrence vs ratio condition",
                           ok, {"cycles": int(cycles), "required": 100,
                                "n_steps": cfg.n_steps, "mark": 0,
                                "ratio_infimum": margin,
                                "ratio_required": 1.05,
                                "mu": _ORIGIN_MU, "b": _ORIGIN_B,
                                "f_scale": _ORIGIN_F_SCALE,
                                "p_scale": _ORIGIN_P_SCALE}, 0.0)


def _c12(ctx: VerifyContext) -> CriterionResult:
    chain = ctx.chain(2.0, 1.0)
    prod = ctx.stat(2.0, 1.0)
    gb = stationary_global_balance(chain, _TRUNC, check_doubling=False)
    pi_gap = float(np.max(np.abs(prod.pi - gb.pi)))
    tail_gap = float(np.max(np.abs(prod.tail - gb.tail)))
    solver_ok = pi_gap <= 1e-8 and tail_gap <= 1e-8

    cfg = SimConfig(seed=ctx.seed, n_steps=10_000_000, n_replicas=1,
                    x_start=0, backend=ctx.backend, stream_offset=12 << 20)
    occ = stationary_occupation(chain, cfg)
    freq = occ.frequencies
    lo = occ.hist_lo
    emp = np.zeros(51)
    span = min(50 - lo, len(freq) - 1)
    emp[lo: lo + span + 1] = freq[: span + 1]
    tv = 0.5 * float(np.abs(emp - prod.pi[:51]).sum())
    tv_ok = tv <= 0.01
    ok = solver_ok and tv_ok
    return CriterionResult(12, "cross-oracle stationary agreement", ok,
                           {"pi_gap": pi_gap, "tail_gap": tail_gap,
                            "solver_tolerance": 1e-8,
                            "occupation_tv": tv, "tv_tolerance": 0.01,
                            "cycles": occ.cycles_completed}, 0.0)


CRITERIA = {1: _c1, 2: _c2, 3: _c3, 4: _c4, 5: _c5, 6: _c6, 7: _c7,
            8: _c8, 9: _c9, 10: _c10, 11: _c11, 12: _c12}


def run_criterion(number: int, ctx: VerifyContext | None = None) -> CriterionResult:
    if number not in CRITERIA:
        raise ValueError(f"criterion number must be 1..12, got {number}")
    ctx = ctx or VerifyContext()
    t0 = time.perf_counter()
    result = CRITERIA[number](ctx)
    elapsed = time.perf_counter() - t0
    return CriterionResult(result.number, result.title, result.passed,
                           result.details, elapsed)


def run_all(numbers=None, backend: str | None = None,
            ctx: VerifyContext | None = None) -> list[CriterionResult]:
    ctx = ctx or VerifyContext(backend=backend)
    numbers = sorted(numbers) if numbers else sorted(CRITERIA)
    return [run_criterion(k, ctx) for k in numbers]
