"""Command-line surface: validate, classify, solve, harmonic, transform,
simulate, verify, and report.

Exit codes: 0 success, 1 a check or pipeline stage failed, 2 bad
configuration (including INI parse errors, reported with line numbers).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .assumptions import validate_assumptions
from .chains import moments
from .config import ConfigError, RunSettings, build_chain, load_settings
from .drift import classify
from .engine import BudgetExceededError, SimConfig, simulate
from .harmonic import harmonic_solve
from .io_utils import write_json, write_jsonl
from .pipeline import PipelineAbort, run_pipeline
from .rates import rate
from .stationary import stationary_global_balance, stationary_skip_free
from .transform import transform, transformed_moments
from .verification import VerifyContext, run_all

__all__ = ["main"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seed", type=int, help="override simulate.seed")
    p.add_argument("--trunc-N", dest="trunc_n", type=int,
                   help="override solve.trunc_n")
    p.add_argument("--out-dir", help="directory for artifacts")
    p.add_argument("--fit-window", nargs=2, type=int, metavar=("LO", "HI"),
                   help="override the tail fit window")
    p.add_argument("--gb-tol", type=float, help="override solve.gb_tol")
    p.add_argument("--backend", choices=("auto", "numpy", "numba"),
                   help="override simulate.backend")


def _settings(args) -> RunSettings:
    settings = load_settings(args.config) if args.config else RunSettings()
    if args.seed is not None:
        settings.simulate.seed = args.seed
    if args.trunc_n is not None:
        settings.solve.trunc_n = args.trunc_n
    if args.out_dir is not None:
        settings.report.out_dir = args.out_dir
    if args.fit_window is not None:
        settings.fit.window_lo, settings.fit.window_hi = args.fit_window
    if args.gb_tol is not None:
        settings.solve.gb_tol = args.gb_tol
    if args.backend is not None:
        settings.simulate.backend = args.backend
    return settings


def _diag_grid(chain, settings) -> np.ndarray:
    top = max(min(settings.solve.trunc_n, 2000), chain.boundary_x0 + 64)
    return np.arange(chain.boundary_x0 + 1, top + 1, dtype=np.int64)


def _out(settings, name: str) -> str:
    os.makedirs(settings.report.out_dir, exist_ok=True)
    return os.path.join(settings.report.out_dir, name)


def _cmd_validate(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    checks = validate_assumptions(chain, _diag_grid(chain, settings))
    for c in checks:
        flag = "ok " if c.passed else "FAIL"
        print(f"[{flag}] {c.name}: value={c.value:.6g} {c.note}")
    if args.out_dir:
        write_json(_out(settings, "assumptions.json"),
                   [c.as_dict() for c in checks])
    return 0 if all(c.passed for c in checks) else 1


def _cmd_classify(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    rep = classify(chain, _diag_grid(chain, settings))
    print(f"classification: {rep.classification} (epsilon={rep.epsilon:.6g})")
    for key, val in rep.detail.items():
        print(f"  {key}: {val}")
    if args.out_dir:
        rep.write_csv(_out(settings, "drift.csv"))
        write_json(_out(settings, "classify.json"), rep.summary())
    return 0


def _cmd_solve(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    n = settings.solve.trunc_n
    method = settings.solve.method
    if method == "auto":
        method = "product" if chain.max_up == 1 else "global_balance"
    if method == "product":
        stat = stationary_skip_free(chain, n)
    else:
        stat = stationary_global_balance(chain, n, tol=settings.solve.gb_tol)
    print(f"method={stat.method} residual={stat.residual:.3e} "
          f"tail_mass_bound={stat.tail_mass_bound:.3e}")
    stat.write_csv(_out(settings, "stationary.csv"))
    print(f"wrote {_out(settings, 'stationary.csv')}")
    return 0


def _cmd_harmonic(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    harm = harmonic_solve(chain, rate(chain), n=settings.solve.trunc_n)
    interior = harm.residual[~np.isnan(harm.residual)]
    print(f"max interior residual: {float(interior.max()):.3e}")
    print(f"c0 empirical: {harm.c0_empirical:.6g} (target {harm.c0_target})")
    print(f"doubling shift: {harm.doubling_shift:.3e}")
    harm.write_csv(_out(settings, "harmonic.csv"))
    print(f"wrote {_out(settings, 'harmonic.csv')}")
    return 0


def _cmd_transform(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    n = settings.solve.trunc_n
    method = "product" if chain.max_up == 1 else "global_balance"
    if settings.solve.method != "auto":
        method = settings.solve.method
    stat = (stationary_skip_free(chain, n) if method == "product"
            else stationary_global_balance(chain, n, tol=settings.solve.gb_tol))
    harm = harmonic_solve(chain, rate(chain), n=n)
    tc = transform(chain, harm, stat=stat)
    xs = [tc.boundary_x0 + 1, min(200, n // 2), min(500, n - chain.max_up)]
    worst = max(abs(tc.raw_row_sum(x) - 1.0) for x in xs)
    print(f"max |row sum - 1| on probes {xs}: {worst:.3e}")
    top = min(harm.x0 + 40, n - chain.max_up)
    tc.write_kernel_csv(_out(settings, "hat_kernel.csv"), harm.x0 + 1, top)
    grid = np.arange(harm.x0 + 1, min(n - chain.max_up, 2048) + 1)
    transformed_moments(tc, grid).write_csv(_out(settings, "hat_moments.csv"))
    print(f"wrote {_out(settings, 'hat_kernel.csv')} and hat_moments.csv")
    return 0


def _cmd_simulate(args) -> int:
    settings = _settings(args)
    chain = build_chain(settings.chain)
    sim = settings.simulate
    cfg = SimConfig(seed=sim.seed, n_steps=sim.n_steps,
                    n_replicas=sim.n_replicas, x_start=sim.x_start,
                    record_stride=sim.record_stride,
                    backend=None if sim.backend == "auto" else sim.backend)
    batch = simulate(chain, cfg)
    finals = batch.final_states
    print(f"{cfg.n_replicas} replicas x {cfg.n_steps} steps: "
          f"final mean={float(finals.mean()):.3f} max={int(finals.max())}")
    path = _out(settings, "trajectories.jsonl")
    write_jsonl(path, batch.records())
    print(f"wrote {path}")
    return 0


def _cmd_verify(args) -> int:
    settings = _settings(args)
    numbers = None
    if args.criteria:
        numbers = sorted({int(tok) for tok in args.criteria.split(",")})
    backend = settings.simulate.backend
    ctx = VerifyContext(backend=None if backend == "auto" else backend,
                        seed=settings.simulate.seed)
    results = run_all(numbers, ctx=ctx)
    for res in results:
        print(res.line())
    if args.out_dir:
        write_json(_out(settings, "verify.json"),
                   [{"number": r.number, "title": r.title, "passed": r.passed,
                     "seconds": r.seconds, "details": r.details}
                    for r in results])
    failed = [r.number for r in results if not r.passed]
    if failed:
        print(f"FAILED criteria: {failed}")
        return 1
    print("all criteria passed")
    return 0


def _cmd_report(args) -> int:
    settings = _settings(args)
    try:
        result = run_pipeline(settings)
    except PipelineAbort as exc:
        print(f"pipeline aborted: {exc}", file=sys.stderr)
        return 1
    for stage in result.summary["stages"]:
        note = stage.get("note", "")
        print(f"stage {stage['name']}: {stage['status']} {note}".rstrip())
    print(f"classification: {result.summary.get('classification')}")
    print(f"overall: {'pass' if result.overall_pass else 'fail'}")
    print(f"artifacts in {result.out_dir}")
    return 0 if result.overall_pass else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lamperti",
        description="Stationary tail analysis for chains with asymptotically "
                    "zero drift")
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {}
    for name, fn, extra in (
            ("validate", _cmd_validate, None),
            ("classify", _cmd_classify, None),
            ("solve", _cmd_solve, None),
            ("harmonic", _cmd_harmonic, None),
            ("transform", _cmd_transform, None),
            ("simulate", _cmd_simulate, None),
            ("verify", _cmd_verify, "criteria"),
            ("report", _cmd_report, None)):
        p = sub.add_parser(name)
        _add_common(p)
        if extra == "criteria":
            p.add_argument("--criteria",
                           help="comma-separated criterion numbers, e.g. 1,3,10")
        handlers[name] = fn

    args = parser.parse_args(argv)
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceededError as exc:
        print(f"event budget exceeded: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
