"""Monte Carlo engine: budget, gamma limit, renewal counts, passage, occupation."""

import numpy as np
import pytest

from lamperti import (BudgetExceededError, EventLedger, SimConfig,
                      gamma_limit_test, passage_time_suite, renewal_estimate,
                      return_probability, simulate, stationary_occupation)
from lamperti.chains import (ChainSpec, DriftProfile, JumpLaw,
                             make_birth_death, make_origin_jump_chain,
                             make_reflected_walk, make_updrift_birth_death)


def frozen_chain():
    """Absorbing-in-place walk: every law is 'stay put'."""
    profile = DriftProfile(mu=1.0, b=1.0, drift_sign=-1)
    return ChainSpec(lambda x: JumpLaw((0,), (1.0,)), profile,
                     boundary_x0=1, family_tag="frozen", max_up=0)


def ballistic_chain():
    """Linear-drift walk; its X_n**2/n is nothing like a gamma sample."""
    profile = DriftProfile(mu=2.0, b=1.0, drift_sign=1)

    def law_fn(x):
        if x == 0:
            return JumpLaw((0, 1), (0.25, 0.75))
        return JumpLaw((-1, 1), (0.25, 0.75))

    return ChainSpec(law_fn, profile, boundary_x0=1,
                     family_tag="ballistic", max_up=1)


def test_frozen_chain_stays_put():
    batch = simulate(frozen_chain(), SimConfig(seed=4, n_steps=50,
                                               n_replicas=64, x_start=7))
    np.testing.assert_array_equal(batch.final_states, 7)


def test_snapshots_cover_stride_grid():
    chain = make_updrift_birth_death(2.0, 1.0)
    cfg = SimConfig(seed=31, n_steps=2000, n_replicas=50, x_start=30,
                    record_stride=300)
    batch = simulate(chain, cfg)
    assert batch.snapshot_times == (300, 600, 900, 1200, 1500, 1800, 2000)
    assert batch.snapshots.shape == (7, 50)
    np.testing.assert_array_equal(batch.snapshots[-1], batch.final_states)
    recs = list(batch.records())
    assert len(recs) == 50 and recs[0]["snapshot_times"] == list(
        batch.snapshot_times)


def test_event_budget_from_env(monkeypatch):
    monkeypatch.setenv("LAMPERTI_MAX_EVENTS", "1000")
    cfg = SimConfig(seed=1, n_steps=100, n_replicas=100)
    with pytest.raises(BudgetExceededError):
        simulate(make_birth_death(2.0, 1.0), cfg)


def test_event_budget_rejects_garbage(monkeypatch):
    monkeypatch.setenv("LAMPERTI_MAX_EVENTS", "plenty")
    with pytest.raises(ValueError):
        EventLedger()


def test_gamma_limit_on_updrift_chain():
    chain = make_updrift_birth_death(2.0, 1.0)
    cfg = SimConfig(seed=3, n_steps=20000, n_replicas=800, x_start=0)
    rep = gamma_limit_test(chain, cfg)
    assert rep.shape == pytest.approx(2.5)
    assert rep.scale == pytest.approx(2.0)
    assert rep.limit_mean == pytest.approx(5.0)
    assert rep.statistic <= 0.05
    assert rep.mean_err <= 0.05


def test_gamma_limit_on_driftless_walk():
    # mu = 0 is the degenerate corner: shape 1/2, chi-squared with one
    # degree of freedom
    chain = make_reflected_walk(1.0)
    cfg = SimConfig(seed=3, n_steps=20000, n_replicas=800, x_start=0)
    rep = gamma_limit_test(chain, cfg)
    assert rep.shape == pytest.approx(0.5)
    assert rep.scale == pytest.approx(2.0)
    assert rep.statistic <= 0.05
    assert rep.mean_err <= 0.06


def test_gamma_test_has_power():
    # ballistic growth must be flagged, otherwise the KS gate is vacuous
    cfg = SimConfig(seed=3, n_steps=2000, n_replicas=400, x_start=0)
    rep = gamma_limit_test(ballistic_chain(), cfg)
    assert rep.statistic >= 0.5
    assert rep.pvalue < 1e-6


def test_gamma_test_rejects_inward_drift(bd21):
    with pytest.raises(ValueError, match="outward"):
        gamma_limit_test(bd21, SimConfig(seed=3, n_steps=100, n_replicas=10))


def test_renewal_counts_monotone():
    chain = make_updrift_birth_death(2.0, 1.0)
    cfg = SimConfig(seed=17, n_replicas=200)
    est = renewal_estimate(chain, np.arange(1, 101), 20.0, cfg)
    assert (np.diff(est.H) >= 0.0).all()
    assert est.horizon == 20 * 100 ** 2
    assert (est.stderr >= 0.0).all()


def test_renewal_guards():
    chain = make_updrift_birth_death(2.0, 1.0)
    cfg = SimConfig(seed=17, n_replicas=50)
    with pytest.raises(ValueError, match="horizon_factor"):
        renewal_estimate(chain, np.arange(1, 51), 10.0, cfg)
    with pytest.raises(ValueError, match="floor"):
        renewal_estimate(chain, np.arange(-3, 51), 20.0, cfg)
    with pytest.raises(ValueError, match="outward"):
        renewal_estimate(make_birth_death(2.0, 1.0), np.arange(1, 51),
                         20.0, cfg)


def test_renewal_uniform_in_start():
    # the walk is diffusive, so visit counts below x scale like x**2;
    # the bound must hold uniformly over the launch point, and the
    # x=100 ratio settles near 1/3 for this family
    chain = make_updrift_birth_death(2.0, 1.0)
    grid = np.arange(1, 101)
    for i, y in enumerate((0, 5, 10, 20, 40)):
        cfg = SimConfig(seed=17, n_replicas=200, stream_offset=i << 16)
        est = renewal_estimate(chain, grid, 20.0, cfg,
                               starts=np.full(200, y, dtype=np.int64))
        ratios = est.H / grid.astype(float) ** 2
        # the x=1 cell from a start inside it is the worst case (5.24)
        assert float(ratios.max()) <= 6.0
        assert 0.2 <= float(est.H[-1]) / 100.0 ** 2 <= 0.45


def test_occupation_matches_exact_pi(bd21, stat21):
    cfg = SimConfig(seed=9, n_steps=1_000_000)
    rep = stationary_occupation(bd21, cfg)
    freqs = rep.frequencies[:51]
    tv = 0.5 * float(np.abs(freqs - stat21.pi[:51]).sum())
    assert tv <= 0.01
    assert rep.cycles_completed == 3030
    assert rep.mark == bd21.boundary_x0


def test_occupation_rejects_transient_chain():
    chain = make_updrift_birth_death(3.0, 1.0)
    cfg = SimConfig(seed=2, n_steps=200_000)
    with pytest.raises(RuntimeError, match="regeneration cycles"):
        stationary_occupation(chain, cfg, mark=0)


def test_occupation_on_origin_jump_family():
    base = make_updrift_birth_death(2.7, 0.3)
    chain = make_origin_jump_chain(
        base,
        f_choice=lambda x: 4.2 * base.law(x).moment(2) / x,
        p_choice=lambda x: 1.25 / (1.0 + x))
    cfg = SimConfig(seed=24245, n_steps=1_000_000)
    rep = stationary_occupation(chain, cfg, mark=0, hist_hi=4096)
    assert rep.cycles_completed == 7629
    assert rep.n_steps / rep.cycles_completed < 1000.0


def test_passage_suite_respects_bounds():
    chain = make_updrift_birth_death(3.0, 1.0)
    cfg = SimConfig(seed=19, n_steps=200_000, n_replicas=1500, x_start=0)
    rep = passage_time_suite(chain, [60, 100], cfg)
    assert rep.within.all()
    assert (rep.censored_fraction == 0.0).all()
    assert (rep.tail_slopes < 0.0).all()
    assert bool(rep.tail_concave[0])
    np.testing.assert_allclose(
        rep.mc_means, [534.8526666666667, 1447.9], rtol=1e-12)


def test_passage_deterministic_escalator():
    # always step up: T(level) from 0 is exactly level + 1 steps
    profile = DriftProfile(mu=2.0, b=1.0, drift_sign=1)
    chain = ChainSpec(lambda x: JumpLaw((1,), (1.0,)), profile,
                      boundary_x0=1, family_tag="escalator", max_up=1)
    cfg = SimConfig(seed=1, n_steps=500, n_replicas=16, x_start=0)
    rep = passage_time_suite(chain, [10], cfg)
    assert float(rep.mc_means[0]) == 11.0
    assert float(rep.mc_stderrs[0]) == 0.0


def test_return_probability_counts_hits():
    chain = make_updrift_birth_death(3.0, 1.0)
    cfg = SimConfig(seed=23, n_steps=5000, n_replicas=400)
    est = return_probability(chain, cfg, y_start=80, low=2)
    assert est.n_hits == 0
    assert est.probability == 0.0
    assert est.stderr > 0.0
