"""Model-assumption diagnostics on honest and broken chains."""

import numpy as np
import pytest

from lamperti import validate_assumptions
from lamperti.chains import (ChainSpec, DriftProfile, JumpLaw,
                             make_origin_jump_chain,
                             make_updrift_birth_death)


def check_map(chain, grid=None, **kw):
    if grid is None:
        grid = np.arange(chain.boundary_x0 + 1, 2001)
    return {c.name: c for c in validate_assumptions(chain, grid, **kw)}


def test_birth_death_passes_everything(bd21):
    checks = check_map(bd21)
    assert set(checks) == {"third_moment_margin", "drift_rate_match",
                           "large_jump_moment", "interior_escape_paths"}
    for c in checks.values():
        assert c.passed, c.note


def test_drift_rate_match_weight_converges(bd21):
    # the weighted mismatch sup saturates at 2*mu/b * x^2/(1+x^2) -> 4
    checks = check_map(bd21)
    assert checks["drift_rate_match"].value == pytest.approx(4.0, abs=1e-6)


def test_raw_rate_mismatch_identity(bd21, rf21):
    # for the closed-form family, |2 m1/m2 + r| equals (2mu/b)/(x(1+x^2))
    from lamperti.chains import moments
    xs = np.arange(10, 1001)
    mom = moments(bd21, xs)
    mismatch = np.abs(2.0 * mom.m1 / mom.m2 + rf21.r(xs))
    exact = 4.0 / (xs * (1.0 + xs.astype(float) ** 2))
    np.testing.assert_allclose(mismatch, exact, rtol=0, atol=1e-14)


def growing_cap_pareto():
    """Heavy down-tail reaching all the way to the origin.

    Down-jump weights k**-3.5 cancel |xi|**3.5 exactly, so the absolute
    moment grows like the number of reachable sites below x instead of
    staying bounded. That is what the moment margin check must flag.
    A fixed truncation would hide the growth behind a constant.
    """
    laws = {}

    def law(x):
        if x not in laws:
            ks = np.arange(2, x + 1)
            w = ks.astype(float) ** -3.5
            w = 0.55 * w / w.sum()
            offsets = [-1] + [-int(k) for k in ks]
            probs = [0.45] + list(w)
            laws[x] = JumpLaw(tuple(offsets), tuple(probs))
        return laws[x]

    profile = DriftProfile(mu=0.0, b=1.0, drift_sign=-1)
    return ChainSpec(law_fn=law, profile=profile, boundary_x0=8,
                     family_tag="pareto_down", max_up=0,
                     bounded_jumps=False)


def test_growing_heavy_tail_fails_moment_margin():
    # E|xi|**3.5 ~ 0.55 (x-1)/zeta_tail grows linearly along the grid
    checks = check_map(growing_cap_pareto(), grid=np.arange(9, 1201))
    c = checks["third_moment_margin"]
    assert not c.passed
    assert c.extrapolated
    assert c.value > 1e2


def test_origin_jump_fails_by_design():
    base = make_updrift_birth_death(2.7, 0.3)
    chain = make_origin_jump_chain(
        base,
        f_choice=lambda x: 4.2 * base.law(x).moment(2) / x,
        p_choice=lambda x: 1.25 / (1.0 + x))
    checks = check_map(chain)
    assert not checks["third_moment_margin"].passed
    assert not checks["down_jump_negligible"].passed
    # the drift-side checks are specific to the inward-drift regime
    assert "drift_rate_match" not in checks


def test_updrift_down_jump_check_passes(diag_grid):
    checks = check_map(make_updrift_birth_death(2.0, 1.0))
    c = checks["down_jump_negligible"]
    assert c.passed
    assert not c.extrapolated


def test_grid_must_cover_enough_states(bd21):
    with pytest.raises(ValueError, match="grid too short"):
        validate_assumptions(bd21, np.arange(10, 14))
