"""Lyapunov drift evaluation, classification, and passage-time certificates."""

import numpy as np
import pytest

from lamperti import (classify, drift, log_drift_check, make_birth_death,
                      make_origin_jump_chain, make_reflected_walk,
                      make_updrift_birth_death, passage_bounds)


def tuned_origin_chain():
    base = make_updrift_birth_death(2.7, 0.3)
    return make_origin_jump_chain(
        base,
        f_choice=lambda x: 4.2 * base.law(x).moment(2) / x,
        p_choice=lambda x: 1.25 / (1.0 + x))


def test_drift_of_identity_is_mean_jump():
    chain = make_birth_death(1.0, 1.0)
    val = drift(chain, lambda v: v.astype(float), np.array([10]))
    assert val[0] == pytest.approx(-0.1, abs=1e-14)


def test_drift_of_constant_is_zero():
    chain = make_birth_death(1.0, 1.0)
    val = drift(chain, lambda v: np.ones(len(v)), np.array([3, 10, 500]))
    np.testing.assert_array_equal(val, 0.0)


def test_drift_of_square_matches_moment_identity():
    # E[(x+xi)^2] - x^2 = 2 x m1 + m2 = -4 + 1 at mu=2, b=1
    chain = make_birth_death(2.0, 1.0)
    val = drift(chain, lambda v: v.astype(float) ** 2, np.array([100]))
    assert val[0] == pytest.approx(-3.0, abs=1e-10)


def test_classify_birth_death_positive_recurrent(bd21, diag_grid):
    rep = classify(bd21, diag_grid)
    assert rep.classification == "positive_recurrent"
    # 2 x m1 + m2 = 1 - 2 mu = -3 exactly beyond the clip
    assert rep.epsilon == pytest.approx(3.0, abs=1e-9)
    interior = ~np.isnan(rep.normalized)
    assert interior.any()


def test_classify_updrift_transient(diag_grid):
    rep = classify(make_updrift_birth_death(2.0, 1.0), diag_grid)
    assert rep.classification == "transient"
    # mean/variance ratio 2 x m1 / m2 = 4 on the tail, margin 3
    assert rep.detail["ratio_margin"] == pytest.approx(3.0, abs=1e-9)
    assert rep.detail["down_jump_check"] is True
    assert rep.detail["down_jump_extrapolated"] is False


def test_classify_driftless_walk_inconclusive(diag_grid):
    rep = classify(make_reflected_walk(1.0), diag_grid)
    assert rep.classification == "inconclusive"


def test_classify_origin_jump_recurrent_via_log_test():
    # positive drift, but the reset mass breaks the down-jump comparison;
    # the logarithmic test then certifies plain recurrence
    chain = tuned_origin_chain()
    rep = classify(chain, np.arange(chain.boundary_x0 + 1, 2001))
    assert rep.classification == "recurrent"
    assert rep.detail["certificate"] == "log_drift"
    assert rep.detail["down_jump_check"] is False
    assert rep.detail["log_drift_max"] < 0.0


def test_log_drift_negative_on_far_grid():
    chain = tuned_origin_chain()
    ld = log_drift_check(chain, np.arange(900, 1101))
    assert float(ld.max()) < 0.0


def test_classify_rejects_short_grid(bd21):
    with pytest.raises(ValueError, match="grid too short"):
        classify(bd21, np.arange(5, 10))


def test_passage_bounds_delta_one_return_bound():
    # mu=3, b=1: ratio margin 5 admits the unit exponent
    pb = passage_bounds(make_updrift_birth_death(3.0, 1.0), np.arange(1, 801))
    assert pb.delta == 1.0
    assert pb.return_bound(10.0, 100.0) == pytest.approx(0.1, abs=1e-12)
    assert pb.eps == pytest.approx(7.0, abs=1e-9)


def test_passage_bounds_smaller_margin_smaller_delta():
    pb = passage_bounds(make_updrift_birth_death(2.0, 1.0), np.arange(1, 801))
    assert pb.delta == 0.5
    assert pb.return_bound(40.0, 400.0) == pytest.approx(0.1 ** 0.5, rel=1e-12)


def test_return_bound_argument_order():
    pb = passage_bounds(make_updrift_birth_death(3.0, 1.0), np.arange(1, 801))
    with pytest.raises(ValueError):
        pb.return_bound(100.0, 10.0)
    with pytest.raises(ValueError):
        pb.return_bound(0.0, 10.0)


def test_mean_bound_formula():
    pb = passage_bounds(make_updrift_birth_death(3.0, 1.0), np.arange(1, 801))
    x, y, visits = 50.0, 0.0, 12.0
    expected = ((x + pb.jump_sup) ** 2 - y * y
                + (pb.eps + pb.eps0) * visits) / pb.eps
    assert pb.mean_bound(x, y, visits) == pytest.approx(expected, rel=1e-12)


def test_mean_bound_floor_at_one():
    # T(x) >= 1 always, so the degenerate x=y case must not undercut 1
    pb = passage_bounds(make_updrift_birth_death(3.0, 1.0), np.arange(1, 801))
    assert pb.mean_bound(1.0, 1.0) == 1.0
    assert pb.mean_bound(30.0, 30.0) >= 1.0


def test_passage_bounds_reject_inward_drift(bd21):
    with pytest.raises(ValueError):
        passage_bounds(bd21, np.arange(1, 801))
