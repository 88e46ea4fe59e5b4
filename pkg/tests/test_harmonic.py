"""Killed-kernel harmonic function and its comparison against the reference."""

import numpy as np
import pytest

from lamperti import (harmonic_identity_check, harmonic_solve,
                      make_left_skip_free, rate, skip_free_sandwich_check,
                      u_c_drift, u_equivalence_check)


def test_residual_tiny(harm21):
    # rows whose defining equation leaves the window carry NaN
    interior = harm21.residual[~np.isnan(harm21.residual)]
    assert float(np.abs(interior).max()) <= 1e-9


def test_matches_reference_growth(harm21):
    # V ~ U at the window's far end
    ratio = harm21.v[500] / harm21.u_ref[500]
    assert 0.95 <= ratio <= 1.05


def test_correction_term_is_small(harm21):
    # V - U = c0 * exp(R) + o(exp R); for this family c0 is almost zero
    gap = abs(harm21.v[500] - harm21.u_ref[500]) / harm21.exp_r[500]
    assert gap <= 0.05
    assert abs(harm21.c0_empirical) < 1e-4


def test_doubling_stability(harm21):
    assert harm21.doubling_shift < 1e-3


def test_multi_step_harmonicity(harm21, bd21):
    errs = harmonic_identity_check(harm21, bd21, steps=[0, 1, 20],
                                   window_hi=1500)
    assert errs[0] == 0.0
    assert errs[1] <= 1e-9
    assert errs[20] <= 1e-7


def test_v_at_vector_lookup(harm21):
    got = harm21.v_at(np.array([10, 500]))
    np.testing.assert_array_equal(
        got, np.array([harm21.v[10], harm21.v[500]]))


def test_u_c_drift_signs(bd21, rf21):
    # normalized drift of U + c*exp(R) converges to -2c; the c = 0 line
    # sits within the o(1) band
    assert u_c_drift(bd21, rf21, 500, -1.0) == pytest.approx(2.0, abs=0.2)
    assert abs(u_c_drift(bd21, rf21, 500, 0.0)) <= 0.2
    assert u_c_drift(bd21, rf21, 500, 1.0) == pytest.approx(-2.0, abs=0.2)


def test_u_c_drift_needs_interior_state(bd21, rf21):
    with pytest.raises(ValueError, match="above x0"):
        u_c_drift(bd21, rf21, rf21.x0, 0.0)


def test_u_equivalence_same_reference(bd21, rf21):
    rep = u_equivalence_check(bd21, rf21, 2000, lambda g: rf21.U_grid(g))
    assert rep["sup_abs_diff"] == 0.0


def test_u_equivalence_perturbed_reference(bd21, rf21):
    # multiplying U by 1 + 1/(1+x) leaves the solution within a 1e-3
    # relative wobble of the standard one
    def alt(g):
        return rf21.U_grid(g) * (1.0 + 1.0 / (1.0 + g))

    rep = u_equivalence_check(bd21, rf21, 2000, alt)
    assert rep["sup_rel_to_peak"] <= 1e-3


def test_u_equivalence_detects_rescaling(bd21, rf21):
    # 2U solves to 2V: the spread equals the peak itself
    rep = u_equivalence_check(bd21, rf21, 2000, lambda g: 2.0 * rf21.U_grid(g))
    assert rep["sup_rel_to_peak"] == pytest.approx(1.0, abs=1e-12)


def test_u_equivalence_shape_guard(bd21, rf21):
    with pytest.raises(ValueError, match="shape"):
        u_equivalence_check(bd21, rf21, 2000, lambda g: rf21.U_grid(g[:-1]))


def test_skip_free_sandwich():
    lsf = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    rf = rate(lsf)
    harm = harmonic_solve(lsf, rf, n=2000)
    rep = skip_free_sandwich_check(lsf, rf, harm,
                                   xs=[200, 300, 400, 500],
                                   ys=[0, 50, 100, 150])
    assert rep.holds
    assert rep.n_pairs == 16
    assert rep.c1 > rep.c2
    assert rep.c1 == pytest.approx(0.873157663415829, rel=1e-9)
    assert rep.c2 == pytest.approx(0.1632634717420652, rel=1e-9)
    assert rep.worst_low >= 0.0
    assert rep.worst_high >= 0.0


def test_sandwich_rejects_wide_down_jumps(bd21, rf21, harm21):
    import dataclasses

    from lamperti.chains import JumpLaw

    def wide_law(x):
        if x >= 2:
            return JumpLaw((-2, 1), (0.5, 0.5))
        return JumpLaw((0, 1), (0.5, 0.5))

    wide = dataclasses.replace(bd21, law_fn=wide_law)
    with pytest.raises(ValueError, match="skip-free"):
        skip_free_sandwich_check(wide, rf21, harm21,
                                 xs=[200, 300], ys=[0, 50])
