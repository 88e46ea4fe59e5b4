"""Chain families: pinned law values, moment targets, and validation."""

import math
import warnings

import numpy as np
import pytest

from lamperti import (ChainSpec, DriftProfile, JumpLaw, make_birth_death,
                      make_left_skip_free, make_origin_jump_chain,
                      make_reflected_walk, make_updrift_birth_death, moments)


def law_dict(law):
    return {int(o): p for o, p in zip(law.offsets, law.probs)}


def test_birth_death_interior_law():
    chain = make_birth_death(1.0, 1.0)
    d = law_dict(chain.law(10))
    assert d[1] == pytest.approx(0.45, abs=1e-15)
    assert d[-1] == pytest.approx(0.55, abs=1e-15)
    assert d[0] == pytest.approx(0.0, abs=1e-15)


def test_birth_death_boundary_law():
    d = law_dict(make_birth_death(1.0, 1.0).law(0))
    assert d == {0: pytest.approx(0.5), 1: pytest.approx(0.5)}


def test_birth_death_clip_region():
    # mu=2, b=1 puts the clip at 4, so x=4 uses its own denominator
    d = law_dict(make_birth_death(2.0, 1.0).law(4))
    assert d[1] == pytest.approx(0.25)
    assert d[-1] == pytest.approx(0.75)
    # below the clip the denominator freezes at the clip point
    assert law_dict(make_birth_death(2.0, 1.0).law(2)) == d


def test_birth_death_moments_match_profile():
    chain = make_birth_death(1.0, 1.0)
    law = chain.law(10)
    assert law.moment(1) == pytest.approx(-0.1, abs=1e-14)
    assert law.moment(2) == pytest.approx(1.0, abs=1e-14)


def test_birth_death_third_moment_equals_first():
    # jumps are +-1, so odd moments coincide
    chain = make_birth_death(2.0, 1.0)
    mom = moments(chain, np.arange(4, 300))
    np.testing.assert_allclose(mom.m3, mom.m1, atol=1e-15)


def test_updrift_mirrors_downdrift():
    up = make_updrift_birth_death(2.0, 1.0)
    assert up.law(100).moment(1) == pytest.approx(2.0 / 100, abs=1e-14)
    assert up.profile.drift_sign == 1


def test_reflected_walk_is_driftless():
    chain = make_reflected_walk(0.8)
    law = chain.law(5)
    assert law.moment(1) == 0.0
    assert law.moment(2) == pytest.approx(0.8)


@pytest.mark.parametrize("family", [
    make_birth_death(2.0, 1.0),
    make_updrift_birth_death(3.0, 1.0),
    make_left_skip_free(2.0, 1.0, 0.2, 0.8),
    make_reflected_walk(1.0),
])
def test_laws_are_probability_vectors(family):
    rng = np.random.default_rng(6021)
    for x in rng.integers(0, 5000, size=100):
        law = family.law(int(x))
        assert math.fsum(law.probs.tolist()) == pytest.approx(1.0, abs=1e-12)
        assert law.probs.min() >= 0.0
        assert (int(x) + law.offsets).min() >= 0


def test_moments_against_brute_force():
    chain = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    rng = np.random.default_rng(99)
    grid = np.unique(rng.integers(1, 3000, size=40))
    mom = moments(chain, grid)
    for i, x in enumerate(grid):
        law = chain.law(int(x))
        for power, col in ((1, mom.m1), (2, mom.m2), (3, mom.m3)):
            ref = sum(p * o ** power for o, p in zip(law.offsets.tolist(),
                                                     law.probs.tolist()))
            assert col[i] == pytest.approx(ref, abs=1e-12)


def test_left_skip_free_weights_solve_the_moment_system():
    # oracle: solve the 3x3 linear system for weights on (-1, +1, +2)
    # matching (m1, m2, m3) and compare with the family's law
    chain = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    system = np.array([[-1.0, 1.0, 2.0],
                       [1.0, 1.0, 4.0],
                       [-1.0, 1.0, 8.0]])
    for x in (400, 401):
        target = np.array([-2.0 / x, 1.0, (0.2, 0.8)[x % 2]])
        expected = np.linalg.solve(system, target)
        d = law_dict(chain.law(x))
        got = np.array([d[-1], d[1], d[2]])
        np.testing.assert_allclose(got, expected, atol=1e-14)


def test_left_skip_free_alternating_third_moment():
    chain = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    assert chain.law(1000).moment(3) == pytest.approx(0.2, abs=1e-10)
    assert chain.law(1001).moment(3) == pytest.approx(0.8, abs=1e-10)
    assert chain.law(1000).moment(2) == pytest.approx(1.0, abs=1e-10)
    assert chain.law(1001).moment(1) == pytest.approx(-2.0 / 1001, abs=1e-10)
    assert chain.profile.m3_mode == "alternating"


def test_left_skip_free_equal_targets_degenerate():
    chain = make_left_skip_free(2.0, 1.0, 0.5, 0.5)
    assert chain.profile.m3_mode == "constant"
    assert chain.law(600).moment(3) == pytest.approx(0.5, abs=1e-12)
    assert chain.law(601).moment(3) == pytest.approx(0.5, abs=1e-12)


def test_left_skip_free_rejects_infeasible_targets():
    # m3=1.5 with m2=1 would need a negative weight on +1 at every state
    with pytest.raises(ValueError, match="infeasible"):
        make_left_skip_free(2.0, 1.0, 0.5, 1.5)


def test_left_skip_free_never_jumps_two_down():
    chain = make_left_skip_free(2.0, 1.0, 0.2, 0.8)
    for x in (0, 1, 20, 21, 500):
        assert chain.law(x).offsets.min() >= -1
    assert chain.max_up == 2


def _tuned_origin_chain(f_scale=4.2, p_scale=1.25):
    base = make_updrift_birth_death(2.7, 0.3)
    return make_origin_jump_chain(
        base,
        f_choice=lambda x: f_scale * base.law(x).moment(2) / x,
        p_choice=lambda x: p_scale / (1.0 + x))


def test_origin_jump_reset_mass_decays():
    chain = _tuned_origin_chain()
    scale = chain.params["reset_scale"]
    for x in (100, 1000):
        q = law_dict(chain.law(x))[-x]
        # q(x) = f(x) p(x) ~ reset_scale / x^2
        assert q == pytest.approx(scale / x ** 2, rel=0.02)
    assert chain.params["reset_clip_hi"] == 0


def test_origin_jump_clips_overflowing_reset_with_warning():
    with pytest.warns(UserWarning, match=r"exceeds 1 on \[1, 1\].*clipped"):
        chain = _tuned_origin_chain(f_scale=6.0)
    assert chain.params["reset_clip_hi"] == 1
    # at the clipped state the reset is certain
    assert law_dict(chain.law(1))[-1] == pytest.approx(1.0)


def test_origin_jump_rejects_drift_swallowing_reset():
    base = make_updrift_birth_death(2.7, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError, match="swallows the outward drift"):
            make_origin_jump_chain(base,
                                   f_choice=lambda x: 12.0 / x,
                                   p_choice=lambda x: 1.25 / (1.0 + x))


def test_origin_jump_rejects_negative_drift_base():
    with pytest.raises(ValueError, match="positive-drift base"):
        make_origin_jump_chain(make_birth_death(2.0, 1.0))


def test_origin_jump_default_scales_shift_the_profile():
    # the reset at rate m2/(x(1+x)) moves mu down by b and m2 up by b
    chain = make_origin_jump_chain(make_updrift_birth_death(2.0, 1.0))
    assert chain.profile.mu == pytest.approx(1.0, abs=1e-5)
    assert chain.profile.b == pytest.approx(2.0, abs=1e-5)
    assert not chain.bounded_jumps
    assert chain.profile.m3_mode == "divergent"


def test_jump_law_validation():
    with pytest.raises(ValueError, match="sum to"):
        JumpLaw(np.array([0, 1]), np.array([0.6, 0.6]))
    with pytest.raises(ValueError, match="duplicate"):
        JumpLaw(np.array([0, 0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError, match="negative"):
        JumpLaw(np.array([0, 1]), np.array([-0.1, 1.1]))


def test_drift_profile_validation():
    with pytest.raises(ValueError):
        DriftProfile(mu=-1.0, b=1.0)
    with pytest.raises(ValueError):
        DriftProfile(mu=1.0, b=0.0)
    with pytest.raises(ValueError):
        DriftProfile(mu=1.0, b=1.0, m3_mode="alternating", m3_values=(0.5,))
    with pytest.raises(ValueError):
        DriftProfile(mu=1.0, b=1.0, drift_sign=0)


def test_chain_rejects_mass_below_zero():
    bad = ChainSpec(lambda x: JumpLaw([-2, 1], [0.5, 0.5]),
                    DriftProfile(mu=1.0, b=1.0), boundary_x0=1,
                    family_tag="bad", max_up=1)
    with pytest.raises(ValueError, match="below zero"):
        bad.law(1)


def test_chain_rejects_negative_state():
    with pytest.raises(ValueError, match="negative"):
        make_birth_death(2.0, 1.0).law(-3)


def test_law_results_are_cached():
    chain = make_birth_death(2.0, 1.0)
    assert chain.law(42) is chain.law(42)


def test_birth_death_parameter_validation():
    with pytest.raises(ValueError):
        make_birth_death(0.0, 1.0)
    with pytest.raises(ValueError):
        make_birth_death(1.0, 1.5)
    with pytest.raises(ValueError):
        make_updrift_birth_death(1.0, 0.0)
