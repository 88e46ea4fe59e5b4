"""Backend selection and the counter RNG the backends share."""

import numpy as np
import pytest

from lamperti import SimConfig, simulate
from lamperti._rng import GOLD, mix64, next_uniform, stream_keys
from lamperti.chains import make_updrift_birth_death
from lamperti.kernels import backend_name, get_backend, numba_requested


def splitmix64_reference(z):
    """Straight transcription of the published splitmix64 finalizer."""
    mask = (1 << 64) - 1
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return (z ^ (z >> 31)) & mask


@pytest.mark.parametrize("z", [0, 1, 42, 2 ** 63, (1 << 64) - 1,
                               0xDEADBEEFCAFEBABE])
def test_mix64_matches_reference(z):
    assert int(mix64(np.uint64(z))) == splitmix64_reference(z)


def test_mix64_vectorized():
    zs = np.array([0, 1, 42], dtype=np.uint64)
    out = mix64(zs)
    assert [int(v) for v in out] == [splitmix64_reference(z) for z in (0, 1, 42)]


def test_stream_keys_deterministic_and_offsettable():
    a = stream_keys(123, 8)
    b = stream_keys(123, 8)
    np.testing.assert_array_equal(a, b)
    shifted = stream_keys(123, 4, offset=4)
    np.testing.assert_array_equal(a[4:], shifted)
    assert not np.array_equal(a, stream_keys(124, 8))


def test_next_uniform_range_and_advance():
    key = stream_keys(7, 1000)
    u, new_key = next_uniform(key)
    assert (u >= 0.0).all() and (u < 1.0).all()
    np.testing.assert_array_equal(new_key, key + GOLD)
    # a second draw from the advanced keys differs
    u2, _ = next_uniform(new_key)
    assert not np.array_equal(u, u2)


def test_uniforms_unbiased():
    u, _ = next_uniform(stream_keys(2024, 200000))
    assert abs(u.mean() - 0.5) < 0.002
    assert abs(u.var() - 1.0 / 12.0) < 0.001


def test_numpy_backend_always_available():
    be = get_backend("numpy")
    assert backend_name(be) == "numpy"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_numba_requested_tristate(monkeypatch):
    monkeypatch.delenv("LAMPERTI_NUMBA", raising=False)
    assert numba_requested() is None
    monkeypatch.setenv("LAMPERTI_NUMBA", "1")
    assert numba_requested() is True
    monkeypatch.setenv("LAMPERTI_NUMBA", "0")
    assert numba_requested() is False
    monkeypatch.setenv("LAMPERTI_NUMBA", "maybe")
    with pytest.raises(ValueError):
        numba_requested()


def test_one_step_frequencies_match_law():
    # single step of the (mu=1, b=1) walk from x=10: p_up = 0.45;
    # 1e5 replicas put the estimate within 3 sigma = 0.00472
    from lamperti.chains import make_birth_death
    chain = make_birth_death(1.0, 1.0)
    cfg = SimConfig(seed=7, n_steps=1, n_replicas=100000, x_start=10,
                    backend="numpy")
    batch = simulate(chain, cfg)
    p_up = float((batch.final_states == 11).mean())
    assert p_up == pytest.approx(0.44710, abs=1e-12)
    assert abs(p_up - 0.45) < 0.00472


def test_simulate_deterministic_per_seed():
    chain = make_updrift_birth_death(3.0, 1.0)
    cfg = SimConfig(seed=11, n_steps=300, n_replicas=500, x_start=10,
                    backend="numpy")
    a = simulate(chain, cfg)
    b = simulate(chain, cfg)
    np.testing.assert_array_equal(a.final_states, b.final_states)
    c = simulate(chain, cfg.with_updates(stream_offset=1 << 16))
    assert not np.array_equal(a.final_states, c.final_states)


def test_backends_agree_bit_for_bit():
    pytest.importorskip("numba")
    chain = make_updrift_birth_death(3.0, 1.0)
    # 300 steps from x=10 pushes states past the initial jump table
    # (start + 64), exercising the on-the-fly extension in both backends
    base = SimConfig(seed=11, n_steps=300, n_replicas=5000, x_start=10)
    out = {}
    for name in ("numpy", "numba"):
        out[name] = simulate(chain, base.with_updates(backend=name))
    np.testing.assert_array_equal(out["numpy"].final_states,
                                  out["numba"].final_states)
    assert int(out["numpy"].final_states.max()) > 74


def test_backends_agree_on_renewal():
    pytest.importorskip("numba")
    from lamperti import renewal_estimate
    chain = make_updrift_birth_death(3.0, 1.0)
    grid = np.arange(1, 61)
    vals = {}
    for name in ("numpy", "numba"):
        cfg = SimConfig(seed=5, n_replicas=100, backend=name)
        vals[name] = renewal_estimate(chain, grid, 20.0, cfg)
    np.testing.assert_array_equal(vals["numpy"].H, vals["numba"].H)
