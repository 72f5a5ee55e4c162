import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xlsim.chanest import (
    allocate_pilots,
    estimate_dl,
    expand_linear,
    ls_estimate_ul,
    random_qpsk_pilots,
)
from xlsim.errors import ConfigurationError, IllPosedError


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _pilot_grid(h, x_pilot, k):
    """Received pilot symbol: subcarrier i*K+k carries user k's pilot."""
    m = h.shape[0]
    rows = np.arange(m)
    return h[rows, :, rows % k] * x_pilot.reshape(-1)[:, np.newaxis]


def test_allocation_prototype_dimensions():
    pmap = allocate_pilots(12, 3168)
    assert pmap.n_subbands == 264


def test_allocation_single_user_owns_everything():
    pmap = allocate_pilots(1, 48)
    np.testing.assert_array_equal(pmap.user_subcarriers(0), np.arange(48))


def test_allocation_comb_pattern():
    pmap = allocate_pilots(4, 48)
    np.testing.assert_array_equal(pmap.user_subcarriers(2), np.arange(2, 48, 4))


def test_allocation_requires_divisibility():
    with pytest.raises(ConfigurationError):
        allocate_pilots(5, 48)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(1, 12), subbands=st.integers(1, 40))
def test_pilot_sets_partition_the_band(k, subbands):
    pmap = allocate_pilots(k, k * subbands)
    seen = np.concatenate([pmap.user_subcarriers(u) for u in range(k)])
    assert seen.size == k * subbands
    assert np.array_equal(np.sort(seen), np.arange(k * subbands))


def test_random_pilots_unit_modulus_and_deterministic():
    pmap = allocate_pilots(4, 48)
    a = random_qpsk_pilots(pmap, 7)
    b = random_qpsk_pilots(pmap, 7)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)
    assert np.array_equal(a, b)
    assert a.shape == (12, 4)


def test_noise_free_estimate_exact_at_pilot_tones(rng):
    k, n, m = 4, 8, 48
    pmap = allocate_pilots(k, m)
    h = crandn(rng, m, n, k)
    x = random_qpsk_pilots(pmap, 1)
    est = ls_estimate_ul(_pilot_grid(h, x, k), x, pmap)
    for i in range(pmap.n_subbands):
        for u in range(k):
            np.testing.assert_allclose(
                est.per_subband[i, :, u], h[i * k + u, :, u], rtol=1e-12
            )


def test_hold_expansion_exact_on_flat_channel(rng):
    k, n = 4, 6
    pmap = allocate_pilots(k, 48)
    h0 = crandn(rng, 1, n, k)
    h = np.broadcast_to(h0, (48, n, k)).copy()
    x = random_qpsk_pilots(pmap, 2)
    est = ls_estimate_ul(_pilot_grid(h, x, k), x, pmap)
    np.testing.assert_allclose(est.per_subcarrier, h, rtol=1e-12)


def test_linear_expansion_flat_channel_exact(rng):
    k, n = 4, 3
    pmap = allocate_pilots(k, 48)
    h = np.broadcast_to(crandn(rng, 1, n, k), (48, n, k)).copy()
    x = random_qpsk_pilots(pmap, 3)
    est = ls_estimate_ul(_pilot_grid(h, x, k), x, pmap, expansion="linear")
    np.testing.assert_allclose(est.per_subcarrier, h, rtol=1e-12)


def test_linear_expansion_hits_anchors(rng):
    per_subband = crandn(rng, 6, 2, 3)
    out = expand_linear(per_subband, 3)
    for i in range(6):
        for k in range(3):
            np.testing.assert_allclose(out[i * 3 + k, :, k], per_subband[i, :, k], rtol=1e-12)


def test_estimate_linear_in_observations(rng):
    k, m = 4, 32
    pmap = allocate_pilots(k, m)
    x = random_qpsk_pilots(pmap, 4)
    y = crandn(rng, m, 8)
    a = ls_estimate_ul(y, x, pmap)
    b = ls_estimate_ul((2.0 - 1.0j) * y, x, pmap)
    np.testing.assert_allclose(b.per_subband, (2.0 - 1.0j) * a.per_subband, rtol=1e-12)


def test_error_variance_tracks_noise(rng):
    """Unit-modulus pilots: per-entry LS error variance equals sigma^2."""
    k, n, m, trials = 4, 8, 16, 3000
    sigma2 = 0.37
    pmap = allocate_pilots(k, m)
    h = crandn(rng, m, n, k)
    x = random_qpsk_pilots(pmap, 5)
    clean = _pilot_grid(h, x, k)
    h_pil = np.stack(
        [h[i * k + u, :, u] for i in range(pmap.n_subbands) for u in range(k)]
    ).reshape(pmap.n_subbands, k, n).transpose(0, 2, 1)
    errs = []
    for _ in range(trials):
        noise = np.sqrt(sigma2 / 2) * (
            rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        )
        est = ls_estimate_ul(clean + noise, x, pmap)
        errs.append(est.per_subband - h_pil)
    var = np.mean(np.abs(np.stack(errs)) ** 2)
    assert var == pytest.approx(sigma2, rel=0.05)


def test_zero_pilot_rejected(rng):
    pmap = allocate_pilots(2, 8)
    x = random_qpsk_pilots(pmap, 0).copy()
    x[1, 0] = 0.0
    with pytest.raises(IllPosedError):
        ls_estimate_ul(crandn(rng, 8, 4), x, pmap)


def test_shape_validation(rng):
    pmap = allocate_pilots(4, 48)
    with pytest.raises(ConfigurationError):
        ls_estimate_ul(crandn(rng, 47, 4), random_qpsk_pilots(pmap, 0), pmap)
    with pytest.raises(ConfigurationError):
        ls_estimate_ul(crandn(rng, 48, 4), np.ones((3, 4)), pmap)


# ---------------------------------------------------------------------------
# Downlink estimation


def test_estimate_dl_noise_free_recovers_effective_channel(rng):
    h = crandn(rng, 1, 16)[0]
    f = crandn(rng, 16, 1)[:, 0]
    eff = h @ f
    x = np.exp(1j * 0.7)
    assert estimate_dl(np.array(eff * x), np.array(x)) == pytest.approx(eff)


def test_estimate_dl_unit_pilot_passthrough(rng):
    y = crandn(rng, 5, 3)
    np.testing.assert_array_equal(estimate_dl(y, np.ones((5, 3))), y)


def test_estimate_dl_matched_filter_phase(rng):
    """MR beamforming with perfect CSI: the effective channel is real positive."""
    h = crandn(rng, 1, 32)[0]
    f = np.conj(h) / np.linalg.norm(h)
    est = estimate_dl(np.array(h @ f), np.array(1.0 + 0.0j))
    assert est.imag == pytest.approx(0.0, abs=1e-12)
    assert est.real > 0


def test_estimate_dl_shape_mismatch(rng):
    with pytest.raises(ConfigurationError):
        estimate_dl(crandn(rng, 4, 2), np.ones((2, 4)))
