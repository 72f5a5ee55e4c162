import numpy as np
import pytest

from xlsim.channel import (
    ArrayGeometry,
    ClusterSpec,
    RayParams,
    SPEED_OF_LIGHT,
    VisibilityMask,
    bernoulli_visibility,
    element_distances,
    generate_channel,
    rayleigh_distance,
    sample_visibility,
    steering_vector,
    upa_geometry,
    window_visibility,
)
from xlsim.errors import ConfigurationError, DomainError
from xlsim.numerology import build_numerology


def small_num():
    return build_numerology(60e3, 64, 48, 3.84e6)


def test_single_element_at_origin():
    geo = ArrayGeometry(np.zeros((1, 3)))
    ray = RayParams(r_m=5.0, theta_rad=0.3, phi_rad=-0.1)
    for m in (0, 7, -12):
        b = steering_vector(geo, ray, m, 6.8e9, 60e3)
        expected = np.exp(2j * np.pi * (6.8e9 + m * 60e3) * 5.0 / SPEED_OF_LIGHT)
        np.testing.assert_allclose(b, [expected], rtol=1e-12)


def test_steering_unit_modulus():
    geo = upa_geometry(4, 8)
    ray = RayParams(r_m=3.0, theta_rad=0.7, phi_rad=0.2)
    b = steering_vector(geo, ray, 100, 6.8e9, 60e3)
    np.testing.assert_allclose(np.abs(b), 1.0, atol=1e-12)


def test_steering_matches_bruteforce_geometry_oracle():
    # 4-element half-wavelength line array, explicit 3D distances.
    f_c = 6.8e9
    lam = SPEED_OF_LIGHT / f_c
    geo = upa_geometry(1, 4, spacing_m=lam / 2, reference_freq_hz=f_c)
    ray = RayParams(r_m=5.0, theta_rad=np.deg2rad(30.0))
    b = steering_vector(geo, ray, 0, f_c, 60e3)

    src = np.array(
        [
            5.0 * np.cos(0.0) * np.sin(np.deg2rad(30.0)),
            5.0 * np.cos(0.0) * np.cos(np.deg2rad(30.0)),
            5.0 * np.sin(0.0),
        ]
    )
    oracle = np.empty(4, dtype=complex)
    for n in range(4):
        d = np.sqrt(np.sum((geo.element_positions[n] - src) ** 2))
        oracle[n] = np.exp(2j * np.pi * f_c * d / SPEED_OF_LIGHT)
    np.testing.assert_allclose(b, oracle, rtol=1e-12)


def test_far_field_limit_constant_phase_increment():
    f_c = 6.8e9
    lam = SPEED_OF_LIGHT / f_c
    geo = upa_geometry(1, 16, spacing_m=lam / 2, reference_freq_hz=f_c)
    ray = RayParams(r_m=1e6, theta_rad=0.4)
    b = steering_vector(geo, ray, 0, f_c, 60e3)
    increments = np.angle(b[1:] * np.conj(b[:-1]))
    assert np.ptp(increments) < 1e-6


def test_source_on_element_rejected():
    geo = ArrayGeometry(np.array([[0.0, 1.0, 0.0], [0.5, 1.0, 0.0]]))
    ray = RayParams(r_m=1.0, theta_rad=0.0, phi_rad=0.0)  # lands exactly on element 0
    with pytest.raises(DomainError):
        element_distances(geo, ray)


def test_invalid_ray_distance():
    with pytest.raises(DomainError):
        RayParams(r_m=0.0)


def test_rayleigh_distance_values():
    lam = SPEED_OF_LIGHT / 6.8e9
    assert rayleigh_distance(63 * lam / 2, lam) == pytest.approx(87.5, abs=0.2)
    assert rayleigh_distance(lam, lam) == pytest.approx(2 * lam)
    assert rayleigh_distance(1.0, 0.05) == pytest.approx(40.0)
    with pytest.raises(DomainError):
        rayleigh_distance(-1.0, 0.05)


# ---------------------------------------------------------------------------
# Visibility


def test_visibility_extremes():
    ones = sample_visibility(bernoulli_visibility(1.0), 32, 0)
    zeros = sample_visibility(bernoulli_visibility(0.0), 32, 0)
    assert ones.weights.sum() == 32
    assert zeros.weights.sum() == 0


def test_visibility_law_of_large_numbers():
    mask = sample_visibility(bernoulli_visibility(0.5), 10_000, 42)
    assert 0.48 <= mask.weights.mean() <= 0.52


def test_visibility_window_contiguous():
    mask = sample_visibility(window_visibility(10), 64, 7)
    idx = np.flatnonzero(mask.weights)
    assert idx.size == 10
    assert np.all(np.diff(idx) == 1)


def test_visibility_deterministic():
    a = sample_visibility(bernoulli_visibility(0.3), 256, 99)
    b = sample_visibility(bernoulli_visibility(0.3), 256, 99)
    assert np.array_equal(a.weights, b.weights)


def test_visibility_invalid_params():
    with pytest.raises(ConfigurationError):
        sample_visibility(bernoulli_visibility(1.5), 8, 0)
    with pytest.raises(ConfigurationError):
        sample_visibility(window_visibility(9), 8, 0)


def test_mask_range_validation():
    with pytest.raises(ConfigurationError):
        VisibilityMask(np.array([0.0, 1.2]))


# ---------------------------------------------------------------------------
# Channel generation


def test_single_ray_equals_steering_vector():
    num = small_num()
    geo = upa_geometry(1, 8)
    ray = RayParams(r_m=6.0, theta_rad=0.2)
    tensor = generate_channel(geo, [[ClusterSpec(rays=(ray,))]], num, 6.8e9)
    offsets = num.subcarrier_offsets()
    for row in (0, 17, 47):
        expected = steering_vector(geo, ray, int(offsets[row]), 6.8e9, num.scs_hz)
        np.testing.assert_allclose(tensor.h[row, :, 0], expected, rtol=1e-12)


def test_zero_mask_cluster_contributes_nothing():
    num = small_num()
    geo = upa_geometry(1, 8)
    ray = RayParams(r_m=6.0, theta_rad=0.2)
    visible = ClusterSpec(rays=(ray,))
    hidden = ClusterSpec(
        rays=(RayParams(r_m=3.0, theta_rad=-0.4),),
        visibility=VisibilityMask(np.zeros(8)),
    )
    with_hidden = generate_channel(geo, [[visible, hidden]], num, 6.8e9)
    without = generate_channel(geo, [[visible]], num, 6.8e9)
    np.testing.assert_array_equal(with_hidden.h, without.h)


def test_all_ones_mask_is_identity():
    num = small_num()
    geo = upa_geometry(1, 8)
    rays = (RayParams(r_m=6.0, theta_rad=0.2, gain=0.5 - 0.1j, delay_s=20e-9),)
    masked = generate_channel(
        geo, [[ClusterSpec(rays=rays, visibility=VisibilityMask(np.ones(8)))]], num, 6.8e9
    )
    plain = generate_channel(geo, [[ClusterSpec(rays=rays)]], num, 6.8e9)
    np.testing.assert_array_equal(masked.h, plain.h)


def test_generate_channel_matches_triple_loop_oracle():
    """Scalar-arithmetic oracle over (cluster, ray, element, subcarrier)."""
    num = small_num()
    geo = upa_geometry(1, 8)
    rng = np.random.default_rng(5)
    clusters = []
    masks = []
    for _ in range(2):
        rays = tuple(
            RayParams(
                r_m=float(rng.uniform(2, 10)),
                theta_rad=float(rng.uniform(-1, 1)),
                phi_rad=float(rng.uniform(-0.2, 0.2)),
                gain=complex(rng.normal(), rng.normal()),
                delay_s=float(rng.uniform(0, 50e-9)),
            )
            for _ in range(2)
        )
        mask = (rng.random(8) < 0.7).astype(float)
        masks.append(mask)
        clusters.append(ClusterSpec(rays=rays, visibility=VisibilityMask(mask)))
    tensor = generate_channel(geo, [clusters], num, 6.8e9)

    offsets = num.subcarrier_offsets()
    oracle = np.zeros((48, 8), dtype=complex)
    for row in range(48):
        f = 6.8e9 + offsets[row] * num.scs_hz
        for cluster, mask in zip(clusters, masks):
            for ray in cluster.rays:
                src = ray.source_position()
                alpha = ray.gain * np.exp(-2j * np.pi * f * ray.delay_s)
                for n in range(8):
                    d = np.sqrt(np.sum((geo.element_positions[n] - src) ** 2))
                    b = np.exp(2j * np.pi * f * d / SPEED_OF_LIGHT)
                    oracle[row, n] += mask[n] * alpha * b
    np.testing.assert_allclose(tensor.h[:, :, 0], oracle, rtol=1e-10, atol=1e-12)


def test_linearity_in_ray_gains():
    num = small_num()
    geo = upa_geometry(1, 8)
    rays = tuple(RayParams(r_m=4.0 + i, theta_rad=0.1 * i, gain=0.3 + 0.2j) for i in range(3))
    doubled = tuple(
        RayParams(r_m=r.r_m, theta_rad=r.theta_rad, gain=2 * r.gain) for r in rays
    )
    h1 = generate_channel(geo, [[ClusterSpec(rays=rays)]], num, 6.8e9).h
    h2 = generate_channel(geo, [[ClusterSpec(rays=doubled)]], num, 6.8e9).h
    np.testing.assert_allclose(h2, 2 * h1, rtol=1e-12)


def test_generation_deterministic_with_sampled_visibility():
    num = small_num()
    geo = upa_geometry(1, 16)
    users = [
        [ClusterSpec(rays=(RayParams(r_m=5.0),), visibility=bernoulli_visibility(0.5))]
        for _ in range(2)
    ]
    a = generate_channel(geo, users, num, 6.8e9, rng_seed=11)
    b = generate_channel(geo, users, num, 6.8e9, rng_seed=11)
    c = generate_channel(geo, users, num, 6.8e9, rng_seed=12)
    assert np.array_equal(a.h, b.h)
    assert not np.array_equal(a.h, c.h)


def test_doppler_advances_phase():
    num = small_num()
    geo = upa_geometry(1, 4)
    rays = (RayParams(r_m=5.0, doppler_hz=100.0),)
    h0 = generate_channel(geo, [[ClusterSpec(rays=rays)]], num, 6.8e9, time_s=0.0).h
    h1 = generate_channel(geo, [[ClusterSpec(rays=rays)]], num, 6.8e9, time_s=2.5e-3).h
    np.testing.assert_allclose(h1, h0 * np.exp(2j * np.pi * 100.0 * 2.5e-3), rtol=1e-12)


def test_geometry_validation():
    with pytest.raises(ConfigurationError):
        ArrayGeometry(np.zeros((4, 2)))
    with pytest.raises(ConfigurationError):
        upa_geometry(0, 4)


def test_upa_aperture():
    f_c = 6.8e9
    lam = SPEED_OF_LIGHT / f_c
    geo = upa_geometry(1, 64, spacing_m=lam / 2, reference_freq_hz=f_c)
    assert geo.aperture_m == pytest.approx(63 * lam / 2, rel=1e-12)
