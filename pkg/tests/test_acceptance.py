"""Acceptance suite: end-to-end release checks, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s``."""

import time

import numpy as np

from xlsim import distributed, metrics, mimo
from xlsim.chanest import allocate_pilots, ls_estimate_ul, random_qpsk_pilots
from xlsim.channel import (
    ClusterSpec,
    RayParams,
    SPEED_OF_LIGHT,
    VisibilityMask,
    generate_channel,
    rayleigh_distance,
    upa_geometry,
)
from xlsim.linksim import Scenario, run_uplink, small_numerology, sync_trial
from xlsim.numerology import build_numerology, prototype_numerology
from xlsim.ofdm import ResourceGrid, SampleStream, demodulate, modulate


def _report(name: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def test_acceptance_rate_formulas():
    t0 = time.monotonic()
    aggregate = distributed.aggregate_sample_rate(distributed.default_rate_budget())
    group = distributed.group_interaction_rate(distributed.default_rate_budget())
    peak = metrics.throughput(metrics.ThroughputSpec(3168, 26, 8, 8, 0.5e-3))
    switched = metrics.throughput(metrics.ThroughputSpec(3168, 22, 8, 8, 0.5e-3))
    se = metrics.spectral_efficiency(metrics.ThroughputSpec(3168, 26, 8, 12, 0.5e-3, 200e6))
    se_wide = metrics.spectral_efficiency(metrics.ThroughputSpec(3276, 26, 8, 12, 0.5e-3, 200e6))
    elapsed = time.monotonic() - t0
    checks = [
        abs(aggregate - 1453.33e9) <= 0.01e9,
        abs(group - 90.83e9) <= 0.01e9,
        abs(peak - 10.56e9) / 10.56e9 <= 0.005,
        abs(switched - 8.92e9) / 8.92e9 <= 0.005,
        abs(se - 79.12) / 79.12 <= 0.005,
        abs(se_wide - 81.82) / 81.82 <= 0.005,
        elapsed < 1.0,
    ]
    _report(
        "rate formulas",
        all(checks),
        f"aggregate={aggregate / 1e9:.2f} Gbps, group={group / 1e9:.2f} Gbps, "
        f"peak={peak / 1e9:.3f}/{switched / 1e9:.3f} Gbps, "
        f"SE={se:.2f}/{se_wide:.2f} bit/s/Hz in {elapsed * 1e3:.0f} ms",
    )


def test_acceptance_rayleigh_distance():
    wavelength = SPEED_OF_LIGHT / 6.8e9
    d = rayleigh_distance(63 * wavelength / 2, wavelength)
    _report(
        "Rayleigh distance",
        abs(d - 87.5) <= 0.2,
        f"2D^2/lambda = {d:.3f} m (target 87.5 +- 0.2 m)",
    )


def test_acceptance_noiseless_exactness():
    t0 = time.monotonic()
    worst_evm = 0.0
    total_errors = 0
    total_symbols = 0
    for scheme in ("zf", "lmmse"):
        sc = Scenario(
            numerology=small_numerology(),
            geometry=upa_geometry(4, 16),
            k_users=4,
            scheme=scheme,
            snr_db=None,
            noise_var=0.0,
            csi="perfect",
            constellations="256qam",
            n_data_symbols=522,  # 48 * 522 * 4 > 1e5 symbols
            seed=31,
        )
        res = run_uplink(sc)
        worst_evm = max(worst_evm, max(u["evm_rms"] for u in res.per_user))
        total_errors += sum(u["ser"] * u["n_symbols"] for u in res.per_user)
        total_symbols += sum(u["n_symbols"] for u in res.per_user)
    elapsed = time.monotonic() - t0
    ok = total_errors == 0 and worst_evm < 1e-6 and total_symbols >= 1e5 and elapsed < 30.0
    _report(
        "noiseless exactness",
        ok,
        f"{total_symbols} symbols, {int(total_errors)} errors, "
        f"max EVM {worst_evm:.2e}, {elapsed:.1f} s (ZF and LMMSE at sigma^2->0)",
    )


def test_acceptance_distributed_equivalence():
    t0 = time.monotonic()
    base = Scenario(
        numerology=prototype_numerology(),
        geometry=upa_geometry(4, 16),
        k_users=4,
        scheme="lmmse",
        snr_db=20.0,
        n_data_symbols=13,
        seed=17,
    )
    import dataclasses

    ref = run_uplink(base)
    worst_ul = 0.0
    for p in (2, 4):
        out = run_uplink(dataclasses.replace(base, processors=p))
        worst_ul = max(worst_ul, float(np.abs(out.detected - ref.detected).max()))

    # Downlink precoding path: sharded precoder output vs the centralized one.
    f = mimo.precoding_matrix(ref.estimate, "lmmse", ref.noise_var, 1.0)
    rng = np.random.default_rng(18)
    x = _crandn(rng, 3168, 4, 4)
    ref_tx = mimo.precode(f, x)
    worst_dl = 0.0
    for p in (1, 2, 4):
        plan = distributed.plan_partition(64, 3168, p, subband_align=4)
        shards = distributed.process_distributed_dl(x, plan, f)
        worst_dl = max(worst_dl, float(np.abs(np.concatenate(shards, -1) - ref_tx).max()))
    elapsed = time.monotonic() - t0
    ok = worst_ul <= 1e-12 and worst_dl <= 1e-12 and elapsed < 60.0
    _report(
        "distributed equivalence",
        ok,
        f"max |distributed - centralized|: uplink {worst_ul:.2e}, "
        f"downlink {worst_dl:.2e}, {elapsed:.1f} s (P in {{1,2,4}}, full band)",
    )


def test_acceptance_estimator_calibration():
    trials = 10_000
    k, n, m = 4, 8, 16
    sigma2 = 0.21
    rng = np.random.default_rng(23)
    pmap = allocate_pilots(k, m)
    x_pilot = random_qpsk_pilots(pmap, 29)
    h = _crandn(rng, m, n, k)
    rows = np.arange(m)
    clean = h[rows, :, rows % k] * x_pilot.reshape(-1)[:, np.newaxis]
    h_ref = np.stack(
        [h[i * k + u, :, u] for i in range(pmap.n_subbands) for u in range(k)]
    ).reshape(pmap.n_subbands, k, n).transpose(0, 2, 1)
    sq_sum = 0.0
    count = 0
    for _ in range(trials):
        noisy = clean + np.sqrt(sigma2 / 2) * (
            rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        )
        err = ls_estimate_ul(noisy, x_pilot, pmap).per_subband - h_ref
        sq_sum += float(np.sum(np.abs(err) ** 2))
        count += err.size
    var = sq_sum / count
    ok = abs(var - sigma2) / sigma2 <= 0.05
    _report(
        "LS error calibration",
        ok,
        f"per-entry error variance {var:.4f} vs sigma^2 {sigma2} "
        f"({abs(var - sigma2) / sigma2 * 100:.2f}% over {trials} pilot slots)",
    )


def test_acceptance_spread_ordering():
    rng = np.random.default_rng(37)
    draws = 1000
    medians = {}
    for n in (4, 16, 64):
        h = _crandn(rng, draws, n, 4)
        medians[n] = metrics.singular_value_spread(h, normalize=True).median
    ok = medians[64] < medians[16] < medians[4] and medians[64] < 2.0
    _report(
        "spread ordering",
        ok,
        f"median spreads 64x4={medians[64]:.3f} < 16x4={medians[16]:.3f} "
        f"< 4x4={medians[4]:.3f}, 64x4 < 2.0",
    )


def test_acceptance_nonstationarity_signature():
    num = small_numerology()
    geo = upa_geometry(1, 64)
    mask = np.zeros(64)
    mask[:32] = 1.0
    users = [
        [ClusterSpec(rays=(RayParams(r_m=6.0, theta_rad=0.2),),
                     visibility=VisibilityMask(mask))]
    ]
    h = generate_channel(geo, users, num, 6.8e9)
    profile = metrics.element_power_profile(h.h, user=0)
    in_peak = profile[:32].max()
    out_peak = profile[32:].max()
    contrast_ok = out_peak <= in_peak * 1e-2  # at least 20 dB
    _report(
        "non-stationarity signature",
        contrast_ok,
        f"out-of-window peak {out_peak:.2e} vs in-window {in_peak:.2e} "
        "(>= 20 dB contrast, noise-free)",
    )


def test_acceptance_sync_robustness():
    num = build_numerology(15e3, 256, 132, 3.84e6)
    noise_free = [
        sync_trial(num, delay=(97 * i) % num.frame_samples, snr_db=None, seed=i)
        for i in range(100)
    ]
    nf_rate = np.mean([r["success"] for r in noise_free])
    trials = 1000
    hits = 0
    for i in range(trials):
        r = sync_trial(num, delay=(i * 7919) % num.frame_samples, snr_db=0.0, seed=i)
        hits += r["success"]
    rate = hits / trials
    ok = rate >= 0.99 and nf_rate == 1.0
    _report(
        "sync robustness",
        ok,
        f"0 dB success {rate * 100:.1f}% over {trials} trials "
        f"(>= 99%), noise-free {nf_rate * 100:.0f}%",
    )


def test_acceptance_ofdm_roundtrip():
    num = small_numerology()
    rng = np.random.default_rng(41)
    worst = 0.0
    for _ in range(1000):
        grid = ResourceGrid(_crandn(rng, 48, 14, 1), num)
        back = demodulate(modulate(grid), num)
        err = np.abs(back.symbols - grid.symbols).max() / np.abs(grid.symbols).max()
        worst = max(worst, float(err))
    grid = ResourceGrid(_crandn(rng, 48, 14, 1), num)
    stream = modulate(grid)
    d = 3  # within the 4-sample normal CP
    delayed = np.concatenate(
        [np.zeros((1, d), dtype=complex), stream.samples], axis=1
    )[:, : stream.n_samples]
    back = demodulate(SampleStream(delayed, num.sample_rate_hz), num)
    ramp = np.exp(-2j * np.pi * num.subcarrier_offsets() * d / num.fft_size)
    ramp_err = float(
        np.abs(back.symbols - grid.symbols * ramp[:, np.newaxis, np.newaxis]).max()
    )
    ok = worst <= 1e-12 and ramp_err <= 1e-9
    _report(
        "OFDM round trip",
        ok,
        f"max relative round-trip error {worst:.2e} over 1000 grids, "
        f"CP-delay phase-ramp error {ramp_err:.2e}",
    )


def test_acceptance_qr_lmmse_equivalence():
    rng = np.random.default_rng(43)
    systems = 1000
    h = _crandn(rng, systems, 64, 12)
    y = _crandn(rng, systems, 1, 64)
    sigma2 = 0.15
    s_qr = mimo.qr_lmmse_solve(h, sigma2, y)
    s_ref = mimo.detect(mimo.detection_matrix(h, "lmmse", sigma2), y)
    num = np.linalg.norm((s_qr - s_ref).reshape(systems, -1), axis=1)
    den = np.linalg.norm(s_ref.reshape(systems, -1), axis=1)
    worst = float((num / den).max())
    ok = worst <= 1e-8
    _report(
        "QR-LMMSE equivalence",
        ok,
        f"max relative error {worst:.2e} over {systems} random 64x12 systems",
    )
