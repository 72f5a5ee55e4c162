"""End-to-end uplink/downlink slot simulation.

Composes channel generation, pilot estimation, linear detection or
precoding, optional sharded processing, and metric evaluation into
single-call experiments driven by a :class:`Scenario`.

Conventions used throughout:

* per-element receive SNR is ``p_ul * E|h|^2 / noise_var`` averaged over
  subcarriers, elements and users; ``snr_db`` is converted to a noise
  variance with this definition.
* noise is added per subcarrier in the frequency domain, which under the
  unitary DFT is equivalent to time-domain AWGN of the same variance.
* uplink detection output is divided by sqrt(p_ul) before slicing, so
  detected symbols compare directly against the transmitted ones.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chanest, distributed, metrics, mimo, sync
from .channel import (
    ArrayGeometry,
    ChannelTensor,
    ClusterSpec,
    RayParams,
    SPEED_OF_LIGHT,
    VisibilityMask,
    VisibilityModel,
    generate_channel,
    upa_geometry,
)
from .errors import ConfigurationError, DomainError
from .numerology import Numerology, build_numerology, load_numerology
from .ofdm import ResourceGrid, SampleStream, demodulate, modulate

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Sub-seed tags: every random quantity of a run draws from
# SeedSequence((scenario.seed, TAG[, ...])) so runs are reproducible and
# individual stages can be replayed in isolation.
SEED_USERS = 1
SEED_CHANNEL = 2
SEED_PILOT = 3
SEED_DATA = 4
SEED_NOISE = 5
SEED_DL_PILOT = 6
SEED_DL_NOISE = 7
SEED_CALIBRATION = 8

_TINY_NOISE = 1e-12  # stands in for sigma^2 -> 0 in noise-free LMMSE runs


def _rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(tuple(int(e) for e in entropy)))


def _cnormal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    if var == 0.0:
        return np.zeros(shape, dtype=np.complex128)
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class RandomUserModel:
    """Parameters for drawing per-user cluster/ray layouts.

    Ray amplitudes follow free-space 1/r scaling with a uniform random
    initial phase; cluster 0 is a direct path, later clusters get an
    extra random excess delay and a per-cluster amplitude decay.
    """

    clusters: int = 2
    rays_per_cluster: int = 3
    r_range_m: tuple[float, float] = (4.0, 12.0)
    azimuth_range_rad: tuple[float, float] = (-1.05, 1.05)
    downtilt_range_rad: tuple[float, float] = (-0.15, 0.15)
    angle_jitter_rad: float = 0.03
    range_jitter_m: float = 0.3
    excess_delay_s: float = 3e-8
    cluster_decay_db: float = 3.0
    visibility: VisibilityModel | None = None


def synthesize_users(model: RandomUserModel, k_users: int, seed) -> list[list[ClusterSpec]]:
    """Draw cluster specs for ``k_users`` users; user k only consumes the
    (seed, SEED_USERS, k) stream, so user layouts are order independent."""
    users = []
    for k in range(k_users):
        rng = _rng(seed, SEED_USERS, k) if not isinstance(seed, tuple) else _rng(*seed, k)
        clusters = []
        for s in range(model.clusters):
            r0 = rng.uniform(*model.r_range_m)
            az0 = rng.uniform(*model.azimuth_range_rad)
            tilt0 = rng.uniform(*model.downtilt_range_rad)
            amp0 = 10.0 ** (-model.cluster_decay_db * s / 20.0)
            rays = []
            for _ in range(model.rays_per_cluster):
                r = max(0.5, r0 + rng.normal() * model.range_jitter_m)
                az = az0 + rng.normal() * model.angle_jitter_rad
                tilt = tilt0 + rng.normal() * model.angle_jitter_rad
                excess = rng.uniform(0.0, model.excess_delay_s) if s > 0 else 0.0
                phase = rng.uniform(0.0, 2.0 * np.pi)
                rays.append(
                    RayParams(
                        r_m=r,
                        theta_rad=az,
                        phi_rad=tilt,
                        gain=(amp0 / r) * np.exp(1j * phase),
                        delay_s=r / SPEED_OF_LIGHT + excess,
                    )
                )
            clusters.append(ClusterSpec(rays=tuple(rays), visibility=model.visibility))
        users.append(clusters)
    return users


@dataclass
class Scenario:
    """Everything needed to run one link-level experiment."""

    numerology: Numerology
    geometry: ArrayGeometry
    k_users: int
    f_c_hz: float = 6.8e9
    users: list | None = None
    channel_tensor: ChannelTensor | None = None
    user_model: RandomUserModel = field(default_factory=RandomUserModel)
    scheme: str = "lmmse"
    snr_db: float | None = 20.0
    noise_var: float | None = None
    p_ul: float = 1.0
    p_dl: float = 1.0
    constellations: object = "qpsk"
    n_data_symbols: int | None = None
    csi: str = "estimated"
    pilot_amplitude: float = 1.0
    estimate_expansion: str = "hold"
    processors: int = 1
    calibration_error: dict | None = None
    time_domain: bool = False
    seed: int = 0
    max_users: int = 12

    def __post_init__(self):
        if self.k_users < 1 or self.k_users > self.max_users:
            raise ConfigurationError(
                f"k_users must be in [1, {self.max_users}], got {self.k_users}"
            )
        if self.numerology.n_data_sc % self.k_users:
            raise ConfigurationError(
                f"{self.k_users} users must divide {self.numerology.n_data_sc} subcarriers"
            )
        if self.scheme.lower() not in mimo.SCHEMES:
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")
        if self.scheme.lower() == "zf" and self.geometry.n_elements < self.k_users:
            raise ConfigurationError("ZF needs at least as many elements as users")
        if self.csi not in ("estimated", "perfect"):
            raise ConfigurationError("csi must be 'estimated' or 'perfect'")
        if self.processors > 1 and self.csi == "perfect":
            raise ConfigurationError("the sharded path performs its own estimation; "
                                     "use csi='estimated'")
        if self.noise_var is None and self.snr_db is None:
            self.noise_var = 0.0
        self.constellation_list()  # fail early on per-user mismatches

    def constellation_list(self) -> list[int]:
        cons = self.constellations
        if isinstance(cons, (str, int)):
            return [mimo.qam_order(cons)] * self.k_users
        if len(cons) != self.k_users:
            raise ConfigurationError(
                f"need one constellation per user ({self.k_users}), got {len(cons)}"
            )
        return [mimo.qam_order(c) for c in cons]

    def data_symbol_count(self) -> int:
        if self.n_data_symbols is not None:
            if self.n_data_symbols < 1:
                raise ConfigurationError("n_data_symbols must be positive")
            return self.n_data_symbols
        return self.numerology.symbols_per_slot - 1  # one slot, one pilot, no switch


def resolve_noise_var(scenario: Scenario, h: np.ndarray) -> float:
    """Noise variance from the per-element SNR definition (see module docs)."""
    if scenario.noise_var is not None:
        return float(scenario.noise_var)
    mean_gain = float(np.mean(np.abs(h) ** 2))
    if mean_gain == 0:
        raise DomainError("zero channel; cannot resolve an SNR target")
    return scenario.p_ul * mean_gain / 10.0 ** (scenario.snr_db / 10.0)


def _scenario_channel(scenario: Scenario) -> ChannelTensor:
    if scenario.channel_tensor is not None:
        tensor = scenario.channel_tensor
        expected = (scenario.numerology.n_data_sc, scenario.geometry.n_elements,
                    scenario.k_users)
        if tensor.h.shape != expected:
            raise ConfigurationError(
                f"injected channel tensor is {tensor.h.shape}, scenario needs {expected}"
            )
        return tensor
    users = scenario.users
    if users is None:
        users = synthesize_users(scenario.user_model, scenario.k_users, scenario.seed)
    elif len(users) != scenario.k_users:
        raise ConfigurationError(f"expected {scenario.k_users} user specs, got {len(users)}")
    return generate_channel(
        scenario.geometry,
        users,
        scenario.numerology,
        scenario.f_c_hz,
        rng_seed=(scenario.seed, SEED_CHANNEL),
    )


def _draw_data(scenario: Scenario, n_symbols: int):
    orders = scenario.constellation_list()
    m = scenario.numerology.n_data_sc
    rng = _rng(scenario.seed, SEED_DATA)
    indices = np.empty((m, n_symbols, scenario.k_users), dtype=np.int64)
    symbols = np.empty((m, n_symbols, scenario.k_users), dtype=np.complex128)
    for k, order in enumerate(orders):
        indices[:, :, k] = rng.integers(0, order, size=(m, n_symbols))
        symbols[:, :, k] = mimo.qam_symbols(indices[:, :, k], order)
    return indices, symbols, orders


def _detection_noise_var(scheme: str, noise_var: float) -> float | None:
    if scheme.lower() == "lmmse":
        return max(noise_var, _TINY_NOISE)
    return noise_var if noise_var > 0 else None


def _pilot_carrier_channel(h: np.ndarray, k_users: int) -> np.ndarray:
    """h[m, :, m mod K]: the transmitting user's channel on each subcarrier."""
    m = h.shape[0]
    return h[np.arange(m), :, np.arange(m) % k_users]


@dataclass
class UplinkResult:
    scenario: Scenario
    channel: ChannelTensor
    estimate: chanest.ChannelEstimate | None
    tx_indices: np.ndarray
    tx_symbols: np.ndarray
    y_pilot: np.ndarray
    y_data: np.ndarray
    detected: np.ndarray
    noise_var: float
    per_user: list[dict]

    def summary(self) -> dict:
        return {
            "direction": "uplink",
            "scheme": self.scenario.scheme,
            "k_users": self.scenario.k_users,
            "n_elements": self.scenario.geometry.n_elements,
            "processors": self.scenario.processors,
            "csi": self.scenario.csi,
            "seed": self.scenario.seed,
            "noise_var": self.noise_var,
            "snr_db": self.scenario.snr_db,
            "n_symbols": int(self.detected.size),
            "mean_evm": float(np.mean([u["evm_rms"] for u in self.per_user])),
            "mean_ser": float(np.mean([u["ser"] for u in self.per_user])),
            "per_user": self.per_user,
        }


def _uplink_time_domain(scenario, h, tx_grid, noise_var, rng):
    """OFDM modulate/demodulate round trip for frequency-flat channels."""
    num = scenario.numerology
    if not np.allclose(h, h[:1], rtol=1e-9, atol=0.0):
        raise DomainError("the time-domain path supports frequency-flat channels only")
    h0 = h[0]  # (N, K)
    streams = [modulate(ResourceGrid(tx_grid[:, :, k : k + 1], num)) for k in range(h0.shape[1])]
    tx = np.stack([s.samples[0] for s in streams])  # (K, T)
    rx = h0 @ tx + _cnormal(rng, (h0.shape[0], tx.shape[1]), noise_var)
    return demodulate(SampleStream(rx, num.sample_rate_hz), num).symbols


def run_uplink(scenario: Scenario) -> UplinkResult:
    """Simulate one uplink pilot + data block through the receive chain."""
    num = scenario.numerology
    k = scenario.k_users
    tensor = _scenario_channel(scenario)
    h = tensor.h
    noise_var = resolve_noise_var(scenario, h)
    sigma_det = _detection_noise_var(scenario.scheme, noise_var)

    pmap = chanest.allocate_pilots(k, num.n_data_sc)
    x_pilot = chanest.random_qpsk_pilots(pmap, (scenario.seed, SEED_PILOT))
    n_data = scenario.data_symbol_count()
    tx_idx, tx_sym, orders = _draw_data(scenario, n_data)

    amp = scenario.pilot_amplitude
    if amp <= 0:
        raise ConfigurationError("pilot_amplitude must be positive")

    rng_noise = _rng(scenario.seed, SEED_NOISE)
    if scenario.time_domain:
        # Build the transmit grid (pilot symbol first), push it through the
        # full OFDM chain, then continue with the received grid.
        tx_grid = np.zeros((num.n_data_sc, 1 + n_data, k), dtype=np.complex128)
        rows = np.arange(num.n_data_sc)
        tx_grid[rows, 0, rows % k] = amp * x_pilot.reshape(-1)
        tx_grid[:, 1:, :] = np.sqrt(scenario.p_ul) * tx_sym
        rx_grid = _uplink_time_domain(scenario, h, tx_grid, noise_var, rng_noise)
        y_pilot = rx_grid[:, 0, :]
        y_data = rx_grid[:, 1:, :]
    else:
        h_pil = _pilot_carrier_channel(h, k)  # (M, N)
        y_pilot = amp * x_pilot.reshape(-1)[:, np.newaxis] * h_pil
        y_pilot = y_pilot + _cnormal(rng_noise, y_pilot.shape, noise_var)
        y_data = np.sqrt(scenario.p_ul) * np.einsum("mnk,msk->msn", h, tx_sym)
        y_data = y_data + _cnormal(rng_noise, y_data.shape, noise_var)

    estimate = None
    if scenario.csi == "perfect":
        w = mimo.detection_matrix(h, scenario.scheme, sigma_det)
        detected = mimo.detect(w, y_data)
    else:
        grid = np.concatenate([(y_pilot / amp)[:, np.newaxis, :], y_data], axis=1)
        if scenario.processors > 1:
            plan = distributed.plan_partition(
                tensor.n_elements, num.n_data_sc, scenario.processors, subband_align=k
            )
            shards = distributed.partition_uplink(grid, plan)
            detected = distributed.process_distributed(
                shards, plan, x_pilot, scenario.scheme, sigma_det,
                expansion=scenario.estimate_expansion,
            )
        else:
            detected = distributed.process_centralized(
                grid, x_pilot, scenario.scheme, sigma_det,
                expansion=scenario.estimate_expansion,
            )
        estimate = chanest.ls_estimate_ul(y_pilot / amp, x_pilot, pmap,
                                          scenario.estimate_expansion)
    detected = detected / np.sqrt(scenario.p_ul)

    per_user = []
    for i, order in enumerate(orders):
        stats = metrics.evm_ser(detected[:, :, i], tx_sym[:, :, i], order)
        stats["user"] = i
        stats["constellation"] = order
        per_user.append(stats)
    return UplinkResult(
        scenario=scenario,
        channel=tensor,
        estimate=estimate,
        tx_indices=tx_idx,
        tx_symbols=tx_sym,
        y_pilot=y_pilot,
        y_data=y_data,
        detected=detected,
        noise_var=noise_var,
        per_user=per_user,
    )


@dataclass
class DownlinkResult:
    scenario: Scenario
    channel: ChannelTensor
    precoder: mimo.LinearTransform
    effective_channel: np.ndarray
    estimate_dl: np.ndarray
    tx_indices: np.ndarray
    tx_symbols: np.ndarray
    received: np.ndarray
    equalized: np.ndarray
    noise_var: float
    per_user: list[dict]

    def summary(self) -> dict:
        return {
            "direction": "downlink",
            "scheme": self.scenario.scheme,
            "k_users": self.scenario.k_users,
            "n_elements": self.scenario.geometry.n_elements,
            "processors": self.scenario.processors,
            "csi": self.scenario.csi,
            "seed": self.scenario.seed,
            "noise_var": self.noise_var,
            "snr_db": self.scenario.snr_db,
            "mean_evm": float(np.mean([u["evm_rms"] for u in self.per_user])),
            "mean_ser": float(np.mean([u["ser"] for u in self.per_user])),
            "per_user": self.per_user,
        }


def _calibration_vector(scenario: Scenario, n: int) -> np.ndarray | None:
    cfg = scenario.calibration_error
    if not cfg:
        return None
    rng = _rng(scenario.seed, SEED_CALIBRATION)
    amp_db = cfg.get("amplitude_std_db", 0.0)
    phase_deg = cfg.get("phase_std_deg", 0.0)
    amp = 10.0 ** (rng.normal(0.0, amp_db, n) / 20.0)
    phase = np.deg2rad(rng.normal(0.0, phase_deg, n))
    return amp * np.exp(1j * phase)


def run_downlink(scenario: Scenario) -> DownlinkResult:
    """Uplink sounding, precoding, downlink pilots/data, per-user equalization.

    Precoding matrices come from the uplink channel estimates under TDD
    reciprocity; each user equalizes with its own sub-band effective
    channel estimate (zero-order held across the sub-band).
    """
    num = scenario.numerology
    k = scenario.k_users
    tensor = _scenario_channel(scenario)
    h = tensor.h
    noise_var = resolve_noise_var(scenario, h)
    sigma_det = _detection_noise_var(scenario.scheme, noise_var)
    amp = scenario.pilot_amplitude

    # Uplink sounding.
    pmap = chanest.allocate_pilots(k, num.n_data_sc)
    x_pilot_ul = chanest.random_qpsk_pilots(pmap, (scenario.seed, SEED_PILOT))
    rng_noise = _rng(scenario.seed, SEED_NOISE)
    h_pil = _pilot_carrier_channel(h, k)
    y_pilot = amp * x_pilot_ul.reshape(-1)[:, np.newaxis] * h_pil
    y_pilot = y_pilot + _cnormal(rng_noise, y_pilot.shape, noise_var)
    if scenario.csi == "perfect":
        h_for_precoding = h
    else:
        est = chanest.ls_estimate_ul(y_pilot / amp, x_pilot_ul, pmap,
                                     scenario.estimate_expansion)
        h_for_precoding = est

    f = mimo.precoding_matrix(h_for_precoding, scenario.scheme, sigma_det, scenario.p_dl)
    h_dl = mimo.apply_reciprocity(h, _calibration_vector(scenario, tensor.n_elements))
    effective = np.einsum("mkn,mnk->mk", h_dl, f.matrices)  # beamformed own-channel

    # Downlink pilots: user k observes its own sub-band pilot tones.
    rng_dl_noise = _rng(scenario.seed, SEED_DL_NOISE)
    x_pilot_dl = chanest.random_qpsk_pilots(pmap, (scenario.seed, SEED_DL_PILOT))
    eff_pilot = np.einsum("ikk->ik", effective.reshape(pmap.n_subbands, k, k))
    y_pilot_dl = eff_pilot * x_pilot_dl
    y_pilot_dl = y_pilot_dl + _cnormal(rng_dl_noise, y_pilot_dl.shape, noise_var)
    if scenario.csi == "perfect":
        h_hat_dl = effective
        est_dl = eff_pilot
    else:
        est_dl = chanest.estimate_dl(y_pilot_dl, x_pilot_dl)
        h_hat_dl = np.repeat(est_dl, k, axis=0)  # zero-order hold to subcarriers

    # Downlink data.
    n_data = scenario.data_symbol_count()
    tx_idx, tx_sym, orders = _draw_data(scenario, n_data)
    if scenario.processors > 1:
        plan = distributed.plan_partition(
            tensor.n_elements, num.n_data_sc, scenario.processors, subband_align=k
        )
        shards = distributed.process_distributed_dl(tx_sym, plan, f)
        tx_streams = np.concatenate(shards, axis=-1)
    else:
        tx_streams = mimo.precode(f, tx_sym)
    y_clean = np.einsum("mkn,msn->msk", h_dl, tx_streams)
    received = y_clean + _cnormal(rng_dl_noise, y_clean.shape, noise_var)

    if np.any(np.abs(h_hat_dl) == 0.0):
        raise DomainError("zero effective-channel estimate; cannot equalize")
    equalized = received * np.conj(h_hat_dl)[:, np.newaxis, :] / (
        np.abs(h_hat_dl) ** 2
    )[:, np.newaxis, :]

    own = effective[:, np.newaxis, :] * tx_sym
    interference = y_clean - own
    per_user = []
    for i, order in enumerate(orders):
        stats = metrics.evm_ser(equalized[:, :, i], tx_sym[:, :, i], order)
        stats["user"] = i
        stats["constellation"] = order
        stats["signal_power"] = float(np.mean(np.abs(own[:, :, i]) ** 2))
        stats["interference_power"] = float(np.mean(np.abs(interference[:, :, i]) ** 2))
        per_user.append(stats)
    return DownlinkResult(
        scenario=scenario,
        channel=tensor,
        precoder=f,
        effective_channel=effective,
        estimate_dl=est_dl,
        tx_indices=tx_idx,
        tx_symbols=tx_sym,
        received=received,
        equalized=equalized,
        noise_var=noise_var,
        per_user=per_user,
    )


SWEEP_AXES = ("snr_db", "k_users", "n_elements", "scheme", "processors")


def _with_axis(scenario: Scenario, axis: str, value) -> Scenario:
    if axis == "n_elements":
        geo = scenario.geometry
        rows = geo.rows or 1
        value = int(value)
        if value % rows:
            rows = 1
        geometry = upa_geometry(
            rows,
            value // rows,
            spacing_m=geo.spacing_m,
            reference_freq_hz=geo.reference_freq_hz or scenario.f_c_hz,
        )
        return dataclasses.replace(scenario, geometry=geometry)
    if axis == "k_users":
        return dataclasses.replace(scenario, k_users=int(value), users=None)
    if axis == "snr_db":
        return dataclasses.replace(scenario, snr_db=float(value), noise_var=None)
    if axis == "scheme":
        return dataclasses.replace(scenario, scheme=str(value))
    if axis == "processors":
        return dataclasses.replace(scenario, processors=int(value))
    raise ConfigurationError(f"unknown sweep axis {axis!r}, expected one of {SWEEP_AXES}")


def run_sweep(scenario: Scenario, axis: str, values, direction: str = "ul") -> list[dict]:
    """One run per axis value; the template seed is reused at every point
    so sweep points share common random numbers."""
    runner = {"ul": run_uplink, "dl": run_downlink}.get(direction)
    if runner is None:
        raise ConfigurationError("direction must be 'ul' or 'dl'")
    rows = []
    for value in values:
        result = runner(_with_axis(scenario, axis, value))
        summary = result.summary()
        rows.append(
            {
                "axis": axis,
                "value": value,
                "scheme": result.scenario.scheme,
                "k_users": result.scenario.k_users,
                "n_elements": result.scenario.geometry.n_elements,
                "noise_var": summary["noise_var"],
                "mean_evm": summary["mean_evm"],
                "mean_ser": summary["mean_ser"],
            }
        )
    return rows


def sync_trial(
    numerology: Numerology,
    root: int = 25,
    delay: int = 0,
    snr_db: float | None = None,
    seed: int = 0,
    threshold: float = sync.DEFAULT_PEAK_THRESHOLD,
) -> dict:
    """Embed a PSS frame at an integer delay, detect it, report the offset."""
    if not 0 <= delay < numerology.frame_samples:
        raise ConfigurationError("delay must lie within one frame")
    pss = sync.generate_pss(root)
    wave = sync.pss_waveform(pss, numerology)
    stream = np.zeros(numerology.frame_samples + wave.size, dtype=np.complex128)
    stream[delay : delay + wave.size] = wave
    if snr_db is not None:
        rng = _rng(seed, 0)
        sig_power = float(np.mean(np.abs(wave) ** 2))
        stream = stream + _cnormal(rng, stream.shape, sig_power / 10.0 ** (snr_db / 10.0))
    offset, metric = sync.detect_pss(stream, pss, numerology, threshold=threshold)
    return {
        "delay": delay,
        "offset": offset,
        "peak_metric": metric,
        "success": offset == delay,
    }


# ---------------------------------------------------------------------------
# Scenario files.


def _load_toml(path) -> dict:
    with open(Path(path), "rb") as fh:
        return tomllib.load(fh)


def _geometry_from_config(cfg: dict, default_ref: float) -> ArrayGeometry:
    sec = cfg.get("geometry", {})
    return upa_geometry(
        rows=int(sec.get("rows", 1)),
        cols=int(sec.get("cols", 64)),
        spacing_m=sec.get("spacing_m"),
        reference_freq_hz=float(sec.get("reference_freq_hz", default_ref)),
    )


def _visibility_from_config(sec: dict):
    if "mask" in sec:
        return VisibilityMask(np.asarray(sec["mask"], dtype=np.float64))
    kind = sec.get("visibility", "all")
    if kind == "all":
        return None
    if kind == "bernoulli":
        return VisibilityModel("bernoulli", p=float(sec.get("p", 0.5)))
    if kind == "window":
        return VisibilityModel("window", width=int(sec["width"]))
    raise ConfigurationError(f"unknown visibility {kind!r}")


def _users_from_config(cfg: dict) -> list | None:
    """Explicit per-user cluster/ray/mask tables under [[channel.users]]."""
    specs = cfg.get("channel", {}).get("users")
    if not specs:
        return None
    users = []
    for spec in specs:
        clusters = []
        for cl in spec.get("clusters", []):
            rays = []
            for ray in cl.get("rays", []):
                r = float(ray["r_m"])
                if "gain_db" in ray or "phase_deg" in ray:
                    amp = 10.0 ** (float(ray.get("gain_db", 0.0)) / 20.0)
                    gain = amp * np.exp(1j * np.deg2rad(float(ray.get("phase_deg", 0.0))))
                else:
                    gain = 1.0 / r  # free-space amplitude default
                delay = (
                    float(ray["delay_ns"]) * 1e-9 if "delay_ns" in ray else r / SPEED_OF_LIGHT
                )
                rays.append(
                    RayParams(
                        r_m=r,
                        theta_rad=np.deg2rad(float(ray.get("theta_deg", 0.0))),
                        phi_rad=np.deg2rad(float(ray.get("phi_deg", 0.0))),
                        gain=gain,
                        delay_s=delay,
                        doppler_hz=float(ray.get("doppler_hz", 0.0)),
                    )
                )
            clusters.append(ClusterSpec(rays=tuple(rays),
                                        visibility=_visibility_from_config(cl)))
        users.append(clusters)
    return users


def _user_model_from_config(cfg: dict) -> RandomUserModel:
    sec = cfg.get("channel", {}).get("user_model", {})
    kwargs = {}
    for key in ("clusters", "rays_per_cluster"):
        if key in sec:
            kwargs[key] = int(sec[key])
    for key in ("angle_jitter_rad", "range_jitter_m", "excess_delay_s", "cluster_decay_db"):
        if key in sec:
            kwargs[key] = float(sec[key])
    if "r_range_m" in sec:
        kwargs["r_range_m"] = tuple(float(v) for v in sec["r_range_m"])
    if "azimuth_range_deg" in sec:
        kwargs["azimuth_range_rad"] = tuple(np.deg2rad(float(v)) for v in sec["azimuth_range_deg"])
    if "downtilt_range_deg" in sec:
        kwargs["downtilt_range_rad"] = tuple(np.deg2rad(float(v)) for v in sec["downtilt_range_deg"])
    kind = sec.get("visibility", "all")
    if kind == "bernoulli":
        kwargs["visibility"] = VisibilityModel("bernoulli", p=float(sec.get("visibility_p", 0.5)))
    elif kind == "window":
        kwargs["visibility"] = VisibilityModel("window", width=int(sec["visibility_width"]))
    elif kind != "all":
        raise ConfigurationError(f"unknown visibility model {kind!r}")
    return RandomUserModel(**kwargs)


def load_scenario(path) -> Scenario:
    """Build a :class:`Scenario` from a TOML configuration file.

    Sections: ``[numerology]`` (required), ``[geometry]``, ``[channel]``
    with optional ``[channel.user_model]``, and ``[scenario]``.  The
    schema is documented in the repository README.
    """
    cfg = _load_toml(path)
    numerology = load_numerology(path)
    chan = cfg.get("channel", {})
    f_c = float(chan.get("f_c_hz", 6.8e9))
    geometry = _geometry_from_config(cfg, f_c)
    sec = cfg.get("scenario", {})
    kwargs = dict(
        numerology=numerology,
        geometry=geometry,
        k_users=int(sec.get("k_users", 4)),
        f_c_hz=f_c,
        users=_users_from_config(cfg),
        user_model=_user_model_from_config(cfg),
        scheme=str(sec.get("scheme", "lmmse")),
        p_ul=float(sec.get("p_ul", 1.0)),
        p_dl=float(sec.get("p_dl", 1.0)),
        constellations=sec.get("constellations", "qpsk"),
        csi=str(sec.get("csi", "estimated")),
        pilot_amplitude=float(sec.get("pilot_amplitude", 1.0)),
        estimate_expansion=str(sec.get("estimate_expansion", "hold")),
        processors=int(sec.get("processors", 1)),
        time_domain=bool(sec.get("time_domain", False)),
        seed=int(sec.get("seed", 0)),
    )
    if "snr_db" in sec:
        kwargs["snr_db"] = float(sec["snr_db"])
    if "noise_var" in sec:
        kwargs["noise_var"] = float(sec["noise_var"])
        kwargs["snr_db"] = None
    if "n_data_symbols" in sec:
        kwargs["n_data_symbols"] = int(sec["n_data_symbols"])
    if "max_users" in sec:
        kwargs["max_users"] = int(sec["max_users"])
    if "calibration_error" in sec:
        kwargs["calibration_error"] = dict(sec["calibration_error"])
    return Scenario(**kwargs)


def small_numerology() -> Numerology:
    """A desk-scale numerology (64-FFT, 48 data subcarriers) for fast tests."""
    return build_numerology(60e3, 64, 48, 3.84e6)
