"""Quality metrics: EVM/SER, singular value spread, per-element power,
and closed-form throughput / spectral-efficiency calculators."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chanest import ChannelEstimate
from .errors import ConfigurationError, DomainError
from .mimo import qam_demap


def evm_ser(detected: np.ndarray, reference: np.ndarray, constellation) -> dict:
    """RMS error-vector magnitude and nearest-neighbour symbol error rate.

    ``reference`` must hold exact constellation points; both arrays are
    sliced against the same constellation for the SER count.
    """
    det = np.asarray(detected)
    ref = np.asarray(reference)
    if det.shape != ref.shape:
        raise ConfigurationError(f"shape mismatch: {det.shape} vs {ref.shape}")
    ref_power = np.mean(np.abs(ref) ** 2)
    if ref_power == 0:
        raise DomainError("reference symbols have zero power")
    evm = float(np.sqrt(np.mean(np.abs(det - ref) ** 2) / ref_power))
    errors = qam_demap(det, constellation) != qam_demap(ref, constellation)
    return {"evm_rms": evm, "ser": float(np.mean(errors)), "n_symbols": int(det.size)}


@dataclass
class SpreadReport:
    """Singular-value spread per subcarrier with its empirical CDF."""

    subcarriers: np.ndarray
    spreads: np.ndarray

    def cdf(self):
        """Sorted spread values and their cumulative probabilities."""
        values = np.sort(self.spreads)
        probs = np.arange(1, values.size + 1) / values.size
        return values, probs

    @property
    def median(self) -> float:
        return float(np.median(self.spreads))

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["subcarrier", "spread"])
            for m, s in zip(self.subcarriers, self.spreads):
                writer.writerow([int(m), float(s)])


def singular_value_spread(h, normalize: bool = True) -> SpreadReport:
    """Ratio sigma_max/sigma_min of the multiuser channel per subcarrier.

    With ``normalize`` each user's column is scaled to unit norm first.
    Rank-deficient subcarriers are reported as ``inf``.
    """
    if isinstance(h, ChannelEstimate):
        h = h.per_subcarrier
    arr = np.asarray(h, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ConfigurationError("channel must be (subcarriers, elements, users)")
    if arr.shape[1] < arr.shape[2]:
        raise ConfigurationError("need at least as many elements as users")
    if normalize:
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise DomainError("cannot normalize a zero channel column")
        arr = arr / norms
    s = np.linalg.svd(arr, compute_uv=False)
    # numerical rank tolerance in the usual max(dim) * eps * sigma_max sense
    tol = s[:, 0] * max(arr.shape[1], arr.shape[2]) * np.finfo(np.float64).eps
    spreads = np.where(s[:, -1] > tol, s[:, 0] / np.maximum(s[:, -1], 1e-300), np.inf)
    return SpreadReport(subcarriers=np.arange(arr.shape[0]), spreads=spreads)


def element_power_profile(estimate, user: int | None = None) -> np.ndarray:
    """Per-element channel power averaged over subcarriers, peak-normalized."""
    if isinstance(estimate, ChannelEstimate):
        estimate = estimate.per_subcarrier
    arr = np.asarray(estimate)
    if arr.ndim == 3:
        if user is None:
            raise ConfigurationError("select a user for a (m, n, k) estimate")
        arr = arr[:, :, user]
    if arr.ndim != 2:
        raise ConfigurationError("estimate must be (subcarriers, elements[, users])")
    power = np.mean(np.abs(arr) ** 2, axis=0)
    peak = power.max()
    if peak == 0:
        raise DomainError("all-zero channel has no power profile")
    return power / peak


@dataclass(frozen=True)
class ThroughputSpec:
    """Factors of the peak-rate bookkeeping formula."""

    n_sc: int
    symbols_per_window: int
    bits_per_symbol: int
    users: int
    window_s: float
    bandwidth_hz: float | None = None

    def __post_init__(self):
        if min(self.n_sc, self.symbols_per_window, self.bits_per_symbol, self.users) <= 0:
            raise ConfigurationError("throughput factors must be positive")
        if self.window_s <= 0:
            raise ConfigurationError("window must be positive")


def throughput(spec: ThroughputSpec) -> float:
    """Peak data rate in bits/s: n_sc * symbols * bits * users / window."""
    return spec.n_sc * spec.symbols_per_window * spec.bits_per_symbol * spec.users / spec.window_s


def spectral_efficiency(spec: ThroughputSpec) -> float:
    """Peak spectral efficiency in bit/s/Hz over the occupied bandwidth."""
    if spec.bandwidth_hz is None or spec.bandwidth_hz <= 0:
        raise ConfigurationError("spectral efficiency needs a positive bandwidth")
    return throughput(spec) / spec.bandwidth_hz


def write_rows_csv(path, rows: list[dict]) -> None:
    """Write a list of flat dicts as CSV with a stable header order."""
    if not rows:
        raise ConfigurationError("no rows to write")
    fields = list(rows[0].keys())
    with open(Path(path), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
