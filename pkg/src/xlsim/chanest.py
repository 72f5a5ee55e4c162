"""Comb pilot allocation and least-squares channel estimation.

Users are kept frequency-orthogonal: with K users, every K consecutive
subcarriers form a sub-band and user k transmits its pilot on the k-th
subcarrier of each sub-band.  The per-sub-band LS estimate is
``H_hat_i = Y_p_i @ X_p_i^H`` with a diagonal unit-modulus pilot matrix,
then expanded to all subcarriers by zero-order hold (or, optionally,
linear interpolation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IllPosedError


@dataclass(frozen=True)
class PilotMap:
    """Comb pilot assignment: user k owns subcarriers {i*K + k}."""

    n_users: int
    n_subcarriers: int

    @property
    def n_subbands(self) -> int:
        return self.n_subcarriers // self.n_users

    def user_subcarriers(self, user: int) -> np.ndarray:
        if not 0 <= user < self.n_users:
            raise ConfigurationError(f"user {user} outside [0, {self.n_users})")
        return np.arange(user, self.n_subcarriers, self.n_users)

    def subband_of(self, subcarrier: int) -> int:
        return subcarrier // self.n_users


def allocate_pilots(n_users: int, n_subcarriers: int) -> PilotMap:
    if n_users < 1:
        raise ConfigurationError("need at least one user")
    if n_subcarriers % n_users:
        raise ConfigurationError(
            f"user count {n_users} must divide the {n_subcarriers} data subcarriers"
        )
    return PilotMap(n_users=n_users, n_subcarriers=n_subcarriers)


_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


def random_qpsk_pilots(pmap: PilotMap, rng_seed) -> np.ndarray:
    """Seeded random QPSK pilot values, one per (sub-band, user)."""
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    idx = rng.integers(0, 4, size=(pmap.n_subbands, pmap.n_users))
    return _QPSK[idx]


@dataclass
class ChannelEstimate:
    """LS estimates per sub-band plus their per-subcarrier expansion."""

    per_subband: np.ndarray     # (sub-band, element, user)
    per_subcarrier: np.ndarray  # (subcarrier, element, user)

    @property
    def n_users(self) -> int:
        return self.per_subband.shape[2]

    @property
    def n_elements(self) -> int:
        return self.per_subband.shape[1]


def expand_hold(per_subband: np.ndarray, n_users: int) -> np.ndarray:
    """Zero-order hold: each sub-band estimate covers its K subcarriers."""
    return np.repeat(per_subband, n_users, axis=0)


def expand_linear(per_subband: np.ndarray, n_users: int) -> np.ndarray:
    """Linear frequency interpolation anchored at each user's pilot tones."""
    n_subbands = per_subband.shape[0]
    k_users = per_subband.shape[2]
    m = np.arange(n_subbands * n_users, dtype=np.float64)
    out = np.empty((m.size, per_subband.shape[1], k_users), dtype=per_subband.dtype)
    for k in range(k_users):
        pos = (m - k) / n_users  # fractional sub-band index at each subcarrier
        j0 = np.clip(np.floor(pos).astype(int), 0, n_subbands - 1)
        j1 = np.clip(j0 + 1, 0, n_subbands - 1)
        w = np.clip(pos - j0, 0.0, 1.0)[:, np.newaxis]
        out[:, :, k] = (1.0 - w) * per_subband[j0, :, k] + w * per_subband[j1, :, k]
    return out


def ls_estimate_ul(
    y_pilot: np.ndarray,
    x_pilot: np.ndarray,
    pmap: PilotMap,
    expansion: str = "hold",
) -> ChannelEstimate:
    """Per-sub-band LS estimate from one received pilot OFDM symbol.

    ``y_pilot`` is (subcarrier, element); ``x_pilot`` is the
    (sub-band, user) matrix of transmitted unit-modulus pilot values.
    Because the pilot matrix of a sub-band is diagonal,
    ``H_hat_i[:, k] = y[i*K + k, :] * conj(x[i, k])``.
    """
    y = np.asarray(y_pilot)
    x = np.asarray(x_pilot)
    if y.ndim != 2 or y.shape[0] != pmap.n_subcarriers:
        raise ConfigurationError(
            f"pilot grid must be ({pmap.n_subcarriers}, elements), got {y.shape}"
        )
    if x.shape != (pmap.n_subbands, pmap.n_users):
        raise ConfigurationError(
            f"pilot values must be ({pmap.n_subbands}, {pmap.n_users}), got {x.shape}"
        )
    if np.any(np.abs(x) == 0.0):
        raise IllPosedError("zero pilot entry makes the LS estimate ill-posed")

    y_sb = y.reshape(pmap.n_subbands, pmap.n_users, y.shape[1])
    per_subband = np.einsum("ikn,ik->ink", y_sb, np.conj(x))
    if expansion == "hold":
        per_subcarrier = expand_hold(per_subband, pmap.n_users)
    elif expansion == "linear":
        per_subcarrier = expand_linear(per_subband, pmap.n_users)
    else:
        raise ConfigurationError(f"unknown expansion {expansion!r}")
    return ChannelEstimate(per_subband=per_subband, per_subcarrier=per_subcarrier)


def estimate_dl(y_pilot: np.ndarray, x_pilot: np.ndarray) -> np.ndarray:
    """Effective downlink channel estimate: y * conj(x), elementwise.

    With unit-modulus pilots this is the LS estimate of the beamformed
    scalar channel seen by each user on each sub-band.
    """
    y = np.asarray(y_pilot)
    x = np.asarray(x_pilot)
    if y.shape != x.shape:
        raise ConfigurationError(f"shape mismatch: {y.shape} vs {x.shape}")
    return y * np.conj(x)
