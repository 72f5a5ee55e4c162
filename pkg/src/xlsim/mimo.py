"""Linear detection and precoding, QAM mapping, and the QR-based LMMSE solve.

Per-subcarrier transforms for an N-element base station serving K users
(H is N x K):

    scheme   detection W (K x N)            precoding F (N x K)
    MR       H^H                            conj(H)
    ZF       (H^H H)^-1 H^H                 conj(H) (H^H H)^-T
    LMMSE    (H^H H + s2 I)^-1 H^H          conj(H) (H^H H + s2 I)^-T

The precoder of each scheme equals the transpose of its detector, so
precoders are built by transposition and then scaled to a per-subcarrier
power target (trace(F^H F) = P_dl / K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chanest import ChannelEstimate
from .errors import ConfigurationError, RankError, SolverError

SCHEMES = ("mr", "zf", "lmmse")

#: ZF refuses to invert when sigma_min < RANK_GUARD * sigma_max.
RANK_GUARD = 1e-10


@dataclass
class LinearTransform:
    """Per-subcarrier linear transforms with their scheme tag.

    ``matrices`` is (subcarrier, K, N) for detection and
    (subcarrier, N, K) for precoding.
    """

    matrices: np.ndarray
    scheme: str
    direction: str  # "detect" or "precode"
    noise_var: float | None = None
    power_dl: float | None = None

    @property
    def n_subcarriers(self) -> int:
        return self.matrices.shape[0]


def _channel_array(h) -> np.ndarray:
    if isinstance(h, ChannelEstimate):
        h = h.per_subcarrier
    arr = np.asarray(h, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ConfigurationError("channel must be (subcarriers, elements, users)")
    return arr


def _gram(h: np.ndarray) -> np.ndarray:
    return np.einsum("mnk,mnl->mkl", np.conj(h), h)


def _check_conditioning(gram: np.ndarray):
    # Eigenvalues of H^H H are the squared singular values of H.
    ev = np.linalg.eigvalsh(gram)
    largest = ev[:, -1]
    if np.any(largest <= 0):
        raise RankError("zero channel matrix cannot be inverted")
    ratio = np.sqrt(np.maximum(ev[:, 0], 0.0) / largest)
    if np.any(ratio < RANK_GUARD):
        raise RankError(
            "channel matrix is numerically rank deficient; use LMMSE instead of ZF"
        )


def detection_matrix(h_hat, scheme: str, noise_var: float | None = None) -> LinearTransform:
    """Build W_m per subcarrier for the requested scheme."""
    h = _channel_array(h_hat)
    scheme = scheme.lower()
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown scheme {scheme!r}, expected one of {SCHEMES}")
    hh = np.conj(np.transpose(h, (0, 2, 1)))  # (M, K, N)
    if scheme == "mr":
        w = hh
    else:
        gram = _gram(h)
        if scheme == "zf":
            if h.shape[1] < h.shape[2]:
                raise ConfigurationError("ZF needs at least as many elements as users")
            _check_conditioning(gram)
        else:
            if noise_var is None or noise_var <= 0:
                raise ConfigurationError("LMMSE needs a positive noise variance")
            gram = gram + noise_var * np.eye(h.shape[2])
        w = np.linalg.solve(gram, hh)
    return LinearTransform(w, scheme=scheme, direction="detect", noise_var=noise_var)


def precoding_matrix(
    h_hat,
    scheme: str,
    noise_var: float | None = None,
    power_dl: float = 1.0,
) -> LinearTransform:
    """Build F_m per subcarrier, scaled so trace(F^H F) = power_dl / K.

    A single scalar per subcarrier does the scaling, preserving the
    direction (and hence the ZF zero-interference property) of the
    unnormalized transform.
    """
    if power_dl <= 0:
        raise ConfigurationError("power_dl must be positive")
    w = detection_matrix(h_hat, scheme, noise_var)
    f = np.transpose(w.matrices, (0, 2, 1))  # F = W^T per subcarrier
    k_users = f.shape[2]
    norms = np.einsum("mnk,mnk->m", np.conj(f), f).real
    if np.any(norms <= 0):
        raise RankError("zero-power precoder column; channel estimate is degenerate")
    f = f * np.sqrt(power_dl / k_users / norms)[:, np.newaxis, np.newaxis]
    return LinearTransform(f, scheme=w.scheme, direction="precode",
                           noise_var=noise_var, power_dl=power_dl)


def _matrices(transform) -> np.ndarray:
    return transform.matrices if isinstance(transform, LinearTransform) else np.asarray(transform)


def detect(transform, y_grid: np.ndarray) -> np.ndarray:
    """Apply s_hat_m = W_m y_m per subcarrier.

    ``y_grid`` is (subcarrier, ..., element); the element axis is
    contracted and replaced by the user axis.
    """
    w = _matrices(transform)
    y = np.asarray(y_grid)
    if y.shape[0] != w.shape[0] or y.shape[-1] != w.shape[2]:
        raise ConfigurationError(f"grid {y.shape} does not match transforms {w.shape}")
    return np.einsum("mkn,m...n->m...k", w, y)


def precode(transform, x_grid: np.ndarray) -> np.ndarray:
    """Apply F_m x_m per subcarrier, producing one stream per element."""
    f = _matrices(transform)
    x = np.asarray(x_grid)
    if x.shape[0] != f.shape[0] or x.shape[-1] != f.shape[2]:
        raise ConfigurationError(f"grid {x.shape} does not match transforms {f.shape}")
    return np.einsum("mnk,m...k->m...n", f, x)


def qr_lmmse_solve(h_hat, noise_var: float, y_grid: np.ndarray) -> np.ndarray:
    """LMMSE detection via QR of the augmented matrix [H; sigma*I].

    Solves the regularized least-squares system whose normal equations
    are (H^H H + s2 I) s = H^H y without ever forming H^H H: with
    A = [H; sigma*I] and b = [y; 0], QR gives s = R^-1 Q^H b.  The
    result matches the explicit LMMSE formula but with the squared
    condition number of A rather than of H^H H.
    """
    if noise_var <= 0:
        raise ConfigurationError("noise variance must be positive")
    single = not isinstance(h_hat, ChannelEstimate) and np.asarray(h_hat).ndim == 2
    h = _channel_array(h_hat)
    m_sc, n_el, k_users = h.shape
    y = np.asarray(y_grid, dtype=np.complex128)
    if single:
        y = y[np.newaxis]
    if y.shape[0] != m_sc or y.shape[-1] != n_el:
        raise ConfigurationError(f"observations {y.shape} do not match channel {h.shape}")

    lead = y.shape[1:-1]
    y2 = y.reshape(m_sc, -1, n_el)  # (M, T, N)
    sigma = np.sqrt(noise_var)
    aug = np.concatenate(
        [h, sigma * np.broadcast_to(np.eye(k_users), (m_sc, k_users, k_users))], axis=1
    )
    q, r = np.linalg.qr(aug)  # reduced: Q (M, N+K, K), R (M, K, K)
    diag = np.abs(np.einsum("mkk->mk", r))
    if np.any(diag.min(axis=1) < RANK_GUARD * diag.max(axis=1)):
        raise SolverError("augmented matrix is numerically rank deficient")
    # Q^H [y; 0] only needs the first N rows of Q since b is zero below them.
    rhs = np.einsum("mnk,mtn->mkt", np.conj(q[:, :n_el, :]), y2)
    s = np.linalg.solve(r, rhs)  # back-substitution on the triangular factor
    s = np.transpose(s, (0, 2, 1)).reshape((m_sc,) + lead + (k_users,))
    return s[0] if single else s


# ---------------------------------------------------------------------------
# Gray-mapped square QAM with unit average power.

_QAM_ORDERS = (4, 16, 64, 256)
_QAM_NAMES = {"qpsk": 4, "4qam": 4, "16qam": 16, "64qam": 64, "256qam": 256}


def qam_order(constellation) -> int:
    """Normalize a constellation spec ("qpsk", "64qam", 64, ...) to its order."""
    if isinstance(constellation, str):
        try:
            return _QAM_NAMES[constellation.lower()]
        except KeyError:
            raise ConfigurationError(f"unknown constellation {constellation!r}") from None
    order = int(constellation)
    if order not in _QAM_ORDERS:
        raise ConfigurationError(f"QAM order must be one of {_QAM_ORDERS}, got {order}")
    return order


def _axis_levels(order: int):
    side = int(np.sqrt(order))
    scale = 1.0 / np.sqrt(2.0 * (side**2 - 1) / 3.0)
    idx = np.arange(side)
    gray = idx ^ (idx >> 1)
    # position of each Gray label along the amplitude axis
    pos_of_label = np.empty(side, dtype=int)
    pos_of_label[gray] = idx
    amplitudes = (2 * idx - (side - 1)) * scale
    return side, scale, gray, pos_of_label, amplitudes


def qam_symbols(indices: np.ndarray, constellation) -> np.ndarray:
    """Map integer symbol indices to Gray-coded QAM points (unit mean power)."""
    order = qam_order(constellation)
    side, _, _, pos_of_label, amp = _axis_levels(order)
    idx = np.asarray(indices)
    label_i = idx // side
    label_q = idx % side
    return amp[pos_of_label[label_i]] + 1j * amp[pos_of_label[label_q]]


def qam_demap(symbols: np.ndarray, constellation) -> np.ndarray:
    """Nearest-neighbour slicing back to integer symbol indices."""
    order = qam_order(constellation)
    side, scale, gray, _, _ = _axis_levels(order)
    x = np.asarray(symbols)
    pos_i = np.clip(np.round((x.real / scale + (side - 1)) / 2).astype(int), 0, side - 1)
    pos_q = np.clip(np.round((x.imag / scale + (side - 1)) / 2).astype(int), 0, side - 1)
    return gray[pos_i] * side + gray[pos_q]


def constellation_points(constellation) -> np.ndarray:
    order = qam_order(constellation)
    return qam_symbols(np.arange(order), order)


def bits_per_symbol(constellation) -> int:
    return int(np.log2(qam_order(constellation)))


def apply_reciprocity(h_ul: np.ndarray, calibration: np.ndarray | None = None) -> np.ndarray:
    """Downlink channel from the uplink tensor: H_dl_m = H_ul_m^T.

    ``calibration`` optionally applies a multiplicative per-chain
    complex error before transposition, modelling imperfect TDD
    reciprocity calibration.
    """
    h = np.asarray(h_ul)
    if calibration is not None:
        cal = np.asarray(calibration)
        if cal.shape != (h.shape[1],):
            raise ConfigurationError(
                f"calibration must have one entry per chain ({h.shape[1]}), got {cal.shape}"
            )
        h = h * cal[np.newaxis, :, np.newaxis]
    return np.transpose(h, (0, 2, 1))
