"""PSS generation and detection for BS/user frame timing.

The synchronization signal is a 127-length Zadoff-Chu sequence mapped
onto the 127 central data subcarriers of the first OFDM symbol of the
frame and detected by cross-correlating the received stream against the
locally generated time-domain replica (CP included).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, DomainError, NoSyncError
from .numerology import Numerology
from .ofdm import SampleStream

PSS_LENGTH = 127

#: Default ratio of correlation peak to median magnitude required for sync.
DEFAULT_PEAK_THRESHOLD = 8.0


@dataclass(frozen=True)
class PssSequence:
    seq: np.ndarray
    root: int


def generate_pss(root: int) -> PssSequence:
    """Zadoff-Chu sequence z[n] = exp(-j*pi*root*n*(n+1)/127), n in [0, 127)."""
    if not (1 <= root <= PSS_LENGTH - 1):
        raise DomainError(f"ZC root must be in [1, {PSS_LENGTH - 1}], got {root}")
    n = np.arange(PSS_LENGTH)
    seq = np.exp(-1j * np.pi * root * n * (n + 1) / PSS_LENGTH)
    return PssSequence(seq=seq, root=root)


def pss_subcarrier_rows(numerology: Numerology) -> np.ndarray:
    """Grid rows of the 127 central data subcarriers carrying the PSS."""
    if numerology.n_data_sc < PSS_LENGTH:
        raise ConfigurationError(
            f"numerology has {numerology.n_data_sc} data subcarriers, "
            f"PSS needs at least {PSS_LENGTH}"
        )
    start = (numerology.n_data_sc - PSS_LENGTH) // 2
    return np.arange(start, start + PSS_LENGTH)


def pss_waveform(pss: PssSequence, numerology: Numerology) -> np.ndarray:
    """Time-domain samples of the PSS OFDM symbol, long CP included.

    This is the in-frame waveform starting at frame sample 0 (the PSS
    occupies the first symbol of slot 0).
    """
    n_fft = numerology.fft_size
    spectrum = np.zeros(n_fft, dtype=np.complex128)
    bins = numerology.subcarrier_bins()[pss_subcarrier_rows(numerology)]
    spectrum[bins] = pss.seq
    body = np.fft.ifft(spectrum) * np.sqrt(n_fft)
    return np.concatenate([body[n_fft - numerology.cp_long :], body])


def detect_pss(
    rx,
    local: PssSequence,
    numerology: Numerology,
    threshold: float = DEFAULT_PEAK_THRESHOLD,
):
    """Locate the PSS by cross-correlation over one frame of lags.

    Returns ``(offset_samples, peak_metric)`` where the offset is the
    lag of the correlation peak (the frame start, since the template
    begins at frame sample 0) and the metric is the ratio of the peak
    to the median correlation magnitude.  Raises :class:`NoSyncError`
    when the metric falls below ``threshold``.
    """
    samples = rx.samples[0] if isinstance(rx, SampleStream) else np.asarray(rx).ravel()
    template = pss_waveform(local, numerology)
    frame = numerology.frame_samples
    if samples.size < frame:
        raise ConfigurationError(
            f"need at least one frame ({frame} samples) of input, got {samples.size}"
        )
    corr = fftconvolve(samples, np.conj(template[::-1]), mode="valid")
    window = min(frame, corr.size)
    mag = np.abs(corr[:window])
    offset = int(np.argmax(mag))
    peak = float(mag[offset])
    med = float(np.median(mag))
    metric = peak / med if med > 0 else np.inf
    if peak == 0.0 or metric < threshold:
        raise NoSyncError(f"no PSS found: peak/median = {metric:.2f} < {threshold}")
    return offset, metric


def align_frame(stream, offset: int):
    """Rotate a stream so that sample 0 is the frame start."""
    if isinstance(stream, SampleStream):
        return SampleStream(np.roll(stream.samples, -offset, axis=-1), stream.sample_rate_hz)
    return np.roll(np.asarray(stream), -offset, axis=-1)
