"""OFDM modulation and demodulation between resource grids and sample streams.

Conventions: unitary DFT in both directions (energy preserving), data
subcarriers mapped symmetrically around an unused DC bin, cyclic prefix
lengths taken from the numerology with the long CP on the first symbol
of each slot.  Streams are assumed to start on a slot boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FramingError
from .numerology import Numerology


@dataclass
class ResourceGrid:
    """Frequency-domain symbols indexed (subcarrier, OFDM symbol, stream)."""

    symbols: np.ndarray
    numerology: Numerology

    def __post_init__(self):
        sym = np.asarray(self.symbols)
        if sym.ndim == 2:
            sym = sym[:, :, np.newaxis]
        if sym.ndim != 3:
            raise ConfigurationError("resource grid must be (subcarriers, symbols, streams)")
        if sym.shape[0] != self.numerology.n_data_sc:
            raise ConfigurationError(
                f"grid has {sym.shape[0]} subcarriers, numerology expects "
                f"{self.numerology.n_data_sc}"
            )
        self.symbols = np.asarray(sym, dtype=np.complex128)

    @property
    def n_symbols(self) -> int:
        return self.symbols.shape[1]

    @property
    def n_streams(self) -> int:
        return self.symbols.shape[2]


@dataclass
class SampleStream:
    """Time-domain complex baseband samples, one row per stream."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2:
            raise ConfigurationError("sample stream must be (streams, samples)")
        self.samples = arr

    @property
    def n_streams(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


def _symbol_layout(numerology: Numerology, n_symbols: int):
    """Per-symbol (start, cp) offsets for a stream beginning on a slot boundary."""
    starts = np.empty(n_symbols, dtype=np.int64)
    cps = np.empty(n_symbols, dtype=np.int64)
    pos = 0
    for s in range(n_symbols):
        cp = numerology.cp_length(s % numerology.symbols_per_slot)
        starts[s] = pos
        cps[s] = cp
        pos += cp + numerology.fft_size
    return starts, cps, pos


def modulate(grid: ResourceGrid, numerology: Numerology | None = None) -> SampleStream:
    """IFFT each OFDM symbol onto the mapped subcarriers and prepend its CP."""
    numerology = numerology or grid.numerology
    if numerology.n_data_sc != grid.symbols.shape[0]:
        raise ConfigurationError("grid does not match numerology")
    n_fft = numerology.fft_size
    bins = numerology.subcarrier_bins()
    n_symbols = grid.n_symbols
    starts, cps, total = _symbol_layout(numerology, n_symbols)

    spectrum = np.zeros((grid.n_streams, n_symbols, n_fft), dtype=np.complex128)
    spectrum[:, :, bins] = grid.symbols.transpose(2, 1, 0)
    time = np.fft.ifft(spectrum, axis=-1) * np.sqrt(n_fft)

    out = np.empty((grid.n_streams, total), dtype=np.complex128)
    for s in range(n_symbols):
        cp = int(cps[s])
        start = int(starts[s])
        body = time[:, s, :]
        out[:, start : start + cp] = body[:, n_fft - cp :]
        out[:, start + cp : start + cp + n_fft] = body
    return SampleStream(out, numerology.sample_rate_hz)


def demodulate(stream: SampleStream, numerology: Numerology) -> ResourceGrid:
    """Strip CPs, FFT each symbol and extract the mapped subcarriers.

    The stream must contain a whole number of OFDM symbols starting on a
    slot boundary; anything else raises :class:`FramingError`.
    """
    samples = stream.samples
    n_fft = numerology.fft_size
    bins = numerology.subcarrier_bins()

    # Count whole symbols and verify exact length.
    n_symbols = 0
    pos = 0
    total = samples.shape[1]
    while pos < total:
        cp = numerology.cp_length(n_symbols % numerology.symbols_per_slot)
        if pos + cp + n_fft > total:
            raise FramingError(
                f"stream of {total} samples does not end on a symbol boundary"
            )
        pos += cp + n_fft
        n_symbols += 1
    starts, cps, _ = _symbol_layout(numerology, n_symbols)

    grid = np.empty((numerology.n_data_sc, n_symbols, samples.shape[0]), dtype=np.complex128)
    for s in range(n_symbols):
        begin = int(starts[s] + cps[s])
        body = samples[:, begin : begin + n_fft]
        spectrum = np.fft.fft(body, axis=-1) / np.sqrt(n_fft)
        grid[:, s, :] = spectrum[:, bins].T
    return ResourceGrid(grid, numerology)
