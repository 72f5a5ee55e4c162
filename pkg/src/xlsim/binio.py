"""Binary import/export for channel-style tensors and sample streams.

Tensor layout (little endian):
    3 x uint64   dims (m, n, k), row major payload order
    2 x float64  aux metadata (carrier frequency Hz, subcarrier spacing Hz;
                 zero when not applicable)
    payload      float64 pairs, real then imag, per entry

Stream layout (little endian):
    float64      sample rate (Hz)
    uint64       number of streams
    uint64       samples per stream
    uint32       bytes per scalar float (4 or 8)
    payload      float pairs, real then imag, stream major
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigurationError

_TENSOR_HEADER = np.dtype(
    [("m", "<u8"), ("n", "<u8"), ("k", "<u8"), ("aux0", "<f8"), ("aux1", "<f8")]
)
_STREAM_HEADER = np.dtype(
    [("rate", "<f8"), ("streams", "<u8"), ("samples", "<u8"), ("word", "<u4")]
)


def save_tensor(path, tensor: np.ndarray, aux0: float = 0.0, aux1: float = 0.0) -> None:
    arr = np.ascontiguousarray(tensor, dtype=np.complex128)
    if arr.ndim != 3:
        raise ConfigurationError("tensor export expects a 3-D array")
    header = np.zeros(1, dtype=_TENSOR_HEADER)
    header["m"], header["n"], header["k"] = arr.shape
    header["aux0"], header["aux1"] = aux0, aux1
    payload = np.empty(arr.shape + (2,), dtype="<f8")
    payload[..., 0] = arr.real
    payload[..., 1] = arr.imag
    with open(Path(path), "wb") as fh:
        header.tofile(fh)
        payload.tofile(fh)


def load_tensor(path):
    """Return ``(tensor, aux0, aux1)`` from a tensor file."""
    with open(Path(path), "rb") as fh:
        header = np.fromfile(fh, dtype=_TENSOR_HEADER, count=1)
        if header.size != 1:
            raise ConfigurationError(f"{path}: truncated tensor header")
        m, n, k = (int(header["m"][0]), int(header["n"][0]), int(header["k"][0]))
        payload = np.fromfile(fh, dtype="<f8", count=m * n * k * 2)
    if payload.size != m * n * k * 2:
        raise ConfigurationError(f"{path}: truncated tensor payload")
    payload = payload.reshape(m, n, k, 2)
    return payload[..., 0] + 1j * payload[..., 1], float(header["aux0"][0]), float(header["aux1"][0])


def save_stream(path, samples: np.ndarray, sample_rate_hz: float, word_bytes: int = 8) -> None:
    arr = np.atleast_2d(np.asarray(samples, dtype=np.complex128))
    if word_bytes not in (4, 8):
        raise ConfigurationError("word_bytes must be 4 (complex64) or 8 (complex128)")
    header = np.zeros(1, dtype=_STREAM_HEADER)
    header["rate"] = sample_rate_hz
    header["streams"], header["samples"] = arr.shape
    header["word"] = word_bytes
    ftype = "<f4" if word_bytes == 4 else "<f8"
    payload = np.empty(arr.shape + (2,), dtype=ftype)
    payload[..., 0] = arr.real
    payload[..., 1] = arr.imag
    with open(Path(path), "wb") as fh:
        header.tofile(fh)
        payload.tofile(fh)


def load_stream(path):
    """Return ``(samples, sample_rate_hz)`` from a stream file."""
    with open(Path(path), "rb") as fh:
        header = np.fromfile(fh, dtype=_STREAM_HEADER, count=1)
        if header.size != 1:
            raise ConfigurationError(f"{path}: truncated stream header")
        streams = int(header["streams"][0])
        samples = int(header["samples"][0])
        word = int(header["word"][0])
        ftype = "<f4" if word == 4 else "<f8"
        payload = np.fromfile(fh, dtype=ftype, count=streams * samples * 2)
    if payload.size != streams * samples * 2:
        raise ConfigurationError(f"{path}: truncated stream payload")
    payload = payload.reshape(streams, samples, 2).astype(np.float64)
    return payload[..., 0] + 1j * payload[..., 1], float(header["rate"][0])
