"""Mono RIFF WAV reading and writing (IEEE float32 or 16-bit PCM)."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DataError

PCM16_SCALE = 32767.0
FORMATS = ("float32", "pcm16")


def write_wav(path, samples, sample_rate: int, fmt: str = "float32") -> None:
    x = np.asarray(samples, dtype=np.float64)
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.round(np.clip(x, -1.0, 1.0) * PCM16_SCALE).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}; expected one of {FORMATS}")
    wavfile.write(str(path), int(sample_rate), data)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Return ``(samples, sample_rate)``; PCM data is rescaled to [-1, 1]."""
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read WAV file {path}: {exc}") from exc
    if data.ndim != 1:
        raise DataError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        return data.astype(np.float64) / PCM16_SCALE, rate
    if data.dtype == np.float32:
        return data, rate
    raise DataError(f"{path}: unsupported sample type {data.dtype}")
