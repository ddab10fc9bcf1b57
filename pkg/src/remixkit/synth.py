"""Deterministic pseudo-speech and pseudo-noise signal families.

Pseudo-speech is a sum of 3 to 5 harmonics of a random fundamental in
[80, 300] Hz, each with its own slow amplitude modulation, gated by a
syllable-rate envelope so that the signal has short pauses.

Pseudo-noise is either pink noise (1/f power spectrum, shaped in the
frequency domain) or white noise band-passed through a random Butterworth
band. The family is drawn per sample.
"""
from __future__ import annotations

import numpy as np
from scipy import signal as sps

SPEECH_RMS = 0.1
NOISE_KINDS = ("pink", "bandpass")
PINK_FLOOR_HZ = 50.0


def pseudo_speech(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    t = np.arange(n) / sample_rate
    f0 = rng.uniform(80.0, 300.0)
    n_harm = int(rng.integers(3, 6))
    vibrato = 1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * f0 * np.cumsum(vibrato) / sample_rate
    out = np.zeros(n)
    for k in range(1, n_harm + 1):
        if k * f0 >= 0.45 * sample_rate:
            break
        amp = rng.uniform(0.4, 1.0) / k
        am = 1.0 + 0.15 * np.sin(2 * np.pi * rng.uniform(1.0, 5.0) * t + rng.uniform(0, 2 * np.pi))
        out += amp * am * np.sin(k * phase + rng.uniform(0, 2 * np.pi))
    # syllable gate: raised sine clipped to [0, 1], pauses of roughly 15%
    gate = 5.0 * (np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * t + rng.uniform(0, 2 * np.pi)) + 0.8)
    gate = np.clip(gate, 0.0, 1.0)
    gate = np.convolve(gate, np.hanning(min(int(0.01 * sample_rate) + 1, n)), mode="same")
    if gate.max() <= 0.0:
        # chunk shorter than a pause
        gate = np.ones(n)
    out *= gate / gate.max()
    return out * (SPEECH_RMS / np.sqrt(np.mean(out**2)))


def pink_noise(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    shape = 1.0 / np.sqrt(np.maximum(freqs, PINK_FLOOR_HZ))
    shape[freqs < PINK_FLOOR_HZ] = 0.0
    out = np.fft.irfft(spec * shape, n)
    return out - out.mean()


def bandpass_noise(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    nyq = sample_rate / 2
    lo = rng.uniform(100.0, 0.25 * nyq)
    hi = min(lo * rng.uniform(2.0, 8.0), 0.95 * nyq)
    sos = sps.butter(4, [lo, hi], btype="bandpass", fs=sample_rate, output="sos")
    return sps.sosfilt(sos, rng.standard_normal(n))


def pseudo_noise(rng: np.random.Generator, n: int, sample_rate: int) -> tuple[np.ndarray, str]:
    kind = NOISE_KINDS[int(rng.integers(0, len(NOISE_KINDS)))]
    out = pink_noise(rng, n, sample_rate) if kind == "pink" else bandpass_noise(rng, n, sample_rate)
    return out / np.sqrt(np.mean(out**2)), kind
