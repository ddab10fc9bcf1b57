"""Signal mathematics: power, SNR, gain solving, mixing and the SI-SDR family.

Every function accepts either an :class:`AudioBuffer` or a plain 1-D array.
Accumulations are done in float64 regardless of the storage dtype.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergentSnr, SignalError

DEFAULT_CEILING_DB = 60.0
# residual energy below this fraction of the reference energy counts as zero
RESIDUAL_FLOOR = 1e-12


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 1:
            raise SignalError(f"AudioBuffer must be 1-D, got shape {arr.shape}")
        if self.sample_rate <= 0:
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def as_array(buf) -> np.ndarray:
    """Return the samples of ``buf`` as a validated float64 vector."""
    x = np.asarray(buf.samples if isinstance(buf, AudioBuffer) else buf, dtype=np.float64)
    if x.ndim != 1:
        raise SignalError(f"expected a 1-D signal, got shape {x.shape}")
    if x.size == 0:
        raise SignalError("empty signal")
    if not np.all(np.isfinite(x)):
        raise SignalError("signal contains NaN or Inf")
    return x


def _same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise SignalError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")


def _rate(buf):
    return buf.sample_rate if isinstance(buf, AudioBuffer) else None


def power(buf) -> float:
    """Mean-square amplitude."""
    x = as_array(buf)
    return float(np.dot(x, x) / x.size)


def db(ratio: float) -> float:
    return 10.0 * np.log10(ratio)


def measure_snr(speech, noise) -> float:
    """SNR in dB of ``speech`` over ``noise``, computed on the full buffers."""
    s, n = as_array(speech), as_array(noise)
    _same_length(s, n)
    ps, pn = power(s), power(n)
    if pn == 0.0:
        raise DivergentSnr("noise has zero power")
    if ps == 0.0:
        raise DivergentSnr("speech has zero power")
    return float(db(ps / pn))


def gain_for_target_snr(speech, noise, target_db: float) -> float:
    """Amplitude gain ``g`` such that ``measure_snr(speech, g * noise) == target_db``."""
    ps, pn = power(speech), power(noise)
    if pn == 0.0 or ps == 0.0:
        raise DivergentSnr("gain is undefined for zero-power speech or noise")
    if not np.isfinite(target_db):
        raise SignalError(f"target SNR must be finite, got {target_db}")
    return float(np.sqrt(ps / (pn * 10.0 ** (target_db / 10.0))))


def mix(speech, noise, gain: float = 1.0):
    """``speech + gain * noise``. Returns an AudioBuffer when given AudioBuffers."""
    rs, rn = _rate(speech), _rate(noise)
    if rs is not None and rn is not None and rs != rn:
        raise SignalError(f"sample rate mismatch: {rs} vs {rn}")
    s, n = as_array(speech), as_array(noise)
    _same_length(s, n)
    out = s + gain * n
    rate = rs or rn
    return AudioBuffer(out, rate) if rate is not None else out


def _si_sdr_parts(est: np.ndarray, ref: np.ndarray):
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise SignalError("reference has zero energy")
    alpha = float(np.dot(est, ref)) / ref_energy
    target = alpha * ref
    residual = est - target
    return target, residual, ref_energy


def _clip_db(target_energy, residual_energy, ref_energy, ceiling):
    if target_energy == 0.0:
        return -ceiling, True
    if residual_energy < RESIDUAL_FLOOR * ref_energy:
        return ceiling, True
    value = db(target_energy / residual_energy)
    if value >= ceiling:
        return ceiling, True
    if value <= -ceiling:
        return -ceiling, True
    return float(value), False


def si_sdr(estimate, reference, ceiling: float = DEFAULT_CEILING_DB) -> float:
    """Scale-invariant SDR in dB, clipped to ``[-ceiling, ceiling]``.

    The estimate is projected onto the reference (no mean removal). A residual
    below ``1e-12`` of the reference energy is treated as a perfect estimate.
    """
    est, ref = as_array(estimate), as_array(reference)
    _same_length(est, ref)
    target, residual, ref_energy = _si_sdr_parts(est, ref)
    value, _ = _clip_db(float(np.dot(target, target)), float(np.dot(residual, residual)),
                        ref_energy, ceiling)
    return value


def si_sdr_with_grad(est: np.ndarray, ref: np.ndarray, ceiling: float = DEFAULT_CEILING_DB):
    """SI-SDR and its gradient with respect to ``est``.

    The gradient is zero wherever the value is clipped.
    """
    target, residual, ref_energy = _si_sdr_parts(est, ref)
    t_energy = float(np.dot(target, target))
    r_energy = float(np.dot(residual, residual))
    value, clipped = _clip_db(t_energy, r_energy, ref_energy, ceiling)
    if clipped:
        return value, np.zeros_like(est)
    scale = 10.0 / np.log(10.0)
    grad = scale * (2.0 * target / t_energy - 2.0 * residual / r_energy)
    return value, grad


def si_sdr_improvement(estimate, reference, mixture, ceiling: float = DEFAULT_CEILING_DB) -> float:
    return si_sdr(estimate, reference, ceiling) - si_sdr(mixture, reference, ceiling)


def mse(a, b) -> float:
    x, y = as_array(a), as_array(b)
    _same_length(x, y)
    d = x - y
    return float(np.dot(d, d) / d.size)
