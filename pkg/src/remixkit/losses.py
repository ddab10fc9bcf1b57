"""Student/teacher training losses and their gradients w.r.t. the speech estimate.

Batch losses are means over the batch (not sums), so the scale does not depend
on the batch size. When a model is the consistency decomposition
``noise_est = mixture - speech_est``, gradients of noise terms flow back to the
speech estimate with a negative sign; all gradients here are w.r.t. speech_est.
"""
from __future__ import annotations

import logging

import numpy as np

from .signal import DEFAULT_CEILING_DB, si_sdr_with_grad

log = logging.getLogger(__name__)

LOSS_KINDS = ("neg_si_sdr", "mse")


def _weights(weights, b: int) -> np.ndarray:
    if weights is None:
        return np.full(b, 1.0 / b)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (b,):
        raise ValueError(f"expected {b} per-sample weights, got shape {w.shape}")
    return w / b


def _neg_si_sdr_term(est, ref, ceiling):
    """``(loss, d loss / d est, used_fallback)`` for one sample."""
    if not np.any(ref):
        d = est - ref
        return float(np.dot(d, d) / d.size), 2.0 * d / d.size, True
    value, grad = si_sdr_with_grad(est, ref, ceiling)
    return -value, -grad, False


def neg_si_sdr_pair(speech_est, mixture, speech_target, noise_target, weights=None,
                    ceiling: float = DEFAULT_CEILING_DB):
    """Two-term negative SI-SDR on the speech estimate and the implied noise estimate.

    Returns ``(loss, grad_speech, n_fallback)``. A zero-power target switches
    that term to MSE for that sample.
    """
    speech_est = np.atleast_2d(np.asarray(speech_est, dtype=np.float64))
    mixture = np.atleast_2d(np.asarray(mixture, dtype=np.float64))
    st = np.atleast_2d(np.asarray(speech_target, dtype=np.float64))
    nt = np.atleast_2d(np.asarray(noise_target, dtype=np.float64))
    b = speech_est.shape[0]
    w = _weights(weights, b)
    noise_est = mixture - speech_est
    grad = np.zeros_like(speech_est)
    total, fallbacks = 0.0, 0
    for i in range(b):
        ls, gs, fs = _neg_si_sdr_term(speech_est[i], st[i], ceiling)
        ln, gn, fn = _neg_si_sdr_term(noise_est[i], nt[i], ceiling)
        fallbacks += fs + fn
        total += w[i] * (ls + ln)
        grad[i] = w[i] * (gs - gn)
    if fallbacks:
        log.info("%d loss terms fell back to MSE for zero-power targets", fallbacks)
    return total, grad, fallbacks


def remixit_loss(student_speech, student_noise, pseudo_speech, pseudo_noise,
                 ceiling: float = DEFAULT_CEILING_DB) -> float:
    """Batch mean of ``-SI-SDR(s_hat, s_tilde) - SI-SDR(n_hat, P n_tilde)``."""
    student_speech = np.atleast_2d(np.asarray(student_speech, dtype=np.float64))
    mixture = student_speech + np.atleast_2d(np.asarray(student_noise, dtype=np.float64))
    loss, _, _ = neg_si_sdr_pair(student_speech, mixture, pseudo_speech, pseudo_noise, ceiling=ceiling)
    return loss


def mse_loss(speech_est, target, weights=None):
    """Batch-mean MSE and its gradient."""
    speech_est = np.atleast_2d(np.asarray(speech_est, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if speech_est.shape != target.shape:
        raise ValueError(f"shape mismatch: {speech_est.shape} vs {target.shape}")
    b, t = speech_est.shape
    w = _weights(weights, b)
    d = speech_est - target
    per = np.einsum("bt,bt->b", d, d) / t
    return float(np.dot(w, per)), (2.0 / t) * w[:, None] * d


def re2re_loss(student_speech, second_remix) -> float:
    """Noise2Noise loss: batch-mean MSE between the student speech estimate and x_bar."""
    return mse_loss(student_speech, second_remix)[0]


def loss_and_grad(kind: str, speech_est, mixture, targets, weights=None,
                  ceiling: float = DEFAULT_CEILING_DB):
    """Dispatch on ``kind``; ``targets`` is ``(speech, noise)`` for neg_si_sdr, one array for mse."""
    if kind == "neg_si_sdr":
        speech_t, noise_t = targets
        loss, grad, _ = neg_si_sdr_pair(speech_est, mixture, speech_t, noise_t, weights, ceiling)
        return loss, grad
    if kind == "mse":
        return mse_loss(speech_est, targets, weights)
    raise ValueError(f"unsupported loss kind {kind!r}; expected one of {LOSS_KINDS}")
