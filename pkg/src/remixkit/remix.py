"""Batch remixing of teacher estimates, with an optional SNR control module.

Batches are ``(B, T)`` arrays. For permutation ``P`` the noise paired with
speech ``b`` is ``noise[P[b]]``. When SNR control is enabled, only that
shuffled noise is rescaled; the estimated speech is left untouched because it
is also the student's regression target.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .curriculum import SnrDistribution, sample_snr

log = logging.getLogger(__name__)

GAIN_MIN, GAIN_MAX = 1e-3, 1e3
# mean-square power below which an estimate counts as near-silent (-100 dB re full scale)
SILENCE_POWER = 1e-10


@dataclass(frozen=True)
class Permutation:
    mapping: np.ndarray
    seed: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.int64)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError(f"not a permutation: {m.tolist()}")
        object.__setattr__(self, "mapping", m)

    def __len__(self):
        return self.mapping.size

    @classmethod
    def identity(cls, size: int) -> "Permutation":
        return cls(np.arange(size))

    def matrix(self) -> np.ndarray:
        """Permutation matrix ``M`` with ``(M @ noise)[b] == noise[mapping[b]]``."""
        out = np.zeros((len(self), len(self)))
        out[np.arange(len(self)), self.mapping] = 1.0
        return out


def sample_permutation(batch_size: int, rng: np.random.Generator) -> Permutation:
    """Uniform draw over all ``batch_size!`` permutations; fixed points allowed."""
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    return Permutation(rng.permutation(batch_size))


@dataclass
class RemixEvents:
    clamped: int = 0
    zero_power: int = 0


@dataclass
class RemixBatch:
    teacher_speech: np.ndarray
    teacher_noise: np.ndarray
    permutation_p: Permutation
    gains_p: np.ndarray
    target_snrs_p: np.ndarray | None
    mixtures_tilde: np.ndarray
    permutation_q: Permutation | None = None
    gains_q: np.ndarray | None = None
    target_snrs_q: np.ndarray | None = None
    mixtures_bar: np.ndarray | None = None
    events: RemixEvents = field(default_factory=RemixEvents)

    @property
    def shuffled_noise_p(self) -> np.ndarray:
        """Scaled shuffled noise, the RemixIT noise pseudo-target."""
        return self.gains_p[:, None] * self.teacher_noise[self.permutation_p.mapping]

    @property
    def shuffled_noise_q(self) -> np.ndarray:
        return self.gains_q[:, None] * self.teacher_noise[self.permutation_q.mapping]


def _powers(x: np.ndarray) -> np.ndarray:
    return np.einsum("bt,bt->b", x, x) / x.shape[1]


def _controlled_gains(speech, noise, targets, events: RemixEvents) -> np.ndarray:
    """Exact gains toward ``targets``; clamped only for near-silent estimates.

    The scaled noise power is ``P_speech * 10**(-t/10)``, bounded by the target
    range, so an exact gain is safe whenever both powers are meaningful.
    """
    ps, pn = _powers(speech), _powers(noise)
    gains = np.ones(speech.shape[0])
    for b in range(speech.shape[0]):
        if ps[b] == 0.0 or pn[b] == 0.0:
            events.zero_power += 1
            log.warning("sample %d has zero-power estimated speech or noise; using gain 1", b)
            continue
        g = np.sqrt(ps[b] / (pn[b] * 10.0 ** (targets[b] / 10.0)))
        if min(ps[b], pn[b]) < SILENCE_POWER and not GAIN_MIN <= g <= GAIN_MAX:
            events.clamped += 1
            g = min(max(g, GAIN_MIN), GAIN_MAX)
        gains[b] = g
    return gains


def _pairing(speech, noise, perm, dist, rng, targets, events):
    if len(perm) != speech.shape[0]:
        raise ValueError(f"permutation size {len(perm)} != batch size {speech.shape[0]}")
    shuffled = noise[perm.mapping]
    if dist is None and targets is None:
        gains = np.ones(speech.shape[0])
        tgt = None
    else:
        # all targets are drawn before any mixing so results do not depend on scheduling
        tgt = (np.asarray(targets, dtype=float) if targets is not None
               else np.atleast_1d(sample_snr(dist, rng, speech.shape[0])).astype(float))
        gains = _controlled_gains(speech, shuffled, tgt, events)
    return gains, tgt, speech + gains[:, None] * shuffled


def _check_batch(speech, noise):
    speech = np.asarray(speech, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if speech.ndim != 2 or speech.shape != noise.shape:
        raise ValueError(f"speech {speech.shape} and noise {noise.shape} must be equal (B, T) arrays")
    return speech, noise


def remix_once(speech, noise, perm: Permutation, dist: SnrDistribution | None = None,
               rng: np.random.Generator | None = None, targets=None) -> RemixBatch:
    """Bootstrapped mixtures ``speech + g * noise[P]``; ``g == 1`` when ``dist`` is None."""
    speech, noise = _check_batch(speech, noise)
    events = RemixEvents()
    gains, tgt, mixed = _pairing(speech, noise, perm, dist, rng, targets, events)
    return RemixBatch(speech, noise, perm, gains, tgt, mixed, events=events)


def remix_twice(speech, noise, perm_p: Permutation, perm_q: Permutation,
                dist: SnrDistribution | None = None, rng: np.random.Generator | None = None,
                targets_p=None, targets_q=None) -> RemixBatch:
    """Two independent remixes of the same estimates (pseudo noisy-noisy pairs).

    With SNR control, each mixture gets its own independent target draw.
    """
    speech, noise = _check_batch(speech, noise)
    events = RemixEvents()
    gp, tp, x_tilde = _pairing(speech, noise, perm_p, dist, rng, targets_p, events)
    gq, tq, x_bar = _pairing(speech, noise, perm_q, dist, rng, targets_q, events)
    return RemixBatch(speech, noise, perm_p, gp, tp, x_tilde, perm_q, gq, tq, x_bar, events)


def measured_snrs(speech: np.ndarray, scaled_noise: np.ndarray) -> np.ndarray:
    """Per-row SNR in dB; NaN where either power is zero."""
    ps, pn = _powers(speech), _powers(scaled_noise)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10.0 * np.log10(ps / pn)
    out[(ps == 0) | (pn == 0)] = np.nan
    return out


REMIX_LOG_HEADER = ["epoch", "batch", "sample", "perm_index", "target_snr_db",
                    "measured_snr_db", "gain", "pairing"]


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    return repr(float(v))


class RemixLog:
    """CSV sink for per-sample remix records; one row per remixed pairing."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(REMIX_LOG_HEADER)

    def write(self, epoch: int, batch: int, rb: RemixBatch) -> None:
        pairings = [("p", rb.permutation_p, rb.gains_p, rb.target_snrs_p, rb.shuffled_noise_p)]
        if rb.mixtures_bar is not None:
            pairings.append(("q", rb.permutation_q, rb.gains_q, rb.target_snrs_q, rb.shuffled_noise_q))
        for name, perm, gains, targets, scaled in pairings:
            measured = measured_snrs(rb.teacher_speech, scaled)
            for b in range(len(perm)):
                self._w.writerow([epoch, batch, b, int(perm.mapping[b]),
                                  _fmt(None if targets is None else targets[b]),
                                  _fmt(measured[b]), _fmt(gains[b]), name])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_remix_log(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
