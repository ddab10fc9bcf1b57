"""Supervised teacher training and remix-based student adaptation.

Randomness is derived from ``(seed, purpose, epoch, batch)`` keyed streams, so
every run is a pure function of its config and data.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .config import TrainConfig
from .dataset import CorpusManifest, load_arrays
from .errors import DataError, NumericalAbort
from .losses import loss_and_grad
from .model import ModelParameters, backward_batch, forward_batch, init_params, sgd_step
from .remix import Permutation, RemixBatch, RemixLog, remix_once, remix_twice, sample_permutation

log = logging.getLogger(__name__)

# stream purposes
_ORDER, _REMIX = 1, 2

LOSS_HEADER = ["epoch", "batch", "loss", "method", "snr_dist_lo", "snr_dist_hi"]


def wma_update(teacher: ModelParameters, student: ModelParameters, gamma: float) -> ModelParameters:
    """Teacher <- gamma * student + (1 - gamma) * teacher, element-wise."""
    teacher.check_layout(student)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return teacher.replace(gamma * student.values + (1.0 - gamma) * teacher.values)


def backward(params: ModelParameters, mixture, loss_kind: str, targets, weights=None,
             ceiling: float = 60.0) -> np.ndarray:
    """Gradient of the batch loss w.r.t. the flat parameter vector."""
    speech, _, cache = forward_batch(params, np.atleast_2d(mixture), keep_cache=True)
    _, g = loss_and_grad(loss_kind, speech, np.atleast_2d(mixture), targets, weights, ceiling)
    return backward_batch(params, cache, g)


@dataclass
class TrainState:
    epoch: int
    teacher: ModelParameters
    student: ModelParameters | None = None
    loss_history: list[float] = field(default_factory=list)


def batch_order(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled full batches for one epoch; a trailing partial batch is dropped."""
    order = np.random.default_rng([seed, _ORDER, epoch]).permutation(n)
    n_batches = n // batch_size
    return [order[i * batch_size:(i + 1) * batch_size] for i in range(n_batches)]


class _LossWriter:
    def __init__(self, path):
        self._fh = open(path, "w", newline="") if path else None
        if self._fh:
            self._w = csv.writer(self._fh, lineterminator="\n")
            self._w.writerow(LOSS_HEADER)

    def write(self, epoch, batch, loss, method, dist):
        if self._fh:
            lo = "" if dist is None else repr(float(dist.lo))
            hi = "" if dist is None else repr(float(dist.hi))
            self._w.writerow([epoch, batch, repr(float(loss)), method, lo, hi])

    def close(self):
        if self._fh:
            self._fh.close()


def _check_loss(loss: float, epoch: int, batch: int) -> None:
    if not np.isfinite(loss):
        raise NumericalAbort(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")


def _periodic_path(out: Path, epoch: int) -> Path:
    return out.with_name(f"{out.stem}.ep{epoch:04d}{out.suffix}")


def train_supervised(manifest: CorpusManifest, cfg: TrainConfig, out_path=None,
                     loss_csv=None, init: ModelParameters | None = None) -> Checkpoint:
    """Fit a teacher on paired data with negative SI-SDR on both outputs."""
    data = load_arrays(manifest, ("mixture", "speech", "noise"))
    params = init or init_params(cfg.arch, cfg.seed, cfg.init)
    n = len(manifest)
    if n < cfg.batch_size:
        raise DataError(f"corpus has {n} samples, fewer than batch_size {cfg.batch_size}")
    trace = []
    writer = _LossWriter(loss_csv)
    out_path = Path(out_path) if out_path else None
    try:
        for epoch in range(cfg.epochs):
            losses = []
            for j, idx in enumerate(batch_order(n, cfg.batch_size, cfg.seed, epoch)):
                x = data["mixture"][idx].astype(np.float64)
                s = data["speech"][idx].astype(np.float64)
                nz = data["noise"][idx].astype(np.float64)
                est, _, cache = forward_batch(params, x, keep_cache=True)
                loss, g = loss_and_grad("neg_si_sdr", est, x, (s, nz), ceiling=cfg.si_sdr_ceiling)
                _check_loss(loss, epoch, j)
                params = sgd_step(params, backward_batch(params, cache, g), cfg.learning_rate)
                losses.append(loss)
                writer.write(epoch, j, loss, "supervised", None)
            trace.append(float(np.mean(losses)))
            log.info("teacher epoch %d: loss %.4f", epoch, trace[-1])
            ckpt = Checkpoint(params, "teacher", epoch + 1, manifest.sample_rate,
                              loss_trace=list(trace), config=cfg.to_mapping())
            if out_path and cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0 \
                    and epoch + 1 < cfg.epochs:
                save_checkpoint(ckpt, _periodic_path(out_path, epoch + 1))
    finally:
        writer.close()
    if out_path:
        save_checkpoint(ckpt, out_path)
    return ckpt


def remix_batch(cfg: TrainConfig, teacher_speech, teacher_noise, dist, epoch: int, batch: int) -> RemixBatch:
    """Draw permutations (and SNR targets) for one batch and remix the teacher estimates."""
    rng = np.random.default_rng([cfg.seed, _REMIX, epoch, batch])
    b = teacher_speech.shape[0]
    if cfg.identity_permutations:
        perm_p, perm_q = Permutation.identity(b), Permutation.identity(b)
    else:
        perm_p = sample_permutation(b, rng)
        perm_q = sample_permutation(b, rng)
    if cfg.method == "re2re":
        return remix_twice(teacher_speech, teacher_noise, perm_p, perm_q, dist, rng)
    return remix_once(teacher_speech, teacher_noise, perm_p, dist, rng)


def adapt(teacher_ckpt: Checkpoint, manifest: CorpusManifest, cfg: TrainConfig, out_path=None,
          remix_log=None, loss_csv=None,
          on_batch: Callable[[int, int, RemixBatch], None] | None = None) -> Checkpoint:
    """Adapt a student to an unlabeled corpus by RemixIT or Re2Re with WMA teacher updates.

    Only mixtures are read from ``manifest``; labels are ignored.
    """
    if cfg.method not in ("remixit", "re2re"):
        raise ValueError(f"adapt needs method remixit or re2re, got {cfg.method!r}")
    if teacher_ckpt.sample_rate != manifest.sample_rate:
        raise DataError(f"teacher sample rate {teacher_ckpt.sample_rate} Hz does not match "
                        f"corpus {manifest.sample_rate} Hz")
    n = len(manifest)
    if n < cfg.batch_size:
        raise DataError(f"corpus has {n} samples, fewer than batch_size {cfg.batch_size}")
    mixtures = load_arrays(manifest, ("mixture",))["mixture"]
    schedule = cfg.schedule()
    state = TrainState(0, teacher_ckpt.params, teacher_ckpt.params)
    writer = _LossWriter(loss_csv)
    rlog = RemixLog(remix_log) if remix_log else None
    out_path = Path(out_path) if out_path else None
    try:
        for epoch in range(cfg.epochs):
            state.epoch = epoch
            dist = schedule.dist_for_epoch(epoch) if schedule else None
            losses = []
            for j, idx in enumerate(batch_order(n, cfg.batch_size, cfg.seed, epoch)):
                x = mixtures[idx].astype(np.float64)
                t_speech, t_noise = forward_batch(state.teacher, x)
                rb = remix_batch(cfg, t_speech, t_noise, dist, epoch, j)
                if rlog:
                    rlog.write(epoch, j, rb)
                if on_batch:
                    on_batch(epoch, j, rb)
                est, _, cache = forward_batch(state.student, rb.mixtures_tilde, keep_cache=True)
                if cfg.method == "remixit":
                    loss, g = loss_and_grad("neg_si_sdr", est, rb.mixtures_tilde,
                                            (rb.teacher_speech, rb.shuffled_noise_p),
                                            ceiling=cfg.si_sdr_ceiling)
                else:
                    loss, g = loss_and_grad("mse", est, rb.mixtures_tilde, rb.mixtures_bar)
                _check_loss(loss, epoch, j)
                state.student = sgd_step(state.student, backward_batch(state.student, cache, g),
                                         cfg.learning_rate)
                losses.append(loss)
                writer.write(epoch, j, loss, cfg.method, dist)
            state.teacher = wma_update(state.teacher, state.student, cfg.gamma)
            state.loss_history.append(float(np.mean(losses)))
            log.info("%s epoch %d: loss %.4f", cfg.method, epoch, state.loss_history[-1])
            ckpt = Checkpoint(state.student, "student", epoch + 1, manifest.sample_rate,
                              teacher_params=state.teacher, loss_trace=list(state.loss_history),
                              config=cfg.to_mapping())
            if out_path and cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0 \
                    and epoch + 1 < cfg.epochs:
                save_checkpoint(ckpt, _periodic_path(out_path, epoch + 1))
    finally:
        writer.close()
        if rlog:
            rlog.close()
    if out_path:
        save_checkpoint(ckpt, out_path)
    return ckpt
