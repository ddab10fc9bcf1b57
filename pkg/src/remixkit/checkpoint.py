"""Versioned JSON checkpoints.

Layout (one JSON object, keys sorted, floats written with full round-trip
precision so identical runs give identical bytes)::

    {
      "format": "remixkit-checkpoint", "version": 1,
      "role": "teacher" | "student",
      "arch": {"n_filters": .., "filter_len": .., "stride": ..},
      "layout": [[name, offset, [shape...]], ...],
      "epoch": k,                      # epochs completed
      "sample_rate": hz,
      "params": [...],                 # flat parameter vector
      "teacher_params": [...] | null,  # WMA teacher, student checkpoints only
      "loss_trace": [...],             # per-epoch mean loss
      "config": {key: value, ...}      # resolved run config
    }
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import ArchConfig, ModelParameters

CHECKPOINT_FORMAT = "remixkit-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParameters
    role: str = "teacher"
    epoch: int = 0
    sample_rate: int = 16000
    teacher_params: ModelParameters | None = None
    loss_trace: list[float] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        arch = self.params.arch
        doc = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "role": self.role,
            "arch": {"n_filters": arch.n_filters, "filter_len": arch.filter_len, "stride": arch.stride},
            "layout": [[n, sl.start, list(shape)] for n, (sl, shape) in arch.layout().items()],
            "epoch": self.epoch,
            "sample_rate": self.sample_rate,
            "params": self.params.values.tolist(),
            "teacher_params": None if self.teacher_params is None else self.teacher_params.values.tolist(),
            "loss_trace": [float(v) for v in self.loss_trace],
            "config": self.config,
        }
        return json.dumps(doc, sort_keys=True)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(ckpt.to_json())
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a remixkit checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {doc.get('version')}")
    try:
        arch = ArchConfig(**doc["arch"])
        params = ModelParameters(np.array(doc["params"], dtype=np.float64), arch)
        teacher = doc.get("teacher_params")
        return Checkpoint(
            params=params,
            role=doc["role"],
            epoch=int(doc["epoch"]),
            sample_rate=int(doc["sample_rate"]),
            teacher_params=None if teacher is None else ModelParameters(np.array(teacher), arch),
            loss_trace=list(doc.get("loss_trace", [])),
            config=doc.get("config", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: malformed checkpoint: {exc}") from exc
