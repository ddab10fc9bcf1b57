"""SNR sampling distributions and stage-wise curriculum schedules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SnrDistribution:
    """Uniform SNR distribution over ``[lo, hi]`` dB. ``lo == hi`` is allowed."""

    lo: float
    hi: float
    kind: str = "uniform"

    def __post_init__(self):
        if self.kind != "uniform":
            raise ValueError(f"unsupported SNR distribution kind {self.kind!r}")
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"invalid uniform SNR range [{self.lo}, {self.hi}]")

    def contains(self, other: "SnrDistribution") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.hi == self.lo:
            return (x >= self.lo).astype(float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def __str__(self):
        return f"U{{{self.lo:g},{self.hi:g}}}"


def sample_snr(dist: SnrDistribution, rng: np.random.Generator, size=None):
    if dist.lo == dist.hi:
        return dist.lo if size is None else np.full(size, dist.lo)
    draw = rng.uniform(dist.lo, dist.hi, size)
    return float(draw) if size is None else draw


@dataclass(frozen=True)
class Stage:
    start: int
    end: int
    dist: SnrDistribution


@dataclass(frozen=True)
class CurriculumSchedule:
    stages: tuple[Stage, ...]

    def __post_init__(self):
        if not self.stages:
            raise ValueError("a schedule needs at least one stage")
        if self.stages[0].start != 0:
            raise ValueError("the first stage must start at epoch 0")
        for prev, cur in zip(self.stages, self.stages[1:]):
            if cur.start != prev.end:
                raise ValueError(f"stages must be contiguous: {prev.end} != {cur.start}")
            if not cur.dist.contains(prev.dist):
                raise ValueError(f"stage range {cur.dist} does not contain the previous {prev.dist}")
        for st in self.stages:
            if st.end <= st.start:
                raise ValueError(f"empty stage [{st.start}, {st.end})")

    @property
    def total_epochs(self) -> int:
        return self.stages[-1].end

    def stage(self, i: int) -> SnrDistribution:
        return self.stages[i].dist

    def dist_for_epoch(self, epoch: int) -> SnrDistribution:
        return dist_for_epoch(self, epoch)


def dist_for_epoch(schedule: CurriculumSchedule, epoch: int) -> SnrDistribution:
    if not 0 <= epoch < schedule.total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {schedule.total_epochs})")
    for st in schedule.stages:
        if st.start <= epoch < st.end:
            return st.dist
    raise AssertionError("unreachable: stages partition the epoch range")


# widening stage ranges used for the two training-set variants (without / with VAD)
PRESETS = {
    "cl-novad": ((-10, 20), (-10, 30), (-10, 40), (-15, 45)),
    "cl-vad": ((0, 30), (-10, 30), (-10, 40), (-15, 45)),
}


def make_preset(name: str, total_epochs: int) -> CurriculumSchedule:
    """Four equal-length stages; stage lengths scale with ``total_epochs``."""
    if name not in PRESETS:
        raise ValueError(f"unknown curriculum preset {name!r}; choose from {sorted(PRESETS)}")
    ranges = PRESETS[name]
    if total_epochs < len(ranges) or total_epochs % len(ranges):
        raise ValueError(f"total_epochs must be a positive multiple of {len(ranges)}, got {total_epochs}")
    per = total_epochs // len(ranges)
    return CurriculumSchedule(tuple(
        Stage(i * per, (i + 1) * per, SnrDistribution(float(lo), float(hi)))
        for i, (lo, hi) in enumerate(ranges)))


def constant_schedule(dist: SnrDistribution, total_epochs: int) -> CurriculumSchedule:
    return CurriculumSchedule((Stage(0, total_epochs, dist),))
