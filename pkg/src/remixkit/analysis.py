"""SNR histograms and input-SNR-bucketed SI-SDR improvement reports."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import CorpusManifest, estimate_snr_energy, load_batch, load_manifest
from .errors import DataError
from .remix import REMIX_LOG_HEADER, read_remix_log
from .signal import DEFAULT_CEILING_DB, si_sdr

DEFAULT_BIN_EDGES = (-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
DEFAULT_BUCKET_EDGES = (-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 60.0)
SOURCES = ("ground_truth", "energy_estimate", "remix_log")

HISTOGRAM_HEADER = ["bin_lo_db", "bin_hi_db", "count", "fraction"]
BUCKET_HEADER = ["bucket_lo_db", "bucket_hi_db", "n", "mean_sisdri_db", "median_sisdri_db", "q1", "q3"]


def _check_edges(edges) -> np.ndarray:
    e = np.asarray(edges, dtype=float)
    if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
        raise ValueError(f"bin edges must be strictly increasing with at least two values: {edges}")
    return e


def assign_bins(values, edges) -> np.ndarray:
    """Index of the half-open bin ``(lo, hi]`` per value.

    0 is the underflow bin ``(-inf, edges[0]]`` and ``len(edges)`` the overflow
    bin ``(edges[-1], inf)``.
    """
    return np.searchsorted(_check_edges(edges), np.asarray(values, dtype=float), side="left")


@dataclass(frozen=True)
class Histogram:
    """Counts over ``(-inf, e0], (e0, e1], ..., (e_last, inf)``."""

    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    source: str

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    @property
    def underflow(self) -> int:
        return self.counts[0]

    @property
    def overflow(self) -> int:
        return self.counts[-1]

    def rows(self):
        lows = (-np.inf, *self.bin_edges)
        highs = (*self.bin_edges, np.inf)
        for lo, hi, c in zip(lows, highs, self.counts):
            yield lo, hi, c, (c / self.total if self.total else 0.0)

    def fraction_between(self, lo: float, hi: float) -> float:
        """Mass in ``(lo, hi]``; both must be bin edges."""
        edges = list(self.bin_edges)
        i, j = edges.index(lo), edges.index(hi)
        return sum(self.counts[i + 1:j + 1]) / self.total


def histogram(values, bin_edges=DEFAULT_BIN_EDGES, source: str = "ground_truth") -> Histogram:
    idx = assign_bins(values, bin_edges)
    counts = np.bincount(idx, minlength=len(bin_edges) + 1)
    return Histogram(tuple(float(e) for e in bin_edges), tuple(int(c) for c in counts), source)


def _is_remix_log(path: Path) -> bool:
    with open(path) as fh:
        first = fh.readline().strip()
    return first.split(",") == REMIX_LOG_HEADER


def snr_values(path, source: str, threads: int = 1) -> np.ndarray:
    """SNR values (dB) from a manifest (ground truth or energy estimate) or a remix log."""
    if source not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}, got {source!r}")
    path = Path(path)
    if source == "remix_log":
        if not path.is_file() or not _is_remix_log(path):
            raise DataError(f"{path} is not a remix log CSV")
        return np.array([float(r["measured_snr_db"]) for r in read_remix_log(path)
                         if r["measured_snr_db"] != ""])
    manifest = load_manifest(path)
    if source == "ground_truth":
        return manifest.snrs()

    def est(i):
        sample = load_batch(manifest, [i])[0]
        return estimate_snr_energy(sample.mixture)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return np.array(list(pool.map(est, range(len(manifest)))))


def snr_histogram(path, bin_edges=DEFAULT_BIN_EDGES, source: str = "ground_truth",
                  threads: int = 1) -> Histogram:
    return histogram(snr_values(path, source, threads), bin_edges, source)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if np.isnan(v):
        return ""
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_histogram_csv(hist: Histogram, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_HEADER)
        for lo, hi, c, frac in hist.rows():
            w.writerow([_fmt(lo), _fmt(hi), c, _fmt(frac)])


@dataclass(frozen=True)
class BucketRow:
    lo: float
    hi: float
    n: int
    mean: float
    median: float
    q1: float
    q3: float

    @classmethod
    def of(cls, lo, hi, values) -> "BucketRow":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return cls(lo, hi, 0, np.nan, np.nan, np.nan, np.nan)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return cls(lo, hi, int(v.size), float(np.mean(v)), float(med), float(q1), float(q3))


@dataclass
class BucketReport:
    """Per-bucket SI-SDR improvement statistics plus the per-sample values."""

    buckets: list[BucketRow]
    overall: BucketRow
    input_snr: np.ndarray
    sisdri: np.ndarray
    bucket_index: np.ndarray
    ids: list[str]

    def bucket(self, lo: float, hi: float) -> BucketRow:
        for b in self.buckets:
            if b.lo == lo and b.hi == hi:
                return b
        raise KeyError((lo, hi))

    def values_in(self, lo: float, hi: float) -> np.ndarray:
        mask = (self.input_snr > lo) & (self.input_snr <= hi)
        return self.sisdri[mask]


Enhancer = Callable[[np.ndarray, object], np.ndarray]


def checkpoint_enhancer(params) -> Enhancer:
    from .model import forward_batch

    def enhance(mixture, sample):
        return forward_batch(params, mixture)[0]
    return enhance


def oracle_enhancer(mixture, sample) -> np.ndarray:
    """Test hook: returns the ground-truth speech."""
    return np.asarray(sample.speech.samples, dtype=np.float64)


def identity_enhancer(mixture, sample) -> np.ndarray:
    return np.asarray(mixture, dtype=np.float64)


def evaluate_bucketed(enhance: Enhancer, manifest: CorpusManifest,
                      bucket_edges=DEFAULT_BUCKET_EDGES, threads: int = 1,
                      ceiling: float = DEFAULT_CEILING_DB) -> BucketReport:
    """SI-SDR improvement per sample, grouped by ground-truth input SNR."""
    edges = _check_edges(bucket_edges)

    def work(i):
        sample = load_batch(manifest, [i])[0]
        x = np.asarray(sample.mixture.samples, dtype=np.float64)
        ref = sample.speech.samples
        est = enhance(x, sample)
        return sample.snr_db, si_sdr(est, ref, ceiling) - si_sdr(x, ref, ceiling), sample.id

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(work, range(len(manifest))))
    snr = np.array([r[0] for r in results])
    imp = np.array([r[1] for r in results])
    idx = assign_bins(snr, edges)
    lows = (-np.inf, *edges)
    highs = (*edges, np.inf)
    buckets = [BucketRow.of(float(lows[k]), float(highs[k]), imp[idx == k]) for k in range(edges.size + 1)]
    return BucketReport(buckets, BucketRow.of(-np.inf, np.inf, imp), snr, imp, idx,
                        [r[2] for r in results])


def write_bucket_csv(report: BucketReport, path, include_empty_overflow: bool = False) -> None:
    """Rows per bucket (open-ended extremes only when populated) then an ``all`` row."""
    n_b = len(report.buckets)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BUCKET_HEADER)
        for k, b in enumerate(report.buckets):
            if k in (0, n_b - 1) and b.n == 0 and not include_empty_overflow:
                continue
            w.writerow([_fmt(b.lo), _fmt(b.hi), b.n, _fmt(b.mean), _fmt(b.median), _fmt(b.q1), _fmt(b.q3)])
        o = report.overall
        w.writerow(["all", "all", o.n, _fmt(o.mean), _fmt(o.median), _fmt(o.q1), _fmt(o.q3)])


def read_csv_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

