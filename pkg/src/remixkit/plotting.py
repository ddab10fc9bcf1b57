"""Matplotlib figures for the report commands (rendered to files, Agg backend)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import BucketReport, Histogram  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "remixkit",
}


def _label(lo, hi):
    lo_s = "-inf" if np.isinf(lo) else f"{lo:g}"
    hi_s = "inf" if np.isinf(hi) else f"{hi:g}"
    return f"({lo_s}, {hi_s}]"


def _save(fig, path):
    # no timestamps in the metadata, so identical inputs give identical files
    meta = {"Software": None} if str(path).endswith(".png") else {"Date": None}
    fig.savefig(path, dpi=150, bbox_inches="tight", metadata=meta)
    plt.close(fig)


def plot_histogram(hist: Histogram, path, title: str | None = None) -> None:
    """Bar chart of SNR mass per bin; empty overflow bins are omitted."""
    rows = list(hist.rows())
    keep = [i for i, r in enumerate(rows) if not (i in (0, len(rows) - 1) and r[2] == 0)]
    labels = [_label(rows[i][0], rows[i][1]) for i in keep]
    fracs = [100.0 * rows[i][3] for i in keep]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 2.8))
        ax.bar(range(len(keep)), fracs, color="0.35", width=0.8)
        ax.set_xticks(range(len(keep)), labels, rotation=30, ha="right")
        ax.set_xlabel("SNR [dB]")
        ax.set_ylabel("Proportion [%]")
        ax.set_title(title or f"SNR distribution ({hist.source}, n={hist.total})")
        _save(fig, path)


def plot_buckets(reports: dict[str, BucketReport], path, title: str | None = None) -> None:
    """Grouped SI-SDRi boxplots per input-SNR bucket, one box per named report.

    Medians are drawn as red lines and means as red triangles.
    """
    names = list(reports)
    first = reports[names[0]]
    buckets = [b for b in first.buckets if b.n > 0 or not (np.isinf(b.lo) or np.isinf(b.hi))]
    width = 0.8 / len(names)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(4.5, 1.1 * len(buckets) * len(names)), 3.0))
        for k, name in enumerate(names):
            rep = reports[name]
            data = [rep.values_in(b.lo, b.hi) for b in buckets]
            pos = np.arange(len(buckets)) + (k - (len(names) - 1) / 2) * width
            nonempty = [i for i, d in enumerate(data) if d.size]
            bp = ax.boxplot([data[i] for i in nonempty], positions=pos[nonempty], widths=0.9 * width,
                            patch_artist=True, showmeans=True, showfliers=False,
                            medianprops={"color": "red"},
                            meanprops={"marker": "^", "markerfacecolor": "red", "markeredgecolor": "red",
                                       "markersize": 4})
            color = plt.cm.Greys(0.25 + 0.6 * k / max(1, len(names) - 1))
            for patch in bp["boxes"]:
                patch.set_facecolor(color)
            if bp["boxes"]:
                bp["boxes"][0].set_label(name)
        ax.axhline(0.0, color="0.6", lw=0.6, zorder=0)
        ax.set_xticks(range(len(buckets)), [_label(b.lo, b.hi) for b in buckets], rotation=30, ha="right")
        ax.set_xlabel("Input SNR [dB]")
        ax.set_ylabel("SI-SDR improvement [dB]")
        if len(names) > 1:
            ax.legend(frameon=False, fontsize=7)
        if title:
            ax.set_title(title)
        _save(fig, path)
