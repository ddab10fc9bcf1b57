"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and printed in the
terminal summary. Set REMIXKIT_TOY_DIR to reuse the corpora and teachers of
the toy SNRCM experiment between runs (students are always retrained).
"""
import itertools
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from remixkit.analysis import read_csv_rows, snr_histogram
from remixkit.checkpoint import load_checkpoint
from remixkit.config import SnrcmConfig, TrainConfig
from remixkit.curriculum import SnrDistribution, make_preset
from remixkit.losses import mse_loss, re2re_loss
from remixkit.model import forward_batch, init_params
from remixkit.remix import Permutation, measured_snrs, remix_once, remix_twice
from remixkit.trainer import remix_batch, wma_update

import toy_experiment
from conftest import ACCEPTANCE_LINES, make_corpus
from test_curriculum import mixture_chi2, pooled_draws
from test_model import fd_case, max_relative_error


def record(n: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  [{n:2d}] {title}: {detail}")
    assert ok, detail


def test_01_snr_targeting():
    started = time.perf_counter()
    rng = np.random.default_rng(1)
    dist = SnrDistribution(-20.0, 40.0)
    params = init_params(seed=1)
    worst, pairs, clamped = 0.0, 0, 0
    for i in range(1000):
        method = ("remixit", "re2re")[i % 2]
        cfg = TrainConfig(method=method, epochs=1, seed=i, snrcm=SnrcmConfig("uniform", -20.0, 40.0))
        b = int(rng.integers(2, 9))
        x = rng.standard_normal((b, 256)) * rng.uniform(0.1, 2.0, (b, 1))
        ts, tn = forward_batch(params, x)
        rb = remix_batch(cfg, ts, tn, dist, 0, 0)
        checks = [(rb.shuffled_noise_p, rb.target_snrs_p)]
        if method == "re2re":
            checks.append((rb.shuffled_noise_q, rb.target_snrs_q))
        for noise, target in checks:
            worst = max(worst, float(np.max(np.abs(measured_snrs(ts, noise) - target))))
            pairs += b
        clamped += rb.events.clamped
    secs = time.perf_counter() - started
    record(1, "SNR targeting", worst <= 1e-6 and clamped == 0 and secs < 10,
           f"max |measured - target| = {worst:.2e} dB over {pairs} pairs, {clamped} clamped, {secs:.1f} s")


def test_02_wma_exact():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        t = init_params(seed=0).replace(rng.standard_normal(1328))
        s = init_params(seed=0).replace(rng.standard_normal(1328))
        for gamma in (0.0, 0.01, 0.5, 1.0):
            out = wma_update(t, s, gamma).values
            worst = max(worst, float(np.max(np.abs(out - (gamma * s.values + (1 - gamma) * t.values)))))
    default_gamma = TrainConfig().gamma
    record(2, "WMA exactness", worst == 0.0 and default_gamma == 0.01,
           f"max abs error {worst} over 100 pairs x 4 gammas; default gamma {default_gamma}")


def test_03_gradient_fidelity():
    started = time.perf_counter()
    errors = {}
    for seed in (0, 1, 2):
        for kind in ("neg_si_sdr", "mse"):
            errors[(seed, kind)] = max_relative_error(*fd_case(seed, kind))
    secs = time.perf_counter() - started
    worst = max(errors.values())
    record(3, "gradient fidelity", worst <= 1e-4 and secs < 30,
           f"max relative error {worst:.1e} (3 seeds x 2 losses, h=1e-5), {secs:.1f} s")


def test_04_remix_degeneracy():
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(100):
        b = int(rng.integers(1, 9))
        x = rng.standard_normal((b, int(rng.integers(64, 512))))
        s, n = forward_batch(init_params(seed=i), x)
        rb = remix_once(s, n, Permutation.identity(b))
        worst = max(worst, float(np.max(np.abs(rb.mixtures_tilde - x))))
    record(4, "remix degeneracy", worst <= 1e-6, f"max abs |x_tilde - x| = {worst:.1e} on 100 batches")


def test_05_noise2noise_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(5)
    worst_fit, worst_grad = 0.0, 0.0
    for _ in range(20):
        s, n = rng.standard_normal((3, 128)), rng.standard_normal((3, 128)) + rng.uniform(-1, 1)
        bars = np.stack([remix_twice(s, n, Permutation.identity(3), Permutation(q)).mixtures_bar
                         for q in itertools.permutations(range(3))])
        # per sample: argmin over additive offsets c of sum_Q ||s_b + c - xbar_Q,b||^2
        for b in range(3):
            offset = np.linalg.lstsq(np.ones((6, 1)), bars[:, b] - s[b], rcond=None)[0][0]
            worst_fit = max(worst_fit, float(np.max(np.abs(s[b] + offset - (s[b] + n.mean(axis=0))))))
        oracle = s + n.mean(axis=0)
        grad = sum(mse_loss(oracle, bar)[1] for bar in bars)
        worst_grad = max(worst_grad, float(np.max(np.abs(grad))))
        assert np.mean([re2re_loss(oracle + 1e-3, bar) for bar in bars]) > \
            np.mean([re2re_loss(oracle, bar) for bar in bars])
    secs = time.perf_counter() - started
    record(5, "Noise2Noise minimiser", max(worst_fit, worst_grad) <= 1e-9 and secs < 5,
           f"max deviation {worst_fit:.1e}, max expected-loss gradient {worst_grad:.1e}, "
           f"6 permutations x 20 batches, {secs:.2f} s")


def test_06_curriculum():
    sched = make_preset("cl-novad", 200)
    seq = [(d.lo, d.hi) for d in (sched.dist_for_epoch(e) for e in (0, 50, 100, 150))]
    expected = [(-10, 20), (-10, 30), (-10, 40), (-15, 45)]
    lengths = [s.end - s.start for s in sched.stages]
    p = mixture_chi2(sched, pooled_draws(sched, 100_000))
    record(6, "curriculum schedule", seq == expected and lengths == [50] * 4 and p > 0.001,
           f"stages {seq} of {lengths} epochs; pooled chi-square p = {p:.3f}")


def test_07_skewed_corpus(tmp_path):
    m = make_corpus(tmp_path / "skewed", 2000, "skewed", seed=7, chunk_seconds=0.05, sample_rate=16000)
    frac = snr_histogram(m.root).fraction_between(0.0, 20.0)
    record(7, "skewed corpus", abs(frac - 0.77) <= 0.05, f"(0, 20] mass {frac:.4f} (target 0.77 +- 0.05)")


@pytest.mark.slow
def test_08_snrcm_direction(tmp_path):
    root = Path(os.environ.get("REMIXKIT_TOY_DIR") or tmp_path / "toy")
    results, secs = toy_experiment.run(root)
    diffs = toy_experiment.mean_differences(results)
    finite = all(r.finite for r in results)
    ok = finite and all(d >= 0 for d in diffs.values())
    target = "within" if secs < 600 else "over"
    record(8, "SNRCM directional claim", ok,
           f"mean SI-SDRi gain on (20, 40] with SNRCM: RemixIT {diffs['remixit']:+.2f} dB, "
           f"Re2Re {diffs['re2re']:+.2f} dB (3 seeds); {secs / 60:.1f} min on {os.cpu_count()} core(s), "
           f"{target} the 10 min target")


def _cli(*argv):
    return subprocess.run([sys.executable, "-m", "remixkit.cli", *map(str, argv)], capture_output=True, text=True)


def _primary_outputs(d: Path) -> dict[str, bytes]:
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.is_file() and not p.name.endswith(".run.json")}


def _pipeline(d: Path, threads: int) -> None:
    t = ["--threads", threads]
    steps = [
        ("gen-corpus", "--out", d / "teach", "--n", 24, "--snr-law", "gaussian:5:7", "--seed", 1,
         "--chunk-seconds", 0.25, "--sample-rate", 8000, *t),
        ("gen-corpus", "--out", d / "adapt", "--n", 24, "--snr-law", "skewed", "--seed", 2,
         "--chunk-seconds", 0.25, "--sample-rate", 8000, "--wav-format", "pcm16", *t),
        ("analyze-snr", "--input", d / "adapt", "--source", "energy_estimate", "--out", d / "hist.csv", *t),
        ("train-teacher", "--corpus", d / "teach", "--epochs", 2, "--batch", 8, "--out", d / "t.json",
         "--loss-csv", d / "t_loss.csv", *t),
        ("adapt", "--method", "remixit", "--snrcm", "uniform:-10:30", "--teacher", d / "t.json", "--corpus",
         d / "adapt", "--epochs", 2, "--batch", 8, "--out", d / "s1.json", "--remix-log", d / "r1.csv", *t),
        ("adapt", "--method", "re2re", "--snrcm", "curriculum:cl-vad", "--teacher", d / "t.json",
         "--corpus", d / "adapt", "--epochs", 4, "--batch", 8, "--lr", 1.0, "--out", d / "s2.json",
         "--remix-log", d / "r2.csv", "--loss-csv", d / "s2_loss.csv", *t),
        ("analyze-snr", "--input", d / "r2.csv", "--source", "remix_log", "--out", d / "rhist.csv", *t),
        ("evaluate", "--model", d / "s1.json", "--manifest", d / "teach", "--out", d / "eval.csv", *t),
    ]
    for argv in steps:
        out = _cli(*argv)
        assert out.returncode == 0, (argv[0], out.stderr)


def test_09_determinism(tmp_path):
    runs = {}
    for name, threads in (("a", 1), ("b", 1), ("c", 4)):
        _pipeline(tmp_path / name, threads)
        runs[name] = _primary_outputs(tmp_path / name)
    same = runs["a"] == runs["b"] == runs["c"]
    record(9, "CLI determinism", same and len(runs["a"]) > 100,
           f"{len(runs['a'])} primary files byte-identical across 2 repeats and --threads 1/4")


def test_10_end_to_end(tmp_path):
    started = time.perf_counter()
    d = tmp_path
    steps = [
        ("gen-corpus", "--out", d / "teach", "--n", 48, "--snr-law", "gaussian:5:7", "--seed", 1),
        ("gen-corpus", "--out", d / "adapt", "--n", 48, "--snr-law", "skewed", "--seed", 2),
        ("gen-corpus", "--out", d / "eval", "--n", 24, "--snr-law", "uniform:-10:40", "--seed", 3),
        ("train-teacher", "--corpus", d / "teach", "--epochs", 4, "--lr", 3e-4, "--out", d / "teacher.json"),
        ("adapt", "--method", "remixit", "--snrcm", "curriculum:cl-novad", "--epochs", 8, "--lr", 3e-4,
         "--teacher", d / "teacher.json", "--corpus", d / "adapt", "--out", d / "student.json",
         "--loss-csv", d / "loss.csv"),
        ("evaluate", "--model", d / "student.json", "--manifest", d / "eval", "--out", d / "eval.csv",
         "--figure", d / "eval.png"),
    ]
    codes = [_cli(*argv).returncode for argv in steps]
    losses = [float(r["loss"]) for r in read_csv_rows(d / "loss.csv")]
    trace = load_checkpoint(d / "student.json").loss_trace + load_checkpoint(d / "teacher.json").loss_trace
    finite = bool(np.all(np.isfinite(losses)) and np.all(np.isfinite(trace)))
    secs = time.perf_counter() - started
    record(10, "end-to-end smoke", codes == [0] * 6 and finite and len(losses) == 16 and secs < 180,
           f"exit codes {codes}, {len(losses)} finite adapt losses, {secs:.1f} s")
