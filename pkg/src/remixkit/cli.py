"""Command-line entry point: ``remixkit <command> [flags]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical abort.
Every command writes ``<primary output>.run.json`` describing the run.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .errors import DataError, NumericalAbort, SignalError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("remixkit")


class UsageError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("REMIXKIT_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UsageError(f"REMIXKIT_THREADS must be an integer, got {env!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def write_run_manifest(primary: Path, command: str, config: dict, seed, artifacts: dict,
                       started: float) -> None:
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "artifacts": {k: str(v) for k, v in artifacts.items() if v},
        "tool_version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    path = primary.with_name(primary.name + ".run.json")
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def cmd_gen_corpus(args) -> None:
    from .dataset import MANIFEST_NAME, CorpusConfig, SnrLaw, generate_corpus

    try:
        cfg = CorpusConfig(args.n, SnrLaw.parse(args.snr_law), args.seed, args.chunk_seconds,
                           args.sample_rate, args.wav_format)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    started = time.time()
    out = Path(args.out)
    manifest = generate_corpus(cfg, out, threads=_threads(args))
    write_run_manifest(out / MANIFEST_NAME, "gen-corpus", {
        "n": cfg.n_samples, "snr_law": str(cfg.snr_law), "chunk_seconds": cfg.chunk_seconds,
        "sample_rate": cfg.sample_rate, "wav_format": cfg.wav_format}, cfg.seed,
        {"manifest": out / MANIFEST_NAME}, started)
    print(f"wrote {len(manifest)} samples to {out}")


def cmd_analyze_snr(args) -> None:
    from .analysis import snr_histogram, write_histogram_csv

    started = time.time()
    hist = snr_histogram(args.input, args.bins, args.source, threads=_threads(args))
    out = Path(args.out)
    write_histogram_csv(hist, out)
    if args.figure:
        from .plotting import plot_histogram
        plot_histogram(hist, args.figure)
    write_run_manifest(out, "analyze-snr", {"input": args.input, "bins": list(args.bins),
                                            "source": args.source}, None,
                       {"csv": out, "figure": args.figure}, started)
    print(f"{hist.total} values; underflow {hist.underflow}, overflow {hist.overflow}")


def _overrides(args) -> dict:
    items = {}
    for kv in args.set or []:
        key, sep, value = kv.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {kv!r}")
        items[key.strip()] = value.strip()
    flag_keys = {"epochs": "epochs", "lr": "learning_rate", "batch": "batch_size", "seed": "seed",
                 "gamma": "gamma", "method": "method"}
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            items[key] = value
    snrcm = getattr(args, "snrcm", None)
    if snrcm is not None:
        from .config import SnrcmConfig
        try:
            sc = SnrcmConfig.parse(snrcm)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        items["snrcm.kind"] = sc.kind
        if sc.kind == "uniform":
            items["snrcm.lo"], items["snrcm.hi"] = sc.lo, sc.hi
        if sc.kind == "curriculum":
            items["snrcm.preset"] = sc.preset
    return items


def _resolve_config(args, method: str, base=None):
    from .config import TrainConfig, load_config

    overrides = _overrides(args)
    if method == "supervised":
        overrides.setdefault("method", method)
    try:
        cfg = load_config(args.config, overrides, base or TrainConfig(method=method))
    except OSError as exc:
        raise DataError(f"cannot read config {args.config}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def cmd_train_teacher(args) -> None:
    from .dataset import load_manifest
    from .trainer import train_supervised

    cfg = _resolve_config(args, "supervised")
    if cfg.method != "supervised":
        raise UsageError("train-teacher needs method = supervised")
    manifest = load_manifest(args.corpus)
    started = time.time()
    out = Path(args.out)
    ckpt = train_supervised(manifest, cfg, out, loss_csv=args.loss_csv)
    write_run_manifest(out, "train-teacher", cfg.to_mapping(), cfg.seed,
                       {"checkpoint": out, "loss_csv": args.loss_csv, "corpus": args.corpus}, started)
    print(f"teacher trained for {ckpt.epoch} epochs; final loss {ckpt.loss_trace[-1]:.4f}")


def cmd_adapt(args) -> None:
    from .checkpoint import load_checkpoint
    from .dataset import load_manifest
    from .trainer import adapt

    cfg = _resolve_config(args, args.method or "remixit")
    if cfg.method not in ("remixit", "re2re"):
        raise UsageError("adapt needs --method remixit or re2re")
    teacher = load_checkpoint(args.teacher)
    manifest = load_manifest(args.corpus)
    started = time.time()
    out = Path(args.out)
    ckpt = adapt(teacher, manifest, cfg, out, remix_log=args.remix_log, loss_csv=args.loss_csv)
    write_run_manifest(out, "adapt", cfg.to_mapping(), cfg.seed,
                       {"checkpoint": out, "remix_log": args.remix_log, "loss_csv": args.loss_csv,
                        "teacher": args.teacher, "corpus": args.corpus}, started)
    print(f"student adapted for {ckpt.epoch} epochs ({cfg.method}); final loss {ckpt.loss_trace[-1]:.4f}")


def cmd_evaluate(args) -> None:
    from .analysis import (checkpoint_enhancer, evaluate_bucketed, identity_enhancer,
                           oracle_enhancer, write_bucket_csv)
    from .checkpoint import load_checkpoint
    from .dataset import load_manifest

    manifest = load_manifest(args.manifest)
    if args.model == "oracle":
        enhance = oracle_enhancer
    elif args.model == "identity":
        enhance = identity_enhancer
    else:
        ckpt = load_checkpoint(args.model)
        if ckpt.sample_rate != manifest.sample_rate:
            raise DataError(f"checkpoint sample rate {ckpt.sample_rate} Hz does not match "
                            f"manifest {manifest.sample_rate} Hz")
        enhance = checkpoint_enhancer(ckpt.params)
    started = time.time()
    report = evaluate_bucketed(enhance, manifest, args.buckets, threads=_threads(args),
                               ceiling=args.ceiling)
    out = Path(args.out)
    write_bucket_csv(report, out)
    if args.figure:
        from .plotting import plot_buckets
        plot_buckets({Path(args.model).stem: report}, args.figure)
    write_run_manifest(out, "evaluate", {"model": args.model, "manifest": args.manifest,
                                         "buckets": list(args.buckets), "ceiling": args.ceiling},
                       None, {"csv": out, "figure": args.figure}, started)
    print(f"overall mean SI-SDRi {report.overall.mean:.3f} dB over {report.overall.n} samples")


def build_parser() -> argparse.ArgumentParser:
    from .analysis import DEFAULT_BIN_EDGES, DEFAULT_BUCKET_EDGES, SOURCES
    from .curriculum import PRESETS
    from .signal import DEFAULT_CEILING_DB
    from .wavio import FORMATS

    p = argparse.ArgumentParser(prog="remixkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"remixkit {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $REMIXKIT_THREADS or 1); never changes outputs")

    g = sub.add_parser("gen-corpus", help="generate a synthetic paired corpus")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--n", type=int, required=True, help="number of samples")
    g.add_argument("--snr-law", default="gaussian:5:7",
                   help="gaussian:MEAN:STD, uniform:LO:HI, skewed or skewed:W1,...,W6 (default %(default)s)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chunk-seconds", type=float, default=1.0)
    g.add_argument("--sample-rate", type=int, default=16000)
    g.add_argument("--wav-format", choices=FORMATS, default="float32")
    common(g)
    g.set_defaults(func=cmd_gen_corpus)

    a = sub.add_parser("analyze-snr", help="histogram of corpus or remix-log SNRs")
    a.add_argument("--input", required=True, help="manifest (or corpus dir) or remix-log CSV")
    a.add_argument("--bins", type=_floats, default=DEFAULT_BIN_EDGES,
                   help="comma-separated bin edges in dB; bins are (lo, hi]")
    a.add_argument("--source", choices=SOURCES, default="ground_truth")
    a.add_argument("--out", required=True, help="histogram CSV path")
    a.add_argument("--figure", default=None, help="also render a bar chart to this image file")
    common(a)
    a.set_defaults(func=cmd_analyze_snr)

    def train_flags(sp):
        sp.add_argument("--config", default=None, help="key=value run config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
        sp.add_argument("--epochs", type=int, default=None)
        sp.add_argument("--lr", type=float, default=None, help="SGD learning rate")
        sp.add_argument("--batch", type=int, default=None, help="batch size")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--loss-csv", default=None, help="write the per-batch loss history here")
        sp.add_argument("--out", required=True, help="output checkpoint path")
        common(sp)

    t = sub.add_parser("train-teacher", help="supervised teacher training")
    t.add_argument("--corpus", required=True, help="paired corpus manifest or directory")
    train_flags(t)
    t.set_defaults(func=cmd_train_teacher)

    d = sub.add_parser("adapt", help="student adaptation by RemixIT or Re2Re")
    d.add_argument("--method", choices=("remixit", "re2re"), default=None)
    d.add_argument("--snrcm", default=None,
                   help=f"off, uniform:LO:HI or curriculum:PRESET (presets: {', '.join(PRESETS)})")
    d.add_argument("--teacher", required=True, help="teacher checkpoint")
    d.add_argument("--corpus", required=True, help="adaptation corpus (mixtures only are used)")
    d.add_argument("--gamma", type=float, default=None, help="WMA weight of the student")
    d.add_argument("--remix-log", default=None, help="write per-sample remix records to this CSV")
    train_flags(d)
    d.set_defaults(func=cmd_adapt)

    e = sub.add_parser("evaluate", help="bucketed SI-SDR improvement report")
    e.add_argument("--model", required=True,
                   help="checkpoint path, or 'identity' / 'oracle' test hooks")
    e.add_argument("--manifest", required=True, help="evaluation corpus with ground-truth speech")
    e.add_argument("--buckets", type=_floats, default=DEFAULT_BUCKET_EDGES,
                   help="comma-separated input-SNR bucket edges in dB")
    e.add_argument("--ceiling", type=float, default=DEFAULT_CEILING_DB, help="SI-SDR cap in dB")
    e.add_argument("--out", required=True, help="bucket CSV path")
    e.add_argument("--figure", default=None, help="also render SI-SDRi boxplots to this image file")
    common(e)
    e.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"remixkit {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalAbort as exc:
        print(f"remixkit {args.command}: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, SignalError, OSError) as exc:
        print(f"remixkit {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
