"""Synthetic paired corpora: generation, JSON-lines manifests, loading."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DivergentSnr, SignalError
from .signal import DEFAULT_CEILING_DB, AudioBuffer, as_array, db, gain_for_target_snr
from .synth import pseudo_noise, pseudo_speech
from .wavio import read_wav, write_wav

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_FORMAT = "remixkit-manifest"
MANIFEST_VERSION = 1

SKEWED_EDGES = (-10.0, 0.0, 10.0, 20.0, 30.0, 40.0, 60.0)
SKEWED_WEIGHTS = (0.10, 0.45, 0.32, 0.08, 0.03, 0.02)


@dataclass(frozen=True)
class SnrLaw:
    """Distribution the generator draws mixing SNRs from.

    ``kind`` is ``gaussian`` (mean, std), ``uniform`` (lo, hi) or ``skewed``
    (one weight per bin of :data:`SKEWED_EDGES`; uniform within a bin).
    """

    kind: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        p = self.params
        if self.kind == "gaussian":
            if len(p) != 2 or not p[1] > 0:
                raise ValueError("gaussian law needs (mean, std) with std > 0")
        elif self.kind == "uniform":
            if len(p) != 2 or p[0] > p[1]:
                raise ValueError("uniform law needs (lo, hi) with lo <= hi")
        elif self.kind == "skewed":
            if not p:
                object.__setattr__(self, "params", SKEWED_WEIGHTS)
                p = SKEWED_WEIGHTS
            if len(p) != len(SKEWED_EDGES) - 1 or min(p) < 0 or abs(sum(p) - 1.0) > 1e-9:
                raise ValueError(
                    f"skewed law needs {len(SKEWED_EDGES) - 1} non-negative weights summing to 1")
        else:
            raise ValueError(f"unknown SNR law {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "SnrLaw":
        """Parse ``gaussian:MEAN:STD``, ``uniform:LO:HI``, ``skewed`` or ``skewed:W1,...,W6``."""
        kind, _, rest = text.strip().partition(":")
        try:
            if kind == "skewed":
                params = tuple(float(w) for w in rest.split(",")) if rest else ()
            else:
                params = tuple(float(v) for v in rest.split(":")) if rest else ()
        except ValueError as exc:
            raise ValueError(f"cannot parse SNR law {text!r}") from exc
        return cls(kind, params)

    def __str__(self):
        if self.kind == "skewed":
            return "skewed:" + ",".join(repr(w) for w in self.params)
        return ":".join([self.kind, *(repr(v) for v in self.params)])

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "gaussian":
            return float(rng.normal(self.params[0], self.params[1]))
        if self.kind == "uniform":
            return float(rng.uniform(self.params[0], self.params[1]))
        b = int(rng.choice(len(self.params), p=np.asarray(self.params)))
        return float(rng.uniform(SKEWED_EDGES[b], SKEWED_EDGES[b + 1]))


@dataclass(frozen=True)
class CorpusConfig:
    n_samples: int
    snr_law: SnrLaw
    seed: int = 0
    chunk_seconds: float = 1.0
    sample_rate: int = 16000
    wav_format: str = "float32"

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.chunk_seconds <= 0 or self.sample_rate <= 0:
            raise ValueError("chunk_seconds and sample_rate must be positive")

    @property
    def chunk_len(self) -> int:
        return int(round(self.chunk_seconds * self.sample_rate))


@dataclass(frozen=True)
class PairedSample:
    id: str
    mixture: AudioBuffer
    speech: AudioBuffer
    noise: AudioBuffer
    snr_db: float


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    mixture_path: str
    speech_path: str
    noise_path: str
    snr_db: float


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]
    sample_rate: int
    chunk_len: int
    root: Path = field(default=Path("."))
    wav_format: str = "float32"

    def __len__(self):
        return len(self.entries)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def snrs(self) -> np.ndarray:
        return np.array([e.snr_db for e in self.entries])


def synthesize_sample(cfg: CorpusConfig, index: int):
    """Draw one (snr, speech, noise) triple from the stream keyed by (seed, index)."""
    rng = np.random.default_rng([cfg.seed, index])
    snr = cfg.snr_law.sample(rng)
    n = cfg.chunk_len
    speech = pseudo_speech(rng, n, cfg.sample_rate)
    noise, _ = pseudo_noise(rng, n, cfg.sample_rate)
    noise = noise * gain_for_target_snr(speech, noise, snr)
    return snr, speech, noise


def generate_corpus(cfg: CorpusConfig, out_dir, threads: int = 1) -> CorpusManifest:
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    def work(i: int) -> ManifestEntry:
        snr, speech, noise = synthesize_sample(cfg, i)
        sid = f"{i:06d}"
        paths = {k: f"audio/{sid}_{k}.wav" for k in ("mix", "speech", "noise")}
        # store each signal in the output precision, then mix the stored values
        prec = np.float32 if cfg.wav_format == "float32" else np.float64
        speech = speech.astype(prec).astype(np.float64)
        noise = noise.astype(prec).astype(np.float64)
        write_wav(out_dir / paths["mix"], speech + noise, cfg.sample_rate, cfg.wav_format)
        write_wav(out_dir / paths["speech"], speech, cfg.sample_rate, cfg.wav_format)
        write_wav(out_dir / paths["noise"], noise, cfg.sample_rate, cfg.wav_format)
        return ManifestEntry(sid, paths["mix"], paths["speech"], paths["noise"], snr)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        entries = list(pool.map(work, range(cfg.n_samples)))
    manifest = CorpusManifest(entries, cfg.sample_rate, cfg.chunk_len, out_dir, cfg.wav_format)
    write_manifest(manifest, out_dir / MANIFEST_NAME)
    return manifest


def write_manifest(manifest: CorpusManifest, path) -> None:
    header = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "sample_rate": manifest.sample_rate,
        "chunk_len": manifest.chunk_len,
        "wav_format": manifest.wav_format,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for e in manifest.entries:
        lines.append(json.dumps({
            "id": e.id,
            "mixture_path": e.mixture_path,
            "speech_path": e.speech_path,
            "noise_path": e.noise_path,
            "snr_db": e.snr_db,
        }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def load_manifest(path) -> CorpusManifest:
    """Read a manifest file, or ``manifest.jsonl`` inside a corpus directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        if header.get("format") != MANIFEST_FORMAT:
            raise DataError(f"{path}: not a remixkit manifest")
        entries = [ManifestEntry(**json.loads(ln)) for ln in lines[1:]]
        manifest = CorpusManifest(entries, int(header["sample_rate"]), int(header["chunk_len"]),
                                  path.parent, header.get("wav_format", "float32"))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed manifest: {exc}") from exc
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate sample ids")
    return manifest


def _read_checked(manifest: CorpusManifest, rel: str) -> np.ndarray:
    p = manifest.resolve(rel)
    if not p.exists():
        raise DataError(f"missing audio file {p}")
    x, rate = read_wav(p)
    if rate != manifest.sample_rate or x.shape[0] != manifest.chunk_len:
        raise DataError(f"{p}: expected {manifest.chunk_len} samples at {manifest.sample_rate} Hz, "
                        f"got {x.shape[0]} at {rate} Hz")
    return x


def load_batch(manifest: CorpusManifest, indices) -> list[PairedSample]:
    out = []
    sr = manifest.sample_rate
    for i in indices:
        if not 0 <= i < len(manifest):
            raise IndexError(f"sample index {i} out of range for {len(manifest)} entries")
        e = manifest.entries[i]
        out.append(PairedSample(
            e.id,
            AudioBuffer(_read_checked(manifest, e.mixture_path), sr),
            AudioBuffer(_read_checked(manifest, e.speech_path), sr),
            AudioBuffer(_read_checked(manifest, e.noise_path), sr),
            e.snr_db,
        ))
    return out


def load_arrays(manifest: CorpusManifest, kinds=("mixture",), indices=None) -> dict[str, np.ndarray]:
    """Stack the requested signals of a manifest into ``(N, chunk_len)`` float32 arrays."""
    idx = range(len(manifest)) if indices is None else indices
    out = {}
    for kind in kinds:
        attr = f"{kind}_path"
        out[kind] = np.stack([_read_checked(manifest, getattr(manifest.entries[i], attr))
                              .astype(np.float32) for i in idx])
    return out


def estimate_snr_energy(mixture, frame_ms: float = 25.0, quantile: float = 0.1,
                        sample_rate: int | None = None, ceiling: float = DEFAULT_CEILING_DB) -> float:
    """Rough blind SNR estimate from the spread of frame energies.

    The ``quantile`` lowest frame energy stands in for the noise floor and the
    ``1 - quantile`` highest for speech plus noise. Only approximate: it is
    biased upward by pauses and amplitude modulation in the speech, and it
    needs the chunk to contain speech pauses (reliable from about 1 s; short
    chunks at high SNR are underestimated).
    """
    if sample_rate is None:
        sample_rate = mixture.sample_rate if isinstance(mixture, AudioBuffer) else 16000
    x = as_array(mixture)
    frame = int(round(frame_ms * sample_rate / 1000.0))
    if frame < 1 or x.size < 2 * frame:
        raise SignalError("mixture must span at least two frames")
    if np.ptp(x) == 0.0:
        raise SignalError("constant signal has no SNR")
    m = x.size // frame
    energies = np.mean(x[: m * frame].reshape(m, frame) ** 2, axis=1)
    lo = float(np.quantile(energies, quantile))
    hi = float(np.quantile(energies, 1.0 - quantile))
    if lo == 0.0:
        raise DivergentSnr("noise floor estimate is zero")
    if hi <= lo:
        return -ceiling
    return float(min(max(db((hi - lo) / lo), -ceiling), ceiling))
