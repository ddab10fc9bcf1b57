"""Tiny masking enhancement model with flat parameters and a hand-written backward.

Forward map for a mixture ``x`` (batched as ``(B, T)``)::

    r    = rms(x)                       (input normalisation, not learned)
    E    = frames(x / r) @ W.T          learned analysis filterbank, stride S
    Z    = log1p(E**2) @ A.T + c
    H    = sigmoid(Z) * E               masked encoder output
    s    = r * overlap_add(H @ V)       learned synthesis filterbank
    n    = x - s                        noise estimate by consistency

so ``s + n == x`` holds by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import NumericalAbort

INIT_SCALE = 0.05
# sigmoid(IDENTITY_BIAS) rounds to exactly 1.0 in float64
IDENTITY_BIAS = 50.0
RMS_EPS = 1e-8


@dataclass(frozen=True)
class ArchConfig:
    n_filters: int = 16
    filter_len: int = 33
    stride: int = 8

    def __post_init__(self):
        if self.n_filters < 1 or self.filter_len < 1 or self.stride < 1:
            raise ValueError("architecture sizes must be positive")
        if self.stride > self.filter_len:
            raise ValueError("stride must not exceed filter_len")

    def layout(self) -> dict[str, tuple[slice, tuple[int, ...]]]:
        shapes = {
            "analysis": (self.n_filters, self.filter_len),
            "mask_weight": (self.n_filters, self.n_filters),
            "mask_bias": (self.n_filters,),
            "synthesis": (self.n_filters, self.filter_len),
        }
        out, pos = {}, 0
        for name, shape in shapes.items():
            size = int(np.prod(shape))
            out[name] = (slice(pos, pos + size), shape)
            pos += size
        return out

    @property
    def n_params(self) -> int:
        return max(sl.stop for sl, _ in self.layout().values())


@dataclass(frozen=True)
class ModelParameters:
    values: np.ndarray
    arch: ArchConfig = field(default_factory=ArchConfig)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.arch.n_params,):
            raise ValueError(f"expected {self.arch.n_params} parameters, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def tensor(self, name: str) -> np.ndarray:
        sl, shape = self.arch.layout()[name]
        return self.values[sl].reshape(shape)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: self.tensor(name) for name in self.arch.layout()}

    def replace(self, values) -> "ModelParameters":
        return ModelParameters(np.array(values, dtype=np.float64), self.arch)

    def check_layout(self, other: "ModelParameters") -> None:
        if other.arch != self.arch:
            raise ValueError(f"parameter layout mismatch: {self.arch} vs {other.arch}")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def init_params(arch: ArchConfig = ArchConfig(), seed: int = 0, kind: str = "random") -> ModelParameters:
    """``random``: seeded uniform(-0.05, 0.05); ``identity``: all-pass mask with
    delta filterbanks, so the speech estimate equals the mixture; ``zero``: all zeros."""
    if kind == "random":
        rng = np.random.default_rng([seed, 0x6D6F64])
        return ModelParameters(rng.uniform(-INIT_SCALE, INIT_SCALE, arch.n_params), arch)
    if kind == "zero":
        return ModelParameters(np.zeros(arch.n_params), arch)
    if kind == "identity":
        p = ModelParameters(np.zeros(arch.n_params), arch)
        if arch.n_filters < arch.stride:
            raise ValueError("identity init needs n_filters >= stride")
        values = p.values.copy()
        off = arch.filter_len - arch.stride
        for name in ("analysis", "synthesis"):
            sl, shape = arch.layout()[name]
            w = np.zeros(shape)
            w[np.arange(arch.stride), off + np.arange(arch.stride)] = 1.0
            values[sl] = w.ravel()
        sl, _ = arch.layout()["mask_bias"]
        values[sl] = IDENTITY_BIAS
        return p.replace(values)
    raise ValueError(f"unknown init kind {kind!r}")


def _padding(arch: ArchConfig, n: int) -> tuple[int, int]:
    left = arch.filter_len - arch.stride
    right = left + (-(n + left)) % arch.stride
    return left, right


def _overlap_add(frames: np.ndarray, stride: int, out_len: int) -> np.ndarray:
    b, m, length = frames.shape
    q = -(-length // stride)
    out = np.zeros((b, m + q - 1, stride))
    for k in range(q):
        w = min(stride, length - k * stride)
        out[:, k:k + m, :w] += frames[:, :, k * stride:k * stride + w]
    return out.reshape(b, -1)[:, :out_len]


def _frames(xp: np.ndarray, arch: ArchConfig) -> np.ndarray:
    # contiguous copy: matmul on the strided view is several times slower
    return np.ascontiguousarray(sliding_window_view(xp, arch.filter_len, axis=-1)[:, ::arch.stride])


@dataclass
class ForwardCache:
    frames: np.ndarray
    enc: np.ndarray
    feat: np.ndarray
    mask: np.ndarray
    masked: np.ndarray
    rms: np.ndarray
    crop: tuple[int, int]
    padded_len: int


def forward_batch(params: ModelParameters, x: np.ndarray, keep_cache: bool = False):
    """Return ``(speech_est, noise_est)`` (and the cache when ``keep_cache``)."""
    if not params.is_finite():
        raise NumericalAbort("model parameters contain NaN or Inf")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None]
    arch = params.arch
    t = params.tensors()
    rms = np.sqrt(np.mean(x**2, axis=1)) + RMS_EPS
    left, right = _padding(arch, x.shape[1])
    xp = np.pad(x / rms[:, None], ((0, 0), (left, right)))
    frames = _frames(xp, arch)
    enc = frames @ t["analysis"].T
    feat = np.log1p(enc**2)
    mask = expit(feat @ t["mask_weight"].T + t["mask_bias"])
    masked = mask * enc
    yp = _overlap_add(masked @ t["synthesis"], arch.stride, xp.shape[1])
    speech = rms[:, None] * yp[:, left:left + x.shape[1]]
    noise = x - speech
    if squeeze:
        speech, noise = speech[0], noise[0]
    if keep_cache:
        cache = ForwardCache(frames, enc, feat, mask, masked, rms, (left, left + x.shape[1]), xp.shape[1])
        return speech, noise, cache
    return speech, noise


def backward_batch(params: ModelParameters, cache: ForwardCache, grad_speech: np.ndarray) -> np.ndarray:
    """Flat parameter gradient given ``dLoss/d speech_est`` of shape ``(B, T)``."""
    arch = params.arch
    t = params.tensors()
    g = np.atleast_2d(np.asarray(grad_speech, dtype=np.float64))
    gyp = np.zeros((g.shape[0], cache.padded_len))
    lo, hi = cache.crop
    gyp[:, lo:hi] = g * cache.rms[:, None]
    gframes = _frames(gyp, arch)
    f = arch.n_filters
    masked2 = cache.masked.reshape(-1, f)
    gframes2 = gframes.reshape(-1, arch.filter_len)
    g_syn = masked2.T @ gframes2
    g_masked = gframes2 @ t["synthesis"].T
    mask2 = cache.mask.reshape(-1, f)
    enc2 = cache.enc.reshape(-1, f)
    g_z = g_masked * enc2 * mask2 * (1.0 - mask2)
    g_mw = g_z.T @ cache.feat.reshape(-1, f)
    g_mb = g_z.sum(axis=0)
    g_enc = g_masked * mask2 + (g_z @ t["mask_weight"]) * (2.0 * enc2 / (1.0 + enc2**2))
    g_ana = g_enc.T @ cache.frames.reshape(-1, arch.filter_len)
    grads = {"analysis": g_ana, "mask_weight": g_mw, "mask_bias": g_mb, "synthesis": g_syn}
    out = np.empty(arch.n_params)
    for name, (sl, _) in arch.layout().items():
        out[sl] = grads[name].ravel()
    return out


class EnhancementModel:
    """Architecture plus parameters; ``forward`` accepts a 1-D signal or a ``(B, T)`` batch."""

    def __init__(self, params: ModelParameters):
        self.params = params

    @classmethod
    def create(cls, arch: ArchConfig = ArchConfig(), seed: int = 0, init: str = "random"):
        return cls(init_params(arch, seed, init))

    @property
    def arch(self) -> ArchConfig:
        return self.params.arch

    def forward(self, mixture):
        samples = getattr(mixture, "samples", mixture)
        return forward_batch(self.params, samples)

    __call__ = forward


def sgd_step(params: ModelParameters, gradient: np.ndarray, lr: float) -> ModelParameters:
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != params.values.shape:
        raise ValueError(f"gradient shape {gradient.shape} does not match parameters {params.values.shape}")
    return params.replace(params.values - lr * gradient)
