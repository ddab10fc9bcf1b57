"""Run configuration: a line-oriented ``key=value`` file with dotted keys.

Grammar::

    # comment
    method = remixit
    gamma = 0.01
    snrcm.kind = curriculum        # off | uniform | curriculum
    snrcm.preset = cl-vad          # or snrcm.stages = -10:20,-10:30,...
    model.n_filters = 16

Blank lines and lines starting with ``#`` are ignored; everything after the
first ``=`` is the value. Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .curriculum import (CurriculumSchedule, SnrDistribution, Stage, constant_schedule,
                         make_preset)
from .model import ArchConfig
from .signal import DEFAULT_CEILING_DB

METHODS = ("remixit", "re2re", "supervised")
SNRCM_KINDS = ("off", "uniform", "curriculum")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class SnrcmConfig:
    kind: str = "off"
    lo: float | None = None
    hi: float | None = None
    preset: str | None = None
    stages: tuple[tuple[float, float], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "SnrcmConfig":
        """``off``, ``uniform:LO:HI`` or ``curriculum:PRESET``."""
        kind, _, rest = text.strip().partition(":")
        if kind == "off" and not rest:
            return cls()
        if kind == "uniform":
            lo, _, hi = rest.partition(":")
            try:
                return cls("uniform", float(lo), float(hi))
            except ValueError as exc:
                raise ValueError(f"expected uniform:LO:HI, got {text!r}") from exc
        if kind == "curriculum" and rest:
            return cls("curriculum", preset=rest)
        raise ValueError(f"cannot parse SNRCM setting {text!r}")

    def schedule(self, total_epochs: int) -> CurriculumSchedule | None:
        if self.kind == "off":
            return None
        if self.kind == "uniform":
            if self.lo is None or self.hi is None:
                raise ValueError("uniform SNRCM needs snrcm.lo and snrcm.hi")
            return constant_schedule(SnrDistribution(self.lo, self.hi), total_epochs)
        if self.kind == "curriculum":
            if self.stages:
                n = len(self.stages)
                if total_epochs % n:
                    raise ValueError(f"epochs ({total_epochs}) must be divisible by the {n} stages")
                per = total_epochs // n
                return CurriculumSchedule(tuple(
                    Stage(i * per, (i + 1) * per, SnrDistribution(lo, hi))
                    for i, (lo, hi) in enumerate(self.stages)))
            if not self.preset:
                raise ValueError("curriculum SNRCM needs snrcm.preset or snrcm.stages")
            return make_preset(self.preset, total_epochs)
        raise ValueError(f"unknown snrcm.kind {self.kind!r}; expected one of {SNRCM_KINDS}")


@dataclass(frozen=True)
class TrainConfig:
    method: str = "remixit"
    gamma: float = 0.01
    batch_size: int = 24
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0
    si_sdr_ceiling: float = DEFAULT_CEILING_DB
    checkpoint_every: int = 10
    snrcm: SnrcmConfig = field(default_factory=SnrcmConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    init: str = "random"
    identity_permutations: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        min_b = 1 if self.method == "supervised" else 2
        if self.batch_size < min_b:
            raise ValueError(f"batch_size must be >= {min_b} for method {self.method}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        # fail early on an unusable SNRCM setting
        self.schedule()

    def schedule(self) -> CurriculumSchedule | None:
        return self.snrcm.schedule(self.epochs)

    def to_mapping(self) -> dict:
        out = {
            "method": self.method, "gamma": self.gamma, "batch_size": self.batch_size,
            "epochs": self.epochs, "learning_rate": self.learning_rate, "seed": self.seed,
            "si_sdr_ceiling": self.si_sdr_ceiling, "checkpoint_every": self.checkpoint_every,
            "snrcm.kind": self.snrcm.kind,
            "model.n_filters": self.arch.n_filters, "model.filter_len": self.arch.filter_len,
            "model.stride": self.arch.stride, "model.init": self.init,
            "hooks.identity_permutations": self.identity_permutations,
        }
        if self.snrcm.lo is not None:
            out["snrcm.lo"] = self.snrcm.lo
            out["snrcm.hi"] = self.snrcm.hi
        if self.snrcm.preset:
            out["snrcm.preset"] = self.snrcm.preset
        if self.snrcm.stages:
            out["snrcm.stages"] = ",".join(f"{lo!r}:{hi!r}" for lo, hi in self.snrcm.stages)
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n"
                       for k, v in sorted(self.to_mapping().items()))

    @classmethod
    def from_mapping(cls, items: dict, base: "TrainConfig | None" = None) -> "TrainConfig":
        base = base or cls()
        top, snr, arch = {}, {}, {}
        for key, raw in items.items():
            try:
                if key in _TOP:
                    top[_TOP[key][0]] = _TOP[key][1](raw)
                elif key.startswith("snrcm.") and key[6:] in _SNRCM:
                    snr[key[6:]] = _SNRCM[key[6:]](raw)
                elif key.startswith("model.") and key[6:] in ("n_filters", "filter_len", "stride"):
                    arch[key[6:]] = int(raw)
                elif key == "model.init":
                    top["init"] = str(raw)
                elif key == "hooks.identity_permutations":
                    top["identity_permutations"] = _bool(raw)
                else:
                    raise KeyError(key)
            except KeyError:
                raise ValueError(f"unknown config key {key!r}") from None
            except ValueError as exc:
                raise ValueError(f"bad value for {key!r}: {exc}") from None
        if snr:
            if "kind" in snr and snr["kind"] != base.snrcm.kind:
                top["snrcm"] = replace(SnrcmConfig(), **snr)
            else:
                top["snrcm"] = replace(base.snrcm, **snr)
        if arch:
            top["arch"] = replace(base.arch, **arch)
        return replace(base, **top)


def _stages(text: str) -> tuple[tuple[float, float], ...]:
    out = []
    for part in str(text).split(","):
        lo, _, hi = part.partition(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def _opt_float(v):
    return None if v in (None, "", "none") else float(v)


_TOP = {
    "method": ("method", str),
    "gamma": ("gamma", float),
    "batch_size": ("batch_size", int),
    "epochs": ("epochs", int),
    "learning_rate": ("learning_rate", float),
    "seed": ("seed", int),
    "si_sdr_ceiling": ("si_sdr_ceiling", float),
    "checkpoint_every": ("checkpoint_every", int),
}
_SNRCM = {"kind": str, "lo": _opt_float, "hi": _opt_float, "preset": str, "stages": _stages}


def parse_config_text(text: str) -> dict[str, str]:
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        value = value.split(" #", 1)[0]
        items[key.strip()] = value.strip()
    return items


def load_config(path, overrides: dict | None = None, base: TrainConfig | None = None) -> TrainConfig:
    items = parse_config_text(Path(path).read_text()) if path else {}
    items.update(overrides or {})
    return TrainConfig.from_mapping(items, base)
