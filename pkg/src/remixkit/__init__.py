"""Remixing-based domain-adaptation speech enhancement with SNR control and curricula."""

__version__ = "0.1.0"

from .analysis import (BucketReport, Histogram, checkpoint_enhancer, evaluate_bucketed, histogram,
                       snr_histogram)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import SnrcmConfig, TrainConfig, load_config
from .curriculum import CurriculumSchedule, SnrDistribution, dist_for_epoch, make_preset, sample_snr
from .dataset import CorpusConfig, CorpusManifest, SnrLaw, generate_corpus, load_manifest
from .errors import DataError, DivergentSnr, NumericalAbort, RemixkitError, SignalError
from .losses import re2re_loss, remixit_loss
from .model import ArchConfig, EnhancementModel, ModelParameters, init_params, sgd_step
from .remix import Permutation, RemixBatch, remix_once, remix_twice, sample_permutation
from .signal import (AudioBuffer, gain_for_target_snr, measure_snr, mix, mse, power, si_sdr,
                     si_sdr_improvement)
from .trainer import adapt, train_supervised, wma_update

__all__ = [
    "ArchConfig", "AudioBuffer", "BucketReport", "Checkpoint", "CorpusConfig", "CorpusManifest",
    "CurriculumSchedule", "DataError", "DivergentSnr", "EnhancementModel", "Histogram",
    "ModelParameters", "NumericalAbort", "Permutation", "RemixBatch", "RemixkitError", "SignalError",
    "SnrDistribution", "SnrLaw", "SnrcmConfig", "TrainConfig", "adapt", "checkpoint_enhancer",
    "dist_for_epoch", "evaluate_bucketed", "gain_for_target_snr", "generate_corpus", "histogram",
    "init_params", "load_checkpoint", "load_config", "load_manifest", "make_preset", "measure_snr",
    "mix", "mse", "power", "re2re_loss", "remix_once", "remix_twice", "remixit_loss",
    "sample_permutation", "sample_snr", "save_checkpoint", "sgd_step", "si_sdr",
    "si_sdr_improvement", "snr_histogram", "train_supervised", "wma_update",
]
