"""Corpus handling, training loop, checkpoints and the spike-order classifier."""

from polychron.train.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from polychron.train.classifier import (
    LatencyOrderTask,
    accuracy,
    classify,
    fit_classifier,
    make_latency_order_task,
)
from polychron.train.corpus import Corpus, load_corpus, split_bytes
from polychron.train.loop import CURVE_HEADER, CurveRow, evaluate, train_loop, validation_windows
from polychron.train.loss import LN2, bits_per_character, softmax_cross_entropy
from polychron.train.schedule import lr_schedule


__all__ = [
    "CURVE_HEADER",
    "LN2",
    "Checkpoint",
    "Corpus",
    "CurveRow",
    "LatencyOrderTask",
    "accuracy",
    "bits_per_character",
    "classify",
    "evaluate",
    "fit_classifier",
    "load_checkpoint",
    "load_corpus",
    "lr_schedule",
    "make_latency_order_task",
    "save_checkpoint",
    "softmax_cross_entropy",
    "split_bytes",
    "train_loop",
    "validation_windows",
]
