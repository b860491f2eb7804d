from __future__ import annotations

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.core.config import ExperimentConfig, LearningRule
from polychron.core.exceptions import CorpusError, DivergenceError
from polychron.models.base import LanguageModel, ModelGrads, apply_model_update
from polychron.train.corpus import Corpus
from polychron.train.loss import LN2, softmax_cross_entropy
from polychron.train.schedule import lr_schedule


logger = structlog.get_logger()

CURVE_HEADER = "step,train_loss_nats,val_bpc"

EVAL_BATCH = 64


@dataclass(frozen=True)
class CurveRow:
    step: int
    train_loss_nats: float
    val_bpc: float

    def csv_line(self) -> str:
        return f"{self.step},{self.train_loss_nats:.6f},{self.val_bpc:.6f}"


def validation_windows(
    data: NDArray[np.uint8], n_inp: int, max_windows: int | None = None,
) -> NDArray[np.int64]:
    """Windows of ``n_inp + 1`` bytes starting every ``n_inp`` bytes.

    Every byte after the first is predicted exactly once.
    """
    starts = np.arange(0, max(data.size - n_inp, 0), n_inp)
    if max_windows is not None:
        starts = starts[:max_windows]
    if starts.size == 0:
        raise CorpusError(f"validation split has {data.size} bytes, windows need {n_inp + 1}")
    return data[starts[:, None] + np.arange(n_inp + 1)].astype(np.int64)


def evaluate(
    model: LanguageModel,
    corpus: Corpus,
    *,
    max_windows: int | None = None,
) -> float:
    """Mean next-byte cross-entropy over the validation windows, in bits."""
    windows = validation_windows(corpus.val_bytes, model.n_inp, max_windows)
    total = 0.0
    predicted = 0
    for start in range(0, windows.shape[0], EVAL_BATCH):
        chunk = windows[start : start + EVAL_BATCH]
        logits, _ = model.forward(chunk[:, :-1])
        loss, _ = softmax_cross_entropy(logits, chunk[:, 1:])
        total += float(loss.sum())
        predicted += int(loss.size)
    return total / predicted / LN2


def _shard_step(
    model: LanguageModel,
    rule: LearningRule,
    tokens: NDArray[np.int64],
) -> tuple[float, int, ModelGrads]:
    logits, cache = model.forward(
        tokens[:, :-1], train=True, keep_all_pairs=rule is LearningRule.ALL_PAIRS,
    )
    loss, grad = softmax_cross_entropy(logits, tokens[:, 1:])
    grads = model.backward(cache, grad, rule)
    return float(loss.sum()), int(loss.size), grads


def train_loop(
    model: LanguageModel,
    corpus: Corpus,
    config: ExperimentConfig,
    rng: np.random.Generator,
    *,
    start_step: int = 0,
    threads: int = 1,
    on_eval: Callable[[CurveRow], None] | None = None,
    on_checkpoint: Callable[[int], None] | None = None,
) -> list[CurveRow]:
    """Plain SGD on sampled windows with the scheduled learning rate.

    A fresh run (``start_step == 0``) first emits a step-0 row with the loss
    of the first batch before any update and the untrained validation BPC.
    Gradients are summed over the batch; the batch is cut into
    ``grad_shards`` fixed shards whose results are merged in shard order, so
    the outcome does not depend on ``threads``.
    """
    train = config.train
    n_inp = config.model.n_inp
    scale = train.scale_for(config.model.n)
    curve: list[CurveRow] = []
    pending: list[float] = []
    baseline = evaluate(model, corpus, max_windows=train.max_eval_windows) if start_step == 0 else None
    shards = min(train.grad_shards, train.batch_size)

    def emit(row: CurveRow) -> None:
        curve.append(row)
        logger.info("Evaluation finished", step=row.step, train_loss=row.train_loss_nats, val_bpc=row.val_bpc)
        if on_eval is not None:
            on_eval(row)

    logger.info(
        "Training started",
        start_step=start_step,
        max_steps=train.max_steps,
        rule=train.rule.value,
        batch_size=train.batch_size,
        shards=shards,
        threads=threads,
    )
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        for step in range(start_step + 1, train.max_steps + 1):
            batch = corpus.sample_windows(rng, train.batch_size, n_inp)
            parts = np.array_split(batch, shards)
            results = list(pool.map(lambda part: _shard_step(model, train.rule, part), parts))
            loss = sum(r[0] for r in results) / sum(r[1] for r in results)
            if not math.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at step {step}")
            grads = ModelGrads()
            for _, _, shard_grads in results:
                grads.merge(shard_grads)

            if baseline is not None:
                emit(CurveRow(step=0, train_loss_nats=loss, val_bpc=baseline))
                baseline = None

            lr = lr_schedule(step, train.warmup_steps, scale, train.lr_mode)
            apply_model_update(model, grads, lr)
            pending.append(loss)

            stop = False
            if step % train.eval_interval == 0 or step == train.max_steps:
                val_bpc = evaluate(model, corpus, max_windows=train.max_eval_windows)
                emit(CurveRow(step=step, train_loss_nats=float(np.mean(pending)), val_bpc=val_bpc))
                pending = []
                stop = train.stop_bpc is not None and val_bpc < train.stop_bpc
            if on_checkpoint is not None and (
                step % train.checkpoint_every == 0 or step == train.max_steps or stop
            ):
                on_checkpoint(step)
            if stop:
                logger.info("Early stop reached", step=step, stop_bpc=train.stop_bpc)
                break
    return curve
