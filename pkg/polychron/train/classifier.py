"""Spike-order classification with a deep SNN.

Each class is a fixed firing order over ``n`` neurons, encoded as latencies
evenly spread over ``[-1, 1]``. Samples add Gaussian jitter to the
latencies, so only the relative order carries the class. The first
``n_classes`` output components of the network are read as logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.core.config import LearningRule
from polychron.core.exceptions import InvalidDimensionError
from polychron.models.deep import DeepSnn, deep_snn_apply, deep_snn_backward, deep_snn_forward, deep_snn_infer
from polychron.train.loss import softmax_cross_entropy


logger = structlog.get_logger()


@dataclass(frozen=True, eq=False)
class LatencyOrderTask:
    prototypes: NDArray[np.float64]
    jitter: float

    @property
    def n(self) -> int:
        return int(self.prototypes.shape[1])

    @property
    def n_classes(self) -> int:
        return int(self.prototypes.shape[0])

    def sample(
        self, rng: np.random.Generator, size: int,
    ) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
        labels = rng.integers(0, self.n_classes, size=size)
        noise = rng.normal(0.0, self.jitter, size=(size, self.n))
        return self.prototypes[labels] + noise, labels.astype(np.int64)


def make_latency_order_task(
    n: int, n_classes: int = 4, jitter: float = 0.1, seed: int = 0,
) -> LatencyOrderTask:
    if n_classes < 2 or n_classes > n:
        raise InvalidDimensionError(f"need 2 <= n_classes <= n, got {n_classes} for n={n}")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    rng = np.random.default_rng(seed)
    latencies = np.linspace(-1.0, 1.0, n)
    prototypes = np.stack([latencies[rng.permutation(n)] for _ in range(n_classes)])
    return LatencyOrderTask(prototypes=prototypes, jitter=jitter)


def classify(model: DeepSnn, x: NDArray[np.floating], n_classes: int) -> NDArray[np.int64]:
    return np.argmax(deep_snn_infer(model, x)[..., :n_classes], axis=-1).astype(np.int64)


def accuracy(model: DeepSnn, task: LatencyOrderTask, rng: np.random.Generator, size: int = 512) -> float:
    x, labels = task.sample(rng, size)
    return float(np.mean(classify(model, x, task.n_classes) == labels))


def fit_classifier(
    model: DeepSnn,
    task: LatencyOrderTask,
    *,
    steps: int = 200,
    batch_size: int = 32,
    lr: float = 0.05,
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    seed: int = 0,
) -> list[float]:
    """SGD on cross-entropy over the leading outputs; returns per-step mean loss."""
    if model.n != task.n:
        raise InvalidDimensionError(f"model width {model.n} does not match task width {task.n}")
    rng = np.random.default_rng(seed)
    k = task.n_classes
    losses = []
    for _ in range(steps):
        x, labels = task.sample(rng, batch_size)
        out, cache = deep_snn_forward(model, x, keep_all_pairs=rule is LearningRule.ALL_PAIRS)
        loss, grad_logits = softmax_cross_entropy(out[:, :k], labels)
        grad = np.zeros(out.shape, dtype=np.float64)
        grad[:, :k] = grad_logits
        _, grads = deep_snn_backward(model, cache, grad, rule)
        deep_snn_apply(model, grads, lr)
        losses.append(float(loss.mean()))
    logger.debug("Classifier fitted", steps=steps, rule=rule.value, final_loss=losses[-1] if losses else None)
    return losses
