from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from polychron.core.exceptions import DivergenceError


LN2 = math.log(2.0)


def softmax_cross_entropy(
    logits: ArrayLike,
    targets: ArrayLike,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Per-position loss in nats and its gradient ``softmax(logits) - onehot``.

    ``logits`` is ``(..., V)`` and ``targets`` holds integer classes shaped
    ``(...)``. Works in float64 with max subtraction.
    Non-finite logits raise ``DivergenceError`` before any arithmetic.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise DivergenceError("non-finite logits")
    target = np.asarray(targets, dtype=np.int64)
    shifted = z - z.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_norm
    loss = -np.take_along_axis(log_probs, target[..., None], axis=-1)[..., 0]
    grad = np.exp(log_probs)
    np.put_along_axis(
        grad,
        target[..., None],
        np.take_along_axis(grad, target[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    return loss, grad


def bits_per_character(loss_nats: float) -> float:
    return loss_nats / LN2
