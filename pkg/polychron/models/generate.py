from __future__ import annotations

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.models.base import VOCAB_SIZE, LanguageModel
from polychron.models.rnn import SpikingRnn, rnn_step


logger = structlog.get_logger()


def softmax_probabilities(logits: NDArray[np.floating], temperature: float) -> NDArray[np.float64]:
    scaled = np.asarray(logits, dtype=np.float64) / temperature
    scaled -= scaled.max()
    weights = np.exp(scaled)
    return weights / weights.sum()


def sample_token(
    logits: NDArray[np.floating],
    temperature: float,
    rng: np.random.Generator,
) -> int:
    """Draw one byte from ``softmax(logits / temperature)``."""
    return int(rng.choice(VOCAB_SIZE, p=softmax_probabilities(logits, temperature)))


def generate(
    model: LanguageModel,
    prompt: bytes,
    length: int,
    temperature: float = 1.0,
    seed: int = 0,
) -> bytes:
    """Autoregressive sampling; the same seed always yields the same bytes."""
    if length < 0:
        raise ValueError("length must be non-negative")
    if length == 0:
        return b""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if not prompt:
        raise ValueError("generation needs a non-empty prompt")

    rng = np.random.default_rng(seed)
    out = bytearray()
    if isinstance(model, SpikingRnn):
        h = model.initial_state()
        logits = np.zeros((1, VOCAB_SIZE))
        for byte in prompt:
            h, logits = rnn_step(model, h, np.array([byte]))
        for _ in range(length):
            token = sample_token(logits[0], temperature, rng)
            out.append(token)
            h, logits = rnn_step(model, h, np.array([token]))
    else:
        context = list(prompt)
        for _ in range(length):
            window = np.asarray(context[-model.n_inp :], dtype=np.int64)
            logits, _ = model.forward(window)
            token = sample_token(logits[-1], temperature, rng)
            out.append(token)
            context.append(token)
    logger.info("Generation finished", prompt_bytes=len(prompt), generated=len(out))
    return bytes(out)
