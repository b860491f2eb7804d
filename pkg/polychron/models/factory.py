from __future__ import annotations

import numpy as np

from polychron.core.config import ModelConfig, ModelKind
from polychron.core.exceptions import ConfigError
from polychron.models.base import LanguageModel
from polychron.models.rnn import init_spiking_rnn
from polychron.models.transformer import init_snn_transformer


def build_model(config: ModelConfig, rng: np.random.Generator) -> LanguageModel:
    """Build the language model ``config`` describes, drawing anchors from ``rng``."""
    if config.kind is ModelKind.RNN:
        return init_spiking_rnn(config, rng)
    if config.kind is ModelKind.TRANSFORMER:
        return init_snn_transformer(config, rng)
    raise ConfigError(f"unsupported model kind '{config.kind}'")
