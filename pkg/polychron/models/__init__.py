"""Deep SNN, spiking RNN and SNN transformer."""

from polychron.models.attention import (
    AttentionHead,
    VIndexCache,
    attention_backward,
    attention_delta,
    attention_forward,
    build_v_index_cache,
    init_attention_head,
)
from polychron.models.base import (
    VOCAB_SIZE,
    LanguageModel,
    ModelGrads,
    apply_model_update,
    parameter_count,
)
from polychron.models.deep import (
    DeepSnn,
    deep_snn_backward,
    deep_snn_forward,
    deep_snn_infer,
    init_deep_snn,
)
from polychron.models.factory import build_model
from polychron.models.finetune import fine_tune_add_table, fine_tune_split_table
from polychron.models.generate import generate
from polychron.models.rnn import SpikingRnn, init_spiking_rnn, rnn_backward, rnn_forward, rnn_step
from polychron.models.transformer import (
    SnnTransformer,
    TransformerBlock,
    init_snn_transformer,
    transformer_backward,
    transformer_forward,
)


__all__ = [
    "VOCAB_SIZE",
    "AttentionHead",
    "DeepSnn",
    "LanguageModel",
    "ModelGrads",
    "SnnTransformer",
    "SpikingRnn",
    "TransformerBlock",
    "VIndexCache",
    "apply_model_update",
    "attention_backward",
    "attention_delta",
    "attention_forward",
    "build_model",
    "build_v_index_cache",
    "deep_snn_backward",
    "deep_snn_forward",
    "deep_snn_infer",
    "fine_tune_add_table",
    "fine_tune_split_table",
    "generate",
    "init_attention_head",
    "init_deep_snn",
    "init_snn_transformer",
    "init_spiking_rnn",
    "parameter_count",
    "rnn_backward",
    "rnn_forward",
    "rnn_step",
    "transformer_backward",
    "transformer_forward",
]
