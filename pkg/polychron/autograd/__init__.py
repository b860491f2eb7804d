"""Surrogate-gradient learning for look-up-table transforms."""

from polychron.autograd.backward import (
    Gradient,
    PairGradient,
    backward_lut,
    backward_variant,
    hyperplane_anchor_grad,
    layer_minimal_tables,
)
from polychron.autograd.cache import MinPairCache, RowGrads, reduce_row_chunks
from polychron.autograd.forward import forward_cached
from polychron.autograd.surrogate import surrogate_forward
from polychron.autograd.uncertainty import (
    DEFAULT_UNCERTAINTY,
    UncertaintyFunction,
    UncertaintyKind,
    uncertainty,
    uncertainty_deriv,
)
from polychron.autograd.update import apply_update


__all__ = [
    "DEFAULT_UNCERTAINTY",
    "Gradient",
    "MinPairCache",
    "PairGradient",
    "RowGrads",
    "UncertaintyFunction",
    "UncertaintyKind",
    "apply_update",
    "backward_lut",
    "backward_variant",
    "forward_cached",
    "hyperplane_anchor_grad",
    "layer_minimal_tables",
    "reduce_row_chunks",
    "surrogate_forward",
    "uncertainty",
    "uncertainty_deriv",
]
