from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, runtime_checkable

import numpy as np
from numpy.typing import NDArray

from polychron.autograd.cache import RowGrads, reduce_row_chunks
from polychron.autograd.update import apply_update
from polychron.core.config import LearningRule
from polychron.core.exceptions import InvalidDimensionError
from polychron.core.instrumentation import OpCounter
from polychron.lut.transform import LutTransform


VOCAB_SIZE = 256

Parameter = LutTransform | NDArray[np.floating]


@dataclass
class ModelGrads:
    """Pending updates of a whole model, keyed by parameter name.

    LUT parameters collect ``RowGrads``; dense tables (embedder, positional
    encoders) collect ``(rows, grads)`` chunks reduced in insertion order.
    """

    luts: dict[str, RowGrads] = field(default_factory=dict)
    dense: dict[str, list[tuple[NDArray[np.int64], NDArray[np.floating]]]] = field(
        default_factory=dict,
    )

    def add_lut(self, name: str, grads: RowGrads) -> None:
        if name in self.luts:
            self.luts[name].merge(grads)
        else:
            self.luts[name] = grads

    def add_dense(self, name: str, rows: NDArray[np.int64], grads: NDArray[np.floating]) -> None:
        self.dense.setdefault(name, []).append((rows, grads))

    def merge(self, other: ModelGrads) -> None:
        for name, grads in other.luts.items():
            self.add_lut(name, grads)
        for name, chunks in other.dense.items():
            self.dense.setdefault(name, []).extend(chunks)


@runtime_checkable
class LanguageModel(Protocol):
    """Byte-level next-token model trained by the generic loop."""

    n_inp: int

    def forward(
        self,
        tokens: NDArray[np.integer],
        counter: OpCounter | None = None,
        *,
        train: bool = False,
        keep_all_pairs: bool = False,
    ) -> tuple[NDArray[np.floating], Any]: ...

    def backward(
        self,
        cache: Any,
        dlogits: NDArray[np.floating],
        rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
        counter: OpCounter | None = None,
    ) -> ModelGrads: ...

    def parameters(self) -> dict[str, Parameter]: ...

    def set_parameter(self, name: str, value: Parameter) -> None: ...


def apply_model_update(model: LanguageModel, grads: ModelGrads, lr: float) -> int:
    """SGD step over every parameter named in ``grads``; returns rows written."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if lr == 0:
        return 0
    params = model.parameters()
    written = 0
    for name, row_grads in grads.luts.items():
        transform = params[name]
        assert isinstance(transform, LutTransform)
        written += apply_update(transform, row_grads, lr)
    for name, chunks in grads.dense.items():
        table = params[name]
        assert isinstance(table, np.ndarray)
        rows, summed = reduce_row_chunks(chunks, table.shape[1])
        if rows.size:
            table[rows] = (table[rows] - lr * summed).astype(table.dtype)
            written += int(rows.size)
    return written


def parameter_count(model: LanguageModel) -> int:
    total = 0
    for value in model.parameters().values():
        total += value.parameter_count if isinstance(value, LutTransform) else int(value.size)
    return total


def check_tokens(tokens: NDArray[np.integer]) -> NDArray[np.int64]:
    """Validate byte tokens shaped ``(T,)`` or ``(B, T)``; returns ``(B, T)``."""
    array = np.asarray(tokens)
    if array.ndim == 1:
        array = array[None, :]
    if array.ndim != 2:
        raise InvalidDimensionError("tokens must be shaped (T,) or (B, T)")
    if array.shape[1] == 0:
        raise InvalidDimensionError("token sequence is empty")
    if array.size and (array.min() < 0 or array.max() >= VOCAB_SIZE):
        raise InvalidDimensionError("tokens must be bytes in [0, 256)")
    return array.astype(np.int64)
