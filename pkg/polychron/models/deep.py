from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import DTypeLike, NDArray

from polychron.autograd.backward import PairGradient, backward_variant
from polychron.autograd.cache import MinPairCache, RowGrads
from polychron.autograd.forward import forward_cached
from polychron.autograd.update import apply_update
from polychron.autograd.uncertainty import DEFAULT_UNCERTAINTY, UncertaintyFunction
from polychron.core.config import LearningRule
from polychron.core.exceptions import CacheMismatchError, InvalidDimensionError
from polychron.core.instrumentation import OpCounter, scoped
from polychron.lut.anchors import HashMode
from polychron.lut.transform import LutTransform, lut_forward, make_transform


@dataclass(eq=False)
class DeepSnn:
    """Stack of residual ``n -> n`` transforms: ``x_{l+1} = x_l + S_l(x_l)``."""

    layers: list[LutTransform]

    def __post_init__(self) -> None:
        if not self.layers:
            raise InvalidDimensionError("a deep network needs at least one layer")
        n = self.layers[0].n_in
        for layer in self.layers:
            if not layer.residual or layer.n_in != n or layer.n_out != n:
                raise InvalidDimensionError("every layer must be a residual n -> n transform")

    @property
    def n(self) -> int:
        return self.layers[0].n_in


def init_deep_snn(
    n: int,
    n_t: int,
    n_c: int,
    n_layers: int,
    *,
    seed: int | np.random.Generator = 0,
    mode: HashMode = HashMode.PAIRWISE_SIGN,
    init_scale: float = 0.0,
    dtype: DTypeLike = np.float32,
) -> DeepSnn:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = [
        make_transform(
            n, n, n_t, n_c, mode=mode, residual=True, seed=rng, init_scale=init_scale, dtype=dtype,
        )
        for _ in range(n_layers)
    ]
    return DeepSnn(layers)


@dataclass(eq=False)
class DeepCache:
    model: DeepSnn
    layers: list[MinPairCache]


def deep_snn_infer(
    model: DeepSnn,
    x0: NDArray[np.floating],
    counter: OpCounter | None = None,
) -> NDArray[np.floating]:
    x = np.asarray(x0)
    for depth, layer in enumerate(model.layers):
        x = lut_forward(layer, x, scoped(counter, f"layer{depth}"))
    return x


def deep_snn_forward(
    model: DeepSnn,
    x0: NDArray[np.floating],
    counter: OpCounter | None = None,
    *,
    keep_all_pairs: bool = False,
) -> tuple[NDArray[np.floating], DeepCache]:
    """Training-mode forward keeping one min-pair cache per layer."""
    x = np.asarray(x0)
    if x.shape[-1] != model.n:
        raise InvalidDimensionError(f"input has length {x.shape[-1]}, model expects {model.n}")
    caches = []
    for depth, layer in enumerate(model.layers):
        x, cache = forward_cached(
            layer, x, scoped(counter, f"layer{depth}"), keep_all_pairs=keep_all_pairs,
        )
        caches.append(cache)
    return x, DeepCache(model=model, layers=caches)


def deep_snn_backward(
    model: DeepSnn,
    caches: DeepCache,
    grad: NDArray[np.floating],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    counter: OpCounter | None = None,
    *,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
) -> tuple[NDArray[np.floating], list[RowGrads]]:
    """Backpropagate ``dL/dx_out`` through every layer, top to bottom.

    Under the spiking scalar rule the top layer reduces the dense gradient
    to one pair term per example (a dot product); below it each layer passes
    a single ``(a, b, h)`` term down, skipping the residual path, and the
    returned input gradient is the bottom term expanded to a vector.
    """
    if caches.model is not model or len(caches.layers) != len(model.layers):
        raise CacheMismatchError("cache was produced by a different model")
    v: NDArray[np.floating] | PairGradient = np.asarray(grad)
    if rule is LearningRule.SPIKING_SCALAR:
        v = PairGradient.from_dense(np.asarray(grad))
    per_layer: list[RowGrads] = []
    for depth in reversed(range(len(model.layers))):
        v, grads = backward_variant(
            rule,
            model.layers[depth],
            caches.layers[depth],
            v,
            scoped(counter, f"layer{depth}"),
            uncertainty=uncertainty,
        )
        per_layer.append(grads)
    per_layer.reverse()
    dense = v.to_dense() if isinstance(v, PairGradient) else v
    return dense, per_layer


def deep_snn_apply(model: DeepSnn, grads: list[RowGrads], lr: float) -> None:
    for layer, layer_grads in zip(model.layers, grads, strict=True):
        apply_update(layer, layer_grads, lr)
