from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.autograd.backward import PairGradient, backward_variant
from polychron.autograd.cache import MinPairCache
from polychron.autograd.forward import forward_cached
from polychron.core.config import LearningRule, ModelConfig, RnnCombine
from polychron.core.exceptions import CacheMismatchError, InvalidDimensionError
from polychron.core.instrumentation import OpCounter, count, scoped
from polychron.lut.transform import LutTransform, lut_forward, make_transform
from polychron.models.base import VOCAB_SIZE, ModelGrads, Parameter, check_tokens


logger = structlog.get_logger()


@dataclass(eq=False)
class SpikingRnn:
    """Elman-style spiking RNN over byte tokens.

    ``add``: ``h_t = S(h_{t-1}) + E[x_t]``; ``concat``: ``h_t = S([h_{t-1}, E[x_t]])``.
    Logits are ``U(h_t)``; ``h_0 = 0``.
    """

    embedder: NDArray[np.floating]
    recurrent: LutTransform
    unembedder: LutTransform
    combine: RnnCombine = RnnCombine.ADD
    n_inp: int = 32

    def __post_init__(self) -> None:
        n = self.n
        if self.embedder.shape != (VOCAB_SIZE, n):
            raise InvalidDimensionError(f"embedder must be ({VOCAB_SIZE}, n)")
        expected_in = n if self.combine is RnnCombine.ADD else 2 * n
        if self.recurrent.n_in != expected_in or self.recurrent.n_out != n:
            raise InvalidDimensionError(f"recurrent transform must map {expected_in} -> {n}")
        if self.recurrent.residual:
            raise InvalidDimensionError("the recurrent transform has no residual path")
        if self.unembedder.n_in != n or self.unembedder.n_out != VOCAB_SIZE:
            raise InvalidDimensionError(f"unembedder must map {n} -> {VOCAB_SIZE}")

    @property
    def n(self) -> int:
        return int(self.embedder.shape[1])

    def forward(
        self,
        tokens: NDArray[np.integer],
        counter: OpCounter | None = None,
        *,
        train: bool = False,
        keep_all_pairs: bool = False,
    ) -> tuple[NDArray[np.floating], RnnCache | None]:
        return rnn_forward(self, tokens, counter, train=train, keep_all_pairs=keep_all_pairs)

    def backward(
        self,
        cache: RnnCache,
        dlogits: NDArray[np.floating],
        rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
        counter: OpCounter | None = None,
    ) -> ModelGrads:
        _, grads = rnn_backward(self, cache, dlogits, rule, counter)
        return grads

    def parameters(self) -> dict[str, Parameter]:
        return {
            "embedder": self.embedder,
            "recurrent": self.recurrent,
            "unembedder": self.unembedder,
        }

    def set_parameter(self, name: str, value: Parameter) -> None:
        if name not in self.parameters():
            raise KeyError(name)
        setattr(self, name, value)
        self.__post_init__()

    def initial_state(self, batch: int = 1) -> NDArray[np.floating]:
        return np.zeros((batch, self.n), dtype=self.embedder.dtype)


def init_spiking_rnn(config: ModelConfig, rng: np.random.Generator) -> SpikingRnn:
    """Anchors from ``rng``; synapses and embeddings zero unless ``init_scale`` is set."""
    n = config.n
    dtype = np.dtype(config.dtype)
    n_in = n if config.rnn_combine is RnnCombine.ADD else 2 * n
    recurrent = make_transform(
        n_in, n, config.n_t, config.n_c, seed=rng, init_scale=config.init_scale, dtype=dtype,
    )
    unembedder = make_transform(
        n,
        VOCAB_SIZE,
        config.unembed_tables,
        config.unembed_comparisons,
        seed=rng,
        init_scale=config.init_scale,
        dtype=dtype,
    )
    if config.init_scale > 0:
        embedder = (rng.standard_normal((VOCAB_SIZE, n)) * config.init_scale).astype(dtype)
    else:
        embedder = np.zeros((VOCAB_SIZE, n), dtype=dtype)
    logger.info(
        "Spiking RNN initialized",
        n=n,
        n_t=config.n_t,
        n_c=config.n_c,
        combine=config.rnn_combine.value,
    )
    return SpikingRnn(
        embedder=embedder,
        recurrent=recurrent,
        unembedder=unembedder,
        combine=config.rnn_combine,
        n_inp=config.n_inp,
    )


@dataclass(eq=False)
class RnnCache:
    model: SpikingRnn
    tokens: NDArray[np.int64]
    recurrent: list[MinPairCache]
    unembed: list[MinPairCache]
    squeezed: bool


def _embed(model: SpikingRnn, tokens: NDArray[np.int64], counter: OpCounter | None) -> NDArray[np.floating]:
    count(counter, "embedder", values_loaded=tokens.size * model.n)
    return model.embedder[tokens]


def _recurrent_input(
    model: SpikingRnn,
    h: NDArray[np.floating],
    z: NDArray[np.floating],
    counter: OpCounter | None,
) -> NDArray[np.floating]:
    if model.combine is RnnCombine.ADD:
        return h
    count(counter, "recurrent", concatenations=h.shape[0])
    return np.concatenate([h, z], axis=-1)


def _combine(
    model: SpikingRnn,
    s: NDArray[np.floating],
    z: NDArray[np.floating],
    counter: OpCounter | None,
) -> NDArray[np.floating]:
    if model.combine is RnnCombine.ADD:
        count(counter, "embedder", additions=z.size)
        return s + z
    return s


def rnn_step(
    model: SpikingRnn,
    h: NDArray[np.floating],
    tokens: NDArray[np.integer],
    counter: OpCounter | None = None,
) -> tuple[NDArray[np.floating], NDArray[np.floating]]:
    """One inference step for a batch: returns ``(h_t, logits_t)``."""
    z = _embed(model, np.asarray(tokens, dtype=np.int64), counter)
    s = lut_forward(model.recurrent, _recurrent_input(model, h, z, counter), scoped(counter, "recurrent"))
    h_next = _combine(model, s, z, counter)
    logits = lut_forward(model.unembedder, h_next, scoped(counter, "unembedder"))
    return h_next, logits


def rnn_forward(
    model: SpikingRnn,
    tokens: NDArray[np.integer],
    counter: OpCounter | None = None,
    *,
    train: bool = False,
    keep_all_pairs: bool = False,
) -> tuple[NDArray[np.floating], RnnCache | None]:
    """Unroll over the window; logits are shaped like ``tokens`` plus a 256 axis."""
    squeezed = np.ndim(tokens) == 1
    batch_tokens = check_tokens(tokens)
    batch, steps = batch_tokens.shape
    h = model.initial_state(batch)
    logits = np.zeros((batch, steps, VOCAB_SIZE), dtype=np.result_type(h, model.unembedder.dtype))
    recurrent_caches: list[MinPairCache] = []
    unembed_caches: list[MinPairCache] = []

    for t in range(steps):
        if not train:
            h, logits[:, t] = rnn_step(model, h, batch_tokens[:, t], counter)
            continue
        z = _embed(model, batch_tokens[:, t], counter)
        s, s_cache = forward_cached(
            model.recurrent,
            _recurrent_input(model, h, z, counter),
            scoped(counter, "recurrent"),
            keep_all_pairs=keep_all_pairs,
        )
        h = _combine(model, s, z, counter)
        logits[:, t], u_cache = forward_cached(
            model.unembedder, h, scoped(counter, "unembedder"), keep_all_pairs=keep_all_pairs,
        )
        recurrent_caches.append(s_cache)
        unembed_caches.append(u_cache)

    out = logits[0] if squeezed else logits
    if not train:
        return out, None
    cache = RnnCache(
        model=model,
        tokens=batch_tokens,
        recurrent=recurrent_caches,
        unembed=unembed_caches,
        squeezed=squeezed,
    )
    return out, cache


def _dense(v: NDArray[np.floating] | PairGradient) -> NDArray[np.floating]:
    return v.to_dense() if isinstance(v, PairGradient) else v


def rnn_backward(
    model: SpikingRnn,
    cache: RnnCache,
    dlogits: NDArray[np.floating],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    counter: OpCounter | None = None,
) -> tuple[NDArray[np.floating], ModelGrads]:
    """Backpropagation through time over the cached window.

    Returns ``dL/dz`` per step (the embedder inputs) and the model gradients.
    """
    if cache.model is not model:
        raise CacheMismatchError("cache was produced by a different model")
    grad = np.asarray(dlogits)
    if cache.squeezed:
        grad = grad[None]
    batch, steps = cache.tokens.shape
    if grad.shape != (batch, steps, VOCAB_SIZE):
        raise InvalidDimensionError(f"logit gradient must be shaped {(batch, steps, VOCAB_SIZE)}")

    n = model.n
    grads = ModelGrads()
    dz = np.zeros((batch, steps, n), dtype=np.result_type(grad, model.embedder.dtype))
    dh_next = np.zeros((batch, n), dtype=dz.dtype)
    for t in reversed(range(steps)):
        dh_u, u_grads = backward_variant(
            rule, model.unembedder, cache.unembed[t], grad[:, t], scoped(counter, "unembedder"),
        )
        grads.add_lut("unembedder", u_grads)
        dh = dh_next + _dense(dh_u)
        dv, s_grads = backward_variant(
            rule, model.recurrent, cache.recurrent[t], dh, scoped(counter, "recurrent"),
        )
        grads.add_lut("recurrent", s_grads)
        dv = _dense(dv)
        if model.combine is RnnCombine.ADD:
            dz[:, t] = dh
            dh_next = dv
        else:
            dz[:, t] = dv[:, n:]
            dh_next = dv[:, :n]
        grads.add_dense("embedder", cache.tokens[:, t], dz[:, t])
    return (dz[0] if cache.squeezed else dz), grads
