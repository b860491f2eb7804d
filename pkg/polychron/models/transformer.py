from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.autograd.backward import PairGradient, backward_variant
from polychron.autograd.cache import MinPairCache
from polychron.autograd.forward import forward_cached
from polychron.core.config import LearningRule, ModelConfig
from polychron.core.exceptions import CacheMismatchError, InvalidDimensionError
from polychron.core.instrumentation import OpCounter, count, scoped
from polychron.lut.transform import LutTransform, lut_forward, make_transform
from polychron.models.attention import (
    AttentionHead,
    VIndexCache,
    attention_backward,
    attention_delta,
    build_v_index_cache,
    init_attention_head,
)
from polychron.models.base import VOCAB_SIZE, ModelGrads, Parameter, check_tokens


logger = structlog.get_logger()


@dataclass(eq=False)
class TransformerBlock:
    """Multi-head causal attention (heads summed) followed by an optional residual FFN."""

    heads: list[AttentionHead]
    ffn: LutTransform | None = None


@dataclass(eq=False)
class SnnTransformer:
    """Decoder-only transformer whose every map is a look-up-table transform."""

    embedder: NDArray[np.floating]
    blocks: list[TransformerBlock]
    unembedder: LutTransform
    n_inp: int

    def __post_init__(self) -> None:
        n = self.n
        if self.embedder.shape != (VOCAB_SIZE, n):
            raise InvalidDimensionError(f"embedder must be ({VOCAB_SIZE}, n)")
        if self.unembedder.n_in != n or self.unembedder.n_out != VOCAB_SIZE:
            raise InvalidDimensionError(f"unembedder must map {n} -> {VOCAB_SIZE}")
        for block in self.blocks:
            if not block.heads:
                raise InvalidDimensionError("a block needs at least one head")
            for head in block.heads:
                if head.n != n or head.n_inp < self.n_inp:
                    raise InvalidDimensionError("head dimensions do not match the model")
            if block.ffn is not None and (not block.ffn.residual or block.ffn.n_in != n):
                raise InvalidDimensionError("the FFN must be a residual n -> n transform")

    @property
    def n(self) -> int:
        return int(self.embedder.shape[1])

    @property
    def ffn_enabled(self) -> bool:
        return any(block.ffn is not None for block in self.blocks)

    def forward(
        self,
        tokens: NDArray[np.integer],
        counter: OpCounter | None = None,
        *,
        train: bool = False,
        keep_all_pairs: bool = False,
    ) -> tuple[NDArray[np.floating], TransformerCache | None]:
        return transformer_forward(self, tokens, counter, train=train, keep_all_pairs=keep_all_pairs)

    def backward(
        self,
        cache: TransformerCache,
        dlogits: NDArray[np.floating],
        rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
        counter: OpCounter | None = None,
    ) -> ModelGrads:
        _, grads = transformer_backward(self, cache, dlogits, rule, counter)
        return grads

    def parameters(self) -> dict[str, Parameter]:
        params: dict[str, Parameter] = {"embedder": self.embedder}
        for depth, block in enumerate(self.blocks):
            for h, head in enumerate(block.heads):
                params[f"block{depth}.head{h}.value"] = head.value
                params[f"block{depth}.head{h}.pe"] = head.pe
            if block.ffn is not None:
                params[f"block{depth}.ffn"] = block.ffn
        params["unembedder"] = self.unembedder
        return params

    def set_parameter(self, name: str, value: Parameter) -> None:
        if name in ("embedder", "unembedder"):
            setattr(self, name, value)
            self.__post_init__()
            return
        block_name, _, rest = name.partition(".")
        if not block_name.startswith("block") or not rest:
            raise KeyError(name)
        block = self.blocks[int(block_name.removeprefix("block"))]
        if rest == "ffn":
            assert isinstance(value, LutTransform)
            block.ffn = value
        else:
            head_name, _, part = rest.partition(".")
            head = block.heads[int(head_name.removeprefix("head"))]
            if part == "value":
                assert isinstance(value, LutTransform)
                head.value = value
            elif part == "pe":
                assert isinstance(value, np.ndarray)
                head.pe = value
            else:
                raise KeyError(name)
            head.__post_init__()
        self.__post_init__()


def init_snn_transformer(config: ModelConfig, rng: np.random.Generator) -> SnnTransformer:
    n = config.n
    dtype = np.dtype(config.dtype)
    blocks = []
    for _ in range(config.n_layers):
        heads = [
            init_attention_head(
                n,
                config.n_t,
                config.n_c,
                config.p,
                config.n_inp,
                rng,
                init_scale=config.init_scale,
                dtype=dtype,
            )
            for _ in range(config.heads)
        ]
        ffn = None
        if config.ffn_enabled:
            ffn = make_transform(
                n,
                n,
                config.n_t,
                config.n_c,
                residual=True,
                seed=rng,
                init_scale=config.init_scale,
                dtype=dtype,
            )
        blocks.append(TransformerBlock(heads=heads, ffn=ffn))
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
        "SNN transformer initialized",
        n=n,
        n_t=config.n_t,
        n_c=config.n_c,
        p=config.p,
        layers=config.n_layers,
        heads=config.heads,
        ffn_enabled=config.ffn_enabled,
    )
    return SnnTransformer(embedder=embedder, blocks=blocks, unembedder=unembedder, n_inp=config.n_inp)


@dataclass(eq=False)
class BlockCache:
    heads: list[VIndexCache]
    ffn: MinPairCache | None


@dataclass(eq=False)
class TransformerCache:
    model: SnnTransformer
    tokens: NDArray[np.int64]
    blocks: list[BlockCache]
    unembed: MinPairCache
    squeezed: bool


def transformer_forward(
    model: SnnTransformer,
    tokens: NDArray[np.integer],
    counter: OpCounter | None = None,
    *,
    train: bool = False,
    keep_all_pairs: bool = False,
) -> tuple[NDArray[np.floating], TransformerCache | None]:
    """Logits for every position of every sequence (sequences no longer than ``n_inp``)."""
    squeezed = np.ndim(tokens) == 1
    batch_tokens = check_tokens(tokens)
    if batch_tokens.shape[1] > model.n_inp:
        raise InvalidDimensionError(
            f"sequence of {batch_tokens.shape[1]} exceeds the context size {model.n_inp}"
        )
    count(counter, "embedder", values_loaded=batch_tokens.size * model.n)
    z = model.embedder[batch_tokens]
    block_caches: list[BlockCache] = []
    for depth, block in enumerate(model.blocks):
        block_counter = scoped(counter, f"block{depth}")
        x = z.copy()
        head_caches = []
        for h, head in enumerate(block.heads):
            head_counter = scoped(block_counter, f"head{h}")
            v_cache = build_v_index_cache(head, z, head_counter, keep_differences=train)
            x = x + attention_delta(head, z, v_cache, head_counter)
            count(head_counter, additions=z.size)
            head_caches.append(v_cache)
        ffn_cache = None
        if block.ffn is not None:
            ffn_counter = scoped(block_counter, "ffn")
            if train:
                x, ffn_cache = forward_cached(block.ffn, x, ffn_counter, keep_all_pairs=keep_all_pairs)
            else:
                x = lut_forward(block.ffn, x, ffn_counter)
        block_caches.append(BlockCache(heads=head_caches, ffn=ffn_cache))
        z = x

    unembed_counter = scoped(counter, "unembedder")
    if train:
        logits, unembed_cache = forward_cached(
            model.unembedder, z, unembed_counter, keep_all_pairs=keep_all_pairs,
        )
    else:
        logits = lut_forward(model.unembedder, z, unembed_counter)
    out = logits[0] if squeezed else logits
    if not train:
        return out, None
    cache = TransformerCache(
        model=model,
        tokens=batch_tokens,
        blocks=block_caches,
        unembed=unembed_cache,
        squeezed=squeezed,
    )
    return out, cache


def transformer_backward(
    model: SnnTransformer,
    cache: TransformerCache,
    dlogits: NDArray[np.floating],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    counter: OpCounter | None = None,
) -> tuple[NDArray[np.floating], ModelGrads]:
    """Returns ``dL/dE[tokens]`` per position and the model gradients."""
    if cache.model is not model or len(cache.blocks) != len(model.blocks):
        raise CacheMismatchError("cache was produced by a different model")
    grad = np.asarray(dlogits)
    if cache.squeezed:
        grad = grad[None]
    batch, steps = cache.tokens.shape
    if grad.shape != (batch, steps, VOCAB_SIZE):
        raise InvalidDimensionError(f"logit gradient must be shaped {(batch, steps, VOCAB_SIZE)}")

    grads = ModelGrads()
    dz, u_grads = backward_variant(
        rule, model.unembedder, cache.unembed, grad, scoped(counter, "unembedder"),
    )
    grads.add_lut("unembedder", u_grads)
    dz = dz.to_dense() if isinstance(dz, PairGradient) else dz

    for depth in reversed(range(len(model.blocks))):
        block = model.blocks[depth]
        block_cache = cache.blocks[depth]
        block_counter = scoped(counter, f"block{depth}")
        dx = dz
        if block.ffn is not None:
            assert block_cache.ffn is not None
            dx, f_grads = backward_variant(
                rule, block.ffn, block_cache.ffn, dz, scoped(block_counter, "ffn"),
            )
            dx = dx.to_dense() if isinstance(dx, PairGradient) else dx
            grads.add_lut(f"block{depth}.ffn", f_grads)
        dz = np.array(dx, copy=True)
        for h, head in enumerate(block.heads):
            dz_head, v_grads, (offsets, dpe) = attention_backward(
                head, block_cache.heads[h], dx, rule, scoped(block_counter, f"head{h}"),
            )
            dz += dz_head
            grads.add_lut(f"block{depth}.head{h}.value", v_grads)
            if offsets.size:
                grads.add_dense(f"block{depth}.head{h}.pe", offsets, dpe)

    grads.add_dense("embedder", cache.tokens.reshape(-1), dz.reshape(-1, model.n))
    return (dz[0] if cache.squeezed else dz), grads
