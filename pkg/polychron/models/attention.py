from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from numpy.typing import DTypeLike, NDArray

from polychron.autograd.backward import PairGradient, backward_variant
from polychron.autograd.cache import MinPairCache, RowGrads
from polychron.autograd.uncertainty import DEFAULT_UNCERTAINTY, UncertaintyFunction
from polychron.core.config import LearningRule
from polychron.core.exceptions import (
    CacheMismatchError,
    InvalidAnchorError,
    InvalidDimensionError,
    StaleCacheError,
)
from polychron.core.instrumentation import OpCounter, count
from polychron.lut.anchors import (
    MAX_INDEX_BITS,
    ZERO_REFERENCE,
    AnchorSet,
    HashMode,
    concat_anchor_sets,
    init_anchor_set,
)
from polychron.lut.hashing import MinPairEntry, compute_index, compute_index_cached
from polychron.lut.transform import LookupTable, LutTransform, gather_rows


def head_anchors(n: int, n_c: int, p: int, rng: np.random.Generator) -> AnchorSet:
    """Anchors of one value table over ``[z_i, z_j, PE_{i-j}]``.

    ``n_c`` pairs inside the query block, ``n_c`` inside the key block and one
    sign bit per positional-encoder component, in that order (MSB first).
    """
    query = init_anchor_set(n, n_c, HashMode.PAIRWISE_SIGN, rng)
    key = init_anchor_set(n, n_c, HashMode.PAIRWISE_SIGN, rng)
    position = AnchorSet(
        mode=HashMode.COMPONENT_SIGN,
        n_in=p,
        first=rng.permutation(p),
        second=np.full(p, ZERO_REFERENCE),
    )
    return concat_anchor_sets([(query, 0), (key, n), (position, 2 * n)], 2 * n + p)


@dataclass(eq=False)
class AttentionHead:
    """One value transform shared by all token pairs plus its positional encoder.

    ``pe[d - 1]`` is the learnable vector for offset ``d = i - j``.
    """

    value: LutTransform
    pe: NDArray[np.floating]
    n: int
    n_c: int
    p: int

    def __post_init__(self) -> None:
        n, n_c, p = self.n, self.n_c, self.p
        if 2 * n_c + p > MAX_INDEX_BITS:
            raise InvalidAnchorError("2*n_c + p must fit in 63 index bits")
        if self.value.n_in != 2 * n + p or self.value.n_out != n or self.value.residual:
            raise InvalidDimensionError(f"value transform must map {2 * n + p} -> {n} without residual")
        if self.pe.ndim != 2 or self.pe.shape[1] != p:
            raise InvalidDimensionError(f"positional encoder must be shaped (n_inp - 1, {p})")
        for table in self.value.tables:
            self._check_blocks(table.anchors)

    def _check_blocks(self, anchors: AnchorSet) -> None:
        n, n_c, p = self.n, self.n_c, self.p
        if anchors.mode is not HashMode.CONCATENATED or anchors.n_c != 2 * n_c + p:
            raise InvalidAnchorError("value tables need 2*n_c + p concatenated comparisons")
        first, second = anchors.first, anchors.second
        query = slice(0, n_c)
        key = slice(n_c, 2 * n_c)
        position = slice(2 * n_c, 2 * n_c + p)
        inside = (
            np.all((first[query] < n) & (second[query] >= 0) & (second[query] < n))
            and np.all((first[key] >= n) & (first[key] < 2 * n) & (second[key] >= n) & (second[key] < 2 * n))
            and np.all((first[position] >= 2 * n) & (second[position] == ZERO_REFERENCE))
        )
        if not inside:
            raise InvalidAnchorError("attention anchors must not cross input blocks")

    @property
    def n_inp(self) -> int:
        return int(self.pe.shape[0]) + 1

    @property
    def n_t(self) -> int:
        return self.value.n_t

    def blocks(self) -> list[tuple[AnchorSet, AnchorSet, AnchorSet]]:
        """Per table: query, key and positional anchors in their own coordinates."""
        n, n_c, p = self.n, self.n_c, self.p
        return [
            (
                t.anchors.block(0, n_c, 0, n),
                t.anchors.block(n_c, 2 * n_c, n, n),
                t.anchors.block(2 * n_c, 2 * n_c + p, 2 * n, p),
            )
            for t in self.value.tables
        ]


def init_attention_head(
    n: int,
    n_t: int,
    n_c: int,
    p: int,
    n_inp: int,
    rng: np.random.Generator,
    *,
    init_scale: float = 0.0,
    dtype: DTypeLike = np.float32,
) -> AttentionHead:
    tables = []
    for _ in range(n_t):
        anchors = head_anchors(n, n_c, p, rng)
        if init_scale > 0:
            rows = (rng.standard_normal((anchors.row_count, n)) * init_scale).astype(dtype)
        else:
            rows = np.zeros((anchors.row_count, n), dtype=dtype)
        tables.append(LookupTable(anchors, rows))
    value = LutTransform(tables=tables, n_in=2 * n + p, n_out=n)
    pe = rng.standard_normal((max(n_inp - 1, 0), p)).astype(dtype)
    return AttentionHead(value=value, pe=pe, n=n, n_c=n_c, p=p)


def embedding_digest(z: NDArray[np.floating]) -> str:
    array = np.ascontiguousarray(z)
    digest = hashlib.blake2b(digest_size=16)
    digest.update(str((array.shape, array.dtype.str)).encode())
    digest.update(array.tobytes())
    return digest.hexdigest()


@dataclass(frozen=True, eq=False)
class VIndexCache:
    """Per-position query/key indices and per-offset positional indices.

    Arrays are ``(B, T, n_t)`` for ``q_index``/``k_index`` and ``(T - 1, n_t)``
    for ``pe_index``. The ``*_u`` arrays keep every comparison value and are
    only present when the cache was built for training.
    """

    head: AttentionHead
    q_index: NDArray[np.int64]
    k_index: NDArray[np.int64]
    pe_index: NDArray[np.int64]
    digest: str
    q_u: NDArray[np.floating] | None = None
    k_u: NDArray[np.floating] | None = None
    pe_u: NDArray[np.floating] | None = None

    @property
    def steps(self) -> int:
        return int(self.q_index.shape[1])

    def combined(self, i: int, j: int) -> NDArray[np.int64]:
        """Row index of every table for the pair ``(i, j)``, ``j < i``."""
        if not 0 <= j < i < self.steps:
            raise InvalidDimensionError("pairs need 0 <= j < i < T")
        shift = self.head.n_c + self.head.p
        return (
            np.left_shift(self.q_index[:, i], shift)
            | np.left_shift(self.k_index[:, j], self.head.p)
            | self.pe_index[i - j - 1]
        )

    def pair_indices(self) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
        """All causal pairs: ``(I, J, index)`` with ``index`` shaped ``(B, P, n_t)``."""
        later, earlier = np.tril_indices(self.steps, k=-1)
        shift = self.head.n_c + self.head.p
        index = (
            np.left_shift(self.q_index[:, later], shift)
            | np.left_shift(self.k_index[:, earlier], self.head.p)
            | self.pe_index[later - earlier - 1][None]
        )
        return later.astype(np.int64), earlier.astype(np.int64), index


def _batched(z: NDArray[np.floating], n: int) -> tuple[NDArray[np.floating], bool]:
    z = np.asarray(z)
    squeezed = z.ndim == 2
    if squeezed:
        z = z[None]
    if z.ndim != 3 or z.shape[-1] != n:
        raise InvalidDimensionError(f"embeddings must be shaped (T, {n}) or (B, T, {n})")
    return z, squeezed


def build_v_index_cache(
    head: AttentionHead,
    z: NDArray[np.floating],
    counter: OpCounter | None = None,
    *,
    keep_differences: bool = False,
) -> VIndexCache:
    """Hash every position once with the query and key anchors, every offset with the PE anchors.

    Cost is linear in the context length.
    """
    batch_z, _ = _batched(z, head.n)
    batch, steps, _ = batch_z.shape
    if steps > head.n_inp:
        raise InvalidDimensionError(f"sequence of {steps} exceeds the context size {head.n_inp}")
    n_t = head.n_t
    offsets = head.pe[: max(steps - 1, 0)]
    q_index = np.zeros((batch, steps, n_t), dtype=np.int64)
    k_index = np.zeros((batch, steps, n_t), dtype=np.int64)
    pe_index = np.zeros((offsets.shape[0], n_t), dtype=np.int64)
    q_u = k_u = pe_u = None
    if keep_differences:
        dtype = np.result_type(batch_z, head.pe)
        q_u = np.zeros((batch, steps, n_t, head.n_c), dtype=dtype)
        k_u = np.zeros((batch, steps, n_t, head.n_c), dtype=dtype)
        pe_u = np.zeros((offsets.shape[0], n_t, head.p), dtype=dtype)

    for t, (query, key, position) in enumerate(head.blocks()):
        if keep_differences:
            assert q_u is not None and k_u is not None and pe_u is not None
            q_index[..., t], entry = compute_index_cached(query, batch_z, counter, keep_all_pairs=True)
            q_u[..., t, :] = entry.u_all
            k_index[..., t], entry = compute_index_cached(key, batch_z, counter, keep_all_pairs=True)
            k_u[..., t, :] = entry.u_all
            pe_index[:, t], entry = compute_index_cached(position, offsets, counter, keep_all_pairs=True)
            pe_u[:, t, :] = entry.u_all
        else:
            q_index[..., t] = compute_index(query, batch_z, counter)
            k_index[..., t] = compute_index(key, batch_z, counter)
            pe_index[:, t] = compute_index(position, offsets, counter)

    return VIndexCache(
        head=head,
        q_index=q_index,
        k_index=k_index,
        pe_index=pe_index,
        digest=embedding_digest(batch_z),
        q_u=q_u,
        k_u=k_u,
        pe_u=pe_u,
    )


def _check_cache(head: AttentionHead, cache: VIndexCache, batch_z: NDArray[np.floating] | None) -> None:
    if cache.head is not head:
        raise CacheMismatchError("V-index cache belongs to a different head")
    if batch_z is not None and embedding_digest(batch_z) != cache.digest:
        raise StaleCacheError("embeddings changed after the V-index cache was built")


def attention_delta(
    head: AttentionHead,
    z: NDArray[np.floating],
    cache: VIndexCache,
    counter: OpCounter | None = None,
) -> NDArray[np.floating]:
    """``sum_{j<i} V[z_i, z_j, PE_{i-j}]`` for every position ``i``."""
    batch_z, squeezed = _batched(z, head.n)
    _check_cache(head, cache, batch_z)
    batch, steps, n = batch_z.shape
    later, _, index = cache.pair_indices()
    delta = np.zeros((batch, steps, n), dtype=np.result_type(batch_z, head.value.dtype))
    if later.size:
        count(counter, concatenations=head.n_t * index.shape[0] * index.shape[1])
        contrib = gather_rows(head.value, [index[..., t] for t in range(head.n_t)], counter)
        np.add.at(np.moveaxis(delta, 1, 0), later, np.moveaxis(contrib, 1, 0))
    return delta[0] if squeezed else delta


def attention_forward(
    head: AttentionHead,
    z: NDArray[np.floating],
    cache: VIndexCache,
    counter: OpCounter | None = None,
) -> NDArray[np.floating]:
    """Causal single-head attention with the residual: ``x_i = z_i + sum_{j<i} V[...]``."""
    return np.asarray(z) + attention_delta(head, z, cache, counter)


def pair_cache(
    head: AttentionHead,
    cache: VIndexCache,
    *,
    keep_all_pairs: bool = False,
) -> tuple[MinPairCache, NDArray[np.int64], NDArray[np.int64]]:
    """Min-pair cache of the value transform over all causal pairs.

    The minimal comparison is searched over all ``2 n_c + p`` bits of each
    table's index.
    """
    if cache.q_u is None or cache.k_u is None or cache.pe_u is None:
        raise CacheMismatchError("V-index cache was built without comparison values")
    later, earlier, index = cache.pair_indices()
    offsets = later - earlier - 1
    batch = cache.q_index.shape[0]
    entries = []
    for t in range(head.n_t):
        u = np.concatenate(
            [
                cache.q_u[:, later, t, :],
                cache.k_u[:, earlier, t, :],
                np.broadcast_to(cache.pe_u[offsets, t, :][None], (batch, later.size, head.p)),
            ],
            axis=-1,
        )
        r_min = np.argmin(np.abs(u), axis=-1)
        u_min = np.take_along_axis(u, r_min[..., None], axis=-1)[..., 0]
        entries.append(
            MinPairEntry(
                j=index[..., t],
                r_min=r_min.astype(np.int64),
                u_min=u_min,
                u_all=u if keep_all_pairs else None,
            ),
        )
    return (
        MinPairCache(transform=head.value, entries=entries, batch_shape=(batch, later.size)),
        later,
        earlier,
    )


def attention_backward(
    head: AttentionHead,
    cache: VIndexCache,
    dx: NDArray[np.floating],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    counter: OpCounter | None = None,
    *,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
) -> tuple[NDArray[np.floating], RowGrads, tuple[NDArray[np.int64], NDArray[np.floating]]]:
    """Gradients of one head given ``dL/dx``.

    Returns the attention part of ``dL/dz`` (the residual is left to the
    caller), the value-row gradients and the positional-encoder gradient as
    ``(offset rows, grads)``.
    """
    _check_cache(head, cache, None)
    grad, squeezed = _batched(dx, head.n)
    batch, steps, n = grad.shape
    if steps != cache.steps or batch != cache.q_index.shape[0]:
        raise CacheMismatchError("gradient does not match the cached sequence")
    pairs, later, earlier = pair_cache(head, cache, keep_all_pairs=rule is LearningRule.ALL_PAIRS)
    dz = np.zeros_like(grad, dtype=np.result_type(grad, head.value.dtype))
    dpe = np.zeros((later.size, head.p), dtype=dz.dtype)
    if later.size == 0:
        return (dz[0] if squeezed else dz), RowGrads(), (np.zeros(0, dtype=np.int64), dpe)

    v_in, grads = backward_variant(
        rule, head.value, pairs, grad[:, later], counter, uncertainty=uncertainty,
    )
    if isinstance(v_in, PairGradient):
        v_in = v_in.to_dense()
    np.add.at(np.moveaxis(dz, 1, 0), later, np.moveaxis(v_in[..., :n], 1, 0))
    np.add.at(np.moveaxis(dz, 1, 0), earlier, np.moveaxis(v_in[..., n : 2 * n], 1, 0))
    dpe = v_in[..., 2 * n :].sum(axis=0)
    return (dz[0] if squeezed else dz), grads, (later - earlier - 1, dpe)
