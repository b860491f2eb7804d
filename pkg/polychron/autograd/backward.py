from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from polychron.autograd.cache import MinPairCache, RowGrads
from polychron.autograd.uncertainty import DEFAULT_UNCERTAINTY, UncertaintyFunction
from polychron.core.config import LearningRule
from polychron.core.exceptions import (
    InvalidAnchorError,
    InvalidDimensionError,
    RuleCacheMismatchError,
)
from polychron.core.instrumentation import OpCounter, count
from polychron.lut.anchors import ZERO_REFERENCE, AnchorSet, HashMode
from polychron.lut.hashing import flip_index
from polychron.lut.transform import LookupTable, LutTransform


@dataclass(frozen=True)
class PairGradient:
    """Gradient made of ``(+h at a, -h at b)`` terms.

    Arrays are shaped ``(*batch, k)``; ``b == ZERO_REFERENCE`` marks a term
    with a single component. This is what the spiking scalar rule sends from
    layer to layer instead of a dense vector.
    """

    a: NDArray[np.int64]
    b: NDArray[np.int64]
    h: NDArray[np.floating]
    n: int

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return tuple(self.h.shape[:-1])

    @classmethod
    def single(
        cls,
        a: NDArray[np.int64],
        b: NDArray[np.int64],
        h: NDArray[np.floating],
        n: int,
    ) -> PairGradient:
        return cls(
            a=np.asarray(a, dtype=np.int64)[..., None],
            b=np.asarray(b, dtype=np.int64)[..., None],
            h=np.asarray(h)[..., None],
            n=n,
        )

    @classmethod
    def from_dense(cls, v: NDArray[np.floating]) -> PairGradient:
        """One single-component term per nonzero column of ``v``."""
        v = np.asarray(v)
        columns = np.flatnonzero(np.any(v.reshape(-1, v.shape[-1]) != 0, axis=0))
        if columns.size == 0:
            columns = np.zeros(1, dtype=np.int64)
        shape = (*v.shape[:-1], columns.size)
        return cls(
            a=np.broadcast_to(columns, shape).copy(),
            b=np.full(shape, ZERO_REFERENCE, dtype=np.int64),
            h=v[..., columns],
            n=int(v.shape[-1]),
        )

    def to_dense(self) -> NDArray[np.floating]:
        k = self.h.shape[-1]
        flat_h = self.h.reshape(-1, k)
        dense = np.zeros((flat_h.shape[0], self.n), dtype=np.result_type(flat_h, np.float32))
        rows = np.repeat(np.arange(flat_h.shape[0]), k)
        a = self.a.reshape(-1)
        b = self.b.reshape(-1)
        h = flat_h.reshape(-1)
        np.add.at(dense, (rows, a), h)
        paired = b != ZERO_REFERENCE
        np.add.at(dense, (rows[paired], b[paired]), -h[paired])
        return dense.reshape(*self.batch_shape, self.n)


Gradient = NDArray[np.floating] | PairGradient


def _rowdot(v: NDArray[np.floating], rows: NDArray[np.floating]) -> NDArray[np.floating]:
    return np.einsum("bn,bn->b", v, rows)


def hyperplane_anchor_grad(
    table: LookupTable | AnchorSet,
    r: NDArray[np.int64] | int,
    x: NDArray[np.floating],
    g: NDArray[np.floating] | float,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
) -> NDArray[np.floating]:
    """``U'(c_r . x) g x``: gradient of the loss with respect to plane ``c_r``."""
    anchors = table if isinstance(table, AnchorSet) else table.anchors
    if anchors.mode is not HashMode.HYPERPLANE_SIGN:
        raise InvalidAnchorError("plane gradients exist only for hyperplane tables")
    assert anchors.planes is not None
    x = np.asarray(x)
    planes = anchors.planes[np.asarray(r)]
    u = np.sum(planes * x, axis=-1)
    coeff = uncertainty.derivative(u) * np.asarray(g)
    return np.asarray(coeff)[..., None] * x


def _scatter(
    table: LookupTable,
    index: int,
    sel: NDArray[np.int64],
    r: NDArray[np.int64],
    coeff: NDArray[np.floating],
    v_in: NDArray[np.floating],
    inputs: NDArray[np.floating] | None,
    grads: RowGrads,
) -> None:
    anchors = table.anchors
    if anchors.mode is HashMode.HYPERPLANE_SIGN:
        assert anchors.planes is not None and inputs is not None
        v_in[sel] += coeff[:, None] * anchors.planes[r]
        plane_grad = np.zeros(anchors.planes.shape)
        np.add.at(plane_grad, r, coeff[:, None] * inputs[sel])
        grads.add_plane(index, plane_grad)
        return
    a = anchors.first[r]
    b = anchors.second[r]
    np.add.at(v_in, (sel, a), coeff)
    paired = b != ZERO_REFERENCE
    np.add.at(v_in, (sel[paired], b[paired]), -coeff[paired])


def layer_minimal_tables(cache: MinPairCache, active: list[int]) -> NDArray[np.int64]:
    """Per example, the active table whose minimal ``|u|`` is smallest (ties to the lowest)."""
    if not active:
        return np.full(int(np.prod(cache.batch_shape, dtype=np.int64)), -1, dtype=np.int64)
    stacked = np.stack([np.abs(cache.entries[i].u_min).reshape(-1) for i in active])
    return np.asarray(active, dtype=np.int64)[np.argmin(stacked, axis=0)]


def _flat_inputs(cache: MinPairCache, width: int) -> NDArray[np.floating] | None:
    return None if cache.inputs is None else cache.inputs.reshape(-1, width)


def backward_variant(
    rule: LearningRule,
    transform: LutTransform,
    cache: MinPairCache,
    v_out: Gradient,
    counter: OpCounter | None = None,
    *,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
) -> tuple[Gradient, RowGrads]:
    """Backward pass through one transform under ``rule``.

    Returns the gradient with respect to the input and the pending row
    gradients (``+v_out`` on every selected row of every trainable table).
    """
    cache.check(transform)
    if isinstance(v_out, PairGradient):
        if v_out.n != transform.n_out:
            raise InvalidDimensionError("pair gradient width does not match transform output")
        if rule is LearningRule.SPIKING_SCALAR:
            return _spiking_scalar_pairs(transform, cache, v_out, counter, uncertainty)
        v_out = v_out.to_dense()
    if rule is LearningRule.ALL_PAIRS and not cache.keeps_all_pairs:
        raise RuleCacheMismatchError("all-pairs learning needs a cache that kept every comparison")

    v = np.asarray(v_out)
    if v.shape != (*cache.batch_shape, transform.n_out):
        raise InvalidDimensionError(
            f"gradient shape {v.shape} does not match {(*cache.batch_shape, transform.n_out)}"
        )
    v = v.reshape(-1, transform.n_out)
    batch = v.shape[0]
    dtype = np.result_type(v, transform.dtype)
    if transform.residual:
        v_in = v.astype(dtype, copy=True)
    else:
        v_in = np.zeros((batch, transform.n_in), dtype=dtype)
    inputs = _flat_inputs(cache, transform.n_in)
    grads = RowGrads()
    active = transform.active_tables()
    chosen = None
    if rule in (LearningRule.LAYER_MINIMAL, LearningRule.SPIKING_SCALAR):
        chosen = layer_minimal_tables(cache, active)

    everyone = np.arange(batch)
    for i in active:
        table = transform.tables[i]
        entry = cache.entries[i]
        j = entry.j.reshape(-1)
        grads.add(i, j, v)
        sel = everyone if chosen is None else np.flatnonzero(chosen == i)
        if sel.size == 0:
            continue
        j_sel = j[sel]
        v_sel = v[sel]
        selected = table.rows[j_sel]

        if rule is LearningRule.ALL_PAIRS:
            assert entry.u_all is not None
            u_all = entry.u_all.reshape(-1, table.n_c)[sel]
            for r in range(table.n_c):
                r_arr = np.full(sel.shape, r, dtype=np.int64)
                flipped = table.rows[flip_index(table.anchors, j_sel, r_arr, u_all[:, r])]
                g = _rowdot(v_sel, flipped - selected)
                coeff = uncertainty.derivative(u_all[:, r]) * g / table.n_c
                _scatter(table, i, sel, r_arr, coeff, v_in, inputs, grads)
            count(counter, rows_loaded=table.n_c * sel.size, dot_products=table.n_c * sel.size)
            continue

        r = entry.r_min.reshape(-1)[sel]
        u = entry.u_min.reshape(-1)[sel]
        if rule in (LearningRule.NO_FLIP, LearningRule.SPIKING_SCALAR):
            coeff = -uncertainty.derivative(u) * _rowdot(v_sel, selected)
            count(counter, dot_products=sel.size)
        else:
            flipped = table.rows[flip_index(table.anchors, j_sel, r, u)]
            coeff = uncertainty.derivative(u) * _rowdot(v_sel, flipped - selected)
            count(counter, rows_loaded=sel.size, dot_products=sel.size)
        _scatter(table, i, sel, r, coeff, v_in, inputs, grads)

    return v_in.reshape(*cache.batch_shape, transform.n_in), grads


def _spiking_scalar_pairs(
    transform: LutTransform,
    cache: MinPairCache,
    v_out: PairGradient,
    counter: OpCounter | None,
    uncertainty: UncertaintyFunction,
) -> tuple[PairGradient, RowGrads]:
    # h_l = U'(u) (s[b'] - s[a']) h_{l+1}: one term in, one term out.
    # The skip path of a residual transform carries nothing under this rule.
    k = v_out.h.shape[-1]
    a = v_out.a.reshape(-1, k)
    b = v_out.b.reshape(-1, k)
    h = v_out.h.reshape(-1, k)
    batch = h.shape[0]
    dense = v_out.to_dense().reshape(batch, transform.n_out)

    grads = RowGrads()
    active = transform.active_tables()
    chosen = layer_minimal_tables(cache, active)
    new_a = np.zeros(batch, dtype=np.int64)
    new_b = np.full(batch, ZERO_REFERENCE, dtype=np.int64)
    new_h = np.zeros(batch, dtype=np.result_type(h, transform.dtype))

    for i in active:
        table = transform.tables[i]
        if table.anchors.mode is HashMode.HYPERPLANE_SIGN:
            raise InvalidAnchorError("spiking scalar backprop needs index anchors")
        entry = cache.entries[i]
        j = entry.j.reshape(-1)
        grads.add(i, j, dense)
        sel = np.flatnonzero(chosen == i)
        if sel.size == 0:
            continue
        selected = table.rows[j[sel]]
        s_a = np.take_along_axis(selected, a[sel], axis=1)
        b_sel = b[sel]
        s_b = np.where(
            b_sel != ZERO_REFERENCE,
            np.take_along_axis(selected, np.maximum(b_sel, 0), axis=1),
            0.0,
        )
        scalar = np.sum(h[sel] * (s_a - s_b), axis=1)
        r = entry.r_min.reshape(-1)[sel]
        new_h[sel] = -uncertainty.derivative(entry.u_min.reshape(-1)[sel]) * scalar
        new_a[sel] = table.anchors.first[r]
        new_b[sel] = table.anchors.second[r]
        if k == 1:
            count(counter, additions=sel.size, multiplications=2 * sel.size)
        else:
            # several incoming terms reduce to the scalar through a dot product
            count(counter, additions=k * sel.size, dot_products=sel.size, multiplications=sel.size)

    shape = cache.batch_shape
    term = PairGradient.single(
        new_a.reshape(shape), new_b.reshape(shape), new_h.reshape(shape), transform.n_in,
    )
    return term, grads


def backward_lut(
    transform: LutTransform,
    cache: MinPairCache,
    v_out: NDArray[np.floating],
    counter: OpCounter | None = None,
    *,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
) -> tuple[NDArray[np.floating], RowGrads]:
    """Standard min-pair-flip backward pass."""
    v_in, grads = backward_variant(
        LearningRule.MIN_PAIR_FLIP, transform, cache, v_out, counter, uncertainty=uncertainty,
    )
    assert not isinstance(v_in, PairGradient)
    return v_in, grads
