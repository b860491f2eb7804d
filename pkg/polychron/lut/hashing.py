from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import NDArray

from polychron.core.exceptions import (
    InvalidAnchorError,
    InvalidDimensionError,
    InvalidLatencyError,
)
from polychron.core.instrumentation import OpCounter, count
from polychron.lut.anchors import ZERO_REFERENCE, AnchorSet, HashMode


if TYPE_CHECKING:
    from polychron.lut.transform import LookupTable


Index = NDArray[np.int64]


@dataclass(frozen=True)
class MinPairEntry:
    """Per-table state kept from a training forward pass.

    ``j`` is the selected row, ``r_min``/``u_min`` the comparison closest to
    flipping (smallest ``|u|``, ties to the smallest ``r``). ``u_all`` is only
    kept when a learning rule needs every comparison.
    """

    j: Index
    r_min: Index
    u_min: NDArray[np.floating]
    u_all: NDArray[np.floating] | None = None


def _anchors_of(table: AnchorSet | LookupTable) -> AnchorSet:
    return table if isinstance(table, AnchorSet) else table.anchors


def _check_input(anchors: AnchorSet, x: NDArray[np.floating]) -> None:
    if x.ndim < 1 or x.shape[-1] != anchors.n_in:
        raise InvalidDimensionError(
            f"latency vector has length {x.shape[-1] if x.ndim else 0}, "
            f"table expects {anchors.n_in}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidLatencyError("latency vector contains NaN or infinite values")


def _batch_size(x: NDArray[np.floating]) -> int:
    return int(np.prod(x.shape[:-1], dtype=np.int64))


def _record(anchors: AnchorSet, x: NDArray[np.floating], counter: OpCounter | None) -> None:
    if counter is None:
        return
    batch = _batch_size(x)
    if anchors.mode is HashMode.HYPERPLANE_SIGN:
        work = anchors.n_c * anchors.n_in * batch
        count(counter, multiplications=work, additions=work, sign_tests=anchors.n_c * batch,
              values_loaded=work)
        return
    if anchors.mode is HashMode.BIN_QUANTIZED:
        count(counter, comparisons=anchors.n_c * (anchors.bins - 1) * batch,
              values_loaded=anchors.n_c * batch)
        return
    pairs = int(np.count_nonzero(anchors.is_pairwise))
    singles = anchors.n_c - pairs
    count(
        counter,
        comparisons=pairs * batch,
        sign_tests=singles * batch,
        values_loaded=(2 * pairs + singles) * batch,
    )


def anchor_differences(anchors: AnchorSet, x: NDArray[np.floating]) -> NDArray[np.floating]:
    """The signed quantities ``u_r`` whose signs form the index.

    Bin tables report the signed distance of each anchor latency to the
    nearest interior bin edge, so that crossing zero moves the value to the
    neighbouring bin.
    """
    if anchors.mode is HashMode.HYPERPLANE_SIGN:
        assert anchors.planes is not None
        return np.asarray(x @ anchors.planes.T)
    if anchors.mode is HashMode.BIN_QUANTIZED:
        values = x[..., anchors.first]
        edges = anchors.edges
        digits = np.searchsorted(edges, values, side="left")
        below = edges[np.clip(digits - 1, 0, len(edges) - 1)]
        above = edges[np.clip(digits, 0, len(edges) - 1)]
        to_below = values - below
        to_above = values - above
        use_below = (digits == len(edges)) | (
            (digits > 0) & (np.abs(to_below) < np.abs(to_above))
        )
        return np.where(use_below, to_below, to_above)
    padded = np.concatenate([x, np.zeros(x.shape[:-1] + (1,), dtype=x.dtype)], axis=-1)
    second = np.where(anchors.second == ZERO_REFERENCE, anchors.n_in, anchors.second)
    return padded[..., anchors.first] - padded[..., second]


def _digits(anchors: AnchorSet, x: NDArray[np.floating], u: NDArray[np.floating]) -> Index:
    if anchors.mode is HashMode.BIN_QUANTIZED:
        # digit = number of interior edges strictly below the latency
        return np.searchsorted(anchors.edges, x[..., anchors.first], side="left").astype(np.int64)
    return (u > 0).astype(np.int64)


def _assemble(anchors: AnchorSet, digits: Index) -> Index:
    n_c = anchors.n_c
    if anchors.mode is HashMode.BIN_QUANTIZED:
        weights = anchors.bins ** np.arange(n_c - 1, -1, -1, dtype=np.int64)
        return np.sum(digits * weights, axis=-1, dtype=np.int64)
    shifts = np.arange(n_c - 1, -1, -1, dtype=np.int64)
    return np.bitwise_or.reduce(np.left_shift(digits, shifts), axis=-1)


def _scalar_or_array(j: Index, x: NDArray[np.floating]) -> Index:
    return np.int64(j) if x.ndim == 1 else j  # type: ignore[return-value]


def compute_index(
    table: AnchorSet | LookupTable,
    x: NDArray[np.floating],
    counter: OpCounter | None = None,
) -> Index:
    """Row index selected by ``x`` (``H_i(x)``), for one vector or a batch.

    Sign modes set bit ``r`` when ``u_r > 0`` (a tie gives 0); comparison 0
    is the most significant bit. Bin mode writes base-m digits in the same
    order.
    """
    anchors = _anchors_of(table)
    x = np.asarray(x)
    _check_input(anchors, x)
    _record(anchors, x, counter)
    u = anchor_differences(anchors, x) if anchors.mode.is_sign else x[..., :0]
    j = _assemble(anchors, _digits(anchors, x, u))
    return _scalar_or_array(j, x)


def compute_index_cached(
    table: AnchorSet | LookupTable,
    x: NDArray[np.floating],
    counter: OpCounter | None = None,
    *,
    keep_all_pairs: bool = False,
) -> tuple[Index, MinPairEntry]:
    """``compute_index`` plus the minimal comparison needed for learning."""
    anchors = _anchors_of(table)
    x = np.asarray(x)
    _check_input(anchors, x)
    _record(anchors, x, counter)
    u = anchor_differences(anchors, x)
    j = _assemble(anchors, _digits(anchors, x, u))
    r_min = np.argmin(np.abs(u), axis=-1)
    u_min = np.take_along_axis(u, r_min[..., None], axis=-1)[..., 0]
    entry = MinPairEntry(
        j=j,
        r_min=r_min.astype(np.int64),
        u_min=u_min,
        u_all=u if keep_all_pairs else None,
    )
    return _scalar_or_array(j, x), entry


def flip_bit(j: Index | int, r: Index | int, n_bits: int) -> Index:
    """Flip comparison ``r`` of a sign index (MSB-first convention)."""
    j_arr = np.asarray(j, dtype=np.int64)
    r_arr = np.asarray(r, dtype=np.int64)
    if np.any(r_arr < 0) or np.any(r_arr >= n_bits):
        raise InvalidAnchorError(f"comparison position must lie in [0, {n_bits})")
    if np.any(j_arr < 0) or np.any(j_arr >= (1 << n_bits)):
        raise InvalidAnchorError(f"index does not fit in {n_bits} bits")
    flipped = np.bitwise_xor(j_arr, np.left_shift(np.int64(1), n_bits - 1 - r_arr))
    return flipped if flipped.ndim else np.int64(flipped)  # type: ignore[return-value]


def flip_index(
    anchors: AnchorSet,
    j: Index,
    r: Index,
    u: NDArray[np.floating],
) -> Index:
    """Index reached when comparison ``r`` crosses zero.

    Sign modes flip one bit. Bin mode moves digit ``r`` one bin towards the
    edge that ``u`` measures: down when the latency sits above that edge.
    """
    if anchors.mode.is_sign:
        return flip_bit(j, r, anchors.n_c)
    step = np.asarray(anchors.bins, dtype=np.int64) ** (anchors.n_c - 1 - np.asarray(r))
    return np.where(np.asarray(u) > 0, j - step, j + step).astype(np.int64)
