from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from polychron.autograd.cache import MinPairCache
from polychron.core.exceptions import InvalidDimensionError
from polychron.core.instrumentation import OpCounter
from polychron.lut.anchors import HashMode
from polychron.lut.hashing import compute_index_cached
from polychron.lut.transform import LutTransform, gather_rows


def forward_cached(
    transform: LutTransform,
    x: NDArray[np.floating],
    counter: OpCounter | None = None,
    *,
    keep_all_pairs: bool = False,
) -> tuple[NDArray[np.floating], MinPairCache]:
    """Training-mode forward.

    The output is the inference output; the cache adds the selected row and
    the minimal comparison of every table.
    """
    x = np.asarray(x)
    if x.shape[-1] != transform.n_in:
        raise InvalidDimensionError(
            f"latency vector has length {x.shape[-1]}, transform expects {transform.n_in}"
        )
    entries = []
    indices = []
    for table in transform.tables:
        j, entry = compute_index_cached(table, x, counter, keep_all_pairs=keep_all_pairs)
        indices.append(np.asarray(j))
        entries.append(entry)
    if indices:
        y = gather_rows(transform, indices, counter)
    else:
        y = np.zeros((*x.shape[:-1], transform.n_out), dtype=transform.dtype)
    if transform.residual:
        y = y + x
    hyperplane = any(t.anchors.mode is HashMode.HYPERPLANE_SIGN for t in transform.tables)
    cache = MinPairCache(
        transform=transform,
        entries=entries,
        batch_shape=tuple(x.shape[:-1]),
        inputs=x.copy() if hyperplane else None,
    )
    return y, cache
