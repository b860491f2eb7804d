from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from polychron.autograd.cache import MinPairCache
from polychron.autograd.uncertainty import DEFAULT_UNCERTAINTY, UncertaintyFunction
from polychron.core.config import LearningRule
from polychron.core.exceptions import InvalidDimensionError
from polychron.lut.hashing import anchor_differences, compute_index, flip_index
from polychron.lut.transform import LutTransform


def surrogate_forward(
    transform: LutTransform,
    x: NDArray[np.floating],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
    *,
    uncertainty: UncertaintyFunction = DEFAULT_UNCERTAINTY,
    frozen: MinPairCache | None = None,
) -> NDArray[np.floating]:
    """Smooth stand-in for ``lut_forward`` whose derivative the backward rules follow.

    Each table contributes ``S_j + U(u_min) (S_jbar - S_j)`` (min-pair flip),
    the average of that term over every comparison (all pairs) or
    ``S_j (1 - U(u_min))`` (no flip). The layer rules smooth only the table
    holding the smallest ``|u|``. ``frozen`` pins the minimal comparison (and
    the chosen table) to those recorded in a cache.
    """
    x = np.asarray(x)
    if x.shape[-1] != transform.n_in:
        raise InvalidDimensionError(
            f"latency vector has length {x.shape[-1]}, transform expects {transform.n_in}"
        )
    batch_shape = x.shape[:-1]
    flat = x.reshape(-1, transform.n_in)
    batch = flat.shape[0]
    dtype = np.result_type(flat, transform.dtype)
    y = flat.astype(dtype, copy=True) if transform.residual else np.zeros(
        (batch, transform.n_out), dtype=dtype,
    )
    everyone = np.arange(batch)
    active = set(transform.active_tables())

    differences: list[NDArray[np.floating]] = []
    minimal: list[NDArray[np.int64]] = []
    for i, table in enumerate(transform.tables):
        u_all = anchor_differences(table.anchors, flat)
        differences.append(u_all)
        if frozen is not None:
            minimal.append(frozen.entries[i].r_min.reshape(-1))
        else:
            minimal.append(np.argmin(np.abs(u_all), axis=1))

    chosen = None
    if rule in (LearningRule.LAYER_MINIMAL, LearningRule.SPIKING_SCALAR):
        ordered = sorted(active)
        if ordered:
            mins = np.stack([np.abs(differences[i][everyone, minimal[i]]) for i in ordered])
            chosen = np.asarray(ordered)[np.argmin(mins, axis=0)]
        else:
            chosen = np.full(batch, -1)

    for i, table in enumerate(transform.tables):
        j = np.asarray(compute_index(table, flat)).reshape(-1)
        selected = table.rows[j].astype(dtype)
        if i not in active:
            y += selected
            continue
        u_all = differences[i]
        r = minimal[i]
        u = u_all[everyone, r]
        if rule is LearningRule.ALL_PAIRS:
            term = selected.copy()
            for c in range(table.n_c):
                r_arr = np.full(batch, c, dtype=np.int64)
                flipped = table.rows[flip_index(table.anchors, j, r_arr, u_all[:, c])]
                weight = uncertainty.value(u_all[:, c])[:, None] / table.n_c
                term += weight * (flipped - selected)
        elif rule in (LearningRule.NO_FLIP, LearningRule.SPIKING_SCALAR):
            term = selected * (1.0 - uncertainty.value(u)[:, None])
        else:
            flipped = table.rows[flip_index(table.anchors, j, r, u)]
            term = selected + uncertainty.value(u)[:, None] * (flipped - selected)
        if chosen is not None:
            term = np.where((chosen == i)[:, None], term, selected)
        y += term
    return y.reshape(*batch_shape, transform.n_out)
