from __future__ import annotations

from collections.abc import Callable

import numpy as np
import structlog

from polychron.core.exceptions import InvalidAnchorError, InvalidDimensionError
from polychron.lut.anchors import ZERO_REFERENCE, AnchorSet, HashMode, init_anchor_set
from polychron.lut.transform import LookupTable, LutTransform


logger = structlog.get_logger()

AnchorFactory = Callable[[np.random.Generator], AnchorSet]


def _same_kind_anchors(transform: LutTransform) -> AnchorFactory:
    if not transform.tables:
        raise InvalidDimensionError("cannot infer anchors for a transform without tables")
    template = transform.tables[0].anchors
    if template.mode is HashMode.CONCATENATED:
        raise InvalidAnchorError("concatenated tables need an explicit anchor factory")

    def draw(rng: np.random.Generator) -> AnchorSet:
        return init_anchor_set(
            template.n_in,
            template.n_c,
            template.mode,
            rng,
            bins=template.bins,
            bin_range=template.bin_range,
        )

    return draw


def fine_tune_add_table(
    transform: LutTransform,
    seed: int | np.random.Generator = 0,
    *,
    restrict: bool = True,
    anchors: AnchorFactory | None = None,
) -> LutTransform:
    """Copy of ``transform`` with one extra all-zero table.

    The forward output is unchanged. With ``restrict`` only the new table
    receives gradients.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draw = anchors or _same_kind_anchors(transform)
    new_anchors = draw(rng)
    rows = np.zeros((new_anchors.row_count, transform.n_out), dtype=transform.dtype)
    tuned = transform.copy()
    tuned.tables.append(LookupTable(new_anchors, rows))
    tuned.restrict({tuned.n_t - 1} if restrict else None)
    logger.info("Table added for fine-tuning", n_t=tuned.n_t, restrict=restrict)
    return tuned


def fine_tune_split_table(
    transform: LutTransform,
    table_idx: int,
    new_pair: tuple[int, int] | int,
    *,
    restrict: bool = True,
) -> LutTransform:
    """Copy of ``transform`` where table ``table_idx`` gains one comparison.

    The comparison becomes the least significant digit and every old row is
    repeated once per digit value, so each input still reads its old row.
    """
    if not 0 <= table_idx < transform.n_t:
        raise InvalidDimensionError(f"table index out of range [0, {transform.n_t})")
    first, second = new_pair if isinstance(new_pair, tuple) else (new_pair, ZERO_REFERENCE)
    tuned = transform.copy()
    old = tuned.tables[table_idx]
    anchors = old.anchors.with_comparison(first, second)
    rows = np.repeat(old.rows, anchors.base, axis=0)
    tuned.tables[table_idx] = LookupTable(anchors, rows)
    tuned.restrict({table_idx} if restrict else None)
    logger.info(
        "Table split for fine-tuning",
        table=table_idx,
        n_c=anchors.n_c,
        restrict=restrict,
    )
    return tuned
