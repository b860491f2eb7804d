from __future__ import annotations

import numpy as np
import structlog

from polychron.autograd.cache import RowGrads
from polychron.core.instrumentation import OpCounter, count
from polychron.lut.transform import LutTransform


logger = structlog.get_logger()


def apply_update(
    transform: LutTransform,
    grads: RowGrads,
    lr: float,
    counter: OpCounter | None = None,
) -> int:
    """Plain SGD step ``S_ij <- S_ij - lr * sum(v)`` on touched rows only.

    Returns the number of rows written. Untouched rows are left bit-identical.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    if lr == 0 or grads.is_empty:
        return 0
    written = 0
    for index in grads.tables():
        if index >= transform.n_t:
            raise IndexError(f"gradient for table {index} but transform has {transform.n_t}")
        table = transform.tables[index]
        rows, summed = grads.reduce(index, transform.n_out)
        if rows.size:
            updated = table.rows[rows] - lr * summed
            table.rows[rows] = updated.astype(table.rows.dtype)
            written += int(rows.size)
        if index in grads.planes:
            planes = table.anchors.planes
            assert planes is not None
            np.subtract(planes, lr * grads.planes[index], out=planes, casting="unsafe")
    count(counter, rows_loaded=written, additions=written * transform.n_out)
    logger.debug("Update applied", rows=written, lr=lr)
    return written
