from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np
import structlog
from numpy.typing import DTypeLike, NDArray

from polychron.core.exceptions import InvalidAnchorError, InvalidDimensionError
from polychron.core.instrumentation import OpCounter, count
from polychron.lut.anchors import AnchorSet, HashMode, init_anchor_set
from polychron.lut.hashing import compute_index


logger = structlog.get_logger()


@dataclass(eq=False)
class LookupTable:
    """Anchors plus one synaptic row per index value."""

    anchors: AnchorSet
    rows: NDArray[np.floating]

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise InvalidDimensionError("rows must be a (row_count, n_out) matrix")
        if self.rows.shape[0] != self.anchors.row_count:
            raise InvalidDimensionError(
                f"table has {self.rows.shape[0]} rows, anchors address {self.anchors.row_count}"
            )
        if not np.all(np.isfinite(self.rows)):
            raise InvalidAnchorError("synaptic rows must be finite")

    @property
    def n_c(self) -> int:
        return self.anchors.n_c

    @property
    def n_out(self) -> int:
        return int(self.rows.shape[1])

    @property
    def row_count(self) -> int:
        return int(self.rows.shape[0])


@dataclass(eq=False)
class LutTransform:
    """Bank of ``n_t`` tables computing ``y = [x +] sum_i S_i[H_i(x)]``.

    ``trainable`` limits which tables receive gradients; ``None`` means all.
    """

    tables: list[LookupTable]
    n_in: int
    n_out: int
    residual: bool = False
    trainable: frozenset[int] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.residual and self.n_in != self.n_out:
            raise InvalidDimensionError("a residual transform needs n_in == n_out")
        for table in self.tables:
            if table.anchors.n_in != self.n_in or table.n_out != self.n_out:
                raise InvalidDimensionError(
                    f"table shape ({table.anchors.n_in}->{table.n_out}) does not match "
                    f"transform ({self.n_in}->{self.n_out})"
                )
        if self.trainable is not None:
            self.restrict(self.trainable)

    @property
    def n_t(self) -> int:
        return len(self.tables)

    @property
    def dtype(self) -> np.dtype[np.floating]:
        if not self.tables:
            return np.dtype(np.float32)
        return self.tables[0].rows.dtype

    @property
    def parameter_count(self) -> int:
        return sum(table.rows.size for table in self.tables)

    def active_tables(self) -> list[int]:
        if self.trainable is None:
            return list(range(self.n_t))
        return sorted(self.trainable)

    def restrict(self, tables: Iterable[int] | None) -> None:
        """Let only ``tables`` learn; ``None`` lifts the restriction."""
        if tables is None:
            self.trainable = None
            return
        chosen = frozenset(int(i) for i in tables)
        if any(i < 0 or i >= self.n_t for i in chosen):
            raise InvalidDimensionError(f"trainable table index out of range [0, {self.n_t})")
        self.trainable = chosen

    def copy(self) -> LutTransform:
        return LutTransform(
            tables=[LookupTable(t.anchors, t.rows.copy()) for t in self.tables],
            n_in=self.n_in,
            n_out=self.n_out,
            residual=self.residual,
            trainable=self.trainable,
        )


def make_transform(
    n_in: int,
    n_out: int,
    n_t: int,
    n_c: int,
    *,
    mode: HashMode = HashMode.PAIRWISE_SIGN,
    residual: bool = False,
    seed: int | np.random.Generator = 0,
    init_scale: float = 0.0,
    bins: int = 2,
    bin_range: tuple[float, float] = (-1.0, 1.0),
    dtype: DTypeLike = np.float32,
) -> LutTransform:
    """Build a transform with random anchors.

    Synapses start at zero unless ``init_scale`` is positive, in which case
    they are drawn from a normal distribution with that standard deviation.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tables: list[LookupTable] = []
    for _ in range(n_t):
        anchors = init_anchor_set(n_in, n_c, mode, rng, bins=bins, bin_range=bin_range)
        if init_scale > 0:
            rows = (rng.standard_normal((anchors.row_count, n_out)) * init_scale).astype(dtype)
        else:
            rows = np.zeros((anchors.row_count, n_out), dtype=dtype)
        tables.append(LookupTable(anchors, rows))
    logger.debug(
        "Transform created",
        n_in=n_in,
        n_out=n_out,
        n_t=n_t,
        n_c=n_c,
        mode=mode.value,
        residual=residual,
    )
    return LutTransform(tables=tables, n_in=n_in, n_out=n_out, residual=residual)


def gather_rows(
    transform: LutTransform,
    indices: list[NDArray[np.int64]],
    counter: OpCounter | None = None,
) -> NDArray[np.floating]:
    """Sum the rows selected by per-table indices of any batch shape."""
    shape = np.shape(indices[0]) if indices else ()
    y = np.zeros((*shape, transform.n_out), dtype=transform.dtype)
    for table, j in zip(transform.tables, indices, strict=True):
        y += table.rows[j]
    batch = int(np.prod(shape, dtype=np.int64))
    count(
        counter,
        rows_loaded=transform.n_t * batch,
        values_loaded=transform.n_t * transform.n_out * batch,
        additions=transform.n_t * transform.n_out * batch,
    )
    return y


def lut_forward(
    transform: LutTransform,
    x: NDArray[np.floating],
    counter: OpCounter | None = None,
) -> NDArray[np.floating]:
    """Inference-mode forward: hash, read one row per table, add.

    No value of ``x`` is ever multiplied; the counter records exactly
    ``n_t`` rows per input vector.
    """
    x = np.asarray(x)
    if x.shape[-1] != transform.n_in:
        raise InvalidDimensionError(
            f"latency vector has length {x.shape[-1]}, transform expects {transform.n_in}"
        )
    indices = [np.asarray(compute_index(table, x, counter)) for table in transform.tables]
    y = gather_rows(transform, indices, counter) if indices else np.zeros(
        (*x.shape[:-1], transform.n_out), dtype=transform.dtype,
    )
    if transform.residual:
        y = y + x
    return y
