from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from polychron.core.exceptions import CacheMismatchError
from polychron.lut.hashing import MinPairEntry
from polychron.lut.transform import LutTransform


@dataclass(eq=False)
class MinPairCache:
    """Training-mode state of one transform application.

    One entry per table, each shaped like the batch. Activations are not kept,
    except the input of hyperplane tables whose planes also learn.
    """

    transform: LutTransform
    entries: list[MinPairEntry]
    batch_shape: tuple[int, ...]
    inputs: NDArray[np.floating] | None = None

    def check(self, transform: LutTransform) -> None:
        if transform is not self.transform or len(self.entries) != transform.n_t:
            raise CacheMismatchError("cache was produced by a different transform")

    @property
    def keeps_all_pairs(self) -> bool:
        return all(entry.u_all is not None for entry in self.entries)


def reduce_row_chunks(
    chunks: list[tuple[NDArray[np.int64], NDArray[np.floating]]],
    width: int,
) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Sum gradient chunks per row in a fixed order.

    Chunks are concatenated in insertion order and accumulated in float64, so
    the result depends only on the order chunks were added.
    """
    if not chunks:
        return np.zeros(0, dtype=np.int64), np.zeros((0, width))
    rows = np.concatenate([np.asarray(r, dtype=np.int64).reshape(-1) for r, _ in chunks])
    grads = np.concatenate([np.asarray(g, dtype=np.float64).reshape(-1, width) for _, g in chunks])
    unique, inverse = np.unique(rows, return_inverse=True)
    summed = np.zeros((unique.shape[0], width))
    np.add.at(summed, inverse.reshape(-1), grads)
    return unique, summed


@dataclass
class RowGrads:
    """Sparse pending updates of one transform: row gradients per table.

    Hyperplane tables also collect plane gradients.
    """

    rows: dict[int, list[tuple[NDArray[np.int64], NDArray[np.floating]]]] = field(
        default_factory=dict,
    )
    planes: dict[int, NDArray[np.float64]] = field(default_factory=dict)

    def add(self, table: int, rows: NDArray[np.int64], grads: NDArray[np.floating]) -> None:
        self.rows.setdefault(table, []).append((rows, grads))

    def add_plane(self, table: int, grad: NDArray[np.floating]) -> None:
        if table in self.planes:
            self.planes[table] = self.planes[table] + grad
        else:
            self.planes[table] = np.asarray(grad, dtype=np.float64)

    def merge(self, other: RowGrads) -> None:
        for table, chunks in other.rows.items():
            self.rows.setdefault(table, []).extend(chunks)
        for table, grad in other.planes.items():
            self.add_plane(table, grad)

    def tables(self) -> list[int]:
        return sorted(set(self.rows) | set(self.planes))

    def reduce(self, table: int, width: int) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
        return reduce_row_chunks(self.rows.get(table, []), width)

    @property
    def is_empty(self) -> bool:
        return not self.rows and not self.planes
