from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from polychron.core.exceptions import InvalidAnchorError, InvalidDimensionError


# Largest index width an int64 row index can carry.
MAX_INDEX_BITS = 63

# Marker in ``AnchorSet.second`` for "compare the first component against zero".
ZERO_REFERENCE = -1


class HashMode(str, Enum):
    """How a table turns a latency vector into a row index."""

    PAIRWISE_SIGN = "pairwise-sign"
    BIN_QUANTIZED = "bin-quantized"
    HYPERPLANE_SIGN = "hyperplane-sign"
    COMPONENT_SIGN = "component-sign"
    # sign blocks glued together, e.g. the attention input [z_i, z_j, PE_{i-j}]
    CONCATENATED = "concatenated"

    @property
    def is_sign(self) -> bool:
        return self is not HashMode.BIN_QUANTIZED


MODE_TAGS: dict[HashMode, int] = {
    HashMode.PAIRWISE_SIGN: 0,
    HashMode.BIN_QUANTIZED: 1,
    HashMode.HYPERPLANE_SIGN: 2,
    HashMode.COMPONENT_SIGN: 3,
    HashMode.CONCATENATED: 4,
}


def _index_array(values: NDArray[np.integer] | list[int] | None) -> NDArray[np.int64]:
    if values is None:
        return np.zeros(0, dtype=np.int64)
    return np.asarray(values, dtype=np.int64).reshape(-1)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Anchors of one look-up table.

    ``first``/``second`` hold the compared components: ``u_r = x[first[r]] -
    x[second[r]]`` for pairwise entries and ``u_r = x[first[r]]`` when
    ``second[r]`` is ``ZERO_REFERENCE``. Hyperplane tables keep their
    comparison vectors in ``planes`` instead. Comparison 0 is the most
    significant digit of the row index in every mode.
    """

    mode: HashMode
    n_in: int
    first: NDArray[np.int64] = field(default_factory=lambda: _index_array(None))
    second: NDArray[np.int64] = field(default_factory=lambda: _index_array(None))
    planes: NDArray[np.floating] | None = None
    bins: int = 2
    bin_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "first", _index_array(self.first))
        object.__setattr__(self, "second", _index_array(self.second))
        self._validate()

    def _validate(self) -> None:
        if self.n_in < 1:
            raise InvalidDimensionError(f"n_in must be positive, got {self.n_in}")
        if self.mode is HashMode.HYPERPLANE_SIGN:
            if self.planes is None or self.planes.ndim != 2 or self.planes.shape[1] != self.n_in:
                raise InvalidAnchorError("hyperplane anchors need planes of shape (n_c, n_in)")
            if not np.all(np.isfinite(self.planes)):
                raise InvalidAnchorError("hyperplane anchors must be finite")
        else:
            if self.first.shape != self.second.shape:
                raise InvalidAnchorError("first and second anchor lists differ in length")
            if np.any(self.first < 0) or np.any(self.first >= self.n_in):
                raise InvalidAnchorError(f"anchor index out of range [0, {self.n_in})")
            if np.any(self.second < ZERO_REFERENCE) or np.any(self.second >= self.n_in):
                raise InvalidAnchorError(f"anchor index out of range [0, {self.n_in})")
        if self.n_c < 1:
            raise InvalidAnchorError("a table needs at least one comparison")

        zero_ref = self.second == ZERO_REFERENCE
        if self.mode is HashMode.PAIRWISE_SIGN:
            if np.any(zero_ref):
                raise InvalidAnchorError("pairwise anchors need two indices per comparison")
            if np.any(self.first == self.second):
                raise InvalidAnchorError("pairwise anchors must satisfy a_r != b_r")
        elif self.mode in (HashMode.COMPONENT_SIGN, HashMode.BIN_QUANTIZED):
            if not np.all(zero_ref):
                raise InvalidAnchorError(f"{self.mode.value} anchors use single indices")
        elif self.mode is HashMode.CONCATENATED:
            if np.any((self.first == self.second) & ~zero_ref):
                raise InvalidAnchorError("pairwise anchors must satisfy a_r != b_r")

        if self.mode is HashMode.BIN_QUANTIZED:
            lo, hi = self.bin_range
            if self.bins < 2:
                raise InvalidAnchorError("bin hashing needs m >= 2")
            if not lo < hi:
                raise InvalidAnchorError("bin_range must satisfy lo < hi")
            if self.n_c * np.log2(self.bins) > MAX_INDEX_BITS:
                raise InvalidAnchorError("m^n_c does not fit in 63 index bits")
        elif self.n_c > MAX_INDEX_BITS:
            raise InvalidAnchorError("n_c does not fit in 63 index bits")

    @property
    def n_c(self) -> int:
        if self.mode is HashMode.HYPERPLANE_SIGN:
            assert self.planes is not None
            return int(self.planes.shape[0])
        return int(self.first.shape[0])

    @property
    def base(self) -> int:
        return self.bins if self.mode is HashMode.BIN_QUANTIZED else 2

    @property
    def row_count(self) -> int:
        return int(self.base**self.n_c)

    @property
    def edges(self) -> NDArray[np.float64]:
        """Interior bin edges (``m - 1`` of them)."""
        lo, hi = self.bin_range
        return np.linspace(lo, hi, self.bins + 1)[1:-1]

    @property
    def is_pairwise(self) -> NDArray[np.bool_]:
        return self.second != ZERO_REFERENCE

    def block(self, start: int, stop: int, offset: int, n_in: int) -> AnchorSet:
        """Cut comparisons ``[start, stop)`` out as a stand-alone anchor set.

        ``offset`` is subtracted from every index, mapping a block of a
        concatenated input back to its own coordinates.
        """
        first = self.first[start:stop] - offset
        second = self.second[start:stop].copy()
        pairwise = second != ZERO_REFERENCE
        second[pairwise] -= offset
        if np.all(pairwise):
            mode = HashMode.PAIRWISE_SIGN
        elif not np.any(pairwise):
            mode = HashMode.COMPONENT_SIGN
        else:
            mode = HashMode.CONCATENATED
        return AnchorSet(mode=mode, n_in=n_in, first=first, second=second)

    def with_comparison(self, first: int, second: int = ZERO_REFERENCE) -> AnchorSet:
        """Append one comparison as the least significant digit."""
        if self.mode is HashMode.HYPERPLANE_SIGN:
            raise InvalidAnchorError("hyperplane tables cannot be split by index anchors")
        return AnchorSet(
            mode=self.mode,
            n_in=self.n_in,
            first=np.append(self.first, first),
            second=np.append(self.second, second),
            bins=self.bins,
            bin_range=self.bin_range,
        )

    def same_as(self, other: AnchorSet) -> bool:
        if self.mode is not other.mode or self.n_in != other.n_in:
            return False
        if self.mode is HashMode.HYPERPLANE_SIGN:
            assert self.planes is not None and other.planes is not None
            return bool(np.array_equal(self.planes, other.planes))
        return (
            bool(np.array_equal(self.first, other.first))
            and bool(np.array_equal(self.second, other.second))
            and self.bins == other.bins
            and self.bin_range == other.bin_range
        )


def _generator(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def init_anchor_set(
    n_in: int,
    n_c: int,
    mode: HashMode = HashMode.PAIRWISE_SIGN,
    seed: int | np.random.Generator = 0,
    *,
    bins: int = 2,
    bin_range: tuple[float, float] = (-1.0, 1.0),
) -> AnchorSet:
    """Draw random anchors for one table.

    Pairs are uniform over ordered pairs with ``a != b``; the same pair may be
    drawn twice within a table.
    """
    rng = _generator(seed)
    if n_c < 1:
        raise InvalidAnchorError("n_c must be at least 1")
    if mode is HashMode.PAIRWISE_SIGN:
        if n_in < 2:
            raise InvalidDimensionError("pairwise hashing needs n_in >= 2")
        first = rng.integers(0, n_in, size=n_c)
        second = rng.integers(0, n_in - 1, size=n_c)
        second = second + (second >= first)
        return AnchorSet(mode=mode, n_in=n_in, first=first, second=second)
    if mode in (HashMode.COMPONENT_SIGN, HashMode.BIN_QUANTIZED):
        singles = rng.integers(0, n_in, size=n_c)
        return AnchorSet(
            mode=mode,
            n_in=n_in,
            first=singles,
            second=np.full(n_c, ZERO_REFERENCE),
            bins=bins,
            bin_range=bin_range,
        )
    if mode is HashMode.HYPERPLANE_SIGN:
        return AnchorSet(mode=mode, n_in=n_in, planes=rng.standard_normal((n_c, n_in)))
    raise InvalidAnchorError(f"cannot draw anchors for mode {mode.value}; use concat_anchor_sets")


def concat_anchor_sets(blocks: list[tuple[AnchorSet, int]], n_in: int) -> AnchorSet:
    """Join sign anchor sets over adjacent input blocks.

    Each block is ``(anchors, offset)`` where ``offset`` is the position of the
    block inside the concatenated input. Comparison order follows block order,
    so the first block supplies the most significant bits.
    """
    firsts: list[NDArray[np.int64]] = []
    seconds: list[NDArray[np.int64]] = []
    for anchors, offset in blocks:
        if anchors.mode not in (HashMode.PAIRWISE_SIGN, HashMode.COMPONENT_SIGN):
            raise InvalidAnchorError("only pairwise and component blocks can be concatenated")
        if offset < 0 or offset + anchors.n_in > n_in:
            raise InvalidDimensionError("block does not fit in the concatenated input")
        firsts.append(anchors.first + offset)
        second = anchors.second.copy()
        second[second != ZERO_REFERENCE] += offset
        seconds.append(second)
    return AnchorSet(
        mode=HashMode.CONCATENATED,
        n_in=n_in,
        first=np.concatenate(firsts),
        second=np.concatenate(seconds),
    )
