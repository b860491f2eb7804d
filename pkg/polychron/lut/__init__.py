"""Latency hashing and the look-up-table transform."""

from polychron.lut.anchors import (
    MAX_INDEX_BITS,
    ZERO_REFERENCE,
    AnchorSet,
    HashMode,
    concat_anchor_sets,
    init_anchor_set,
)
from polychron.lut.hashing import (
    MinPairEntry,
    anchor_differences,
    compute_index,
    compute_index_cached,
    flip_bit,
    flip_index,
)
from polychron.lut.transform import (
    LookupTable,
    LutTransform,
    gather_rows,
    lut_forward,
    make_transform,
)


__all__ = [
    "MAX_INDEX_BITS",
    "ZERO_REFERENCE",
    "AnchorSet",
    "HashMode",
    "LookupTable",
    "LutTransform",
    "MinPairEntry",
    "anchor_differences",
    "compute_index",
    "compute_index_cached",
    "concat_anchor_sets",
    "flip_bit",
    "flip_index",
    "gather_rows",
    "init_anchor_set",
    "lut_forward",
    "make_transform",
]
