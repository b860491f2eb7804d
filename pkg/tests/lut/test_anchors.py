import numpy as np
import pytest

from polychron.core.exceptions import InvalidAnchorError, InvalidDimensionError
from polychron.lut.anchors import (
    ZERO_REFERENCE,
    AnchorSet,
    HashMode,
    concat_anchor_sets,
    init_anchor_set,
)
from polychron.lut.hashing import compute_index


class TestInitAnchorSet:
    def test_pairs_are_distinct_and_in_range(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            anchors = init_anchor_set(5, 8, seed=rng)
            assert anchors.n_c == 8
            assert np.all(anchors.first != anchors.second)
            assert np.all((anchors.first >= 0) & (anchors.first < 5))
            assert np.all((anchors.second >= 0) & (anchors.second < 5))

    def test_every_ordered_pair_is_reachable(self):
        rng = np.random.default_rng(0)
        pairs = set()
        for _ in range(60):
            anchors = init_anchor_set(3, 10, seed=rng)
            pairs |= set(zip(anchors.first.tolist(), anchors.second.tolist(), strict=True))
        assert pairs == {(a, b) for a in range(3) for b in range(3) if a != b}

    def test_seeded_draws_repeat(self):
        a = init_anchor_set(8, 6, seed=11)
        b = init_anchor_set(8, 6, seed=11)
        assert a.same_as(b)

    def test_single_index_modes(self):
        anchors = init_anchor_set(4, 3, HashMode.COMPONENT_SIGN, seed=0)
        assert np.all(anchors.second == ZERO_REFERENCE)
        binned = init_anchor_set(4, 3, HashMode.BIN_QUANTIZED, seed=0, bins=3)
        assert binned.row_count == 27

    def test_pairwise_needs_two_components(self):
        with pytest.raises(InvalidDimensionError):
            init_anchor_set(1, 2)

    def test_concatenated_mode_is_built_from_blocks(self):
        with pytest.raises(InvalidAnchorError):
            init_anchor_set(4, 2, HashMode.CONCATENATED)


class TestAnchorValidation:
    def test_equal_pair_rejected(self):
        with pytest.raises(InvalidAnchorError):
            AnchorSet(mode=HashMode.PAIRWISE_SIGN, n_in=3, first=[1], second=[1])

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidAnchorError):
            AnchorSet(mode=HashMode.PAIRWISE_SIGN, n_in=3, first=[3], second=[0])

    def test_index_must_fit_in_63_bits(self):
        with pytest.raises(InvalidAnchorError):
            AnchorSet(
                mode=HashMode.PAIRWISE_SIGN, n_in=2, first=[0] * 64, second=[1] * 64,
            )
        with pytest.raises(InvalidAnchorError):
            AnchorSet(
                mode=HashMode.BIN_QUANTIZED,
                n_in=2,
                first=[0] * 32,
                second=[ZERO_REFERENCE] * 32,
                bins=4,
            )

    def test_bins_need_two_values(self):
        with pytest.raises(InvalidAnchorError):
            AnchorSet(mode=HashMode.BIN_QUANTIZED, n_in=2, first=[0], second=[ZERO_REFERENCE], bins=1)

    def test_hyperplanes_need_matching_width(self):
        with pytest.raises(InvalidAnchorError):
            AnchorSet(mode=HashMode.HYPERPLANE_SIGN, n_in=3, planes=np.ones((2, 4)))

    def test_row_count(self):
        anchors = AnchorSet(mode=HashMode.PAIRWISE_SIGN, n_in=3, first=[0, 1, 2], second=[1, 2, 0])
        assert anchors.row_count == 8


class TestConcatenation:
    def test_blocks_keep_their_order_and_offsets(self, rng):
        query = init_anchor_set(4, 2, seed=rng)
        key = init_anchor_set(4, 2, seed=rng)
        position = init_anchor_set(3, 3, HashMode.COMPONENT_SIGN, seed=rng)
        joined = concat_anchor_sets([(query, 0), (key, 4), (position, 8)], 11)
        assert joined.mode is HashMode.CONCATENATED
        assert joined.n_c == 7
        assert joined.block(0, 2, 0, 4).same_as(query)
        assert joined.block(2, 4, 4, 4).same_as(key)
        assert joined.block(4, 7, 8, 3).same_as(position)

    def test_index_is_the_blocks_side_by_side(self, rng):
        query = init_anchor_set(4, 2, seed=rng)
        position = init_anchor_set(2, 2, HashMode.COMPONENT_SIGN, seed=rng)
        joined = concat_anchor_sets([(query, 0), (position, 4)], 6)
        x = rng.standard_normal(6)
        expected = (compute_index(query, x[:4]) << 2) | compute_index(position, x[4:])
        assert compute_index(joined, x) == expected

    def test_block_must_fit(self, rng):
        with pytest.raises(InvalidDimensionError):
            concat_anchor_sets([(init_anchor_set(4, 2, seed=rng), 3)], 6)

    def test_only_sign_blocks(self, rng):
        binned = init_anchor_set(4, 2, HashMode.BIN_QUANTIZED, seed=rng)
        with pytest.raises(InvalidAnchorError):
            concat_anchor_sets([(binned, 0)], 4)


class TestWithComparison:
    def test_new_comparison_is_least_significant(self):
        anchors = AnchorSet(mode=HashMode.PAIRWISE_SIGN, n_in=3, first=[0], second=[1])
        grown = anchors.with_comparison(2, 0)
        assert grown.n_c == 2
        x = np.array([1.0, 0.0, 2.0])
        assert compute_index(grown, x) == (compute_index(anchors, x) << 1) | 1

    def test_hyperplanes_cannot_grow_by_index(self):
        anchors = init_anchor_set(3, 2, HashMode.HYPERPLANE_SIGN, seed=0)
        with pytest.raises(InvalidAnchorError):
            anchors.with_comparison(0)
