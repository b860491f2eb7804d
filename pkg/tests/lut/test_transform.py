import numpy as np
import pytest

from polychron.core.exceptions import InvalidDimensionError
from polychron.core.instrumentation import OpCounter
from polychron.lut.anchors import HashMode, init_anchor_set
from polychron.lut.hashing import compute_index
from polychron.lut.transform import LookupTable, LutTransform, lut_forward, make_transform


class TestMakeTransform:
    def test_zero_synapses_by_default(self, rng):
        transform = make_transform(5, 3, 4, 2, seed=rng)
        assert transform.n_t == 4
        assert transform.parameter_count == 4 * 4 * 3
        np.testing.assert_array_equal(lut_forward(transform, rng.standard_normal((6, 5))), 0.0)

    def test_residual_passes_input_through(self, rng):
        transform = make_transform(5, 5, 2, 3, residual=True, seed=rng)
        x = rng.standard_normal((3, 5)).astype(np.float32)
        np.testing.assert_array_equal(lut_forward(transform, x), x)

    def test_residual_needs_square_shape(self):
        with pytest.raises(InvalidDimensionError):
            make_transform(4, 3, 1, 2, residual=True)

    def test_dtype(self):
        assert make_transform(3, 2, 1, 1, dtype=np.float64).dtype == np.float64


class TestLutForward:
    def test_sum_of_one_row_per_table(self, rng):
        transform = make_transform(6, 4, 3, 3, seed=rng, init_scale=1.0, dtype=np.float64)
        x = rng.standard_normal((5, 6))
        expected = np.zeros((5, 4))
        for table in transform.tables:
            expected += table.rows[compute_index(table, x)]
        np.testing.assert_allclose(lut_forward(transform, x), expected, rtol=1e-12)

    def test_single_vector(self, rng):
        transform = make_transform(4, 2, 2, 2, seed=rng, init_scale=1.0)
        x = rng.standard_normal(4)
        np.testing.assert_array_equal(lut_forward(transform, x), lut_forward(transform, x[None])[0])

    def test_records_rows_and_no_multiplications(self, rng):
        transform = make_transform(6, 4, 3, 5, seed=rng, init_scale=1.0)
        counter = OpCounter()
        lut_forward(transform, rng.standard_normal((7, 6)), counter)
        assert counter.rows_loaded == 3 * 7
        assert counter.comparisons == 3 * 5 * 7
        assert counter.multiplications == 0

    def test_wrong_input_length(self, rng):
        transform = make_transform(6, 4, 1, 1, seed=rng)
        with pytest.raises(InvalidDimensionError):
            lut_forward(transform, np.zeros(5))

    def test_component_and_bin_tables(self, rng):
        for mode in (HashMode.COMPONENT_SIGN, HashMode.BIN_QUANTIZED):
            transform = make_transform(3, 2, 2, 2, mode=mode, seed=rng, init_scale=1.0)
            assert lut_forward(transform, rng.standard_normal((4, 3))).shape == (4, 2)


class TestTables:
    def test_row_count_must_match_anchors(self):
        anchors = init_anchor_set(3, 2, seed=0)
        with pytest.raises(InvalidDimensionError):
            LookupTable(anchors, np.zeros((3, 2)))

    def test_table_shape_must_match_transform(self):
        table = LookupTable(init_anchor_set(3, 2, seed=0), np.zeros((4, 2)))
        with pytest.raises(InvalidDimensionError):
            LutTransform(tables=[table], n_in=3, n_out=5)

    def test_restrict(self, rng):
        transform = make_transform(3, 2, 3, 1, seed=rng)
        assert transform.active_tables() == [0, 1, 2]
        transform.restrict([2])
        assert transform.active_tables() == [2]
        transform.restrict(None)
        assert transform.active_tables() == [0, 1, 2]
        with pytest.raises(InvalidDimensionError):
            transform.restrict([3])

    def test_copy_owns_its_rows(self, rng):
        transform = make_transform(3, 2, 2, 1, seed=rng)
        clone = transform.copy()
        clone.tables[0].rows[0, 0] = 1.0
        assert transform.tables[0].rows[0, 0] == 0.0
