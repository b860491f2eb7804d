import numpy as np
import pytest

from polychron.autograd.backward import backward_lut
from polychron.autograd.cache import RowGrads, reduce_row_chunks
from polychron.autograd.forward import forward_cached
from polychron.autograd.update import apply_update
from polychron.lut.transform import lut_forward, make_transform


class TestReduceRowChunks:
    def test_sums_repeated_rows(self):
        rows, summed = reduce_row_chunks(
            [
                (np.array([3, 1]), np.array([[1.0, 2.0], [0.5, 0.5]])),
                (np.array([1]), np.array([[1.0, -1.0]])),
            ],
            2,
        )
        np.testing.assert_array_equal(rows, [1, 3])
        np.testing.assert_allclose(summed, [[1.5, -0.5], [1.0, 2.0]])

    def test_empty(self):
        rows, summed = reduce_row_chunks([], 4)
        assert rows.size == 0
        assert summed.shape == (0, 4)


class TestRowGrads:
    def test_merge_keeps_chunk_order(self):
        first = RowGrads()
        first.add(0, np.array([2]), np.array([[1.0]]))
        second = RowGrads()
        second.add(0, np.array([2]), np.array([[2.0]]))
        second.add(4, np.array([0]), np.array([[3.0]]))
        first.merge(second)
        assert first.tables() == [0, 4]
        _, summed = first.reduce(0, 1)
        np.testing.assert_allclose(summed, [[3.0]])


class TestApplyUpdate:
    def test_sgd_step_on_touched_rows_only(self, rng):
        transform = make_transform(4, 2, 2, 2, seed=rng, init_scale=1.0, dtype=np.float64)
        before = [table.rows.copy() for table in transform.tables]
        grads = RowGrads()
        grads.add(1, np.array([0, 0, 3]), np.array([[1.0, 0.0], [1.0, 2.0], [-4.0, 4.0]]))
        written = apply_update(transform, grads, 0.5)
        assert written == 2
        np.testing.assert_array_equal(transform.tables[0].rows, before[0])
        after = transform.tables[1].rows
        np.testing.assert_allclose(after[0], before[1][0] - 0.5 * np.array([2.0, 2.0]))
        np.testing.assert_allclose(after[3], before[1][3] - 0.5 * np.array([-4.0, 4.0]))
        np.testing.assert_array_equal(after[1:3], before[1][1:3])

    def test_zero_learning_rate_changes_nothing(self, rng):
        transform = make_transform(4, 2, 1, 2, seed=rng, init_scale=1.0)
        grads = RowGrads()
        grads.add(0, np.array([1]), np.ones((1, 2)))
        before = transform.tables[0].rows.copy()
        assert apply_update(transform, grads, 0.0) == 0
        np.testing.assert_array_equal(transform.tables[0].rows, before)

    def test_negative_learning_rate(self, rng):
        transform = make_transform(4, 2, 1, 2, seed=rng)
        with pytest.raises(ValueError, match="non-negative"):
            apply_update(transform, RowGrads(), -0.1)

    def test_step_lowers_a_linear_loss(self, rng):
        transform = make_transform(5, 3, 3, 2, seed=rng, init_scale=1.0, dtype=np.float64)
        x = rng.standard_normal((8, 5))
        v = rng.standard_normal((8, 3))
        y, cache = forward_cached(transform, x)
        _, grads = backward_lut(transform, cache, v)
        apply_update(transform, grads, 0.01)
        # rows move against v, inputs keep their rows
        assert np.sum(v * lut_forward(transform, x)) < np.sum(v * y)

    @pytest.mark.parametrize("copies", [2, 5])
    def test_identical_examples_add_up(self, rng, copies):
        x = rng.standard_normal((1, 5))
        v = rng.standard_normal((1, 3))
        deltas = []
        for batch in (1, copies):
            transform = make_transform(5, 3, 3, 2, seed=7, init_scale=1.0, dtype=np.float64)
            before = [table.rows.copy() for table in transform.tables]
            _, cache = forward_cached(transform, np.repeat(x, batch, axis=0))
            _, grads = backward_lut(transform, cache, np.repeat(v, batch, axis=0))
            apply_update(transform, grads, 0.1)
            deltas.append([table.rows - old for table, old in zip(transform.tables, before, strict=True)])
        for single, repeated in zip(*deltas, strict=True):
            np.testing.assert_allclose(repeated, copies * single, rtol=1e-12, atol=1e-15)
