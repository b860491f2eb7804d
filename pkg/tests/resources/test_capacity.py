import math

import pytest

from polychron.resources.capacity import binned_capacity, capacity, capacity_table, factorial_capacity


class TestCapacity:
    def test_lut_bits(self):
        assert capacity(64, 10) == 640

    def test_firing_orders(self):
        assert factorial_capacity(60) > 80
        assert factorial_capacity(10) == pytest.approx(math.log10(3_628_800))
        assert factorial_capacity(0) == 0.0

    def test_latency_bins(self):
        assert binned_capacity(100, 100) == pytest.approx(200)
        assert binned_capacity(10, 4) == pytest.approx(6.0206, abs=1e-4)

    @pytest.mark.parametrize(
        ("func", "args"),
        [(capacity, (-1, 2)), (factorial_capacity, (-3,)), (binned_capacity, (4, 0))],
    )
    def test_rejects_bad_sizes(self, func, args):
        with pytest.raises(ValueError, match="non-negative|need"):
            func(*args)

    def test_table(self):
        rows = capacity_table(64, 10, n=60, m=4)
        assert [row.name for row in rows] == ["lut", "order", "binned"]
        assert rows[0].log10_patterns == pytest.approx(640 * math.log10(2))
        assert len(capacity_table(64, 10)) == 1
