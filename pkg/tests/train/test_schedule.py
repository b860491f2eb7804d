import math

import pytest

from polychron.core.config import LrMode
from polychron.train.schedule import lr_schedule


class TestLrSchedule:
    def test_peak_at_warmup(self):
        assert math.isclose(lr_schedule(400, 400, 2.0), 2.0 / 20.0)

    def test_rises_then_decays(self):
        rates = [lr_schedule(step, 100, 1.0) for step in range(1, 400)]
        peak = rates.index(max(rates))
        assert peak == 99
        assert all(a < b for a, b in zip(rates[:peak], rates[1 : peak + 1], strict=True))
        assert all(a > b for a, b in zip(rates[peak:-1], rates[peak + 1 :], strict=True))

    def test_constant_mode(self):
        assert lr_schedule(1, 100, 0.3, LrMode.CONSTANT) == 0.3
        assert lr_schedule(10_000, 100, 0.3, LrMode.CONSTANT) == 0.3

    def test_steps_start_at_one(self):
        with pytest.raises(ValueError, match="at least 1"):
            lr_schedule(0, 100, 1.0)
