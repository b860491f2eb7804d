import numpy as np
import pytest

from polychron.core.config import LearningRule
from polychron.core.exceptions import InvalidDimensionError
from polychron.models.deep import init_deep_snn
from polychron.train.classifier import accuracy, classify, fit_classifier, make_latency_order_task


class TestLatencyOrderTask:
    def test_prototypes_are_orderings(self):
        task = make_latency_order_task(8, 4, seed=3)
        assert task.prototypes.shape == (4, 8)
        for row in task.prototypes:
            np.testing.assert_allclose(np.sort(row), np.linspace(-1.0, 1.0, 8))

    def test_samples(self, rng):
        task = make_latency_order_task(6, 3, jitter=0.0)
        x, labels = task.sample(rng, 10)
        np.testing.assert_array_equal(x, task.prototypes[labels])

    @pytest.mark.parametrize(("n", "classes"), [(4, 1), (4, 5)])
    def test_class_count(self, n, classes):
        with pytest.raises(InvalidDimensionError):
            make_latency_order_task(n, classes)

    def test_jitter_sign(self):
        with pytest.raises(ValueError, match="jitter"):
            make_latency_order_task(4, 2, jitter=-1.0)


class TestFitClassifier:
    def test_untrained_readout_is_the_input(self, rng):
        model = init_deep_snn(6, 2, 2, 2, seed=rng)
        x = np.array([[0.1, 0.9, -0.3, 0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(classify(model, x, 3), [1])

    def test_loss_goes_down(self):
        task = make_latency_order_task(12, 4, jitter=0.05, seed=1)
        model = init_deep_snn(12, 6, 3, 2, seed=2, dtype=np.float64)
        losses = fit_classifier(model, task, steps=60, lr=0.01, seed=3)
        assert np.mean(losses[-10:]) < np.mean(losses[:10])

    def test_width_mismatch(self):
        task = make_latency_order_task(8, 4)
        with pytest.raises(InvalidDimensionError):
            fit_classifier(init_deep_snn(6, 1, 1, 1), task, steps=1)

    @pytest.mark.slow
    def test_two_layer_network_separates_four_orders(self):
        task = make_latency_order_task(16, 4, jitter=0.1, seed=0)
        model = init_deep_snn(16, 8, 4, 2, seed=1, dtype=np.float64)
        fit_classifier(model, task, steps=3000, lr=0.01, seed=2)
        assert accuracy(model, task, np.random.default_rng(3), size=2000) >= 0.95

    @pytest.mark.slow
    @pytest.mark.parametrize("rule", [LearningRule.NO_FLIP, LearningRule.LAYER_MINIMAL])
    def test_simplified_rules_still_learn(self, rule):
        task = make_latency_order_task(16, 4, jitter=0.1, seed=0)
        model = init_deep_snn(16, 8, 4, 2, seed=1, dtype=np.float64)
        fit_classifier(model, task, steps=3000, lr=0.01, rule=rule, seed=2)
        assert accuracy(model, task, np.random.default_rng(3), size=2000) >= 0.80
