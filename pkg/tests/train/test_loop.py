import math

import numpy as np
import pytest

from polychron.core.config import ExperimentConfig, LrMode, ModelConfig, ModelKind, TrainConfig
from polychron.core.exceptions import CorpusError, DivergenceError
from polychron.models.factory import build_model
from polychron.train.corpus import split_bytes
from polychron.train.loop import CURVE_HEADER, CurveRow, evaluate, train_loop, validation_windows
from polychron.train.loss import LN2, softmax_cross_entropy


def fresh(config, seed=7):
    rng = np.random.default_rng(seed)
    return build_model(config.model, rng), rng


class TestValidationWindows:
    def test_starts_every_context(self):
        windows = validation_windows(np.arange(30, dtype=np.uint8), 8)
        np.testing.assert_array_equal(windows[:, 0], [0, 8, 16])
        assert windows.shape == (3, 9)

    def test_cap(self):
        assert validation_windows(np.arange(100, dtype=np.uint8), 4, 5).shape == (5, 5)

    def test_too_short(self):
        with pytest.raises(CorpusError):
            validation_windows(np.arange(8, dtype=np.uint8), 8)


class TestEvaluate:
    def test_untrained_model_predicts_uniformly(self, rnn_config, rng):
        corpus = split_bytes(rng.integers(0, 256, 4000).astype(np.uint8).tobytes(), 0.5)
        model = build_model(rnn_config, rng)
        assert math.isclose(evaluate(model, corpus), 8.0)

    def test_matches_window_by_window_average(self, rnn_model, corpus_bytes):
        corpus = split_bytes(corpus_bytes, 0.3)
        total = 0.0
        count = 0
        for window in validation_windows(corpus.val_bytes, 8):
            logits, _ = rnn_model.forward(window[:-1])
            loss, _ = softmax_cross_entropy(logits, window[1:])
            total += float(loss.sum())
            count += loss.size
        assert math.isclose(evaluate(rnn_model, corpus), total / count / LN2, rel_tol=1e-9)

    def test_deterministic(self, transformer_model, corpus_bytes):
        corpus = split_bytes(corpus_bytes, 0.3)
        assert evaluate(transformer_model, corpus) == evaluate(transformer_model, corpus)


class TestTrainLoop:
    def test_curve_rows(self, small_experiment, corpus_bytes):
        model, rng = fresh(small_experiment)
        seen = []
        curve = train_loop(model, split_bytes(corpus_bytes, 0.2), small_experiment, rng, on_eval=seen.append)
        assert [row.step for row in curve] == [0, 2, 4]
        assert seen == curve
        assert math.isclose(curve[0].val_bpc, 8.0)
        assert curve[0].csv_line().startswith("0,")
        assert CURVE_HEADER == "step,train_loss_nats,val_bpc"

    def test_zero_learning_rate_changes_nothing(self, small_experiment, corpus_bytes):
        config = small_experiment.model_copy(
            update={"train": small_experiment.train.model_copy(update={"lr_scale": 0.0})},
        )
        model, rng = fresh(config)
        curve = train_loop(model, split_bytes(corpus_bytes, 0.2), config, rng)
        assert all(math.isclose(row.val_bpc, 8.0) for row in curve)
        np.testing.assert_array_equal(model.embedder, 0.0)

    def test_same_seed_same_curve(self, small_experiment, corpus_bytes):
        corpus = split_bytes(corpus_bytes, 0.2)
        curves = []
        for _ in range(2):
            model, rng = fresh(small_experiment)
            curves.append(train_loop(model, corpus, small_experiment, rng))
        assert curves[0] == curves[1]

    def test_thread_count_does_not_change_results(self, small_experiment, corpus_bytes):
        config = small_experiment.model_copy(
            update={"train": small_experiment.train.model_copy(update={"grad_shards": 2})},
        )
        corpus = split_bytes(corpus_bytes, 0.2)
        results = []
        for threads in (1, 2):
            model, rng = fresh(config)
            curve = train_loop(model, corpus, config, rng, threads=threads)
            results.append((curve, model.embedder.copy()))
        assert results[0][0] == results[1][0]
        np.testing.assert_array_equal(results[0][1], results[1][1])

    def test_checkpoint_callback(self, small_experiment, corpus_bytes):
        model, rng = fresh(small_experiment)
        steps = []
        train_loop(model, split_bytes(corpus_bytes, 0.2), small_experiment, rng, on_checkpoint=steps.append)
        assert steps == [2, 4]

    def test_resumed_run_has_no_baseline(self, small_experiment, corpus_bytes):
        model, rng = fresh(small_experiment)
        curve = train_loop(model, split_bytes(corpus_bytes, 0.2), small_experiment, rng, start_step=2)
        assert [row.step for row in curve] == [4]

    def test_early_stop(self, small_experiment, corpus_bytes):
        config = small_experiment.model_copy(
            update={"train": small_experiment.train.model_copy(update={"stop_bpc": 100.0})},
        )
        model, rng = fresh(config)
        steps = []
        curve = train_loop(model, split_bytes(corpus_bytes, 0.2), config, rng, on_checkpoint=steps.append)
        assert curve[-1].step == 2
        assert steps == [2]

    def test_transformer_trains(self, transformer_config, corpus_bytes):
        config = ExperimentConfig(
            model=transformer_config,
            train=TrainConfig(batch_size=2, max_steps=2, eval_interval=1, max_eval_windows=2, lr_scale=0.1),
        )
        model, rng = fresh(config)
        curve = train_loop(model, split_bytes(corpus_bytes, 0.2), config, rng)
        assert [row.step for row in curve] == [0, 1, 2]

    def test_non_finite_loss_aborts(self, small_experiment, corpus_bytes):
        model, rng = fresh(small_experiment)
        model.unembedder.tables[0].rows[:] = np.inf
        with pytest.raises(DivergenceError, match="non-finite"):
            train_loop(model, split_bytes(corpus_bytes, 0.2), small_experiment, rng)

    def test_divergence_inside_worker_threads(self, small_experiment, corpus_bytes):
        config = small_experiment.model_copy(
            update={"train": small_experiment.train.model_copy(update={"grad_shards": 2})},
        )
        model, rng = fresh(config)
        model.unembedder.tables[0].rows[:] = np.inf
        # no baseline evaluation, so the first logits are seen by a shard
        with pytest.raises(DivergenceError, match="non-finite"):
            train_loop(model, split_bytes(corpus_bytes, 0.2), config, rng, start_step=1, threads=2)

    @pytest.mark.slow
    def test_single_byte_corpus_is_learned(self):
        config = ExperimentConfig(
            model=ModelConfig(kind=ModelKind.RNN, n=8, n_t=4, n_c=3, n_inp=8, init_scale=0.1),
            train=TrainConfig(
                lr_mode=LrMode.CONSTANT,
                lr_scale=0.01,
                batch_size=4,
                max_steps=200,
                eval_interval=50,
                max_eval_windows=8,
            ),
        )
        model, rng = fresh(config)
        curve = train_loop(model, split_bytes(b"a" * 400, 0.25), config, rng)
        assert curve[-1].val_bpc < 0.05


class TestCurveRow:
    def test_csv_line(self):
        assert CurveRow(step=3, train_loss_nats=1.5, val_bpc=2.25).csv_line() == "3,1.500000,2.250000"
