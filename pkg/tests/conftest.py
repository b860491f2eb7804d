import numpy as np
import pytest
import structlog

from polychron.core.config import ExperimentConfig, ModelConfig, ModelKind, TrainConfig
from polychron.core.logging import setup_logging
from polychron.models.factory import build_model


TEXT = (
    b"the quick brown fox jumps over the lazy dog. "
    b"pack my box with five dozen liquor jugs. "
    b"how vexingly quick daft zebras jump! "
) * 6


@pytest.fixture(autouse=True)
def quiet_logging():
    setup_logging("CRITICAL")
    yield
    structlog.reset_defaults()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def corpus_bytes():
    return TEXT


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_bytes(TEXT)
    return path


@pytest.fixture
def rnn_config():
    return ModelConfig(kind=ModelKind.RNN, n=8, n_t=3, n_c=3, n_t_u=2, n_c_u=2, n_inp=8)


@pytest.fixture
def transformer_config():
    return ModelConfig(
        kind=ModelKind.TRANSFORMER, n=6, n_t=2, n_c=2, p=2, n_layers=2, heads=2, n_inp=6,
    )


@pytest.fixture
def rnn_model(rnn_config, rng):
    return build_model(rnn_config.model_copy(update={"init_scale": 0.5}), rng)


@pytest.fixture
def transformer_model(transformer_config, rng):
    return build_model(transformer_config.model_copy(update={"init_scale": 0.5}), rng)


@pytest.fixture
def small_experiment(rnn_config):
    return ExperimentConfig(
        model=rnn_config,
        train=TrainConfig(
            batch_size=4,
            max_steps=4,
            eval_interval=2,
            max_eval_windows=4,
            lr_scale=0.05,
            warmup_steps=10,
        ),
    )
