import numpy as np
import pytest

from polychron.autograd.surrogate import surrogate_forward
from polychron.checks import attention_pair_inputs, central_difference, clear_of_ties, relative_error
from polychron.core.config import ModelConfig, ModelKind
from polychron.core.exceptions import CacheMismatchError, InvalidDimensionError
from polychron.lut.transform import lut_forward
from polychron.models.attention import attention_delta, build_v_index_cache, pair_cache
from polychron.models.base import VOCAB_SIZE, parameter_count
from polychron.models.transformer import init_snn_transformer, transformer_backward, transformer_forward


def toy_config(**overrides):
    values = dict(
        kind=ModelKind.TRANSFORMER,
        n=8,
        n_t=2,
        n_c=2,
        p=2,
        n_layers=2,
        heads=1,
        n_inp=3,
        n_t_u=2,
        n_c_u=2,
        init_scale=1.0,
        dtype="float64",
    )
    values.update(overrides)
    return ModelConfig(**values)


def local(transform, frozen, anchor, x):
    # surrogate slope, hard value at the recorded point
    return (
        surrogate_forward(transform, x, frozen=frozen)
        - surrogate_forward(transform, anchor, frozen=frozen)
        + lut_forward(transform, anchor)
    )


def hard_activations(model, tokens):
    """Inputs of every block and every FFN along the inference path."""
    z = model.embedder[tokens]
    block_inputs, ffn_inputs = [], []
    for block in model.blocks:
        block_inputs.append(z)
        x = z.copy()
        for head in block.heads:
            x = x + attention_delta(head, z, build_v_index_cache(head, z))
        ffn_inputs.append(x)
        if block.ffn is not None:
            x = lut_forward(block.ffn, x)
        z = x
    return block_inputs, ffn_inputs, z


def cache_is_clear(cache):
    for block in cache.blocks:
        for head in block.heads:
            if not (clear_of_ties(head.q_u) and clear_of_ties(head.k_u) and clear_of_ties(head.pe_u)):
                return False
        if block.ffn is not None and not all(clear_of_ties(e.u_all) for e in block.ffn.entries):
            return False
    return all(clear_of_ties(e.u_all) for e in cache.unembed.entries)


class TestTransformerForward:
    def test_logits_per_position(self, transformer_model, rng):
        tokens = rng.integers(0, 256, size=(3, 6))
        logits, cache = transformer_forward(transformer_model, tokens)
        assert logits.shape == (3, 6, VOCAB_SIZE)
        assert cache is None

    def test_attention_only_with_empty_tables_unembeds_the_embedding(self, rng):
        model = init_snn_transformer(toy_config(ffn_enabled=False, n_inp=5), rng)
        for block in model.blocks:
            for head in block.heads:
                for table in head.value.tables:
                    table.rows[:] = 0.0
        tokens = np.array([7, 8, 9, 10])
        logits, _ = transformer_forward(model, tokens)
        np.testing.assert_array_equal(logits, lut_forward(model.unembedder, model.embedder[tokens]))
        assert not model.ffn_enabled

    def test_training_mode_gives_the_same_logits(self, transformer_model, rng):
        tokens = rng.integers(0, 256, size=(2, 6))
        plain, _ = transformer_forward(transformer_model, tokens)
        trained, cache = transformer_forward(transformer_model, tokens, train=True)
        np.testing.assert_array_equal(plain, trained)
        assert len(cache.blocks) == 2

    def test_causal(self, transformer_model, rng):
        tokens = rng.integers(0, 256, size=6)
        full, _ = transformer_forward(transformer_model, tokens)
        prefix, _ = transformer_forward(transformer_model, tokens[:3])
        np.testing.assert_array_equal(full[:3], prefix)

    def test_sequence_longer_than_the_context(self, transformer_model):
        with pytest.raises(InvalidDimensionError):
            transformer_forward(transformer_model, np.zeros(7, dtype=np.int64))

    def test_zero_initialized_model_is_silent(self, transformer_config, rng):
        model = init_snn_transformer(transformer_config, rng)
        logits, _ = transformer_forward(model, np.array([1, 2, 3]))
        np.testing.assert_array_equal(logits, 0.0)


class TestTransformerBackward:
    def test_zero_logit_gradient(self, transformer_model, rng):
        tokens = rng.integers(0, 256, size=(2, 4))
        _, cache = transformer_forward(transformer_model, tokens, train=True)
        dz, grads = transformer_backward(transformer_model, cache, np.zeros((2, 4, VOCAB_SIZE)))
        np.testing.assert_array_equal(dz, 0.0)
        assert "block1.head1.value" in grads.luts
        assert "block0.ffn" in grads.luts

    def test_cache_from_another_model(self, transformer_model, transformer_config, rng):
        other = init_snn_transformer(transformer_config, rng)
        _, cache = transformer_forward(transformer_model, np.array([1, 2]), train=True)
        with pytest.raises(CacheMismatchError):
            transformer_backward(other, cache, np.zeros((2, VOCAB_SIZE)))

    @pytest.mark.parametrize("ffn_enabled", [True, False])
    def test_matches_finite_differences(self, ffn_enabled):
        rng = np.random.default_rng(21)
        tokens = np.array([5, 9, 13])
        for _ in range(50):
            model = init_snn_transformer(toy_config(ffn_enabled=ffn_enabled), rng)
            _, cache = transformer_forward(model, tokens, train=True, keep_all_pairs=True)
            if cache_is_clear(cache):
                break
        else:
            pytest.fail("no usable transformer instance")

        dlogits = rng.standard_normal((3, VOCAB_SIZE))
        dz, grads = transformer_backward(model, cache, dlogits)
        block_inputs, ffn_inputs, top = hard_activations(model, tokens)
        z0 = model.embedder[tokens].copy()

        def loss():
            z = z0
            for depth, block in enumerate(model.blocks):
                x = z.copy()
                for h, head in enumerate(block.heads):
                    frozen, later, _ = pair_cache(head, cache.blocks[depth].heads[h])
                    pairs = attention_pair_inputs(head, z[None], head.pe)
                    anchor = attention_pair_inputs(head, block_inputs[depth][None], head.pe)
                    np.add.at(x, later, local(head.value, frozen, anchor, pairs)[0])
                if block.ffn is not None:
                    x = local(block.ffn, cache.blocks[depth].ffn, ffn_inputs[depth], x)
                z = x
            return float(np.sum(dlogits * local(model.unembedder, cache.unembed, top, z)))

        assert relative_error(dz, central_difference(loss, z0)) < 1e-4

        pe = model.blocks[0].heads[0].pe
        dpe = np.zeros(pe.shape)
        for offsets, chunk in grads.dense["block0.head0.pe"]:
            np.add.at(dpe, offsets, chunk)
        # the hard anchors stay put while the encoder is perturbed
        frozen_pe = pe.copy()

        def pe_loss():
            z = z0
            for depth, block in enumerate(model.blocks):
                x = z.copy()
                for h, head in enumerate(block.heads):
                    frozen, later, _ = pair_cache(head, cache.blocks[depth].heads[h])
                    current = pe if (depth, h) == (0, 0) else head.pe
                    reference = frozen_pe if (depth, h) == (0, 0) else head.pe
                    pairs = attention_pair_inputs(head, z[None], current)
                    anchor = attention_pair_inputs(head, block_inputs[depth][None], reference)
                    np.add.at(x, later, local(head.value, frozen, anchor, pairs)[0])
                if block.ffn is not None:
                    x = local(block.ffn, cache.blocks[depth].ffn, ffn_inputs[depth], x)
                z = x
            return float(np.sum(dlogits * local(model.unembedder, cache.unembed, top, z)))

        assert relative_error(dpe, central_difference(pe_loss, pe)) < 1e-4


class TestTransformerParameters:
    def test_names(self, transformer_model):
        assert list(transformer_model.parameters()) == [
            "embedder",
            "block0.head0.value",
            "block0.head0.pe",
            "block0.head1.value",
            "block0.head1.pe",
            "block0.ffn",
            "block1.head0.value",
            "block1.head0.pe",
            "block1.head1.value",
            "block1.head1.pe",
            "block1.ffn",
            "unembedder",
        ]

    def test_parameter_count(self, transformer_config, rng):
        model = init_snn_transformer(transformer_config, rng)
        n, n_t, n_c, p, n_inp = 6, 2, 2, 2, 6
        head = n_t * 2 ** (2 * n_c + p) * n + (n_inp - 1) * p
        ffn = n_t * 2**n_c * n
        expected = 256 * n + 2 * (2 * head + ffn) + n_t * 2**n_c * 256
        assert parameter_count(model) == expected

    def test_set_positional_encoder(self, transformer_model):
        pe = np.ones((5, 2), dtype=np.float32)
        transformer_model.set_parameter("block1.head0.pe", pe)
        assert transformer_model.blocks[1].heads[0].pe is pe
        with pytest.raises(InvalidDimensionError):
            transformer_model.set_parameter("block1.head0.pe", np.ones((5, 3), dtype=np.float32))
        with pytest.raises(KeyError):
            transformer_model.set_parameter("block0.head0.keys", pe)
