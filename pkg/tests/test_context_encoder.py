"""Contextualization: information flow, pooling, ablation path, full-pipeline gradient."""

import numpy as np
import pytest

from conftest import make_window, toy_config
from domusfm.autodiff import Tensor, grad_check, precision
from domusfm.context_encoder import (
    WindowRepresentation,
    contextualize,
    init_context_encoder,
    pool_sequence,
)
from domusfm.event_encoder import build_batch, encode_batch, init_event_encoder
from domusfm.embeddings import fallback_table
from domusfm.model import Model, window_representation

SEEDS = (0, 1, 2)


def make_ctx_params(config, seed=0):
    return init_context_encoder(config, np.random.default_rng(seed))


class TestContextualize:
    def test_single_event_is_deterministic_transform(self):
        config = toy_config()
        params = make_ctx_params(config)
        x = Tensor(np.random.default_rng(0).normal(size=(1, config.d)))
        a = contextualize(x, params, config)
        b = contextualize(x, params, config)
        np.testing.assert_array_equal(a.data, b.data)
        assert a.shape == (1, config.d)

    @pytest.mark.parametrize("seed", SEEDS)
    def test_distinct_inputs_stay_distinct(self, seed):
        config = toy_config()
        params = make_ctx_params(config, seed)
        rng = np.random.default_rng(seed + 7)
        x = Tensor(rng.normal(size=(2, config.d)))
        out = contextualize(x, params, config).data
        assert not np.allclose(out[0], out[1])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_context_flows_between_events(self, seed):
        config = toy_config()
        params = make_ctx_params(config, seed)
        rng = np.random.default_rng(seed + 13)
        base = rng.normal(size=(3, config.d))
        perturbed = base.copy()
        # single-coordinate change: a uniform shift would be erased by the
        # pre-attention layer norm
        perturbed[2, 0] += 1.0
        out_a = contextualize(Tensor(base), params, config).data
        out_b = contextualize(Tensor(perturbed), params, config).data
        assert not np.allclose(out_a[0], out_b[0])  # row 0 saw the change

    def test_batched_matches_unbatched(self):
        config = toy_config()
        params = make_ctx_params(config)
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 4, config.d)).astype(np.float32)
        batched = contextualize(Tensor(x), params, config).data
        for i in range(2):
            single = contextualize(Tensor(x[i]), params, config).data
            np.testing.assert_allclose(batched[i], single, rtol=2e-5, atol=1e-5)


class TestPooling:
    def test_single_row_identity(self):
        x = Tensor(np.array([[3.0, -1.0, 2.0]]))
        np.testing.assert_allclose(pool_sequence(x).data, [3.0, -1.0, 2.0])

    def test_two_row_mean(self):
        x = Tensor(np.array([[1.0, 1.0], [3.0, 3.0]]))
        np.testing.assert_allclose(pool_sequence(x).data, [2.0, 2.0])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(6, 5))
        perm = rng.permutation(6)
        np.testing.assert_allclose(pool_sequence(Tensor(x)).data,
                                   pool_sequence(Tensor(x[perm])).data, rtol=1e-5,
                                   atol=1e-6)


class TestWindowRepresentation:
    def test_ablation_returns_event_embeddings_bitwise(self, table):
        config = toy_config(context_enabled=False)
        model = Model.init(config, table, seed=0)
        window = make_window(n=4, seed=5)
        rep = window_representation(window, table, model.event_params,
                                    model.context_params, model.config)
        batch = build_batch([window], {}, table=table, config=config)
        raw = encode_batch(batch, model.event_params, config).data.reshape(4, config.d)
        np.testing.assert_array_equal(rep.contextualized, raw)
        np.testing.assert_allclose(rep.pooled, raw.mean(axis=0), rtol=1e-6)

    def test_deterministic(self, table):
        config = toy_config()
        model = Model.init(config, table, seed=1)
        window = make_window(n=3, seed=2)
        a = window_representation(window, table, model.event_params,
                                  model.context_params, model.config)
        b = window_representation(window, table, model.event_params,
                                  model.context_params, model.config)
        np.testing.assert_array_equal(a.contextualized, b.contextualized)
        np.testing.assert_array_equal(a.pooled, b.pooled)

    def test_context_enabled_mixes_rows(self, table):
        config = toy_config()
        model = Model.init(config, table, seed=3)
        w1 = make_window(n=3, seed=10)
        events_changed = list(w1.events)
        import dataclasses

        # shift event 0 by two hours so its temporal features genuinely change
        events_changed[0] = dataclasses.replace(events_changed[0],
                                                timestamp=events_changed[0].timestamp - 7200)
        w2 = w1.__class__(tuple(events_changed), w1.labels)
        rep1 = window_representation(w1, table, model.event_params,
                                     model.context_params, model.config)
        rep2 = window_representation(w2, table, model.event_params,
                                     model.context_params, model.config)
        assert not np.allclose(rep1.contextualized[2], rep2.contextualized[2])

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            WindowRepresentation(np.zeros((3, 4)), np.zeros(3))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradient_full_pipeline(self, seed):
        config = toy_config()
        table = fallback_table(config.text_dim())
        with precision("float64"):
            event_params = init_event_encoder(config, np.random.default_rng(seed))
            ctx_params = init_context_encoder(config, np.random.default_rng(seed + 1))
            window = make_window(n=3, seed=seed)
            batch = build_batch([window], {}, table=table, config=config)
            rng = np.random.default_rng(seed + 77)
            r = Tensor(rng.normal(size=(config.d,)))

            def f():
                h = encode_batch(batch, event_params, config)
                ctx = contextualize(h, ctx_params, config)
                return (pool_sequence(ctx)[0] * r).sum()

            params = list(event_params.tensors.values()) + list(ctx_params.tensors.values())
            err = grad_check(f, params, seed=seed)
        assert err < 1e-4
