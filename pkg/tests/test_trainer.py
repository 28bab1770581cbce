"""Initialization, the optimizer update, and training dynamics."""

import math

import numpy as np
import pytest

from conftest import make_params
from codesum.corpus.dataset import MethodExample
from codesum.corpus.vocabulary import build_vocabulary
from codesum.errors import EmptyTrainingSet, NonFiniteGradient
from codesum.model import encode_snippet
from codesum.trainer import (
    INIT_SIGMA,
    OptimizerState,
    TrainConfig,
    clip_global_norm,
    example_loss,
    init_params,
    masked_view,
    preset,
    sgd_update,
    target_counts,
    train,
)


def ex(name, body, file_path="f.java"):
    return MethodExample(name=name, body=body, file_path=file_path, project="p")


def tiny_cfg(**kw):
    base = dict(model_kind="copy_attention", D=4, k1=3, k2=3, w1=2, w2=2, w3=2,
                dropout_rate=0.0, epochs=3, eval_every=1, min_count=1, seed=0,
                learning_rate=1e-3)
    base.update(kw)
    return preset(base.pop("model_kind"), **base)


class TestPresets:
    def test_copy_preset(self):
        cfg = preset("copy_attention")
        assert (cfg.k1, cfg.k2, cfg.w1, cfg.w2, cfg.w3) == (32, 16, 18, 19, 2)
        assert cfg.dropout_rate == 0.4
        assert cfg.D == 128

    def test_conv_preset(self):
        cfg = preset("conv_attention")
        assert (cfg.k1, cfg.k2, cfg.w1, cfg.w2, cfg.w3) == (8, 8, 24, 29, 10)
        assert cfg.dropout_rate == 0.5
        assert cfg.D == 128

    def test_round_trip_dict(self):
        cfg = preset("conv_attention", epochs=7)
        again = TrainConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            preset("copy_attention", dropout_rate=1.0)
        with pytest.raises(ValueError):
            preset("copy_attention", clip_norm=0.0)


class TestInitParams:
    def vocab(self):
        return build_vocabulary(
            [ex(["get", "x"], ["{", "x", "}"]), ex(["get"], ["{", "}"])],
            min_count=1)

    def test_bias_is_log_frequency_with_smoothing(self):
        vocab = self.vocab()
        counts = target_counts([ex(["get", "x"], []), ex(["get"], [])])
        cfg = tiny_cfg()
        params = init_params(cfg, vocab, counts)
        total = sum(counts.values())  # includes one end marker per name
        v = len(vocab)
        assert params.b.data[vocab.id("get")] == pytest.approx(
            math.log((2 + 1) / (total + v)))
        assert params.b.data[vocab.id("x")] == pytest.approx(
            math.log((1 + 1) / (total + v)))

    def test_unseen_token_bias_finite(self):
        vocab = self.vocab()
        params = init_params(tiny_cfg(), vocab, target_counts([]))
        assert np.all(np.isfinite(params.b.data))
        assert params.b.data[vocab.pad_id] == pytest.approx(math.log(1 / len(vocab)))

    def test_equal_counts_equal_bias(self):
        vocab = self.vocab()
        counts = target_counts([ex(["get"], []), ex(["x"], [])])
        params = init_params(tiny_cfg(), vocab, counts)
        assert params.b.data[vocab.id("get")] == params.b.data[vocab.id("x")]

    def test_bias_exponentials_sum_to_one(self):
        vocab = self.vocab()
        counts = target_counts([ex(["get", "x"], []), ex(["get"], [])])
        params = init_params(tiny_cfg(), vocab, counts)
        assert np.exp(params.b.data).sum() == pytest.approx(1.0, abs=1e-6)

    def test_noise_scale(self):
        vocab = self.vocab()
        cfg = preset("copy_attention")  # K_l1 alone has 128*18*32 entries
        params = init_params(cfg, vocab, target_counts([]), np.random.default_rng(0))
        draws = params.K_l1.data.ravel()
        assert draws.size >= 10_000
        assert 0.08 <= draws.std() <= 0.12
        assert abs(draws.mean()) < 0.01
        assert INIT_SIGMA == 0.1

    def test_prelu_leaks_start_at_quarter(self):
        params = init_params(tiny_cfg(), self.vocab(), target_counts([]))
        assert float(params.prelu_a1.data) == 0.25
        assert float(params.prelu_a2.data) == 0.25


class TestSgdUpdate:
    def one_param(self, value=1.0):
        params = make_params(8, d=2, k1=2, k2=2)
        for _, t in params.named_tensors():
            t.data[:] = 0.0
        params.h_init.data[:] = value
        return params

    def test_zero_gradient_keeps_parameters(self):
        params = make_params(8)
        before = {n: t.data.copy() for n, t in params.named_tensors()}
        state = OptimizerState.for_params(params)
        grads = {n: np.zeros_like(t.data) for n, t in params.named_tensors()}
        sgd_update(params, grads, state, tiny_cfg())
        for n, t in params.named_tensors():
            np.testing.assert_array_equal(t.data, before[n])

    def test_global_norm_clipping(self):
        grads = {"a": np.array([6.0, 8.0])}  # norm 10
        total = clip_global_norm(grads, 5.0)
        assert total == pytest.approx(10.0)
        np.testing.assert_allclose(grads["a"], [3.0, 4.0])

    def test_no_clip_below_threshold(self):
        grads = {"a": np.array([0.3, 0.4])}
        clip_global_norm(grads, 5.0)
        np.testing.assert_allclose(grads["a"], [0.3, 0.4])

    def test_two_steps_match_hand_computation(self):
        # Single scalar parameter; constants chosen for hand evaluation.
        cfg = tiny_cfg(learning_rate=0.1, rms_decay=0.5, momentum=0.9,
                       epsilon=1e-6, clip_norm=100.0)
        params = make_params(8)
        names = [n for n, _ in params.named_tensors()]
        state = OptimizerState.for_params(params)
        theta0 = float(params.h_init.data[0])

        def grads_with(value):
            g = {n: np.zeros_like(t.data) for n, t in params.named_tensors()}
            g["h_init"][0] = value
            return g

        # step 1: g=2 -> a=0.5*0+0.5*4=2; s=2/sqrt(2+1e-6); v=s; step=lr*(s+0.9 v)
        sgd_update(params, grads_with(2.0), state, cfg)
        a1 = 0.5 * 4.0
        s1 = 2.0 / math.sqrt(a1 + 1e-6)
        v1 = s1
        theta1 = theta0 - 0.1 * (s1 + 0.9 * v1)
        assert float(params.h_init.data[0]) == pytest.approx(theta1, rel=1e-12)

        # step 2: g=-1 -> a=0.5*2+0.5*1=1.5; s=-1/sqrt(1.5+1e-6); v=0.9*v1+s
        sgd_update(params, grads_with(-1.0), state, cfg)
        a2 = 0.5 * a1 + 0.5 * 1.0
        s2 = -1.0 / math.sqrt(a2 + 1e-6)
        v2 = 0.9 * v1 + s2
        theta2 = theta1 - 0.1 * (s2 + 0.9 * v2)
        assert float(params.h_init.data[0]) == pytest.approx(theta2, rel=1e-12)
        assert set(names) == set(state.sq)

    def test_nonfinite_gradient_raises(self):
        params = make_params(8)
        state = OptimizerState.for_params(params)
        grads = {n: np.zeros_like(t.data) for n, t in params.named_tensors()}
        grads["E"][0, 0] = np.nan
        with pytest.raises(NonFiniteGradient):
            sgd_update(params, grads, state, tiny_cfg())

    def test_step_norm_bound(self):
        # One clipped update from a fresh state cannot move farther than
        # lr * (1 + momentum) * clip_norm / sqrt(eps).
        cfg = tiny_cfg(learning_rate=0.05, clip_norm=5.0, epsilon=1e-6)
        params = make_params(8)
        state = OptimizerState.for_params(params)
        before = {n: t.data.copy() for n, t in params.named_tensors()}
        rng = np.random.default_rng(0)
        grads = {n: rng.normal(size=t.data.shape) * 1e6
                 for n, t in params.named_tensors()}
        sgd_update(params, grads, state, cfg)
        moved = math.sqrt(sum(
            float(((t.data - before[n]) ** 2).sum())
            for n, t in params.named_tensors()))
        bound = cfg.learning_rate * (1 + cfg.momentum) * cfg.clip_norm / math.sqrt(cfg.epsilon)
        assert moved <= bound


class TestDropoutMask:
    def test_masked_view_scales_survivors(self, rng):
        params = make_params(8)
        view = masked_view(params, 0.5, np.random.default_rng(0))
        ratio = view.E.data / np.where(params.E.data == 0, 1, params.E.data)
        kept = ratio[view.E.data != 0]
        np.testing.assert_allclose(kept, 2.0)

    def test_gradients_flow_to_leaves(self, rng):
        params = make_params(8)
        view = masked_view(params, 0.3, np.random.default_rng(1))
        from codesum.tensorcore import tsum

        tsum(view.E).backward()
        assert params.E.grad is not None
        # dropped entries receive zero gradient, survivors the scale
        scale = 1.0 / 0.7
        vals = set(np.unique(np.round(params.E.grad, 10)))
        assert vals <= {0.0, round(scale, 10)}


class TestTraining:
    def corpus(self, n=12):
        names = [["get", "x"], ["set", "y"], ["run"]]
        out = []
        for i in range(n):
            nm = names[i % len(names)]
            out.append(ex(nm, ["{", *nm, f"u{i}", ";", "}"], file_path=f"f{i}.java"))
        return out

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            train([], [], tiny_cfg())

    def test_frozen_dynamics_with_zero_lr_and_dropout(self):
        examples = self.corpus(6)
        cfg = tiny_cfg(learning_rate=0.0, dropout_rate=0.0, epochs=3,
                       eval_every=10)
        result = train(examples, [], cfg)
        nlls = [e["train_nll"] for e in result.log]
        assert nlls[0] == pytest.approx(nlls[1]) == pytest.approx(nlls[2])

    def test_loss_decreases_when_training(self):
        examples = self.corpus(12)
        cfg = tiny_cfg(epochs=8, learning_rate=3e-3, eval_every=8)
        result = train(examples, [], cfg)
        nlls = [e["train_nll"] for e in result.log]
        assert nlls[-1] < nlls[0]

    def test_determinism_same_seed(self):
        examples = self.corpus(6)
        cfg = tiny_cfg(epochs=2, dropout_rate=0.25, seed=9, eval_every=5)
        a = train(examples, [], cfg)
        b = train(examples, [], cfg)
        assert [e["train_nll"] for e in a.log] == [e["train_nll"] for e in b.log]
        for (n1, t1), (n2, t2) in zip(a.params.named_tensors(), b.params.named_tensors()):
            assert n1 == n2
            np.testing.assert_array_equal(t1.data, t2.data)

    def test_example_loss_deterministic_without_dropout(self):
        examples = self.corpus(3)
        vocab = build_vocabulary(examples, min_count=1)
        cfg = tiny_cfg()
        params = init_params(cfg, vocab, target_counts(examples))
        sn = encode_snippet(examples[0].body, vocab)
        l1 = float(example_loss(params, sn, examples[0].name, vocab, cfg).data)
        l2 = float(example_loss(params, sn, examples[0].name, vocab, cfg).data)
        assert l1 == l2

    def test_validation_early_stopping_runs(self):
        examples = self.corpus(9)
        cfg = tiny_cfg(epochs=4, eval_every=1, patience=2,
                       learning_rate=2e-3)
        result = train(examples[:6], examples[6:], cfg)
        assert result.log[0]["valid_f1_at_5"] is not None
        assert result.best_epoch >= 1

    def test_log_schema(self):
        examples = self.corpus(4)
        result = train(examples, examples[:2], tiny_cfg(epochs=1))
        entry = result.log[0]
        assert set(entry) == {"epoch", "train_nll", "valid_f1_at_5",
                              "valid_exact_at_1", "seconds"}

    def test_simple_state_variant_trains(self):
        examples = self.corpus(6)
        cfg = tiny_cfg(epochs=2, state_kind="simple", eval_every=5)
        result = train(examples, [], cfg)
        assert result.params.simple_state is not None
        nlls = [e["train_nll"] for e in result.log]
        assert nlls[-1] < nlls[0]

    def test_activation_dropout_fallback_runs(self):
        examples = self.corpus(6)
        cfg = tiny_cfg(epochs=2, dropout_rate=0.4, dropout_kind="activations",
                       eval_every=5)
        result = train(examples, [], cfg)
        assert len(result.log) == 2
