import itertools

import numpy as np
import pytest

from conftest import SMALL_DIMS, small_config
from mmmt.data_io import HEADS, MODALITIES, gather_labels, generate_synthetic
from mmmt.errors import ConfigError, DataError, LabelError
from mmmt.model import (HeadOutputs, ModelConfig, backward, forward,
                        init_model, load_model, loss_and_grads,
                        multitask_loss, multitask_loss_grad, parameter_count,
                        predict, save_model)
from mmmt.rng import RngState
from mmmt.tensor_core import grad_check


def build(seed=1, **cfg_overrides):
    cfg = small_config(**cfg_overrides)
    return init_model(cfg, RngState(seed))


class TestInit:
    def test_same_seed_bit_identical(self):
        m1, m2 = build(seed=3), build(seed=3)
        for n in m1.params:
            assert np.array_equal(m1.params[n].value, m2.params[n].value)

    def test_different_seed_differs(self):
        m1, m2 = build(seed=3), build(seed=4)
        assert not np.array_equal(m1.params["adapter.w"].value,
                                  m2.params["adapter.w"].value)

    def test_parameter_count_formula_matches_enumeration(self):
        for cfg in (small_config(), ModelConfig()):
            model = init_model(cfg, RngState(0))
            assert sum(p.value.size for p in model.parameters()) == parameter_count(cfg)

    def test_default_config_count_frozen(self):
        # computed once by enumeration over the default architecture
        assert parameter_count(ModelConfig()) == 1_807_500

    def test_divisibility_config_error(self):
        with pytest.raises(ConfigError, match="divisible"):
            init_model(small_config(d_model=9, heads_per_layer=(2, 2, 4, 4)),
                       RngState(0))

    def test_heads_layers_mismatch(self):
        with pytest.raises(ConfigError):
            init_model(small_config(heads_per_layer=(2, 2)), RngState(0))

    def test_weight_range(self):
        model = build()
        w = model.params["proj_image.w"]
        r = np.sqrt(1.0 / small_config().d_image)
        assert (np.abs(w.value) <= r).all()
        assert np.abs(model.params["proj_image.b"].value).max() == 0.0
        assert np.array_equal(model.params["enc0.ln1.gain"].value,
                              np.ones(small_config().d_model))


class TestForward:
    def test_permutation_invariance_all_orders(self, tiny_batch):
        model = build()
        base = forward(model, tiny_batch)
        for perm in itertools.permutations(MODALITIES):
            out = forward(model, tiny_batch, token_order=perm)
            for h in HEADS:
                assert np.abs(out.by_head(h) - base.by_head(h)).max() < 1e-9

    def test_masked_modality_has_zero_influence(self, tiny_batch):
        model = build()
        base = forward(model, tiny_batch, modality_mask=("text",))
        for rec in tiny_batch:
            rec.image_vec = rec.image_vec + np.float32(100.0)
        perturbed = forward(model, tiny_batch, modality_mask=("text",))
        for h in HEADS:
            assert np.array_equal(base.by_head(h), perturbed.by_head(h))

    def test_identical_records_identical_rows(self, tiny_batch):
        model = build()
        twice = [tiny_batch[0], tiny_batch[0]]
        out = forward(model, twice)
        for h in HEADS:
            rows = out.by_head(h)
            assert np.array_equal(rows[0], rows[1])

    def test_eval_mode_is_pure(self, tiny_batch):
        model = build(dropout_rate=0.3)
        a = forward(model, tiny_batch, training=False)
        b = forward(model, tiny_batch, training=False)
        for h in HEADS:
            assert np.array_equal(a.by_head(h), b.by_head(h))

    def test_training_dropout_consumes_rng(self, tiny_batch):
        model = build(dropout_rate=0.3)
        a = forward(model, tiny_batch, training=True, rng=RngState(1))
        b = forward(model, tiny_batch, training=True, rng=RngState(1))
        c = forward(model, tiny_batch, training=True, rng=RngState(2))
        assert np.array_equal(a.sentiment_logits, b.sentiment_logits)
        assert not np.array_equal(a.sentiment_logits, c.sentiment_logits)

    def test_empty_mask_config_error(self, tiny_batch):
        with pytest.raises(ConfigError, match="empty"):
            forward(build(), tiny_batch, modality_mask=())

    def test_missing_modality_names_record(self, tiny_batch):
        tiny_batch[1].clip_vec = None
        with pytest.raises(DataError, match="syn-000001"):
            forward(build(), tiny_batch, modality_mask=MODALITIES)

    def test_logit_widths(self, tiny_batch):
        out = forward(build(), tiny_batch)
        assert out.sentiment_logits.shape == (2, 2)
        assert out.humour_logits.shape == (2, 3)
        assert out.sarcasm_logits.shape == (2, 3)
        assert out.offensive_logits.shape == (2, 3)
        assert out.motivation_logit.shape == (2, 1)


class TestLoss:
    def test_total_equals_sum_of_per_head(self, tiny_batch):
        model = build()
        out = forward(model, tiny_batch)
        labels = gather_labels(tiny_batch)
        total, per_head = multitask_loss(out, labels)
        assert total == pytest.approx(sum(per_head.values()), abs=1e-12)
        assert set(per_head) == set(HEADS)

    def test_single_head_mask_saturated(self):
        out = HeadOutputs(
            sentiment_logits=np.zeros((1, 2)),
            humour_logits=np.zeros((1, 3)),
            sarcasm_logits=np.zeros((1, 3)),
            offensive_logits=np.zeros((1, 3)),
            motivation_logit=np.array([[40.0]]))
        labels = {"motivation": np.array([1])}
        total, per_head = multitask_loss(out, labels, head_mask=("motivation",))
        assert total < 1e-6 and list(per_head) == ["motivation"]

    def test_head_weights_scale_total(self, tiny_batch):
        model = build()
        out = forward(model, tiny_batch)
        labels = gather_labels(tiny_batch)
        t1, ph = multitask_loss(out, labels, head_mask=("sentiment", "humour"),
                                head_weights={"humour": 2.0})
        assert t1 == pytest.approx(ph["sentiment"] + 2.0 * ph["humour"], abs=1e-12)

    def test_label_out_of_range(self, tiny_batch):
        model = build()
        out = forward(model, tiny_batch)
        labels = gather_labels(tiny_batch)
        labels["sentiment"] = np.array([0, 5])
        with pytest.raises(LabelError, match="sentiment"):
            multitask_loss(out, labels)

    def test_full_gradient_check(self, tiny_batch):
        model = build()
        labels = gather_labels(tiny_batch)

        def f():
            out = forward(model, tiny_batch, training=False)
            total, _ = multitask_loss(out, labels)
            return total

        model.zero_grads()
        loss_and_grads(model, tiny_batch, labels=labels, training=False)
        err = grad_check(f, model.parameters(), eps=1e-5,
                         max_elements_per_param=12, rng=RngState(0))
        assert err < 1e-4

    def test_backward_accumulates(self, tiny_batch):
        model = build()
        labels = gather_labels(tiny_batch)
        model.zero_grads()
        loss_and_grads(model, tiny_batch, labels=labels)
        g1 = model.params["adapter.w"].grad.copy()
        loss_and_grads(model, tiny_batch, labels=labels)
        assert np.allclose(model.params["adapter.w"].grad, 2 * g1)


class TestPredict:
    def test_all_zero_logits(self):
        out = HeadOutputs(np.zeros((1, 2)), np.zeros((1, 3)), np.zeros((1, 3)),
                          np.zeros((1, 3)), np.zeros((1, 1)))
        preds = predict(out)
        for h in HEADS:
            assert preds[h][0] == 0  # sigma(0)=0.5 is not > 0.5

    def test_saturated_logits_encode_exact_labels(self):
        big = 30.0
        out = HeadOutputs(
            sentiment_logits=np.array([[big, -big]]),      # rank 1
            humour_logits=np.array([[big, big, -big]]),    # rank 2
            sarcasm_logits=np.array([[big, big, big]]),    # rank 3
            offensive_logits=np.array([[-big, -big, -big]]),  # rank 0
            motivation_logit=np.array([[big]]))            # 1
        preds = predict(out)
        assert (preds["sentiment"][0], preds["humour"][0], preds["sarcasm"][0],
                preds["offensive"][0], preds["motivation"][0]) == (1, 2, 3, 0, 1)

    def test_matches_brute_force_threshold_count(self, small_records):
        model = build(seed=8)
        out = forward(model, small_records)
        preds = predict(out)
        # independent reimplementation: count sigmoid probabilities above 1/2
        for h in HEADS:
            logits = out.by_head(h)
            for i in range(logits.shape[0]):
                rank = 0
                for k in range(logits.shape[1]):
                    p = 1.0 / (1.0 + np.exp(-logits[i, k]))
                    if p > 0.5:
                        rank += 1
                assert rank == preds[h][i]

    def test_ranges(self, small_records):
        preds = predict(forward(build(), small_records))
        assert preds["sentiment"].max() <= 2
        assert preds["humour"].max() <= 3
        assert preds["motivation"].max() <= 1


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = build(seed=12)
        path = str(tmp_path / "model.mmt1")
        save_model(model, path, extra_meta={"modality_mask": ["text"]})
        loaded, meta = load_model(path)
        assert meta["modality_mask"] == ["text"]
        assert loaded.config == model.config
        assert list(loaded.params) == list(model.params)
        for n in model.params:
            assert np.array_equal(loaded.params[n].value, model.params[n].value)

    def test_save_is_byte_deterministic(self, tmp_path):
        model = build(seed=12)
        p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
        save_model(model, p1)
        save_model(model, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_truncated_checkpoint_rejected(self, tmp_path):
        model = build()
        path = str(tmp_path / "model.mmt1")
        save_model(model, path)
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[:-20])
        from mmmt.errors import FormatError
        with pytest.raises(FormatError):
            load_model(path)

    def test_loaded_model_forward_identical(self, tmp_path, tiny_batch):
        model = build(seed=12)
        path = str(tmp_path / "model.mmt1")
        save_model(model, path)
        loaded, _ = load_model(path)
        a = forward(model, tiny_batch)
        b = forward(loaded, tiny_batch)
        for h in HEADS:
            assert np.array_equal(a.by_head(h), b.by_head(h))


class TestBinaryIntensityHeads:
    """Intensity heads trained as K=2 presence heads feed Task B directly."""

    def cfg(self):
        return small_config(binary_intensity_heads=True)

    def test_head_widths(self, tiny_batch):
        model = init_model(self.cfg(), RngState(0))
        out = forward(model, tiny_batch)
        assert out.humour_logits.shape == (2, 1)
        assert out.sarcasm_logits.shape == (2, 1)
        assert out.offensive_logits.shape == (2, 1)
        assert out.sentiment_logits.shape == (2, 2)  # sentiment unchanged

    def test_parameter_count_reflects_width(self):
        full = parameter_count(small_config())
        binary = parameter_count(self.cfg())
        assert full - binary == 3 * 2  # two fewer thresholds per converted head
        model = init_model(self.cfg(), RngState(0))
        assert sum(p.value.size for p in model.parameters()) == binary

    def test_loss_uses_binarized_labels(self, tiny_batch):
        from mmmt.model import prepare_labels
        model = init_model(self.cfg(), RngState(0))
        labels = prepare_labels(model, gather_labels(tiny_batch))
        assert set(np.unique(labels["humour"])) <= {0, 1}
        out = forward(model, tiny_batch)
        total, per_head = multitask_loss(out, labels)
        assert np.isfinite(total)

    def test_raw_intensity_labels_rejected(self, tiny_batch):
        model = init_model(self.cfg(), RngState(0))
        out = forward(model, tiny_batch)
        labels = gather_labels(tiny_batch)
        if labels["humour"].max() < 2:
            labels["humour"][0] = 3
        with pytest.raises(LabelError):
            multitask_loss(out, labels)

    def test_report_marks_task_c_unavailable(self, small_records):
        from mmmt.evaluation import evaluate_model
        model = init_model(self.cfg(), RngState(0))
        report = evaluate_model(model, small_records, MODALITIES)
        assert report.per_head_multiclass["humour"] is None
        assert report.task_c is None
        assert report.task_b is not None

    def test_checkpoint_round_trip(self, tmp_path, tiny_batch):
        from mmmt.model import load_model, save_model
        model = init_model(self.cfg(), RngState(3))
        path = str(tmp_path / "binary.mmt1")
        save_model(model, path)
        loaded, _ = load_model(path)
        assert loaded.config.binary_intensity_heads
        assert loaded.heads["humour"].num_classes == 2

    def test_trainable_to_high_task_b(self):
        from mmmt.data_io import generate_synthetic
        from mmmt.evaluation import evaluate_model
        from mmmt.training import TrainConfig, train
        records = generate_synthetic(24, seed=4, separability=1.0,
                                     dims=SMALL_DIMS)
        cfg = TrainConfig(max_epochs=150, batch_size=2, seed=0,
                          early_stop_patience_epochs=None)
        model = init_model(self.cfg(), RngState(0))
        result = train(model, records, records, cfg)
        report = evaluate_model(result.model, records, cfg.modality_mask)
        assert report.task_b >= 0.95
