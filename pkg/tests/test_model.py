import math

import numpy as np
import pytest

from psg import corpus, text
from psg.errors import DataError, TrainingDivergedError
from psg.model import (
    Batch,
    BaselineConfig,
    ModelDims,
    TrainConfig,
    backward,
    baseline_ovr_train,
    batch_objective,
    bce_loss,
    ce_loss,
    forward,
    grad_check,
    init_params,
    joint_loss,
    load_checkpoint,
    param_count,
    predict,
    save_checkpoint,
    train,
)
from psg.synthetic import SyntheticSpec, generate_synthetic_dataset
from psg.text import DocumentVector, TokenizerConfig, stack_vectors


def dense_forward_oracle(params, x_dense):
    """Naive dense-matrix reference implementation."""
    z = np.maximum(x_dense @ params.w_enc + params.b_enc, 0.0)
    a_tag = z @ params.w_tag + params.b_tag if params.w_tag is not None else None
    a_diff = z @ params.w_diff + params.b_diff if params.w_diff is not None else None
    return z, a_tag, a_diff


def make_vector(dense):
    dense = np.asarray(dense, dtype=np.float64)
    idx = np.nonzero(dense)[0]
    return DocumentVector(indices=idx, values=dense[idx], dimension=len(dense))


class TestForward:
    def test_zero_params(self):
        dims = ModelDims(6, 4, 3, 5)
        params = init_params(dims, 0)
        for _, t in params.tensors():
            t[:] = 0.0
        x = make_vector([1.0, 0, 0.5, 0, 0, 2.0])
        z, a_tag, a_diff = forward(params, x)
        assert (z == 0).all() and (a_tag == 0).all() and (a_diff == 0).all()
        from scipy.special import expit
        assert expit(a_tag) == pytest.approx([0.5, 0.5, 0.5])

    def test_zero_input_gives_relu_bias(self):
        params = init_params(ModelDims(6, 4, 3, 5), 1)
        params.b_enc[:] = np.array([1.0, -1.0, 0.5, -0.5])
        z, _, _ = forward(params, make_vector(np.zeros(6)))
        np.testing.assert_allclose(z, [1.0, 0.0, 0.5, 0.0])

    def test_matches_dense_oracle(self):
        dims = ModelDims(10, 4, 3, 5)
        params = init_params(dims, 7)
        rng = np.random.default_rng(7)
        for _ in range(10):
            dense = np.where(rng.random(10) < 0.5, rng.normal(size=10), 0.0)
            z, a_tag, a_diff = forward(params, make_vector(dense))
            ez, et, ed = dense_forward_oracle(params, dense)
            np.testing.assert_allclose(z, ez, atol=1e-12)
            np.testing.assert_allclose(a_tag, et, atol=1e-12)
            np.testing.assert_allclose(a_diff, ed, atol=1e-12)

    def test_dimension_mismatch(self):
        params = init_params(ModelDims(10, 4, 3, 5), 7)
        with pytest.raises(ValueError):
            forward(params, make_vector(np.ones(11)))


class TestLosses:
    def test_bce_perfect_prediction(self):
        a = np.array([30.0, -30.0, 30.0])
        y = np.array([1.0, 0.0, 1.0])
        assert bce_loss(a, y) < 1e-12

    def test_bce_single_logit_ln2(self):
        assert bce_loss(np.array([0.0]), np.array([1.0])) == pytest.approx(
            math.log(2), abs=1e-15
        )

    def test_bce_two_labels_ln2(self):
        assert bce_loss(np.array([0.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(
            math.log(2), abs=1e-15
        )

    def test_bce_rejects_non_binary(self):
        with pytest.raises(DataError):
            bce_loss(np.zeros(2), np.array([0.5, 1.0]))

    def test_bce_nonnegative_and_matches_naive(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            a = rng.normal(scale=3, size=(4, 6))
            y = rng.integers(0, 2, size=(4, 6)).astype(float)
            stable = bce_loss(a, y)
            p = 1 / (1 + np.exp(-a))
            naive = -np.mean(np.mean(y * np.log(p) + (1 - y) * np.log(1 - p), axis=1))
            assert stable >= 0
            assert stable == pytest.approx(naive, rel=1e-9)

    def test_ce_uniform_is_ln_d(self):
        assert ce_loss(np.zeros(28), 3) == pytest.approx(math.log(28), abs=1e-15)

    def test_ce_confident_correct(self):
        # floor is (D-1) * exp(-30); small D keeps it under 1e-12
        a = np.zeros(6)
        a[5] = 30.0
        assert ce_loss(a, 5) < 1e-12

    def test_ce_mask_rule(self):
        a = np.zeros((2, 4))
        a[1, 2] = 2.0
        masked = ce_loss(a, np.array([-1, 2]))
        single = ce_loss(a[1:], np.array([2]))
        assert masked == pytest.approx(single, abs=1e-15)

    def test_ce_nonnegative(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            a = rng.normal(scale=4, size=(3, 7))
            d = rng.integers(0, 7, size=3)
            assert ce_loss(a, d) >= 0.0

    def test_ce_all_missing_is_zero(self):
        assert ce_loss(np.random.default_rng(0).normal(size=(3, 5)), np.array([-1, -1, -1])) == 0.0

    def test_ce_index_out_of_range(self):
        with pytest.raises(DataError):
            ce_loss(np.zeros(5), 5)

    def test_joint(self):
        assert joint_loss(0.5, 0.25, 1.0) == 0.75
        assert joint_loss(0.7, 123.0, 0.0) == 0.7
        l1 = 0.123456
        assert joint_loss(l1, 99.0, 0.0) is l1 or joint_loss(l1, 99.0, 0.0) == l1

    def test_joint_monotone_in_lambda(self):
        values = [joint_loss(0.4, 0.2, lam) for lam in (0.0, 1.0, 5.0, 50.0)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_joint_rejects_negative_lambda(self):
        with pytest.raises(ValueError):
            joint_loss(0.1, 0.1, -1.0)


def small_batch(dims, seed=3, missing=False):
    rng = np.random.default_rng(seed)
    n = 4
    dense = np.where(rng.random((n, dims.num_features)) < 0.6,
                     rng.normal(size=(n, dims.num_features)), 0.0)
    vecs = [make_vector(row) for row in dense]
    y = rng.integers(0, 2, size=(n, dims.num_tags)).astype(float) if dims.num_tags else None
    d = rng.integers(0, dims.num_levels, size=n) if dims.num_levels else None
    if d is not None and missing:
        d[0] = -1
    return Batch(x=stack_vectors(vecs), y=y, d=d)


class TestBackward:
    def test_lambda_zero_diff_grads_exactly_zero(self):
        dims = ModelDims(8, 4, 3, 5)
        params = init_params(dims, 1)
        grads = backward(params, small_batch(dims), lam=0.0)
        assert (grads["w_diff"] == 0).all()
        assert (grads["b_diff"] == 0).all()

    def test_zero_input_batch_zero_encoder_weight_grad(self):
        dims = ModelDims(8, 4, 3, 5)
        params = init_params(dims, 1)
        vecs = [make_vector(np.zeros(8)) for _ in range(3)]
        batch = Batch(x=stack_vectors(vecs), y=np.ones((3, 3)), d=np.array([0, 1, 2]))
        grads = backward(params, batch, lam=1.0)
        assert (grads["w_enc"] == 0).all()

    # Finite differences at eps=1e-5 carry a roundoff floor of roughly
    # 1e-16 * |objective| / eps in each gradient estimate, so the fixed
    # instances below were verified once to keep every analytic gradient
    # coordinate comfortably above that floor.
    def test_gradcheck_20_seeds(self):
        for seed in range(20):
            err = grad_check(ModelDims(10, 5, 3, 4), seed=seed, lam=10.0)
            assert err <= 1e-6, f"seed {seed}: {err}"

    def test_gradcheck_zero_params(self):
        assert grad_check(ModelDims(10, 5, 3, 4), seed=5, zero_params=True) <= 1e-6

    def test_gradcheck_large_lambda(self):
        assert grad_check(ModelDims(10, 5, 3, 4), seed=5, lam=100.0) <= 1e-6

    def test_gradcheck_single_task_dims(self):
        assert grad_check(ModelDims(10, 5, 3, 0), seed=2, lam=0.0) <= 1e-6
        assert grad_check(ModelDims(10, 5, 0, 4), seed=2, lam=0.0) <= 1e-6


class TestParamCount:
    def test_default_dims(self):
        multi = param_count(ModelDims(32768, 256, 20, 28))
        tag_only = param_count(ModelDims(32768, 256, 20, 0))
        diff_only = param_count(ModelDims(32768, 256, 0, 28))
        assert multi == 8_401_200
        assert tag_only + diff_only == 16_790_064
        assert (tag_only + diff_only) / multi == pytest.approx(1.998, abs=1e-3)

    def test_encoder_only(self):
        assert param_count(ModelDims(100, 8, 0, 0)) == 100 * 8 + 8

    def test_ratio_band_across_hidden_sizes(self):
        for hidden in (64, 128, 256, 512, 1024):
            multi = param_count(ModelDims(32768, hidden, 20, 28))
            two = param_count(ModelDims(32768, hidden, 20, 0)) + param_count(
                ModelDims(32768, hidden, 0, 28)
            )
            assert 1.9 <= two / multi <= 2.1


@pytest.fixture(scope="module")
def tiny_setup():
    ds = generate_synthetic_dataset(21, SyntheticSpec(n_samples=60))
    tok = TokenizerConfig()
    vec = text.fit([text.tokenize(r.statement, tok) for r in ds.records], dimension=256)
    return ds, vec, tok


class TestTrain:
    def test_same_seed_bit_identical(self, tiny_setup):
        ds, vec, tok = tiny_setup
        cfg = TrainConfig(lam=10.0, epochs=3, seed=9, hidden=8)
        a = train(ds, vec, cfg, tok)
        b = train(ds, vec, cfg, tok)
        for (name, ta), (_, tb) in zip(a.params.tensors(), b.params.tensors()):
            assert np.array_equal(ta, tb), name

    def test_lambda_zero_equals_single_task_tag(self, tiny_setup):
        ds, vec, tok = tiny_setup
        multi = train(ds, vec, TrainConfig(lam=0.0, epochs=5, seed=4, hidden=8), tok)
        single = train(
            ds, vec,
            TrainConfig(lam=None, epochs=5, seed=4, hidden=8, single_task="tag"),
            tok,
        )
        assert np.max(np.abs(multi.params.w_enc - single.params.w_enc)) <= 1e-12
        assert np.max(np.abs(multi.params.w_tag - single.params.w_tag)) <= 1e-12
        assert np.max(np.abs(multi.params.b_tag - single.params.b_tag)) <= 1e-12

    def test_lambda_zero_diff_head_frozen(self, tiny_setup):
        ds, vec, tok = tiny_setup
        cfg = TrainConfig(lam=0.0, epochs=3, seed=4, hidden=8)
        ckpt = train(ds, vec, cfg, tok)
        fresh = init_params(ckpt.params.dims, cfg.seed)
        assert np.array_equal(ckpt.params.w_diff, fresh.w_diff)
        assert np.array_equal(ckpt.params.b_diff, fresh.b_diff)

    def test_loss_decreases_on_synthetic(self, tiny_setup):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=10.0, epochs=5, seed=0, hidden=16), tok)
        joints = [e["joint"] for e in ckpt.training_log]
        assert all(a > b for a, b in zip(joints, joints[1:]))

    def test_single_task_difficulty_has_no_tag_head(self, tiny_setup):
        ds, vec, tok = tiny_setup
        ckpt = train(
            ds, vec,
            TrainConfig(lam=None, epochs=2, seed=1, hidden=8, single_task="difficulty"),
            tok,
        )
        assert ckpt.params.w_tag is None
        assert ckpt.params.w_diff is not None
        assert ckpt.vocab is None
        log_entry = ckpt.training_log[0]
        assert log_entry["l1"] is None and log_entry["l2"] is not None

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_aborts_with_location(self, tiny_setup):
        ds, vec, tok = tiny_setup
        cfg = TrainConfig(lam=10.0, epochs=2, seed=0, hidden=8,
                          learning_rate=float("inf"))
        with pytest.raises(TrainingDivergedError, match="epoch 1, batch"):
            train(ds, vec, cfg, tok)

    def test_early_stop_patience(self, tiny_setup):
        ds, vec, tok = tiny_setup
        cfg = TrainConfig(lam=10.0, epochs=50, seed=0, hidden=8,
                          learning_rate=20.0, patience=3)  # oscillates near the optimum
        ckpt = train(ds, vec, cfg, tok)
        assert len(ckpt.training_log) < 50


class TestPredictAndCheckpoint:
    def test_zero_params_tie_break(self, tiny_setup):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=1.0, epochs=1, seed=0, hidden=8), tok)
        for _, t in ckpt.params.tensors():
            t[:] = 0.0
        pred = predict(ckpt, "some words here", threshold=0.5)
        assert [t["name"] for t in pred.tags] == list(ckpt.vocab.labels)
        assert all(t["prob"] == 0.5 for t in pred.tags)
        assert pred.difficulty_rating == 800  # argmax tie -> lowest index

    def test_threshold_above_one_empty(self, tiny_setup):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=1.0, epochs=1, seed=0, hidden=8), tok)
        pred = predict(ckpt, ds.records[0].statement, threshold=1.0 + 1e-9)
        assert pred.tags == []

    def test_roundtrip_bit_identical_predictions(self, tiny_setup, tmp_path):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=10.0, epochs=2, seed=3, hidden=8), tok)
        statement = ds.records[5].statement
        before = predict(ckpt, statement)
        save_checkpoint(ckpt, tmp_path / "ck")
        loaded = load_checkpoint(tmp_path / "ck")
        after = predict(loaded, statement)
        assert before.tag_probabilities == after.tag_probabilities
        assert before.difficulty_probabilities == after.difficulty_probabilities
        assert before.difficulty_rating == after.difficulty_rating
        for (name, a), (_, b) in zip(ckpt.params.tensors(), loaded.params.tensors()):
            assert np.array_equal(a, b), name

    def test_checkpoint_bin_is_little_endian_f64(self, tiny_setup, tmp_path):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=1.0, epochs=1, seed=0, hidden=8), tok)
        save_checkpoint(ckpt, tmp_path / "ck")
        raw = (tmp_path / "ck" / "params.bin").read_bytes()
        total = sum(t.size for _, t in ckpt.params.tensors())
        assert len(raw) == total * 8
        first = np.frombuffer(raw, dtype="<f8", count=ckpt.params.w_enc.size)
        assert np.array_equal(first, ckpt.params.w_enc.ravel())

    def test_difficulty_argmax_shift_invariant(self, tiny_setup):
        ds, vec, tok = tiny_setup
        ckpt = train(ds, vec, TrainConfig(lam=10.0, epochs=1, seed=2, hidden=8), tok)
        base = predict(ckpt, ds.records[3].statement).difficulty_rating
        ckpt.params.b_diff += 37.5  # constant shift of every difficulty logit
        assert predict(ckpt, ds.records[3].statement).difficulty_rating == base

    def test_frozen_prediction_golden(self):
        # deterministically constructed checkpoint; values frozen from the
        # first verified run of this configuration
        ds = generate_synthetic_dataset(21, SyntheticSpec(n_samples=60))
        tok = TokenizerConfig()
        vec = text.fit([text.tokenize(r.statement, tok) for r in ds.records], dimension=256)
        ckpt = train(ds, vec, TrainConfig(lam=10.0, epochs=3, seed=7, hidden=8), tok)
        pred = predict(ckpt, ds.records[0].statement)
        golden = {
            "Tag1": 0.483468, "Tag2": 0.492734, "Tag3": 0.51162,
            "Tag4": 0.495252, "Tag5": 0.515627,
        }
        assert pred.tag_probabilities == pytest.approx(golden, abs=5e-7)
        assert pred.difficulty_rating == 1200


class TestBaseline:
    def test_separable_toy_reaches_full_accuracy(self):
        records = []
        for i in range(40):
            label = i % 2
            word = "alpha" if label == 0 else "beta"
            records.append(corpus.ProblemRecord(
                id=f"{i+1}A", title="t",
                statement=" ".join([word] * 5 + ["filler"]),
                tags=frozenset({"Math"} if label == 0 else {"Greedy"}),
                rating=800 if label == 0 else 900,
            ))
        vocab = corpus.TagVocabulary(("Math", "Greedy"))
        ds = corpus.build_dataset(records, vocab)
        tok = TokenizerConfig()
        vec = text.fit([text.tokenize(r.statement, tok) for r in ds.records],
                       dimension=64)
        ckpt = baseline_ovr_train(ds, vec, BaselineConfig(epochs=60, seed=0), tok)
        from psg.cli import evaluate_checkpoint
        ev = evaluate_checkpoint(ckpt, ds)
        assert ev.tag.macro_f1 == 1.0
        assert ev.difficulty.accuracy == 1.0

    def test_rejects_lambda_config(self, tiny_setup):
        ds, vec, tok = tiny_setup
        with pytest.raises(ValueError, match="lambda"):
            baseline_ovr_train(ds, vec, TrainConfig(lam=1.0), tok)

    def test_same_seed_determinism(self, tiny_setup):
        ds, vec, tok = tiny_setup
        cfg = BaselineConfig(epochs=2, seed=5)
        a = baseline_ovr_train(ds, vec, cfg, tok)
        b = baseline_ovr_train(ds, vec, cfg, tok)
        for (name, ta), (_, tb) in zip(a.params.tensors(), b.params.tensors()):
            assert np.array_equal(ta, tb), name

    def test_baseline_checkpoint_roundtrip(self, tiny_setup, tmp_path):
        ds, vec, tok = tiny_setup
        ckpt = baseline_ovr_train(ds, vec, BaselineConfig(epochs=1, seed=5), tok)
        save_checkpoint(ckpt, tmp_path / "bl")
        loaded = load_checkpoint(tmp_path / "bl")
        assert loaded.arch == "baseline"
        s = ds.records[0].statement
        assert predict(loaded, s).tag_probabilities == predict(ckpt, s).tag_probabilities
