import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codeswitch_st.classifier import (ClassifierSpec, Model, Prediction, ProtocolError, TrainingError,
                                      TransportError, external_adapter, feature_bucket, featurize, full_loss,
                                      loss_and_gradient, predict, train, train_epochs)

from conftest import NEG, POS, separable_pairs

MOCK = Path(__file__).parent / "data" / "mock_child.py"


def crc32_bitwise(data: bytes) -> int:
    """Reflected CRC-32 (poly 0xEDB88320), one bit at a time."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = (crc >> 1) ^ (0xEDB88320 if crc & 1 else 0)
    return crc ^ 0xFFFFFFFF


@pytest.mark.parametrize("key", ["c2:ab", "w1:hello", "w2:mera bharat", "c3:नमस"])
def test_hash_matches_bitwise_crc(key):
    assert feature_bucket(key, 2 ** 20) == crc32_bitwise(key.encode("utf-8")) % 2 ** 20


def test_single_char_bigram():
    assert feature_bucket("c2:ab", 16) == crc32_bitwise(b"c2:ab") % 16
    spec = ClassifierSpec(feature_dims=1024, word_ngrams=(), char_ngrams=(2,))
    raw = featurize("ab", spec, normalize=False)
    assert raw.indices.tolist() == [crc32_bitwise(b"c2:ab") % 1024]
    assert raw.values.tolist() == [1.0]


def test_featurize_empty_and_norm():
    spec = ClassifierSpec(word_ngrams=(1, 2), char_ngrams=(3,))
    assert featurize("", spec).indices.size == 0
    v = featurize("mera bharat mahan mera", spec)
    assert np.linalg.norm(v.values) == pytest.approx(1.0)
    assert featurize("mera bharat mahan mera", spec) == v


def test_spec_rejects_small_dims():
    with pytest.raises(ValueError):
        ClassifierSpec(feature_dims=16)


def test_separable_fits(separable):
    model = train(separable, ClassifierSpec())
    preds = model.predict_many([t for t, _ in separable])
    acc = np.mean([p.label is l for p, (_, l) in zip(preds, separable)])
    assert acc >= 0.99
    p = predict(model, separable[0][0])
    assert p.label is POS and p.confidence > 0.5


def test_training_deterministic(separable):
    a = train(separable, ClassifierSpec(seed=5))
    b = train(separable, ClassifierSpec(seed=5))
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.digest == b.digest


def test_single_class_rejected():
    with pytest.raises(TrainingError, match="single class"):
        train([("a b", POS), ("c d", POS)], ClassifierSpec())


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blow_up_detected(separable):
    with pytest.raises(TrainingError, match="non-finite"):
        train(separable, ClassifierSpec(optimizer="sgd", learning_rate=1e308))


def test_zero_model_ties_positive():
    p = predict(Model.zeros(ClassifierSpec()), "anything at all")
    assert p.probs == (0.5, 0.5)
    assert p.label is POS


def test_prediction_invariants():
    with pytest.raises(ValueError):
        Prediction(float("nan"))
    p = Prediction(0.2)
    assert p.label is NEG and p.confidence == 0.8
    assert sum(p.probs) == pytest.approx(1.0, abs=1e-9)


def test_monotone_in_feature_direction():
    spec = ClassifierSpec()
    text = "acha movie"
    base = Model.zeros(spec)
    v = featurize(text, spec)
    w = base.weights.copy()
    w[v.indices] += 0.5 * v.values
    assert Model(spec, w).predict(text).prob_positive > base.predict(text).prob_positive


def test_zero_model_loss_is_ln2():
    batch = [("a b", POS), ("c d", NEG), ("e", POS), ("f g h", NEG)]
    loss, _ = loss_and_gradient(Model.zeros(ClassifierSpec()), batch)
    assert abs(loss - math.log(2)) < 1e-9


def test_l2_adds_half_norm():
    rng = np.random.default_rng(0)
    spec = ClassifierSpec(feature_dims=1024)
    w = rng.normal(size=1025)
    batch = separable_pairs(5)
    l_a = loss_and_gradient(Model(replace(spec, l2=0.1), w), batch)[0]
    l_b = loss_and_gradient(Model(replace(spec, l2=0.2), w), batch)[0]
    assert l_b - l_a == pytest.approx(0.1 * np.dot(w[:-1], w[:-1]) / 2, rel=1e-12)


def finite_difference_gap(seed, n_coords=20, h=1e-5):
    rng = np.random.default_rng(seed)
    spec = ClassifierSpec(feature_dims=1024, word_ngrams=(1, 2), char_ngrams=(3,), l2=float(rng.uniform(0, 0.1)))
    pool = separable_pairs(10)
    idx = rng.choice(len(pool), size=int(rng.integers(1, 12)), replace=False)
    batch = [pool[i] for i in idx]
    w = rng.normal(scale=0.5, size=spec.feature_dims + 1)
    _, grad = loss_and_gradient(Model(spec, w), batch)
    active = np.unique(np.concatenate([featurize(t, spec).indices for t, _ in batch]))
    coords = np.concatenate([rng.choice(active, size=min(n_coords - 1, active.size), replace=False), [spec.feature_dims]])
    gap = 0.0
    for c in coords:
        wp, wm = w.copy(), w.copy()
        wp[c] += h
        wm[c] -= h
        num = (loss_and_gradient(Model(spec, wp), batch)[0] - loss_and_gradient(Model(spec, wm), batch)[0]) / (2 * h)
        gap = max(gap, abs(num - grad[c]))
    return gap


@pytest.mark.parametrize("seed", range(5))
def test_gradient_finite_differences(seed):
    assert finite_difference_gap(seed) < 1e-5


def test_loss_non_increasing_across_epochs(separable):
    spec = ClassifierSpec(epochs=8)
    losses = [full_loss(m, separable) for m in train_epochs(separable, spec)]
    assert len(losses) == 8
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_save_load_round_trip(tmp_path, separable):
    model = train(separable, ClassifierSpec(word_ngrams=(1, 2)), provenance="iteration:1")
    model.save(tmp_path / "m.npz")
    back = Model.load(tmp_path / "m.npz")
    assert back.digest == model.digest and back.provenance == "iteration:1"


@settings(max_examples=50, deadline=None)
@given(st.text(max_size=40), st.integers(0, 2 ** 16))
def test_probs_sum_to_one(text, seed):
    spec = ClassifierSpec(feature_dims=1024, char_ngrams=(2,))
    w = np.random.default_rng(seed).normal(scale=5, size=1025)
    p = Model(spec, w).predict(text)
    assert abs(sum(p.probs) - 1) < 1e-9


def child(mode, *args):
    return f"{sys.executable} {MOCK} {mode} " + " ".join(map(str, args))


def test_external_fixed_probs():
    model = external_adapter(child("fixed")).fit([("x", POS), ("y", NEG)], seed=0, provenance="pretrained")
    try:
        p = model.predict("whatever")
        assert p.label is POS and p.prob_positive == pytest.approx(0.9)
    finally:
        model.close()


@pytest.mark.parametrize("mode", ["bad_sum", "nan", "garbage"])
def test_external_protocol_violations(mode):
    model = external_adapter(child(mode)).fit([("x", POS)], seed=0, provenance="pretrained")
    try:
        with pytest.raises(ProtocolError):
            model.predict("x")
    finally:
        model.close()


def test_external_child_dies():
    model = external_adapter(child("die", 2)).fit([("x", POS)], seed=0, provenance="pretrained")
    try:
        model.predict("a")
        model.predict("b")
        with pytest.raises(TransportError):
            model.predict("c")
    finally:
        model.close()


def test_external_spawn_failure():
    with pytest.raises(TransportError, match="cannot spawn"):
        external_adapter("/nonexistent/binary").fit([("x", POS)], seed=0, provenance="pretrained")
