import json

import numpy as np
import pytest

from src.data.encoding import encode_rows
from src.errors import ModelError, ModelFileError, ShapeError, TrainingDivergedError
from src.models.mlp import (
    MlpModel,
    TrainConfig,
    build_model,
    contributions,
    contributions_batch,
    fit_arrays,
    forward,
    head_forward,
    init_model,
    input_attribution,
    input_gradient,
    input_jacobian,
    predict_batch,
    train_sgd,
)
from src.models.persistence import load_model, model_fingerprint, save_model
from src.tests.conftest import hand_model, make_casebase


def _numeric_jacobian(model, x, eps=1e-6):
    cols = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = eps
        cols.append((forward(model, x + step).logits - forward(model, x - step).logits) / (2 * eps))
    return np.stack(cols, axis=1)


def _near_kink(model, x, eps=1e-4):
    """True when some hidden pre-activation sits within eps of zero."""
    a = x
    for l in range(model.n_layers - 1):
        z = model.weights[l] @ a + model.biases[l]
        if np.any(np.abs(z) < eps):
            return True
        a = np.maximum(z, 0.0)
    return False


def test_single_layer_forward_is_affine():
    model = hand_model([[[1.0, 2.0], [3.0, 4.0]]], biases=[[0.5, -1.0]])
    fp = forward(model, np.array([1.0, 1.0]))
    assert np.allclose(fp.logits, [3.5, 6.0])


def test_equal_logits_give_uniform_probabilities():
    fp = forward(hand_model([np.zeros((2, 3))]), np.array([1.0, -2.0, 0.5]))
    assert np.allclose(fp.probs, [0.5, 0.5])


def test_dead_hidden_unit_blocks_the_gradient():
    model = hand_model([[[1.0]], [[2.0], [0.0]]], biases=[[-3.0], [0.0, 0.0]])
    x = np.array([1.0])
    assert np.array_equal(forward(model, x).penultimate, [0.0])
    assert np.allclose(input_gradient(model, x, 0), [0.0])


def test_linear_logit_gradient_is_its_weights():
    model = hand_model([[[2.0, 3.0], [0.0, 0.0]]])
    assert np.allclose(input_gradient(model, np.array([0.3, -0.7]), 0), [2.0, 3.0])


def test_contributions_weight_penultimate_by_class_row():
    """Penultimate [1, 2] with class weights [0.5, -0.25] contributes [0.5, -0.5]."""
    model = hand_model(
        [np.eye(2), [[0.5, -0.25], [0.0, 0.0]]], biases=[[0.0, 0.0], [1.0, 0.0]]
    )
    c = contributions(model, np.array([1.0, 2.0]))
    assert c.predicted_class == 0
    assert np.allclose(c.values, [0.5, -0.5])
    assert c.logit == pytest.approx(1.0)


def test_zero_penultimate_leaves_only_the_bias():
    model = hand_model([np.eye(2), [[1.0, 1.0], [0.0, 0.0]]], biases=[[0.0, 0.0], [0.0, 0.3]])
    c = contributions(model, np.array([-1.0, -1.0]))
    assert c.predicted_class == 1
    assert np.array_equal(c.values, [0.0, 0.0])
    assert c.logit == pytest.approx(c.bias)


def test_backprop_matches_central_differences():
    """Input Jacobian agrees with finite differences on 100 random nets and inputs."""
    rng = np.random.default_rng(0)
    checked = 0
    for trial in range(200):
        sizes = [int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(1, 6)), int(rng.integers(2, 4))]
        model = init_model(sizes, seed=trial)
        for l in range(model.n_layers):
            model.biases[l] = rng.normal(0, 0.5, size=model.biases[l].shape)
        x = rng.normal(size=sizes[0])
        if _near_kink(model, x):
            continue
        analytic = input_jacobian(model, x)
        numeric = _numeric_jacobian(model, x)
        scale = max(1.0, np.abs(numeric).max())
        assert np.abs(analytic - numeric).max() / scale <= 1e-4
        checked += 1
        if checked == 100:
            break
    assert checked == 100


def test_contributions_sum_to_logit(blob_model, blob_casebase):
    """Contributions plus the class bias reproduce the predicted logit."""
    X = encode_rows(blob_model.encoder, [c.features for c in blob_casebase.cases])
    for x in X:
        c = contributions(blob_model, x)
        assert c.values.sum() + c.bias == pytest.approx(c.logit, abs=1e-8)
        assert c.predicted_class == int(np.argmax(forward(blob_model, x).logits))


def test_contributions_batch_matches_single(blob_model, blob_casebase):
    X = encode_rows(blob_model.encoder, [c.features for c in blob_casebase.cases[:10]])
    classes, vectors = contributions_batch(blob_model, X)
    for x, c, v in zip(X, classes, vectors):
        single = contributions(blob_model, x)
        assert single.predicted_class == c
        assert np.allclose(single.values, v)


def test_head_forward_reproduces_logits(blob_model, blob_casebase):
    x = encode_rows(blob_model.encoder, [blob_casebase.cases[0].features])[0]
    fp = forward(blob_model, x)
    assert np.allclose(head_forward(blob_model, fp.penultimate), fp.logits)


def test_attribution_is_gradient_times_input():
    model = hand_model([[[2.0, -1.0], [0.0, 1.0]]])
    x = np.array([3.0, 4.0])
    assert np.allclose(input_attribution(model, x, 0), [6.0, -4.0])


def test_training_is_deterministic(blob_casebase):
    model = build_model(blob_casebase, [4], seed=1)
    config = TrainConfig(epochs=5, seed=2)
    a, losses_a = train_sgd(model, blob_casebase, config)
    b, losses_b = train_sgd(model, blob_casebase, config)
    assert losses_a == losses_b
    assert all(np.array_equal(wa, wb) for wa, wb in zip(a.weights, b.weights))


def test_training_does_not_mutate_the_input_model(blob_casebase):
    model = build_model(blob_casebase, [4], seed=1)
    before = [w.copy() for w in model.weights]
    train_sgd(model, blob_casebase, TrainConfig(epochs=2))
    assert all(np.array_equal(w, b) for w, b in zip(model.weights, before))


def test_zero_learning_rate_leaves_parameters(blob_casebase):
    model = build_model(blob_casebase, [4], seed=1)
    trained, _ = train_sgd(model, blob_casebase, TrainConfig(epochs=3, learning_rate=0.0))
    assert all(np.array_equal(w, b) for w, b in zip(trained.weights, model.weights))


def test_trained_blob_model_separates_classes(blob_model, blob_casebase):
    X = encode_rows(blob_model.encoder, [c.features for c in blob_casebase.cases])
    assert np.mean(predict_batch(blob_model, X) == blob_casebase.labels) >= 0.95


def test_divergence_reports_epoch():
    model = init_model([1, 1], seed=0, head="linear")
    X = np.array([[1e3], [2e3]])
    y = np.array([1e3, -1e3])
    with pytest.raises(TrainingDivergedError) as info:
        fit_arrays(model, X, y, TrainConfig(epochs=50, learning_rate=10.0, batch_size=2))
    assert "training diverged at epoch" in str(info.value)
    assert info.value.epoch >= 1


def test_regression_head_fits_a_line():
    X = np.array([[i / 9.0] for i in range(10)])
    y = 2.0 * X[:, 0] + 1.0
    model = init_model([1, 1], seed=0, head="linear")
    trained, losses = fit_arrays(model, X, y, TrainConfig(epochs=300, learning_rate=0.2, batch_size=10))
    assert losses[-1] < 1e-3
    assert trained.layer_sizes == [1, 1]


def test_shape_error_names_the_layer():
    with pytest.raises(ShapeError, match="layer 1"):
        MlpModel(
            layer_sizes=[2, 3, 2],
            weights=[np.zeros((3, 2)), np.zeros((2, 4))],
            biases=[np.zeros(3), np.zeros(2)],
        )


def test_non_finite_parameters_are_rejected():
    with pytest.raises(ModelError):
        hand_model([[[np.nan, 1.0]]])


def test_invalid_train_config_is_rejected():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


# --- persistence ---

def test_model_file_round_trip(tmp_path, blob_model, blob_casebase):
    """A reloaded model predicts exactly as the saved one."""
    path = save_model(blob_model, tmp_path / "m.json")
    loaded = load_model(path)
    X = encode_rows(blob_model.encoder, [c.features for c in blob_casebase.cases])
    assert np.array_equal(predict_batch(loaded, X), predict_batch(blob_model, X))
    assert np.array_equal(forward(loaded, X[0]).logits, forward(blob_model, X[0]).logits)
    assert loaded.class_labels == blob_model.class_labels
    assert model_fingerprint(loaded) == model_fingerprint(blob_model)


def test_model_file_records_encoding(tmp_path):
    cb = make_casebase([["red", 0.0], ["blue", 1.0]], [0, 1], categorical=(0,))
    path = save_model(build_model(cb, [2], seed=0), tmp_path / "m.json")
    raw = json.loads(path.read_text())
    assert raw["encoding"] == {"f0": ["red", "blue"]}
    assert raw["hidden_activation"] == "relu"
    assert load_model(path).encoder.category_map == raw["encoding"]


def test_encoding_must_agree_with_encoder(tmp_path):
    cb = make_casebase([["red", 0.0], ["blue", 1.0]], [0, 1], categorical=(0,))
    path = save_model(build_model(cb, [2], seed=0), tmp_path / "m.json")
    raw = json.loads(path.read_text())
    raw["encoding"] = {"f0": ["blue", "red"]}
    path.write_text(json.dumps(raw))
    with pytest.raises(ModelFileError, match="disagrees"):
        load_model(path)
    raw["encoder"] = None
    path.write_text(json.dumps(raw))
    with pytest.raises(ModelFileError, match="no input encoder"):
        load_model(path)


def test_malformed_model_file(tmp_path):
    path = tmp_path / "m.json"
    path.write_text("{not json")
    with pytest.raises(ModelFileError):
        load_model(path)


def test_model_file_missing_fields(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"layer_sizes": [2, 2]}))
    with pytest.raises(ModelFileError):
        load_model(path)


def test_model_file_wrong_weight_shape(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(
        json.dumps(
            {
                "layer_sizes": [2, 2],
                "weights": [[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]],
                "biases": [[0.0, 0.0]],
                "head": "softmax",
            }
        )
    )
    with pytest.raises(ShapeError, match="layer 0"):
        load_model(path)


def test_expected_layer_sizes_mismatch(tmp_path, blob_model):
    path = save_model(blob_model, tmp_path / "m.json")
    with pytest.raises(ShapeError):
        load_model(path, expected_layer_sizes=[9, 9])
