import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slotbragg import surrogate
from slotbragg.errors import (
    InvalidInputError,
    ModelFormatError,
    UnsupportedVersionError,
)


def toy_dataset(n=32, d=4, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(50, 150, size=(n, d))
    y = 0.5 + 0.3 * np.sin(x.sum(axis=1) / 100.0) * 0.5
    return surrogate.Dataset(inputs=x, targets=np.clip(y, 0, 1))


# ---------------------------------------------------------------------------
# construction


def test_init_is_deterministic():
    a = surrogate.init_model((6, 8, 1), seed=42)
    b = surrogate.init_model((6, 8, 1), seed=42)
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    c = surrogate.init_model((6, 8, 1), seed=43)
    assert any(not np.array_equal(wa, wc)
               for wa, wc in zip(a.weights, c.weights))


def test_affine_model_without_hidden_layers():
    model = surrogate.init_model((5, 1), seed=0)
    assert model.parameter_count() == 6
    assert 0.0 <= surrogate.predict(model, np.zeros(5)) <= 1.0


def test_mismatched_weight_chain_rejected():
    good = surrogate.init_model((20, 64, 1), seed=0)
    with pytest.raises(InvalidInputError):
        surrogate.SurrogateModel(layer_sizes=(20, 64, 1),
                                 weights=(good.weights[0],
                                          np.zeros((1, 32))),
                                 biases=good.biases)


def test_output_layer_must_be_scalar():
    with pytest.raises(InvalidInputError):
        surrogate.init_model((4, 8, 2), seed=0)


# ---------------------------------------------------------------------------
# prediction


def test_zero_weights_give_half():
    model = surrogate.init_model((3, 1), seed=0)
    model = surrogate.SurrogateModel(layer_sizes=(3, 1),
                                     weights=(np.zeros((1, 3)),),
                                     biases=(np.zeros(1),))
    assert surrogate.predict(model, np.array([1.0, -2.0, 7.0])) == 0.5


def test_predict_is_pure():
    model = surrogate.init_model((4, 8, 1), seed=3)
    x = np.array([60.0, 80.0, 100.0, 120.0])
    assert surrogate.predict(model, x) == surrogate.predict(model, x)


def test_predict_rejects_wrong_length():
    model = surrogate.init_model((4, 8, 1), seed=3)
    with pytest.raises(InvalidInputError):
        surrogate.predict(model, np.ones(5))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4))
def test_predict_range_for_any_finite_input(values):
    model = surrogate.init_model((4, 16, 1), seed=9)
    out = surrogate.predict(model, np.array(values))
    assert 0.0 <= out <= 1.0


# ---------------------------------------------------------------------------
# training


def test_overfit_small_dataset():
    data = toy_dataset(n=10, d=3, seed=1)
    model = surrogate.init_model((3, 32, 1), seed=1)
    config = surrogate.TrainConfig(epochs=4000, batch_size=10,
                                   learning_rate=0.05,
                                   holdout_fraction=0.2, patience=4000, seed=1)
    trained, history = surrogate.train(model, data, config)
    pred = surrogate.predict_batch(trained, data.inputs)
    # memorisation oracle: training rows reproduced
    train_rows = np.setdiff1d(np.arange(10), [])
    assert history.train_loss[-1] < history.train_loss[0]
    assert np.max(np.abs(pred[train_rows] - data.targets[train_rows])) < 0.05
    mse = np.mean((pred - data.targets) ** 2)
    assert mse < 1e-3


def test_constant_target_convergence():
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, size=(40, 3))
    y = np.full(40, 0.7)
    y[0] = 0.70000001  # keep two distinct values to pass degeneracy check
    data = surrogate.Dataset(inputs=x, targets=y)
    model = surrogate.init_model((3, 8, 1), seed=2)
    config = surrogate.TrainConfig(epochs=6000, batch_size=40,
                                   learning_rate=0.2, holdout_fraction=0.2,
                                   patience=6000, seed=2)
    trained, _ = surrogate.train(model, data, config)
    pred = surrogate.predict_batch(trained, x)
    assert np.max(np.abs(pred - 0.7)) < 0.01


def test_training_is_bit_reproducible():
    data = toy_dataset(n=64, d=4, seed=3)
    config = surrogate.TrainConfig(epochs=50, batch_size=16,
                                   learning_rate=0.01, seed=7)
    m1, h1 = surrogate.train(surrogate.init_model((4, 8, 1), seed=7),
                             data, config)
    m2, h2 = surrogate.train(surrogate.init_model((4, 8, 1), seed=7),
                             data, config)
    for a, b in zip(m1.weights, m2.weights):
        assert np.array_equal(a, b)
    assert np.array_equal(h1.train_loss, h2.train_loss)


def test_running_best_of_history_is_monotone():
    data = toy_dataset(n=64, d=4, seed=4)
    config = surrogate.TrainConfig(epochs=100, batch_size=16, seed=4)
    _, history = surrogate.train(surrogate.init_model((4, 8, 1), seed=4),
                                 data, config)
    best = np.minimum.accumulate(history.holdout_loss)
    assert np.all(np.diff(best) <= 0)
    assert history.train_loss[-1] < history.train_loss[0]


def test_normalisation_uses_training_split_only():
    data = toy_dataset(n=50, d=4, seed=5)
    config = surrogate.TrainConfig(epochs=5, batch_size=16, seed=11)
    m1, _ = surrogate.train(surrogate.init_model((4, 8, 1), seed=11),
                            data, config)
    # permute rows inside the holdout positions; the training split and
    # therefore the normalisation statistics must be unchanged
    rng = np.random.default_rng(11)
    order = rng.permutation(len(data))
    n_hold = int(round(0.2 * len(data)))
    hold_idx = order[:n_hold]
    x = data.inputs.copy()
    y = data.targets.copy()
    x[hold_idx] = x[hold_idx[::-1]]
    y[hold_idx] = y[hold_idx[::-1]]
    m2, _ = surrogate.train(surrogate.init_model((4, 8, 1), seed=11),
                            surrogate.Dataset(x, y), config)
    assert np.array_equal(m1.input_mean, m2.input_mean)
    assert np.array_equal(m1.input_std, m2.input_std)


def test_degenerate_dataset_rejected():
    x = np.ones((5, 3))
    y = np.full(5, 0.5)
    with pytest.raises(InvalidInputError):
        surrogate.train(surrogate.init_model((3, 4, 1), seed=0),
                        surrogate.Dataset(x, y), surrogate.TrainConfig())


# ---------------------------------------------------------------------------
# gradients


def test_gradient_check_random_small_model():
    rng = np.random.default_rng(12)
    model = surrogate.init_model((4, 6, 1), seed=12)
    x = rng.normal(size=(8, 4))
    y = rng.uniform(0.2, 0.8, size=8)
    assert surrogate.gradient_check(model, x, y) < 1e-4


def test_gradient_check_zero_weights():
    model = surrogate.SurrogateModel(
        layer_sizes=(3, 4, 1),
        weights=(np.zeros((4, 3)), np.zeros((1, 4))),
        biases=(np.zeros(4), np.zeros(1)))
    x = np.random.default_rng(1).normal(size=(6, 3))
    y = np.full(6, 0.5)
    # output is exactly the target: every gradient vanishes on both paths
    assert surrogate.gradient_check(model, x, y) < 1e-8


def test_affine_model_matches_analytic_gradient():
    rng = np.random.default_rng(13)
    W = rng.normal(size=(1, 3)) * 0.1
    b = rng.normal(size=1) * 0.1
    model = surrogate.SurrogateModel(layer_sizes=(3, 1), weights=(W,),
                                     biases=(b,))
    x = rng.normal(size=(5, 3))
    y = rng.uniform(0.2, 0.8, size=5)
    loss, gW, gb = surrogate._loss_and_gradients(model, x, y)
    z = x @ W.T + b
    s = 0.5 * (1 + np.tanh(0.5 * z[:, 0]))
    common = 2.0 / len(y) * (s - y) * s * (1 - s)
    gW_exact = (common[:, None] * x).sum(axis=0)[None, :]
    gb_exact = common.sum()
    assert np.max(np.abs(gW - gW_exact)) < 1e-10
    assert abs(gb[0] - gb_exact) < 1e-10


# ---------------------------------------------------------------------------
# persistence


def test_save_load_round_trip_is_exact(tmp_path):
    data = toy_dataset(n=40, d=4, seed=6)
    config = surrogate.TrainConfig(epochs=20, batch_size=8, seed=6)
    model, _ = surrogate.train(surrogate.init_model((4, 8, 1), seed=6),
                               data, config)
    path = tmp_path / "model.json"
    surrogate.save(model, str(path))
    loaded = surrogate.load(str(path))
    probe = np.random.default_rng(0).uniform(50, 150, size=(20, 4))
    assert np.array_equal(surrogate.predict_batch(model, probe),
                          surrogate.predict_batch(loaded, probe))


def test_truncated_model_file_fails_closed(tmp_path):
    model = surrogate.init_model((4, 8, 1), seed=0)
    path = tmp_path / "model.json"
    surrogate.save(model, str(path))
    text = path.read_text()
    path.write_text(text[:len(text) // 2])
    with pytest.raises(ModelFormatError) as err:
        surrogate.load(str(path))
    assert err.value.byte_offset is not None


def test_version_mismatch_is_explicit(tmp_path):
    model = surrogate.init_model((4, 8, 1), seed=0)
    path = tmp_path / "model.json"
    surrogate.save(model, str(path))
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(UnsupportedVersionError):
        surrogate.load(str(path))
