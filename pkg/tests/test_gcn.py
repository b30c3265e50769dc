#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import dataclasses

import numpy as np
import pytest

from hiddenshift._types import ConfigError, DimensionError, HiddenShiftError, TrainingDivergedError
from hiddenshift.gcn import (
    TrainConfig,
    accuracy,
    forward,
    forward_from_latent,
    graph_operator,
    load_checkpoint,
    predict,
    save_checkpoint,
    train_surrogate,
)

from .conftest import FAST_TRAIN, random_params


def test_forward_shapes(toy_graph):
    params = random_params(toy_graph.d, 5, toy_graph.c)
    a_norm = graph_operator(toy_graph)
    h1, logits = forward(a_norm, toy_graph.features, params)

    assert h1.shape == (toy_graph.n, 5)
    assert logits.shape == (toy_graph.n, toy_graph.c)
    assert np.all(h1 >= 0)
    np.testing.assert_allclose(forward_from_latent(a_norm, h1, params.w2), logits)


def test_forward_rejects_mismatched_weights(toy_graph):
    params = random_params(toy_graph.d + 1, 5, toy_graph.c)

    with pytest.raises(DimensionError):
        forward(graph_operator(toy_graph), toy_graph.features, params)

    with pytest.raises(DimensionError):
        predict(toy_graph, params)


def test_training_fits_train_nodes(toy_graph):
    history = []
    params = train_surrogate(toy_graph, FAST_TRAIN, history)

    assert len(history) == FAST_TRAIN.epochs
    assert history[-1] < history[0]
    assert accuracy(toy_graph, params, toy_graph.train_mask) >= 0.75
    assert params.hidden_dim == FAST_TRAIN.hidden_dim


def test_training_is_deterministic(toy_graph):
    config = dataclasses.replace(FAST_TRAIN, dropout=0.3, epochs=20)
    first, second = train_surrogate(toy_graph, config), train_surrogate(toy_graph, config)

    np.testing.assert_array_equal(first.w1, second.w1)
    np.testing.assert_array_equal(first.w2, second.w2)


def test_checkpoint_round_trip(tmp_path, surrogate):
    path = str(tmp_path / "surrogate.ckpt")
    save_checkpoint(path, surrogate, 5, "abc")
    params, header = load_checkpoint(path)

    np.testing.assert_array_equal(params.w1, surrogate.w1)
    np.testing.assert_array_equal(params.w2, surrogate.w2)
    assert header["seed"] == 5
    assert header["config_hash"] == "abc"


def test_truncated_checkpoint(tmp_path, surrogate):
    path = tmp_path / "surrogate.ckpt"
    save_checkpoint(str(path), surrogate, 0, "abc")
    path.write_bytes(path.read_bytes()[:-8])

    with pytest.raises(HiddenShiftError, match="truncated"):
        load_checkpoint(str(path))


@pytest.mark.parametrize(
    "override",
    [
        {"lr": 0.0},
        {"epochs": 0},
        {"optimizer": "rmsprop"},
        {"dropout": 1.0},
        {"hidden_dim": 0},
        {"weight_decay": -1.0},
    ],
)
def test_bad_train_config(override):
    with pytest.raises(ConfigError):
        TrainConfig(**override)


def test_empty_train_mask(toy_graph):
    graph = dataclasses.replace(
        toy_graph,
        train_mask=np.zeros(toy_graph.n, dtype=bool),
        test_mask=np.ones(toy_graph.n, dtype=bool),
    )

    with pytest.raises(DimensionError):
        train_surrogate(graph, FAST_TRAIN)


def test_divergence_is_reported(toy_graph):
    config = TrainConfig(lr=1e300, epochs=5, optimizer="sgd", hidden_dim=4, dropout=0.0)

    with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError) as error:
        train_surrogate(toy_graph, config)

    assert error.value.stage == "training"
    assert error.value.step is not None
