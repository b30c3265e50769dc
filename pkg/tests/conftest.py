#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import os

import numpy as np
import pytest

from hiddenshift.gcn import GcnParams, TrainConfig, train_surrogate
from hiddenshift.graph import Graph, save_graph
from hiddenshift.loader import Modules

FAST_TRAIN = TrainConfig(lr=0.05, epochs=60, hidden_dim=8, dropout=0.0, seed=0)


def make_graph(n: int = 12, d: int = 4, seed: int = 0) -> Graph:
    """Two alternating classes, a same-class ring plus a few random edges"""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    adjacency = np.zeros((n, n))

    for i in range(n):
        j = (i + 2) % n
        adjacency[i, j] = adjacency[j, i] = 1.0

    rows, cols = np.triu_indices(n, k=1)
    same = labels[rows] == labels[cols]
    extra = rng.random(rows.size) < np.where(same, 0.25, 0.08)
    adjacency[rows[extra], cols[extra]] = 1.0
    adjacency[cols[extra], rows[extra]] = 1.0
    np.fill_diagonal(adjacency, 0.0)

    features = (2 * labels - 1)[:, None] * 1.0 + 0.5 * rng.standard_normal((n, d))
    train = np.zeros(n, dtype=bool)
    train[: n // 2 + n % 2] = True
    return Graph(adjacency, features, labels, 2, train, ~train)


def random_params(d: int, hidden: int, c: int, seed: int = 0) -> GcnParams:
    rng = np.random.default_rng(seed)
    return GcnParams(rng.standard_normal((d, hidden)), rng.standard_normal((hidden, c)))


@pytest.fixture
def toy_graph() -> Graph:
    return make_graph()


@pytest.fixture
def tiny_graph() -> Graph:
    return make_graph(n=8, d=6, seed=3)


@pytest.fixture
def surrogate(toy_graph) -> GcnParams:
    return train_surrogate(toy_graph, FAST_TRAIN)


@pytest.fixture
def registry() -> Modules:
    return Modules().register_all()


@pytest.fixture
def dataset_dir(tmp_path, toy_graph) -> str:
    path = str(tmp_path / "toy")
    save_graph(toy_graph, path)
    return path


def data_root() -> str:
    return os.environ.get("HIDDENSHIFT_DATA", "")


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="run the long attack runs even without HIDDENSHIFT_DATA",
    )


def pytest_collection_modifyitems(config, items):
    if data_root() or config.getoption("--run-slow"):
        return

    skip = pytest.mark.skip(reason="needs --run-slow or HIDDENSHIFT_DATA")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
