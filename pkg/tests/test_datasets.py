#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import os

import numpy as np
import pytest

from hiddenshift.graph import budget_from_ratio, load_graph

from .conftest import data_root


@pytest.mark.slow
@pytest.mark.parametrize("name, n, c", [("cora", 2708, 7), ("citeseer", 3327, 6)])
def test_citation_dataset(name, n, c):
    directory = os.path.join(data_root(), name)
    if not os.path.isdir(directory):
        pytest.skip(f"{name} is not present under HIDDENSHIFT_DATA")

    graph = load_graph(directory)

    assert graph.n == n
    assert graph.c == c
    np.testing.assert_array_equal(graph.adjacency, graph.adjacency.T)
    assert not graph.adjacency.diagonal().any()
    assert budget_from_ratio(graph, 0.05).epsilon_flips > 0
