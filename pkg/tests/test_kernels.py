#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import math

import numpy as np
import pytest

from hiddenshift._types import DimensionError, NonFiniteError
from hiddenshift.graph import UNKNOWN, normalized_adjacency
from hiddenshift.kernels import (
    ensure_finite,
    finite_difference_check,
    masked_cross_entropy,
    masked_cross_entropy_adjoint,
    normalized_adjacency_adjoint,
    row_kl,
    row_kl_adjoint,
)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_cross_entropy_of_uniform_logits():
    logits = np.zeros((5, 3))
    labels = np.array([0, 1, 2, 0, 1])
    assert masked_cross_entropy(logits, labels, np.ones(5, dtype=bool)) == pytest.approx(math.log(3))


def test_cross_entropy_masks():
    labels = np.array([0, UNKNOWN, 1])

    with pytest.raises(DimensionError):
        masked_cross_entropy(np.zeros((3, 2)), labels, np.zeros(3, dtype=bool))

    with pytest.raises(ValueError):
        masked_cross_entropy(np.zeros((3, 2)), labels, np.ones(3, dtype=bool))


def test_cross_entropy_gradient(rng):
    labels = np.array([0, 2, 1, 1, UNKNOWN, 0])
    mask = labels != UNKNOWN

    report = finite_difference_check(
        lambda z: masked_cross_entropy_adjoint(z, labels, mask),
        rng.standard_normal((6, 3)),
    )
    assert report["max_rel_err"] < 1e-3


def test_cross_entropy_rejects_non_finite():
    with pytest.raises(NonFiniteError):
        masked_cross_entropy(np.array([[np.nan, 0.0]]), np.array([0]), np.array([True]))


def test_row_kl_is_a_divergence(rng):
    h = rng.standard_normal((4, 5))

    assert row_kl(h, h) == 0.0
    assert row_kl(h, rng.standard_normal((4, 5))) > 0

    with pytest.raises(DimensionError):
        row_kl(h, h[:, :3])


def test_row_kl_gradients(rng):
    a, b = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))

    first = finite_difference_check(lambda x: row_kl_adjoint(x, b)[:2], a)
    second = finite_difference_check(
        lambda x: (row_kl_adjoint(a, x)[0], row_kl_adjoint(a, x)[2]), b
    )

    assert first["max_rel_err"] < 1e-3
    assert second["max_rel_err"] < 1e-3


def test_normalized_adjacency_gradient(rng):
    n = 6
    weights = rng.uniform(0.1, 1.0, size=(n, n))
    adjacency = np.triu(weights, 1) + np.triu(weights, 1).T
    g = rng.standard_normal((n, n))
    g = g + g.T

    def loss(a):
        return float((g * normalized_adjacency(a)).sum()), normalized_adjacency_adjoint(a, g)

    assert finite_difference_check(loss, adjacency, samples=n * n)["max_rel_err"] < 1e-3


def test_frozen_degree_drops_degree_term(rng):
    adjacency = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
    g = rng.standard_normal((3, 3))

    frozen = normalized_adjacency_adjoint(adjacency, g, frozen_degree=True)
    degree = adjacency.sum(axis=1) + 1
    np.testing.assert_allclose(frozen, g / np.sqrt(np.outer(degree, degree)))


def test_finite_difference_catches_wrong_gradient():
    report = finite_difference_check(lambda x: (float(x @ x), 3 * x), np.ones(4))
    assert report["max_rel_err"] > 0.1
    assert report["checked"] == 4


def test_ensure_finite():
    ensure_finite("ok", np.ones(3))

    with pytest.raises(NonFiniteError) as error:
        ensure_finite("stage", np.array([np.inf]), step=4)

    assert error.value.stage == "stage"
    assert error.value.step == 4
