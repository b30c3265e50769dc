#    hiddenshift - graph structure attack laboratory
#    Licensed under the GNU AGPLv3
#    https://www.gnu.org/licenses/agpl-3.0.html

import logging

import numpy as np
import pytest

from hiddenshift._types import BudgetError, DimensionError
from hiddenshift.baselines import (
    CrossEntropyObjective,
    attack_labels,
    edge_similarity,
    grad_greedy_attack,
    jaccard_defense,
    low_rank_approximation,
    pgd_ce_attack,
    random_attack,
    svd_defense,
)
from hiddenshift.graph import AttackBudget, Graph, budget_from_ratio, flip_count, pair_index
from hiddenshift.kernels import finite_difference_check
from hiddenshift.mapping import MapConfig


def _three_nodes(features, edges):
    adjacency = np.zeros((3, 3))
    for i, j in edges:
        adjacency[i, j] = adjacency[j, i] = 1.0

    train = np.array([True, True, False])
    return Graph(adjacency, np.array(features, dtype=float), np.array([0, 1, 1]), 2, train, ~train)


def test_random_attack_flips_exactly(toy_graph):
    budget = budget_from_ratio(toy_graph, 0.25)
    first = random_attack(toy_graph, budget, seed=3)
    second = random_attack(toy_graph, budget, seed=3)

    assert first.flips == budget.epsilon_flips
    assert flip_count(toy_graph.adjacency, first.adjacency) == budget.epsilon_flips
    np.testing.assert_array_equal(first.adjacency, second.adjacency)
    assert not np.array_equal(first.adjacency, random_attack(toy_graph, budget, seed=4).adjacency)


def test_random_attack_rejects_huge_budget(toy_graph):
    with pytest.raises(BudgetError):
        random_attack(toy_graph, AttackBudget(pair_index(toy_graph.n).size + 1), seed=0)


def test_attack_labels_fill_test_nodes(toy_graph, surrogate):
    labels = attack_labels(toy_graph, surrogate)

    assert np.all(labels >= 0)
    np.testing.assert_array_equal(
        labels[toy_graph.train_mask], toy_graph.labels[toy_graph.train_mask]
    )


def test_cross_entropy_objective_gradient(toy_graph, surrogate):
    objective = CrossEntropyObjective(toy_graph, surrogate, attack_labels(toy_graph, surrogate))
    s = 0.3 * np.random.default_rng(6).random(objective.size)

    assert finite_difference_check(objective, s)["max_rel_err"] < 1e-3
    assert objective.value(s) == pytest.approx(objective(s)[0])


def test_grad_greedy_stays_within_budget(toy_graph, surrogate):
    budget = budget_from_ratio(toy_graph, 0.25)
    result = grad_greedy_attack(toy_graph, surrogate, budget)

    assert result.method == "grad-greedy"
    assert 0 < result.flips <= budget.epsilon_flips
    np.testing.assert_array_equal(result.adjacency, result.adjacency.T)


def test_pgd_ce_stays_within_budget(toy_graph, surrogate):
    budget = budget_from_ratio(toy_graph, 0.25)
    result = pgd_ce_attack(toy_graph, surrogate, budget, MapConfig(iterations=20, samples=5), seed=0)

    assert result.method == "pgd-ce"
    assert result.flips <= budget.epsilon_flips
    assert len(result.trace["loss"]) == 21


def test_pgd_ce_without_budget(toy_graph, surrogate):
    result = pgd_ce_attack(toy_graph, surrogate, AttackBudget(0), MapConfig(), seed=0)

    assert result.flips == 0


def test_jaccard_prunes_disjoint_binary_features():
    graph = _three_nodes([[1, 0, 0], [0, 1, 1], [0, 1, 0]], [(0, 1), (1, 2)])
    defended = jaccard_defense(graph, 0.01)

    assert defended.adjacency[0, 1] == 0 and defended.adjacency[1, 0] == 0
    assert defended.adjacency[1, 2] == 1
    assert not defended.weighted


def test_similarity_falls_back_to_cosine():
    features = np.array([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.1]])
    values = edge_similarity(features, np.array([0, 0]), np.array([1, 2]))

    assert values[0] == pytest.approx(-1.0)
    assert values[1] == pytest.approx(1 / np.sqrt(1.01))


def test_jaccard_plugin_reads_threshold(registry):
    graph = _three_nodes([[1, 0, 0], [1, 1, 0], [0, 1, 0]], [(0, 1), (1, 2)])
    defense = registry.lookup_defense("jaccard")

    defense.config["defense.jaccard_threshold"] = 0.6
    assert defense.apply(graph).num_edges == 0

    defense.config["defense.jaccard_threshold"] = 0.5
    assert defense.apply(graph).num_edges == 2


def test_full_rank_svd_reconstructs(toy_graph):
    weighted = svd_defense(toy_graph, toy_graph.n)
    binary = svd_defense(toy_graph, toy_graph.n, binarize=True)

    assert weighted.weighted
    np.testing.assert_allclose(weighted.adjacency, toy_graph.adjacency, atol=1e-9)
    np.testing.assert_array_equal(binary.adjacency, toy_graph.adjacency)
    assert not binary.weighted


def test_svd_rank_is_clamped(toy_graph):
    defended = svd_defense(toy_graph, 10 * toy_graph.n)

    assert np.all(defended.adjacency >= 0)
    assert np.all(np.diag(defended.adjacency) == 0)


def test_low_rank_approximation():
    u = np.arange(1.0, 5.0)
    np.testing.assert_allclose(low_rank_approximation(np.outer(u, u), 1), np.outer(u, u))

    with pytest.raises(DimensionError):
        low_rank_approximation(np.eye(3), 0)

    with pytest.raises(DimensionError):
        low_rank_approximation(np.eye(3), 4)


def test_low_rank_approximation_matches_eigen_truncation():
    rng = np.random.default_rng(12)
    matrix = rng.standard_normal((9, 9))
    matrix = matrix + matrix.T
    values, vectors = np.linalg.eigh(matrix)

    for rank in (1, 3, 6):
        keep = np.argsort(-np.abs(values))[:rank]
        reference = (vectors[:, keep] * values[keep]) @ vectors[:, keep].T
        approx = low_rank_approximation(matrix, rank)

        np.testing.assert_allclose(approx, reference, atol=1e-9)
        residual = np.sort(np.abs(values))[: 9 - rank]
        assert np.linalg.norm(matrix - approx) == pytest.approx(np.linalg.norm(residual))


def test_svd_defense_matches_clamped_reconstruction(toy_graph):
    u, sigma, vt = np.linalg.svd(toy_graph.adjacency)
    reference = (u[:, :3] * sigma[:3]) @ vt[:3]
    reference = np.maximum((reference + reference.T) / 2, 0.0)
    np.fill_diagonal(reference, 0.0)

    np.testing.assert_allclose(svd_defense(toy_graph, 3).adjacency, reference, atol=1e-12)


def test_svd_rank_clamp_is_logged(toy_graph, caplog):
    with caplog.at_level(logging.WARNING, logger="hiddenshift.baselines"):
        svd_defense(toy_graph, toy_graph.n + 5)

    assert f"exceeds the {toy_graph.n} nodes" in caplog.text


def _cross_entropy(graph, params, attacked):
    objective = CrossEntropyObjective(graph, params, attack_labels(graph, params))
    s = pair_index(graph.n).gather(np.abs(attacked - graph.adjacency))
    return -objective.value(s)


def test_grad_greedy_beats_random_flips(toy_graph, surrogate):
    budget = budget_from_ratio(toy_graph, 0.25)
    attacked = grad_greedy_attack(toy_graph, surrogate, budget).adjacency
    greedy = _cross_entropy(toy_graph, surrogate, attacked)
    random = [
        _cross_entropy(toy_graph, surrogate, random_attack(toy_graph, budget, seed).adjacency)
        for seed in range(10)
    ]

    assert greedy >= np.mean(random)
